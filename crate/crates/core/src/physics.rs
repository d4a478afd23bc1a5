//! Maxwell residuals in a two-piece medium split by the plane `x = d`.
//!
//! Residuals are written against [`Real`] so the same formulas run on plain
//! numbers (tests, reporting) and on tape nodes (training).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Real;
use crate::network::FieldVector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhysicsError {
    #[error("{case} interface residual needs {expected} field components per side, got {left} and {right}")]
    Shape {
        case: &'static str,
        expected: usize,
        left: usize,
        right: usize,
    },
}

/// Trainable physical parameters `[mu1, eps1, mu2, eps2, d]`.
///
/// No positivity is enforced; the optimiser may pass through nonphysical
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub mu1: f64,
    pub eps1: f64,
    pub mu2: f64,
    pub eps2: f64,
    pub d: f64,
}

impl MaterialParams {
    pub const NAMES: [&'static str; 5] = ["mu1", "eps1", "mu2", "eps2", "d"];

    pub fn new(mu1: f64, eps1: f64, mu2: f64, eps2: f64, d: f64) -> Self {
        Self {
            mu1,
            eps1,
            mu2,
            eps2,
            d,
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.mu1, self.eps1, self.mu2, self.eps2, self.d]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn from_slice(a: &[f64]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `(mu, eps)` at `x`; the plane `x = d` belongs to the first medium.
    pub fn material_at(&self, x: f64) -> (f64, f64) {
        if x <= self.d {
            (self.mu1, self.eps1)
        } else {
            (self.mu2, self.eps2)
        }
    }

    /// `(mu, eps)` of one sub-domain.
    pub fn side(&self, side: Side) -> (f64, f64) {
        match side {
            Side::One => (self.mu1, self.eps1),
            Side::Two => (self.mu2, self.eps2),
        }
    }
}

/// Free-function form of [`MaterialParams::material_at`].
pub fn material_at(params: &MaterialParams, x: f64) -> (f64, f64) {
    params.material_at(x)
}

/// Sub-domain label: `One` is `x <= d`, `Two` is `x > d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    One,
    Two,
}

impl Side {
    pub fn of(x: f64, d: f64) -> Self {
        if x <= d {
            Side::One
        } else {
            Side::Two
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "1d")]
    One,
    #[serde(rename = "2d")]
    Two,
}

impl Dimension {
    /// Network input width: `(t, x)` or `(t, x, y)`.
    pub fn input_dim(self) -> usize {
        match self {
            Dimension::One => 2,
            Dimension::Two => 3,
        }
    }

    pub fn field_count(self) -> usize {
        match self {
            Dimension::One => 2,
            Dimension::Two => 3,
        }
    }

    pub fn field_names(self) -> &'static [&'static str] {
        match self {
            Dimension::One => &["E_Y", "H_Z"],
            Dimension::Two => &["E_X", "E_Y", "H_Z"],
        }
    }

    pub fn coordinate_names(self) -> &'static [&'static str] {
        match self {
            Dimension::One => &["t", "x"],
            Dimension::Two => &["t", "x", "y"],
        }
    }
}

/// Space-time box `t in [0, T]`, `x in [0, B]`, and `y in [0, y_max]` in 2D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaseGeometry {
    pub dim: Dimension,
    pub t_max: f64,
    pub x_max: f64,
    pub y_max: Option<f64>,
}

impl CaseGeometry {
    pub fn one_d(t_max: f64, x_max: f64) -> Self {
        assert!(t_max > 0.0 && x_max > 0.0, "bounds must be positive");
        Self {
            dim: Dimension::One,
            t_max,
            x_max,
            y_max: None,
        }
    }

    pub fn two_d(t_max: f64, x_max: f64, y_max: f64) -> Self {
        assert!(
            t_max > 0.0 && x_max > 0.0 && y_max > 0.0,
            "bounds must be positive"
        );
        Self {
            dim: Dimension::Two,
            t_max,
            x_max,
            y_max: Some(y_max),
        }
    }

    /// Upper bound of each input coordinate, in network input order.
    pub fn upper_bounds(&self) -> Vec<f64> {
        let mut b = vec![self.t_max, self.x_max];
        if let Some(y) = self.y_max {
            b.push(y);
        }
        b
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        let ub = self.upper_bounds();
        point.len() == ub.len() && point.iter().zip(&ub).all(|(&p, &u)| (0.0..=u).contains(&p))
    }
}

/// First derivatives feeding the 1D residuals.
#[derive(Debug, Clone, Copy)]
pub struct Derivs1d<R> {
    pub ey_x: R,
    pub ey_t: R,
    pub hz_x: R,
    pub hz_t: R,
}

/// `f = dE_Y/dx + mu dH_Z/dt`, `h = dH_Z/dx + eps dE_Y/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual1d<R> {
    pub f: R,
    pub h: R,
}

impl<R: Real> Residual1d<R> {
    pub fn squared_norm(&self) -> R {
        self.f.square() + self.h.square()
    }
}

pub fn residual_1d<R: Real>(d: &Derivs1d<R>, mu: R, eps: R) -> Residual1d<R> {
    Residual1d {
        f: d.ey_x + mu * d.hz_t,
        h: d.hz_x + eps * d.ey_t,
    }
}

/// First derivatives feeding the 2D (TE) residuals.
#[derive(Debug, Clone, Copy)]
pub struct Derivs2d<R> {
    pub ex_t: R,
    pub ex_y: R,
    pub ey_t: R,
    pub ey_x: R,
    pub hz_t: R,
    pub hz_x: R,
    pub hz_y: R,
}

/// Ampère x and y components and the Faraday z component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual2d<R> {
    pub r_ax: R,
    pub r_ay: R,
    pub r_far: R,
}

impl<R: Real> Residual2d<R> {
    pub fn squared_norm(&self) -> R {
        self.r_ax.square() + self.r_ay.square() + self.r_far.square()
    }
}

pub fn residual_2d<R: Real>(d: &Derivs2d<R>, mu: R, eps: R) -> Residual2d<R> {
    Residual2d {
        r_ax: eps * d.ex_t - d.hz_y,
        r_ay: eps * d.ey_t + d.hz_x,
        r_far: d.ey_x - d.ex_y + mu * d.hz_t,
    }
}

/// Squared jumps of the interface conditions across `x = d`.
///
/// Fields are `[E_Y, H_Z]` in 1D and `[E_X, E_Y, H_Z]` in 2D. With the
/// normal along `x`, E_Y and H_Z are tangential and E_X (2D only) is normal,
/// so the penalty is `(E1Y-E2Y)^2 + (H1Z-H2Z)^2 [+ (eps1 E1X - eps2 E2X)^2]`.
/// H has no normal component here, so no mu term appears.
pub fn interface_jump<R: Real>(
    fields1: &[R],
    fields2: &[R],
    eps1: R,
    eps2: R,
    dim: Dimension,
) -> Result<R, PhysicsError> {
    let n = dim.field_count();
    if fields1.len() != n || fields2.len() != n {
        return Err(PhysicsError::Shape {
            case: match dim {
                Dimension::One => "1D",
                Dimension::Two => "2D",
            },
            expected: n,
            left: fields1.len(),
            right: fields2.len(),
        });
    }
    Ok(match dim {
        Dimension::One => (fields1[0] - fields2[0]).square() + (fields1[1] - fields2[1]).square(),
        Dimension::Two => {
            (fields1[1] - fields2[1]).square()
                + (fields1[2] - fields2[2]).square()
                + (eps1 * fields1[0] - eps2 * fields2[0]).square()
        }
    })
}

/// Interface residual `s` for two network outputs at the same interface point.
pub fn interface_residual(
    fields1: &FieldVector,
    fields2: &FieldVector,
    params: &MaterialParams,
    geometry: &CaseGeometry,
) -> Result<f64, PhysicsError> {
    interface_jump(
        fields1.as_slice(),
        fields2.as_slice(),
        params.eps1,
        params.eps2,
        geometry.dim,
    )
}
