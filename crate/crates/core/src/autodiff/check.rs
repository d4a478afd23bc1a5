//! Central-difference gradient checking.

use std::fmt;

use super::tangent::{record, Program};
use super::AdError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Finite-difference half step `h` in `(f(p+h) - f(p-h)) / 2h`.
    pub step: f64,
    /// Largest accepted relative error.
    pub tolerance: f64,
    /// Lower bound on the relative-error denominator, so entries that are
    /// zero up to roundoff are compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-6,
            floor: 1e-3,
        }
    }
}

impl GradCheckConfig {
    pub fn new(step: f64, tolerance: f64) -> Self {
        Self {
            step,
            tolerance,
            ..Self::default()
        }
    }

    pub fn relative_error(&self, analytic: f64, numeric: f64) -> f64 {
        let denom = analytic.abs().max(numeric.abs()).max(self.floor);
        (analytic - numeric).abs() / denom
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckEntry {
    pub leaf: String,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &GradCheckEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }
}

impl fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<24} {:>16} {:>16} {:>10}",
            "leaf", "analytic", "numeric", "rel.err"
        )?;
        for e in &self.entries {
            writeln!(
                f,
                "{:<24} {:>16.9e} {:>16.9e} {:>10.2e}{}",
                e.leaf,
                e.analytic,
                e.numeric,
                e.relative_error,
                if e.passed { "" } else { "  FAIL" }
            )?;
        }
        write!(f, "max relative error {:.3e}", self.max_relative_error)
    }
}

/// Central differences of `f` at `point`, one entry per coordinate.
pub fn central_difference(mut f: impl FnMut(&[f64]) -> f64, point: &[f64], step: f64) -> Vec<f64> {
    let mut p = point.to_vec();
    (0..point.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + step;
            let plus = f(&p);
            p[i] = orig - step;
            let minus = f(&p);
            p[i] = orig;
            (plus - minus) / (2.0 * step)
        })
        .collect()
}

/// Tabulates analytic against numeric gradients.
pub fn compare_gradients(
    names: &[String],
    analytic: &[f64],
    numeric: &[f64],
    config: &GradCheckConfig,
) -> GradCheckReport {
    assert_eq!(analytic.len(), numeric.len(), "gradient lengths differ");
    assert_eq!(names.len(), analytic.len(), "one name per entry");
    let entries: Vec<GradCheckEntry> = names
        .iter()
        .zip(analytic.iter().zip(numeric))
        .map(|(leaf, (&a, &n))| {
            let relative_error = config.relative_error(a, n);
            GradCheckEntry {
                leaf: leaf.clone(),
                analytic: a,
                numeric: n,
                relative_error,
                passed: relative_error <= config.tolerance,
            }
        })
        .collect();
    let max_relative_error = entries.iter().map(|e| e.relative_error).fold(0.0, f64::max);
    GradCheckReport {
        max_relative_error,
        entries,
    }
}

/// Checks the reverse-mode gradient of a scalar program against central
/// differences, leaf by leaf.
pub fn check_gradient<P: Program>(
    program: &P,
    point: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport, AdError> {
    let config = GradCheckConfig::new(step, tolerance);
    let rec = record(program, point)?;
    let grad = rec.tape.backward(rec.output)?;
    let names = program.leaf_names();
    let analytic: Vec<f64> = names.iter().map(|n| grad.scalar(n)).collect();
    let numeric = central_difference(
        |p| {
            record(program, p)
                .map(|r| r.value().item())
                .unwrap_or(f64::NAN)
        },
        point,
        step,
    );
    Ok(compare_gradients(&names, &analytic, &numeric, &config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Expr;

    struct Quadratic;
    impl Program for Quadratic {
        fn leaf_names(&self) -> Vec<String> {
            vec!["a".into(), "b".into(), "c".into()]
        }
        // a^2 + 3ab - 2c^2 + b
        fn eval<E: Expr>(&self, v: &[E]) -> E {
            v[0].square() + (v[0] * v[1]).scale(3.0) - v[2].square().scale(2.0) + v[1]
        }
    }

    #[test]
    fn quadratic_form_is_exact_to_roundoff() {
        let report = check_gradient(&Quadratic, &[0.7, -1.3, 2.1], 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "{report}");
        assert!(report.max_relative_error < 1e-7, "{report}");
    }

    #[test]
    fn wrong_gradients_are_flagged() {
        let config = GradCheckConfig::default();
        let names = vec!["p".to_string(), "q".to_string()];
        let report = compare_gradients(&names, &[1.0, 2.0], &[1.0, 2.1], &config);
        assert!(!report.passed());
        assert_eq!(report.failures().count(), 1);
        assert_eq!(report.failures().next().unwrap().leaf, "q");
    }

    #[test]
    fn central_difference_of_cubic() {
        // h^2 truncation term of x^3 is exactly h^2, independent of x.
        let d = central_difference(|p| p[0].powi(3), &[2.0], 1e-3);
        assert!((d[0] - 12.0 - 1e-6).abs() < 1e-9);
    }
}
