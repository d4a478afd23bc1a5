//! Experiment configuration: presets, JSON merging and validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExperimentError;
use crate::analytic::GridSpec;
use crate::network::Activation;
use crate::physics::{Dimension, MaterialParams};
use crate::sampler::SamplerConfig;
use crate::trainer::{Architecture, LossWeights, Mode, StopCriterion, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "maxwell1d")]
    Maxwell1d,
    #[serde(rename = "maxwell2d")]
    Maxwell2d,
}

impl Case {
    pub fn dim(self) -> Dimension {
        match self {
            Case::Maxwell1d => Dimension::One,
            Case::Maxwell2d => Dimension::Two,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Maxwell1d => "maxwell1d",
            Case::Maxwell2d => "maxwell2d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModeSelection {
    #[serde(rename = "da-pinn")]
    DaPinn,
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "both")]
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::DaPinn => vec![Mode::DaPinn],
            ModeSelection::Baseline => vec![Mode::Baseline],
            ModeSelection::Both => vec![Mode::DaPinn, Mode::Baseline],
        }
    }
}

impl std::str::FromStr for ModeSelection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "da-pinn" => Ok(ModeSelection::DaPinn),
            "baseline" => Ok(ModeSelection::Baseline),
            "both" => Ok(ModeSelection::Both),
            _ => Err(format!(
                "unknown mode `{s}` (expected da-pinn, baseline or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Number of synthetic measurements.
    pub n: usize,
    pub noise_sd: f64,
    /// Read measurements from this CSV instead of synthesising them.
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollocationConfig {
    pub n_p1: usize,
    pub n_p2: usize,
    pub n_i: usize,
}

/// Training settings shared by both methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub lambda_learning_rate: Option<f64>,
    pub iterations: usize,
    pub resample_every: usize,
    pub weights: LossWeights,
    pub clamp_fraction: f64,
    pub stop: StopCriterion,
    pub initial: MaterialParams,
    pub architecture: Architecture,
    pub threads: usize,
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    pub preset: String,
    pub mode: ModeSelection,
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub collocation: CollocationConfig,
    pub train: TrainSettings,
    pub grid: GridSpec,
    /// Written into resolved configs to record the ground-truth case; ignored
    /// on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<Value>,
}

pub const PRESETS: [&str; 3] = ["paper-1d", "paper-2d", "desk-2d"];

/// Every default for `preset`.
pub fn preset(name: &str) -> Result<ExperimentConfig, ExperimentError> {
    let arch = |depth: usize, width: usize| Architecture {
        hidden: vec![width; depth],
        activation: Activation::Relu,
        input_scaling: true,
    };
    let base = |case: Case, iterations: usize| TrainSettings {
        learning_rate: 2e-3,
        lambda_learning_rate: Some(1e-2),
        iterations,
        resample_every: 1,
        weights: LossWeights::default(),
        clamp_fraction: 0.02,
        stop: StopCriterion::MaxIterations,
        initial: match case {
            Case::Maxwell1d => MaterialParams::new(1.0, 1.0, 13.0, 0.0, 15.0),
            Case::Maxwell2d => MaterialParams::new(2.0, 1.0, 13.0, 0.0, 15.0),
        },
        architecture: arch(5, 30),
        threads: 0,
    };
    let config = match name {
        "paper-1d" => ExperimentConfig {
            case: Case::Maxwell1d,
            preset: name.into(),
            mode: ModeSelection::DaPinn,
            seed: 1,
            out: PathBuf::from("runs/paper-1d"),
            data: DataConfig {
                n: 2000,
                noise_sd: 0.0,
                path: None,
            },
            collocation: CollocationConfig {
                n_p1: 4000,
                n_p2: 4000,
                n_i: 2000,
            },
            train: base(Case::Maxwell1d, 25_000),
            grid: GridSpec::default_for(Dimension::One),
            analytic: None,
        },
        "paper-2d" | "desk-2d" => {
            let full = name == "paper-2d";
            let mut train = base(Case::Maxwell2d, if full { 100_000 } else { 30_000 });
            train.architecture = if full { arch(8, 50) } else { arch(6, 40) };
            ExperimentConfig {
                case: Case::Maxwell2d,
                preset: name.into(),
                mode: ModeSelection::DaPinn,
                seed: 1,
                out: PathBuf::from(format!("runs/{name}")),
                data: DataConfig {
                    n: if full { 8000 } else { 4000 },
                    noise_sd: 0.0,
                    path: None,
                },
                collocation: if full {
                    CollocationConfig {
                        n_p1: 10_000,
                        n_p2: 10_000,
                        n_i: 5000,
                    }
                } else {
                    CollocationConfig {
                        n_p1: 5000,
                        n_p2: 5000,
                        n_i: 2500,
                    }
                },
                train,
                grid: GridSpec::default_for(Dimension::Two),
                analytic: None,
            }
        }
        _ => {
            return Err(ExperimentError::Config(format!(
                "unknown preset `{name}`{} (available: {})",
                suggest(name, PRESETS.iter().copied()),
                PRESETS.join(", ")
            )))
        }
    };
    Ok(config)
}

/// `" (did you mean `x`?)"` for the closest candidate, if any is close.
pub fn suggest<'a>(word: &str, candidates: impl Iterator<Item = &'a str>) -> String {
    candidates
        .map(|c| (strsim::jaro_winkler(word, c), c))
        .filter(|(s, _)| *s > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map_or_else(String::new, |(_, c)| format!(" (did you mean `{c}`?)"))
}

/// Rejects keys of `user` that have no counterpart in `defaults`, naming the
/// nearest valid key.
fn check_keys(user: &Value, defaults: &Value, path: &str) -> Result<(), ExperimentError> {
    if let (Value::Object(u), Value::Object(d)) = (user, defaults) {
        for (k, v) in u {
            let here = if path.is_empty() {
                k.clone()
            } else {
                format!("{path}.{k}")
            };
            match d.get(k) {
                // a variant switch is checked by deserialization instead
                Some(_) if v.get("kind").is_some() => {}
                Some(dv) => check_keys(v, dv, &here)?,
                None if path.is_empty() && k == "analytic" => {}
                None => {
                    return Err(ExperimentError::Config(format!(
                        "unknown key `{here}`{}",
                        suggest(k, d.keys().map(String::as_str))
                    )))
                }
            }
        }
    }
    Ok(())
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    // Tagged enums are replaced whole so that stale fields of
                    // another variant do not linger.
                    Some(bv) if bv.is_object() && v.is_object() && v.get("kind").is_none() => {
                        merge(bv, v)
                    }
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

fn default_preset(case: &str) -> &'static str {
    match case {
        "maxwell2d" => "paper-2d",
        _ => "paper-1d",
    }
}

/// Parses a user configuration: `case` is required, `preset` selects the
/// defaults (by default the full-scale preset of the case), and every other key
/// overrides the preset.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ExperimentError> {
    let user: Value = serde_json::from_str(text)
        .map_err(|e| ExperimentError::Config(format!("invalid JSON: {e}")))?;
    let obj = user
        .as_object()
        .ok_or_else(|| ExperimentError::Config("configuration must be a JSON object".into()))?;
    let case = match obj.get("case") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(ExperimentError::Config(format!(
                "`case` must be \"maxwell1d\" or \"maxwell2d\", got {other}"
            )))
        }
        None => {
            return Err(ExperimentError::Config(
                "missing required key `case` (\"maxwell1d\" or \"maxwell2d\")".into(),
            ))
        }
    };
    if case != "maxwell1d" && case != "maxwell2d" {
        return Err(ExperimentError::Config(format!(
            "`case` must be \"maxwell1d\" or \"maxwell2d\", got \"{case}\"{}",
            suggest(&case, ["maxwell1d", "maxwell2d"].into_iter())
        )));
    }
    let preset_name = match obj.get("preset") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(ExperimentError::Config(format!(
                "`preset` must be a string, got {other}"
            )))
        }
        None => default_preset(&case).to_string(),
    };
    let defaults = preset(&preset_name)?;
    if defaults.case.name() != case {
        return Err(ExperimentError::Config(format!(
            "preset `{preset_name}` is for case {}, not {case}",
            defaults.case.name()
        )));
    }
    let mut merged = serde_json::to_value(&defaults).expect("preset serializes");
    check_keys(&user, &merged, "")?;
    merge(&mut merged, &user);
    let mut config: ExperimentConfig = serde_json::from_value(merged)
        .map_err(|e| ExperimentError::Config(format!("invalid value: {e}")))?;
    config.analytic = None;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.data.n == 0 && self.data.path.is_none() {
            return bad("data.n must be >= 1".into());
        }
        if !(self.data.noise_sd >= 0.0 && self.data.noise_sd.is_finite()) {
            return bad(format!(
                "data.noise_sd must be >= 0, got {}",
                self.data.noise_sd
            ));
        }
        for (k, v) in [
            ("collocation.n_p1", self.collocation.n_p1),
            ("collocation.n_p2", self.collocation.n_p2),
            ("collocation.n_i", self.collocation.n_i),
        ] {
            if v == 0 {
                return bad(format!("{k} must be >= 1"));
            }
        }
        match self.case.dim() {
            Dimension::One if self.grid.nt < 2 || self.grid.nx < 2 => {
                return bad("grid.nt and grid.nx must be >= 2 for maxwell1d".into())
            }
            Dimension::Two
                if self.grid.nx < 2 || self.grid.ny < 2 || self.grid.t_slices.is_empty() =>
            {
                return bad(
                    "grid.nx, grid.ny must be >= 2 and grid.t_slices nonempty for maxwell2d".into(),
                )
            }
            _ => {}
        }
        self.train_config(Mode::DaPinn)
            .validate()
            .map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn train_config(&self, mode: Mode) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            mode,
            learning_rate: t.learning_rate,
            lambda_learning_rate: t.lambda_learning_rate,
            iterations: t.iterations,
            resample_every: t.resample_every,
            weights: t.weights,
            clamp_fraction: t.clamp_fraction,
            stop: t.stop,
            initial: t.initial,
            architecture: t.architecture.clone(),
            seed: self.seed,
            threads: t.threads,
        }
    }

    pub fn sampler_config(&self, n_data: usize) -> SamplerConfig {
        SamplerConfig {
            n_data,
            n_p1: self.collocation.n_p1,
            n_p2: self.collocation.n_p2,
            n_i: self.collocation.n_i,
            seed: self.seed,
        }
    }
}
