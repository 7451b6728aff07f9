//! Experiment configuration: one TOML file with strict schema validation.
//! Every run knob lives here; the command line carries only the config path
//! and an optional command override.

use crate::error::{Result, SnseError};
use crate::grid::Grid;
use crate::noise::{NoiseKind, NoiseModel};
use crate::operators::CutoffSpec;
use crate::snse::SnseConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyOperators,
    HeatRun,
    SnseRun,
    ConvergeStudy,
    UniquenessCheck,
    NoiseAudit,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Command::VerifyOperators => "verify-operators",
            Command::HeatRun => "heat-run",
            Command::SnseRun => "snse-run",
            Command::ConvergeStudy => "converge-study",
            Command::UniquenessCheck => "uniqueness-check",
            Command::NoiseAudit => "noise-audit",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "verify-operators" => Ok(Command::VerifyOperators),
            "heat-run" => Ok(Command::HeatRun),
            "snse-run" => Ok(Command::SnseRun),
            "converge-study" => Ok(Command::ConvergeStudy),
            "uniqueness-check" => Ok(Command::UniquenessCheck),
            "noise-audit" => Ok(Command::NoiseAudit),
            other => Err(format!("unknown command `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub size: usize,
    pub extent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    pub modes: usize,
    pub eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KScheduleConfig {
    #[default]
    EqualsN,
    MeasuredL2,
}

/// Deterministic initial-data generator selection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case", tag = "kind")]
pub enum InitialData {
    TaylorGreen { amplitude: f64 },
    Random { seed: u64 },
    DivergenceFree { seed: u64, max_mode: usize },
}

fn default_ensemble() -> usize {
    1
}

fn default_n_level() -> f64 {
    4.0
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Command,
    pub grid: GridConfig,
    pub p: f64,
    /// Gaussian projector level k.
    pub projector_level: f64,
    /// Cutoff level N of phi.
    pub cutoff_level: f64,
    /// Stopping threshold M.
    pub m: f64,
    /// Stopping scale K.
    pub k_bound: f64,
    pub noise: Option<NoiseConfig>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_ensemble")]
    pub ensemble_size: usize,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Spatial-cutoff level of the prepared initial data.
    #[serde(default = "default_n_level")]
    pub n_level: f64,
    /// Truncation levels of converge-study.
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default)]
    pub k_schedule: KScheduleConfig,
    /// Relative initial-data perturbation of uniqueness-check.
    #[serde(default)]
    pub perturbation: f64,
    pub initial: InitialData,
    #[serde(default)]
    pub dealias_two_thirds: bool,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SnseError::ConfigValidation {
            key: "<toml>".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, reason: String| -> Result<()> {
            Err(SnseError::ConfigValidation { key: key.into(), reason })
        };
        if self.grid.dim == 0 || self.grid.dim > 3 {
            return bad("grid.dim", format!("need 1..=3, got {}", self.grid.dim));
        }
        if self.grid.size < 4 || !self.grid.size.is_multiple_of(2) {
            return bad("grid.size", format!("need even size >= 4, got {}", self.grid.size));
        }
        if !(self.grid.extent > 0.0) {
            return bad("grid.extent", format!("need extent > 0, got {}", self.grid.extent));
        }
        if !(self.p > 2.0) {
            return bad("p", format!("need p > 2, got {}", self.p));
        }
        if !(self.projector_level >= 1.0) {
            return bad("projector_level", format!("need k >= 1, got {}", self.projector_level));
        }
        if !(self.cutoff_level > 0.0) {
            return bad("cutoff_level", format!("need N > 0, got {}", self.cutoff_level));
        }
        if !(self.m > 0.0) || !(self.k_bound > 0.0) {
            return bad("m/k_bound", format!("need M, K > 0, got {}, {}", self.m, self.k_bound));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return bad("dt/t_end", format!("need positive step and horizon, got {}, {}", self.dt, self.t_end));
        }
        let steps = self.t_end / self.dt;
        if (steps.round() * self.dt - self.t_end).abs() > 1e-9 * self.t_end.max(1.0) {
            return bad("dt", format!("dt = {} does not divide t_end = {}", self.dt, self.t_end));
        }
        if self.ensemble_size == 0 {
            return bad("ensemble_size", "need at least one trajectory".into());
        }
        if let Some(n) = &self.noise {
            if n.modes == 0 {
                return bad("noise.modes", "need at least one mode".into());
            }
            let half = self.grid.extent / 2.0;
            if !(n.eps > 0.0 && n.eps < half) {
                return bad("noise.eps", format!("need 0 < eps < {half}, got {}", n.eps));
            }
        }
        if !(self.n_level >= 1.0) {
            return bad("n_level", format!("need n >= 1, got {}", self.n_level));
        }
        if self.command == Command::ConvergeStudy {
            if self.levels.len() < 2 {
                return bad("levels", "converge-study needs at least two levels".into());
            }
            if self.levels.windows(2).any(|w| w[1] <= w[0]) || self.levels[0] < 1.0 {
                return bad("levels", "levels must be >= 1 and strictly increasing".into());
            }
        }
        if !(0.0..1.0).contains(&self.perturbation) {
            return bad("perturbation", format!("need 0 <= delta < 1, got {}", self.perturbation));
        }
        if let InitialData::TaylorGreen { amplitude } = &self.initial {
            if !amplitude.is_finite() {
                return bad("initial.amplitude", "amplitude must be finite".into());
            }
        }
        if let InitialData::DivergenceFree { max_mode, .. } = &self.initial {
            if *max_mode < 1 || 2 * *max_mode >= self.grid.size {
                return bad(
                    "initial.max_mode",
                    format!("need 1 <= max_mode < size/2, got {max_mode}"),
                );
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::cube(self.grid.dim, self.grid.size, self.grid.extent)
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>> {
        self.noise
            .as_ref()
            .map(|n| NoiseModel::inverse_k(n.kind, n.modes, n.eps))
            .transpose()
    }

    pub fn snse_config(&self) -> Result<SnseConfig> {
        Ok(SnseConfig {
            grid: self.grid()?,
            p: self.p,
            projector_level: self.projector_level,
            cutoff: CutoffSpec::new(self.cutoff_level)?,
            noise: self.noise_model()?,
            dt: self.dt,
            t_end: self.t_end,
            dealias_two_thirds: self.dealias_two_thirds,
        })
    }

    /// Canonical JSON rendering, the input of the manifest hash.  The output
    /// directory is not semantically meaningful and is excluded.
    pub fn canonical_json(&self) -> Result<String> {
        let mut canon = self.clone();
        canon.output_dir = PathBuf::new();
        serde_json::to_string(&canon).map_err(|e| SnseError::Other(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const EXAMPLE: &str = r#"
command = "snse-run"
p = 4.0
projector_level = 8.0
cutoff_level = 10.0
m = 4.0
k_bound = 1.0
dt = 1e-3
t_end = 0.02
ensemble_size = 2
master_seed = 7

[grid]
dim = 3
size = 16
extent = 2.0

[noise]
kind = "linear_mollified"
modes = 4
eps = 0.2

[initial]
kind = "divergence-free"
seed = 3
max_mode = 2
"#;

    #[test]
    fn example_parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(cfg.command, Command::SnseRun);
        assert_eq!(cfg.ensemble_size, 2);
        assert_eq!(cfg.n_level, 4.0);
        assert!(cfg.snse_config().is_ok());
    }

    #[test]
    fn unknown_key_is_rejected() {
        let text = format!("{EXAMPLE}\nmystery_knob = 1\n");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("mystery_knob"), "{err}");
    }

    #[test]
    fn validation_names_the_offending_key() {
        let text = EXAMPLE.replace("p = 4.0", "p = 1.5");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains('p'), "{err}");
        let text = EXAMPLE.replace("dt = 1e-3", "dt = 3e-3");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("dt"), "{err}");
    }

    #[test]
    fn canonical_json_is_stable_and_key_sensitive() {
        let a = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        let b = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        assert_eq!(a.canonical_json().unwrap(), b.canonical_json().unwrap());
        let c = ExperimentConfig::from_toml(&EXAMPLE.replace("master_seed = 7", "master_seed = 8"))
            .unwrap();
        assert_ne!(a.canonical_json().unwrap(), c.canonical_json().unwrap());
    }
}
