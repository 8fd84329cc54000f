use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::io::load_plant;
use crate::error::{Error, Result};
use crate::experiments::ExperimentConfig;
use crate::lmi::FeasibilityOptions;
use crate::plant::PlantModel;

/// Harness settings. Every field has a default, so `{}` is a valid file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Plant JSON; the built-in benchmark plant when absent.
    pub plant: Option<PathBuf>,
    pub s0: f64,
    pub l: usize,
    pub delta: f64,
    pub gamma: f64,
    pub noise_levels: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub cond_threshold: f64,
    pub max_retries: u32,
    pub margin: f64,
    /// Horizon and trial count for empirical energy ratios.
    pub horizon: usize,
    pub energy_trials: usize,
    /// Length of the `figure1` closed-loop runs.
    pub figure_steps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            plant: None,
            s0: 0.5,
            l: 4,
            delta: 0.2,
            gamma: 0.5,
            noise_levels: vec![0.5, 1.0, 1.5, 2.0, 2.2, 2.4],
            trials: 100,
            seed: 0,
            out_dir: PathBuf::from("out"),
            cond_threshold: 1e-8,
            max_retries: 10,
            margin: crate::lmi::DEFAULT_MARGIN,
            horizon: 10_000,
            energy_trials: 5,
            figure_steps: 100,
        }
    }
}

impl BenchConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.s0.is_finite() {
            return bad("s0 must be finite".into());
        }
        if self.l == 0 {
            return bad("l must be at least 1".into());
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be finite and ≥ 0, got {}", self.delta));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if let Some(v) = self.noise_levels.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return bad(format!("noise level {v} is not a finite value ≥ 0"));
        }
        if !(self.margin >= 0.0) {
            return bad("margin must be ≥ 0".into());
        }
        if self.horizon < crate::verify::MIN_HORIZON {
            return bad(format!("horizon must be at least {}", crate::verify::MIN_HORIZON));
        }
        if self.figure_steps == 0 {
            return bad("figure_steps must be positive".into());
        }
        Ok(())
    }

    /// The configured plant, or the benchmark plant.
    pub fn plant_model(&self) -> Result<PlantModel> {
        match &self.plant {
            Some(path) => load_plant(path).map_err(|e| match e {
                Error::Io { path, source } => Error::Config(format!("cannot read plant file {path}: {source}")),
                other => other,
            }),
            None => Ok(PlantModel::benchmark()),
        }
    }

    pub fn experiment_config(&self, plant: &PlantModel, delta: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            n: plant.n(),
            m: plant.m(),
            l: self.l,
            s0: self.s0,
            delta,
            cond_threshold: self.cond_threshold,
            max_retries: self.max_retries,
            seed,
        }
    }

    pub fn feasibility(&self) -> FeasibilityOptions {
        FeasibilityOptions {
            margin: self.margin,
            ..FeasibilityOptions::default()
        }
    }
}
