use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use super::config::BenchConfig;
use super::io::vectors_hash;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::plant::{NoiseProcess, Trajectory};
use crate::rng::{self, label};

#[derive(Debug, Clone, Serialize)]
pub struct FigureSummary {
    pub steps: usize,
    pub noise_seed: u64,
    /// Hash of the disturbance sequence consumed by each run.
    pub noise_hash_robust: String,
    pub noise_hash_hinf: String,
    pub energy_robust: f64,
    pub energy_hinf: f64,
}

fn outputs_csv(t: &Trajectory) -> String {
    let p = t.outputs.first().map_or(0, |y| y.len());
    let mut s = String::from("k");
    for i in 1..=p {
        let _ = write!(s, ",y{i}");
    }
    s.push('\n');
    for (k, y) in t.outputs.iter().enumerate() {
        let _ = write!(s, "{k}");
        for v in y.iter() {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

fn energy(t: &Trajectory) -> f64 {
    t.outputs.iter().map(|y| y.norm_squared()).sum()
}

pub struct FigureRuns {
    pub robust: Trajectory,
    pub hinf: Trajectory,
    pub summary: FigureSummary,
}

/// Simulates both closed loops from `x0 = 0` against one shared noise
/// realization.
pub fn figure_runs(cfg: &BenchConfig, robust: &Mat, hinf: &Mat) -> Result<FigureRuns> {
    cfg.validate()?;
    let plant = cfg.plant_model()?;
    let noise = NoiseProcess::new(cfg.delta, rng::derive_key(cfg.seed, &[label::CLOSED_LOOP]))?;
    let x0 = DVector::zeros(plant.n());
    let r = plant.simulate_closed_loop(robust, &x0, &noise, cfg.figure_steps)?;
    let h = plant.simulate_closed_loop(hinf, &x0, &noise, cfg.figure_steps)?;
    let summary = FigureSummary {
        steps: cfg.figure_steps,
        noise_seed: noise.seed,
        noise_hash_robust: vectors_hash(&r.noises),
        noise_hash_hinf: vectors_hash(&h.noises),
        energy_robust: energy(&r),
        energy_hinf: energy(&h),
    };
    Ok(FigureRuns {
        robust: r,
        hinf: h,
        summary,
    })
}

/// Writes `y_robust.csv` and `y_hinf.csv` (`k,y1,y2,...`) into `out`.
pub fn cmd_figure1(cfg: &BenchConfig, robust: &Mat, hinf: &Mat, out: &Path) -> Result<FigureSummary> {
    let runs = figure_runs(cfg, robust, hinf)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for (name, t) in [("y_robust.csv", &runs.robust), ("y_hinf.csv", &runs.hinf)] {
        let path = out.join(name);
        std::fs::write(&path, outputs_csv(t)).map_err(|e| Error::io(&path, e))?;
    }
    Ok(runs.summary)
}
