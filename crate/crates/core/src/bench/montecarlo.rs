use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::BenchConfig;
use super::io::write_json;
use crate::descriptor::build_descriptor;
use crate::error::{Error, Result};
use crate::experiments::collect;
use crate::lmi::FeasibilityOptions;
use crate::plant::PlantModel;
use crate::rng;
use crate::synthesis::synth_robust;
use crate::verify::spectral_radius;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrialOutcome {
    /// Gain found and `ρ(A + BF) < 1` on the true plant.
    Stabilizing,
    /// The LMI was feasible but the gain does not stabilize the plant.
    FeasibleUnstable,
    /// No gain: infeasible, numerical failure or singular extraction.
    NoGain,
    /// The experiments never passed the conditioning check.
    DataFailure,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub outcome: TrialOutcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloRow {
    pub delta: f64,
    pub trials: usize,
    /// Verified-stabilizing count; the headline number.
    pub verified_success_count: usize,
    /// Trials where the LMI alone was feasible, whatever the verification said.
    pub lmi_feasible_count: usize,
    pub percentage: f64,
    pub records: Vec<TrialRecord>,
}

/// Per-trial seed for noise level `level` (index) and trial `trial`.
pub fn trial_seed(seed: u64, level: usize, trial: usize) -> u64 {
    rng::derive_key(seed, &[level as u64, trial as u64])
}

pub fn run_trial(plant: &PlantModel, cfg: &BenchConfig, opts: &FeasibilityOptions, delta: f64, seed: u64) -> TrialRecord {
    let ecfg = cfg.experiment_config(plant, delta, seed);
    let mut rec = TrialRecord {
        trial: 0,
        seed,
        outcome: TrialOutcome::DataFailure,
        spectral_radius: None,
        detail: None,
    };
    let descriptor = collect(plant, &ecfg).and_then(|ds| build_descriptor(&ds.agg1, &ds.agg2, cfg.s0, delta, cfg.l));
    let d = match descriptor {
        Ok(d) => d,
        Err(e) => {
            rec.detail = Some(e.to_string());
            return rec;
        }
    };
    match synth_robust(&d, opts).and_then(|g| spectral_radius(&plant.closed_loop(&g.f))) {
        Ok(rho) => {
            rec.spectral_radius = Some(rho);
            rec.outcome = if rho < 1.0 {
                TrialOutcome::Stabilizing
            } else {
                TrialOutcome::FeasibleUnstable
            };
        }
        Err(e) => {
            rec.outcome = TrialOutcome::NoGain;
            rec.detail = Some(e.to_string());
        }
    }
    rec
}

/// Robust-synthesis success rates over `cfg.noise_levels`, `cfg.trials` datasets each.
pub fn run_montecarlo(cfg: &BenchConfig) -> Result<Vec<MonteCarloRow>> {
    cfg.validate()?;
    if cfg.noise_levels.is_empty() {
        return Err(Error::Config("noise_levels must not be empty".into()));
    }
    if cfg.trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let plant = cfg.plant_model()?;
    let opts = cfg.feasibility();
    let rows = cfg
        .noise_levels
        .iter()
        .enumerate()
        .map(|(level, &delta)| {
            let records: Vec<TrialRecord> = (0..cfg.trials)
                .into_par_iter()
                .map(|trial| TrialRecord {
                    trial,
                    ..run_trial(&plant, cfg, &opts, delta, trial_seed(cfg.seed, level, trial))
                })
                .collect();
            let verified = records.iter().filter(|r| r.outcome == TrialOutcome::Stabilizing).count();
            let feasible = records
                .iter()
                .filter(|r| matches!(r.outcome, TrialOutcome::Stabilizing | TrialOutcome::FeasibleUnstable))
                .count();
            MonteCarloRow {
                delta,
                trials: cfg.trials,
                verified_success_count: verified,
                lmi_feasible_count: feasible,
                percentage: 100.0 * verified as f64 / cfg.trials as f64,
                records,
            }
        })
        .collect();
    Ok(rows)
}

pub fn table_csv(rows: &[MonteCarloRow]) -> String {
    let mut s = String::from("delta,trials,successes,percentage\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.delta, r.trials, r.verified_success_count, r.percentage);
    }
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    s0: f64,
    l: usize,
    rows: &'a [MonteCarloRow],
}

/// Runs the Monte Carlo study and writes `table.csv` plus the seed manifest
/// `table_manifest.json` into `out`.
pub fn cmd_montecarlo(cfg: &BenchConfig, out: &Path) -> Result<Vec<MonteCarloRow>> {
    let rows = run_montecarlo(cfg)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let csv = out.join("table.csv");
    std::fs::write(&csv, table_csv(&rows)).map_err(|e| Error::io(&csv, e))?;
    write_json(
        out.join("table_manifest.json"),
        &Manifest {
            seed: cfg.seed,
            s0: cfg.s0,
            l: cfg.l,
            rows: &rows,
        },
    )?;
    Ok(rows)
}
