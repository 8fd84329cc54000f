use std::path::Path;

use serde::Serialize;

use super::config::BenchConfig;
use super::io::{descriptor_hash, experiment1_file, experiment2_file, write_json};
use crate::descriptor::{build_descriptor, DescriptorData};
use crate::error::{Error, Result};
use crate::experiments::{collect, identity_residuals};
use crate::linalg::inf_norm;
use crate::plant::{NoiseProcess, PlantModel};
use crate::rng::{self, label};
use crate::synthesis::{synth_hinf, synth_robust, ControllerGain};
use crate::verify::{verify_gain, VerificationReport, VerifyOptions};

#[derive(Debug, Clone, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Distance of the noiseless data model from the true descriptor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiselessCheck {
    pub e_error: f64,
    pub a_error: f64,
    pub b_error: f64,
    pub c_error: f64,
    pub d_error: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PipelineSummary {
    pub seed: u64,
    pub delta: f64,
    pub gamma: f64,
    pub conditioning_attempts: Option<u32>,
    pub dataset_hash: Option<String>,
    pub stages: Vec<StageRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noiseless_check: Option<NoiselessCheck>,
    pub robust: Option<VerificationReport>,
    pub hinf: Option<VerificationReport>,
    /// Both gains synthesized and passed ground-truth verification.
    pub success: bool,
}

impl PipelineSummary {
    fn record<T>(&mut self, stage: &str, r: Result<T>) -> Option<T> {
        let (ok, error, out) = match r {
            Ok(v) => (true, None, Some(v)),
            Err(e) => (false, Some(e.to_string()), None),
        };
        self.stages.push(StageRecord {
            stage: stage.into(),
            ok,
            error,
        });
        out
    }
}

fn noiseless_check(d: &DescriptorData, plant: &PlantModel) -> Result<NoiselessCheck> {
    let truth = plant.true_descriptor(d.s0)?;
    let e_error = inf_norm(&(&d.e - &truth.e));
    let a_error = inf_norm(&(&d.a - &truth.a));
    let b_error = inf_norm(&(&d.b - &truth.b));
    let c_error = inf_norm(&(&d.c - plant.c()));
    let d_error = inf_norm(&(&d.d - plant.d()));
    let passed = [e_error, a_error, b_error, c_error, d_error].iter().all(|v| *v <= 1e-8);
    Ok(NoiselessCheck {
        e_error,
        a_error,
        b_error,
        c_error,
        d_error,
        passed,
    })
}

fn verify_options(cfg: &BenchConfig, gamma: Option<f64>) -> VerifyOptions {
    VerifyOptions {
        gamma,
        tol: 1e-6,
        horizon: cfg.horizon,
        trials: if gamma.is_some() { cfg.energy_trials } else { 0 },
        // the ratio is scale invariant, so a noiseless run can use any bound
        noise: NoiseProcess {
            delta: if cfg.delta > 0.0 { cfg.delta } else { 1.0 },
            seed: rng::derive_key(cfg.seed, &[label::CLOSED_LOOP]),
        },
    }
}

fn save_gain(out: &Path, name: &str, gain: &ControllerGain) -> Result<()> {
    write_json(out.join(name), gain)
}

/// gen → build-descriptor → synth (robust, H∞) → verify, writing every
/// intermediate artifact and `summary.json` into `out`. Stage failures are
/// recorded in the summary rather than returned.
pub fn cmd_pipeline(cfg: &BenchConfig, out: &Path, with_oracle: bool) -> Result<PipelineSummary> {
    cfg.validate()?;
    let plant = cfg.plant_model()?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut summary = PipelineSummary {
        seed: cfg.seed,
        delta: cfg.delta,
        gamma: cfg.gamma,
        conditioning_attempts: None,
        dataset_hash: None,
        stages: Vec::new(),
        noiseless_check: None,
        robust: None,
        hinf: None,
        success: false,
    };

    let ecfg = cfg.experiment_config(&plant, cfg.delta, cfg.seed);
    let dataset = collect(&plant, &ecfg).and_then(|ds| {
        write_json(out.join("exp1.json"), &experiment1_file(&ecfg, &ds.exp1, &ds.agg1, with_oracle))?;
        write_json(out.join("exp2.json"), &experiment2_file(&ecfg, &ds.exp2, &ds.agg2, with_oracle))?;
        Ok(ds)
    });
    let Some(ds) = summary.record("gen", dataset) else {
        write_json(out.join("summary.json"), &summary)?;
        return Ok(summary);
    };
    summary.conditioning_attempts = Some(ds.attempts);

    let descriptor = build_descriptor(&ds.agg1, &ds.agg2, cfg.s0, cfg.delta, cfg.l).and_then(|d| {
        write_json(out.join("descriptor.json"), &d)?;
        Ok(d)
    });
    let Some(d) = summary.record("build-descriptor", descriptor) else {
        write_json(out.join("summary.json"), &summary)?;
        return Ok(summary);
    };
    let hash = descriptor_hash(&d);
    summary.dataset_hash = Some(hash.clone());
    if with_oracle {
        let residuals = identity_residuals(&plant, &ds.agg1, &ds.agg2, cfg.s0);
        write_json(out.join("identity_residuals.json"), &residuals)?;
    }
    if cfg.delta == 0.0 {
        summary.noiseless_check = summary.record("noiseless-check", noiseless_check(&d, &plant));
    }

    let opts = cfg.feasibility();
    let stamp = |mut g: ControllerGain| {
        g.provenance.dataset_hash = Some(hash.clone());
        g.provenance.seed = Some(cfg.seed);
        g
    };
    let robust = synth_robust(&d, &opts).map(stamp).and_then(|g| {
        save_gain(out, "controller_robust.json", &g)?;
        Ok(g)
    });
    if let Some(g) = summary.record("synth-robust", robust) {
        let report = verify_gain(&plant, &g.f, &verify_options(cfg, None)).and_then(|r| {
            write_json(out.join("verify_robust.json"), &r)?;
            Ok(r)
        });
        summary.robust = summary.record("verify-robust", report);
    }
    let hinf = synth_hinf(&d, cfg.gamma, &opts).map(stamp).and_then(|g| {
        save_gain(out, "controller_hinf.json", &g)?;
        Ok(g)
    });
    if let Some(g) = summary.record("synth-hinf", hinf) {
        let report = verify_gain(&plant, &g.f, &verify_options(cfg, Some(cfg.gamma))).and_then(|r| {
            write_json(out.join("verify_hinf.json"), &r)?;
            Ok(r)
        });
        summary.hinf = summary.record("verify-hinf", report);
    }
    summary.success = summary.robust.as_ref().is_some_and(|r| r.passed)
        && summary.hinf.as_ref().is_some_and(|r| r.passed);
    write_json(out.join("summary.json"), &summary)?;
    Ok(summary)
}
