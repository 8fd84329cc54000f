use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use ddc_core::bench::{self, io, BenchConfig};
use ddc_core::descriptor::{build_descriptor, DescriptorData};
use ddc_core::experiments::collect;
use ddc_core::linalg::Mat;
use ddc_core::plant::{NoiseProcess, Vector};
use ddc_core::rng::{self, label};
use ddc_core::synthesis::{synth_hinf, synth_robust, ControllerGain};
use ddc_core::verify::{verify_gain, VerifyOptions};

/// Data-driven robust and H∞ state-feedback synthesis.
#[derive(Parser, Debug)]
#[command(name = "ddc", version)]
struct Cli {
    /// JSON configuration file (fields default when omitted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory, depending on the subcommand.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Also write simulator-side noise records (never used by synthesis).
    #[arg(long, global = true)]
    with_oracle: bool,
    /// Plant JSON; overrides the configuration.
    #[arg(long, global = true)]
    plant: Option<PathBuf>,
    /// Noise bound; overrides the configuration.
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Attenuation level; overrides the configuration.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run both experiments and write exp1.json and exp2.json.
    Gen,
    /// Build descriptor.json from a directory holding exp1.json and exp2.json.
    BuildDescriptor {
        #[arg(long)]
        data: PathBuf,
    },
    /// Synthesize a controller from descriptor.json.
    Synth {
        #[command(subcommand)]
        method: SynthMethod,
    },
    /// Check a controller against the plant; prints a JSON report.
    Verify {
        #[arg(long)]
        controller: PathBuf,
    },
    /// Closed-loop (or open-loop without a controller) trajectory as CSV.
    Simulate {
        #[arg(long)]
        controller: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Robust-synthesis success rates across noise levels.
    Montecarlo {
        /// Comma-separated noise levels.
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<f64>>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Output trajectories of the robust and H∞ loops under shared noise.
    Figure1 {
        #[arg(long)]
        robust: Option<PathBuf>,
        #[arg(long)]
        hinf: Option<PathBuf>,
    },
    /// gen, build-descriptor, synth and verify in one go.
    Pipeline,
}

#[derive(Subcommand, Debug)]
enum SynthMethod {
    Robust {
        #[arg(long)]
        descriptor: PathBuf,
    },
    Hinf {
        #[arg(long)]
        descriptor: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.plant {
        cfg.plant = Some(p.clone());
    }
    if let Some(d) = cli.delta {
        cfg.delta = d;
    }
    if let Some(g) = cli.gamma {
        cfg.gamma = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_or(cli: &Cli, default: impl AsRef<Path>) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| default.as_ref().to_path_buf())
}

fn load_gain(path: &Path) -> Result<ControllerGain> {
    io::read_json(path).with_context(|| format!("loading controller {}", path.display()))
}

fn synthesize_pair(cfg: &BenchConfig) -> Result<(Mat, Mat)> {
    let plant = cfg.plant_model()?;
    let ds = collect(&plant, &cfg.experiment_config(&plant, cfg.delta, cfg.seed))?;
    let d = build_descriptor(&ds.agg1, &ds.agg2, cfg.s0, cfg.delta, cfg.l)?;
    let opts = cfg.feasibility();
    let robust = synth_robust(&d, &opts).context("robust gain unavailable")?;
    let hinf = synth_hinf(&d, cfg.gamma, &opts).context("H∞ gain unavailable")?;
    Ok((robust.f, hinf.f))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

/// `Ok(false)` marks a completed run whose checks did not pass.
fn run(cli: &Cli) -> Result<bool> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Gen => {
            let out = out_or(cli, &cfg.out_dir);
            let plant = cfg.plant_model()?;
            let ecfg = cfg.experiment_config(&plant, cfg.delta, cfg.seed);
            let ds = collect(&plant, &ecfg)?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            io::write_json(out.join("exp1.json"), &io::experiment1_file(&ecfg, &ds.exp1, &ds.agg1, cli.with_oracle))?;
            io::write_json(out.join("exp2.json"), &io::experiment2_file(&ecfg, &ds.exp2, &ds.agg2, cli.with_oracle))?;
            eprintln!("wrote {} (conditioning attempts: {})", out.display(), ds.attempts);
            Ok(true)
        }
        Command::BuildDescriptor { data } => {
            let p1 = data.join("exp1.json");
            let p2 = data.join("exp2.json");
            let f1: io::ExperimentFile = io::read_json(&p1)?;
            let f2: io::ExperimentFile = io::read_json(&p2)?;
            let agg1 = io::experiment1_aggregate(&f1, &p1)?;
            let agg2 = io::experiment2_aggregate(&f2, &p2)?;
            let c = &f1.config;
            let d = build_descriptor(&agg1, &agg2, c.s0, c.delta, c.l)?;
            let out = out_or(cli, "descriptor.json");
            io::write_json(&out, &d)?;
            eprintln!("wrote {}", out.display());
            Ok(true)
        }
        Command::Synth { method } => {
            let (path, default_out) = match method {
                SynthMethod::Robust { descriptor } => (descriptor, "controller_robust.json"),
                SynthMethod::Hinf { descriptor } => (descriptor, "controller_hinf.json"),
            };
            let d: DescriptorData = io::read_json(path)?;
            let opts = cfg.feasibility();
            let mut gain = match method {
                SynthMethod::Robust { .. } => synth_robust(&d, &opts)?,
                SynthMethod::Hinf { .. } => synth_hinf(&d, cfg.gamma, &opts)?,
            };
            gain.provenance.dataset_hash = Some(io::descriptor_hash(&d));
            let out = out_or(cli, default_out);
            io::write_json(&out, &gain)?;
            eprintln!("wrote {}", out.display());
            Ok(true)
        }
        Command::Verify { controller } => {
            let plant = cfg.plant_model()?;
            let gain = load_gain(controller)?;
            let gamma = cli.gamma.or(gain.gamma);
            let opts = VerifyOptions {
                gamma,
                horizon: cfg.horizon,
                trials: if gamma.is_some() { cfg.energy_trials } else { 0 },
                noise: NoiseProcess::new(
                    if cfg.delta > 0.0 { cfg.delta } else { 1.0 },
                    rng::derive_key(cfg.seed, &[label::CLOSED_LOOP]),
                )?,
                ..VerifyOptions::default()
            };
            let report = verify_gain(&plant, &gain.f, &opts)?;
            print_json(&report)?;
            if let Some(out) = &cli.out {
                io::write_json(out, &report)?;
            }
            Ok(report.passed)
        }
        Command::Simulate { controller, steps } => {
            let plant = cfg.plant_model()?;
            let f = match controller {
                Some(p) => load_gain(p)?.f,
                None => Mat::zeros(plant.m(), plant.n()),
            };
            let noise = NoiseProcess::new(cfg.delta, rng::derive_key(cfg.seed, &[label::CLOSED_LOOP]))?;
            let x0 = Vector::zeros(plant.n());
            let traj = plant.simulate_closed_loop(&f, &x0, &noise, *steps)?;
            match &cli.out {
                Some(out) => {
                    std::fs::write(out, traj.to_csv()).with_context(|| format!("writing {}", out.display()))?;
                    eprintln!("wrote {}", out.display());
                }
                None => print!("{}", traj.to_csv()),
            }
            Ok(true)
        }
        Command::Montecarlo { levels, trials } => {
            let mut cfg = cfg.clone();
            if let Some(l) = levels {
                cfg.noise_levels = l.clone();
            }
            if let Some(t) = trials {
                cfg.trials = *t;
            }
            let out = out_or(cli, &cfg.out_dir);
            let rows = bench::cmd_montecarlo(&cfg, &out)?;
            print!("{}", bench::table_csv(&rows));
            Ok(true)
        }
        Command::Figure1 { robust, hinf } => {
            let (fr, fh) = match (robust, hinf) {
                (Some(r), Some(h)) => (load_gain(r)?.f, load_gain(h)?.f),
                (None, None) => synthesize_pair(&cfg)?,
                _ => bail!("give both --robust and --hinf, or neither to synthesize them"),
            };
            let out = out_or(cli, &cfg.out_dir);
            let summary = bench::cmd_figure1(&cfg, &fr, &fh, &out)?;
            print_json(&summary)?;
            Ok(true)
        }
        Command::Pipeline => {
            let out = out_or(cli, &cfg.out_dir);
            let summary = bench::cmd_pipeline(&cfg, &out, cli.with_oracle)?;
            for s in &summary.stages {
                match &s.error {
                    None => eprintln!("{:<18} ok", s.stage),
                    Some(e) => eprintln!("{:<18} FAILED: {e}", s.stage),
                }
            }
            for (name, report) in [("robust", &summary.robust), ("hinf", &summary.hinf)] {
                if let Some(r) = report {
                    let verdict = if r.passed { "passed" } else { "NOT passed" };
                    eprintln!("{name}: rho = {:.4}, hinf = {:?}, {verdict}", r.spectral_radius, r.hinf_norm);
                }
            }
            eprintln!("summary written to {}", out.join("summary.json").display());
            Ok(summary.success)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
