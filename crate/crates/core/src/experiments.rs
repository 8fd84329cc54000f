//! The two data-collection experiments.
//!
//! Experiment 1 runs `n` sub-experiments with zero-sum input sequences and
//! produces `N, M, V, T, X, Y`. Experiment 2 runs `m` sub-experiments with a
//! constant unit input and produces `R₀, R₁, X′, Y′`. The recorded noise
//! sums (`oracle_w`, `oracle_w0`) are simulator-side and never reach
//! synthesis.

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::plant::{NoiseProcess, PlantModel, Trajectory, Vector};
use crate::rng::{self, label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    pub m: usize,
    pub l: usize,
    pub s0: f64,
    pub delta: f64,
    pub cond_threshold: f64,
    pub max_retries: u32,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 3,
            m: 2,
            l: 4,
            s0: 0.5,
            delta: 0.2,
            cond_threshold: 1e-8,
            max_retries: 10,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// Defaults with the dimensions of `plant`.
    pub fn for_plant(plant: &PlantModel) -> Self {
        Self {
            n: plant.n(),
            m: plant.m(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.l == 0 {
            return Err(Error::Config("steps per sub-experiment l must be ≥ 1".into()));
        }
        if self.n == 0 || self.m == 0 || self.m > self.n {
            return Err(Error::Config(format!(
                "need 1 ≤ m ≤ n, got n = {}, m = {}",
                self.n, self.m
            )));
        }
        if !(self.cond_threshold > 0.0 && self.cond_threshold < 1.0) {
            return Err(Error::Config(format!(
                "cond_threshold must lie in (0, 1), got {}",
                self.cond_threshold
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be finite and ≥ 0, got {}", self.delta)));
        }
        if !self.s0.is_finite() {
            return Err(Error::Config("s0 must be finite".into()));
        }
        if self.max_retries == 0 {
            return Err(Error::Config("max_retries must be positive".into()));
        }
        Ok(())
    }

    fn check_plant(&self, plant: &PlantModel) -> Result<()> {
        self.validate()?;
        if plant.n() != self.n || plant.m() != self.m {
            return Err(Error::dim(
                "experiment config vs plant",
                format!("n = {}, m = {}", plant.n(), plant.m()),
                format!("n = {}, m = {}", self.n, self.m),
            ));
        }
        Ok(())
    }
}

/// `l` inputs whose sum is exactly zero: `l - 1` uniform draws from
/// `[0, 1]^m` followed by the negated partial sum.
pub fn design_exp1_inputs<R: Rng + ?Sized>(m: usize, l: usize, rng: &mut R) -> Vec<Vector> {
    if l <= 1 {
        return vec![Vector::zeros(m); l];
    }
    let mut inputs: Vec<Vector> = (0..l - 1).map(|_| rng::uniform_unit(rng, m)).collect();
    let partial = inputs.iter().fold(Vector::zeros(m), |acc, u| acc + u);
    inputs.push(-partial);
    inputs
}

/// Raw trajectories of one experiment, one per sub-experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub trajectories: Vec<Trajectory>,
    /// Retry attempt that produced this record.
    pub attempt: u32,
}

fn sub_noise(config: &ExperimentConfig, exp: u64, attempt: u32, sub: usize) -> NoiseProcess {
    NoiseProcess {
        delta: config.delta,
        seed: rng::derive_key(config.seed, &[exp, attempt as u64, sub as u64]),
    }
}

/// Runs the `n` zero-sum sub-experiments of Experiment 1.
pub fn run_experiment1(plant: &PlantModel, config: &ExperimentConfig, attempt: u32) -> Result<ExperimentRecord> {
    config.check_plant(plant)?;
    let trajectories = (0..config.n)
        .map(|i| {
            let key = [label::EXP1, attempt as u64, i as u64];
            let mut input_rng = rng::stream(config.seed, &[key[0], key[1], key[2], label::INPUT]);
            let mut init_rng = rng::stream(config.seed, &[key[0], key[1], key[2], label::INITIAL]);
            let inputs = design_exp1_inputs(config.m, config.l, &mut input_rng);
            let x0 = rng::uniform_unit(&mut init_rng, config.n);
            plant.simulate(&x0, &inputs, &sub_noise(config, label::EXP1, attempt, i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRecord { trajectories, attempt })
}

/// Runs the `m` constant-unit-input sub-experiments of Experiment 2.
pub fn run_experiment2(plant: &PlantModel, config: &ExperimentConfig, attempt: u32) -> Result<ExperimentRecord> {
    config.check_plant(plant)?;
    let trajectories = (0..config.m)
        .map(|i| {
            let mut init_rng = rng::stream(
                config.seed,
                &[label::EXP2, attempt as u64, i as u64, label::INITIAL],
            );
            let mut unit = Vector::zeros(config.m);
            unit[i] = 1.0;
            let x0 = rng::uniform_unit(&mut init_rng, config.n);
            plant.simulate(&x0, &vec![unit; config.l], &sub_noise(config, label::EXP2, attempt, i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRecord { trajectories, attempt })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment1Aggregate {
    pub n_mat: Mat,
    pub m_mat: Mat,
    pub v: Mat,
    pub t: Mat,
    pub x: Mat,
    pub y: Mat,
    /// Column `i` is `Σ_{k<l} w_k(i)`. Simulator-side only.
    pub oracle_w: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment2Aggregate {
    pub r0: Mat,
    pub r1: Mat,
    pub xp: Mat,
    pub yp: Mat,
    /// Column `i` is `w′_{l−1}(i)`. Simulator-side only.
    pub oracle_w0: Mat,
}

fn sum_vectors(vs: &[Vector], dim: usize) -> Vector {
    vs.iter().fold(Vector::zeros(dim), |acc, v| acc + v)
}

fn check_record(record: &ExperimentRecord, subs: usize, what: &str) -> Result<usize> {
    if record.trajectories.len() != subs {
        return Err(Error::dim(format!("{what} sub-experiment count"), subs, record.trajectories.len()));
    }
    let l = record.trajectories[0].len();
    if l == 0 || record.trajectories.iter().any(|t| t.len() != l || t.states.len() != l + 1) {
        return Err(Error::InvalidInput(format!("{what} trajectories must share a length l ≥ 1")));
    }
    Ok(l)
}

/// Column-wise sums that define the Experiment 1 data matrices.
pub fn aggregate_exp1(record: &ExperimentRecord, s0: f64) -> Result<Experiment1Aggregate> {
    let subs = record.trajectories.len();
    if subs == 0 {
        return Err(Error::InvalidInput("experiment 1 record is empty".into()));
    }
    let n = record.trajectories[0].states[0].len();
    let l = check_record(record, n, "experiment 1")?;
    let p = record.trajectories[0].outputs[0].len();
    let q = record.trajectories[0].noises[0].len();
    let mut agg = Experiment1Aggregate {
        n_mat: Mat::zeros(n, n),
        m_mat: Mat::zeros(n, n),
        v: Mat::zeros(n, n),
        t: Mat::zeros(n, n),
        x: Mat::zeros(n, n),
        y: Mat::zeros(p, n),
        oracle_w: Mat::zeros(q, n),
    };
    for (i, traj) in record.trajectories.iter().enumerate() {
        let x0 = &traj.states[0];
        let xl = &traj.states[l];
        let head = sum_vectors(&traj.states[..l], n);
        let tail = sum_vectors(&traj.states[1..=l], n);
        let ni = &head * (s0 - 1.0) + x0 - xl;
        let ti = &tail * (s0 - 1.0) + (x0 - xl) * s0;
        agg.n_mat.set_column(i, &ni);
        agg.m_mat.set_column(i, &head);
        agg.v.set_column(i, &tail);
        agg.t.set_column(i, &ti);
        agg.x.set_column(i, &head);
        agg.y.set_column(i, &sum_vectors(&traj.outputs, p));
        agg.oracle_w.set_column(i, &sum_vectors(&traj.noises, q));
    }
    Ok(agg)
}

/// Lines up the last two states, the last output and the last noise of
/// every Experiment 2 sub-experiment.
pub fn aggregate_exp2(record: &ExperimentRecord) -> Result<Experiment2Aggregate> {
    let m = record.trajectories.len();
    if m == 0 {
        return Err(Error::InvalidInput("experiment 2 record is empty".into()));
    }
    let l = check_record(record, m, "experiment 2")?;
    let first = &record.trajectories[0];
    let (n, p, q) = (first.states[0].len(), first.outputs[0].len(), first.noises[0].len());
    let col = |f: &dyn Fn(&Trajectory) -> &DVector<f64>, rows: usize| {
        let mut out = Mat::zeros(rows, m);
        for (i, t) in record.trajectories.iter().enumerate() {
            out.set_column(i, f(t));
        }
        out
    };
    let r0 = col(&|t| &t.states[l - 1], n);
    Ok(Experiment2Aggregate {
        r1: col(&|t| &t.states[l], n),
        xp: r0.clone(),
        r0,
        yp: col(&|t| &t.outputs[l - 1], p),
        oracle_w0: col(&|t| &t.noises[l - 1], q),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Conditioning {
    Ok,
    /// At least one of `N`, `T`, `X` fell below the threshold.
    Retry { worst: &'static str, rcond: f64 },
}

/// Reciprocal-condition check on `N`, `T` and `X`.
pub fn check_conditioning(agg: &Experiment1Aggregate, threshold: f64) -> Conditioning {
    let mut worst = ("N", f64::INFINITY);
    for (name, mat) in [("N", &agg.n_mat), ("T", &agg.t), ("X", &agg.x)] {
        let rc = linalg::rcond(mat);
        if rc < worst.1 || rc.is_nan() {
            worst = (name, rc);
        }
    }
    if worst.1 > threshold {
        Conditioning::Ok
    } else {
        Conditioning::Retry { worst: worst.0, rcond: worst.1 }
    }
}

/// Both experiments, aggregated, after the conditioning check passed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: ExperimentConfig,
    pub exp1: ExperimentRecord,
    pub exp2: ExperimentRecord,
    pub agg1: Experiment1Aggregate,
    pub agg2: Experiment2Aggregate,
    /// Number of attempts used, including the successful one.
    pub attempts: u32,
}

/// Runs both experiments, re-running with a fresh sub-seed whenever the
/// conditioning check asks for a retry.
pub fn collect(plant: &PlantModel, config: &ExperimentConfig) -> Result<Dataset> {
    config.check_plant(plant)?;
    for attempt in 0..config.max_retries {
        let exp1 = run_experiment1(plant, config, attempt)?;
        let agg1 = aggregate_exp1(&exp1, config.s0)?;
        if let Conditioning::Retry { .. } = check_conditioning(&agg1, config.cond_threshold) {
            continue;
        }
        let exp2 = run_experiment2(plant, config, attempt)?;
        let agg2 = aggregate_exp2(&exp2)?;
        return Ok(Dataset {
            config: config.clone(),
            exp1,
            exp2,
            agg1,
            agg2,
            attempts: attempt + 1,
        });
    }
    Err(Error::RetriesExhausted { attempts: config.max_retries })
}

/// Relative residuals of the data identities, computed with the true plant
/// and the recorded noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `N + B_w W = (s0 I − A) M`
    pub n_identity: f64,
    /// `(s0 I − A) V = A T + s0 B_w W`
    pub v_identity: f64,
    /// `R₁ = A R₀ + B + B_w W₀`
    pub r_identity: f64,
    /// `Y′ = C X′ + D`
    pub output_identity: f64,
    /// `Y = C X`
    pub y_identity: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        [self.n_identity, self.v_identity, self.r_identity, self.output_identity, self.y_identity]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// `‖lhs − rhs‖_∞ / (1 + max(‖lhs‖_∞, ‖rhs‖_∞))`
pub fn relative_residual(lhs: &Mat, rhs: &Mat) -> f64 {
    let scale = 1.0 + linalg::inf_norm(lhs).max(linalg::inf_norm(rhs));
    linalg::inf_norm(&(lhs - rhs)) / scale
}

pub fn identity_residuals(
    plant: &PlantModel,
    agg1: &Experiment1Aggregate,
    agg2: &Experiment2Aggregate,
    s0: f64,
) -> IdentityResiduals {
    let n = plant.n();
    let shifted = Mat::identity(n, n) * s0 - plant.a();
    let bw = plant.bw();
    IdentityResiduals {
        n_identity: relative_residual(&(&agg1.n_mat + bw * &agg1.oracle_w), &(&shifted * &agg1.m_mat)),
        v_identity: relative_residual(
            &(&shifted * &agg1.v),
            &(plant.a() * &agg1.t + bw * &agg1.oracle_w * s0),
        ),
        r_identity: relative_residual(
            &agg2.r1,
            &(plant.a() * &agg2.r0 + plant.b() + bw * &agg2.oracle_w0),
        ),
        output_identity: relative_residual(&agg2.yp, &(plant.c() * &agg2.xp + plant.d())),
        y_identity: relative_residual(&agg1.y, &(plant.c() * &agg1.x)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_max_eig;

    fn config(delta: f64, seed: u64) -> ExperimentConfig {
        ExperimentConfig {
            delta,
            seed,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn single_step_input_is_zero() {
        let mut rng = rng::stream(0, &[]);
        assert_eq!(design_exp1_inputs(2, 1, &mut rng), vec![Vector::zeros(2)]);
    }

    #[test]
    fn inputs_sum_to_zero() {
        let mut rng = rng::stream(1, &[]);
        for l in 2..8 {
            let u = design_exp1_inputs(2, l, &mut rng);
            assert_eq!(u.len(), l);
            // independent accumulation in reverse order
            let mut total = [0.0f64; 2];
            for v in u.iter().rev() {
                total[0] += v[0];
                total[1] += v[1];
            }
            assert!(total.iter().all(|t| t.abs() <= 1e-12));
        }
    }

    #[test]
    fn noiseless_experiment1_obeys_plant_equations() {
        let plant = PlantModel::benchmark();
        let rec = run_experiment1(&plant, &config(0.0, 3), 0).unwrap();
        assert_eq!(rec.trajectories.len(), 3);
        for t in &rec.trajectories {
            assert_eq!(t.len(), 4);
            assert!(t.max_step_residual(&plant) <= 1e-12);
            assert!(t.noises.iter().all(|w| w.iter().all(|v| *v == 0.0)));
        }
    }

    #[test]
    fn noisy_experiment1_bounds_and_determinism() {
        let plant = PlantModel::benchmark();
        let a = run_experiment1(&plant, &config(0.2, 8), 0).unwrap();
        let b = run_experiment1(&plant, &config(0.2, 8), 0).unwrap();
        assert_eq!(a, b);
        assert!(a.trajectories.iter().flat_map(|t| &t.noises).all(|w| w.norm_squared() <= 0.2));
        let c = run_experiment1(&plant, &config(0.2, 8), 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn aggregate_identities_hold() {
        let plant = PlantModel::benchmark();
        for (delta, seed) in [(0.0, 1), (0.2, 2), (2.4, 3)] {
            let cfg = config(delta, seed);
            let ds = collect(&plant, &cfg).unwrap();
            let r = identity_residuals(&plant, &ds.agg1, &ds.agg2, cfg.s0);
            assert!(r.max() <= 1e-10, "{r:?}");
        }
    }

    #[test]
    fn single_step_aggregate_of_basis_states() {
        let mut trajectories = Vec::new();
        for i in 0..3 {
            let mut x0 = Vector::zeros(3);
            x0[i] = 1.0;
            trajectories.push(Trajectory {
                states: vec![x0.clone(), x0 * 2.0],
                inputs: vec![Vector::zeros(2)],
                noises: vec![Vector::zeros(3)],
                outputs: vec![Vector::zeros(2)],
            });
        }
        let agg = aggregate_exp1(&ExperimentRecord { trajectories, attempt: 0 }, 0.5).unwrap();
        assert_eq!(agg.m_mat, Mat::identity(3, 3));
        assert_eq!(agg.x, Mat::identity(3, 3));
        assert_eq!(agg.v, Mat::identity(3, 3) * 2.0);
    }

    #[test]
    fn experiment2_uses_unit_inputs() {
        let plant = PlantModel::benchmark();
        let rec = run_experiment2(&plant, &config(0.2, 4), 0).unwrap();
        assert_eq!(rec.trajectories.len(), 2);
        let first = &rec.trajectories[0];
        assert!(first.inputs.iter().all(|u| u.as_slice() == [1.0, 0.0]));
        let total = sum_vectors(&rec.trajectories[1].inputs, 2);
        assert_eq!(total.as_slice(), &[0.0, 4.0]);
    }

    #[test]
    fn memoryless_plant_recovers_b() {
        let b = Mat::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let plant = PlantModel::new(
            Mat::zeros(3, 3),
            b.clone(),
            Mat::identity(3, 3),
            Mat::identity(2, 3),
            Mat::zeros(2, 2),
        )
        .unwrap();
        let rec = run_experiment2(&plant, &config(0.0, 4), 0).unwrap();
        let agg = aggregate_exp2(&rec).unwrap();
        assert_eq!(agg.r1, b);
    }

    #[test]
    fn conditioning_check() {
        let ident = Experiment1Aggregate {
            n_mat: Mat::identity(3, 3),
            m_mat: Mat::identity(3, 3),
            v: Mat::identity(3, 3),
            t: Mat::identity(3, 3),
            x: Mat::identity(3, 3),
            y: Mat::zeros(2, 3),
            oracle_w: Mat::zeros(3, 3),
        };
        assert_eq!(check_conditioning(&ident, 0.999), Conditioning::Ok);
        let mut bad = ident.clone();
        bad.x.set_column(1, &Vector::zeros(3));
        assert!(matches!(check_conditioning(&bad, 1e-8), Conditioning::Retry { worst: "X", .. }));
    }

    #[test]
    fn random_benchmark_runs_are_well_conditioned() {
        let plant = PlantModel::benchmark();
        let ok = (0..200)
            .filter(|&s| {
                let cfg = config(0.2, s);
                let agg = aggregate_exp1(&run_experiment1(&plant, &cfg, 0).unwrap(), cfg.s0).unwrap();
                check_conditioning(&agg, cfg.cond_threshold) == Conditioning::Ok
            })
            .count();
        assert!(ok >= 195, "only {ok}/200 runs passed the conditioning check");
    }

    #[test]
    fn noise_energy_bounds() {
        let plant = PlantModel::benchmark();
        for seed in 0..20 {
            let cfg = config(0.2, seed);
            let ds = collect(&plant, &cfg).unwrap();
            let ww = &ds.agg1.oracle_w * ds.agg1.oracle_w.transpose();
            let w0 = &ds.agg2.oracle_w0 * ds.agg2.oracle_w0.transpose();
            let (n, m, l) = (cfg.n as f64, cfg.m as f64, cfg.l as f64);
            assert!(sym_max_eig(&ww) <= cfg.delta * n * l * l + 1e-9);
            assert!(sym_max_eig(&w0) <= cfg.delta * m + 1e-9);
        }
    }

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig { l: 0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { m: 4, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig { cond_threshold: 1.0, ..Default::default() }.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
