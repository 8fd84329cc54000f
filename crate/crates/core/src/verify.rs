//! Ground-truth checks of a gain against the true plant.

use nalgebra::{Complex, DMatrix};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::plant::{NoiseProcess, PlantModel};

type CMat = DMatrix<Complex<f64>>;

/// Coarse frequency grid size on `[0, π]`.
pub const GRID_POINTS: usize = 512;
/// Minimum simulation horizon for energy ratios.
pub const MIN_HORIZON: usize = 100;

pub fn spectral_radius(m: &Mat) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim("spectral radius", "square matrix", format!("{}×{}", m.nrows(), m.ncols())));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let eig = m.clone().complex_eigenvalues();
    Ok(eig.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// `σ_max(C (e^{jθ} I − A)⁻¹ B + D)`.
pub fn sigma_max_at(a: &Mat, b: &Mat, c: &Mat, d: &Mat, theta: f64) -> f64 {
    let n = a.nrows();
    let z = Complex::from_polar(1.0, theta);
    let shifted = CMat::from_fn(n, n, |i, j| {
        let diag = if i == j { z } else { Complex::new(0.0, 0.0) };
        diag - Complex::new(a[(i, j)], 0.0)
    });
    let bc = b.map(|v| Complex::new(v, 0.0));
    let Some(x) = shifted.lu().solve(&bc) else {
        return f64::INFINITY;
    };
    let g = c.map(|v| Complex::new(v, 0.0)) * x + d.map(|v| Complex::new(v, 0.0));
    g.svd(false, false).singular_values.max()
}

/// H∞ norm estimate of `(A, B, C, D)`: grid maximum and refined maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HinfEstimate {
    pub grid: f64,
    pub refined: f64,
    pub theta: f64,
}

/// Frequency sweep plus golden-section refinement around the largest local
/// maxima of the grid. Returns ∞ when `A` is not Schur stable.
pub fn hinf_norm_ss(a: &Mat, b: &Mat, c: &Mat, d: &Mat, tol: f64) -> Result<HinfEstimate> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
        return Err(Error::InvalidInput("inconsistent state-space dimensions".into()));
    }
    if spectral_radius(a)? >= 1.0 {
        return Ok(HinfEstimate {
            grid: f64::INFINITY,
            refined: f64::INFINITY,
            theta: 0.0,
        });
    }
    let step = std::f64::consts::PI / (GRID_POINTS - 1) as f64;
    let values: Vec<f64> = (0..GRID_POINTS).map(|k| sigma_max_at(a, b, c, d, k as f64 * step)).collect();
    let (mut best_k, mut grid) = (0, f64::NEG_INFINITY);
    for (k, v) in values.iter().enumerate() {
        if *v > grid {
            grid = *v;
            best_k = k;
        }
    }

    // local maxima, largest first
    let mut peaks: Vec<usize> = (0..GRID_POINTS)
        .filter(|&k| {
            let left = if k == 0 { f64::NEG_INFINITY } else { values[k - 1] };
            let right = values.get(k + 1).copied().unwrap_or(f64::NEG_INFINITY);
            values[k] >= left && values[k] >= right
        })
        .collect();
    peaks.sort_by(|x, y| values[*y].total_cmp(&values[*x]));
    peaks.truncate(5);

    let (mut refined, mut theta) = (grid, best_k as f64 * step);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for k in peaks {
        let (mut lo, mut hi) = ((k as f64 - 1.0).max(0.0) * step, ((k + 1) as f64 * step).min(std::f64::consts::PI));
        let f = |t: f64| sigma_max_at(a, b, c, d, t);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        let mut last = values[k];
        for _ in 0..200 {
            if f1 > f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = f(x2);
            }
            let cur = f1.max(f2);
            if (hi - lo) < 1e-12 || ((cur - last).abs() <= tol * cur && (hi - lo) < step * 1e-3) {
                break;
            }
            last = cur;
        }
        for (t, v) in [(x1, f1), (x2, f2)] {
            if v > refined {
                refined = v;
                theta = t;
            }
        }
    }
    Ok(HinfEstimate { grid, refined, theta })
}

/// Closed-loop H∞ norm from `w` to `y` under `u = F x`; ∞ if unstable.
pub fn hinf_norm(plant: &PlantModel, f: &Mat, tol: f64) -> Result<f64> {
    check_gain(plant, f)?;
    let a = plant.closed_loop(f);
    let c = plant.c() + plant.d() * f;
    let d = Mat::zeros(plant.p(), plant.q());
    Ok(hinf_norm_ss(&a, plant.bw(), &c, &d, tol)?.refined)
}

fn check_gain(plant: &PlantModel, f: &Mat) -> Result<()> {
    if f.shape() != (plant.m(), plant.n()) {
        return Err(Error::dim(
            "feedback gain",
            format!("{}×{}", plant.m(), plant.n()),
            format!("{}×{}", f.nrows(), f.ncols()),
        ));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("feedback gain has non-finite entries".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyRatios {
    pub ratios: Vec<f64>,
    /// Trials whose disturbance was identically zero.
    pub skipped: Vec<usize>,
}

/// `Σ‖y_k‖² / Σ‖w_k‖²` per trial, closed loop from zero initial state.
/// Trial `i` uses the noise stream derived from `noise` with key `[i]`.
pub fn empirical_energy_ratio(
    plant: &PlantModel,
    f: &Mat,
    noise: &NoiseProcess,
    horizon: usize,
    trials: usize,
) -> Result<EnergyRatios> {
    check_gain(plant, f)?;
    if horizon < MIN_HORIZON {
        return Err(Error::InvalidInput(format!("horizon must be at least {MIN_HORIZON}, got {horizon}")));
    }
    let x0 = nalgebra::DVector::zeros(plant.n());
    let outcomes: Vec<Result<Option<f64>>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let traj = plant.simulate_closed_loop(f, &x0, &noise.derive(&[i as u64]), horizon)?;
            let wy: f64 = traj.outputs.iter().map(|y| y.norm_squared()).sum();
            let ww: f64 = traj.noises.iter().map(|w| w.norm_squared()).sum();
            Ok((ww > 0.0).then(|| wy / ww))
        })
        .collect();
    let mut out = EnergyRatios {
        ratios: Vec::new(),
        skipped: Vec::new(),
    };
    for (i, r) in outcomes.into_iter().enumerate() {
        match r? {
            Some(v) => out.ratios.push(v),
            None => out.skipped.push(i),
        }
    }
    Ok(out)
}

fn finite_or_null<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else {
        s.serialize_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub spectral_radius: f64,
    pub stable: bool,
    /// `null` in JSON when the loop is unstable.
    #[serde(serialize_with = "finite_or_null")]
    pub hinf_norm: f64,
    pub empirical_energy_ratios: Vec<f64>,
    pub skipped_trials: Vec<usize>,
    pub gamma_target: Option<f64>,
    /// Every check requested passed: stability, and with a target, the norm
    /// and the energy ratios against it.
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    pub gamma: Option<f64>,
    pub tol: f64,
    pub horizon: usize,
    pub trials: usize,
    pub noise: NoiseProcess,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            gamma: None,
            tol: 1e-6,
            horizon: 10_000,
            trials: 0,
            noise: NoiseProcess { delta: 0.2, seed: 0 },
        }
    }
}

/// Energy ratios may exceed `γ²` by this relative slack.
pub const ENERGY_SLACK: f64 = 0.05;

pub fn verify_gain(plant: &PlantModel, f: &Mat, opts: &VerifyOptions) -> Result<VerificationReport> {
    check_gain(plant, f)?;
    let rho = spectral_radius(&plant.closed_loop(f))?;
    let stable = rho < 1.0;
    let norm = if stable { hinf_norm(plant, f, opts.tol)? } else { f64::INFINITY };
    let energy = if stable && opts.trials > 0 {
        empirical_energy_ratio(plant, f, &opts.noise, opts.horizon, opts.trials)?
    } else {
        EnergyRatios {
            ratios: Vec::new(),
            skipped: Vec::new(),
        }
    };
    let passed = stable
        && opts.gamma.is_none_or(|g| {
            norm <= g + 1e-6 && energy.ratios.iter().all(|r| *r <= g * g * (1.0 + ENERGY_SLACK))
        });
    Ok(VerificationReport {
        spectral_radius: rho,
        stable,
        hinf_norm: norm,
        empirical_energy_ratios: energy.ratios,
        skipped_trials: energy.skipped,
        gamma_target: opts.gamma,
        passed,
    })
}
