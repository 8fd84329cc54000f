use ddc_core::linalg::Mat;
use ddc_core::plant::{NoiseProcess, PlantModel};
use ddc_core::verify::{
    empirical_energy_ratio, hinf_norm, hinf_norm_ss, sigma_max_at, spectral_radius, verify_gain, VerifyOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const TOL: f64 = 1e-6;

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random `(A, B, C)` with `ρ(A)` drawn in `[0.2, 0.9]`.
fn random_stable(rng: &mut ChaCha8Rng) -> (Mat, Mat, Mat) {
    let n = rng.random_range(1..=4);
    let q = rng.random_range(1..=3);
    let p = rng.random_range(1..=3);
    let mut a = random_mat(rng, n, n);
    let rho = spectral_radius(&a).unwrap();
    if rho > 0.0 {
        a *= rng.random_range(0.2..0.9) / rho;
    }
    (a, random_mat(rng, n, q), random_mat(rng, p, n))
}

/// Independent reference: dense uniform sweep, no refinement.
fn dense_sweep(a: &Mat, b: &Mat, c: &Mat, d: &Mat, points: usize) -> f64 {
    let step = std::f64::consts::PI / (points - 1) as f64;
    (0..points)
        .into_par_iter()
        .map(|k| sigma_max_at(a, b, c, d, k as f64 * step))
        .reduce(|| 0.0, f64::max)
}

fn scalar_plant(a: f64) -> PlantModel {
    let one = Mat::from_element(1, 1, 1.0);
    PlantModel::new(Mat::from_element(1, 1, a), one.clone(), one.clone(), one, Mat::zeros(1, 1)).unwrap()
}

#[test]
fn spectral_radius_examples() {
    let d = Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, -0.25]);
    assert!((spectral_radius(&d).unwrap() - 0.5).abs() < 1e-12);
    let t: f64 = 0.7;
    let rot = Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    assert!((spectral_radius(&rot).unwrap() - 1.0).abs() < 1e-9);
    assert!(spectral_radius(PlantModel::benchmark().a()).unwrap() > 1.0);
    assert!(spectral_radius(&Mat::zeros(2, 3)).is_err());
}

#[test]
fn scalar_norms() {
    let f = Mat::zeros(1, 1);
    assert!((hinf_norm(&scalar_plant(0.0), &f, TOL).unwrap() - 1.0).abs() < 1e-9);
    assert!((hinf_norm(&scalar_plant(0.5), &f, TOL).unwrap() - 2.0).abs() < 1e-9);
    // pole at −0.5 puts the peak at θ = π
    assert!((hinf_norm(&scalar_plant(-0.5), &f, TOL).unwrap() - 2.0).abs() < 1e-9);
    assert!(hinf_norm(&scalar_plant(1.5), &f, TOL).unwrap().is_infinite());
}

#[test]
fn sweep_is_a_lower_bound_and_refinement_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..100 {
        let (a, b, c) = random_stable(&mut rng);
        let d = Mat::zeros(c.nrows(), b.ncols());
        let est = hinf_norm_ss(&a, &b, &c, &d, TOL).unwrap();
        assert!(est.grid <= est.refined, "case {case}: {est:?}");
        let reference = dense_sweep(&a, &b, &c, &d, 20_001);
        let rel = (est.refined - reference).abs() / reference;
        assert!(rel <= TOL * 10.0, "case {case}: refined {} vs dense {reference} ({rel:e})", est.refined);
    }
}

#[test]
fn energy_ratios_respect_the_norm() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for case in 0..20 {
        let n = rng.random_range(1..=4);
        let m = rng.random_range(1..=n);
        let p = rng.random_range(1..=3);
        let q = rng.random_range(1..=3);
        let mut a = random_mat(&mut rng, n, n);
        let rho = spectral_radius(&a).unwrap();
        if rho > 0.0 {
            a *= 0.85 / rho;
        }
        let plant = PlantModel::new(
            a,
            random_mat(&mut rng, n, m),
            random_mat(&mut rng, n, q),
            random_mat(&mut rng, p, n),
            random_mat(&mut rng, p, m),
        )
        .unwrap();
        let f = Mat::zeros(m, n);
        let norm = hinf_norm(&plant, &f, TOL).unwrap();
        let noise = NoiseProcess::new(0.3, case).unwrap();
        let e = empirical_energy_ratio(&plant, &f, &noise, 10_000, 3).unwrap();
        assert_eq!(e.ratios.len(), 3);
        for r in e.ratios {
            assert!(r <= norm * norm * 1.05, "case {case}: ratio {r} vs norm² {}", norm * norm);
        }
    }
}

#[test]
fn all_pass_ratio_and_skipped_trials() {
    let plant = scalar_plant(0.0);
    let f = Mat::zeros(1, 1);
    let e = empirical_energy_ratio(&plant, &f, &NoiseProcess::new(1.0, 9).unwrap(), 1000, 4).unwrap();
    assert!(e.skipped.is_empty());
    assert!(e.ratios.iter().all(|r| *r <= 1.05));
    let e = empirical_energy_ratio(&plant, &f, &NoiseProcess::silent(), 1000, 3).unwrap();
    assert!(e.ratios.is_empty());
    assert_eq!(e.skipped, vec![0, 1, 2]);
    assert!(empirical_energy_ratio(&plant, &f, &NoiseProcess::silent(), 99, 1).is_err());
}

#[test]
fn report_flags_unstable_and_gamma_violations() {
    let plant = PlantModel::benchmark();
    let open = verify_gain(&plant, &Mat::zeros(2, 3), &VerifyOptions::default()).unwrap();
    assert!(!open.stable && !open.passed);
    assert!(open.hinf_norm.is_infinite());
    let json = serde_json::to_value(&open).unwrap();
    assert!(json["hinf_norm"].is_null());

    let stable = scalar_plant(0.5);
    let f = Mat::zeros(1, 1);
    let opts = |g| VerifyOptions {
        gamma: Some(g),
        horizon: 2000,
        trials: 3,
        noise: NoiseProcess::new(1.0, 4).unwrap(),
        ..VerifyOptions::default()
    };
    assert!(verify_gain(&stable, &f, &opts(2.1)).unwrap().passed);
    assert!(!verify_gain(&stable, &f, &opts(1.9)).unwrap().passed);
    assert!(verify_gain(&stable, &Mat::zeros(2, 1), &opts(2.1)).is_err());
}
