use std::collections::BTreeMap;

use ddc_core::descriptor::{augment, build_descriptor};
use ddc_core::experiments::{collect, ExperimentConfig};
use ddc_core::linalg::{sym_max_eig, Mat};
use ddc_core::lmi::*;
use ddc_core::plant::PlantModel;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lyapunov(a0: &Mat) -> LmiProblem {
    let n = a0.nrows();
    let mut vars = VariableSet::new();
    let p = vars.declare(MatrixVariable::positive_definite("P", n)).unwrap();
    let pe = AffineExpr::var(&vars, p);
    let mut lmi = BlockLmi::new("lyapunov", vec![n]);
    lmi.set(0, 0, (&a0.transpose() * pe.clone()) * a0 - pe).unwrap();
    LmiProblem { vars, lmis: vec![lmi] }
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn random_y(rng: &mut ChaCha8Rng, vars: &VariableSet) -> Vec<f64> {
    (0..vars.n_scalars()).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn scalar_positivity() {
    let mut vars = VariableSet::new();
    let p = vars.declare(MatrixVariable::scalar_positive("p")).unwrap();
    let mut lmi = BlockLmi::new("neg", vec![1]);
    lmi.set(0, 0, -AffineExpr::var(&vars, p)).unwrap();
    let prob = LmiProblem { vars, lmis: vec![lmi] };
    let sol = solve_feasibility(&prob, &FeasibilityOptions::default()).unwrap();
    assert!(sol.assignment["p"][(0, 0)] > DEFAULT_MARGIN);
}

#[test]
fn lyapunov_stable_and_unstable() {
    let stable = lyapunov(&(Mat::identity(3, 3) * 0.5));
    let sol = solve_feasibility(&stable, &FeasibilityOptions::default()).unwrap();
    let cert = verify_solution(&stable, &sol.assignment).unwrap();
    assert!(cert.lmi_max_eigs[0].1 < 0.0);
    assert!(cert.satisfied(DEFAULT_MARGIN));

    let unstable = lyapunov(&(Mat::identity(3, 3) * 2.0));
    match solve_feasibility(&unstable, &FeasibilityOptions::default()) {
        Err(LmiError::Infeasible { .. }) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn corrupted_assignment_is_flagged() {
    let prob = lyapunov(&(Mat::identity(2, 2) * 0.5));
    let sol = solve_feasibility(&prob, &FeasibilityOptions::default()).unwrap();
    let mut bad = sol.assignment.clone();
    *bad.get_mut("P").unwrap() = -Mat::identity(2, 2);
    let cert = verify_solution(&prob, &bad).unwrap();
    assert!(cert.lmi_max_eigs[0].1 > 0.0);
    assert!(!cert.satisfied(0.0));
    assert!(matches!(
        verify_solution(&prob, &BTreeMap::new()),
        Err(LmiError::MissingAssignment(_))
    ));
}

#[test]
fn empty_lmi_has_zero_max_eigenvalue() {
    let prob = LmiProblem {
        vars: VariableSet::new(),
        lmis: vec![BlockLmi::new("empty", vec![2])],
    };
    let cert = verify_solution(&prob, &BTreeMap::new()).unwrap();
    assert_eq!(cert.lmi_max_eigs[0].1, 0.0);
}

fn scalar(v: f64) -> Mat {
    Mat::from_element(1, 1, v)
}

fn bounded_real(a: f64, gamma: f64) -> Result<LmiSolution, LmiError> {
    let (e, ah, bw, c) = descriptor_realization(&scalar(a), &scalar(1.0), &scalar(1.0));
    assert_eq!(e.transpose() * Mat::from_column_slice(2, 1, &[0.0, 1.0]), Mat::zeros(2, 1));
    let (prob, _) = assemble_model_hinf(&e, &ah, &bw, &c, gamma)?;
    solve_feasibility(&prob, &FeasibilityOptions::default())
}

#[test]
fn bounded_real_scalar_toy() {
    // |1 / (z − 0.5)| peaks at z = 1 with value 2
    assert!(bounded_real(0.5, 3.0).is_ok());
    assert!(matches!(bounded_real(0.5, 0.1), Err(LmiError::Infeasible { .. })));
    for gamma in [0.5, 5.0, 100.0] {
        assert!(bounded_real(2.0, gamma).is_err(), "unstable toy feasible at {gamma}");
    }
    assert!(matches!(bounded_real(0.5, 0.0), Err(LmiError::InvalidParameter(_))));
}

#[test]
fn bounded_real_brackets_the_swept_norm() {
    // near-infeasible levels often stall just short of the gap tolerance;
    // those must still come back as certified infeasibility
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..12 {
        let n = rng.random_range(1..=4);
        let mut a = random_mat(&mut rng, n, n, 1.0);
        let rho = ddc_core::verify::spectral_radius(&a).unwrap();
        a *= rng.random_range(0.1..0.9) / rho;
        let (q, p) = (rng.random_range(1..=2), rng.random_range(1..=2));
        let bw = random_mat(&mut rng, n, q, 1.0);
        let c = random_mat(&mut rng, p, n, 1.0);
        let d = Mat::zeros(c.nrows(), bw.ncols());
        let norm = ddc_core::verify::hinf_norm_ss(&a, &bw, &c, &d, 1e-9).unwrap().refined;
        let (e, ah, bh, ch) = descriptor_realization(&a, &bw, &c);
        let solve = |g: f64| {
            let (prob, _) = assemble_model_hinf(&e, &ah, &bh, &ch, g).unwrap();
            solve_feasibility(&prob, &FeasibilityOptions::default())
        };
        assert!(solve(1.05 * norm).is_ok(), "case {case}: infeasible above the norm {norm}");
        match solve(0.95 * norm) {
            Err(LmiError::Infeasible { upper_bound, .. }) => assert!(upper_bound < DEFAULT_MARGIN),
            other => panic!("case {case}: expected certified infeasibility below {norm}, got {other:?}"),
        }
    }
}

fn benchmark_aug(delta: f64, seed: u64) -> ddc_core::descriptor::AugmentedDescriptor {
    let plant = PlantModel::benchmark();
    let cfg = ExperimentConfig {
        delta,
        seed,
        ..ExperimentConfig::for_plant(&plant)
    };
    let ds = collect(&plant, &cfg).unwrap();
    let d = build_descriptor(&ds.agg1, &ds.agg2, cfg.s0, delta, cfg.l).unwrap();
    augment(&d).unwrap()
}

#[test]
fn robust_dimensions_and_structure() {
    let aug = benchmark_aug(0.2, 1);
    let (prob, rv) = assemble_robust_lmi(&aug).unwrap();
    assert_eq!(prob.lmis[0].dim(), 15);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = random_y(&mut rng, &prob.vars);
    let h = prob.vars.value(rv.h, &y);
    assert_eq!(h.view((0, 0), (3, 3)), prob.vars.value(rv.k, &y));
    assert!(h.view((0, 3), (3, 3)).iter().all(|v| *v == 0.0));
    assert_eq!(h.view((3, 0), (3, 3)), prob.vars.value(rv.h3, &y));
    let g = prob.vars.value(rv.g, &y);
    assert_eq!(g.view((0, 0), (3, 3)), prob.vars.value(rv.k, &y));
    assert_eq!(g.view((3, 3), (3, 3)), prob.vars.value(rv.g4, &y));

    // zero assignment: only P in (2,2)
    let zero = vec![0.0; prob.vars.n_scalars()];
    assert!(prob.lmis[0].eval(&prob.vars, &zero).unwrap().iter().all(|v| *v == 0.0));

    let d = ddc_core::descriptor::DescriptorData {
        e: Mat::zeros(3, 3),
        a: Mat::zeros(3, 3),
        b: Mat::zeros(3, 2),
        c: Mat::zeros(2, 3),
        d: Mat::zeros(2, 2),
        ke: Mat::zeros(3, 3),
        ka: Mat::zeros(3, 3),
        kb: Mat::zeros(3, 2),
        s0: 0.5,
        delta: 0.0,
        l: 4,
    };
    let aug0 = augment(&d).unwrap();
    let (prob0, rv0) = assemble_robust_lmi(&aug0).unwrap();
    // P = I, eps = 2, everything else zero
    let mut assign: BTreeMap<String, Mat> = prob0.vars.assignment(&vec![0.0; prob0.vars.n_scalars()]);
    assign.insert("P".into(), Mat::identity(6, 6));
    assign.insert("eps".into(), scalar(2.0));
    let y0 = prob0.vars.pack(&assign).unwrap();
    let m = prob0.lmis[0].eval(&prob0.vars, &y0).unwrap();
    let mut expected = Mat::zeros(15, 15);
    // Φ12 = ÊP with Ê = diag(I, 0)
    for i in 0..3 {
        expected[(i, 6 + i)] = 1.0;
        expected[(6 + i, i)] = 1.0;
    }
    for i in 6..12 {
        expected[(i, i)] = 1.0;
    }
    for i in 12..15 {
        expected[(i, i)] = -2.0;
    }
    assert_eq!(m, expected);
    let _ = rv0;
}

#[test]
fn hinf_dimensions_and_blocks() {
    let plant = PlantModel::benchmark();
    let cfg = ExperimentConfig::for_plant(&plant);
    let ds = collect(&plant, &cfg).unwrap();
    let mut d = build_descriptor(&ds.agg1, &ds.agg2, cfg.s0, cfg.delta, cfg.l).unwrap();
    let (prob, _) = assemble_hinf_lmi(&d, 0.5).unwrap();
    assert_eq!(prob.lmis[0].dim(), 17);
    assert!(assemble_hinf_lmi(&d, 0.0).is_err());
    assert!(assemble_hinf_lmi(&d, -1.0).is_err());

    // Ψ14 involves only S1, S2
    let dump = prob.debug_dump();
    let blocks = dump["lmis"][0]["blocks"].as_array().unwrap();
    let b14 = blocks.iter().find(|b| b["block"] == serde_json::json!([0, 3])).unwrap();
    assert_eq!(b14["variables"], serde_json::json!(["S1", "S2"]));

    // E_d = I, S = 0, P1 = P4 = I → Ψ11 = diag(−I, 0)
    d.e = Mat::identity(3, 3);
    let (prob, _) = assemble_hinf_lmi(&d, 0.5).unwrap();
    let mut assign = prob.vars.assignment(&vec![0.0; prob.vars.n_scalars()]);
    assign.insert("P1".into(), Mat::identity(3, 3));
    assign.insert("P4".into(), Mat::identity(3, 3));
    let y = prob.vars.pack(&assign).unwrap();
    let m = prob.lmis[0].eval(&prob.vars, &y).unwrap();
    let psi11 = m.view((0, 0), (6, 6)).into_owned();
    let mut expected = Mat::zeros(6, 6);
    for i in 0..3 {
        expected[(i, i)] = -1.0;
    }
    assert_eq!(psi11, expected);
    assert_eq!(m[(6, 6)], -0.25);
}

#[test]
fn lowering_soundness_and_symmetry() {
    let aug = benchmark_aug(0.2, 2);
    let plant = PlantModel::benchmark();
    let bwd = plant.true_descriptor(0.5).unwrap().bwd;
    let (robust, _) = assemble_robust_lmi(&aug).unwrap();
    let (model, _) = assemble_model_robust(&aug, &bwd).unwrap();
    let cfg = ExperimentConfig::for_plant(&plant);
    let ds = collect(&plant, &cfg).unwrap();
    let d = build_descriptor(&ds.agg1, &ds.agg2, cfg.s0, cfg.delta, cfg.l).unwrap();
    let (hinf, _) = assemble_hinf_lmi(&d, 0.5).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for prob in [&robust, &model, &hinf] {
        let (f0, fk) = prob.lmis[0].lower(&prob.vars);
        for _ in 0..20 {
            let y = random_y(&mut rng, &prob.vars);
            let direct = prob.lmis[0].eval(&prob.vars, &y).unwrap();
            let mut lowered = f0.clone();
            for (k, f) in fk.iter().enumerate() {
                if let Some(f) = f {
                    lowered += f * y[k];
                }
            }
            assert!((&direct - lowered).amax() <= 1e-10);
            assert!(ddc_core::linalg::asymmetry(&direct) <= 1e-12);
        }
    }
}

#[test]
fn model_robust_dominates_data_robust() {
    let aug = benchmark_aug(0.2, 3);
    let plant = PlantModel::benchmark();
    let bwd = plant.true_descriptor(0.5).unwrap().bwd;
    let (robust, rv) = assemble_robust_lmi(&aug).unwrap();
    let (model, _) = assemble_model_robust(&aug, &bwd).unwrap();
    let (zero_model, _) = assemble_model_robust(&aug, &Mat::zeros(3, 3)).unwrap();
    let mut bw_hat = Mat::zeros(6, 3);
    bw_hat.view_mut((3, 0), (3, 3)).copy_from(&bwd);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let mut y = random_y(&mut rng, &robust.vars);
        // pack inverts assignment exactly
        assert_eq!(robust.vars.pack(&robust.vars.assignment(&y)).unwrap(), y);
        let eps = robust.vars.value(rv.eps, &y)[(0, 0)].abs();
        // make ε ≥ 0
        let mut assign = robust.vars.assignment(&y);
        assign.insert("eps".into(), scalar(eps));
        y = robust.vars.pack(&assign).unwrap();
        let phi_p = robust.lmis[0].eval(&robust.vars, &y).unwrap();
        let phi = model.lmis[0].eval(&model.vars, &y).unwrap();
        assert!(sym_max_eig(&phi_p) <= sym_max_eig(&phi) + 1e-12);
        let mut diff = Mat::zeros(15, 15);
        diff.view_mut((0, 0), (6, 6)).copy_from(&(&bw_hat * bw_hat.transpose() * eps));
        assert!((&phi - &phi_p - diff).amax() <= 1e-12);
        assert!((zero_model.lmis[0].eval(&zero_model.vars, &y).unwrap() - &phi_p).amax() == 0.0);
    }
    let mut assign = robust.vars.assignment(&vec![0.3; robust.vars.n_scalars()]);
    assign.insert("eps".into(), scalar(0.0));
    let y = robust.vars.pack(&assign).unwrap();
    assert_eq!(
        robust.lmis[0].eval(&robust.vars, &y).unwrap(),
        model.lmis[0].eval(&model.vars, &y).unwrap()
    );
}

#[test]
fn debug_dump_lists_structure() {
    let aug = benchmark_aug(0.2, 1);
    let (prob, _) = assemble_robust_lmi(&aug).unwrap();
    let dump = prob.debug_dump();
    assert_eq!(dump["lmis"][0]["sizes"], serde_json::json!([6, 6, 3]));
    let names: Vec<&str> = dump["variables"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    for n in ["P", "Q", "Z", "K", "H3", "H4", "G3", "G4", "H", "G", "eps"] {
        assert!(names.contains(&n), "{n} missing");
    }
}

fn random_contraction(rng: &mut ChaCha8Rng, a: usize, b: usize) -> Mat {
    let m = random_mat(rng, a, b, 1.0);
    let s = m.clone().svd(false, false).singular_values.max();
    let scale: f64 = rng.random_range(0.0..1.0);
    if s > 0.0 {
        m * (scale / s)
    } else {
        m
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn petersen_soundness(d in 1usize..=6, a in 1usize..=6, b in 1usize..=6, seed in any::<u64>(), eps_exp in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_mat(&mut rng, d, a, 1.0);
        let y = random_mat(&mut rng, b, d, 1.0);
        let r = random_mat(&mut rng, d, d, 1.0);
        let shift = rng.random_range(0.0..6.0);
        let z = -(&r * r.transpose()) - Mat::identity(d, d) * shift;
        let eps = 10f64.powf(eps_exp);
        if petersen_sufficient(&z, &x, &y, eps).unwrap() {
            for _ in 0..200 {
                let delta = random_contraction(&mut rng, a, b);
                let xdy = &x * delta * &y;
                let lhs = &z + &xdy + xdy.transpose();
                prop_assert!(sym_max_eig(&lhs) < 0.0);
            }
        }
    }
}
