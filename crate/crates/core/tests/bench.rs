use ddc_core::bench::{self, io, BenchConfig, TrialOutcome};
use ddc_core::linalg::Mat;
use ddc_core::plant::PlantModel;
use ddc_core::Error;

fn small_config(dir: &std::path::Path) -> BenchConfig {
    BenchConfig {
        out_dir: dir.to_path_buf(),
        horizon: 200,
        energy_trials: 2,
        ..BenchConfig::default()
    }
}

#[test]
fn matrix_file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    let plant = PlantModel::benchmark();
    let awkward = Mat::from_row_slice(
        2,
        3,
        &[1.0 / 3.0, -2.0f64.sqrt(), 1e-300, 5e-324, -0.0, 123_456_789.123_456_79],
    );
    let mut doc = io::plant_document(&plant);
    doc.insert("X".into(), awkward);
    io::save_matrix_file(&path, &doc).unwrap();
    let back = io::load_matrix_file(&path).unwrap();
    assert_eq!(back.len(), doc.len());
    for (k, m) in &doc {
        let b = &back[k];
        assert_eq!(b.shape(), m.shape(), "{k}");
        for (x, y) in m.iter().zip(b.iter()) {
            assert_eq!(x.to_bits(), y.to_bits(), "{k}: {x} vs {y}");
        }
    }
    let reloaded = io::load_plant(&path).unwrap();
    assert_eq!(&reloaded, &plant);
}

#[test]
fn truncated_matrix_file_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    io::save_plant(&path, &PlantModel::benchmark()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::write(&path, &text[..text.len() / 2]).unwrap();
    let err = io::load_matrix_file(&path).unwrap_err();
    assert!(matches!(err, Error::Parse { .. }), "{err}");
    assert!(err.to_string().contains("line"), "{err}");
}

#[test]
fn non_finite_entry_is_rejected_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    std::fs::write(&path, r#"{"A": [[1.0, 2.0], [3.0, NaN]], "B": [[1.0]]}"#).unwrap();
    let err = io::load_matrix_file(&path).unwrap_err().to_string();
    assert!(err.contains("A[1][1]"), "{err}");

    std::fs::write(&path, r#"{"A": [[1.0, 2.0], [3.0]]}"#).unwrap();
    let err = io::load_matrix_file(&path).unwrap_err().to_string();
    assert!(err.contains("A"), "{err}");

    let mut doc = io::MatrixDocument::new();
    doc.insert("Q".into(), Mat::from_element(1, 1, f64::INFINITY));
    assert!(io::save_matrix_file(&path, &doc).is_err());
}

#[test]
fn missing_plant_file_is_a_config_error() {
    let cfg = BenchConfig {
        plant: Some("/definitely/not/here.json".into()),
        ..BenchConfig::default()
    };
    let err = cfg.plant_model().unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn config_defaults_and_strictness() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.json");
    std::fs::write(&path, "{}").unwrap();
    let cfg = BenchConfig::load(&path).unwrap();
    assert_eq!(cfg.s0, 0.5);
    assert_eq!(cfg.l, 4);
    assert_eq!(cfg.delta, 0.2);
    assert_eq!(cfg.gamma, 0.5);
    assert_eq!(cfg.noise_levels, vec![0.5, 1.0, 1.5, 2.0, 2.2, 2.4]);
    assert_eq!(cfg.trials, 100);

    std::fs::write(&path, r#"{"detla": 0.3}"#).unwrap();
    assert!(BenchConfig::load(&path).is_err());
    std::fs::write(&path, r#"{"gamma": -1}"#).unwrap();
    assert!(BenchConfig::load(&path).is_err());
}

#[test]
fn montecarlo_rejects_empty_rows() {
    let cfg = BenchConfig {
        trials: 0,
        ..BenchConfig::default()
    };
    assert!(bench::run_montecarlo(&cfg).is_err());
    let cfg = BenchConfig {
        noise_levels: vec![],
        ..BenchConfig::default()
    };
    assert!(bench::run_montecarlo(&cfg).is_err());
}

#[test]
fn noiseless_level_always_succeeds() {
    let cfg = BenchConfig {
        noise_levels: vec![0.0],
        trials: 12,
        ..BenchConfig::default()
    };
    let rows = bench::run_montecarlo(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].verified_success_count, 12);
    assert_eq!(rows[0].percentage, 100.0);
}

#[test]
fn montecarlo_counts_only_verified_trials() {
    let cfg = BenchConfig {
        noise_levels: vec![0.2, 1.0],
        trials: 8,
        seed: 5,
        ..BenchConfig::default()
    };
    let rows = bench::run_montecarlo(&cfg).unwrap();
    for row in &rows {
        let stabilizing = row
            .records
            .iter()
            .filter(|r| r.outcome == TrialOutcome::Stabilizing)
            .count();
        assert_eq!(row.verified_success_count, stabilizing);
        assert!(row.lmi_feasible_count >= row.verified_success_count);
        assert_eq!(row.percentage, 100.0 * stabilizing as f64 / row.trials as f64);
        for r in &row.records {
            if let Some(rho) = r.spectral_radius {
                assert_eq!(r.outcome == TrialOutcome::Stabilizing, rho < 1.0);
            }
        }
    }
    // parallel scheduling must not change anything
    let again = bench::run_montecarlo(&cfg).unwrap();
    assert_eq!(bench::table_csv(&rows), bench::table_csv(&again));
    assert!(bench::table_csv(&rows).starts_with("delta,trials,successes,percentage\n"));
}

#[test]
fn figure_runs_share_noise_and_vanish_without_it() {
    let cfg = BenchConfig::default();
    let fr = Mat::from_row_slice(2, 3, &[-0.3, -0.2, 0.1, -0.1, 0.4, -0.9]);
    let fh = Mat::zeros(2, 3);
    let runs = bench::figure_runs(&cfg, &fr, &fh).unwrap();
    assert_eq!(runs.summary.noise_hash_robust, runs.summary.noise_hash_hinf);
    assert_eq!(runs.robust.noises, runs.hinf.noises);
    assert!(runs.summary.energy_robust > 0.0);

    let quiet = BenchConfig {
        delta: 0.0,
        ..BenchConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    bench::cmd_figure1(&quiet, &fr, &fh, dir.path()).unwrap();
    for f in ["y_robust.csv", "y_hinf.csv"] {
        let text = std::fs::read_to_string(dir.path().join(f)).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,y1,y2"));
        let mut rows = 0;
        for line in lines {
            rows += 1;
            assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0), "{line}");
        }
        assert_eq!(rows, quiet.figure_steps);
    }
}

#[test]
fn pipeline_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = small_config(a.path());
    bench::cmd_pipeline(&cfg, a.path(), true).unwrap();
    bench::cmd_pipeline(&cfg, b.path(), true).unwrap();
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 8, "{names:?}");
    for name in names {
        let x = std::fs::read(a.path().join(&name)).unwrap();
        let y = std::fs::read(b.path().join(&name)).unwrap();
        assert_eq!(x, y, "{name:?} differs between runs");
    }
}

#[test]
fn noiseless_pipeline_recovers_the_true_descriptor() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BenchConfig {
        delta: 0.0,
        ..small_config(dir.path())
    };
    let summary = bench::cmd_pipeline(&cfg, dir.path(), false).unwrap();
    let check = summary.noiseless_check.expect("noiseless check runs when delta = 0");
    assert!(check.passed, "{check:?}");
    assert!(summary.stages.iter().find(|s| s.stage == "gen").unwrap().ok);
    let robust = summary.robust.expect("robust gain verified");
    assert!(robust.stable);
}

#[test]
fn experiment_files_reload_into_the_same_descriptor() {
    use ddc_core::descriptor::build_descriptor;
    use ddc_core::experiments::collect;

    let dir = tempfile::tempdir().unwrap();
    let cfg = BenchConfig::default();
    let plant = cfg.plant_model().unwrap();
    let ecfg = cfg.experiment_config(&plant, 0.2, 3);
    let ds = collect(&plant, &ecfg).unwrap();
    let p1 = dir.path().join("exp1.json");
    let p2 = dir.path().join("exp2.json");
    io::write_json(&p1, &io::experiment1_file(&ecfg, &ds.exp1, &ds.agg1, false)).unwrap();
    io::write_json(&p2, &io::experiment2_file(&ecfg, &ds.exp2, &ds.agg2, false)).unwrap();
    let f1: io::ExperimentFile = io::read_json(&p1).unwrap();
    let f2: io::ExperimentFile = io::read_json(&p2).unwrap();
    assert!(!std::fs::read_to_string(&p1).unwrap().contains("oracle"));
    let a1 = io::experiment1_aggregate(&f1, &p1).unwrap();
    let a2 = io::experiment2_aggregate(&f2, &p2).unwrap();
    let direct = build_descriptor(&ds.agg1, &ds.agg2, 0.5, 0.2, 4).unwrap();
    let reloaded = build_descriptor(&a1, &a2, 0.5, 0.2, 4).unwrap();
    assert_eq!(direct, reloaded);
    assert_eq!(io::descriptor_hash(&direct), io::descriptor_hash(&reloaded));
}
