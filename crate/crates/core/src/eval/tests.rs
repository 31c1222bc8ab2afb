use nalgebra::DMatrix;
use proptest::prelude::*;
use tempfile::tempdir;

use super::Strategy;
use super::*;
use crate::barycentric::{
    assemble_model, build_bases, FrequencySample, InterpolationData, WeightRow,
};
use crate::lti::{freq_response_siso, SampledSignal};
use crate::plant::run_experiment;
use crate::strategy::{IterationSnapshot, TestError};
use crate::testutil::{random_matrix, rng};

fn small_model() -> InterpolantModel {
    let data = InterpolationData::new(
        0.25,
        1.5,
        vec![
            FrequencySample::new(1.0, Complex64::new(0.3, -0.9)),
            FrequencySample::new(3.0, Complex64::new(-0.2, -0.4)),
        ],
    )
    .unwrap();
    let bases = build_bases(&data).unwrap();
    assemble_model(
        &bases,
        &data,
        &WeightRow::new(vec![0.8, 1.0, 0.5, 2.0, -1.0]),
    )
    .unwrap()
}

fn small_spec(seed: u64) -> PlantSpec {
    PlantSpec {
        seed,
        n_modes: 3,
        band: [0.2, 1.0],
        damping_range: [0.03, 0.06],
        gain_scale: 1.0,
    }
}

/// A gridded campaign small enough for unit tests.
fn small_config(dir: &Path) -> CampaignConfig {
    CampaignConfig {
        plant: PlantSource::Spec(small_spec(3)),
        band: [0.15, 1.2],
        strategy: Strategy::Gridded,
        budget: 4,
        experiment: ExperimentConfig {
            fs: 50.0,
            max_duration: 2000.0,
            ..ExperimentConfig::default()
        },
        output_dir: dir.to_path_buf(),
        ..CampaignConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn state_space_file_round_trip_is_bit_exact(seed in any::<u64>(), n in 0usize..6, p in 1usize..3, q in 1usize..3) {
        let mut r = rng(seed);
        let sys = StateSpace::new(
            random_matrix(&mut r, n, n) * 1e-3,
            random_matrix(&mut r, n, p) * 1e7,
            random_matrix(&mut r, q, n),
            random_matrix(&mut r, q, p) * 1e-300,
        )
        .unwrap();
        let text = files::state_space_to_string(&sys);
        prop_assert_eq!(files::parse_state_space(&text).unwrap(), sys);
    }
}

#[test]
fn model_file_round_trip() {
    let model = small_model();
    let text = files::model_to_string(&model);
    assert!(text.starts_with("baryid-interpolant 1\n"));
    let back = files::parse_model(&text).unwrap();
    assert_eq!(back, model);
    // a model file also serves as a plain system file
    assert_eq!(&files::parse_state_space(&text).unwrap(), model.system());
    assert!(files::parse_model(&files::state_space_to_string(model.system())).is_err());
}

#[test]
fn malformed_files_are_parse_errors() {
    let sys = small_model().system().clone();
    let good = files::state_space_to_string(&sys);
    let commented = good.replace("A\n", "# state matrix\nA   # trailing note\n\n");
    assert_eq!(files::parse_state_space(&commented).unwrap(), sys);
    let cases = [
        good.replace("baryid-state-space 1", "baryid-state-space 2"),
        good.replace("baryid-state-space", "something-else"),
        good.replace("dims 5 1 1", "dims 4 1 1"),
        good.clone() + "0x1p+0\n",
        good.replace("D\n", ""),
        good.replace("0x1p-1", "0.5"),
        String::new(),
    ];
    for (i, text) in cases.iter().enumerate() {
        let err = files::parse_state_space(text).unwrap_err();
        assert!(matches!(err.root(), Error::Parse(_)), "case {i}: {err}");
    }
    // weights that disagree with the stored realization
    let model = files::model_to_string(&small_model());
    let tampered = model.replacen("0x1.999999999999ap-1", "0x1.8p-1", 1);
    assert_ne!(tampered, model);
    assert!(matches!(
        files::parse_model(&tampered).unwrap_err().root(),
        Error::Parse(_)
    ));
}

#[test]
fn config_json_defaults_and_round_trip() {
    let cfg = CampaignConfig::from_json(r#"{"schema_version": 1}"#).unwrap();
    assert_eq!(cfg, CampaignConfig::default());
    assert_eq!(cfg.band, [0.5, 90.0]);
    cfg.validate().unwrap();

    let dir = tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.alpha = Some(0.01);
    cfg.seed = Some(9);
    assert_eq!(CampaignConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    assert_eq!(cfg.plant_spec().unwrap().seed, 9);

    let file = CampaignConfig::from_json(
        r#"{"plant": {"file": "g.ss"}, "strategy": "adaptive", "optimizer": "explicit"}"#,
    )
    .unwrap();
    assert_eq!(file.plant, PlantSource::File("g.ss".into()));
    assert_eq!(file.optimizer, Optimizer::Explicit);
    assert!(file.plant_spec().is_none());

    for bad in [
        r#"{"budget": "many"}"#,
        r#"{"bogus": 1}"#,
        r#"{"schema_version": 7}"#,
    ] {
        assert!(
            matches!(CampaignConfig::from_json(bad), Err(Error::Parse(_))),
            "{bad}"
        );
    }
}

#[test]
fn config_validation() {
    let dir = tempdir().unwrap();
    let base = small_config(dir.path());
    let cases: Vec<Box<dyn Fn(&mut CampaignConfig)>> = vec![
        Box::new(|c| c.band = [1.0, 0.5]),
        Box::new(|c| c.budget = 1),
        Box::new(|c| {
            c.strategy = Strategy::Adaptive;
            c.budget = 2
        }),
        Box::new(|c| c.alpha = Some(-1.0)),
        Box::new(|c| c.stop_tol = f64::NAN),
        // fewer than ten samples per cycle at the top of the band
        Box::new(|c| c.band = [0.15, 6.0]),
    ];
    for (i, f) in cases.iter().enumerate() {
        let mut c = base.clone();
        f(&mut c);
        assert!(
            matches!(c.validate(), Err(Error::Validation(_))),
            "case {i}"
        );
    }
    base.validate().unwrap();
}

#[test]
fn gen_plant_is_deterministic_and_two_states_per_mode() {
    let dir = tempdir().unwrap();
    let spec = PlantSpec {
        seed: 7,
        n_modes: 20,
        band: [0.5, 90.0],
        damping_range: [1e-4, 1e-2],
        gain_scale: 1.0,
    };
    let (a, b) = (dir.path().join("a.ss"), dir.path().join("b.ss"));
    let (sys, modes) = gen_plant(&spec, &a).unwrap();
    gen_plant(&spec, &b).unwrap();
    assert_eq!(sys.n_states(), 40);
    assert_eq!(modes.len(), 20);
    assert!(modes.iter().all(|m| (0.5..=90.0).contains(&m.frequency_hz)));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(files::read_state_space(&a).unwrap(), sys);

    let big = PlantSpec {
        n_modes: 135,
        ..spec
    };
    let (sys, _) = gen_plant(&big, &dir.path().join("iss.ss")).unwrap();
    assert_eq!(sys.n_states(), 270);
}

#[test]
fn detection_from_an_exported_run_matches_the_live_run() {
    let dir = tempdir().unwrap();
    let plant = modal_system(&synth_modes(&small_spec(1)).unwrap()).unwrap();
    let cfg = ExperimentConfig {
        fs: 50.0,
        max_duration: 2000.0,
        ..ExperimentConfig::default()
    };
    for omega in [0.9, 2.5, 6.0] {
        let rec = run_experiment(&plant, omega, &cfg).unwrap();
        assert!(rec.detected_at > 0);
        export::write_run(dir.path(), "run", &rec).unwrap();
        let meta: export::RunMetadata =
            serde_json::from_str(&fs::read_to_string(dir.path().join("run.json")).unwrap())
                .unwrap();
        assert_eq!(meta, export::RunMetadata::of(&rec));
        assert_eq!(meta.schema_version, 1);

        let report = detect_in_file(
            &dir.path().join("run.csv"),
            omega,
            cfg.gamma,
            cfg.chunk_cycles,
        )
        .unwrap();
        assert_eq!(report.detected_at, Some(rec.detected_at));
        assert_eq!(
            report.gamma_hats.len(),
            rec.detected_at / report.chunk_len + 1
        );
        assert_eq!(report.gamma_hats.last(), Some(&rec.gamma_hat));
        let z = report.response.unwrap();
        assert!(
            (z - rec.response.value).norm() <= 1e-12 * rec.response.value.norm(),
            "{z} vs {}",
            rec.response.value
        );

        // an unreachable threshold never passes
        let never =
            detect_in_file(&dir.path().join("run.csv"), omega, 0.0, cfg.chunk_cycles).unwrap();
        assert_eq!(never.detected_at, None);
        assert!(never.response.is_none());
    }
}

#[test]
fn pure_sinusoid_passes_in_the_first_block() {
    let (fs, omega) = (100.0, 3.0);
    let u: Vec<f64> = (0..2000).map(|i| (omega * i as f64 / fs).cos()).collect();
    let y: Vec<f64> = (0..2000)
        .map(|i| 0.5 * (omega * i as f64 / fs - 0.3).cos())
        .collect();
    let report = detect_in_signals(
        &SampledSignal::new(fs, u).unwrap(),
        &SampledSignal::new(fs, y).unwrap(),
        omega,
        1e-6,
        4,
    )
    .unwrap();
    assert_eq!(report.detected_at, Some(0));
    assert_eq!(report.gamma_hats.len(), 1);
    let expected = Complex64::from_polar(0.5, -0.3);
    assert!((report.response.unwrap() - expected).norm() < 1e-12);
}

#[test]
fn nonuniform_timestamps_are_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("s.csv");
    let mut text = String::from("# hand written\nt,u,y\n");
    for i in 0..50 {
        let t = if i == 20 { 0.2 + 1e-6 } else { i as f64 * 0.01 };
        text.push_str(&format!("{t},1,2\n"));
    }
    fs::write(&path, &text).unwrap();
    let err = export::read_signal_csv(&path).unwrap_err();
    assert!(
        matches!(err, Error::NonuniformSampling { row: 21 }),
        "{err}"
    );

    // deviations below 1e-9 relative are tolerated
    fs::write(
        &path,
        text.replace(&format!("{}", 0.2 + 1e-6), &format!("{}", 0.2 + 1e-13)),
    )
    .unwrap();
    let (u, _) = export::read_signal_csv(&path).unwrap();
    assert!((u.fs() - 100.0).abs() < 1e-6);

    fs::write(&path, "t,u\n0,1\n0.1,2\n").unwrap();
    assert!(matches!(
        export::read_signal_csv(&path).unwrap_err().root(),
        Error::Parse(_)
    ));
}

#[test]
fn trace_json_lines_round_trip_with_infinite_errors() {
    let snap = IterationSnapshot {
        iteration: 2,
        chosen_omega: Some(1.5),
        interp_freqs: vec![1.0, 1.5, 2.0],
        test_errors: vec![
            TestError {
                omega: 1.2,
                error: f64::INFINITY,
            },
            TestError {
                omega: 1.7,
                error: 0.25,
            },
        ],
        max_test_error: f64::INFINITY,
        model_order: 7,
        cost: 1e-6,
        cost_bound: Some(2e-6),
        spectral_abscissa: -0.1,
        experiments: 8,
    };
    let text = export::trace_to_string(&[snap.clone(), snap.clone()]).unwrap();
    assert_eq!(text.lines().count(), 2);
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(first["schema_version"], 1);
    assert_eq!(first["max_test_error"], "inf");
    assert_eq!(export::read_trace(&text).unwrap(), vec![snap.clone(), snap]);
}

#[test]
fn identical_systems_have_zero_error() {
    let sys = small_model().system().clone();
    let m = error_metrics(&sys, &sys, (0.1, 10.0)).unwrap();
    assert_eq!((m.h2, m.linf), (Some(0.0), 0.0));
    let rows = export::bode(&sys, &sys, (0.1, 10.0), 50).unwrap();
    assert!(rows.iter().all(|r| r.mag_err == 0.0 && r.mag_g == r.mag_r));
}

#[test]
fn unstable_models_have_no_h2_but_finite_linf() {
    let plant =
        StateSpace::siso(DMatrix::from_element(1, 1, -1.0), vec![1.0], vec![1.0], 0.0).unwrap();
    let model =
        StateSpace::siso(DMatrix::from_element(1, 1, 0.5), vec![1.0], vec![1.0], 0.0).unwrap();
    let m = error_metrics(&model, &plant, (0.1, 10.0)).unwrap();
    assert!(m.h2.is_none());
    assert!(m.h2_undefined.as_deref().unwrap().starts_with("undefined"));
    assert!(m.linf.is_finite() && m.linf > 0.0);
    assert_eq!(m.model_abscissa, 0.5);
    // |1/(jω − 0.5) − 1/(jω + 1)| = 1.5/(|jω − 0.5||jω + 1|) decreases in ω,
    // so the sup sits at the lower band edge
    let expected = 1.5 / (0.26f64.sqrt() * 1.01f64.sqrt());
    assert!(
        (m.linf - expected).abs() < 1e-9 * expected,
        "{} vs {expected}",
        m.linf
    );
}

#[test]
fn identify_writes_every_artifact() {
    let dir = tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (state, summary) = identify(&cfg).unwrap();
    assert_eq!(summary.order, 9);
    assert_eq!(summary.experiments, 5);
    assert_eq!(summary.interpolation_points_hz.len(), 4);

    let out = dir.path();
    let model = files::read_model(&out.join(MODEL_FILE)).unwrap();
    assert_eq!(model, state.model);
    let plant = files::read_state_space(&out.join(PLANT_FILE)).unwrap();
    assert_eq!(plant, cfg.load_plant().unwrap());
    let trace = export::read_trace(&fs::read_to_string(out.join(TRACE_FILE)).unwrap()).unwrap();
    assert_eq!(trace, state.trace);
    let echoed = CampaignConfig::load(&out.join(CONFIG_FILE)).unwrap();
    assert_eq!(echoed, cfg);
    for i in 0..state.records.len() {
        let csv = out.join(RUNS_DIR).join(format!("run_{i:03}.csv"));
        let head = fs::read_to_string(&csv).unwrap();
        assert!(head.starts_with("# baryid-run schema_version=1\nt,u,y\n"));
    }

    let eval_dir = out.join("eval");
    let m = evaluate(
        &out.join(MODEL_FILE),
        &out.join(PLANT_FILE),
        cfg.band,
        Some(&eval_dir),
    )
    .unwrap();
    let direct = error_metrics(model.system(), &plant, cfg.band_rad()).unwrap();
    assert_eq!(m, direct);
    let (header, rows) = export::read_table(&eval_dir.join(BODE_FILE)).unwrap();
    assert_eq!(header[0], "omega_rad_s");
    assert_eq!(header.len(), 7);
    assert_eq!(rows.len(), BODE_POINTS);
    let w: f64 = rows[123][0].parse().unwrap();
    let g = freq_response_siso(&plant, w).unwrap();
    let mag_g: f64 = rows[123][2].parse().unwrap();
    assert!((mag_g - g.norm()).abs() <= 1e-12 * g.norm());
}

#[test]
fn identify_is_byte_identical_across_runs() {
    let (a, b) = (tempdir().unwrap(), tempdir().unwrap());
    let mut cfg = small_config(a.path());
    cfg.strategy = Strategy::Adaptive;
    cfg.budget = 4;
    identify(&cfg).unwrap();
    cfg.output_dir = b.path().to_path_buf();
    identify(&cfg).unwrap();
    let names = [
        MODEL_FILE,
        PLANT_FILE,
        TRACE_FILE,
        SUMMARY_FILE,
        "runs/run_000.csv",
        "runs/run_005.json",
    ];
    for name in names {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn converged_adaptive_model_is_within_one_percent() {
    let dir = tempdir().unwrap();
    let spec = PlantSpec {
        seed: 11,
        n_modes: 5,
        band: [0.3, 2.0],
        damping_range: [0.03, 0.06],
        gain_scale: 1.0,
    };
    let cfg = CampaignConfig {
        plant: PlantSource::Spec(spec),
        band: [0.2, 2.5],
        strategy: Strategy::Adaptive,
        budget: 12,
        stop_tol: 1e-3,
        experiment: ExperimentConfig {
            fs: 200.0,
            max_duration: 2000.0,
            ..ExperimentConfig::default()
        },
        output_dir: dir.path().to_path_buf(),
        ..CampaignConfig::default()
    };
    let (state, _) = identify(&cfg).unwrap();
    let plant = cfg.load_plant().unwrap();
    let band = cfg.band_rad();
    let m = error_metrics(state.model.system(), &plant, band).unwrap();
    let g = linf_norm(&plant, band, DEFAULT_POINTS_PER_DECADE)
        .unwrap()
        .value;
    assert!(
        m.linf < 0.01 * g,
        "L∞ error {} vs L∞(G) {g} at order {}",
        m.linf,
        state.model.order()
    );
}

#[test]
fn sweep_writes_one_row_per_order() {
    let dir = tempdir().unwrap();
    let cfg = small_config(dir.path());
    let orders = [5, 7, 9];
    let rows = sweep(&cfg, &orders, SweepKind::Strategy).unwrap();
    assert_eq!(rows.iter().map(|r| r.order).collect::<Vec<_>>(), orders);
    for r in &rows {
        assert!(
            r.first.value.is_finite() && r.second.value.is_finite(),
            "{r:?}"
        );
    }
    let (header, table) = export::read_table(&dir.path().join("sweep_strategy.csv")).unwrap();
    assert_eq!(header[..3], ["order", "gridded_h2", "adaptive_h2"]);
    assert_eq!(table.len(), 3);
    let first = fs::read_to_string(dir.path().join("sweep_strategy.csv")).unwrap();
    assert!(first.starts_with("# baryid-sweep schema_version=1\n"));
    assert!(dir
        .path()
        .join("sweep_adaptive_h2/order_009.baryid")
        .exists());

    let rows = sweep(&cfg, &[5, 7], SweepKind::Optimizer).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.first.abscissa < 0.0));
    assert!(matches!(
        sweep(&cfg, &[6], SweepKind::Strategy),
        Err(Error::Validation(_))
    ));
    assert!(matches!(
        sweep(&cfg, &[], SweepKind::Strategy),
        Err(Error::Validation(_))
    ));
}
