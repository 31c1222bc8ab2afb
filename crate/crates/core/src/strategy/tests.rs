use num_complex::Complex64;

use super::*;
use crate::barycentric::eval_interpolant;
use crate::lti::{freq_response_siso, h2_norm};
use crate::plant::{modal_system, Mode};

fn two_mode_plant() -> StateSpace {
    modal_system(&[
        Mode {
            omega_n: 1.0,
            zeta: 0.1,
            residue: 1.0,
        },
        Mode {
            omega_n: 3.0,
            zeta: 0.08,
            residue: 2.5,
        },
    ])
    .unwrap()
}

/// Order 12, above every model order the quality tests reach.
fn six_mode_plant() -> StateSpace {
    let modes: Vec<Mode> = [
        (0.6, 0.05, 0.5),
        (1.0, 0.04, 1.0),
        (1.7, 0.05, 0.8),
        (2.5, 0.03, 1.5),
        (3.6, 0.04, 2.0),
        (5.0, 0.05, 3.0),
    ]
    .iter()
    .map(|&(omega_n, zeta, residue)| Mode {
        omega_n,
        zeta,
        residue,
    })
    .collect();
    modal_system(&modes).unwrap()
}

const BAND: (f64, f64) = (0.4, 6.0);

fn opts(optimizer: Optimizer) -> CampaignOptions {
    CampaignOptions {
        optimizer,
        experiment: ExperimentConfig {
            fs: 400.0,
            max_duration: 2000.0,
            ..ExperimentConfig::default()
        },
        ..CampaignOptions::default()
    }
}

fn h2_error(model: &InterpolantModel, plant: &StateSpace) -> f64 {
    h2_norm(&model.system().difference(plant).unwrap()).unwrap()
}

fn assert_interpolates(state: &CampaignState) {
    let model = &state.model;
    let active = model.active();
    for (p, on) in model.data().points().iter().zip(active) {
        if !on {
            continue;
        }
        let r = freq_response_siso(model.system(), p.omega).unwrap();
        let tol = 1e-6 * p.value.norm().max(1.0);
        assert!(
            (r - p.value).norm() <= tol,
            "at {}: {r} vs {}",
            p.omega,
            p.value
        );
    }
}

#[test]
fn log_grid_hits_both_ends() {
    let g = frequency_grid((0.5, 50.0), 3, GridSpacing::Log).unwrap();
    assert_eq!(g, vec![0.5, 5.0, 50.0]);
    let g = frequency_grid((1.0, 3.0), 5, GridSpacing::Linear).unwrap();
    assert_eq!(g, vec![1.0, 1.5, 2.0, 2.5, 3.0]);
    assert!(frequency_grid((1.0, 3.0), 1, GridSpacing::Log).is_err());
    assert!(frequency_grid((3.0, 1.0), 4, GridSpacing::Log).is_err());
}

#[test]
fn worst_test_error_breaks_ties_low() {
    let e = |omega, error| TestError { omega, error };
    assert_eq!(
        select_worst(&[e(1.0, 0.3), e(2.0, 0.5), e(3.0, 0.5)]),
        Some(1)
    );
    assert_eq!(select_worst(&[e(1.0, 0.3)]), Some(0));
    assert_eq!(select_worst(&[e(1.0, f64::NAN), e(2.0, 0.1)]), Some(1));
    assert_eq!(select_worst(&[e(1.0, 0.1), e(2.0, f64::INFINITY)]), Some(1));
    assert_eq!(select_worst(&[]), None);
}

#[test]
fn two_point_grid_is_order_five() {
    let plant = two_mode_plant();
    let s = gridded_identify(&plant, BAND, 2, &opts(Optimizer::Explicit)).unwrap();
    assert_eq!(s.interp_freqs, vec![BAND.0, BAND.1]);
    assert_eq!(s.model.order(), 5);
    assert_eq!(s.experiments(), 3);
    assert_eq!(s.trace.len(), 1);
    assert_interpolates(&s);
}

#[test]
fn finer_grid_lowers_h2_error() {
    let plant = six_mode_plant();
    let coarse = gridded_identify(&plant, BAND, 2, &opts(Optimizer::Stable)).unwrap();
    let fine = gridded_identify(&plant, BAND, 5, &opts(Optimizer::Stable)).unwrap();
    assert_eq!(fine.model.order(), 11);
    assert_interpolates(&fine);
    let (e2, e8) = (
        h2_error(&coarse.model, &plant),
        h2_error(&fine.model, &plant),
    );
    assert!(e8 < e2, "8 points {e8} vs 2 points {e2}");
}

#[test]
fn adaptive_starts_at_geometric_mean() {
    let plant = two_mode_plant();
    let mut first: Option<CampaignState> = None;
    // never stop early, so the budget alone ends the campaign
    let o = CampaignOptions {
        stop_tol: 0.0,
        ..opts(Optimizer::Stable)
    };
    let s = adaptive_identify_with(&plant, BAND, 3, &o, |st| {
        if first.is_none() {
            first = Some(st.clone());
        }
    })
    .unwrap();
    let first = first.unwrap();
    let mid = (BAND.0 * BAND.1).sqrt();
    assert_eq!(first.interp_freqs, vec![BAND.0, BAND.1]);
    assert_eq!(first.test_pool.len(), 1);
    assert_eq!(first.test_pool[0].omega, mid);
    assert_eq!(first.experiments(), 4);

    // the only test point is promoted and split
    assert_eq!(s.interp_freqs, vec![BAND.0, mid, BAND.1]);
    let tests: Vec<f64> = s.test_pool.iter().map(|t| t.omega).collect();
    assert_eq!(tests, vec![(mid * BAND.0).sqrt(), (mid * BAND.1).sqrt()]);
    assert_eq!(s.trace[1].chosen_omega, Some(mid));
    assert_eq!(s.experiments(), 6);
}

#[test]
fn adaptive_campaign_invariants() {
    let plant = two_mode_plant();
    let mut o = opts(Optimizer::Stable);
    o.stop_tol = 0.0;
    let s = adaptive_identify(&plant, BAND, 7, &o).unwrap();
    assert_eq!(s.interp_freqs.len(), 7);
    assert_eq!(s.model.order(), 15);
    for snap in &s.trace {
        assert_eq!(snap.experiments, 4 + 2 * snap.iteration);
        assert_eq!(snap.model_order, 2 * snap.interp_freqs.len() + 1);
        assert!(snap.spectral_abscissa < -s.alpha + 1e-6);
        assert!(snap.cost <= snap.cost_bound.unwrap() + 1e-6);
    }
    assert_eq!(s.trace.len(), 6);
    // strictly increasing interpolation set, each test strictly inside an interval
    assert!(s.interp_freqs.windows(2).all(|w| w[0] < w[1]));
    let mut owners = vec![0; s.interp_freqs.len() - 1];
    for t in &s.test_pool {
        let i = s.interp_freqs.partition_point(|&w| w < t.omega);
        assert!(i > 0 && i < s.interp_freqs.len() && s.interp_freqs[i] != t.omega);
        owners[i - 1] += 1;
        assert_eq!(s.records[t.record].omega, t.omega);
    }
    assert!(owners.iter().all(|&c| c <= 1));
    // one record per distinct frequency
    let mut omegas: Vec<f64> = s.records.iter().map(|r| r.omega).collect();
    omegas.sort_by(f64::total_cmp);
    omegas.dedup();
    assert_eq!(omegas.len(), s.records.len());
    // promoted frequencies are interpolated with their stored measurement
    assert_interpolates(&s);
    for snap in &s.trace[1..] {
        let w = snap.chosen_omega.unwrap();
        let p = s
            .model
            .data()
            .points()
            .iter()
            .find(|p| p.omega == w)
            .unwrap();
        assert_eq!(p.value, s.record_at(w).unwrap().response.value);
    }
}

#[test]
fn adaptive_improves_on_initial_model() {
    let plant = six_mode_plant();
    let mut o = opts(Optimizer::Stable);
    o.stop_tol = 0.0;
    let mut errs = Vec::new();
    adaptive_identify_with(&plant, BAND, 6, &o, |st| {
        errs.push(h2_error(&st.model, &plant))
    })
    .unwrap();
    assert!(errs.last().unwrap() < &(0.1 * errs[0]), "{errs:?}");
}

#[test]
fn adaptive_is_deterministic() {
    let plant = two_mode_plant();
    let o = opts(Optimizer::Stable);
    let a = adaptive_identify(&plant, BAND, 5, &o).unwrap();
    let b = adaptive_identify(&plant, BAND, 5, &o).unwrap();
    assert_eq!(a.trace, b.trace);
    assert_eq!(a.model, b.model);
}

#[test]
fn loose_tolerance_stops_before_first_iteration() {
    let plant = two_mode_plant();
    let mut o = opts(Optimizer::Explicit);
    o.stop_tol = 10.0;
    let s = adaptive_identify(&plant, BAND, 10, &o).unwrap();
    assert_eq!(s.trace.len(), 1);
    assert_eq!(s.interp_freqs.len(), 2);
}

#[test]
fn probe_matches_barycentric_evaluation() {
    let plant = two_mode_plant();
    let mut o = opts(Optimizer::Explicit);
    o.stop_tol = 0.0;
    let s = adaptive_identify(&plant, BAND, 4, &o).unwrap();
    let recs: Vec<&ExperimentRecord> = s.test_pool.iter().map(|t| &s.records[t.record]).collect();
    let errs = model_error_probe(&s.model, &recs).unwrap();
    assert_eq!(errs.len(), recs.len());
    for e in errs {
        let rec = recs.iter().find(|r| r.omega == e.omega).unwrap();
        let oracle = (eval_interpolant(&s.model, e.omega).unwrap() - rec.response.value).norm();
        assert!(
            (e.error - oracle).abs() <= 1e-9 * oracle.max(1.0),
            "{} vs {oracle}",
            e.error
        );
    }
}

#[test]
fn probe_on_the_plant_itself_sees_only_measurement_error() {
    // the plant is itself a barycentric interpolant with stable weights
    let data = InterpolationData::new(
        0.0,
        1.2,
        vec![
            FrequencySample::new(1.0, Complex64::new(0.3, -0.9)),
            FrequencySample::new(3.0, Complex64::new(-0.2, -0.4)),
        ],
    )
    .unwrap();
    let bases = build_bases(&data).unwrap();
    let model = assemble_model(
        &bases,
        &data,
        &WeightRow::new(vec![0.8, 1.0, 0.5, 2.0, -1.0]),
    )
    .unwrap();
    assert!(spectral_abscissa(model.system()).unwrap() < 0.0);
    let cfg = opts(Optimizer::Explicit).experiment;
    let recs: Vec<ExperimentRecord> = [0.7, 2.0, 4.5]
        .iter()
        .map(|&w| run_experiment(model.system(), w, &cfg).unwrap())
        .collect();
    let refs: Vec<&ExperimentRecord> = recs.iter().collect();
    for e in model_error_probe(&model, &refs).unwrap() {
        let g = freq_response_siso(model.system(), e.omega).unwrap().norm();
        assert!(
            e.error <= 10.0 * cfg.gamma * g,
            "{} at {}",
            e.error,
            e.omega
        );
    }
}

#[test]
fn timeouts_carry_the_frequency() {
    let plant = two_mode_plant();
    let mut o = opts(Optimizer::Explicit);
    o.experiment.max_duration = 1.0;
    let err = gridded_identify(&plant, BAND, 3, &o).unwrap_err();
    assert!(
        matches!(err.root(), Error::SteadyStateTimeout { .. }),
        "{err}"
    );
}

#[test]
fn bad_campaign_arguments() {
    let plant = two_mode_plant();
    let o = opts(Optimizer::Explicit);
    assert!(matches!(
        adaptive_identify(&plant, BAND, 2, &o),
        Err(Error::Validation(_))
    ));
    assert!(matches!(
        gridded_identify(&plant, (2.0, 1.0), 4, &o),
        Err(Error::Validation(_))
    ));
    assert!(matches!(
        gridded_identify(&plant, BAND, 1, &o),
        Err(Error::Validation(_))
    ));
}
