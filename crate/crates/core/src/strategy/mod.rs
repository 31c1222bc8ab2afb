//! Identification campaigns: a fixed frequency grid, and adaptive
//! geometric-mean refinement driven by the model's error at test frequencies.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::barycentric::{
    assemble_model, build_bases, FrequencySample, InterpolantModel, InterpolationData, WeightRow,
};
use crate::error::{Error, Result, ResultExt};
use crate::lti::{spectral_abscissa, FrequencyEvaluator, Hold, StateSpace};
use crate::plant::{
    estimate_dc_and_feedthrough, run_experiment, ExperimentConfig, ExperimentRecord,
};
use crate::weights::{
    records_covariance, solve_explicit, solve_stable, DataSelection, ExplicitOptions, StableOptions,
};

/// Relative stop tolerance on the largest test error, as a fraction of the
/// largest measured `|G|`.
pub const DEFAULT_STOP_TOL: f64 = 1e-3;

/// Default decay margin as a fraction of the top of the band.
pub const DEFAULT_ALPHA_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Explicit,
    #[default]
    Stable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridSpacing {
    #[default]
    Log,
    Linear,
}

/// Settings shared by both campaign types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignOptions {
    pub optimizer: Optimizer,
    /// Decay margin in rad/s; `None` means `1e−4·ω_max`.
    pub alpha: Option<f64>,
    pub experiment: ExperimentConfig,
    pub selection: DataSelection,
    /// Reconstruction of the sampled records when driving the bases.
    pub hold: Hold,
    pub explicit: ExplicitOptions,
    pub stable: StableOptions,
    /// Adaptive stop threshold relative to the largest measured `|G|`.
    pub stop_tol: f64,
    /// Gridded frequency placement.
    pub spacing: GridSpacing,
}

impl Default for CampaignOptions {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::default(),
            alpha: None,
            experiment: ExperimentConfig::default(),
            selection: DataSelection::default(),
            hold: Hold::default(),
            explicit: ExplicitOptions::default(),
            stable: StableOptions::default(),
            stop_tol: DEFAULT_STOP_TOL,
            spacing: GridSpacing::default(),
        }
    }
}

impl CampaignOptions {
    pub fn alpha_for(&self, omega_max: f64) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA_FRACTION * omega_max)
    }
}

/// `|R(jω̂) − G(jω̂)|` at one test frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestError {
    pub omega: f64,
    #[serde(with = "crate::serde_float")]
    pub error: f64,
}

/// One row of the campaign trace, written after every model rebuild.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationSnapshot {
    pub iteration: usize,
    /// The test frequency promoted in this iteration; `None` for the initial model.
    pub chosen_omega: Option<f64>,
    pub interp_freqs: Vec<f64>,
    /// Errors of this model at the test frequencies still in the pool.
    pub test_errors: Vec<TestError>,
    #[serde(with = "crate::serde_float")]
    pub max_test_error: f64,
    pub model_order: usize,
    /// `[1 Ŵ]X[1 Ŵ]ᵀ` at the chosen weights.
    #[serde(with = "crate::serde_float")]
    pub cost: f64,
    /// `γ − X̂₀X̂₂⁻¹X̂₀ᵀ + X̂₁` from the stability-constrained solve.
    pub cost_bound: Option<f64>,
    #[serde(with = "crate::serde_float")]
    pub spectral_abscissa: f64,
    /// Runs performed so far, the step run included.
    pub experiments: usize,
}

/// A test frequency and the index of its record in `records`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestPoint {
    pub omega: f64,
    pub record: usize,
}

/// Everything a campaign has measured and built.
#[derive(Debug, Clone)]
pub struct CampaignState {
    /// rad/s
    pub band: (f64, f64),
    /// Strictly increasing, rad/s.
    pub interp_freqs: Vec<f64>,
    pub test_pool: Vec<TestPoint>,
    /// One record per distinct frequency visited; the step run is first.
    pub records: Vec<ExperimentRecord>,
    pub d: f64,
    pub k: f64,
    pub alpha: f64,
    pub model: InterpolantModel,
    pub trace: Vec<IterationSnapshot>,
}

impl CampaignState {
    /// Sinusoidal runs plus the step run.
    pub fn experiments(&self) -> usize {
        self.records.len()
    }

    fn record_at(&self, omega: f64) -> Option<&ExperimentRecord> {
        self.records.iter().find(|r| r.omega == omega)
    }

    pub fn max_measured_gain(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.response.value.norm())
            .fold(0.0, f64::max)
    }
}

fn check_band(band: (f64, f64)) -> Result<()> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Validation(format!(
            "band must satisfy 0 < ω_min < ω_max, got [{lo}, {hi}] rad/s"
        )));
    }
    Ok(())
}

fn hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

fn experiment(
    plant: &StateSpace,
    omega: f64,
    config: &ExperimentConfig,
) -> Result<ExperimentRecord> {
    run_experiment(plant, omega, config).context(|| format!("experiment at {:.6} Hz", hz(omega)))
}

/// `n` frequencies from `lo` to `hi` inclusive.
pub fn frequency_grid(band: (f64, f64), n: usize, spacing: GridSpacing) -> Result<Vec<f64>> {
    check_band(band)?;
    if n < 2 {
        return Err(Error::Validation(format!(
            "a grid needs at least 2 points, got {n}"
        )));
    }
    let (lo, hi) = band;
    let step = 1.0 / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n)
        .map(|i| {
            let s = i as f64 * step;
            match spacing {
                GridSpacing::Log => lo * (hi / lo).powf(s),
                GridSpacing::Linear => lo + (hi - lo) * s,
            }
        })
        .collect();
    // pin the end points against rounding in powf
    grid[0] = lo;
    grid[n - 1] = hi;
    Ok(grid)
}

/// Weights and diagnostics from one solve.
struct Solved {
    model: InterpolantModel,
    cost: f64,
    cost_bound: Option<f64>,
    abscissa: f64,
}

/// Interpolates the records at `interp_freqs` and fits the weights to every
/// record's data.
fn solve_model(
    interp_freqs: &[f64],
    records: &[ExperimentRecord],
    d: f64,
    k: f64,
    alpha: f64,
    opts: &CampaignOptions,
) -> Result<Solved> {
    let points = interp_freqs
        .iter()
        .map(|&w| {
            records
                .iter()
                .find(|r| r.omega == w)
                .map(|r| r.response)
                .ok_or_else(|| Error::Validation(format!("no record at {w} rad/s")))
        })
        .collect::<Result<Vec<FrequencySample>>>()?;
    let data = InterpolationData::new(d, k, points)?;
    let bases = build_bases(&data)?;
    let refs: Vec<&ExperimentRecord> = records.iter().collect();
    let cov = records_covariance(&bases, &refs, opts.selection, opts.hold)?;
    let (w, cost_bound): (WeightRow, Option<f64>) = match opts.optimizer {
        Optimizer::Explicit => (solve_explicit(&cov, &opts.explicit)?, None),
        Optimizer::Stable => {
            let res = solve_stable(&cov, &bases, alpha, &opts.stable)?;
            (res.w, Some(res.cost_bound))
        }
    };
    let cost = cov.cost(&w);
    let model = assemble_model(&bases, &data, &w)?;
    let abscissa = spectral_abscissa(model.system())?;
    Ok(Solved {
        model,
        cost,
        cost_bound,
        abscissa,
    })
}

fn context_for(interp_freqs: &[f64]) -> String {
    format!(
        "weight solve with {} interpolation points ({:.6}..{:.6} Hz)",
        interp_freqs.len(),
        hz(interp_freqs[0]),
        hz(interp_freqs[interp_freqs.len() - 1])
    )
}

/// `|R(jω̂) − G(jω̂)|` for each record with `ω̂ > 0`, in increasing `ω̂`.
///
/// A model pole on the imaginary axis at `ω̂` counts as an infinite error.
pub fn model_error_probe(
    model: &InterpolantModel,
    records: &[&ExperimentRecord],
) -> Result<Vec<TestError>> {
    let eval = FrequencyEvaluator::new(model.system())?;
    let mut out: Vec<TestError> = records
        .iter()
        .filter(|r| r.omega > 0.0)
        .map(|r| {
            let error = match eval.eval(r.omega) {
                Ok(v) => (v - r.response.value).norm(),
                Err(Error::SingularAtFrequency { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            Ok(TestError {
                omega: r.omega,
                error,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.omega.total_cmp(&b.omega));
    Ok(out)
}

/// Index of the largest error; on a tie the lowest frequency wins.
/// Expects `errors` sorted by frequency.
pub fn select_worst(errors: &[TestError]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in errors.iter().enumerate() {
        let better = match best {
            None => true,
            Some(b) => e.error > errors[b].error || (errors[b].error.is_nan() && !e.error.is_nan()),
        };
        if better {
            best = Some(i);
        }
    }
    best
}

fn snapshot(
    state_freqs: &[f64],
    iteration: usize,
    chosen: Option<f64>,
    test_errors: Vec<TestError>,
    solved: &Solved,
    experiments: usize,
) -> IterationSnapshot {
    let max_test_error = test_errors.iter().map(|e| e.error).fold(0.0, f64::max);
    IterationSnapshot {
        iteration,
        chosen_omega: chosen,
        interp_freqs: state_freqs.to_vec(),
        test_errors,
        max_test_error,
        model_order: solved.model.order(),
        cost: solved.cost,
        cost_bound: solved.cost_bound,
        spectral_abscissa: solved.abscissa,
        experiments,
    }
}

/// Runs experiments on a fixed grid of `n_points` frequencies across `band`
/// (rad/s), interpolates all of them and solves for the weights once.
pub fn gridded_identify(
    plant: &StateSpace,
    band: (f64, f64),
    n_points: usize,
    opts: &CampaignOptions,
) -> Result<CampaignState> {
    let freqs = frequency_grid(band, n_points, opts.spacing)?;
    let alpha = opts.alpha_for(band.1);
    let dc = estimate_dc_and_feedthrough(plant, &opts.experiment, band.0)
        .context(|| "step run for the DC gain and feedthrough".to_string())?;
    let mut records = vec![dc.record];
    for &w in &freqs {
        records.push(experiment(plant, w, &opts.experiment)?);
    }
    let solved =
        solve_model(&freqs, &records, dc.d, dc.k, alpha, opts).context(|| context_for(&freqs))?;
    let snap = snapshot(&freqs, 0, None, Vec::new(), &solved, records.len());
    Ok(CampaignState {
        band,
        interp_freqs: freqs,
        test_pool: Vec::new(),
        records,
        d: dc.d,
        k: dc.k,
        alpha,
        model: solved.model,
        trace: vec![snap],
    })
}

/// Adaptive campaign; see [`adaptive_identify_with`].
pub fn adaptive_identify(
    plant: &StateSpace,
    band: (f64, f64),
    max_interp_points: usize,
    opts: &CampaignOptions,
) -> Result<CampaignState> {
    adaptive_identify_with(plant, band, max_interp_points, opts, |_| {})
}

/// Starts from interpolation at both band edges and one test at their
/// geometric mean. Each iteration promotes the test frequency with the
/// largest model error to an interpolation point, runs new tests at the
/// geometric means with its two neighbours, and refits the weights to all
/// data. Stops when the interpolation budget is used up or every test error
/// is below `stop_tol·max|G|`.
///
/// `observe` sees the state after every model rebuild, the initial one included.
pub fn adaptive_identify_with(
    plant: &StateSpace,
    band: (f64, f64),
    max_interp_points: usize,
    opts: &CampaignOptions,
    mut observe: impl FnMut(&CampaignState),
) -> Result<CampaignState> {
    check_band(band)?;
    if max_interp_points < 3 {
        return Err(Error::Validation(format!(
            "adaptive campaigns need a budget of at least 3 interpolation points, got {max_interp_points}"
        )));
    }
    let (lo, hi) = band;
    let alpha = opts.alpha_for(hi);
    let dc = estimate_dc_and_feedthrough(plant, &opts.experiment, lo)
        .context(|| "step run for the DC gain and feedthrough".to_string())?;
    let mut records = vec![dc.record];
    let interp_freqs = vec![lo, hi];
    let mid = (lo * hi).sqrt();
    for w in [lo, hi, mid] {
        records.push(experiment(plant, w, &opts.experiment)?);
    }
    let solved = solve_model(&interp_freqs, &records, dc.d, dc.k, alpha, opts)
        .context(|| context_for(&interp_freqs))?;
    let mut state = CampaignState {
        band,
        interp_freqs,
        test_pool: vec![TestPoint {
            omega: mid,
            record: records.len() - 1,
        }],
        records,
        d: dc.d,
        k: dc.k,
        alpha,
        model: solved.model.clone(),
        trace: Vec::new(),
    };
    let errors = pool_errors(&state)?;
    state.trace.push(snapshot(
        &state.interp_freqs,
        0,
        None,
        errors,
        &solved,
        state.experiments(),
    ));
    observe(&state);

    let g_max = state.max_measured_gain();
    let mut iteration = 0;
    while state.interp_freqs.len() < max_interp_points {
        let errors = &state
            .trace
            .last()
            .expect("trace starts non-empty")
            .test_errors;
        let Some(pick) = select_worst(errors) else {
            break;
        };
        if errors[pick].error < opts.stop_tol * g_max {
            break;
        }
        iteration += 1;
        let chosen = errors[pick].omega;
        promote(&mut state, chosen)?;
        let pos = state
            .interp_freqs
            .iter()
            .position(|&w| w == chosen)
            .expect("promoted frequency is present");
        // the band edges are interpolation points from the start, so both
        // neighbours exist
        let (w_l, w_h) = (state.interp_freqs[pos - 1], state.interp_freqs[pos + 1]);
        for w in [(chosen * w_l).sqrt(), (chosen * w_h).sqrt()] {
            assert!(
                w > w_l.min(w_h) && w < w_l.max(w_h) && state.record_at(w).is_none(),
                "geometric mean {w} is not a new interior frequency"
            );
            let rec = experiment(plant, w, &opts.experiment)?;
            state.records.push(rec);
            state.test_pool.push(TestPoint {
                omega: w,
                record: state.records.len() - 1,
            });
        }
        state.test_pool.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        let solved = solve_model(
            &state.interp_freqs,
            &state.records,
            state.d,
            state.k,
            alpha,
            opts,
        )
        .context(|| context_for(&state.interp_freqs))?;
        state.model = solved.model.clone();
        let errors = pool_errors(&state)?;
        state.trace.push(snapshot(
            &state.interp_freqs,
            iteration,
            Some(chosen),
            errors,
            &solved,
            state.experiments(),
        ));
        observe(&state);
    }
    Ok(state)
}

/// Moves `omega` from the test pool into the interpolation set, reusing its record.
fn promote(state: &mut CampaignState, omega: f64) -> Result<()> {
    let idx = state
        .test_pool
        .iter()
        .position(|t| t.omega == omega)
        .ok_or_else(|| Error::Validation(format!("{omega} rad/s is not a test frequency")))?;
    state.test_pool.remove(idx);
    let at = state.interp_freqs.partition_point(|&w| w < omega);
    if state.interp_freqs.get(at) == Some(&omega) {
        return Err(Error::DuplicateFrequency { omega });
    }
    state.interp_freqs.insert(at, omega);
    Ok(())
}

fn pool_errors(state: &CampaignState) -> Result<Vec<TestError>> {
    let recs: Vec<&ExperimentRecord> = state
        .test_pool
        .iter()
        .map(|t| &state.records[t.record])
        .collect();
    model_error_probe(&state.model, &recs)
}

#[cfg(test)]
mod tests;
