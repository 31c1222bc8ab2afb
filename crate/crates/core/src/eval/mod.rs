//! Campaign configuration, file formats, error metrics and the commands
//! behind the `baryid` binary.
//!
//! Frequencies in configs and on the command line are in Hz; everything
//! below this module works in rad/s.

pub mod export;
pub mod files;
pub mod hexfloat;

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barycentric::InterpolantModel;
use crate::error::{Error, Result, ResultExt};
use crate::lti::{
    h2_norm, linf_norm, poles, spectral_abscissa, Hold, SampledSignal, StateSpace,
    DEFAULT_POINTS_PER_DECADE,
};
use crate::plant::{
    detect_steady_state, modal_system, synth_modes, ExperimentConfig, Mode, PlantSpec,
};
use crate::strategy::{
    adaptive_identify_with, gridded_identify, CampaignOptions, CampaignState, GridSpacing,
    Optimizer, DEFAULT_STOP_TOL,
};
use crate::weights::{DataSelection, ExplicitOptions, StableOptions};

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

/// Points of the exported Bode grid.
pub const BODE_POINTS: usize = 10_000;

pub fn hz_to_rad(f: f64) -> f64 {
    2.0 * PI * f
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / (2.0 * PI)
}

fn band_rad(band_hz: [f64; 2]) -> (f64, f64) {
    (hz_to_rad(band_hz[0]), hz_to_rad(band_hz[1]))
}

/// Twenty modes across 0.5–90 Hz with 2–5% damping.
pub fn default_plant_spec() -> PlantSpec {
    PlantSpec {
        seed: 0,
        n_modes: 20,
        band: [0.5, 90.0],
        damping_range: [0.02, 0.05],
        gain_scale: 1.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantSource {
    Spec(PlantSpec),
    /// A state-space or interpolant file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Gridded,
    #[default]
    Adaptive,
}

/// Everything an identification run needs; the JSON config file maps onto
/// it field by field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema_version: u32,
    pub plant: PlantSource,
    /// Hz
    pub band: [f64; 2],
    pub strategy: Strategy,
    pub optimizer: Optimizer,
    /// Decay margin in 1/s; `None` picks `1e−4·ω_max`.
    pub alpha: Option<f64>,
    pub experiment: ExperimentConfig,
    /// Interpolation points: the grid size, or the adaptive maximum.
    pub budget: usize,
    pub stop_tol: f64,
    pub selection: DataSelection,
    pub hold: Hold,
    /// Add `εI` to a rank-deficient `X̂₂` instead of failing.
    pub ridge: bool,
    pub spacing: GridSpacing,
    pub output_dir: PathBuf,
    /// Overrides the seed of a generated plant.
    pub seed: Option<u64>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            schema_version: CONFIG_SCHEMA_VERSION,
            plant: PlantSource::Spec(default_plant_spec()),
            band: [0.5, 90.0],
            strategy: Strategy::default(),
            optimizer: Optimizer::default(),
            alpha: None,
            experiment: ExperimentConfig::default(),
            budget: 21,
            stop_tol: DEFAULT_STOP_TOL,
            selection: DataSelection::default(),
            hold: Hold::default(),
            ridge: false,
            spacing: GridSpacing::default(),
            output_dir: PathBuf::from("baryid-out"),
            seed: None,
        }
    }
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "config schema version {} is not supported (expected {CONFIG_SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::from(e).context(path.display().to_string()))?;
        Self::from_json(&text).context(|| path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.band;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::Validation(format!(
                "band must satisfy 0 < lo < hi, got [{lo}, {hi}] Hz"
            )));
        }
        let min_budget = match self.strategy {
            Strategy::Gridded => 2,
            Strategy::Adaptive => 3,
        };
        if self.budget < min_budget {
            return Err(Error::Validation(format!(
                "budget must be at least {min_budget} interpolation points, got {}",
                self.budget
            )));
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::Validation("stop_tol must be nonnegative".into()));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Validation(format!(
                    "alpha must be positive, got {a}"
                )));
            }
        }
        self.experiment.validate()?;
        self.experiment.check_frequency(hz_to_rad(hi))
    }

    pub fn options(&self) -> CampaignOptions {
        CampaignOptions {
            optimizer: self.optimizer,
            alpha: self.alpha,
            experiment: self.experiment.clone(),
            selection: self.selection,
            hold: self.hold,
            explicit: ExplicitOptions { ridge: self.ridge },
            stable: StableOptions {
                ridge: self.ridge,
                ..StableOptions::default()
            },
            stop_tol: self.stop_tol,
            spacing: self.spacing,
            ..CampaignOptions::default()
        }
    }

    pub fn plant_spec(&self) -> Option<PlantSpec> {
        match &self.plant {
            PlantSource::Spec(spec) => {
                let mut spec = spec.clone();
                if let Some(seed) = self.seed {
                    spec.seed = seed;
                }
                Some(spec)
            }
            PlantSource::File(_) => None,
        }
    }

    pub fn load_plant(&self) -> Result<StateSpace> {
        match (&self.plant, self.plant_spec()) {
            (_, Some(spec)) => modal_system(&synth_modes(&spec)?),
            (PlantSource::File(path), None) => files::read_state_space(path),
            (PlantSource::Spec(_), None) => unreachable!(),
        }
    }

    /// rad/s
    pub fn band_rad(&self) -> (f64, f64) {
        band_rad(self.band)
    }
}

/// One row of the mode table printed by `gen-plant`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeRow {
    pub frequency_hz: f64,
    pub zeta: f64,
    pub residue: f64,
}

impl From<&Mode> for ModeRow {
    fn from(m: &Mode) -> Self {
        Self {
            frequency_hz: rad_to_hz(m.omega_n),
            zeta: m.zeta,
            residue: m.residue,
        }
    }
}

/// Synthesizes the plant for `spec` and writes it to `path`.
pub fn gen_plant(spec: &PlantSpec, path: &Path) -> Result<(StateSpace, Vec<ModeRow>)> {
    let modes = synth_modes(spec)?;
    let sys = modal_system(&modes)?;
    files::write_state_space(path, &sys)?;
    Ok((sys, modes.iter().map(ModeRow::from).collect()))
}

/// Runs the campaign described by `cfg` on `plant`. `observe` sees every
/// intermediate state of an adaptive campaign and the single state of a
/// gridded one.
pub fn run_campaign(
    cfg: &CampaignConfig,
    plant: &StateSpace,
    mut observe: impl FnMut(&CampaignState),
) -> Result<CampaignState> {
    cfg.validate()?;
    let opts = cfg.options();
    match cfg.strategy {
        Strategy::Gridded => {
            let state = gridded_identify(plant, cfg.band_rad(), cfg.budget, &opts)?;
            observe(&state);
            Ok(state)
        }
        Strategy::Adaptive => {
            adaptive_identify_with(plant, cfg.band_rad(), cfg.budget, &opts, observe)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifySummary {
    pub schema_version: u32,
    pub order: usize,
    pub experiments: usize,
    pub interpolation_points_hz: Vec<f64>,
    #[serde(with = "crate::serde_float")]
    pub max_test_error: f64,
    #[serde(with = "crate::serde_float")]
    pub spectral_abscissa: f64,
    pub alpha: f64,
    pub feedthrough: f64,
    pub dc_gain: f64,
}

pub const MODEL_FILE: &str = "model.baryid";
pub const PLANT_FILE: &str = "plant.ss";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.json";
pub const RUNS_DIR: &str = "runs";

/// Runs the campaign and writes, under `cfg.output_dir`: the model, the
/// plant it was run on, the trace, one CSV + sidecar per experiment, the
/// summary and the effective config.
pub fn identify(cfg: &CampaignConfig) -> Result<(CampaignState, IdentifySummary)> {
    cfg.validate()?;
    let plant = cfg.load_plant()?;
    let state = run_campaign(cfg, &plant, |_| {})?;
    let last = state
        .trace
        .last()
        .expect("campaigns record at least one snapshot");
    let summary = IdentifySummary {
        schema_version: export::EXPORT_SCHEMA_VERSION,
        order: state.model.order(),
        experiments: state.experiments(),
        interpolation_points_hz: state.interp_freqs.iter().copied().map(rad_to_hz).collect(),
        max_test_error: last.max_test_error,
        spectral_abscissa: last.spectral_abscissa,
        alpha: state.alpha,
        feedthrough: state.d,
        dc_gain: state.k,
    };

    let out = &cfg.output_dir;
    let runs = out.join(RUNS_DIR);
    fs::create_dir_all(&runs).map_err(|e| Error::from(e).context(runs.display().to_string()))?;
    files::write_model(&out.join(MODEL_FILE), &state.model)?;
    files::write_state_space(&out.join(PLANT_FILE), &plant)?;
    export::write_trace(&out.join(TRACE_FILE), &state.trace)?;
    for (i, rec) in state.records.iter().enumerate() {
        export::write_run(&runs, &format!("run_{i:03}"), rec)?;
    }
    export::write_json(&out.join(SUMMARY_FILE), &summary)?;
    let config_path = out.join(CONFIG_FILE);
    fs::write(&config_path, cfg.to_json() + "\n")
        .map_err(|e| Error::from(e).context(config_path.display().to_string()))?;
    Ok((state, summary))
}

/// Norms of `R − G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    pub schema_version: u32,
    /// `None` when the error system is unstable or has feedthrough.
    pub h2: Option<f64>,
    pub h2_undefined: Option<String>,
    #[serde(with = "crate::serde_float")]
    pub linf: f64,
    /// Where the L∞ supremum is attained, Hz.
    pub linf_frequency_hz: f64,
    #[serde(with = "crate::serde_float")]
    pub model_abscissa: f64,
}

/// H² and L∞ (over `band`, rad/s) of `model − plant`.
pub fn error_metrics(
    model: &StateSpace,
    plant: &StateSpace,
    band: (f64, f64),
) -> Result<ErrorMetrics> {
    let model_abscissa = spectral_abscissa(model)?;
    if model == plant {
        return Ok(ErrorMetrics {
            schema_version: export::EXPORT_SCHEMA_VERSION,
            h2: Some(0.0),
            h2_undefined: None,
            linf: 0.0,
            linf_frequency_hz: rad_to_hz(band.0),
            model_abscissa,
        });
    }
    let err = model.difference(plant)?;
    let (h2, h2_undefined) = match h2_norm(&err) {
        Ok(v) => (Some(v), None),
        Err(e @ (Error::UnstableSystem { .. } | Error::NonzeroFeedthrough)) => {
            (None, Some(format!("undefined: {e}")))
        }
        Err(e) => return Err(e),
    };
    let linf = linf_norm(&err, band, DEFAULT_POINTS_PER_DECADE)?;
    Ok(ErrorMetrics {
        schema_version: export::EXPORT_SCHEMA_VERSION,
        h2,
        h2_undefined,
        linf: linf.value,
        linf_frequency_hz: rad_to_hz(linf.omega),
        model_abscissa,
    })
}

pub const BODE_FILE: &str = "bode.csv";
pub const METRICS_FILE: &str = "metrics.json";

/// Compares a model file against a plant file over `band_hz`; with `out`,
/// writes the Bode table and the metrics there.
pub fn evaluate(
    model_path: &Path,
    plant_path: &Path,
    band_hz: [f64; 2],
    out: Option<&Path>,
) -> Result<ErrorMetrics> {
    let band = band_rad(band_hz);
    if !(band.0 > 0.0 && band.1 > band.0 && band.1.is_finite()) {
        return Err(Error::Validation(format!(
            "band must satisfy 0 < lo < hi, got [{}, {}] Hz",
            band_hz[0], band_hz[1]
        )));
    }
    let model = files::read_state_space(model_path)?;
    let plant = files::read_state_space(plant_path)?;
    if !model.is_siso() || !plant.is_siso() {
        return Err(Error::DimensionMismatch(
            "evaluation needs SISO systems".into(),
        ));
    }
    let metrics = error_metrics(&model, &plant, band)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir).map_err(|e| Error::from(e).context(dir.display().to_string()))?;
        let rows = export::bode(&plant, &model, band, BODE_POINTS)?;
        export::write_bode(&dir.join(BODE_FILE), &rows)?;
        export::write_json(&dir.join(METRICS_FILE), &metrics)?;
    }
    Ok(metrics)
}

/// What a sweep compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Gridded vs adaptive frequency selection, H² error, configured optimizer.
    Strategy,
    /// Stable vs explicit weights, L∞ error, adaptive selection.
    Optimizer,
}

/// One metric of one sweep cell; `value` is NaN when the cell failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub value: f64,
    pub abscissa: f64,
    pub note: String,
}

impl Cell {
    fn failed(note: String) -> Self {
        Self {
            value: f64::NAN,
            abscissa: f64::NAN,
            note,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub order: usize,
    /// Gridded or stable, by [`SweepKind`].
    pub first: Cell,
    /// Adaptive or explicit.
    pub second: Cell,
}

impl SweepKind {
    pub fn columns(self) -> [&'static str; 2] {
        match self {
            SweepKind::Strategy => ["gridded_h2", "adaptive_h2"],
            SweepKind::Optimizer => ["stable_linf", "explicit_linf"],
        }
    }
}

pub fn sweep_header(kind: SweepKind) -> Vec<String> {
    let [a, b] = kind.columns();
    vec![
        "order".into(),
        a.into(),
        b.into(),
        format!("{a}_abscissa"),
        format!("{b}_abscissa"),
        format!("{a}_note"),
        format!("{b}_note"),
    ]
}

pub fn sweep_records(rows: &[SweepRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.order.to_string(),
                r.first.value.to_string(),
                r.second.value.to_string(),
                r.first.abscissa.to_string(),
                r.second.abscissa.to_string(),
                r.first.note.clone(),
                r.second.note.clone(),
            ]
        })
        .collect()
}

/// `2ℓ + 1` for odd orders of at least 5.
fn points_for_order(order: usize) -> Result<usize> {
    if order < 5 || order % 2 == 0 {
        return Err(Error::Validation(format!(
            "model orders are odd and at least 5, got {order}"
        )));
    }
    Ok((order - 1) / 2)
}

fn cell_metric(
    kind: SweepKind,
    model: &InterpolantModel,
    plant: &StateSpace,
    band: (f64, f64),
) -> Cell {
    let abscissa = spectral_abscissa(model.system()).unwrap_or(f64::NAN);
    let result = match kind {
        SweepKind::Strategy => model.system().difference(plant).and_then(|e| h2_norm(&e)),
        SweepKind::Optimizer => model
            .system()
            .difference(plant)
            .and_then(|e| linf_norm(&e, band, DEFAULT_POINTS_PER_DECADE))
            .map(|l| l.value),
    };
    match result {
        Ok(value) => Cell {
            value,
            abscissa,
            note: String::new(),
        },
        Err(e) => Cell {
            value: f64::NAN,
            abscissa,
            note: e.to_string(),
        },
    }
}

/// Per-order metric of one adaptive campaign run to the largest order; an
/// adaptive run with a larger budget passes through every smaller one.
fn adaptive_cells(
    cfg: &CampaignConfig,
    plant: &StateSpace,
    orders: &[usize],
    kind: SweepKind,
    models_dir: Option<&Path>,
) -> Vec<Cell> {
    let band = cfg.band_rad();
    let mut cells: Vec<Option<Cell>> = vec![None; orders.len()];
    let mut write_err: Option<Error> = None;
    let result = run_campaign(cfg, plant, |st| {
        let order = st.model.order();
        if let Some(i) = orders.iter().position(|&o| o == order) {
            cells[i] = Some(cell_metric(kind, &st.model, plant, band));
            if let Some(dir) = models_dir {
                if let Err(e) =
                    files::write_model(&dir.join(format!("order_{order:03}.baryid")), &st.model)
                {
                    write_err.get_or_insert(e);
                }
            }
        }
    });
    let failure = match (result, write_err) {
        (Err(e), _) | (Ok(_), Some(e)) => Some(e.to_string()),
        _ => None,
    };
    cells
        .into_iter()
        .map(|c| {
            c.unwrap_or_else(|| {
                Cell::failed(
                    failure
                        .clone()
                        .unwrap_or_else(|| "campaign stopped before this order".into()),
                )
            })
        })
        .collect()
}

/// Reproduces the error-versus-order comparison for `orders` (odd, ≥ 5) and
/// writes `sweep_<kind>.csv` plus per-cell models under `cfg.output_dir`.
///
/// Campaigns run with `stop_tol = 0` so every order is reached. Failed
/// cells are NaN with the reason in the note column.
pub fn sweep(cfg: &CampaignConfig, orders: &[usize], kind: SweepKind) -> Result<Vec<SweepRow>> {
    if orders.is_empty() {
        return Err(Error::Validation("sweep needs at least one order".into()));
    }
    let points = orders
        .iter()
        .map(|&o| points_for_order(o))
        .collect::<Result<Vec<_>>>()?;
    let max_points = *points.iter().max().expect("nonempty");
    let mut base = cfg.clone();
    base.stop_tol = 0.0;
    base.budget = max_points.max(3);
    base.strategy = Strategy::Adaptive;
    base.validate()?;
    let plant = base.load_plant()?;

    let out = &cfg.output_dir;
    let label = |s: &str| out.join(format!("sweep_{}", s));
    let dirs: Vec<PathBuf> = kind.columns().iter().map(|c| label(c)).collect();
    for d in &dirs {
        fs::create_dir_all(d).map_err(|e| Error::from(e).context(d.display().to_string()))?;
    }

    let (first, second): (Vec<Cell>, Vec<Cell>) = match kind {
        SweepKind::Strategy => rayon::join(
            || {
                points
                    .par_iter()
                    .zip(orders.par_iter())
                    .map(|(&n, &order)| {
                        let mut c = base.clone();
                        c.strategy = Strategy::Gridded;
                        c.budget = n;
                        match run_campaign(&c, &plant, |_| {}) {
                            Ok(st) => {
                                let cell = cell_metric(kind, &st.model, &plant, base.band_rad());
                                let path = dirs[0].join(format!("order_{order:03}.baryid"));
                                match files::write_model(&path, &st.model) {
                                    Ok(()) => cell,
                                    Err(e) => Cell::failed(e.to_string()),
                                }
                            }
                            Err(e) => Cell::failed(e.to_string()),
                        }
                    })
                    .collect()
            },
            || adaptive_cells(&base, &plant, orders, kind, Some(&dirs[1])),
        ),
        SweepKind::Optimizer => {
            let with = |optimizer| {
                let mut c = base.clone();
                c.optimizer = optimizer;
                c
            };
            let (stable, explicit) = (with(Optimizer::Stable), with(Optimizer::Explicit));
            rayon::join(
                || adaptive_cells(&stable, &plant, orders, kind, Some(&dirs[0])),
                || adaptive_cells(&explicit, &plant, orders, kind, Some(&dirs[1])),
            )
        }
    };
    let rows: Vec<SweepRow> = orders
        .iter()
        .zip(first.into_iter().zip(second))
        .map(|(&order, (first, second))| SweepRow {
            order,
            first,
            second,
        })
        .collect();
    let header = sweep_header(kind);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let name = match kind {
        SweepKind::Strategy => "sweep_strategy.csv",
        SweepKind::Optimizer => "sweep_optimizer.csv",
    };
    export::write_table(
        &out.join(name),
        "baryid-sweep",
        &header,
        &sweep_records(&rows),
    )?;
    Ok(rows)
}

/// Least-damped pole of `sys`: the one with the largest real part.
pub fn least_damped_pole(sys: &StateSpace) -> Result<Option<Complex64>> {
    Ok(poles(sys)?.into_iter().max_by(|a, b| a.re.total_cmp(&b.re)))
}

/// Result of scanning a recorded run for steady state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionReport {
    pub fs: f64,
    pub chunk_len: usize,
    /// `γ̂` of every block tested, in order.
    pub gamma_hats: Vec<f64>,
    /// First sample of the passing block.
    pub detected_at: Option<usize>,
    pub x1: f64,
    pub x2: f64,
    /// `(x₁ − jx₂)` over the input's own phasor on the same block.
    pub response: Option<Complex64>,
}

/// Tests consecutive blocks of `chunk_cycles` periods of `y` the way a live
/// experiment does, stopping at the first that passes.
pub fn detect_in_signals(
    u: &SampledSignal,
    y: &SampledSignal,
    omega: f64,
    gamma: f64,
    chunk_cycles: usize,
) -> Result<DetectionReport> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Validation(format!(
            "frequency must be positive, got {omega} rad/s"
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::Validation(format!(
            "threshold must be nonnegative, got {gamma}"
        )));
    }
    if u.len() != y.len() || u.dim() != 1 || y.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "u and y must be scalar signals of equal length".into(),
        ));
    }
    let cfg = ExperimentConfig {
        fs: y.fs(),
        chunk_cycles,
        ..ExperimentConfig::default()
    };
    let chunk = cfg.chunk_len(omega).max(4);
    let mut report = DetectionReport {
        fs: y.fs(),
        chunk_len: chunk,
        gamma_hats: Vec::new(),
        detected_at: None,
        x1: f64::NAN,
        x2: f64::NAN,
        response: None,
    };
    let mut start = 0;
    while start + chunk <= y.len() {
        let fit = detect_steady_state(&y.slice(start..start + chunk), omega, start, gamma)?;
        report.gamma_hats.push(fit.gamma_hat);
        // a numerically zero block passes by convention, but never at γ = 0
        if fit.pass && fit.gamma_hat < gamma {
            let input = detect_steady_state(&u.slice(start..start + chunk), omega, start, 1.0)?;
            let phasor = Complex64::new(input.x1, -input.x2);
            report.detected_at = Some(start);
            report.x1 = fit.x1;
            report.x2 = fit.x2;
            report.response = Some(Complex64::new(fit.x1, -fit.x2) / phasor);
            break;
        }
        start += chunk;
    }
    Ok(report)
}

/// [`detect_in_signals`] on a `t,u,y` CSV; `omega` in rad/s.
pub fn detect_in_file(
    path: &Path,
    omega: f64,
    gamma: f64,
    chunk_cycles: usize,
) -> Result<DetectionReport> {
    let (u, y) = export::read_signal_csv(path)?;
    detect_in_signals(&u, &y, omega, gamma, chunk_cycles).context(|| path.display().to_string())
}

#[cfg(test)]
mod tests;
