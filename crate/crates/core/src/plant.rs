//! Virtual test bench: synthetic lightly damped plants, sinusoidal
//! interrogation with online steady-state detection, and frequency-response
//! estimation from the steady block.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use crate::barycentric::FrequencySample;
use crate::error::{Error, Result};
use crate::lti::{sinusoid_discretization, zoh, SampledSignal, StateSpace};

/// Probability that a mode's residue takes the majority (positive) sign.
const RESIDUE_SIGN_BIAS: f64 = 0.8;

/// Parameters of a synthetic modal plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub seed: u64,
    pub n_modes: usize,
    /// Natural-frequency band in Hz.
    pub band: [f64; 2],
    pub damping_range: [f64; 2],
    pub gain_scale: f64,
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        let [z_lo, z_hi] = self.damping_range;
        let [f_lo, f_hi] = self.band;
        if self.n_modes == 0 {
            return Err(Error::Validation("plant needs at least one mode".into()));
        }
        if !(0.0 < z_lo && z_lo <= z_hi && z_hi < 1.0) {
            return Err(Error::Validation(format!(
                "damping range must satisfy 0 < lo <= hi < 1, got [{z_lo}, {z_hi}]"
            )));
        }
        if !(0.0 < f_lo && f_lo < f_hi && f_hi.is_finite()) {
            return Err(Error::Validation(format!(
                "band must satisfy 0 < lo < hi, got [{f_lo}, {f_hi}]"
            )));
        }
        if !(self.gain_scale.is_finite() && self.gain_scale > 0.0) {
            return Err(Error::Validation("gain scale must be positive".into()));
        }
        Ok(())
    }
}

/// One second-order section `r·ω_d / ((s + ζω_n)² + ω_d²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    /// rad/s
    pub omega_n: f64,
    pub zeta: f64,
    pub residue: f64,
}

/// Draws the modal parameters of a plant, sorted by natural frequency.
///
/// Residue magnitudes scale with `ω_n` so that every resonance peak has a
/// comparable height; most residues share a sign, which interleaves the
/// poles and zeros the way a collocated structure does.
pub fn synth_modes(spec: &PlantSpec) -> Result<Vec<Mode>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (ln_lo, ln_hi) = (
        (2.0 * PI * spec.band[0]).ln(),
        (2.0 * PI * spec.band[1]).ln(),
    );
    let mut modes: Vec<Mode> = (0..spec.n_modes)
        .map(|_| {
            let omega_n = rng.gen_range(ln_lo..=ln_hi).exp();
            let zeta = if spec.damping_range[0] == spec.damping_range[1] {
                spec.damping_range[0]
            } else {
                rng.gen_range(spec.damping_range[0]..spec.damping_range[1])
            };
            let magnitude = rng.gen_range(0.5f64.ln()..2.0f64.ln()).exp();
            let sign = if rng.gen_bool(RESIDUE_SIGN_BIAS) {
                1.0
            } else {
                -1.0
            };
            Mode {
                omega_n,
                zeta,
                residue: sign * spec.gain_scale * magnitude * omega_n,
            }
        })
        .collect();
    modes.sort_by(|a, b| a.omega_n.total_cmp(&b.omega_n));
    Ok(modes)
}

/// Block-diagonal modal realization of `modes` with `D = 0`.
pub fn modal_system(modes: &[Mode]) -> Result<StateSpace> {
    let n = 2 * modes.len();
    let mut a = DMatrix::zeros(n, n);
    let mut b = vec![0.0; n];
    let mut c = vec![0.0; n];
    for (k, m) in modes.iter().enumerate() {
        let i = 2 * k;
        let sigma = m.zeta * m.omega_n;
        let omega_d = m.omega_n * (1.0 - m.zeta * m.zeta).sqrt();
        a[(i, i)] = -sigma;
        a[(i + 1, i + 1)] = -sigma;
        a[(i, i + 1)] = omega_d;
        a[(i + 1, i)] = -omega_d;
        let root = m.residue.abs().sqrt();
        b[i + 1] = root;
        c[i] = root * m.residue.signum();
    }
    StateSpace::siso(a, b, c, 0.0)
}

/// Deterministic synthetic plant for `spec`.
pub fn synth_plant(spec: &PlantSpec) -> Result<StateSpace> {
    modal_system(&synth_modes(spec)?)
}

/// Settings of one sinusoidal interrogation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub amplitude: f64,
    /// Hz
    pub fs: f64,
    /// Full periods per steady-state test block.
    pub chunk_cycles: usize,
    /// Residual ratio below which a block counts as steady.
    pub gamma: f64,
    /// Simulated seconds before giving up.
    pub max_duration: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            fs: 1000.0,
            chunk_cycles: 4,
            gamma: 1e-3,
            max_duration: 3600.0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(Error::Validation("amplitude must be positive".into()));
        }
        if !(self.fs.is_finite() && self.fs > 0.0) {
            return Err(Error::Validation("sample rate must be positive".into()));
        }
        if self.chunk_cycles < 2 {
            return Err(Error::Validation("chunk_cycles must be at least 2".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Validation(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if !(self.max_duration > 0.0) {
            return Err(Error::Validation("max_duration must be positive".into()));
        }
        Ok(())
    }

    /// Samples per steady-state test block at `omega` (rad/s).
    pub fn chunk_len(&self, omega: f64) -> usize {
        (self.chunk_cycles as f64 * 2.0 * PI * self.fs / omega).round() as usize
    }

    /// Checks that `omega` gets at least ten samples per cycle.
    pub fn check_frequency(&self, omega: f64) -> Result<()> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Validation(format!(
                "test frequency must be positive, got {omega}"
            )));
        }
        if self.fs < 10.0 * omega / (2.0 * PI) {
            return Err(Error::Validation(format!(
                "sample rate {} Hz gives fewer than 10 samples per cycle at {} Hz",
                self.fs,
                omega / (2.0 * PI)
            )));
        }
        Ok(())
    }
}

/// A completed interrogation run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    /// rad/s; 0 for the step run that measures the DC gain.
    pub omega: f64,
    pub config: ExperimentConfig,
    pub u_transient: SampledSignal,
    pub y_transient: SampledSignal,
    /// The block that passed the steady-state test.
    pub u_steady: SampledSignal,
    pub y_steady: SampledSignal,
    pub x1: f64,
    pub x2: f64,
    pub gamma_hat: f64,
    pub response: FrequencySample,
    pub detected_at: usize,
}

/// Least-squares sinusoid fit of one block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateFit {
    pub x1: f64,
    pub x2: f64,
    pub gamma_hat: f64,
    pub pass: bool,
    /// The block was identically (numerically) zero; `γ̂` is reported as 0.
    pub degenerate: bool,
}

/// Fits `x₁ cos(ωi/fs) + x₂ sin(ωi/fs)` to the block starting at sample
/// `offset` and tests the peak residual against `gamma·max|y|`.
///
/// With `omega = 0` the regressors collapse to a constant and only `x₁` is fitted.
pub fn detect_steady_state(
    chunk: &SampledSignal,
    omega: f64,
    offset: usize,
    gamma: f64,
) -> Result<SteadyStateFit> {
    if chunk.dim() != 1 {
        return Err(Error::DimensionMismatch(
            "steady-state test needs a scalar signal".into(),
        ));
    }
    if chunk.len() < 4 {
        return Err(Error::Validation(
            "steady-state block needs at least 4 samples".into(),
        ));
    }
    if omega > 0.0 && omega * chunk.len() as f64 / chunk.fs() < 4.0 * PI * (1.0 - 1e-9) {
        return Err(Error::Validation(
            "steady-state block must span at least two cycles".into(),
        ));
    }
    Ok(fit_block(
        chunk.as_slice(),
        omega / chunk.fs(),
        offset,
        gamma,
    ))
}

/// `theta` is the phase advance per sample, `ω/fs`.
fn fit_block(y: &[f64], theta: f64, offset: usize, gamma: f64) -> SteadyStateFit {
    let y_max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if y_max < 1e-300 {
        return SteadyStateFit {
            x1: 0.0,
            x2: 0.0,
            gamma_hat: 0.0,
            pass: true,
            degenerate: true,
        };
    }
    let (x1, x2) = if theta == 0.0 {
        (y.iter().sum::<f64>() / y.len() as f64, 0.0)
    } else {
        let (mut cc, mut cs, mut ss, mut cy, mut sy) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, &v) in y.iter().enumerate() {
            let (s, c) = (theta * (offset + k) as f64).sin_cos();
            cc += c * c;
            cs += c * s;
            ss += s * s;
            cy += c * v;
            sy += s * v;
        }
        let det = cc * ss - cs * cs;
        ((ss * cy - cs * sy) / det, (cc * sy - cs * cy) / det)
    };
    let mut r_max = 0.0f64;
    for (k, &v) in y.iter().enumerate() {
        let (s, c) = (theta * (offset + k) as f64).sin_cos();
        r_max = r_max.max((x1 * c + x2 * s - v).abs());
    }
    let gamma_hat = r_max / y_max;
    SteadyStateFit {
        x1,
        x2,
        gamma_hat,
        pass: gamma_hat < gamma,
        degenerate: false,
    }
}

/// Drives `plant` with `A·cos(ωt)` from rest until a block of `chunk_cycles`
/// periods fits a sinusoid to within `gamma`, then reads off `G(jω)`.
///
/// The plant is sampled exactly under the continuous sinusoid rather than
/// under a held input, so the estimate carries no hold phase lag.
pub fn run_experiment(
    plant: &StateSpace,
    omega: f64,
    config: &ExperimentConfig,
) -> Result<ExperimentRecord> {
    config.validate()?;
    config.check_frequency(omega)?;
    if !plant.is_siso() {
        return Err(Error::DimensionMismatch(
            "experiments need a SISO plant".into(),
        ));
    }
    let disc = sinusoid_discretization(plant, omega, config.fs)?;
    let mut sim = disc.simulator();
    let chunk = config.chunk_len(omega).max(4);
    let theta = omega / config.fs;
    let amp = config.amplitude;
    let mut v = Vec::with_capacity(2 * chunk);
    let input = move |k: usize| amp * (theta * k as f64).cos();
    drive_until_steady(config, omega, chunk, theta, input, |start, y| {
        v.clear();
        for k in start..start + chunk {
            let (s, c) = (theta * k as f64).sin_cos();
            v.push(amp * c);
            v.push(-amp * s);
        }
        sim.run_into(&v, y);
    })
}

/// Step run for the DC gain `K` and feedthrough `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct DcEstimate {
    pub k: f64,
    pub d: f64,
    pub record: ExperimentRecord,
}

/// Holds a step of height `A` until a block of the length used at
/// `reference_omega` is constant to within `gamma`; `K` is the fitted level
/// over `A` and `D = y₀/u₀`.
pub fn estimate_dc_and_feedthrough(
    plant: &StateSpace,
    config: &ExperimentConfig,
    reference_omega: f64,
) -> Result<DcEstimate> {
    config.validate()?;
    if !(reference_omega > 0.0 && reference_omega.is_finite()) {
        return Err(Error::Validation(
            "reference frequency must be positive".into(),
        ));
    }
    if !plant.is_siso() {
        return Err(Error::DimensionMismatch(
            "experiments need a SISO plant".into(),
        ));
    }
    let disc = zoh(plant, config.fs)?;
    let mut sim = disc.simulator();
    let chunk = config.chunk_len(reference_omega).max(4);
    let amp = config.amplitude;
    let u = vec![amp; chunk];
    let mut record =
        drive_until_steady(config, 0.0, chunk, 0.0, |_| amp, |_, y| sim.run_into(&u, y))?;
    let y0 = if record.y_transient.is_empty() {
        record.y_steady.as_slice()[0]
    } else {
        record.y_transient.as_slice()[0]
    };
    let d = y0 / amp;
    let k = record.x1 / amp;
    record.response = FrequencySample::new(0.0, Complex64::new(k, 0.0));
    Ok(DcEstimate { k, d, record })
}

/// Shared chunked loop: `advance(start, out)` appends `chunk` outputs
/// beginning at sample `start`; `input(k)` reproduces the scalar input.
fn drive_until_steady(
    config: &ExperimentConfig,
    omega: f64,
    chunk: usize,
    theta: f64,
    input: impl Fn(usize) -> f64,
    mut advance: impl FnMut(usize, &mut Vec<f64>),
) -> Result<ExperimentRecord> {
    let max_samples = (config.max_duration * config.fs).ceil() as usize;
    let mut y = Vec::new();
    let mut start = 0;
    let mut last_gamma_hat = f64::INFINITY;
    while start + chunk <= max_samples.max(chunk) {
        advance(start, &mut y);
        let fit = fit_block(&y[start..start + chunk], theta, start, config.gamma);
        last_gamma_hat = fit.gamma_hat;
        if fit.pass {
            let fs = config.fs;
            let u: Vec<f64> = (0..start + chunk).map(&input).collect();
            let y_steady = y.split_off(start);
            let u_steady = u[start..].to_vec();
            let mut u = u;
            u.truncate(start);
            let value = Complex64::new(fit.x1, -fit.x2) / config.amplitude;
            return Ok(ExperimentRecord {
                omega,
                config: config.clone(),
                u_transient: SampledSignal::new(fs, u)?,
                y_transient: SampledSignal::new(fs, y)?,
                u_steady: SampledSignal::new(fs, u_steady)?,
                y_steady: SampledSignal::new(fs, y_steady)?,
                x1: fit.x1,
                x2: fit.x2,
                gamma_hat: fit.gamma_hat,
                response: FrequencySample::new(omega, value),
                detected_at: start,
            });
        }
        start += chunk;
    }
    Err(Error::SteadyStateTimeout {
        omega,
        max_duration: config.max_duration,
        last_gamma_hat,
    })
}
