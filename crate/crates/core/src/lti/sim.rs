//! Exact discretization and time-domain simulation.
//!
//! The discrete maps keep only their nonzero entries when that pays off, so
//! modal-form plants and the block-diagonal basis systems simulate in time
//! proportional to their nonzero count rather than `n²`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{SampledSignal, StateSpace};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum LinearMap {
    Dense {
        rows: usize,
        cols: usize,
        // row-major
        data: Vec<f64>,
    },
    Sparse {
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        vals: Vec<f64>,
    },
}

impl LinearMap {
    fn from_matrix(m: &DMatrix<f64>) -> Self {
        let (rows, cols) = m.shape();
        let nnz = m.iter().filter(|v| **v != 0.0).count();
        if 3 * nnz < rows * cols {
            let mut row_ptr = Vec::with_capacity(rows + 1);
            let mut col_idx = Vec::with_capacity(nnz);
            let mut vals = Vec::with_capacity(nnz);
            row_ptr.push(0);
            for i in 0..rows {
                for j in 0..cols {
                    let v = m[(i, j)];
                    if v != 0.0 {
                        col_idx.push(j);
                        vals.push(v);
                    }
                }
                row_ptr.push(vals.len());
            }
            LinearMap::Sparse {
                rows,
                cols,
                row_ptr,
                col_idx,
                vals,
            }
        } else {
            let mut data = Vec::with_capacity(rows * cols);
            for i in 0..rows {
                for j in 0..cols {
                    data.push(m[(i, j)]);
                }
            }
            LinearMap::Dense { rows, cols, data }
        }
    }

    /// `out = M x` (overwrites).
    #[inline]
    fn apply(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LinearMap::Dense { rows, cols, data } => {
                for i in 0..*rows {
                    let row = &data[i * cols..(i + 1) * cols];
                    out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
                }
            }
            LinearMap::Sparse {
                rows,
                row_ptr,
                col_idx,
                vals,
                ..
            } => {
                for i in 0..*rows {
                    let mut acc = 0.0;
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        acc += vals[k] * x[col_idx[k]];
                    }
                    out[i] = acc;
                }
            }
        }
    }

    /// `out += M x`.
    #[inline]
    fn apply_add(&self, x: &[f64], out: &mut [f64]) {
        match self {
            LinearMap::Dense { rows, cols, data } => {
                for i in 0..*rows {
                    let row = &data[i * cols..(i + 1) * cols];
                    out[i] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                }
            }
            LinearMap::Sparse {
                rows,
                row_ptr,
                col_idx,
                vals,
                ..
            } => {
                for i in 0..*rows {
                    let mut acc = 0.0;
                    for k in row_ptr[i]..row_ptr[i + 1] {
                        acc += vals[k] * x[col_idx[k]];
                    }
                    out[i] += acc;
                }
            }
        }
    }

    fn cols(&self) -> usize {
        match self {
            LinearMap::Dense { cols, .. } | LinearMap::Sparse { cols, .. } => *cols,
        }
    }
}

/// Discrete-time recursion `x⁺ = Ad x + Bd v`, `y = C x + Dd v`.
#[derive(Debug, Clone)]
pub struct Discretization {
    ad: LinearMap,
    bd: LinearMap,
    c: LinearMap,
    d: LinearMap,
    n: usize,
    p: usize,
    q: usize,
    fs: f64,
    // maps v₀ to the initial state; nonzero only for a first-order hold
    lead: Option<LinearMap>,
}

impl Discretization {
    fn from_parts(
        ad: &DMatrix<f64>,
        bd: &DMatrix<f64>,
        c: &DMatrix<f64>,
        d: &DMatrix<f64>,
        fs: f64,
    ) -> Self {
        Self {
            ad: LinearMap::from_matrix(ad),
            bd: LinearMap::from_matrix(bd),
            c: LinearMap::from_matrix(c),
            d: LinearMap::from_matrix(d),
            n: ad.nrows(),
            p: bd.ncols(),
            q: c.nrows(),
            fs,
            lead: None,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.p
    }

    pub fn n_outputs(&self) -> usize {
        self.q
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn simulator(&self) -> Simulator<'_> {
        Simulator {
            disc: self,
            state: vec![0.0; self.n],
            next: vec![0.0; self.n],
            started: false,
        }
    }
}

fn check_rate(fs: f64) -> Result<()> {
    if fs > 0.0 && fs.is_finite() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "sample rate must be positive, got {fs}"
        )))
    }
}

/// Exact zero-order-hold discretization at sample rate `fs`, computed from the
/// exponential of the augmented matrix `[A B; 0 0]·T`.
pub fn zoh(sys: &StateSpace, fs: f64) -> Result<Discretization> {
    check_rate(fs)?;
    let (n, p) = (sys.n_states(), sys.n_inputs());
    if n == 0 {
        return Ok(Discretization::from_parts(
            &DMatrix::zeros(0, 0),
            &DMatrix::zeros(0, p),
            sys.c(),
            sys.d(),
            fs,
        ));
    }
    let t = 1.0 / fs;
    let mut aug = DMatrix::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * t));
    aug.view_mut((0, n), (n, p)).copy_from(&(sys.b() * t));
    let phi = aug.exp();
    let ad = phi.view((0, 0), (n, n)).clone_owned();
    let bd = phi.view((0, n), (n, p)).clone_owned();
    Ok(Discretization::from_parts(&ad, &bd, sys.c(), sys.d(), fs))
}

/// Exact first-order-hold discretization: the input is interpolated linearly
/// between samples, so piecewise-linear inputs are reproduced exactly.
///
/// With `Φ = exp([A B 0; 0 0 I; 0 0 0]·T)` and blocks `Ad, Γ₁, Γ₂`, the hold
/// gives `x⁺ = Ad x + (Γ₁ − Γ₂) v + Γ₂ v⁺`. The lookahead is removed by
/// `ξ = x − Γ₂ v`, which obeys `ξ⁺ = Ad ξ + (Ad Γ₂ + Γ₁ − Γ₂) v`,
/// `y = C ξ + (D + C Γ₂) v`, and starts from `ξ₀ = −Γ₂ v₀` for `x₀ = 0`.
pub fn foh(sys: &StateSpace, fs: f64) -> Result<Discretization> {
    check_rate(fs)?;
    let (n, p) = (sys.n_states(), sys.n_inputs());
    if n == 0 {
        return zoh(sys, fs);
    }
    let t = 1.0 / fs;
    let mut aug = DMatrix::zeros(n + 2 * p, n + 2 * p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * t));
    aug.view_mut((0, n), (n, p)).copy_from(&(sys.b() * t));
    aug.view_mut((n, n + p), (p, p)).fill_with_identity();
    let phi = aug.exp();
    let ad = phi.view((0, 0), (n, n)).clone_owned();
    let g1 = phi.view((0, n), (n, p)).clone_owned();
    let g2 = phi.view((0, n + p), (n, p)).clone_owned();
    let bd = &ad * &g2 + &g1 - &g2;
    let d = sys.d() + sys.c() * &g2;
    let mut disc = Discretization::from_parts(&ad, &bd, sys.c(), &d, fs);
    disc.lead = Some(LinearMap::from_matrix(&(-g2)));
    Ok(disc)
}

/// How a sampled input is reconstructed between samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Held constant over each sample interval.
    Zero,
    /// Linearly interpolated between consecutive samples.
    #[default]
    FirstOrder,
}

impl Hold {
    pub fn discretize(self, sys: &StateSpace, fs: f64) -> Result<Discretization> {
        match self {
            Hold::Zero => zoh(sys, fs),
            Hold::FirstOrder => foh(sys, fs),
        }
    }
}

/// Exact sampling of a SISO system driven by the continuous input `cos(ωt)`.
///
/// The plant is augmented with the sinusoid generator `v̇ = [0 ω; −ω 0] v`,
/// `v(0) = (1, 0)`, so `v(t) = (cos ωt, −sin ωt)` and `u = v₁`. The returned
/// recursion takes `v_k` as its two-channel input; no hold approximation is
/// involved.
pub fn sinusoid_discretization(sys: &StateSpace, omega: f64, fs: f64) -> Result<Discretization> {
    check_rate(fs)?;
    if !sys.is_siso() {
        return Err(Error::DimensionMismatch(
            "sinusoidal drive needs a SISO system".into(),
        ));
    }
    let n = sys.n_states();
    let mut d = DMatrix::zeros(1, 2);
    d[(0, 0)] = sys.d()[(0, 0)];
    if n == 0 {
        return Ok(Discretization::from_parts(
            &DMatrix::zeros(0, 0),
            &DMatrix::zeros(0, 2),
            sys.c(),
            &d,
            fs,
        ));
    }
    let t = 1.0 / fs;
    let mut aug = DMatrix::zeros(n + 2, n + 2);
    aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * t));
    aug.view_mut((0, n), (n, 1)).copy_from(&(sys.b() * t));
    aug[(n, n + 1)] = omega * t;
    aug[(n + 1, n)] = -omega * t;
    let phi = aug.exp();
    let ad = phi.view((0, 0), (n, n)).clone_owned();
    let gamma = phi.view((0, n), (n, 2)).clone_owned();
    Ok(Discretization::from_parts(&ad, &gamma, sys.c(), &d, fs))
}

/// Stateful stepping of a [`Discretization`] from zero initial state.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    disc: &'a Discretization,
    state: Vec<f64>,
    next: Vec<f64>,
    started: bool,
}

impl Simulator<'_> {
    /// Emits `y_k` for input `v_k`, then advances the state.
    #[inline]
    pub fn step(&mut self, v: &[f64], y: &mut [f64]) {
        let disc = self.disc;
        if !self.started {
            self.started = true;
            if let Some(lead) = &disc.lead {
                lead.apply(v, &mut self.state);
            }
        }
        disc.c.apply(&self.state, y);
        disc.d.apply_add(v, y);
        if disc.n > 0 {
            disc.ad.apply(&self.state, &mut self.next);
            disc.bd.apply_add(v, &mut self.next);
            std::mem::swap(&mut self.state, &mut self.next);
        }
    }

    /// Internal recursion state; for a first-order hold this is offset from
    /// the continuous state by `Γ₂ v` of the last input.
    pub fn state(&self) -> &[f64] {
        &self.state
    }

    /// Runs a block of samples (sample-major input), appending outputs to `out`.
    pub fn run_into(&mut self, input: &[f64], out: &mut Vec<f64>) {
        let (p, q) = (self.disc.p, self.disc.q);
        debug_assert_eq!(self.disc.d.cols(), p);
        let start = out.len();
        let len = if p == 0 { 0 } else { input.len() / p };
        out.resize(start + len * q, 0.0);
        for k in 0..len {
            let (v, y) = (
                &input[k * p..(k + 1) * p],
                &mut out[start + k * q..start + (k + 1) * q],
            );
            self.step(v, y);
        }
    }
}

/// Simulates `sys` from zero initial state with the samples of `u` held
/// constant over each sample interval. Outputs are taken at the input instants,
/// so `y₀ = D·u₀`.
pub fn simulate_zoh(sys: &StateSpace, u: &SampledSignal) -> Result<SampledSignal> {
    if u.dim() != sys.n_inputs() {
        return Err(Error::DimensionMismatch(format!(
            "input has {} channels, system has {} inputs",
            u.dim(),
            sys.n_inputs()
        )));
    }
    let disc = zoh(sys, u.fs())?;
    let mut out = Vec::with_capacity(u.len() * sys.n_outputs());
    disc.simulator().run_into(u.as_slice(), &mut out);
    SampledSignal::multi(u.fs(), sys.n_outputs(), out)
}
