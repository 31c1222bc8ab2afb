//! Weight selection: the empirical covariance of the M-weighted residual
//! `x = 𝓝u − 𝓜y`, its unconstrained minimizer, and the stability-constrained
//! relaxation.

mod stable;

pub use stable::{solve_stable, StableOptions, StableSolveResult};

use nalgebra::{Cholesky, DMatrix, RowDVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::barycentric::{BasisPair, WeightRow};
use crate::error::{Error, Result};
use crate::lti::{Discretization, Hold, SampledSignal, StateSpace};
use crate::plant::ExperimentRecord;

/// Samples per outer-product batch when accumulating covariances.
const BATCH: usize = 256;

/// `X = [[X̂₁, X̂₀], [X̂₀ᵀ, X̂₂]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariancePartition {
    x: DMatrix<f64>,
}

impl CovariancePartition {
    /// Wraps a symmetric matrix of size at least 2, symmetrizing rounding noise.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        if !x.is_square() || x.nrows() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "covariance must be square with size >= 2, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariance"));
        }
        let x = (&x + x.transpose()) * 0.5;
        Ok(Self { x })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn x1(&self) -> f64 {
        self.x[(0, 0)]
    }

    pub fn x0(&self) -> RowDVector<f64> {
        RowDVector::from_iterator(self.dim() - 1, self.x.row(0).iter().skip(1).copied())
    }

    pub fn x2(&self) -> DMatrix<f64> {
        let m = self.dim() - 1;
        self.x.view((1, 1), (m, m)).clone_owned()
    }

    /// `[1 Ŵ] X [1 Ŵ]ᵀ`.
    pub fn cost(&self, w: &WeightRow) -> f64 {
        let mut v = Vec::with_capacity(self.dim());
        v.push(1.0);
        v.extend_from_slice(w.as_slice());
        let v = nalgebra::DVector::from_vec(v);
        v.dot(&(&self.x * &v))
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self { x: &self.x * k }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::DimensionMismatch("covariance sizes differ".into()));
        }
        Ok(Self {
            x: &self.x + &other.x,
        })
    }
}

/// The two-input system `[u, y] ↦ x = 𝓝u − 𝓜y`.
fn residual_system(bases: &BasisPair) -> Result<StateSpace> {
    let n = bases.order();
    let mut b = DMatrix::zeros(n, 2);
    b.set_column(0, bases.b_n());
    b.set_column(1, &(-bases.b_m()));
    let mut d = DMatrix::zeros(n + 1, 2);
    d[(0, 0)] = bases.n_sys().d()[(0, 0)];
    d[(0, 1)] = -1.0;
    StateSpace::new(bases.a_cal().clone(), b, bases.m_sys().c().clone(), d)
}

fn check_pair(u: &SampledSignal, y: &SampledSignal) -> Result<()> {
    if u.dim() != 1 || y.dim() != 1 || u.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "need scalar u and y of equal length, got {}x{} and {}x{}",
            u.len(),
            u.dim(),
            y.len(),
            y.dim()
        )));
    }
    if u.fs() != y.fs() {
        return Err(Error::DimensionMismatch(
            "u and y sample rates differ".into(),
        ));
    }
    if u.is_empty() {
        return Err(Error::Validation(
            "residual needs a non-empty segment".into(),
        ));
    }
    Ok(())
}

/// Streams the residual of `(u, y)` through `visit(k, x_k)`.
fn for_each_residual(
    disc: &Discretization,
    u: &SampledSignal,
    y: &SampledSignal,
    mut visit: impl FnMut(usize, &[f64]),
) {
    let mut sim = disc.simulator();
    let mut out = vec![0.0; disc.n_outputs()];
    for (k, (&uk, &yk)) in u.as_slice().iter().zip(y.as_slice()).enumerate() {
        sim.step(&[uk, yk], &mut out);
        visit(k, &out);
    }
}

/// `x = 𝓝u − 𝓜y` for an arbitrary `(u, y)` pair from zero initial state,
/// with the samples reconstructed by `hold`.
pub fn drive_bases_signals(
    bases: &BasisPair,
    u: &SampledSignal,
    y: &SampledSignal,
    hold: Hold,
) -> Result<SampledSignal> {
    check_pair(u, y)?;
    let disc = hold.discretize(&residual_system(bases)?, u.fs())?;
    let dim = disc.n_outputs();
    let mut data = Vec::with_capacity(dim * u.len());
    for_each_residual(&disc, u, y, |_, x| data.extend_from_slice(x));
    SampledSignal::multi(u.fs(), dim, data)
}

/// `x = 𝓝u − 𝓜y` over the transient segment of a record.
pub fn drive_bases(
    bases: &BasisPair,
    record: &ExperimentRecord,
    hold: Hold,
) -> Result<SampledSignal> {
    drive_bases_signals(bases, &record.u_transient, &record.y_transient, hold)
}

/// `(1/n) Σ xᵢxᵢᵀ` of the residual of `(u, y)`, accumulated without storing `x`.
pub fn residual_covariance(
    bases: &BasisPair,
    u: &SampledSignal,
    y: &SampledSignal,
    hold: Hold,
) -> Result<DMatrix<f64>> {
    check_pair(u, y)?;
    let disc = hold.discretize(&residual_system(bases)?, u.fs())?;
    let dim = disc.n_outputs();
    let mut acc = DMatrix::zeros(dim, dim);
    let mut batch = DMatrix::zeros(BATCH, dim);
    let mut filled = 0;
    for_each_residual(&disc, u, y, |_, x| {
        for (c, &v) in x.iter().enumerate() {
            batch[(filled, c)] = v;
        }
        filled += 1;
        if filled == BATCH {
            acc.gemm_tr(1.0, &batch, &batch, 1.0);
            filled = 0;
        }
    });
    if filled > 0 {
        let rest = batch.rows(0, filled);
        acc.gemm_tr(1.0, &rest, &rest, 1.0);
    }
    Ok(acc / u.len() as f64)
}

/// Which part of each record enters the objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSelection {
    /// Only the samples before the steady-state block.
    #[default]
    Transient,
    /// Transient followed by the steady block, as one run.
    TransientAndSteady,
}

/// `X = Σₖ Xₖ` over records, skipping records with nothing to contribute.
pub fn records_covariance(
    bases: &BasisPair,
    records: &[&ExperimentRecord],
    selection: DataSelection,
    hold: Hold,
) -> Result<CovariancePartition> {
    let dim = bases.order() + 1;
    let mut x = DMatrix::zeros(dim, dim);
    for rec in records {
        match selection {
            DataSelection::Transient if !rec.u_transient.is_empty() => {
                x += residual_covariance(bases, &rec.u_transient, &rec.y_transient, hold)?;
            }
            DataSelection::Transient => {}
            DataSelection::TransientAndSteady => {
                let u = rec.u_transient.concat(&rec.u_steady)?;
                let y = rec.y_transient.concat(&rec.y_steady)?;
                x += residual_covariance(bases, &u, &y, hold)?;
            }
        }
    }
    CovariancePartition::new(x)
}

/// `X = Σₖ (1/nₖ) Σᵢ x⁽ᵏ⁾ᵢ x⁽ᵏ⁾ᵢᵀ` over already-simulated residual signals.
pub fn covariance(signals: &[SampledSignal]) -> Result<CovariancePartition> {
    let dim = signals
        .first()
        .map(SampledSignal::dim)
        .ok_or_else(|| Error::Validation("covariance needs at least one signal".into()))?;
    let mut x = DMatrix::zeros(dim, dim);
    for s in signals {
        if s.dim() != dim {
            return Err(Error::DimensionMismatch(
                "signals differ in channel count".into(),
            ));
        }
        if s.is_empty() {
            return Err(Error::Validation("covariance signal is empty".into()));
        }
        let m = s.to_matrix();
        x.gemm(1.0 / s.len() as f64, &m, &m.transpose(), 1.0);
    }
    CovariancePartition::new(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ExplicitOptions {
    /// On a failed definiteness check, retry with `X̂₂ + εI`,
    /// `ε = 1e−10·trace(X̂₂)/dim`.
    pub ridge: bool,
}

/// Relative definiteness floor for `X̂₂`.
const PD_RTOL: f64 = 1e-10;

/// Returns `X̂₂` (ridged if allowed) after checking `λmin > 1e−10·trace/dim`.
pub(crate) fn checked_x2(cov: &CovariancePartition, ridge: bool) -> Result<DMatrix<f64>> {
    let mut x2 = cov.x2();
    let m = x2.nrows();
    let threshold = PD_RTOL * x2.trace() / m as f64;
    let min_eig = SymmetricEigen::new(x2.clone()).eigenvalues.min();
    if min_eig > threshold && threshold > 0.0 {
        return Ok(x2);
    }
    if ridge && threshold > 0.0 {
        for i in 0..m {
            x2[(i, i)] += threshold;
        }
        let ridged = SymmetricEigen::new(x2.clone()).eigenvalues.min();
        if ridged > 0.0 {
            return Ok(x2);
        }
    }
    Err(Error::SingularCovariance { min_eig, threshold })
}

/// The unconstrained minimizer `Ŵ = −X̂₀X̂₂⁻¹` of `[1 Ŵ]X[1 Ŵ]ᵀ`.
pub fn solve_explicit(cov: &CovariancePartition, opts: &ExplicitOptions) -> Result<WeightRow> {
    let x2 = checked_x2(cov, opts.ridge)?;
    let chol = Cholesky::new(x2).ok_or(Error::SingularCovariance {
        min_eig: 0.0,
        threshold: 0.0,
    })?;
    let w = chol.solve(&(-cov.x0().transpose()));
    Ok(WeightRow::new(w.as_slice().to_vec()))
}
