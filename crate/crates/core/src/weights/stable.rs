use nalgebra::{Cholesky, DMatrix, RowDVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{checked_x2, CovariancePartition};
use crate::barycentric::{BasisPair, WeightRow};
use crate::error::{Error, Result};
use crate::lti::{solve_lyapunov, spectral_abscissa};
use crate::sdp::{lmi_solve, LmiBlock, LmiProblem, SdpIteration, SdpOptions};

/// Strictness margin subtracted from every block, in normalized coordinates.
const STRICT_MARGIN: f64 = 1e-8;

/// `trace(P) < ρ = factor·max(trace P₀, n)` keeps the problem bounded. The
/// optimal set is flat in some directions of `P`, and the central path pushes
/// `P` along them up to the bound, which leaves `γ` and `Ŵ` unaffected.
const TRACE_BOUND_FACTOR: f64 = 1e3;

/// Allowed excess of the closed-loop abscissa over `−α`.
const ABSCISSA_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableOptions {
    pub sdp: SdpOptions,
    pub ridge: bool,
}

impl Default for StableOptions {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            ridge: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StableSolveResult {
    pub w: WeightRow,
    /// Epigraph variable bounding `Q(2P − X̂₂)⁻¹Qᵀ`.
    pub gamma: f64,
    pub p: DMatrix<f64>,
    pub q: RowDVector<f64>,
    pub alpha: f64,
    /// `γ − X̂₀X̂₂⁻¹X̂₀ᵀ + X̂₁`.
    pub cost_bound: f64,
    /// `[1 Ŵ]X[1 Ŵ]ᵀ` at the returned weights.
    pub cost: f64,
    /// Largest real part of the poles of the resulting interpolant.
    pub abscissa: f64,
    pub diagnostics: Vec<SdpIteration>,
}

/// Variable layout: the upper triangle of `P` row by row, then `Q`, then `γ`.
struct Layout {
    n: usize,
}

impl Layout {
    fn p(&self, a: usize, b: usize) -> usize {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        a * self.n - a * (a + 1) / 2 + b
    }

    fn q(&self, a: usize) -> usize {
        self.n * (self.n + 1) / 2 + a
    }

    fn gamma(&self) -> usize {
        self.n * (self.n + 1) / 2 + self.n
    }

    fn len(&self) -> usize {
        self.gamma() + 1
    }

    fn pack(&self, p: &DMatrix<f64>, q: &RowDVector<f64>, gamma: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.len()];
        for a in 0..self.n {
            for b in a..self.n {
                x[self.p(a, b)] = p[(a, b)];
            }
            x[self.q(a)] = q[a];
        }
        x[self.gamma()] = gamma;
        x
    }

    fn unpack(&self, x: &[f64]) -> (DMatrix<f64>, RowDVector<f64>, f64) {
        let p = DMatrix::from_fn(self.n, self.n, |a, b| x[self.p(a, b)]);
        let q = RowDVector::from_fn(self.n, |_, a| x[self.q(a)]);
        (p, q, x[self.gamma()])
    }
}

/// Builds the three-block problem in normalized coordinates:
///
/// ```text
///   min γ  s.t.  P ≻ 0,  [γ Q; Qᵀ 2P − X₂] ≻ 0,
///                −(ỸP + PỸᵀ) + BQ + QᵀBᵀ ≻ 0,  trace P < ρ
/// ```
fn build_problem(x2: &DMatrix<f64>, y: &DMatrix<f64>, b: &DMatrix<f64>, rho: f64) -> LmiProblem {
    let n = x2.nrows();
    let lay = Layout { n };
    let mut objective = vec![0.0; lay.len()];
    objective[lay.gamma()] = 1.0;
    let mut problem = LmiProblem::new(objective);
    let margin = |dim: usize| DMatrix::<f64>::identity(dim, dim) * -STRICT_MARGIN;

    let mut pos = LmiBlock::new(margin(n));
    let mut epi_f0 = margin(n + 1);
    epi_f0
        .view_mut((1, 1), (n, n))
        .zip_apply(x2, |e, v| *e -= v);
    let mut epi = LmiBlock::new(epi_f0);
    let mut atoms = DMatrix::zeros(n, n + 1);
    atoms.view_mut((0, 0), (n, n)).copy_from(y);
    atoms.view_mut((0, n), (n, 1)).copy_from(b);
    let mut decay = LmiBlock::with_atoms(margin(n), atoms);
    let mut trace = LmiBlock::new(DMatrix::from_element(1, 1, rho));

    // atom indices in the decay block: eₐ = a, ỹₐ = n + a, B = 2n
    for a in 0..n {
        for c in a..n {
            let v = lay.p(a, c);
            if a == c {
                pos.add_dyad(v, 0.5, a, a);
                epi.add_dyad(v, 1.0, 1 + a, 1 + a);
                decay.add_dyad(v, -1.0, n + a, a);
                trace.add_dyad(v, -0.5, 0, 0);
            } else {
                pos.add_dyad(v, 1.0, a, c);
                epi.add_dyad(v, 2.0, 1 + a, 1 + c);
                decay.add_dyad(v, -1.0, n + a, c);
                decay.add_dyad(v, -1.0, n + c, a);
            }
        }
        epi.add_dyad(lay.q(a), 1.0, 0, 1 + a);
        decay.add_dyad(lay.q(a), 1.0, 2 * n, a);
    }
    epi.add_dyad(lay.gamma(), 0.5, 0, 0);
    problem.push(pos);
    problem.push(epi);
    problem.push(decay);
    problem.push(trace);
    problem
}

/// A feasible start when `Ỹ` is already Hurwitz: `Q = 0` and a scaled
/// Lyapunov solution `P` (so that `2P ≻ X₂`); otherwise a plain scaled
/// identity for the feasibility phase to repair.
fn initial_point(x2: &DMatrix<f64>, y: &DMatrix<f64>) -> (DMatrix<f64>, RowDVector<f64>, f64) {
    let n = x2.nrows();
    let x2_max = SymmetricEigen::new(x2.clone()).eigenvalues.max();
    let q = RowDVector::zeros(n);
    let hurwitz = spectral_abscissa_of(y).is_some_and(|a| a < 0.0);
    if hurwitz {
        if let Ok(p) = solve_lyapunov(y, &DMatrix::identity(n, n)) {
            let p_min = SymmetricEigen::new(p.clone()).eigenvalues.min();
            if p_min > 0.0 {
                let beta = (x2_max + 1.0) / p_min;
                return (p * beta, q, 1.0);
            }
        }
    }
    (DMatrix::identity(n, n) * (x2_max + 1.0), q, 1.0)
}

fn spectral_abscissa_of(a: &DMatrix<f64>) -> Option<f64> {
    let n = a.nrows();
    let sys = crate::lti::StateSpace::new(
        a.clone(),
        DMatrix::zeros(n, 1),
        DMatrix::zeros(1, n),
        DMatrix::zeros(1, 1),
    )
    .ok()?;
    spectral_abscissa(&sys).ok()
}

/// Minimizes a convex upper bound of the weight cost subject to every pole of
/// `𝓐 − ℬ_M Ŵ` having real part below `−α`.
///
/// With `K₀ = X̂₀X̂₂⁻¹` and `Y = 𝓐 + ℬ_M K₀`, substituting `Ŵ = Z − K₀`
/// turns the cost into `X̂₁ − K₀X̂₂K₀ᵀ + ZX̂₂Zᵀ` and the closed-loop matrix
/// into `Y − ℬ_M Z`. Writing `Z = QP⁻¹` and bounding `ZX̂₂Zᵀ` by
/// `Q(2P − X̂₂)⁻¹Qᵀ` gives the LMI problem above. The problem is solved after
/// a diagonal rescaling that gives `X̂₂` unit diagonal.
pub fn solve_stable(
    cov: &CovariancePartition,
    bases: &BasisPair,
    alpha: f64,
    opts: &StableOptions,
) -> Result<StableSolveResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!(
            "decay margin must be positive, got {alpha}"
        )));
    }
    let n = bases.order();
    if cov.dim() != n + 1 {
        return Err(Error::DimensionMismatch(format!(
            "covariance has size {}, bases need {}",
            cov.dim(),
            n + 1
        )));
    }
    let x2 = checked_x2(cov, opts.ridge)?;
    let chol = Cholesky::new(x2.clone()).ok_or(Error::SingularCovariance {
        min_eig: 0.0,
        threshold: 0.0,
    })?;
    let x0 = cov.x0();
    let k0 = chol.solve(&x0.transpose()).transpose();
    let b_m = DMatrix::from_column_slice(n, 1, bases.b_m().as_slice());
    let y = bases.a_cal() + &b_m * &k0;

    // normalization: s scales the cost, d equilibrates X̂₂
    let x1 = cov.x1();
    let s = if x1 > 0.0 { x1 } else { x2.trace() / n as f64 };
    let d: Vec<f64> = (0..n).map(|i| (s / x2[(i, i)]).sqrt()).collect();
    let x2n = DMatrix::from_fn(n, n, |i, j| d[i] * x2[(i, j)] * d[j] / s);
    let mut yn = DMatrix::from_fn(n, n, |i, j| d[i] * y[(i, j)] / d[j]);
    for i in 0..n {
        yn[(i, i)] += alpha;
    }
    let bn = DMatrix::from_fn(n, 1, |i, _| d[i] * b_m[(i, 0)]);

    let lay = Layout { n };
    let (p0, q0, g0) = initial_point(&x2n, &yn);
    let x_start = lay.pack(&p0, &q0, g0);
    let rho = TRACE_BOUND_FACTOR * p0.trace().max(n as f64);
    let problem = build_problem(&x2n, &yn, &bn, rho);
    let sol = lmi_solve(&problem, Some(&x_start), &opts.sdp).map_err(|e| match e {
        Error::Infeasible(msg) => Error::Infeasible(format!("stability LMI: {msg}")),
        other => other,
    })?;
    let (pn, qn, gn) = lay.unpack(&sol.x);

    // back to original coordinates: P = s D⁻¹P''D⁻¹, Q = s Q''D⁻¹, Z = Q''P''⁻¹D
    let pn_chol = Cholesky::new(pn.clone())
        .ok_or_else(|| Error::NumericalFailure("returned P is not positive definite".into()))?;
    let zn = pn_chol.solve(&qn.transpose()).transpose();
    let z = RowDVector::from_fn(n, |_, j| zn[j] * d[j]);
    let w = WeightRow::new((&z - &k0).iter().copied().collect());
    let p = DMatrix::from_fn(n, n, |i, j| s * pn[(i, j)] / (d[i] * d[j]));
    let q = RowDVector::from_fn(n, |_, j| s * qn[j] / d[j]);
    let gamma = s * gn;

    let closed = bases.a_cal() - &b_m * w.to_row();
    let abscissa = spectral_abscissa_of(&closed)
        .ok_or_else(|| Error::NumericalFailure("closed-loop eigenvalues failed".into()))?;
    if abscissa >= -alpha + ABSCISSA_TOL {
        return Err(Error::NumericalFailure(format!(
            "returned weights violate the decay margin: abscissa {abscissa:.3e}, required < {:.3e}",
            -alpha
        )));
    }
    let cost_bound = gamma - (&k0 * x0.transpose())[(0, 0)] + x1;
    let cost = cov.cost(&w);
    Ok(StableSolveResult {
        w,
        gamma,
        p,
        q,
        alpha,
        cost_bound,
        cost,
        abscissa,
        diagnostics: sol.diagnostics,
    })
}
