//! Small dense semidefinite programs by primal-dual path following.
//!
//! Problems have the form
//!
//! ```text
//!     minimize   cᵀx
//!     subject to F_b(x) = F_b0 + Σᵢ xᵢ F_bi ≻ 0   for every block b
//! ```
//!
//! The iterates follow the central path of the log-barrier problem
//! `min t·cᵀx − Σ log det F_b(x)`, carrying a dual matrix `Z_b ≈ F_b(x)⁻¹/t`
//! per block, with HKM search directions and a Mehrotra corrector. The primal
//! iterate stays strictly feasible throughout.
//!
//! Each coefficient matrix is stored as a short list of symmetric dyads
//! `coef·(a_p a_qᵀ + a_q a_pᵀ)` over a per-block set of atom vectors. The
//! first `dim` atoms of every block are the unit vectors, so entry-wise
//! matrices are cheap to express, and structured constraints such as
//! `Y P + P Yᵀ` stay sparse in the variable index. With `W_S = Vᵀ S⁻¹ V` and
//! `W_Z = Vᵀ Z V` (atoms as the columns of `V`) every quantity the method
//! needs reduces to lookups:
//!
//! ```text
//!     tr(F_i S⁻¹)       = Σ 2c (W_S)_qp
//!     tr(F_i S⁻¹ F_j Z) = Σ cc' ((W_S)_qr (W_Z)_sp + (W_S)_qs (W_Z)_rp
//!                              + (W_S)_pr (W_Z)_sq + (W_S)_ps (W_Z)_rq)
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    var: usize,
    coef: f64,
    p: usize,
    q: usize,
}

/// One affine matrix inequality `F0 + Σ xᵢ Fᵢ ≻ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiBlock {
    f0: DMatrix<f64>,
    /// `dim × n_atoms`; the leading `dim` columns are the identity.
    atoms: DMatrix<f64>,
    terms: Vec<Term>,
}

impl LmiBlock {
    /// Block with constant part `f0` and only unit-vector atoms.
    pub fn new(f0: DMatrix<f64>) -> Self {
        let dim = f0.nrows();
        Self::with_atoms(f0, DMatrix::zeros(dim, 0))
    }

    /// Block with constant part `f0` and extra atoms appended (as columns)
    /// after the unit vectors; extra atom `j` has index `dim + j`.
    pub fn with_atoms(f0: DMatrix<f64>, extra: DMatrix<f64>) -> Self {
        let dim = f0.nrows();
        assert_eq!(f0.ncols(), dim, "constant term must be square");
        assert_eq!(extra.nrows(), dim, "atoms must have the block dimension");
        let mut atoms = DMatrix::zeros(dim, dim + extra.ncols());
        atoms.view_mut((0, 0), (dim, dim)).fill_with_identity();
        atoms
            .view_mut((0, dim), (dim, extra.ncols()))
            .copy_from(&extra);
        let f0 = (&f0 + f0.transpose()) * 0.5;
        Self {
            f0,
            atoms,
            terms: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.f0.nrows()
    }

    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    /// Adds `x_var · coef · (a_p a_qᵀ + a_q a_pᵀ)`.
    pub fn add_dyad(&mut self, var: usize, coef: f64, p: usize, q: usize) {
        assert!(
            p < self.n_atoms() && q < self.n_atoms(),
            "atom index out of range"
        );
        if coef != 0.0 {
            self.terms.push(Term { var, coef, p, q });
        }
    }

    /// Adds `x_var · M` for a symmetric `M`, entry by entry.
    pub fn add_matrix(&mut self, var: usize, m: &DMatrix<f64>) {
        let dim = self.dim();
        assert_eq!(m.shape(), (dim, dim), "coefficient matrix has wrong size");
        for q in 0..dim {
            self.add_dyad(var, 0.5 * m[(q, q)], q, q);
            for p in q + 1..dim {
                self.add_dyad(var, 0.5 * (m[(p, q)] + m[(q, p)]), p, q);
            }
        }
    }

    /// `F(x)`.
    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let k = self.n_atoms();
        let mut coeffs = DMatrix::zeros(k, k);
        for t in &self.terms {
            let c = t.coef * x[t.var];
            coeffs[(t.p, t.q)] += c;
            coeffs[(t.q, t.p)] += c;
        }
        &self.f0 + &self.atoms * coeffs * self.atoms.transpose()
    }

    fn max_var(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.var).max()
    }
}

/// `minimize cᵀx` subject to a list of LMI blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LmiProblem {
    pub objective: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl LmiProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            blocks: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn push(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    /// Total barrier degree `m = Σ dim_b`.
    pub fn barrier_degree(&self) -> usize {
        self.blocks.iter().map(LmiBlock::dim).sum()
    }

    /// Smallest eigenvalue of each block at `x`.
    pub fn min_eigenvalues(&self, x: &[f64]) -> Vec<f64> {
        self.blocks
            .iter()
            .map(|b| {
                SymmetricEigen::new(b.eval(x))
                    .eigenvalues
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Whether every block is positive definite (by Cholesky).
    pub fn is_strictly_feasible(&self, x: &[f64]) -> bool {
        self.blocks
            .iter()
            .all(|b| Cholesky::new(b.eval(x)).is_some())
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_vars();
        for b in &self.blocks {
            if b.max_var().is_some_and(|v| v >= n) {
                return Err(Error::DimensionMismatch(
                    "LMI term refers to a variable beyond the objective length".into(),
                ));
            }
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("LMI objective"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpOptions {
    /// Stop when the duality measure `m/t` falls below `tol·max(1, |cᵀx|)`
    /// and the dual residual below `tol·max(1, ‖c‖)`.
    pub tol: f64,
    pub max_iter: usize,
    /// Emit one JSON line per iteration on stderr.
    pub verbose: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 200,
            verbose: false,
        }
    }
}

/// Progress at the start of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpIteration {
    pub iteration: usize,
    /// Barrier parameter `m/⟨S, Z⟩` of the current point.
    pub t: f64,
    /// Distance from the central path, `‖t·LᵀZL − I‖_F` with `S = LLᵀ`.
    pub centrality: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub min_eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub diagnostics: Vec<SdpIteration>,
}

/// Primal slack, its factor and inverse, and the dual matrix of one block.
struct BlockState {
    s: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    s_inv: DMatrix<f64>,
    z: DMatrix<f64>,
}

impl BlockState {
    fn new(s: DMatrix<f64>, z: DMatrix<f64>) -> Option<Self> {
        let chol = Cholesky::new(s.clone())?;
        let s_inv = chol.inverse();
        Some(Self { s, chol, s_inv, z })
    }
}

/// `F_b(x) − F_b0`, the linear part of a block.
fn eval_linear(b: &LmiBlock, dx: &[f64]) -> DMatrix<f64> {
    b.eval(dx) - &b.f0
}

/// `(tr(F_i G))ᵢ` summed over blocks, for one matrix `G_b` per block.
fn adjoint(problem: &LmiProblem, mats: &[DMatrix<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(problem.n_vars());
    for (b, g) in problem.blocks.iter().zip(mats) {
        let w = b.atoms.transpose() * g * &b.atoms;
        for t in &b.terms {
            out[t.var] += t.coef * (w[(t.q, t.p)] + w[(t.p, t.q)]);
        }
    }
    out
}

/// `M_ij = Σ_b tr(F_i S⁻¹ F_j Z)`, symmetric positive definite for
/// interior `S, Z` and linearly independent `F_i`.
fn schur_matrix(problem: &LmiProblem, states: &[BlockState]) -> DMatrix<f64> {
    let n = problem.n_vars();
    let mut m = DMatrix::zeros(n, n);
    for (b, st) in problem.blocks.iter().zip(states) {
        let ws = b.atoms.transpose() * &st.s_inv * &b.atoms;
        let wz = b.atoms.transpose() * &st.z * &b.atoms;
        for (i, t) in b.terms.iter().enumerate() {
            let (p, q) = (t.p, t.q);
            for (j, u) in b.terms[..=i].iter().enumerate() {
                let (r, s) = (u.p, u.q);
                let h = t.coef
                    * u.coef
                    * (ws[(q, r)] * wz[(s, p)]
                        + ws[(q, s)] * wz[(r, p)]
                        + ws[(p, r)] * wz[(s, q)]
                        + ws[(p, s)] * wz[(r, q)]);
                m[(t.var, u.var)] += h;
                if j != i {
                    m[(u.var, t.var)] += h;
                }
            }
        }
    }
    m
}

/// Cholesky factor of `M`, adding a growing diagonal shift when `M` is
/// numerically indefinite.
fn factor_schur(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let scale = m
        .diagonal()
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let mut shift = 0.0;
    for _ in 0..12 {
        let mut h = m.clone();
        if shift > 0.0 {
            for i in 0..h.nrows() {
                h[(i, i)] += shift;
            }
        }
        if let Some(chol) = Cholesky::new(h) {
            return Ok(chol);
        }
        shift = if shift == 0.0 {
            1e-14 * scale
        } else {
            shift * 100.0
        };
    }
    Err(Error::NumericalFailure(
        "Schur complement matrix is not positive definite".into(),
    ))
}

fn sym(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Largest `α ≤ 1` with `X + αD ⪰ 0`, given the Cholesky factor of `X ≻ 0`.
fn max_step(chol: &Cholesky<f64, Dyn>, d: &DMatrix<f64>) -> f64 {
    let l = chol.l();
    let Some(li) = l.clone().try_inverse() else {
        return 0.0;
    };
    let scaled = sym(&li * d * li.transpose());
    let lmin = SymmetricEigen::new(scaled).eigenvalues.min();
    if lmin >= -1.0 {
        1.0
    } else {
        -1.0 / lmin
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// One search direction: `dx`, the slack directions and the dual directions.
struct Direction {
    dx: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
}

/// Solves the HKM system `M dx = σμ·g − c − h` and recovers
/// `dZ = σμS⁻¹ − Z − sym(S⁻¹dS Z) − corr`.
fn direction(
    problem: &LmiProblem,
    states: &[BlockState],
    schur: &Cholesky<f64, Dyn>,
    g: &DVector<f64>,
    sigma_mu: f64,
    corr: Option<&[DMatrix<f64>]>,
) -> Direction {
    let c = DVector::from_column_slice(&problem.objective);
    let mut rhs = g * sigma_mu - c;
    if let Some(corr) = corr {
        rhs -= adjoint(problem, corr);
    }
    let dx = schur.solve(&rhs);
    let mut ds = Vec::with_capacity(states.len());
    let mut dz = Vec::with_capacity(states.len());
    for (i, (b, st)) in problem.blocks.iter().zip(states).enumerate() {
        let d_s = eval_linear(b, dx.as_slice());
        let mut d_z = &st.s_inv * sigma_mu - &st.z - sym(&st.s_inv * &d_s * &st.z);
        if let Some(corr) = corr {
            d_z -= &corr[i];
        }
        ds.push(d_s);
        dz.push(d_z);
    }
    Direction { dx, ds, dz }
}

/// Primal and dual step bounds of a direction.
fn step_bounds(states: &[BlockState], d: &Direction) -> (f64, f64) {
    let mut ap = 1.0f64;
    let mut ad = 1.0f64;
    for (st, (ds, dz)) in states.iter().zip(d.ds.iter().zip(&d.dz)) {
        ap = ap.min(max_step(&st.chol, ds));
        match Cholesky::new(st.z.clone()) {
            Some(zc) => ad = ad.min(max_step(&zc, dz)),
            None => ad = 0.0,
        }
    }
    (ap, ad)
}

/// Scale of the identity dual start; the dual iterate starts infeasible and
/// its residual shrinks with every dual step.
const DUAL_START: f64 = 10.0;
/// Fraction of the distance to the cone boundary taken per step.
const STEP_FRACTION: f64 = 0.95;
/// Steps this short in either space for this many iterations count as a stall.
const SHORT_STEP: f64 = 1e-8;
const STALL_STEPS: usize = 5;

/// `‖μ⁻¹ Lᵀ Z L − I‖_F` over all blocks, `S = LLᵀ`: zero on the central path.
fn centrality(states: &[BlockState], mu: f64) -> f64 {
    let mut acc = 0.0;
    for st in states {
        let l = st.chol.l();
        let mut v = l.transpose() * &st.z * &l / mu;
        for i in 0..v.nrows() {
            v[(i, i)] -= 1.0;
        }
        acc += v.norm_squared();
    }
    acc.sqrt()
}

/// Follows the central path `S Z = (1/t) I` from a strictly feasible `x`
/// with Mehrotra predictor-corrector HKM steps until the duality measure
/// `m/t = ⟨S, Z⟩` and the dual residual are below `tol`.
fn path_follow(
    problem: &LmiProblem,
    mut x: Vec<f64>,
    opts: &SdpOptions,
    stop: &dyn Fn(&[f64]) -> bool,
) -> Result<SdpSolution> {
    let m = problem.barrier_degree() as f64;
    let c = DVector::from_column_slice(&problem.objective);
    let c_scale = c.norm().max(1.0);
    let mut states = Vec::with_capacity(problem.blocks.len());
    for b in &problem.blocks {
        let s = b.eval(&x);
        let dim = s.nrows();
        let st = BlockState::new(s, DMatrix::zeros(dim, dim))
            .ok_or_else(|| Error::Infeasible("starting point is not strictly feasible".into()))?;
        states.push(st);
    }
    for st in &mut states {
        let dim = st.s.nrows();
        st.z = DMatrix::identity(dim, dim) * DUAL_START.max((dim as f64).sqrt());
    }
    let mut diagnostics = Vec::new();
    let mut short = 0;
    for iter in 1..=opts.max_iter {
        let gap: f64 = states.iter().map(|s| inner(&s.s, &s.z)).sum();
        let mu = gap / m;
        let z_mats: Vec<DMatrix<f64>> = states.iter().map(|s| s.z.clone()).collect();
        let dual_residual = (&c - adjoint(problem, &z_mats)).norm();
        let objective = dot(&problem.objective, &x);
        let record = SdpIteration {
            iteration: iter - 1,
            t: 1.0 / mu,
            centrality: centrality(&states, mu),
            dual_residual,
            objective,
            min_eigenvalues: problem.min_eigenvalues(&x),
        };
        if opts.verbose {
            if let Ok(line) = serde_json::to_string(&record) {
                eprintln!("{line}");
            }
        }
        diagnostics.push(record);
        let gap_ok = gap < opts.tol * objective.abs().max(1.0);
        let converged = gap_ok && dual_residual < opts.tol * c_scale;
        // near the optimum Z becomes nearly singular and the gap and dual
        // residual may stop shrinking at roughly √tol
        let loose = opts.tol.sqrt();
        let stalled_ok = gap < loose * objective.abs().max(1.0) && dual_residual < loose * c_scale;
        if short >= STALL_STEPS && !stalled_ok {
            return Err(Error::NumericalFailure(format!(
                "interior-point iteration stalled: gap {gap:.3e}, dual residual {dual_residual:.3e}"
            )));
        }
        if converged || short >= STALL_STEPS {
            return Ok(SdpSolution {
                x,
                objective,
                iterations: iter - 1,
                diagnostics,
            });
        }

        let schur = factor_schur(schur_matrix(problem, &states))?;
        let g = adjoint(
            problem,
            &states.iter().map(|s| s.s_inv.clone()).collect::<Vec<_>>(),
        );
        // predictor: pure affine scaling
        let pred = direction(problem, &states, &schur, &g, 0.0, None);
        let (ap, ad) = step_bounds(&states, &pred);
        let gap_aff: f64 = states
            .iter()
            .zip(pred.ds.iter().zip(&pred.dz))
            .map(|(st, (ds, dz))| inner(&(&st.s + ds * ap), &(&st.z + dz * ad)))
            .sum();
        let sigma = (gap_aff / gap).clamp(0.0, 1.0).powi(3);
        // corrector with the second-order term sym(S⁻¹ dS dZ)
        let corr: Vec<DMatrix<f64>> = states
            .iter()
            .zip(pred.ds.iter().zip(&pred.dz))
            .map(|(st, (ds, dz))| sym(&st.s_inv * ds * dz))
            .collect();
        let d = direction(problem, &states, &schur, &g, sigma * mu, Some(&corr));
        let (ap, ad) = step_bounds(&states, &d);
        let mut ap = (STEP_FRACTION * ap).min(1.0);
        let ad = (STEP_FRACTION * ad).min(1.0);

        // the slack is recomputed from x, so guard against rounding at the boundary
        let mut accepted = None;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(d.dx.iter()).map(|(v, s)| v + ap * s).collect();
            let next: Option<Vec<BlockState>> = problem
                .blocks
                .iter()
                .zip(states.iter().zip(&d.dz))
                .map(|(b, (st, dz))| BlockState::new(b.eval(&trial), sym(&st.z + dz * ad)))
                .collect();
            if let Some(next) = next {
                accepted = Some((trial, next));
                break;
            }
            ap *= 0.5;
        }
        let Some((trial, next)) = accepted else {
            return Err(Error::NumericalFailure(
                "primal step left the feasible cone".into(),
            ));
        };
        x = trial;
        states = next;
        if stop(&x) {
            let objective = dot(&problem.objective, &x);
            return Ok(SdpSolution {
                x,
                objective,
                iterations: iter,
                diagnostics,
            });
        }
        short = if ap.min(ad) < SHORT_STEP {
            short + 1
        } else {
            0
        };
    }
    Err(Error::MaxIterations(opts.max_iter))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Box half-width (relative to the starting point's scale) used in the
/// feasibility phase.
const PHASE1_BOX: f64 = 1e4;

/// `−r < xᵢ < r` as scalar blocks.
fn box_blocks(n: usize, r: f64) -> Vec<LmiBlock> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        for sign in [-0.5, 0.5] {
            let mut b = LmiBlock::new(DMatrix::from_element(1, 1, r));
            b.add_dyad(i, sign, 0, 0);
            out.push(b);
        }
    }
    out
}

/// Finds a strictly feasible point, starting from `x0`.
///
/// Solves `min s` subject to `F_b(x) + s·I ≻ 0` inside a generous box from
/// `(x0, s0)` with `s0` large enough, stopping as soon as `s < 0`.
pub fn find_feasible(problem: &LmiProblem, x0: &[f64], opts: &SdpOptions) -> Result<Vec<f64>> {
    problem.validate()?;
    let n = problem.n_vars();
    if x0.len() != n {
        return Err(Error::DimensionMismatch(
            "starting point has wrong length".into(),
        ));
    }
    if problem.is_strictly_feasible(x0) {
        return Ok(x0.to_vec());
    }
    let worst = problem
        .min_eigenvalues(x0)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let s0 = (-worst).max(0.0) + 1.0;
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut phase1 = LmiProblem::new(objective);
    for b in &problem.blocks {
        let mut nb = b.clone();
        for p in 0..b.dim() {
            nb.add_dyad(n, 0.5, p, p);
        }
        phase1.push(nb);
    }
    // Without a box the slack can decrease forever along a recession
    // direction while x runs off.
    let x_scale = x0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for b in box_blocks(n + 1, PHASE1_BOX * x_scale.max(s0)) {
        phase1.push(b);
    }
    let mut start = x0.to_vec();
    start.push(s0);
    let sol = path_follow(&phase1, start, opts, &|x: &[f64]| x[n] < 0.0)?;
    let x: Vec<f64> = sol.x[..n].to_vec();
    if sol.x[n] < 0.0 && problem.is_strictly_feasible(&x) {
        Ok(x)
    } else {
        Err(Error::Infeasible(format!(
            "no strictly feasible point: best slack {:.3e}, block minimum eigenvalues {:?}",
            sol.x[n],
            problem.min_eigenvalues(&x)
        )))
    }
}

/// Minimizes the objective; runs a feasibility phase when `x0` is absent or
/// not strictly feasible.
pub fn lmi_solve(
    problem: &LmiProblem,
    x0: Option<&[f64]>,
    opts: &SdpOptions,
) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.n_vars();
    let start = match x0 {
        Some(x) if x.len() == n && problem.is_strictly_feasible(x) => x.to_vec(),
        Some(x) if x.len() == n => find_feasible(problem, x, opts)?,
        Some(_) => {
            return Err(Error::DimensionMismatch(
                "starting point has wrong length".into(),
            ))
        }
        None => find_feasible(problem, &vec![0.0; n], opts)?,
    };
    let sol = path_follow(problem, start, opts, &|_: &[f64]| false)?;
    if !problem.is_strictly_feasible(&sol.x) {
        return Err(Error::NumericalFailure(
            "final iterate failed the feasibility check".into(),
        ));
    }
    Ok(sol)
}
