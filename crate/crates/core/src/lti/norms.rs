use nalgebra::Schur;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{solve_lyapunov, FrequencyEvaluator, StateSpace};
use crate::error::{Error, Result};

/// Default logarithmic grid density for [`linf_norm`].
pub const DEFAULT_POINTS_PER_DECADE: usize = 2000;

/// Eigenvalues of the state matrix.
pub fn poles(sys: &StateSpace) -> Result<Vec<Complex64>> {
    if sys.n_states() == 0 {
        return Ok(vec![]);
    }
    let schur = Schur::try_new(sys.a().clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::NumericalFailure("eigenvalue iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part over the eigenvalues of `A`; `−∞` for a static system.
pub fn spectral_abscissa(sys: &StateSpace) -> Result<f64> {
    Ok(poles(sys)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// H² norm `√trace(C P Cᵀ)` with `AP + PAᵀ + BBᵀ = 0`.
pub fn h2_norm(sys: &StateSpace) -> Result<f64> {
    if sys.d().iter().any(|v| *v != 0.0) {
        return Err(Error::NonzeroFeedthrough);
    }
    if sys.n_states() == 0 {
        return Ok(0.0);
    }
    let abscissa = spectral_abscissa(sys)?;
    if abscissa >= 0.0 {
        return Err(Error::UnstableSystem { abscissa });
    }
    let bbt = sys.b() * sys.b().transpose();
    let p = solve_lyapunov(sys.a(), &bbt)?;
    let energy = (sys.c() * p * sys.c().transpose()).trace();
    Ok(energy.max(0.0).sqrt())
}

/// Result of the gridded supremum search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinfNorm {
    pub value: f64,
    /// Frequency (rad/s) where the supremum was attained.
    pub omega: f64,
    /// Grid points skipped because `jω` hit a pole.
    pub skipped: Vec<f64>,
}

/// Supremum of `|G(jω)|` over `[lo, hi]` rad/s.
///
/// A logarithmic grid with `points_per_decade` density is searched, then the
/// best grid cell is refined by golden-section search in `log ω`. Stability is
/// not required.
pub fn linf_norm(sys: &StateSpace, band: (f64, f64), points_per_decade: usize) -> Result<LinfNorm> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Validation(format!("invalid band [{lo}, {hi}]")));
    }
    if points_per_decade == 0 {
        return Err(Error::Validation("grid density must be positive".into()));
    }
    let eval = FrequencyEvaluator::new(sys)?;
    let (llo, lhi) = (lo.log10(), hi.log10());
    let count = (((lhi - llo) * points_per_decade as f64).ceil() as usize).max(1) + 1;
    let grid: Vec<f64> = (0..count)
        .map(|i| 10f64.powf(llo + (lhi - llo) * i as f64 / (count - 1) as f64))
        .collect();

    let mut skipped = Vec::new();
    let mut best = (f64::NEG_INFINITY, lo, 0usize);
    for (i, &w) in grid.iter().enumerate() {
        match eval.eval(w) {
            Ok(g) => {
                let m = g.norm();
                if m > best.0 {
                    best = (m, w, i);
                }
            }
            Err(Error::SingularAtFrequency { .. }) => skipped.push(w),
            Err(e) => return Err(e),
        }
    }
    if !best.0.is_finite() {
        return Err(Error::SingularAtFrequency { omega: lo });
    }

    let i = best.2;
    let a = grid[i.saturating_sub(1)].ln();
    let b = grid[(i + 1).min(count - 1)].ln();
    let mag = |lw: f64| {
        eval.eval(lw.exp())
            .map(|g| g.norm())
            .unwrap_or(f64::NEG_INFINITY)
    };
    let (value, omega) = golden_max(mag, a, b, best.0, best.1.ln());
    Ok(LinfNorm {
        value,
        omega: omega.exp(),
        skipped,
    })
}

/// Golden-section maximization on `[a, b]`, never returning less than the
/// seed value `(f0, x0)`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, f0: f64, x0: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = (f0, x0);
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * (1.0 + a.abs()) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    for (fx, x) in [(fc, c), (fd, d)] {
        if fx > best.0 {
            best = (fx, x);
        }
    }
    best
}
