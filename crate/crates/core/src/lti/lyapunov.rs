use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 100_000;

/// Complex Schur form `A = U T Uᴴ` of a real matrix.
fn complex_schur(a: &DMatrix<f64>) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let ac = a.map(|v| Complex64::new(v, 0.0));
    let schur = Schur::try_new(ac, f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or_else(|| Error::NumericalFailure("Schur iteration did not converge".into()))?;
    Ok(schur.unpack())
}

/// Solves `A X + X Aᵀ + Q = 0` by Bartels–Stewart on the complex Schur form.
///
/// Cost is O(n³); requires `λᵢ(A) + λⱼ(A)* ≠ 0` for all eigenvalue pairs.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(Error::DimensionMismatch(
            "lyapunov: A and Q must be n×n".into(),
        ));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (u, t) = complex_schur(a)?;
    let qc = q.map(|v| Complex64::new(v, 0.0));
    let f = -(u.adjoint() * qc * &u);
    let scale = t
        .iter()
        .map(|v| v.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);

    // T Y + Y Tᴴ = F, T upper triangular; fill from the bottom-right corner.
    let mut y = DMatrix::<Complex64>::zeros(n, n);
    for i in (0..n).rev() {
        for j in (0..n).rev() {
            let mut acc = f[(i, j)];
            for k in i + 1..n {
                acc -= t[(i, k)] * y[(k, j)];
            }
            for k in j + 1..n {
                acc -= y[(i, k)] * t[(j, k)].conj();
            }
            let den = t[(i, i)] + t[(j, j)].conj();
            if den.norm() <= 1e-14 * scale {
                return Err(Error::NumericalFailure(
                    "Lyapunov operator is singular (eigenvalues mirrored across the imaginary axis)"
                        .into(),
                ));
            }
            y[(i, j)] = acc / den;
        }
    }
    let x = (&u * y * u.adjoint()).map(|v| v.re);
    Ok((&x + x.transpose()) * 0.5)
}
