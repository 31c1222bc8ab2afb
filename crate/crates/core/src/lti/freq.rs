use nalgebra::DMatrix;
use num_complex::Complex64;

use super::StateSpace;
use crate::error::{Error, Result};

// Relative pivot size below which (jωI − A) is treated as singular.
const SINGULAR_RTOL: f64 = 1e-13;

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `C (jωI − A)⁻¹ B + D` by a dense LU solve.
pub fn freq_response(sys: &StateSpace, omega: f64) -> Result<DMatrix<Complex64>> {
    let n = sys.n_states();
    let d = to_complex(sys.d());
    if n == 0 {
        return Ok(d);
    }
    let jw = Complex64::new(0.0, omega);
    let mut m = -to_complex(sys.a());
    for i in 0..n {
        m[(i, i)] += jw;
    }
    let scale = m
        .iter()
        .map(|v| v.norm())
        .fold(0.0_f64, f64::max)
        .max(1e-300);
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..n)
        .map(|i| u[(i, i)].norm())
        .fold(f64::INFINITY, f64::min);
    if min_pivot <= SINGULAR_RTOL * scale {
        return Err(Error::SingularAtFrequency { omega });
    }
    let x = lu
        .solve(&to_complex(sys.b()))
        .ok_or(Error::SingularAtFrequency { omega })?;
    Ok(to_complex(sys.c()) * x + d)
}

/// Scalar response of a SISO system.
pub fn freq_response_siso(sys: &StateSpace, omega: f64) -> Result<Complex64> {
    if !sys.is_siso() {
        return Err(Error::DimensionMismatch("expected a SISO system".into()));
    }
    Ok(freq_response(sys, omega)?[(0, 0)])
}

/// Repeated SISO frequency-response evaluation in O(n²) per point.
///
/// `A` is reduced once to upper Hessenberg form `A = Z H Zᵀ`; each evaluation
/// then solves `(jωI − H) x = Zᵀ B` with adjacent-row pivoting.
#[derive(Debug, Clone)]
pub struct FrequencyEvaluator {
    h: DMatrix<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
    scale: f64,
}

impl FrequencyEvaluator {
    pub fn new(sys: &StateSpace) -> Result<Self> {
        if !sys.is_siso() {
            return Err(Error::DimensionMismatch("expected a SISO system".into()));
        }
        let n = sys.n_states();
        let d = sys.d()[(0, 0)];
        if n == 0 {
            return Ok(Self {
                h: DMatrix::zeros(0, 0),
                b: vec![],
                c: vec![],
                d,
                scale: 1.0,
            });
        }
        let (z, h) = if n == 1 {
            (DMatrix::identity(1, 1), sys.a().clone())
        } else {
            sys.a().clone().hessenberg().unpack()
        };
        let b = (z.transpose() * sys.b())
            .column(0)
            .iter()
            .copied()
            .collect();
        let c = (sys.c() * &z).row(0).iter().copied().collect();
        let scale = h.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        Ok(Self { h, b, c, d, scale })
    }

    pub fn eval(&self, omega: f64) -> Result<Complex64> {
        let n = self.h.nrows();
        if n == 0 {
            return Ok(Complex64::new(self.d, 0.0));
        }
        let jw = Complex64::new(0.0, omega);
        // row-major working copy of (jωI − H)
        let mut m = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let lo = i.saturating_sub(1);
            for j in lo..n {
                m[i * n + j] = Complex64::new(-self.h[(i, j)], 0.0);
            }
            m[i * n + i] += jw;
        }
        let mut x: Vec<Complex64> = self.b.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let scale = (self.scale + omega.abs()).max(1e-300);
        for k in 0..n - 1 {
            let (pk, pn) = (m[k * n + k].norm(), m[(k + 1) * n + k].norm());
            if pn > pk {
                for j in k..n {
                    m.swap(k * n + j, (k + 1) * n + j);
                }
                x.swap(k, k + 1);
            }
            let piv = m[k * n + k];
            if piv.norm() <= SINGULAR_RTOL * scale {
                return Err(Error::SingularAtFrequency { omega });
            }
            let l = m[(k + 1) * n + k] / piv;
            if l != Complex64::new(0.0, 0.0) {
                for j in k..n {
                    let v = m[k * n + j];
                    m[(k + 1) * n + j] -= l * v;
                }
                let xk = x[k];
                x[k + 1] -= l * xk;
            }
        }
        for i in (0..n).rev() {
            let piv = m[i * n + i];
            if piv.norm() <= SINGULAR_RTOL * scale {
                return Err(Error::SingularAtFrequency { omega });
            }
            let mut acc = x[i];
            for j in i + 1..n {
                acc -= m[i * n + j] * x[j];
            }
            x[i] = acc / piv;
        }
        let y: Complex64 = self.c.iter().zip(&x).map(|(c, xi)| xi * *c).sum();
        Ok(y + self.d)
    }
}
