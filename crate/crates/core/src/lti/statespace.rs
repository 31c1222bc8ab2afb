use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Continuous-time LTI system `ẋ = Ax + Bu`, `y = Cx + Du`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "B has {} rows, expected {n}",
                b.nrows()
            )));
        }
        if c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "C has {} columns, expected {n}",
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (name, m) in [("A", &a), ("B", &b), ("C", &c), ("D", &d)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(Self { a, b, c, d })
    }

    /// A memoryless system `y = Du`.
    pub fn static_gain(d: DMatrix<f64>) -> Self {
        let (q, p) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, p),
            c: DMatrix::zeros(q, 0),
            d,
        }
    }

    /// Single-input single-output system from raw parts.
    pub fn siso(a: DMatrix<f64>, b: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        let n = b.len();
        let b = DMatrix::from_vec(n, 1, b);
        let c = DMatrix::from_vec(1, c.len(), c);
        Self::new(a, b, c, DMatrix::from_element(1, 1, d))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn is_siso(&self) -> bool {
        self.n_inputs() == 1 && self.n_outputs() == 1
    }

    /// Series interconnection: `self` feeds `next`, i.e. `next ∘ self`.
    pub fn series(&self, next: &StateSpace) -> Result<StateSpace> {
        if next.n_inputs() != self.n_outputs() {
            return Err(Error::DimensionMismatch(format!(
                "series: {} outputs feed {} inputs",
                self.n_outputs(),
                next.n_inputs()
            )));
        }
        let (n1, n2) = (self.n_states(), next.n_states());
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, 0), (n2, n1))
            .copy_from(&(&next.b * &self.c));
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        let mut b = DMatrix::zeros(n, self.n_inputs());
        b.view_mut((0, 0), (n1, self.n_inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.n_inputs()))
            .copy_from(&(&next.b * &self.d));
        let mut c = DMatrix::zeros(next.n_outputs(), n);
        c.view_mut((0, 0), (next.n_outputs(), n1))
            .copy_from(&(&next.d * &self.c));
        c.view_mut((0, n1), (next.n_outputs(), n2))
            .copy_from(&next.c);
        let d = &next.d * &self.d;
        StateSpace::new(a, b, c, d)
    }

    /// Parallel difference `self − other` (same input, outputs subtracted).
    pub fn difference(&self, other: &StateSpace) -> Result<StateSpace> {
        if self.n_inputs() != other.n_inputs() || self.n_outputs() != other.n_outputs() {
            return Err(Error::DimensionMismatch(
                "difference: io dimensions differ".into(),
            ));
        }
        let (n1, n2) = (self.n_states(), other.n_states());
        let n = n1 + n2;
        let (p, q) = (self.n_inputs(), self.n_outputs());
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = DMatrix::zeros(n, p);
        b.view_mut((0, 0), (n1, p)).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, p)).copy_from(&other.b);
        let mut c = DMatrix::zeros(q, n);
        c.view_mut((0, 0), (q, n1)).copy_from(&self.c);
        c.view_mut((0, n1), (q, n2)).copy_from(&(-&other.c));
        StateSpace::new(a, b, c, &self.d - &other.d)
    }

    /// Applies the state transform `x = T z`, returning `(T⁻¹AT, T⁻¹B, CT, D)`.
    pub fn similarity(&self, t: &DMatrix<f64>) -> Result<StateSpace> {
        let t_inv = t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Validation("similarity transform is singular".into()))?;
        StateSpace::new(
            &t_inv * &self.a * t,
            &t_inv * &self.b,
            &self.c * t,
            self.d.clone(),
        )
    }
}
