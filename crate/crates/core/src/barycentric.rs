//! Barycentric interpolants in real state-space form.
//!
//! Interpolation data `(D, K = G(0), {(ωₖ, Gₖ)})` fixes two weight-independent
//! single-input systems 𝓜 and 𝓝 sharing the block-diagonal state matrix
//! `𝓐 = blkdiag(0, [0 ω₁; −ω₁ 0], …)`. A weight row `Ŵ` then selects the
//! interpolant `R = (𝕎𝓜)⁻¹(𝕎𝓝)` with `𝕎 = [1 | Ŵ]`, realized as
//!
//! ```text
//!     R = [ 𝓐 − ℬ_M Ŵ | ℬ_M D − ℬ_N ]
//!         [    −Ŵ     |      D      ]
//! ```
//!
//! Each complex barycentric weight `wₖ` of the scalar form becomes the two
//! adjacent entries `(Ŵ[2k−1], Ŵ[2k])` acting on the two states of block `k`;
//! the equivalent complex weight on the pole at `+jωₖ` is `(Ŵ[2k−1] + jŴ[2k]) / 2`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lti::StateSpace;

/// Relative spacing below which two frequencies count as the same node.
pub const DUPLICATE_RTOL: f64 = 1e-12;

/// Weight blocks with Euclidean norm at or below this are treated as zero.
pub const ACTIVE_WEIGHT_TOL: f64 = 1e-12;

/// A measured (or exact) frequency-response value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencySample {
    /// rad/s
    pub omega: f64,
    pub value: Complex64,
}

impl FrequencySample {
    pub fn new(omega: f64, value: Complex64) -> Self {
        Self { omega, value }
    }
}

/// Feedthrough, DC gain and the nonzero interpolation nodes, sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationData {
    d: f64,
    k: f64,
    points: Vec<FrequencySample>,
}

impl InterpolationData {
    pub fn new(d: f64, k: f64, mut points: Vec<FrequencySample>) -> Result<Self> {
        if !d.is_finite() || !k.is_finite() {
            return Err(Error::NonFinite("interpolation data"));
        }
        for p in &points {
            if !(p.omega > 0.0 && p.omega.is_finite()) {
                return Err(Error::Validation(format!(
                    "interpolation frequency must be positive, got {}",
                    p.omega
                )));
            }
            if !(p.value.re.is_finite() && p.value.im.is_finite()) {
                return Err(Error::NonFinite("interpolation value"));
            }
        }
        points.sort_by(|a, b| a.omega.total_cmp(&b.omega));
        for pair in points.windows(2) {
            if pair[1].omega - pair[0].omega <= DUPLICATE_RTOL * pair[1].omega {
                return Err(Error::DuplicateFrequency {
                    omega: pair[1].omega,
                });
            }
        }
        Ok(Self { d, k, points })
    }

    pub fn feedthrough(&self) -> f64 {
        self.d
    }

    pub fn dc_gain(&self) -> f64 {
        self.k
    }

    pub fn points(&self) -> &[FrequencySample] {
        &self.points
    }

    /// Number of nonzero interpolation frequencies `ℓ`.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// State dimension `2ℓ + 1` of the bases and of `R`.
    pub fn order(&self) -> usize {
        2 * self.points.len() + 1
    }
}

/// The stacked basis systems 𝓜 and 𝓝 (outputs `[feedthrough row; state]`).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisPair {
    a_cal: DMatrix<f64>,
    b_m: DVector<f64>,
    b_n: DVector<f64>,
    m_sys: StateSpace,
    n_sys: StateSpace,
}

impl BasisPair {
    pub fn a_cal(&self) -> &DMatrix<f64> {
        &self.a_cal
    }

    pub fn b_m(&self) -> &DVector<f64> {
        &self.b_m
    }

    pub fn b_n(&self) -> &DVector<f64> {
        &self.b_n
    }

    pub fn m_sys(&self) -> &StateSpace {
        &self.m_sys
    }

    pub fn n_sys(&self) -> &StateSpace {
        &self.n_sys
    }

    pub fn order(&self) -> usize {
        self.a_cal.nrows()
    }
}

/// Builds 𝓐, ℬ_M, ℬ_N and the stacked systems 𝓜, 𝓝.
pub fn build_bases(data: &InterpolationData) -> Result<BasisPair> {
    for pair in data.points.windows(2) {
        if pair[1].omega - pair[0].omega <= DUPLICATE_RTOL * pair[1].omega {
            return Err(Error::DuplicateFrequency {
                omega: pair[1].omega,
            });
        }
    }
    let n = data.order();
    let mut a_cal = DMatrix::zeros(n, n);
    let mut b_m = DVector::zeros(n);
    let mut b_n = DVector::zeros(n);
    b_m[0] = 1.0;
    b_n[0] = data.k;
    for (idx, p) in data.points.iter().enumerate() {
        let i = 1 + 2 * idx;
        a_cal[(i, i + 1)] = p.omega;
        a_cal[(i + 1, i)] = -p.omega;
        b_m[i] = 1.0;
        b_n[i] = p.value.re;
        b_n[i + 1] = -p.value.im;
    }
    let mut c = DMatrix::zeros(n + 1, n);
    c.view_mut((1, 0), (n, n)).fill_with_identity();
    let mut d_m = DMatrix::zeros(n + 1, 1);
    d_m[(0, 0)] = 1.0;
    let mut d_n = DMatrix::zeros(n + 1, 1);
    d_n[(0, 0)] = data.d;
    let m_sys = StateSpace::new(
        a_cal.clone(),
        DMatrix::from_column_slice(n, 1, b_m.as_slice()),
        c.clone(),
        d_m,
    )?;
    let n_sys = StateSpace::new(
        a_cal.clone(),
        DMatrix::from_column_slice(n, 1, b_n.as_slice()),
        c,
        d_n,
    )?;
    Ok(BasisPair {
        a_cal,
        b_m,
        b_n,
        m_sys,
        n_sys,
    })
}

/// The free part `Ŵ` of the weight row `𝕎 = [1 | Ŵ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow(Vec<f64>);

impl WeightRow {
    pub fn new(w: Vec<f64>) -> Self {
        Self(w)
    }

    pub fn zeros(width: usize) -> Self {
        Self(vec![0.0; width])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// The DC weight `w₀`.
    pub fn dc(&self) -> f64 {
        self.0[0]
    }

    /// The real pair acting on interpolation node `k` (1-based).
    pub fn pair(&self, k: usize) -> (f64, f64) {
        (self.0[2 * k - 1], self.0[2 * k])
    }

    pub fn to_row(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(1, self.0.len(), &self.0)
    }
}

/// An assembled interpolant together with the data that built it.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolantModel {
    data: InterpolationData,
    bases: BasisPair,
    weights: WeightRow,
    r: StateSpace,
}

impl InterpolantModel {
    pub fn data(&self) -> &InterpolationData {
        &self.data
    }

    pub fn bases(&self) -> &BasisPair {
        &self.bases
    }

    pub fn weights(&self) -> &WeightRow {
        &self.weights
    }

    /// The state-space realization of `R`.
    pub fn system(&self) -> &StateSpace {
        &self.r
    }

    pub fn order(&self) -> usize {
        self.r.n_states()
    }

    /// Whether the DC weight is nonzero, so `R(0) = K`.
    pub fn dc_active(&self) -> bool {
        self.weights.dc().abs() > ACTIVE_WEIGHT_TOL
    }

    /// Per interpolation node: whether its weight block is nonzero.
    pub fn active(&self) -> Vec<bool> {
        (1..=self.data.len())
            .map(|k| {
                let (a, b) = self.weights.pair(k);
                a.hypot(b) > ACTIVE_WEIGHT_TOL
            })
            .collect()
    }
}

/// Realizes `R` from the bases and a weight row.
pub fn assemble_model(
    bases: &BasisPair,
    data: &InterpolationData,
    weights: &WeightRow,
) -> Result<InterpolantModel> {
    let n = bases.order();
    if weights.len() != n || data.order() != n {
        return Err(Error::DimensionMismatch(format!(
            "weight row has width {}, bases have order {n}, data has order {}",
            weights.len(),
            data.order()
        )));
    }
    let w = weights.to_row();
    let b_m = DMatrix::from_column_slice(n, 1, bases.b_m.as_slice());
    let b_n = DMatrix::from_column_slice(n, 1, bases.b_n.as_slice());
    let a = &bases.a_cal - &b_m * &w;
    let b = &b_m * data.d - &b_n;
    let r = StateSpace::new(a, b, -w, DMatrix::from_element(1, 1, data.d))?;
    Ok(InterpolantModel {
        data: data.clone(),
        bases: bases.clone(),
        weights: weights.clone(),
        r,
    })
}

/// Evaluates `N(jω) / M(jω)` from the barycentric sums.
///
/// At an active node the quotient is 0/0; the error names the node so the
/// caller can substitute the known value.
pub fn eval_interpolant(model: &InterpolantModel, omega: f64) -> Result<Complex64> {
    let data = &model.data;
    let w = &model.weights;
    let s = Complex64::new(0.0, omega);
    let one = Complex64::new(1.0, 0.0);
    let mut m = one;
    let mut nn = Complex64::new(data.d, 0.0);

    let w0 = w.dc();
    if w0 != 0.0 {
        if omega == 0.0 {
            return Err(Error::RemovableSingularity { omega, node: 0 });
        }
        m += w0 / s;
        nn += w0 * data.k / s;
    }
    for (idx, p) in data.points.iter().enumerate() {
        let (a, b) = w.pair(idx + 1);
        if a == 0.0 && b == 0.0 {
            continue;
        }
        if (omega.abs() - p.omega).abs() <= DUPLICATE_RTOL * p.omega {
            return Err(Error::RemovableSingularity {
                omega,
                node: idx + 1,
            });
        }
        let c = Complex64::new(a, b) * 0.5;
        let jw = Complex64::new(0.0, p.omega);
        let (pos, neg) = (one / (s - jw), one / (s + jw));
        m += c * pos + c.conj() * neg;
        let cg = c * p.value;
        nn += cg * pos + cg.conj() * neg;
    }
    if m.norm() == 0.0 {
        return Err(Error::SingularAtFrequency { omega });
    }
    Ok(nn / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::freq_response_siso;
    use crate::testutil::rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_model(seed: u64, ell: usize) -> InterpolantModel {
        let mut r = rng(seed);
        let mut omega = 0.5;
        let points = (0..ell)
            .map(|_| {
                omega *= r.gen_range(1.2..3.0);
                FrequencySample::new(omega, c(r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)))
            })
            .collect();
        let data =
            InterpolationData::new(r.gen_range(-0.5..0.5), r.gen_range(-2.0..2.0), points).unwrap();
        let bases = build_bases(&data).unwrap();
        let w = WeightRow::new((0..data.order()).map(|_| r.gen_range(-3.0..3.0)).collect());
        assemble_model(&bases, &data, &w).unwrap()
    }

    #[test]
    fn dc_only_bases() {
        let data = InterpolationData::new(0.0, 5.0, vec![]).unwrap();
        let b = build_bases(&data).unwrap();
        assert_eq!(b.a_cal(), &DMatrix::zeros(1, 1));
        assert_eq!(b.b_m().as_slice(), &[1.0]);
        assert_eq!(b.b_n().as_slice(), &[5.0]);
        assert_eq!(b.m_sys().n_outputs(), 2);
        assert_eq!(b.n_sys().n_outputs(), 2);
    }

    #[test]
    fn one_node_bases() {
        let data = InterpolationData::new(0.0, 1.0, vec![FrequencySample::new(2.0, c(1.0, -1.0))])
            .unwrap();
        let b = build_bases(&data).unwrap();
        let a = b.a_cal();
        assert_eq!((a[(1, 2)], a[(2, 1)]), (2.0, -2.0));
        assert_eq!(&b.b_n().as_slice()[1..], &[1.0, 1.0]);
        assert_eq!(&b.b_m().as_slice()[1..], &[1.0, 0.0]);
        // feedthrough columns
        assert_eq!(b.m_sys().d().column(0).as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(b.n_sys().d()[(0, 0)], 0.0);
        assert_eq!(
            b.m_sys().c().view((1, 0), (3, 3)),
            DMatrix::<f64>::identity(3, 3)
        );
    }

    #[test]
    fn three_node_dimensions() {
        let pts = (1..=3)
            .map(|k| FrequencySample::new(k as f64, c(1.0, 0.0)))
            .collect();
        let data = InterpolationData::new(0.0, 1.0, pts).unwrap();
        let b = build_bases(&data).unwrap();
        assert_eq!(b.order(), 7);
        assert_eq!(b.m_sys().n_outputs(), 8);
    }

    #[test]
    fn duplicate_frequency_rejected() {
        let pts = vec![
            FrequencySample::new(3.0, c(1.0, 0.0)),
            FrequencySample::new(3.0 * (1.0 + 1e-14), c(1.0, 0.0)),
        ];
        assert!(matches!(
            InterpolationData::new(0.0, 1.0, pts),
            Err(Error::DuplicateFrequency { .. })
        ));
    }

    #[test]
    fn zero_weights_give_static_model() {
        let data = InterpolationData::new(0.3, 1.0, vec![FrequencySample::new(2.0, c(1.0, -1.0))])
            .unwrap();
        let bases = build_bases(&data).unwrap();
        let model = assemble_model(&bases, &data, &WeightRow::zeros(3)).unwrap();
        for w in [0.1, 1.0, 7.0, 300.0] {
            let r = freq_response_siso(model.system(), w).unwrap();
            assert!((r - c(0.3, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn width_mismatch() {
        let data = InterpolationData::new(0.0, 1.0, vec![]).unwrap();
        let bases = build_bases(&data).unwrap();
        assert!(matches!(
            assemble_model(&bases, &data, &WeightRow::zeros(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn one_node_interpolates() {
        let g1 = c(0.7, -1.3);
        let data = InterpolationData::new(0.0, 2.0, vec![FrequencySample::new(4.0, g1)]).unwrap();
        let bases = build_bases(&data).unwrap();
        let model = assemble_model(&bases, &data, &WeightRow::new(vec![0.8, 1.7, -0.6])).unwrap();
        let r = freq_response_siso(model.system(), 4.0).unwrap();
        assert!((r - g1).norm() <= 1e-8 * g1.norm());
        let r0 = freq_response_siso(model.system(), 0.0).unwrap();
        assert!((r0 - c(2.0, 0.0)).norm() <= 1e-8);
    }

    #[test]
    fn high_frequency_limit_is_feedthrough() {
        let model = random_model(4, 3);
        let wmax = model.data().points().last().unwrap().omega;
        let r = freq_response_siso(model.system(), 1e9 * wmax).unwrap();
        assert!((r - c(model.data().feedthrough(), 0.0)).norm() < 1e-6);
        let r = eval_interpolant(&model, 1e9 * wmax).unwrap();
        assert!((r - c(model.data().feedthrough(), 0.0)).norm() < 1e-6);
    }

    #[test]
    fn dc_only_hand_expansion() {
        let (d, k, w0) = (0.4, 3.0, 1.5);
        let data = InterpolationData::new(d, k, vec![]).unwrap();
        let bases = build_bases(&data).unwrap();
        let model = assemble_model(&bases, &data, &WeightRow::new(vec![w0])).unwrap();
        for w in [0.01, 0.3, 2.0, 50.0] {
            let s = c(0.0, w);
            let want = (d + w0 * k / s) / (1.0 + w0 / s);
            let got = eval_interpolant(&model, w).unwrap();
            assert!((got - want).norm() <= 1e-14 * want.norm());
            let ss = freq_response_siso(model.system(), w).unwrap();
            assert!((ss - want).norm() <= 1e-12 * want.norm());
        }
    }

    #[test]
    fn removable_singularity_flagged() {
        let model = random_model(9, 2);
        let w1 = model.data().points()[0].omega;
        assert!(matches!(
            eval_interpolant(&model, w1),
            Err(Error::RemovableSingularity { node: 1, .. })
        ));
        assert!(matches!(
            eval_interpolant(&model, 0.0),
            Err(Error::RemovableSingularity { node: 0, .. })
        ));
    }

    #[test]
    fn rational_form_matches_state_space_on_random_points() {
        let model = random_model(21, 4);
        let mut r = rng(99);
        for _ in 0..100 {
            let w = 10f64.powf(r.gen_range(-2.0..3.0));
            let a = eval_interpolant(&model, w).unwrap();
            let b = freq_response_siso(model.system(), w).unwrap();
            assert!(
                (a - b).norm() <= 1e-9 * b.norm().max(1e-12),
                "ω={w}: {a} vs {b}"
            );
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn interpolation_exact_at_active_nodes(seed in 0u64..10_000, ell in 0usize..6) {
            let model = random_model(seed, ell);
            let active = model.active();
            for (p, on) in model.data().points().iter().zip(active) {
                if !on { continue; }
                let r = freq_response_siso(model.system(), p.omega).unwrap();
                prop_assert!((r - p.value).norm() <= 1e-6 * p.value.norm().max(1.0));
            }
            if model.dc_active() {
                let r0 = freq_response_siso(model.system(), 0.0).unwrap();
                let k = model.data().dc_gain();
                prop_assert!((r0.re - k).abs() <= 1e-6 * k.abs().max(1.0) && r0.im.abs() <= 1e-6);
            }
        }

        #[test]
        fn response_is_conjugate_symmetric(seed in 0u64..10_000, w in 0.01f64..100.0) {
            let model = random_model(seed, 3);
            let pos = freq_response_siso(model.system(), w);
            let neg = freq_response_siso(model.system(), -w);
            if let (Ok(pos), Ok(neg)) = (pos, neg) {
                prop_assert!((pos.conj() - neg).norm() <= 1e-10 * pos.norm().max(1e-12));
            }
        }

        #[test]
        fn both_forms_agree(seed in 0u64..10_000, w in 0.01f64..1000.0) {
            let model = random_model(seed, 3);
            if let (Ok(a), Ok(b)) = (eval_interpolant(&model, w), freq_response_siso(model.system(), w)) {
                prop_assert!((a - b).norm() <= 1e-9 * b.norm().max(1e-12));
            }
        }
    }
}
