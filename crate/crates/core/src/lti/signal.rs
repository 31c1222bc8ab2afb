use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Uniformly sampled, possibly vector-valued signal.
///
/// Samples are stored sample-major: the `dim` channel values of sample `i`
/// occupy `data[i*dim..(i+1)*dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    fs: f64,
    dim: usize,
    data: Vec<f64>,
}

impl SampledSignal {
    /// Scalar signal.
    pub fn new(fs: f64, samples: Vec<f64>) -> Result<Self> {
        Self::multi(fs, 1, samples)
    }

    pub fn multi(fs: f64, dim: usize, data: Vec<f64>) -> Result<Self> {
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(Error::Validation(format!(
                "sample rate must be positive, got {fs}"
            )));
        }
        if dim == 0 {
            return Err(Error::Validation(
                "signal dimension must be at least 1".into(),
            ));
        }
        if data.len() % dim != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} values do not split into {dim} channels",
                data.len()
            )));
        }
        Ok(Self { fs, dim, data })
    }

    pub fn zeros(fs: f64, dim: usize, len: usize) -> Result<Self> {
        Self::multi(fs, dim, vec![0.0; dim * len])
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Channel values of sample `i`.
    pub fn sample(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Raw sample-major storage; for scalar signals this is the sample sequence.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data
            .iter()
            .skip(c)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    /// `dim × len` matrix with one column per sample.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim, self.len(), &self.data)
    }

    pub fn slice(&self, range: Range<usize>) -> SampledSignal {
        SampledSignal {
            fs: self.fs,
            dim: self.dim,
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
        }
    }

    pub fn concat(&self, other: &SampledSignal) -> Result<SampledSignal> {
        if self.dim != other.dim || self.fs != other.fs {
            return Err(Error::DimensionMismatch(
                "concat: signals differ in rate or dimension".into(),
            ));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(SampledSignal {
            fs: self.fs,
            dim: self.dim,
            data,
        })
    }

    pub fn scaled(&self, k: f64) -> SampledSignal {
        SampledSignal {
            fs: self.fs,
            dim: self.dim,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }
}
