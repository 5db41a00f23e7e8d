use crate::{Error, Result};

/// `n` observations in `ℝ^m`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    dim: usize,
    values: Vec<f64>,
}

impl Sample {
    /// Builds a sample from a flat row-major buffer. NaN entries are rejected.
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("observations must have dimension >= 1".into()));
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "buffer of length {} is not a multiple of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Input(format!(
                "NaN in observation {} (coordinate {})",
                pos / dim + 1,
                pos % dim + 1
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn from_1d(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(1);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::Input(format!(
                    "row {}: expected {dim} columns, got {}",
                    i + 1,
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(dim, values)
    }

    pub(crate) fn from_raw(dim: usize, values: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && values.len().is_multiple_of(dim));
        Self { dim, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column `j` as a one-dimensional vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.points().map(|p| p[j]).collect()
    }

    /// Columns `range` of every observation, as a new sample.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Result<Sample> {
        if range.is_empty() || range.end > self.dim {
            return Err(Error::Input(format!(
                "column range {range:?} invalid for dimension {}",
                self.dim
            )));
        }
        let width = range.len();
        let mut values = Vec::with_capacity(self.len() * width);
        for p in self.points() {
            values.extend_from_slice(&p[range.clone()]);
        }
        Ok(Sample::from_raw(width, values))
    }

    /// Every observation multiplied by −1.
    pub fn negated(&self) -> Sample {
        Sample::from_raw(self.dim, self.values.iter().map(|v| -v).collect())
    }

    /// Rows reordered so that row `k` of the result is row `perm[k]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Sample {
        let mut values = Vec::with_capacity(self.values.len());
        for &k in perm {
            values.extend_from_slice(self.point(k));
        }
        Sample::from_raw(self.dim, values)
    }
}
