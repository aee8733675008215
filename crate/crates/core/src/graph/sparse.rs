//! Compressed sparse row storage and sparse-dense products.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Row-major compressed sparse matrix.
///
/// Column indices within a row are strictly increasing, so every product
/// accumulates in the same order and results are bit-reproducible whether or
/// not rows are processed in parallel.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    offsets: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw parts, checking the structural invariants.
    pub fn from_parts(
        nrows: usize,
        ncols: usize,
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if offsets.len() != nrows + 1 || offsets[0] != 0 {
            return Err(Error::invalid("csr offsets must have nrows + 1 entries starting at 0"));
        }
        if indices.len() != values.len() || *offsets.last().unwrap() != indices.len() {
            return Err(Error::invalid("csr offsets, indices and values disagree"));
        }
        for r in 0..nrows {
            if offsets[r] > offsets[r + 1] {
                return Err(Error::invalid("csr offsets must be non-decreasing"));
            }
            let row = &indices[offsets[r]..offsets[r + 1]];
            if row.windows(2).any(|w| w[0] >= w[1]) || row.iter().any(|&c| c >= ncols) {
                return Err(Error::invalid(format!(
                    "csr row {r} has unsorted or out-of-range columns"
                )));
            }
        }
        Ok(Self {
            nrows,
            ncols,
            offsets,
            indices,
            values,
        })
    }

    /// Stores the nonzero entries of `a` in row-major order.
    pub fn from_dense(a: ArrayView2<'_, f64>) -> Self {
        let (nrows, ncols) = a.dim();
        let mut offsets = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        offsets.push(0);
        for row in a.rows() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            offsets.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            offsets,
            indices,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.offsets[r]..self.offsets[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    /// Value at `(r, c)`, zero when not stored.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.nrows, self.ncols));
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                out[[r, c]] = v;
            }
        }
        out
    }

    /// Exact product `self * x`.
    pub fn matmul(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.matmul_scaled(None, x)
    }

    /// Product where each stored value `k` is first multiplied by
    /// `scale[k]`. Used for dropout on sparse inputs.
    pub fn matmul_scaled(&self, scale: Option<&[f64]>, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.ncols {
            return Err(Error::dims("sparse product", self.ncols, x.nrows()));
        }
        if let Some(s) = scale {
            if s.len() != self.nnz() {
                return Err(Error::dims("sparse product scale", self.nnz(), s.len()));
            }
        }
        let width = x.ncols();
        let x = x.as_standard_layout();
        let xs = x.as_slice().expect("standard layout");
        let mut out = vec![0.0; self.nrows * width];
        if width > 0 {
            out.par_chunks_mut(width).enumerate().for_each(|(r, acc)| {
                for k in self.offsets[r]..self.offsets[r + 1] {
                    let mut w = self.values[k];
                    if let Some(s) = scale {
                        w *= s[k];
                    }
                    if w == 0.0 {
                        continue;
                    }
                    let src = &xs[self.indices[k] * width..(self.indices[k] + 1) * width];
                    for (a, &b) in acc.iter_mut().zip(src) {
                        *a += w * b;
                    }
                }
            });
        }
        Ok(Array2::from_shape_vec((self.nrows, width), out).expect("shape"))
    }

    /// Transpose, together with the map from each transposed entry back to
    /// its position in `self.values()`.
    pub fn transpose_with_map(&self) -> (CsrMatrix, Vec<usize>) {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let offsets = counts.clone();
        let mut cursor = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        let mut map = vec![0; self.nnz()];
        for r in 0..self.nrows {
            for k in self.offsets[r]..self.offsets[r + 1] {
                let c = self.indices[k];
                let dst = cursor[c];
                cursor[c] += 1;
                indices[dst] = r;
                values[dst] = self.values[k];
                map[dst] = k;
            }
        }
        (
            CsrMatrix {
                nrows: self.ncols,
                ncols: self.nrows,
                offsets,
                indices,
                values,
            },
            map,
        )
    }
}
