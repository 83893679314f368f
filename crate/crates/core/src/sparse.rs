//! General rectangular CSR matrices with real values.
//!
//! Used for node features (bag-of-words rows are ~1% dense) and, wrapped by
//! [`NormalizedAdjacency`](crate::graph::NormalizedAdjacency), for the
//! propagation matrix.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::DenseMatrix;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from raw CSR arrays. Column indices must be sorted
    /// and unique within each row.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1
            || col_indices.len() != values.len()
            || row_offsets.last().copied() != Some(col_indices.len())
        {
            return Err(Error::ShapeMismatch {
                op: "CsrMatrix::from_parts",
                left: (rows, cols),
                right: (row_offsets.len(), col_indices.len()),
            });
        }
        for r in 0..rows {
            let cols_r = &col_indices[row_offsets[r]..row_offsets[r + 1]];
            if cols_r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidDataset(format!(
                    "row {r} has unsorted or duplicate columns"
                )));
            }
            if let Some(&c) = cols_r.last() {
                if c >= cols {
                    return Err(Error::IndexOutOfRange { index: c, len: cols });
                }
            }
        }
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Keeps the nonzero entries of `dense`.
    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(dense.rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..dense.rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Self {
            rows: dense.rows(),
            cols: dense.cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                out[(i, j)] = v;
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        (&self.col_indices[span.clone()], &self.values[span])
    }

    /// Entry `(i, j)`, zero when not stored.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    /// Sparse-dense product `self · m`.
    pub fn mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != m.rows() {
            return Err(Error::ShapeMismatch {
                op: "spmm",
                left: self.shape(),
                right: m.shape(),
            });
        }
        let width = m.cols();
        let mut out = DenseMatrix::zeros(self.rows, width);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let out_row = out.row_mut(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &x) in out_row.iter_mut().zip(m.row(j)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Transposed product `selfᵀ · m`.
    pub fn t_mul_dense(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != m.rows() {
            return Err(Error::ShapeMismatch {
                op: "spmm_t",
                left: self.shape(),
                right: m.shape(),
            });
        }
        let width = m.cols();
        let mut out = DenseMatrix::zeros(self.cols, width);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            let m_row = m.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                for (o, &x) in out.row_mut(j).iter_mut().zip(m_row) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// Product of a single row with `m`, written into `out`.
    pub fn row_mul_dense(&self, i: usize, m: &DenseMatrix, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        let (cols, vals) = self.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            for (o, &x) in out.iter_mut().zip(m.row(j)) {
                *o += v * x;
            }
        }
    }

    /// Scales each row to unit L1 norm; all-zero rows stay zero.
    pub fn row_normalized(&self) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            let span = self.row_offsets[i]..self.row_offsets[i + 1];
            let sum: f64 = out.values[span.clone()].iter().sum();
            if sum != 0.0 {
                out.values[span].iter_mut().for_each(|v| *v /= sum);
            }
        }
        out
    }

    /// Copy with the given rows emptied.
    pub fn with_rows_zeroed(&self, rows: &[usize]) -> CsrMatrix {
        let mut drop = vec![false; self.rows];
        for &r in rows {
            drop[r] = true;
        }
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for i in 0..self.rows {
            if !drop[i] {
                let (cols, vals) = self.row(i);
                col_indices.extend_from_slice(cols);
                values.extend_from_slice(vals);
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Copy with row `i` replaced by the given sorted sparse row.
    pub fn with_row_replaced(&self, i: usize, cols: &[usize], vals: &[f64]) -> CsrMatrix {
        let (old_cols, _) = self.row(i);
        let delta = cols.len() as isize - old_cols.len() as isize;
        let mut row_offsets = self.row_offsets.clone();
        for off in &mut row_offsets[i + 1..] {
            *off = (*off as isize + delta) as usize;
        }
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        let mut col_indices = self.col_indices.clone();
        col_indices.splice(span.clone(), cols.iter().copied());
        let mut values = self.values.clone();
        values.splice(span, vals.iter().copied());
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Copy with each listed binary entry toggled: stored nonzeros are
    /// removed and absent entries become 1. Entries must be distinct.
    pub fn with_entries_toggled(&self, entries: &[(usize, usize)]) -> Result<CsrMatrix> {
        let mut by_row: Vec<Vec<usize>> = vec![Vec::new(); self.rows];
        for &(i, j) in entries {
            if i >= self.rows || j >= self.cols {
                return Err(Error::IndexOutOfRange {
                    index: if i >= self.rows { i } else { j },
                    len: if i >= self.rows { self.rows } else { self.cols },
                });
            }
            if by_row[i].contains(&j) {
                return Err(Error::ConflictingFeatureFlip(i, j));
            }
            by_row[i].push(j);
        }
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz() + entries.len());
        let mut values = Vec::with_capacity(self.nnz() + entries.len());
        row_offsets.push(0);
        for (i, toggles) in by_row.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            if toggles.is_empty() {
                col_indices.extend_from_slice(cols);
                values.extend_from_slice(vals);
            } else {
                toggles.sort_unstable();
                let mut row: Vec<(usize, f64)> = cols
                    .iter()
                    .zip(vals)
                    .filter(|(j, _)| toggles.binary_search(j).is_err())
                    .map(|(&j, &v)| (j, v))
                    .collect();
                for &j in toggles.iter() {
                    if cols.binary_search(&j).is_err() {
                        row.push((j, 1.0));
                    }
                }
                row.sort_unstable_by_key(|e| e.0);
                for (j, v) in row {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        Ok(CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Inverted dropout on the stored entries: each is dropped with
    /// probability `p`, survivors are scaled by `1 / (1 - p)`. Dropped
    /// entries are removed from the result.
    pub fn dropout(&self, p: f64, rng: &mut Rng) -> CsrMatrix {
        if p <= 0.0 {
            return self.clone();
        }
        let keep = 1.0 / (1.0 - p);
        let mut row_offsets = Vec::with_capacity(self.rows + 1);
        let mut col_indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_offsets.push(0);
        for i in 0..self.rows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if rng.gen::<f64>() >= p {
                    col_indices.push(j);
                    values.push(v * keep);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_dense(&DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 2.0],
            vec![0.0, 0.0, 0.0],
            vec![0.0, 3.0, 1.0],
        ]))
    }

    #[test]
    fn dense_round_trip() {
        let m = sample();
        assert_eq!(m.nnz(), 4);
        assert_eq!(CsrMatrix::from_dense(&m.to_dense()), m);
        assert_eq!(m.get(2, 1), 3.0);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn products_match_dense() {
        let m = sample();
        let b = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert_eq!(m.mul_dense(&b).unwrap(), m.to_dense().matmul(&b).unwrap());
        assert_eq!(m.t_mul_dense(&b).unwrap(), m.to_dense().t_matmul(&b).unwrap());
        let mut row = vec![0.0; 2];
        m.row_mul_dense(2, &b, &mut row);
        assert_eq!(row, vec![14.0, 18.0]);
    }

    #[test]
    fn row_edits() {
        let m = sample();
        let n = m.row_normalized();
        assert_eq!(n.row(0).1, &[1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(n.row(1).1, &[] as &[f64]);
        let z = m.with_rows_zeroed(&[0]);
        assert_eq!(z.nnz(), 2);
        let r = m.with_row_replaced(1, &[0, 2], &[7.0, 8.0]);
        assert_eq!(r.get(1, 2), 8.0);
        assert_eq!(r.get(2, 1), 3.0);
        assert_eq!(r.nnz(), 6);
    }

    #[test]
    fn dropout_keeps_expectation_shape() {
        let m = sample();
        let mut rng = rng::stream(1, 0);
        let d = m.dropout(0.5, &mut rng);
        assert_eq!(d.shape(), m.shape());
        assert!(d.nnz() <= m.nnz());
        for i in 0..m.rows() {
            let (cols, vals) = d.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                assert_eq!(v, 2.0 * m.get(i, j));
            }
        }
        assert_eq!(m.dropout(0.0, &mut rng), m);
    }

    #[test]
    fn toggling_entries() {
        let m = sample();
        let t = m.with_entries_toggled(&[(0, 0), (1, 1), (2, 0)]).unwrap();
        assert_eq!(
            t.to_dense(),
            DenseMatrix::from_rows(&[
                vec![0.0, 0.0, 2.0],
                vec![0.0, 1.0, 0.0],
                vec![1.0, 3.0, 1.0],
            ])
        );
        assert_eq!(m.with_entries_toggled(&[]).unwrap(), m);
        assert!(matches!(
            m.with_entries_toggled(&[(0, 1), (0, 1)]),
            Err(Error::ConflictingFeatureFlip(0, 1))
        ));
        assert!(m.with_entries_toggled(&[(5, 0)]).is_err());
    }

    #[test]
    fn rejects_unsorted_rows() {
        assert!(CsrMatrix::from_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::from_parts(1, 2, vec![0, 1], vec![5], vec![1.0]).is_err());
    }
}
