use crate::error::{Error, Result};
use crate::ndcore::Mat;

/// Compressed sparse rows. Column indices are strictly increasing within a
/// row and every index is `< cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            row_offsets: vec![0; rows + 1],
            col_indices: Vec::new(),
            values: Vec::new(),
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

    /// Validates raw CSR arrays.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != rows + 1
            || row_offsets[0] != 0
            || *row_offsets.last().unwrap() != col_indices.len()
            || col_indices.len() != values.len()
        {
            return Err(Error::Contract("inconsistent CSR array lengths".into()));
        }
        for r in 0..rows {
            let (lo, hi) = (row_offsets[r], row_offsets[r + 1]);
            if lo > hi {
                return Err(Error::Contract(format!("row offsets decrease at row {r}")));
            }
            let cs = &col_indices[lo..hi];
            if cs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Contract(format!("row {r} columns not strictly increasing")));
            }
            if cs.last().is_some_and(|&c| c >= cols) {
                return Err(Error::Contract(format!("row {r} has a column index >= {cols}")));
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

    /// Builds from unordered `(row, col, value)` entries. Duplicate positions
    /// keep the first value.
    pub fn from_triplets(rows: usize, cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = entries.iter().find(|&&(r, c, _)| r >= rows || c >= cols) {
            return Err(Error::Dimension {
                op: "from_triplets",
                left: (rows, cols),
                right: (r, c),
            });
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        entries.dedup_by_key(|e| (e.0, e.1));
        let mut row_offsets = vec![0usize; rows + 1];
        for &(r, _, _) in &entries {
            row_offsets[r + 1] += 1;
        }
        for r in 0..rows {
            row_offsets[r + 1] += row_offsets[r];
        }
        let col_indices = entries.iter().map(|e| e.1).collect();
        let values = entries.iter().map(|e| e.2).collect();
        Ok(Self {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn from_dense(m: &Mat) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self::from_triplets(m.rows(), m.cols(), entries).expect("indices in range")
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    /// Column ids of row `r`.
    #[inline]
    pub fn row_cols(&self, r: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    #[inline]
    pub fn row_values(&self, r: usize) -> &[f64] {
        &self.values[self.row_offsets[r]..self.row_offsets[r + 1]]
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.row_offsets[r + 1] - self.row_offsets[r]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row_cols(r).binary_search(&c).is_ok()
    }

    pub fn select_rows(&self, ids: &[usize]) -> SparseRows {
        let mut row_offsets = Vec::with_capacity(ids.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for &i in ids {
            col_indices.extend_from_slice(self.row_cols(i));
            values.extend_from_slice(self.row_values(i));
            row_offsets.push(col_indices.len());
        }
        SparseRows {
            rows: ids.len(),
            cols: self.cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn to_dense(&self) -> Mat {
        let mut out = Mat::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (&c, &v) in self.row_cols(r).iter().zip(self.row_values(r)) {
                out.set(r, c, v);
            }
        }
        out
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|r| {
                self.row_cols(r).iter().zip(self.row_values(r)).all(|(&c, &v)| {
                    self.row_cols(c)
                        .binary_search(&r)
                        .is_ok_and(|k| self.row_values(c)[k] == v)
                })
            })
    }

    /// `self * b`, with `b` dense.
    pub fn matmul_dense(&self, b: &Mat) -> Result<Mat> {
        if self.cols != b.rows() {
            return Err(Error::Dimension {
                op: "sparse_dense_matmul",
                left: (self.rows, self.cols),
                right: b.shape(),
            });
        }
        let n = b.cols();
        let mut out = Mat::zeros(self.rows, n);
        for r in 0..self.rows {
            let orow = out.row_mut(r);
            for (&c, &v) in self.row_cols(r).iter().zip(self.row_values(r)) {
                for (o, &x) in orow.iter_mut().zip(b.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    /// `out += self^T * g`
    pub(crate) fn accumulate_transpose_product(&self, g: &Mat, out: &mut Mat) {
        for r in 0..self.rows {
            let grow = g.row(r);
            for (&c, &v) in self.row_cols(r).iter().zip(self.row_values(r)) {
                for (o, &x) in out.row_mut(c).iter_mut().zip(grow) {
                    *o += v * x;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_sorted_and_deduplicated() {
        let s = SparseRows::from_triplets(2, 3, vec![(0, 2, 1.0), (0, 0, 1.0), (0, 2, 1.0), (1, 1, 2.0)]).unwrap();
        assert_eq!(s.row_cols(0), &[0, 2]);
        assert_eq!(s.row_cols(1), &[1]);
        assert_eq!(s.nnz(), 3);
    }

    #[test]
    fn from_parts_validates() {
        assert!(SparseRows::from_parts(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseRows::from_parts(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(SparseRows::from_parts(1, 3, vec![0, 2], vec![0, 2], vec![1.0, 1.0]).is_ok());
    }

    #[test]
    fn empty_row_times_anything_is_zero() {
        let s = SparseRows::empty(1, 4);
        let b = Mat::filled(4, 3, 2.5);
        assert_eq!(s.matmul_dense(&b).unwrap(), Mat::zeros(1, 3));
    }

    #[test]
    fn identity_times_b_is_b() {
        let b = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        assert_eq!(SparseRows::identity(3).matmul_dense(&b).unwrap(), b);
    }

    #[test]
    fn shape_mismatch_is_dimension_error() {
        let s = SparseRows::empty(2, 3);
        assert!(matches!(
            s.matmul_dense(&Mat::zeros(2, 2)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn symmetry_check() {
        let sym = SparseRows::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let asym = SparseRows::from_triplets(2, 2, vec![(0, 1, 1.0)]).unwrap();
        assert!(sym.is_symmetric());
        assert!(!asym.is_symmetric());
    }
}
