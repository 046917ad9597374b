//! Row-compressed sparse matrices over band indices.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// What a matrix represents; carried for diagnostics and dumps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorRole {
    Identity,
    Laplacian,
    DiffForward(usize),
    DiffBackward(usize),
    AvgForward(usize),
    Extension(usize),
    Diagonal,
    Assembled,
}

/// CSR matrix. Column indices are strictly increasing within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    role: OperatorRole,
}

impl SparseOperator {
    /// Builds from per-row `(col, value)` lists. Duplicates are summed and exact
    /// zeros dropped.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>, role: OperatorRole) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                assert!(c < ncols, "column {c} out of range {ncols}");
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            // drop exact zeros from this row
            let start = *row_ptr.last().unwrap();
            let mut w = start;
            for r in start..col_idx.len() {
                if values[r] != 0.0 {
                    col_idx[w] = col_idx[r];
                    values[w] = values[r];
                    w += 1;
                }
            }
            col_idx.truncate(w);
            values.truncate(w);
            row_ptr.push(w);
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
            role,
        }
    }

    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
        role: OperatorRole,
    ) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in triplets {
            rows[r].push((c, v));
        }
        Self::from_rows(ncols, rows, role)
    }

    /// Wraps raw CSR arrays; columns must be sorted and unique within each row.
    pub(crate) fn from_csr_unchecked(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_ptr.len(), n + 1);
        Self {
            nrows: n,
            ncols: n,
            row_ptr,
            col_idx,
            values,
            role: OperatorRole::Assembled,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n]).with_role(OperatorRole::Identity)
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let rows = d.iter().enumerate().map(|(i, &v)| vec![(i, v)]).collect();
        Self::from_rows(d.len(), rows, OperatorRole::Diagonal)
    }

    pub fn with_role(mut self, role: OperatorRole) -> Self {
        self.role = role;
        self
    }

    pub fn role(&self) -> OperatorRole {
        self.role
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

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b]
            .iter()
            .copied()
            .zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[a..b].binary_search(&c) {
            Ok(k) => self.values[a + k],
            Err(_) => 0.0,
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows)
            .map(|r| self.row(r).map(|e| e.1).sum())
            .collect()
    }

    /// y = A x
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let rp = &self.row_ptr;
        let ci = &self.col_idx;
        let va = &self.values;
        y.par_iter_mut()
            .with_min_len(1024)
            .enumerate()
            .for_each(|(r, yr)| {
                let mut s = 0.0;
                for k in rp[r]..rp[r + 1] {
                    s += va[k] * x[ci[k]];
                }
                *yr = s;
            });
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn check_square(&self, n: usize) -> Result<()> {
        if self.nrows != n || self.ncols != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if self.nrows != n {
                    self.nrows
                } else {
                    self.ncols
                },
            });
        }
        Ok(())
    }

    /// Sparse product `self · other`.
    pub fn mul(&self, other: &SparseOperator) -> Result<SparseOperator> {
        if self.ncols != other.nrows {
            return Err(Error::DimensionMismatch {
                expected: self.ncols,
                found: other.nrows,
            });
        }
        let nc = other.ncols;
        let rows: Vec<Vec<(usize, f64)>> = (0..self.nrows)
            .into_par_iter()
            .with_min_len(256)
            .map_init(
                || (vec![0.0f64; nc], vec![usize::MAX; nc]),
                |(acc, mark), r| {
                    let mut cols = Vec::new();
                    for (k, a) in self.row(r) {
                        for (c, b) in other.row(k) {
                            if mark[c] != r {
                                mark[c] = r;
                                acc[c] = 0.0;
                                cols.push(c);
                            }
                            acc[c] += a * b;
                        }
                    }
                    cols.sort_unstable();
                    cols.into_iter().map(|c| (c, acc[c])).collect()
                },
            )
            .collect();
        Ok(Self::from_rows(nc, rows, OperatorRole::Assembled))
    }

    /// `alpha·self + beta·other`.
    pub fn lin_comb(
        &self,
        alpha: f64,
        other: &SparseOperator,
        beta: f64,
    ) -> Result<SparseOperator> {
        if self.nrows != other.nrows || self.ncols != other.ncols {
            return Err(Error::DimensionMismatch {
                expected: self.nrows,
                found: other.nrows,
            });
        }
        let rows = (0..self.nrows)
            .map(|r| {
                self.row(r)
                    .map(|(c, v)| (c, alpha * v))
                    .chain(other.row(r).map(|(c, v)| (c, beta * v)))
                    .collect()
            })
            .collect();
        Ok(Self::from_rows(self.ncols, rows, OperatorRole::Assembled))
    }

    pub fn scaled(&self, s: f64) -> SparseOperator {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out.role = OperatorRole::Assembled;
        out
    }

    /// `diag(d) · self`
    pub fn scale_rows(&self, d: &[f64]) -> SparseOperator {
        assert_eq!(d.len(), self.nrows);
        let mut out = self.clone();
        for r in 0..self.nrows {
            for k in out.row_ptr[r]..out.row_ptr[r + 1] {
                out.values[k] *= d[r];
            }
        }
        out.role = OperatorRole::Assembled;
        out
    }

    pub fn transpose(&self) -> SparseOperator {
        let mut rows = vec![Vec::new(); self.ncols];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v));
            }
        }
        Self::from_rows(self.nrows, rows, self.role)
    }

    /// Block-diagonal matrix from square blocks.
    pub fn block_diag(blocks: &[&SparseOperator]) -> SparseOperator {
        let ncols: usize = blocks.iter().map(|b| b.ncols).sum();
        let mut rows = Vec::new();
        let mut off = 0;
        for b in blocks {
            for r in 0..b.nrows {
                rows.push(b.row(r).map(|(c, v)| (c + off, v)).collect());
            }
            off += b.ncols;
        }
        Self::from_rows(ncols, rows, OperatorRole::Assembled)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                d[r][c] = v;
            }
        }
        d
    }

    /// Largest entrywise difference, treating missing entries as zero.
    pub fn max_abs_diff(&self, other: &SparseOperator) -> f64 {
        let diff = self.lin_comb(1.0, other, -1.0).expect("shapes must match");
        diff.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// MatrixMarket coordinate format (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "% role: {:?}", self.role)?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for r in 0..self.nrows {
            for (c, v) in self.row(r) {
                writeln!(w, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let (n, m, p) = (a.len(), b.len(), b[0].len());
        let mut c = vec![vec![0.0; p]; n];
        for i in 0..n {
            for k in 0..m {
                for j in 0..p {
                    c[i][j] += a[i][k] * b[k][j];
                }
            }
        }
        c
    }

    fn arb_matrix(n: usize) -> impl Strategy<Value = SparseOperator> {
        prop::collection::vec((0..n, 0..n, -2.0f64..2.0), 0..3 * n)
            .prop_map(move |t| SparseOperator::from_triplets(n, n, &t, OperatorRole::Assembled))
    }

    proptest! {
        #[test]
        fn product_matches_dense(a in arb_matrix(7), b in arb_matrix(7)) {
            let c = a.mul(&b).unwrap().to_dense();
            let e = dense_mul(&a.to_dense(), &b.to_dense());
            for i in 0..7 {
                for j in 0..7 {
                    prop_assert!((c[i][j] - e[i][j]).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn matvec_is_linear(a in arb_matrix(6), x in prop::collection::vec(-1.0f64..1.0, 6)) {
            let y = a.apply(&x);
            let d = a.to_dense();
            for i in 0..6 {
                let e: f64 = (0..6).map(|j| d[i][j] * x[j]).sum();
                prop_assert!((y[i] - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duplicates_merge_and_zeros_drop() {
        let m = SparseOperator::from_triplets(
            2,
            3,
            &[
                (0, 2, 1.0),
                (0, 0, 2.0),
                (0, 2, -1.0),
                (1, 1, 3.0),
                (1, 1, 1.0),
            ],
            OperatorRole::Assembled,
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 0), 2.0);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(0, 2), 0.0);
    }

    #[test]
    fn transpose_and_block_diag() {
        let a = SparseOperator::from_triplets(2, 2, &[(0, 1, 5.0)], OperatorRole::Assembled);
        assert_eq!(a.transpose().get(1, 0), 5.0);
        let i = SparseOperator::identity(1);
        let b = SparseOperator::block_diag(&[&a, &i]);
        assert_eq!(b.nrows(), 3);
        assert_eq!(b.get(0, 1), 5.0);
        assert_eq!(b.get(2, 2), 1.0);
    }

    #[test]
    fn matrix_market_header() {
        let a = SparseOperator::identity(2);
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("%%MatrixMarket matrix coordinate real general"));
        assert!(s.contains("\n2 2 2\n"));
    }
}
