//! Dense data container, reproducible sampling and dataset ingestion.
//!
//! A [`DataMatrix`] stores a `D x N` real matrix column-major by point: the
//! `D` features of point `n` are contiguous. Every sketching routine in the
//! crate works on row subsets (feature sketches) or column subsets (point
//! sketches) of such a matrix.

mod io;
mod sample;

pub use io::{load_dense, load_libsvm, write_dense_csv, DenseFormat, Delimiter, Orientation};
pub use sample::{sample_indices, IndexSet, RngSeed};

use crate::error::{invalid, Result};

/// Dense `rows x cols` matrix, columns are data points.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    /// Builds a matrix from column-major values (point after point).
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid(format!("matrix must be non-empty, got {rows}x{cols}")));
        }
        if values.len() != rows * cols {
            return Err(invalid(format!(
                "expected {} values for a {rows}x{cols} matrix, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!(
                "non-finite value at row {}, column {}",
                pos % rows,
                pos / rows
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix whose columns are the given points.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut values = Vec::with_capacity(rows * columns.len());
        for (n, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(invalid(format!(
                    "column {n} has {} entries, expected {rows}",
                    c.len()
                )));
            }
            values.extend_from_slice(c);
        }
        Self::new(rows, columns.len(), values)
    }

    /// Builds a matrix from row-major nested rows (`rows[i][n]` is feature `i` of point `n`).
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut values = vec![0.0; d * n];
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != n {
                return Err(invalid(format!("row {i} has {} entries, expected {n}", r.len())));
            }
            for (j, &v) in r.iter().enumerate() {
                values[j * d + i] = v;
            }
        }
        Self::new(d, n, values)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix must be non-empty");
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    /// Number of features (D).
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of points (N).
    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn col(&self, n: usize) -> &[f64] {
        &self.values[n * self.rows..(n + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, n: usize) -> &mut [f64] {
        let r = self.rows;
        &mut self.values[n * r..(n + 1) * r]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.values[col * self.rows + row] = v;
    }

    pub fn columns(&self) -> std::slice::ChunksExact<'_, f64> {
        self.values.chunks_exact(self.rows)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    /// Copies row `i` (one feature across all points).
    pub fn row(&self, i: usize) -> Vec<f64> {
        self.columns().map(|c| c[i]).collect()
    }

    /// Rows `idx` laid out back to back, each of length `cols`, read in one
    /// pass over the points.
    pub(crate) fn rows_packed(&self, idx: &[usize]) -> Vec<f64> {
        let n = self.cols;
        let mut out = vec![0.0; idx.len() * n];
        for (p, c) in self.columns().enumerate() {
            for (j, &i) in idx.iter().enumerate() {
                out[j * n + p] = c[i];
            }
        }
        out
    }

    /// Keeps the rows listed in `idx`, in that order.
    pub fn restrict_rows(&self, idx: &IndexSet) -> Result<Self> {
        if idx.universe() != self.rows {
            return Err(invalid(format!(
                "row index universe {} does not match matrix rows {}",
                idx.universe(),
                self.rows
            )));
        }
        self.select_rows(idx.as_slice())
    }

    pub(crate) fn select_rows(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&i| i >= self.rows) {
            return Err(invalid(format!("row index {bad} out of range {}", self.rows)));
        }
        if idx.is_empty() {
            return Err(invalid("cannot restrict to zero rows"));
        }
        let mut values = Vec::with_capacity(idx.len() * self.cols);
        for c in self.columns() {
            values.extend(idx.iter().map(|&i| c[i]));
        }
        Ok(Self {
            rows: idx.len(),
            cols: self.cols,
            values,
        })
    }

    /// Keeps the columns (points) listed in `idx`, in that order.
    pub fn restrict_cols(&self, idx: &IndexSet) -> Result<Self> {
        if idx.universe() != self.cols {
            return Err(invalid(format!(
                "column index universe {} does not match matrix cols {}",
                idx.universe(),
                self.cols
            )));
        }
        self.select_cols(idx.as_slice())
    }

    pub(crate) fn select_cols(&self, idx: &[usize]) -> Result<Self> {
        if let Some(&bad) = idx.iter().find(|&&n| n >= self.cols) {
            return Err(invalid(format!("column index {bad} out of range {}", self.cols)));
        }
        if idx.is_empty() {
            return Err(invalid("cannot restrict to zero columns"));
        }
        let mut values = Vec::with_capacity(idx.len() * self.rows);
        for &n in idx {
            values.extend_from_slice(self.col(n));
        }
        Ok(Self {
            rows: self.rows,
            cols: idx.len(),
            values,
        })
    }

    /// Per-feature mean across points.
    pub fn row_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.rows];
        for c in self.columns() {
            for (m, v) in mean.iter_mut().zip(c) {
                *m += v;
            }
        }
        let inv = 1.0 / self.cols as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        mean
    }

    /// Subtracts the sample mean point from every column.
    ///
    /// Each row's leftover sum (from rounding) is folded into its
    /// smallest-magnitude entry, so rows sum to zero up to that entry's ulp.
    pub fn center_columns(&self) -> Self {
        let mut out = self.clone();
        let mut row = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (r, c) in row.iter_mut().zip(self.columns()) {
                *r = c[i];
            }
            let mean = compensated_sum(&row) / self.cols as f64;
            row.iter_mut().for_each(|v| *v -= mean);
            for _ in 0..2 {
                let resid = compensated_sum(&row);
                if resid == 0.0 {
                    break;
                }
                let j = (0..row.len())
                    .min_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()))
                    .expect("non-empty row");
                row[j] -= resid;
            }
            for (r, c) in row.iter().zip(out.values.chunks_exact_mut(self.rows)) {
                c[i] = *r;
            }
        }
        out
    }

    /// Scales every feature to zero mean and unit sample variance.
    /// Constant features are only centered.
    pub fn standardize_rows(&self) -> Self {
        let mut out = self.center_columns();
        let mut ss = vec![0.0; self.rows];
        for c in out.columns() {
            for (s, v) in ss.iter_mut().zip(c) {
                *s += v * v;
            }
        }
        let denom = (self.cols.max(2) - 1) as f64;
        let scale: Vec<f64> = ss
            .iter()
            .map(|s| {
                let sd = (s / denom).sqrt();
                if sd > 0.0 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        for c in out.values.chunks_exact_mut(self.rows) {
            for (v, s) in c.iter_mut().zip(&scale) {
                *v *= s;
            }
        }
        out
    }

    /// Stacks `self` on top of `below` (same number of points).
    pub fn vstack(&self, below: &Self) -> Result<Self> {
        if below.cols != self.cols {
            return Err(invalid(format!(
                "cannot stack {} columns onto {}",
                below.cols, self.cols
            )));
        }
        let rows = self.rows + below.rows;
        let mut values = Vec::with_capacity(rows * self.cols);
        for (a, b) in self.columns().zip(below.columns()) {
            values.extend_from_slice(a);
            values.extend_from_slice(b);
        }
        Ok(Self {
            rows,
            cols: self.cols,
            values,
        })
    }

    /// Appends the points of `right` after the points of `self`.
    pub fn hstack(&self, right: &Self) -> Result<Self> {
        if right.rows != self.rows {
            return Err(invalid(format!(
                "cannot concatenate {}-dimensional points with {}-dimensional points",
                right.rows, self.rows
            )));
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&right.values);
        Ok(Self {
            rows: self.rows,
            cols: self.cols + right.cols,
            values,
        })
    }

    /// Pads every point with `extra` trailing zero coordinates.
    pub fn zero_pad_rows(&self, extra: usize) -> Self {
        if extra == 0 {
            return self.clone();
        }
        let rows = self.rows + extra;
        let mut values = Vec::with_capacity(rows * self.cols);
        for c in self.columns() {
            values.extend_from_slice(c);
            values.extend(std::iter::repeat_n(0.0, extra));
        }
        Self {
            rows,
            cols: self.cols,
            values,
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Squared Euclidean distance with four independent accumulators so the
/// loop vectorizes.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            let d = x[j] - y[j];
            acc[j] += d * d;
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Inner product, vectorizable like [`sq_dist`].
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for j in 0..4 {
            acc[j] += x[j] * y[j];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(DataMatrix::new(0, 3, vec![]).is_err());
        assert!(DataMatrix::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(DataMatrix::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn restrict_rows_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let r = x.restrict_rows(&IndexSet::new(vec![0, 2], 3).unwrap()).unwrap();
        assert_eq!(r, m(&[&[1.0, 2.0], &[5.0, 6.0]]));

        let all = IndexSet::new(vec![0, 1, 2], 3).unwrap();
        assert_eq!(x.restrict_rows(&all).unwrap(), x);

        let y = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let r = y.restrict_rows(&IndexSet::new(vec![1], 2).unwrap()).unwrap();
        assert_eq!(r, m(&[&[3.0, 4.0]]));
    }

    #[test]
    fn rows_packed_matches_row() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let packed = x.rows_packed(&[2, 0]);
        assert_eq!(packed, [x.row(2), x.row(0)].concat());
        assert!(x.rows_packed(&[]).is_empty());
    }

    #[test]
    fn restrict_rows_rejects_wrong_universe() {
        let x = m(&[&[1.0], &[2.0]]);
        assert!(x.restrict_rows(&IndexSet::new(vec![0], 3).unwrap()).is_err());
        assert!(x.select_rows(&[5]).is_err());
    }

    #[test]
    fn restrict_cols_examples() {
        let x = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let all = IndexSet::new(vec![0, 1], 2).unwrap();
        assert_eq!(x.restrict_cols(&all).unwrap(), x);
        let r = x.restrict_cols(&IndexSet::new(vec![1], 2).unwrap()).unwrap();
        assert_eq!(r.col(0), &[2.0, 4.0]);
        assert_eq!(r.cols(), 1);
    }

    #[test]
    fn center_columns_examples() {
        let x = m(&[&[1.0, 3.0]]);
        assert_eq!(x.center_columns(), m(&[&[-1.0, 1.0]]));

        let once = x.center_columns();
        let twice = once.center_columns();
        for (a, b) in once.as_slice().iter().zip(twice.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }

        let single = m(&[&[4.0], &[-2.0]]);
        assert_eq!(single.center_columns(), DataMatrix::zeros(2, 1));
    }

    #[test]
    fn stacking_and_padding() {
        let a = m(&[&[1.0, 2.0]]);
        let b = m(&[&[3.0, 4.0]]);
        assert_eq!(a.vstack(&b).unwrap(), m(&[&[1.0, 2.0], &[3.0, 4.0]]));
        assert_eq!(a.hstack(&b).unwrap(), m(&[&[1.0, 2.0, 3.0, 4.0]]));
        let p = DataMatrix::from_columns(&[[1.0, 2.0]]).unwrap().zero_pad_rows(2);
        assert_eq!(p.col(0), &[1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn standardize_gives_unit_variance() {
        let x = m(&[&[1.0, 2.0, 3.0, 4.0], &[5.0, 5.0, 5.0, 5.0]]);
        let s = x.standardize_rows();
        let r0 = s.row(0);
        let var: f64 = r0.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert!(s.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sq_dist_matches_naive() {
        let a: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..11).map(|i| (i * i) as f64 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        assert!((sq_dist(&a, &b) - naive).abs() < 1e-9);
        let naive_dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive_dot).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn restrict_rows_composes(
            d in 2usize..8,
            n in 1usize..6,
            seed in any::<u64>(),
        ) {
            let values: Vec<f64> = (0..d * n).map(|i| i as f64).collect();
            let x = DataMatrix::new(d, n, values).unwrap();
            let a = sample_indices(d, d.min(5), &IndexSet::empty(d), &RngSeed::new(seed)).unwrap();
            let b = sample_indices(a.len(), a.len().min(3), &IndexSet::empty(a.len()), &RngSeed::new(seed ^ 1)).unwrap();
            let composed: Vec<usize> = b.as_slice().iter().map(|&j| a.as_slice()[j]).collect();
            let lhs = x.restrict_rows(&a).unwrap().restrict_rows(&b).unwrap();
            let rhs = x.restrict_rows(&IndexSet::new(composed, d).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn centered_row_sums_vanish(
            vals in proptest::collection::vec(-1e6f64..1e6, 1..400),
            d in 1usize..4,
        ) {
            let n = vals.len() / d;
            prop_assume!(n >= 1);
            let x = DataMatrix::new(d, n, vals[..d * n].to_vec()).unwrap();
            let c = x.center_columns();
            for i in 0..d {
                let s = compensated_sum(&c.row(i));
                prop_assert!(s.abs() <= 1e-10, "row {} sum {}", i, s);
            }
        }
    }
}
