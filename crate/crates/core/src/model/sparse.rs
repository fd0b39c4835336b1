//! Compressed vector and matrix kernels.
//!
//! Everything the solver touches per belief runs through these few routines,
//! so they are kept allocation-light and branch-simple. Indices are always
//! strictly increasing and explicit zeros are never stored.

use serde::{Deserialize, Serialize};

/// Entries with magnitude below this are dropped from sparse vectors.
pub const SPARSE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    len: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Builds a vector from unordered `(index, value)` pairs. Duplicate
    /// indices are summed; sums below [`SPARSE_EPS`] in magnitude are dropped.
    pub fn from_pairs(len: usize, mut pairs: Vec<(usize, f64)>) -> Self {
        pairs.sort_unstable_by_key(|&(i, _)| i);
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut iter = pairs.into_iter().peekable();
        while let Some((i, mut v)) = iter.next() {
            assert!(i < len, "sparse index {i} out of range for length {len}");
            while let Some(&(j, w)) = iter.peek() {
                if j != i {
                    break;
                }
                v += w;
                iter.next();
            }
            if v.abs() >= SPARSE_EPS {
                indices.push(i);
                values.push(v);
            }
        }
        Self {
            len,
            indices,
            values,
        }
    }

    /// Builds a vector from pairs already sorted by strictly increasing index.
    /// Small entries are still filtered.
    pub fn from_sorted(len: usize, indices: Vec<usize>, values: Vec<f64>) -> Self {
        debug_assert_eq!(indices.len(), values.len());
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(indices.last().is_none_or(|&i| i < len));
        if values.iter().all(|v| v.abs() >= SPARSE_EPS) {
            return Self {
                len,
                indices,
                values,
            };
        }
        let (indices, values) = indices
            .into_iter()
            .zip(values)
            .filter(|(_, v)| v.abs() >= SPARSE_EPS)
            .unzip();
        Self {
            len,
            indices,
            values,
        }
    }

    pub fn from_dense(dense: &[f64]) -> Self {
        let (indices, values) = dense
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= SPARSE_EPS)
            .map(|(i, &v)| (i, v))
            .unzip();
        Self {
            len: dense.len(),
            indices,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn get(&self, i: usize) -> f64 {
        match self.indices.binary_search(&i) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.len];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        debug_assert_eq!(dense.len(), self.len);
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn dot_sparse(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    pub fn l1_distance(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < self.indices.len() || j < other.indices.len() {
            let a = self.indices.get(i).copied().unwrap_or(usize::MAX);
            let b = other.indices.get(j).copied().unwrap_or(usize::MAX);
            match a.cmp(&b) {
                std::cmp::Ordering::Less => {
                    acc += self.values[i].abs();
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    acc += other.values[j].abs();
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    acc += (self.values[i] - other.values[j]).abs();
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }

    /// True when every stored index of `self` is also stored in `other`.
    pub fn support_subset_of(&self, other: &SparseVector) -> bool {
        is_sorted_subset(&self.indices, &other.indices)
    }
}

/// `small ⊆ large` for strictly increasing index lists.
pub fn is_sorted_subset(small: &[usize], large: &[usize]) -> bool {
    if small.len() > large.len() {
        return false;
    }
    let mut j = 0;
    for &i in small {
        while j < large.len() && large[j] < i {
            j += 1;
        }
        if j == large.len() || large[j] != i {
            return false;
        }
        j += 1;
    }
    true
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from one unordered pair list per row.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let nrows = rows.len();
        for row in rows {
            let sv = SparseVector::from_pairs(cols, row);
            col_idx.extend_from_slice(sv.indices());
            vals.extend_from_slice(sv.values());
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: nrows,
            cols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            vals: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    #[inline]
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.vals[lo..hi])
    }

    pub fn row_iter(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(r);
        c.iter().copied().zip(v.iter().copied())
    }

    pub fn row_sum(&self, r: usize) -> f64 {
        self.row(r).1.iter().sum()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// `x^T M` for sparse `x`, i.e. the row combination `Σ_r x(r) M[r, ·]`.
    pub fn left_multiply(&self, x: &SparseVector) -> SparseVector {
        debug_assert_eq!(x.len(), self.rows);
        if x.nnz() == 1 {
            let (r, w) = (x.indices()[0], x.values()[0]);
            let (cols, vals) = self.row(r);
            return SparseVector::from_sorted(
                self.cols,
                cols.to_vec(),
                vals.iter().map(|v| v * w).collect(),
            );
        }
        let mut pairs = Vec::with_capacity(x.nnz() * 2);
        for (r, w) in x.iter() {
            pairs.extend(self.row_iter(r).map(|(c, v)| (c, v * w)));
        }
        SparseVector::from_pairs(self.cols, pairs)
    }

    /// `M y` for dense `y`.
    pub fn right_multiply_dense(&self, y: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.cols);
        for (r, o) in out.iter_mut().enumerate().take(self.rows) {
            let (cols, vals) = self.row(r);
            *o = cols.iter().zip(vals).map(|(&c, &v)| v * y[c]).sum();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pairs_merge_and_drop_zeros() {
        let v = SparseVector::from_pairs(5, vec![(3, 0.5), (1, 0.25), (3, 0.25), (4, 0.0)]);
        assert_eq!(v.indices(), &[1, 3]);
        assert_eq!(v.values(), &[0.25, 0.75]);
        assert_eq!(v.get(4), 0.0);
    }

    #[test]
    fn subset_check() {
        assert!(is_sorted_subset(&[1, 3], &[0, 1, 2, 3]));
        assert!(!is_sorted_subset(&[1, 4], &[0, 1, 2, 3]));
        assert!(is_sorted_subset(&[], &[0]));
        assert!(!is_sorted_subset(&[0, 1], &[1]));
    }

    #[test]
    fn left_multiply_matches_dense() {
        let m = CsrMatrix::from_rows(
            3,
            vec![vec![(0, 0.5), (2, 0.5)], vec![(1, 1.0)], vec![(0, 1.0)]],
        );
        let x = SparseVector::from_dense(&[0.2, 0.3, 0.5]);
        let y = m.left_multiply(&x);
        assert_eq!(y.to_dense(), vec![0.6, 0.3, 0.1]);
    }

    fn dense_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(prop_oneof![Just(0.0), -10.0f64..10.0], n)
    }

    proptest! {
        #[test]
        fn sparse_dot_equals_dense_dot(a in dense_vec(40), b in dense_vec(40)) {
            let dense: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
            let sa = SparseVector::from_dense(&a);
            let sb = SparseVector::from_dense(&b);
            let scale = a.iter().zip(&b).map(|(x, y)| (x * y).abs()).sum::<f64>().max(1.0);
            prop_assert!((sa.dot_sparse(&sb) - dense).abs() <= 1e-12 * scale);
            prop_assert!((sa.dot_dense(&b) - dense).abs() <= 1e-12 * scale);
        }

        #[test]
        fn l1_distance_matches_dense(a in dense_vec(25), b in dense_vec(25)) {
            let dense: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            let d = SparseVector::from_dense(&a).l1_distance(&SparseVector::from_dense(&b));
            prop_assert!((d - dense).abs() <= 1e-9);
        }
    }
}
