//! Small dense linear-algebra kernel.
//!
//! Everything the recovery code needs from linear algebra goes through
//! here: column extraction by index set, extreme singular values, and
//! least squares on a column subset. The heavy lifting (SVD) is done by
//! `nalgebra`; this module fixes the conventions on top of it:
//!
//! * a matrix with zero columns has `sigma_min = +inf` and operator norm 0,
//!   so conditions over an empty support are vacuously true;
//! * a matrix with more columns than rows has `sigma_min = 0`;
//! * "full column rank" means `sigma_min > 1e-10 * sigma_max`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Relative threshold below which a column set is treated as rank deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Dense real matrix.
///
/// At least one row; zero columns are allowed so that `A_T` for an empty
/// set `T` is representable.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    inner: DMatrix<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return input(format!("matrix shape {rows}x{cols} must be at least 1x1"));
        }
        if entries.len() != rows * cols {
            return input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return input("matrix entries must be finite");
        }
        Ok(Self { inner: DMatrix::from_row_slice(rows, cols, &entries) })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return input("rows have different lengths");
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        assert!(n > 0, "identity of size 0");
        Self { inner: DMatrix::identity(n, n) }
    }

    /// Builds a matrix entry by entry; `f(i, j)` gives row `i`, column `j`.
    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0, "matrix needs at least one row");
        Self { inner: DMatrix::from_fn(rows, cols, f) }
    }

    pub(crate) fn from_nalgebra(inner: DMatrix<f64>) -> Self {
        debug_assert!(inner.nrows() > 0);
        Self { inner }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.inner[(row, col)]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.inner[(row, col)] = value;
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let r = self.rows();
        &self.inner.as_slice()[j * r..(j + 1) * r]
    }

    pub fn as_nalgebra(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        self.inner.transpose().as_slice().to_vec()
    }

    pub fn transpose(&self) -> DenseMatrix {
        Self { inner: self.inner.transpose() }
    }

    pub fn is_finite(&self) -> bool {
        self.inner.iter().all(|v| v.is_finite())
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols(), "dimension mismatch in A x");
        let mut out = DVector::zeros(self.rows());
        out.gemv(1.0, &self.inner, &DVector::from_column_slice(x), 0.0);
        out.data.into()
    }

    /// `A' v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.rows(), "dimension mismatch in A' v");
        let mut out = DVector::zeros(self.cols());
        out.gemv_tr(1.0, &self.inner, &DVector::from_column_slice(v), 0.0);
        out.data.into()
    }

    /// `A x` where `x` is given only on the columns `set` (zero elsewhere).
    pub fn mul_sparse(&self, set: &IndexSet, values: &[f64]) -> Vec<f64> {
        assert_eq!(set.len(), values.len());
        let mut out = vec![0.0; self.rows()];
        for (&j, &v) in set.iter().zip(values) {
            if v != 0.0 {
                for (o, a) in out.iter_mut().zip(self.column(j)) {
                    *o += v * a;
                }
            }
        }
        out
    }

    /// `A' B` for matrices with the same number of rows.
    pub fn tr_mul(&self, other: &DenseMatrix) -> DMatrix<f64> {
        self.inner.tr_mul(&other.inner)
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DenseMatrix {}x{} {:?}", self.rows(), self.cols(), self.to_row_major())
    }
}

/// Sorted set of distinct indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Accepts a strictly increasing list.
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return input("index set must be strictly increasing");
        }
        Ok(Self(indices))
    }

    /// Sorts and deduplicates.
    pub fn from_unsorted(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    /// `{0, 1, ..., m-1}`.
    pub fn full(m: usize) -> Self {
        Self((0..m).collect())
    }

    /// Indices where `predicate(value)` holds.
    pub fn select(values: &[f64], mut predicate: impl FnMut(f64) -> bool) -> Self {
        Self(values.iter().enumerate().filter(|(_, &v)| predicate(v)).map(|(i, _)| i).collect())
    }

    /// Indices of the nonzero entries.
    pub fn support(values: &[f64]) -> Self {
        Self::select(values, |v| v != 0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = &usize> + '_ {
        self.0.iter()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn union(&self, other: &IndexSet) -> IndexSet {
        let (a, b) = (&self.0, &other.0);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        IndexSet(out)
    }

    pub fn intersection(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.iter().copied().filter(|&i| other.contains(i)).collect())
    }

    /// `self \ other`.
    pub fn difference(&self, other: &IndexSet) -> IndexSet {
        IndexSet(self.0.iter().copied().filter(|&i| !other.contains(i)).collect())
    }

    /// `[0, m) \ self`.
    pub fn complement(&self, m: usize) -> IndexSet {
        IndexSet((0..m).filter(|&i| !self.contains(i)).collect())
    }

    pub fn is_subset(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| other.contains(i))
    }

    pub fn is_disjoint(&self, other: &IndexSet) -> bool {
        self.0.iter().all(|&i| !other.contains(i))
    }

    pub fn insert(&mut self, i: usize) {
        if let Err(pos) = self.0.binary_search(&i) {
            self.0.insert(pos, i);
        }
    }

    pub fn remove(&mut self, i: usize) -> bool {
        match self.0.binary_search(&i) {
            Ok(pos) => {
                self.0.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Entries of `values` at these indices.
    pub fn gather(&self, values: &[f64]) -> Vec<f64> {
        self.0.iter().map(|&i| values[i]).collect()
    }

    /// Length-`m` vector with `values` placed at these indices.
    pub fn scatter(&self, values: &[f64], m: usize) -> Vec<f64> {
        assert_eq!(values.len(), self.len());
        let mut out = vec![0.0; m];
        for (&i, &v) in self.0.iter().zip(values) {
            out[i] = v;
        }
        out
    }
}

impl TryFrom<Vec<usize>> for IndexSet {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        IndexSet::new(v)
    }
}

impl From<IndexSet> for Vec<usize> {
    fn from(s: IndexSet) -> Vec<usize> {
        s.0
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        IndexSet::from_unsorted(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a IndexSet {
    type Item = &'a usize;
    type IntoIter = std::slice::Iter<'a, usize>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// `A_T`: the columns of `a` listed in `set`, in order.
pub fn columns(a: &DenseMatrix, set: &IndexSet) -> Result<DenseMatrix> {
    if let Some(max) = set.max_index() {
        if max >= a.cols() {
            return input(format!("column index {max} out of range for {} columns", a.cols()));
        }
    }
    let r = a.rows();
    let mut data = Vec::with_capacity(r * set.len());
    for &j in set {
        data.extend_from_slice(a.column(j));
    }
    Ok(DenseMatrix::from_nalgebra(DMatrix::from_vec(r, set.len(), data)))
}

fn check_finite(a: &DenseMatrix) -> Result<()> {
    if a.is_finite() {
        Ok(())
    } else {
        input("matrix has non-finite entries")
    }
}

/// All `min(rows, cols)` singular values, largest first.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_finite(a)?;
    if a.cols() == 0 {
        return Ok(Vec::new());
    }
    let mut s: Vec<f64> = a.as_nalgebra().singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Smallest singular value in the sense `min_{|c|=1} |A c|`.
pub fn min_singular_value(a: &DenseMatrix) -> Result<f64> {
    check_finite(a)?;
    if a.cols() == 0 {
        return Ok(f64::INFINITY);
    }
    if a.cols() > a.rows() {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.last().copied().unwrap_or(0.0))
}

/// Spectral norm.
pub fn operator_norm(a: &DenseMatrix) -> Result<f64> {
    check_finite(a)?;
    if a.cols() == 0 {
        return Ok(0.0);
    }
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// `sigma_min` and `sigma_max` together (one SVD).
pub fn extreme_singular_values(a: &DenseMatrix) -> Result<(f64, f64)> {
    check_finite(a)?;
    if a.cols() == 0 {
        return Ok((f64::INFINITY, 0.0));
    }
    let s = singular_values(a)?;
    let max = s[0];
    let min = if a.cols() > a.rows() { 0.0 } else { *s.last().unwrap() };
    Ok((min, max))
}

/// `argmin_b |y - A b|` for `A` of full column rank.
pub fn least_squares(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != a.rows() {
        return input(format!("rhs has length {}, matrix has {} rows", y.len(), a.rows()));
    }
    check_finite(a)?;
    if a.cols() == 0 {
        return Ok(Vec::new());
    }
    if a.cols() > a.rows() {
        return Err(Error::Singular { sigma_min: 0.0, threshold: 0.0 });
    }
    let svd = a.as_nalgebra().clone().svd(true, true);
    let s = &svd.singular_values;
    let smax = s.max();
    let smin = s.min();
    let threshold = RANK_TOLERANCE * smax;
    if !(smin > threshold) {
        return Err(Error::Singular { sigma_min: smin, threshold });
    }
    let sol = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::Input(e.to_string()))?;
    Ok(sol.data.into())
}

/// Minimum-norm least-squares solution `A^+ y`; works for any rank.
pub fn pinv_solve(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != a.rows() {
        return input(format!("rhs has length {}, matrix has {} rows", y.len(), a.rows()));
    }
    check_finite(a)?;
    if a.cols() == 0 {
        return Ok(Vec::new());
    }
    let svd = a.as_nalgebra().clone().svd(true, true);
    let eps = RANK_TOLERANCE * svd.singular_values.max();
    let sol = svd
        .solve(&DVector::from_column_slice(y), eps)
        .map_err(|e| Error::Input(e.to_string()))?;
    Ok(sol.data.into())
}

/// Least squares on the columns `set`, scattered back to length `a.cols()`.
pub fn least_squares_on(a: &DenseMatrix, set: &IndexSet, y: &[f64]) -> Result<Vec<f64>> {
    let sub = columns(a, set)?;
    let coef = least_squares(&sub, y)?;
    Ok(set.scatter(&coef, a.cols()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `a - b`.
pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `|y - A x|_2`.
pub fn residual_norm(a: &DenseMatrix, x: &[f64], y: &[f64]) -> f64 {
    norm2(&sub(y, &a.mul_vec(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    // Power iteration on a symmetric positive semidefinite matrix, written
    // with plain loops so it shares nothing with the SVD path.
    fn power_iteration(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        let mut lambda = 0.0;
        for _ in 0..20_000 {
            let w: Vec<f64> = (0..n).map(|i| (0..n).map(|j| m[i][j] * v[j]).sum()).collect();
            let nw = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let next = nw / v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / nw).collect();
            if (next - lambda).abs() < 1e-15 * next {
                return next;
            }
            lambda = next;
        }
        lambda
    }

    fn gram(a: &DenseMatrix) -> Vec<Vec<f64>> {
        let (r, c) = (a.rows(), a.cols());
        (0..c)
            .map(|i| (0..c).map(|j| (0..r).map(|k| a.get(k, i) * a.get(k, j)).sum()).collect())
            .collect()
    }

    // Gauss-Jordan inverse with partial pivoting.
    fn invert(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = m.len();
        let mut aug: Vec<Vec<f64>> = m
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let mut r = row.clone();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
            aug.swap(col, piv);
            let p = aug[col][col];
            for v in aug[col].iter_mut() {
                *v /= p;
            }
            for row in 0..n {
                if row != col {
                    let f = aug[row][col];
                    let pivot_row = aug[col].clone();
                    for (v, pr) in aug[row].iter_mut().zip(pivot_row) {
                        *v -= f * pr;
                    }
                }
            }
        }
        aug.into_iter().map(|r| r[n..].to_vec()).collect()
    }

    fn solve_gauss(m: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let inv = invert(m);
        inv.iter().map(|row| row.iter().zip(b).map(|(x, y)| x * y).sum()).collect()
    }

    #[test]
    fn columns_of_identity() {
        let a = DenseMatrix::identity(3);
        let t = IndexSet::new(vec![0, 2]).unwrap();
        let sub = columns(&a, &t).unwrap();
        assert_eq!(sub.rows(), 3);
        assert_eq!(sub.cols(), 2);
        assert_eq!(sub.column(0), &[1.0, 0.0, 0.0]);
        assert_eq!(sub.column(1), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn columns_empty_set() {
        let a = random_matrix(4, 5, 1);
        let sub = columns(&a, &IndexSet::empty()).unwrap();
        assert_eq!((sub.rows(), sub.cols()), (4, 0));
    }

    #[test]
    fn columns_picks_the_right_entries() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let sub = columns(&a, &IndexSet::new(vec![1]).unwrap()).unwrap();
        assert_eq!(sub.to_row_major(), vec![2.0, 5.0]);
    }

    #[test]
    fn columns_out_of_range() {
        let a = DenseMatrix::identity(3);
        assert!(matches!(columns(&a, &IndexSet::new(vec![3]).unwrap()), Err(Error::Input(_))));
    }

    #[test]
    fn singular_value_basics() {
        assert!((min_singular_value(&DenseMatrix::identity(3)).unwrap() - 1.0).abs() < 1e-14);
        let d = DenseMatrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((min_singular_value(&d).unwrap() - 1.0).abs() < 1e-14);
        assert!((operator_norm(&DenseMatrix::identity(4)).unwrap() - 1.0).abs() < 1e-14);
        let d = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!((operator_norm(&d).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn empty_column_conventions() {
        let a = columns(&DenseMatrix::identity(3), &IndexSet::empty()).unwrap();
        assert_eq!(min_singular_value(&a).unwrap(), f64::INFINITY);
        assert_eq!(operator_norm(&a).unwrap(), 0.0);
    }

    #[test]
    fn wide_matrix_has_zero_sigma_min() {
        let a = random_matrix(2, 3, 9);
        assert_eq!(min_singular_value(&a).unwrap(), 0.0);
    }

    #[test]
    fn min_singular_value_matches_inverse_power_iteration() {
        let a = random_matrix(5, 3, 7);
        let inv = invert(&gram(&a));
        let oracle = 1.0 / power_iteration(&inv).sqrt();
        let got = min_singular_value(&a).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn operator_norm_matches_power_iteration() {
        let a = random_matrix(4, 4, 11);
        let oracle = power_iteration(&gram(&a)).sqrt();
        let got = operator_norm(&a).unwrap();
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn least_squares_identity_and_single_column() {
        let y = vec![1.0, -2.0, 3.5];
        let b = least_squares(&DenseMatrix::identity(3), &y).unwrap();
        for (u, v) in b.iter().zip(&y) {
            assert!((u - v).abs() < 1e-14);
        }
        let c = DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![-1.0]]).unwrap();
        let b = least_squares(&c, &[2.0, 4.0, -2.0]).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_matches_normal_equations() {
        let a = random_matrix(6, 3, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let aty: Vec<f64> = (0..3).map(|j| (0..6).map(|i| a.get(i, j) * y[i]).sum()).collect();
        let oracle = solve_gauss(&gram(&a), &aty);
        let got = least_squares(&a, &y).unwrap();
        for (g, o) in got.iter().zip(&oracle) {
            assert!((g - o).abs() < 1e-8);
        }
        // residual is orthogonal to range(A)
        let r = sub(&y, &a.mul_vec(&got));
        for g in a.tr_mul_vec(&r) {
            assert!(g.abs() < 1e-8);
        }
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(least_squares(&a, &[1.0, 2.0, 0.0]), Err(Error::Singular { .. })));
        // pinv still answers
        let b = pinv_solve(&a, &[1.0, 2.0, 0.0]).unwrap();
        assert!((b[0] - 0.5).abs() < 1e-12 && (b[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_rejected() {
        assert!(DenseMatrix::from_row_major(1, 2, vec![1.0, f64::NAN]).is_err());
        let mut a = DenseMatrix::identity(2);
        a.set(0, 1, f64::INFINITY);
        assert!(min_singular_value(&a).is_err());
        assert!(operator_norm(&a).is_err());
    }

    #[test]
    fn index_set_algebra() {
        let a = IndexSet::new(vec![1, 3, 5]).unwrap();
        let b = IndexSet::new(vec![3, 4]).unwrap();
        assert_eq!(a.union(&b).as_slice(), &[1, 3, 4, 5]);
        assert_eq!(a.intersection(&b).as_slice(), &[3]);
        assert_eq!(a.difference(&b).as_slice(), &[1, 5]);
        assert_eq!(b.complement(6).as_slice(), &[0, 1, 2, 5]);
        assert!(IndexSet::new(vec![2, 2]).is_err());
        assert!(IndexSet::new(vec![3, 1]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        fn matrix_strategy() -> impl Strategy<Value = DenseMatrix> {
            (1usize..7, 1usize..7, any::<u64>()).prop_map(|(r, c, s)| random_matrix(r, c, s))
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn disjoint_union_is_a_column_reorder(a in matrix_strategy(), mask in any::<u32>(), mask2 in any::<u32>()) {
                let m = a.cols();
                let t1: IndexSet = (0..m).filter(|j| mask >> j & 1 == 1).collect();
                let t2: IndexSet = (0..m).filter(|j| mask2 >> j & 1 == 1 && !t1.contains(*j)).collect();
                let both = columns(&a, &t1.union(&t2)).unwrap();
                let c1 = columns(&a, &t1).unwrap();
                let c2 = columns(&a, &t2).unwrap();
                for (k, &j) in t1.union(&t2).iter().enumerate() {
                    let expect = if let Ok(p) = t1.as_slice().binary_search(&j) {
                        c1.column(p)
                    } else {
                        c2.column(t2.as_slice().binary_search(&j).unwrap())
                    };
                    prop_assert_eq!(both.column(k), expect);
                }
            }

            #[test]
            fn sigma_min_never_exceeds_norm(a in matrix_strategy()) {
                prop_assert!(min_singular_value(&a).unwrap() <= operator_norm(&a).unwrap() + 1e-12);
            }

            #[test]
            fn least_squares_beats_random_probes(seed in any::<u64>()) {
                let a = random_matrix(6, 3, seed);
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
                let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
                if let Ok(beta) = least_squares(&a, &y) {
                    let best = residual_norm(&a, &beta, &y);
                    for _ in 0..100 {
                        let probe: Vec<f64> = (0..3).map(|_| rng.gen_range(-3.0..3.0)).collect();
                        prop_assert!(best <= residual_norm(&a, &probe, &y) + 1e-12);
                    }
                }
            }

            #[test]
            fn outputs_are_deterministic(a in matrix_strategy()) {
                let s1 = singular_values(&a).unwrap();
                let s2 = singular_values(&a).unwrap();
                prop_assert_eq!(s1.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                                s2.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
            }
        }
    }
}
