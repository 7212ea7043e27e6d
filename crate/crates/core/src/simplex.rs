//! Points of the probability simplex and matrices whose rows or columns are
//! such points.
//!
//! Every reduction in this module sums left to right over the entries so that
//! results do not depend on how callers parallelize across rows.

use std::ops::Deref;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Construction tolerance on `|Σ p − 1|`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// How [`validate`] treats a vector that is within tolerance of the simplex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Validation {
    /// Accept the entries exactly as given.
    #[default]
    Strict,
    /// Clamp entries in `[-tol, 0)` to zero and divide by the sum.
    Repair,
}

/// A point of the probability simplex Δ^K.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVec(Vec<f64>);

impl ProbVec {
    /// Validates `values` at [`SIMPLEX_TOL`] without repair.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        validate(values, SIMPLEX_TOL, Validation::Strict)
    }

    pub fn uniform(k: usize) -> Self {
        assert!(k > 0, "uniform distribution needs K >= 1");
        ProbVec(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, index: usize) -> Self {
        assert!(index < k, "one-hot index {index} out of range for K = {k}");
        let mut v = vec![0.0; k];
        v[index] = 1.0;
        ProbVec(v)
    }

    /// Wraps values the caller has already checked.
    pub(crate) fn from_vec_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(check(&values, 1e-6).is_ok());
        ProbVec(values)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry, smallest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl Deref for ProbVec {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for ProbVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVec {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ProbVec::new(values)
    }
}

/// Left-to-right sum.
pub(crate) fn sum(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, &x| acc + x)
}

/// Left-to-right inner product.
pub(crate) fn dot(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    p.iter().zip(q).fold(0.0, |acc, (&a, &b)| acc + a * b)
}

/// Index of the largest entry, smallest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check(values: &[f64], tol: f64) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Empty);
    }
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    for (index, &value) in values.iter().enumerate() {
        if value < 0.0 {
            return Err(Error::NegativeEntry { index, value });
        }
    }
    let s = sum(values);
    if (s - 1.0).abs() > tol {
        return Err(Error::SumOutOfTolerance { sum: s, tol });
    }
    Ok(())
}

/// Checks that `values` lies on the simplex within `tol`.
pub fn validate(mut values: Vec<f64>, tol: f64, mode: Validation) -> Result<ProbVec> {
    if mode == Validation::Repair {
        for v in values.iter_mut() {
            if *v < 0.0 && *v >= -tol {
                *v = 0.0;
            }
        }
    }
    check(&values, tol)?;
    if mode == Validation::Repair {
        let s = sum(&values);
        values.iter_mut().for_each(|v| *v /= s);
    }
    Ok(ProbVec(values))
}

/// Writes `softmax(logits)` into `out` using max subtraction.
pub fn softmax_into(logits: &[f64], out: &mut [f64]) -> Result<()> {
    debug_assert_eq!(logits.len(), out.len());
    if logits.is_empty() {
        return Err(Error::Empty);
    }
    let mut max = f64::NEG_INFINITY;
    for (index, &l) in logits.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::NonFinite { index, value: l });
        }
        max = max.max(l);
    }
    let mut total = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

pub fn softmax(logits: &[f64]) -> Result<ProbVec> {
    let mut out = vec![0.0; logits.len()];
    softmax_into(logits, &mut out)?;
    Ok(ProbVec(out))
}

/// Euclidean projection of `v` onto the simplex, written into `out`.
///
/// `scratch` is resized as needed and holds the sorted copy of `v`. Points
/// already on the simplex (to rounding) are copied through unchanged, which
/// makes the projection exactly idempotent.
pub fn project_simplex_into(v: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
    debug_assert_eq!(v.len(), out.len());
    if v.is_empty() {
        return Err(Error::Empty);
    }
    for (index, &value) in v.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite { index, value });
        }
    }
    let k = v.len();
    if v.iter().all(|&x| x >= 0.0) && (sum(v) - 1.0).abs() <= 8.0 * k as f64 * f64::EPSILON {
        out.copy_from_slice(v);
        return Ok(());
    }

    // Projection commutes with shifts along 1; centering on the maximum keeps
    // the threshold accurate when entries are huge.
    let top = v.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    scratch.clear();
    scratch.extend(v.iter().map(|&x| x - top));
    scratch.sort_unstable_by(|a, b| b.total_cmp(a));

    // Largest rho with u_rho - (Σ_{j<=rho} u_j - 1)/rho > 0.
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (j, &u) in scratch.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        *o = ((x - top) - theta).max(0.0);
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
    Ok(())
}

pub fn project_simplex(v: &[f64]) -> Result<ProbVec> {
    let mut out = vec![0.0; v.len()];
    project_simplex_into(v, &mut out, &mut Vec::with_capacity(v.len()))?;
    Ok(ProbVec(out))
}

/// M×K matrix of pseudo-labels; every row is a point of Δ^K.
#[derive(Clone, Debug, PartialEq)]
pub struct LabelMatrix {
    data: Array2<f64>,
}

impl LabelMatrix {
    /// Validates every row at [`SIMPLEX_TOL`].
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::Empty);
        }
        let data = data.as_standard_layout().into_owned();
        for (row, r) in data.outer_iter().enumerate() {
            check(r.as_slice().expect("standard layout"), SIMPLEX_TOL).map_err(|e| {
                Error::InvalidRow {
                    row,
                    source: Box::new(e),
                }
            })?;
        }
        Ok(LabelMatrix { data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::Empty);
        }
        let k = rows[0].as_ref().len();
        let mut data = Array2::zeros((m, k));
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != k {
                return Err(Error::ShapeMismatch(format!(
                    "row {i} has {} entries, expected {k}",
                    r.len()
                )));
            }
            data.row_mut(i)
                .as_slice_mut()
                .expect("standard layout")
                .copy_from_slice(r);
        }
        LabelMatrix::new(data)
    }

    pub fn uniform(m: usize, k: usize) -> Self {
        assert!(m > 0 && k > 0);
        LabelMatrix {
            data: Array2::from_elem((m, k), 1.0 / k as f64),
        }
    }

    pub(crate) fn from_array_unchecked(data: Array2<f64>) -> Self {
        debug_assert!(data.is_standard_layout());
        LabelMatrix { data }
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.ncols();
        &self.data.as_slice().expect("standard layout")[i * k..(i + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data
            .as_slice()
            .expect("standard layout")
            .chunks_exact(self.ncols())
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_array(self) -> Array2<f64> {
        self.data
    }

    /// Column means ȳ, accumulated row by row.
    pub fn mean_row(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.ncols()];
        for r in self.rows() {
            mean.iter_mut().zip(r).for_each(|(m, &y)| *m += y);
        }
        let m = self.nrows() as f64;
        mean.iter_mut().for_each(|v| *v /= m);
        mean
    }

    /// Largest absolute entrywise difference.
    pub fn max_abs_diff(&self, other: &LabelMatrix) -> f64 {
        self.data
            .iter()
            .zip(other.data.iter())
            .fold(0.0, |acc: f64, (a, b)| acc.max((a - b).abs()))
    }

    /// Hard assignment per row (argmax, smallest index on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        self.rows().map(argmax).collect()
    }
}

/// K column distributions S^k ∈ Δ^M stored as an M×K matrix.
///
/// A column whose source had zero mass is filled with 1/M and flagged dead.
#[derive(Clone, Debug, PartialEq)]
pub struct SupportMatrix {
    data: Array2<f64>,
    dead: Vec<bool>,
}

impl SupportMatrix {
    /// Validates that each live column sums to one within [`SIMPLEX_TOL`].
    pub fn new(data: Array2<f64>, dead: Vec<bool>) -> Result<Self> {
        if dead.len() != data.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{} dead flags for {} columns",
                dead.len(),
                data.ncols()
            )));
        }
        let data = data.as_standard_layout().into_owned();
        for (k, column) in data.columns().into_iter().enumerate() {
            let column: Vec<f64> = column.to_vec();
            check(&column, SIMPLEX_TOL).map_err(|e| Error::InvalidRow {
                row: k,
                source: Box::new(e),
            })?;
        }
        Ok(SupportMatrix { data, dead })
    }

    pub(crate) fn from_parts_unchecked(data: Array2<f64>, dead: Vec<bool>) -> Self {
        SupportMatrix { data, dead }
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    /// The M-vector S^k.
    pub fn column(&self, k: usize) -> ArrayView1<'_, f64> {
        self.data.column(k)
    }

    /// S_i^k for all k.
    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.ncols();
        &self.data.as_slice().expect("standard layout")[i * k..(i + 1) * k]
    }

    pub fn is_dead(&self, k: usize) -> bool {
        self.dead[k]
    }

    pub fn dead_columns(&self) -> impl Iterator<Item = usize> + '_ {
        self.dead
            .iter()
            .enumerate()
            .filter(|(_, d)| **d)
            .map(|(k, _)| k)
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validate_accepts_exact_point() {
        let p = validate(vec![0.5, 0.5], 1e-9, Validation::Strict).unwrap();
        assert_eq!(p.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn validate_rejects_bad_sum_and_sign() {
        assert!(matches!(
            ProbVec::new(vec![0.5, 0.6]),
            Err(Error::SumOutOfTolerance { .. })
        ));
        assert!(matches!(
            ProbVec::new(vec![-1e-3, 1.001]),
            Err(Error::NegativeEntry { index: 0, .. })
        ));
        assert!(matches!(ProbVec::new(vec![]), Err(Error::Empty)));
        assert!(matches!(
            ProbVec::new(vec![f64::NAN, 1.0]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn repair_mode_normalizes_residue() {
        let p = validate(vec![0.5 + 1e-12, 0.5, -1e-13], 1e-9, Validation::Repair).unwrap();
        assert_eq!(p[2], 0.0);
        assert!((sum(&p) - 1.0).abs() <= 1e-15);
        // Strict mode keeps the entries as given.
        assert!(ProbVec::new(vec![0.5 + 1e-12, 0.5]).unwrap()[0] > 0.5);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for &x in p.iter() {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] >= 0.0 && p[1] < 1e-300);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(matches!(
            softmax(&[f64::INFINITY, 0.0]),
            Err(Error::NonFinite { index: 0, .. })
        ));
    }

    #[test]
    fn projection_examples() {
        let v = [0.2, 0.3, 0.5];
        assert_eq!(project_simplex(&v).unwrap().as_slice(), &v);
        assert_eq!(
            project_simplex(&[2.0, 0.0]).unwrap().as_slice(),
            &[1.0, 0.0]
        );
        let p = project_simplex(&[0.6, 0.6]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
        assert!(matches!(
            project_simplex(&[f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn label_matrix_rejects_bad_row() {
        let err = LabelMatrix::new(array![[0.5, 0.5], [0.7, 0.7]]).unwrap_err();
        assert!(matches!(err, Error::InvalidRow { row: 1, .. }));
    }

    #[test]
    fn label_matrix_mean_row() {
        let y = LabelMatrix::new(array![[1.0, 0.0], [0.5, 0.5]]).unwrap();
        assert_eq!(y.mean_row(), vec![0.75, 0.25]);
        assert_eq!(y.argmax_rows(), vec![0, 0]);
    }

    #[test]
    fn argmax_prefers_smallest_index() {
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.5]), 2);
    }
}
