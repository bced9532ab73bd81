//! Compositions, counts, and logratio-transformed data.
//!
//! A composition is a vector of `D >= 3` strictly positive parts summing to 1.
//! Counts act as a discrete basis: dividing a count row by its total (the
//! *closure*) yields the composition. The additive logratio (ALR) transform
//! logs each part against a chosen reference part; the centred logratio (CLR)
//! transform logs against the row geometric mean, so CLR rows sum to zero.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Absolute tolerance for unit-sum and zero-sum row checks. Rows within the
/// tolerance are renormalized silently; rows beyond it are rejected.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Exponentiation guard for [`alr_inverse`]: logratios beyond this magnitude
/// are rejected instead of risking overflow/underflow.
pub const ALR_EXP_GUARD: f64 = 700.0;

const MIN_PARTS: usize = 3;

fn check_dims(d: usize) -> Result<()> {
    if d < MIN_PARTS {
        return Err(Error::DimensionTooSmall {
            required: MIN_PARTS,
            got: d,
        });
    }
    Ok(())
}

fn check_labels(labels: &Option<Vec<String>>, d: usize) -> Result<()> {
    if let Some(l) = labels
        && l.len() != d
    {
        return Err(Error::ShapeMismatch {
            expected: format!("{d} part labels"),
            got: format!("{}", l.len()),
        });
    }
    Ok(())
}

/// N x D matrix of nonnegative integer counts, one sample per row.
///
/// Every row must have a positive total; the counts play the role of a
/// discrete basis for the sampled compositions.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    values: DMatrix<u64>,
    part_labels: Option<Vec<String>>,
}

impl CountMatrix {
    pub fn new(values: DMatrix<u64>, part_labels: Option<Vec<String>>) -> Result<Self> {
        check_dims(values.ncols())?;
        if values.nrows() == 0 {
            return Err(Error::TooFewSamples {
                required: 1,
                got: 0,
            });
        }
        check_labels(&part_labels, values.ncols())?;
        for row in 0..values.nrows() {
            if values.row(row).iter().all(|&c| c == 0) {
                return Err(Error::EmptyRow { row });
            }
        }
        Ok(Self {
            values,
            part_labels,
        })
    }

    pub fn values(&self) -> &DMatrix<u64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_parts(&self) -> usize {
        self.values.ncols()
    }

    pub fn part_labels(&self) -> Option<&[String]> {
        self.part_labels.as_deref()
    }

    /// Row totals (basis sizes of the discrete basis).
    pub fn row_totals(&self) -> Vec<u64> {
        (0..self.n_samples())
            .map(|i| self.values.row(i).iter().sum())
            .collect()
    }

    /// True if any cell is zero; zero-containing counts must be imputed
    /// before log transforms.
    pub fn has_zeros(&self) -> bool {
        self.values.iter().any(|&c| c == 0)
    }

    /// Plain frequencies (closure of the counts). Fails on any zero cell.
    pub fn frequencies(&self) -> Result<CompositionMatrix> {
        let float = self.values.map(|c| c as f64);
        closure_with_labels(&float, self.part_labels.clone())
    }

    /// Keep only the given rows (indices must be in range, in any order).
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let values = DMatrix::from_fn(rows.len(), self.n_parts(), |i, j| self.values[(rows[i], j)]);
        Self {
            values,
            part_labels: self.part_labels.clone(),
        }
    }

    /// Keep only the given columns (parts), preserving the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        check_dims(cols.len())?;
        let values = DMatrix::from_fn(self.n_samples(), cols.len(), |i, j| {
            self.values[(i, cols[j])]
        });
        let part_labels = self
            .part_labels
            .as_ref()
            .map(|l| cols.iter().map(|&c| l[c].clone()).collect());
        Self::new(values, part_labels)
    }
}

/// N x D matrix of compositions: strictly positive rows summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionMatrix {
    values: DMatrix<f64>,
    part_labels: Option<Vec<String>>,
}

impl CompositionMatrix {
    /// Validates positivity and unit row sums. Rows within [`ROW_SUM_TOL`]
    /// of one are renormalized silently; anything further off is rejected.
    pub fn new(values: DMatrix<f64>, part_labels: Option<Vec<String>>) -> Result<Self> {
        check_dims(values.ncols())?;
        check_labels(&part_labels, values.ncols())?;
        let mut values = values;
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                let v = values[(i, j)];
                if v <= 0.0 || v.is_nan() {
                    return Err(Error::NonPositiveEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
            let sum: f64 = values.row(i).iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::UnitSumViolation { row: i, sum });
            }
            for j in 0..values.ncols() {
                values[(i, j)] /= sum;
            }
        }
        Ok(Self {
            values,
            part_labels,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_parts(&self) -> usize {
        self.values.ncols()
    }

    pub fn part_labels(&self) -> Option<&[String]> {
        self.part_labels.as_deref()
    }

    /// Elementwise natural log of the parts; the constant-size (t = 1) basis.
    pub fn log_values(&self) -> DMatrix<f64> {
        self.values.map(f64::ln)
    }
}

/// N x (D-1) matrix of additive logratios with the reference column removed.
///
/// Columns keep the natural part ordering; `ref_index` (1-based) records
/// which part was the reference so downstream reindexing is unambiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct AlrMatrix {
    values: DMatrix<f64>,
    ref_index: usize,
    part_labels: Option<Vec<String>>,
}

impl AlrMatrix {
    pub fn new(
        values: DMatrix<f64>,
        ref_index: usize,
        part_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        let d = values.ncols() + 1;
        check_dims(d)?;
        if ref_index == 0 || ref_index > d {
            return Err(Error::BadReferenceIndex {
                got: ref_index,
                max: d,
            });
        }
        check_labels(&part_labels, d)?;
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        Ok(Self {
            values,
            ref_index,
            part_labels,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    /// Number of parts D of the underlying composition (columns + 1).
    pub fn n_parts(&self) -> usize {
        self.values.ncols() + 1
    }

    /// 1-based index of the reference part.
    pub fn ref_index(&self) -> usize {
        self.ref_index
    }

    pub fn part_labels(&self) -> Option<&[String]> {
        self.part_labels.as_deref()
    }
}

/// N x D matrix of centred logratios; rows sum to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ClrMatrix {
    values: DMatrix<f64>,
    part_labels: Option<Vec<String>>,
}

impl ClrMatrix {
    pub fn new(values: DMatrix<f64>, part_labels: Option<Vec<String>>) -> Result<Self> {
        check_dims(values.ncols())?;
        check_labels(&part_labels, values.ncols())?;
        for i in 0..values.nrows() {
            let sum: f64 = values.row(i).iter().sum();
            if sum.abs() > ROW_SUM_TOL {
                return Err(Error::UnitSumViolation { row: i, sum });
            }
        }
        Ok(Self {
            values,
            part_labels,
        })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_parts(&self) -> usize {
        self.values.ncols()
    }

    pub fn part_labels(&self) -> Option<&[String]> {
        self.part_labels.as_deref()
    }
}

/// N x D matrix of log-basis values (logarithms of some positive basis
/// m = t * p, one sample per row).
#[derive(Debug, Clone, PartialEq)]
pub struct BasisMatrix {
    log_values: DMatrix<f64>,
    part_labels: Option<Vec<String>>,
}

impl BasisMatrix {
    /// Wrap an already-logged basis.
    pub fn from_log_values(
        log_values: DMatrix<f64>,
        part_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        check_dims(log_values.ncols())?;
        check_labels(&part_labels, log_values.ncols())?;
        for i in 0..log_values.nrows() {
            for j in 0..log_values.ncols() {
                if !log_values[(i, j)].is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
            }
        }
        Ok(Self {
            log_values,
            part_labels,
        })
    }

    /// Constant-size basis t = 1: log of the composition parts themselves.
    pub fn from_compositions(p: &CompositionMatrix) -> Self {
        Self {
            log_values: p.log_values(),
            part_labels: p.part_labels.clone(),
        }
    }

    /// Discrete basis from counts; fails on any zero cell.
    pub fn from_counts(counts: &CountMatrix) -> Result<Self> {
        let v = counts.values();
        for i in 0..v.nrows() {
            for j in 0..v.ncols() {
                if v[(i, j)] == 0 {
                    return Err(Error::ZeroEntry { row: i, col: j });
                }
            }
        }
        Ok(Self {
            log_values: v.map(|c| (c as f64).ln()),
            part_labels: counts.part_labels.clone(),
        })
    }

    pub fn log_values(&self) -> &DMatrix<f64> {
        &self.log_values
    }

    pub fn n_samples(&self) -> usize {
        self.log_values.nrows()
    }

    pub fn n_parts(&self) -> usize {
        self.log_values.ncols()
    }

    pub fn part_labels(&self) -> Option<&[String]> {
        self.part_labels.as_deref()
    }
}

/// Divide each row of a strictly positive matrix by its total.
pub fn closure(raw: &DMatrix<f64>) -> Result<CompositionMatrix> {
    closure_with_labels(raw, None)
}

/// [`closure`] carrying part labels through.
pub fn closure_with_labels(
    raw: &DMatrix<f64>,
    part_labels: Option<Vec<String>>,
) -> Result<CompositionMatrix> {
    check_dims(raw.ncols())?;
    check_labels(&part_labels, raw.ncols())?;
    let mut out = raw.clone();
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            let v = out[(i, j)];
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::NonPositiveEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        let sum: f64 = out.row(i).iter().sum();
        for j in 0..out.ncols() {
            out[(i, j)] /= sum;
        }
    }
    Ok(CompositionMatrix {
        values: out,
        part_labels,
    })
}

/// Additive logratio transform against the (1-based) reference part:
/// each remaining column j becomes log(p_j / p_ref).
pub fn alr(p: &CompositionMatrix, ref_index: usize) -> Result<AlrMatrix> {
    let d = p.n_parts();
    if ref_index == 0 || ref_index > d {
        return Err(Error::BadReferenceIndex {
            got: ref_index,
            max: d,
        });
    }
    let r = ref_index - 1;
    let n = p.n_samples();
    let mut values = DMatrix::zeros(n, d - 1);
    for i in 0..n {
        let log_ref = p.values[(i, r)].ln();
        let mut out_col = 0;
        for j in 0..d {
            if j == r {
                continue;
            }
            values[(i, out_col)] = p.values[(i, j)].ln() - log_ref;
            out_col += 1;
        }
    }
    AlrMatrix::new(values, ref_index, p.part_labels.clone())
}

/// Invert the ALR transform back to compositions.
///
/// Rows are shifted by their maximum before exponentiating (exact in
/// infinite precision); logratios beyond [`ALR_EXP_GUARD`] are rejected.
pub fn alr_inverse(x: &AlrMatrix) -> Result<CompositionMatrix> {
    let d = x.n_parts();
    let r = x.ref_index() - 1;
    let n = x.n_samples();
    let mut values = DMatrix::zeros(n, d);
    for i in 0..n {
        // Full log vector with the reference coordinate fixed at zero.
        let mut logs = vec![0.0f64; d];
        let mut out_col = 0;
        for (j, slot) in logs.iter_mut().enumerate() {
            if j == r {
                continue;
            }
            let v = x.values()[(i, out_col)];
            if v.abs() > ALR_EXP_GUARD {
                return Err(Error::OverflowRisk { row: i, value: v });
            }
            *slot = v;
            out_col += 1;
        }
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for l in &mut logs {
            *l = (*l - max).exp();
            sum += *l;
        }
        for j in 0..d {
            values[(i, j)] = logs[j] / sum;
        }
    }
    CompositionMatrix::new(values, x.part_labels.as_ref().cloned())
}

/// Centred logratio transform: log of each part over the row geometric mean.
pub fn clr(p: &CompositionMatrix) -> ClrMatrix {
    let n = p.n_samples();
    let d = p.n_parts();
    let mut values = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut mean_log = 0.0;
        for j in 0..d {
            mean_log += p.values[(i, j)].ln();
        }
        mean_log /= d as f64;
        for j in 0..d {
            values[(i, j)] = p.values[(i, j)].ln() - mean_log;
        }
    }
    // Row sums are zero by construction up to rounding.
    ClrMatrix {
        values,
        part_labels: p.part_labels.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn comp(rows: &[&[f64]]) -> CompositionMatrix {
        let n = rows.len();
        let d = rows[0].len();
        let m = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
        CompositionMatrix::new(m, None).unwrap()
    }

    #[test]
    fn closure_divides_by_row_total() {
        let raw = DMatrix::from_row_slice(1, 3, &[2.0, 2.0, 4.0]);
        let p = closure(&raw).unwrap();
        assert_eq!(p.values().as_slice(), &[0.25, 0.25, 0.5]);
    }

    #[test]
    fn closure_uniform_row() {
        let raw = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let p = closure(&raw).unwrap();
        for v in p.values().iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn closure_rejects_zero() {
        let raw = DMatrix::from_row_slice(1, 3, &[0.0, 1.0, 1.0]);
        assert!(matches!(
            closure(&raw),
            Err(Error::NonPositiveEntry { row: 0, col: 0, .. })
        ));
    }

    #[test]
    fn closure_rejects_small_dimension() {
        let raw = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        assert!(matches!(
            closure(&raw),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn closure_idempotent() {
        let raw = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 0.1, 0.5, 0.9, 2.2]);
        let once = closure(&raw).unwrap();
        let twice = closure(once.values()).unwrap();
        for (a, b) in once.values().iter().zip(twice.values().iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn alr_direct_evaluation() {
        let p = comp(&[&[0.2, 0.2, 0.6]]);
        let x = alr(&p, 3).unwrap();
        let expect = (1.0f64 / 3.0).ln();
        assert_abs_diff_eq!(x.values()[(0, 0)], expect, epsilon = 1e-12);
        assert_abs_diff_eq!(x.values()[(0, 1)], expect, epsilon = 1e-12);
    }

    #[test]
    fn alr_uniform_is_zero() {
        let p = comp(&[&[0.25, 0.25, 0.25, 0.25]]);
        for r in 1..=4 {
            let x = alr(&p, r).unwrap();
            for v in x.values().iter() {
                assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn alr_bad_reference() {
        let p = comp(&[&[0.2, 0.2, 0.6]]);
        assert!(matches!(alr(&p, 0), Err(Error::BadReferenceIndex { .. })));
        assert!(matches!(alr(&p, 4), Err(Error::BadReferenceIndex { .. })));
    }

    #[test]
    fn alr_inverse_zero_row_is_uniform() {
        let x = AlrMatrix::new(DMatrix::from_row_slice(1, 2, &[0.0, 0.0]), 3, None).unwrap();
        let p = alr_inverse(&x).unwrap();
        for v in p.values().iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn alr_matrix_rejects_two_parts() {
        // D = 2 (a single logratio column) is below the dimension floor.
        let res = AlrMatrix::new(DMatrix::from_row_slice(1, 1, &[2.0f64.ln()]), 2, None);
        assert!(matches!(res, Err(Error::DimensionTooSmall { .. })));
    }

    #[test]
    fn alr_inverse_overflow_guard() {
        let x = AlrMatrix::new(DMatrix::from_row_slice(1, 2, &[800.0, 0.0]), 3, None).unwrap();
        assert!(matches!(alr_inverse(&x), Err(Error::OverflowRisk { .. })));
    }

    #[test]
    fn clr_uniform_is_zero() {
        let p = comp(&[&[0.25, 0.25, 0.25, 0.25]]);
        let y = clr(&p);
        for v in y.values().iter() {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn clr_definition() {
        let p = comp(&[&[0.5, 0.25, 0.25]]);
        let y = clr(&p);
        let g = (0.5f64 * 0.25 * 0.25).powf(1.0 / 3.0);
        assert_abs_diff_eq!(y.values()[(0, 0)], (0.5 / g).ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(y.values()[(0, 1)], (0.25 / g).ln(), epsilon = 1e-12);
        let row_sum: f64 = y.values().row(0).iter().sum();
        assert_abs_diff_eq!(row_sum, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn composition_renormalizes_within_tolerance() {
        let m = DMatrix::from_row_slice(1, 3, &[0.5, 0.3, 0.2 + 5e-10]);
        let p = CompositionMatrix::new(m, None).unwrap();
        let sum: f64 = p.values().row(0).iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn composition_rejects_beyond_tolerance() {
        let m = DMatrix::from_row_slice(1, 3, &[0.5, 0.3, 0.3]);
        assert!(matches!(
            CompositionMatrix::new(m, None),
            Err(Error::UnitSumViolation { .. })
        ));
    }

    #[test]
    fn count_matrix_rejects_empty_row() {
        let m = DMatrix::from_row_slice(2, 3, &[1u64, 2, 3, 0, 0, 0]);
        assert!(matches!(
            CountMatrix::new(m, None),
            Err(Error::EmptyRow { row: 1 })
        ));
    }

    /// Random strictly positive raw rows, closed to compositions.
    fn random_compositions(d: usize, n: usize) -> impl Strategy<Value = CompositionMatrix> {
        proptest::collection::vec(0.01f64..10.0, n * d).prop_map(move |vals| {
            let raw = DMatrix::from_fn(n, d, |i, j| vals[i * d + j]);
            closure(&raw).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn alr_round_trip(p in random_compositions(5, 4), r in 1usize..=5) {
            let x = alr(&p, r).unwrap();
            let back = alr_inverse(&x).unwrap();
            for (a, b) in p.values().iter().zip(back.values().iter()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn clr_rows_sum_to_zero(p in random_compositions(6, 3)) {
            let y = clr(&p);
            for i in 0..y.n_samples() {
                let s: f64 = y.values().row(i).iter().sum();
                prop_assert!(s.abs() < 1e-9);
            }
        }

        /// CLR equals ALR minus the row mean of the full log vector, after
        /// re-inserting the zero reference coordinate.
        #[test]
        fn clr_is_centred_alr(p in random_compositions(5, 3), r in 1usize..=5) {
            let y = clr(&p);
            let x = alr(&p, r).unwrap();
            for i in 0..p.n_samples() {
                let mut full = [0.0f64; 5];
                let mut col = 0;
                for j in 0..5 {
                    if j == r - 1 { continue; }
                    full[j] = x.values()[(i, col)];
                    col += 1;
                }
                let mean: f64 = full.iter().sum::<f64>() / 5.0;
                for j in 0..5 {
                    prop_assert!((full[j] - mean - y.values()[(i, j)]).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn closure_idempotent_prop(p in random_compositions(4, 5)) {
            let again = closure(p.values()).unwrap();
            for (a, b) in p.values().iter().zip(again.values().iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
