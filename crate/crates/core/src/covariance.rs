//! Covariance estimation, representation transforms, and logratio partial
//! correlations.
//!
//! Three covariance representations appear throughout: the ALR covariance
//! `Sigma` ((D-1) x (D-1), relative to a reference part), the CLR covariance
//! `Gamma` (D x D, singular with zero row sums), and the basis covariance
//! `Omega` (D x D, covariance of the logged basis components). Elementwise
//! transformations connect all three; the logratio ones lose the basis-size
//! signal, so recovering `Omega` needs the samples themselves.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::composition::{AlrMatrix, BasisMatrix, ClrMatrix, CompositionMatrix};
use crate::error::{Error, Result};

/// Symmetry tolerance for covariance matrices.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Condition-number ceiling for direct ALR inversion.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Which covariance a [`CovMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// ALR covariance relative to the (1-based) reference part; k = D - 1.
    Alr { ref_index: usize },
    /// CLR covariance; k = D, rank at most D - 1.
    Clr,
    /// Basis covariance; k = D, full rank in general.
    Basis,
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Representation::Alr { ref_index } => write!(f, "ALR(ref={ref_index})"),
            Representation::Clr => write!(f, "CLR"),
            Representation::Basis => write!(f, "BASIS"),
        }
    }
}

/// A symmetric covariance matrix tagged with its representation.
#[derive(Debug, Clone, PartialEq)]
pub struct CovMatrix {
    values: DMatrix<f64>,
    representation: Representation,
    part_labels: Option<Vec<String>>,
}

impl CovMatrix {
    /// Checks squareness, symmetry (within [`SYMMETRY_TOL`], then
    /// symmetrized exactly), dimension floor, and the reference index.
    pub fn new(values: DMatrix<f64>, representation: Representation) -> Result<Self> {
        let k = values.nrows();
        if values.ncols() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("square matrix ({k} x {k})"),
                got: format!("{k} x {}", values.ncols()),
            });
        }
        let d = match representation {
            Representation::Alr { ref_index } => {
                let d = k + 1;
                if ref_index == 0 || ref_index > d {
                    return Err(Error::BadReferenceIndex {
                        got: ref_index,
                        max: d,
                    });
                }
                d
            }
            Representation::Clr | Representation::Basis => k,
        };
        if d < 3 {
            return Err(Error::DimensionTooSmall {
                required: 3,
                got: d,
            });
        }
        let mut max_asym = 0.0f64;
        for i in 0..k {
            for j in (i + 1)..k {
                max_asym = max_asym.max((values[(i, j)] - values[(j, i)]).abs());
            }
        }
        if max_asym > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { max_abs: max_asym });
        }
        let mut values = values;
        for i in 0..k {
            for j in (i + 1)..k {
                let m = 0.5 * (values[(i, j)] + values[(j, i)]);
                values[(i, j)] = m;
                values[(j, i)] = m;
            }
        }
        Ok(Self {
            values,
            representation,
            part_labels: None,
        })
    }

    pub fn with_labels(mut self, part_labels: Option<Vec<String>>) -> Result<Self> {
        if let Some(l) = &part_labels
            && l.len() != self.n_parts()
        {
            return Err(Error::ShapeMismatch {
                expected: format!("{} part labels", self.n_parts()),
                got: format!("{}", l.len()),
            });
        }
        self.part_labels = part_labels;
        Ok(self)
    }

    /// Unbiased sample covariance of ALR-transformed data.
    pub fn sample_alr(x: &AlrMatrix) -> Result<Self> {
        let values = sample_covariance(x.values())?;
        Self::new(
            values,
            Representation::Alr {
                ref_index: x.ref_index(),
            },
        )?
        .with_labels(x.part_labels().map(|l| l.to_vec()))
    }

    /// Unbiased sample covariance of CLR-transformed data.
    pub fn sample_clr(y: &ClrMatrix) -> Result<Self> {
        let values = sample_covariance(y.values())?;
        Self::new(values, Representation::Clr)?.with_labels(y.part_labels().map(|l| l.to_vec()))
    }

    /// Unbiased sample covariance of a log-basis matrix.
    pub fn sample_basis(b: &BasisMatrix) -> Result<Self> {
        let values = sample_covariance(b.log_values())?;
        Self::new(values, Representation::Basis)?.with_labels(b.part_labels().map(|l| l.to_vec()))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn part_labels(&self) -> Option<&[String]> {
        self.part_labels.as_deref()
    }

    /// Matrix order k (D - 1 for ALR, D otherwise).
    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Number of parts D of the underlying composition.
    pub fn n_parts(&self) -> usize {
        match self.representation {
            Representation::Alr { .. } => self.dim() + 1,
            _ => self.dim(),
        }
    }

    /// True when every row sums to zero within `tol` (the invariant of a
    /// well-formed CLR covariance; deliberately not enforced on
    /// construction because naive CLR shrinkage violates it).
    pub fn clr_row_sums_within(&self, tol: f64) -> bool {
        (0..self.dim()).all(|i| self.values.row(i).iter().sum::<f64>().abs() <= tol)
    }

    /// True when all eigenvalues are at least `-tol * max|eigenvalue|`.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let eig = SymmetricEigen::new(self.values.clone());
        let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        eig.eigenvalues.iter().all(|&v| v >= -tol * max.max(1e-300))
    }
}

/// Unbiased sample covariance (divisor N - 1) of an N x k data matrix.
pub fn sample_covariance(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = x.nrows();
    let k = x.ncols();
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: n,
        });
    }
    let mut centered = x.clone();
    for j in 0..k {
        let mean = x.column(j).sum() / n as f64;
        for i in 0..n {
            centered[(i, j)] -= mean;
        }
    }
    let mut cov = centered.transpose() * &centered;
    cov /= (n - 1) as f64;
    // The gemm result is symmetric up to rounding; make it exact.
    for i in 0..k {
        for j in (i + 1)..k {
            let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = m;
            cov[(j, i)] = m;
        }
    }
    Ok(cov)
}

/// Insert a zero row and column at `pos`: ALR covariance entries indexed
/// by the reference part are identically zero, so padding restores the
/// full part-indexed layout before centring.
fn border_pad(values: &DMatrix<f64>, pos: usize) -> DMatrix<f64> {
    let k = values.nrows();
    DMatrix::from_fn(k + 1, k + 1, |i, j| {
        if i == pos || j == pos {
            0.0
        } else {
            let ii = if i > pos { i - 1 } else { i };
            let jj = if j > pos { j - 1 } else { j };
            values[(ii, jj)]
        }
    })
}

/// Double-centre a D x D matrix: subtract row and column means, add back
/// the grand mean. Shared by the Sigma->Gamma and Omega->Gamma transforms.
fn double_center(full: &DMatrix<f64>) -> DMatrix<f64> {
    let d = full.nrows();
    let df = d as f64;
    let row_means: Vec<f64> = (0..d)
        .map(|i| full.row(i).iter().sum::<f64>() / df)
        .collect();
    let grand: f64 = row_means.iter().sum::<f64>() / df;
    DMatrix::from_fn(d, d, |i, j| {
        full[(i, j)] - row_means[i] - row_means[j] + grand
    })
}

/// Drop the reference row/column after subtracting it from the rest:
/// out_ij = full_ij - full_i,ref - full_ref,j + full_ref,ref.
fn collapse_to_alr(full: &DMatrix<f64>, ref0: usize) -> DMatrix<f64> {
    let d = full.nrows();
    let keep: Vec<usize> = (0..d).filter(|&i| i != ref0).collect();
    DMatrix::from_fn(d - 1, d - 1, |a, b| {
        let i = keep[a];
        let j = keep[b];
        full[(i, j)] - full[(i, ref0)] - full[(ref0, j)] + full[(ref0, ref0)]
    })
}

/// ALR covariance to CLR covariance.
pub fn sigma_to_gamma(sigma: &CovMatrix) -> Result<CovMatrix> {
    let ref_index = match sigma.representation() {
        Representation::Alr { ref_index } => ref_index,
        other => {
            return Err(Error::RepresentationMismatch {
                expected: "ALR".into(),
                got: other.to_string(),
            });
        }
    };
    let padded = border_pad(sigma.values(), ref_index - 1);
    CovMatrix::new(double_center(&padded), Representation::Clr)?
        .with_labels(sigma.part_labels().map(|l| l.to_vec()))
}

/// CLR covariance to ALR covariance relative to `ref_index`.
pub fn gamma_to_sigma(gamma: &CovMatrix, ref_index: usize) -> Result<CovMatrix> {
    if gamma.representation() != Representation::Clr {
        return Err(Error::RepresentationMismatch {
            expected: "CLR".into(),
            got: gamma.representation().to_string(),
        });
    }
    let d = gamma.dim();
    if ref_index == 0 || ref_index > d {
        return Err(Error::BadReferenceIndex {
            got: ref_index,
            max: d,
        });
    }
    CovMatrix::new(
        collapse_to_alr(gamma.values(), ref_index - 1),
        Representation::Alr { ref_index },
    )?
    .with_labels(gamma.part_labels().map(|l| l.to_vec()))
}

/// Basis covariance to ALR covariance.
pub fn omega_to_sigma(omega: &CovMatrix, ref_index: usize) -> Result<CovMatrix> {
    if omega.representation() != Representation::Basis {
        return Err(Error::RepresentationMismatch {
            expected: "BASIS".into(),
            got: omega.representation().to_string(),
        });
    }
    let d = omega.dim();
    if ref_index == 0 || ref_index > d {
        return Err(Error::BadReferenceIndex {
            got: ref_index,
            max: d,
        });
    }
    CovMatrix::new(
        collapse_to_alr(omega.values(), ref_index - 1),
        Representation::Alr { ref_index },
    )?
    .with_labels(omega.part_labels().map(|l| l.to_vec()))
}

/// Basis covariance to CLR covariance.
pub fn omega_to_gamma(omega: &CovMatrix) -> Result<CovMatrix> {
    if omega.representation() != Representation::Basis {
        return Err(Error::RepresentationMismatch {
            expected: "BASIS".into(),
            got: omega.representation().to_string(),
        });
    }
    CovMatrix::new(double_center(omega.values()), Representation::Clr)?
        .with_labels(omega.part_labels().map(|l| l.to_vec()))
}

/// Logratio covariance back to a basis covariance.
///
/// The basis-size signal is not recoverable from logratios alone, so the
/// per-sample basis and compositions must be supplied; beta_j is estimated
/// from them as cov(clr_j(p), log g(m)) + var(log g(m)) / 2. The round trip
/// with [`omega_to_gamma`] is exact when the input covariance was estimated
/// from the same samples.
pub fn logratio_to_omega(
    cov: &CovMatrix,
    basis: &BasisMatrix,
    p: &CompositionMatrix,
) -> Result<CovMatrix> {
    let gamma = match cov.representation() {
        Representation::Clr => cov.clone(),
        Representation::Alr { .. } => sigma_to_gamma(cov)?,
        Representation::Basis => {
            return Err(Error::RepresentationMismatch {
                expected: "ALR or CLR".into(),
                got: "BASIS".into(),
            });
        }
    };
    let d = gamma.dim();
    let n = basis.n_samples();
    if basis.n_parts() != d || p.n_parts() != d || p.n_samples() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("basis and compositions of shape {n} x {d}"),
            got: format!(
                "basis {} x {}, compositions {} x {}",
                basis.n_samples(),
                basis.n_parts(),
                p.n_samples(),
                p.n_parts()
            ),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: n,
        });
    }

    // Per-sample log geometric mean of the basis, and clr(p) columns.
    let log_g: Vec<f64> = (0..n)
        .map(|i| basis.log_values().row(i).iter().sum::<f64>() / d as f64)
        .collect();
    let clr_p = crate::composition::clr(p);

    let mean_g: f64 = log_g.iter().sum::<f64>() / n as f64;
    let denom = (n - 1) as f64;
    let var_g: f64 = log_g.iter().map(|&g| (g - mean_g).powi(2)).sum::<f64>() / denom;

    let mut beta = vec![0.0f64; d];
    for (j, beta_j) in beta.iter_mut().enumerate() {
        let col = clr_p.values().column(j);
        let mean_c = col.sum() / n as f64;
        let cov_cg: f64 = (0..n)
            .map(|i| (col[i] - mean_c) * (log_g[i] - mean_g))
            .sum::<f64>()
            / denom;
        *beta_j = cov_cg + 0.5 * var_g;
    }

    let omega = DMatrix::from_fn(d, d, |i, j| gamma.values()[(i, j)] + beta[i] + beta[j]);
    CovMatrix::new(omega, Representation::Basis)?.with_labels(cov.part_labels().map(|l| l.to_vec()))
}

/// Moore-Penrose pseudoinverse of a symmetric matrix via its
/// eigendecomposition, with eigenvalue cutoff k * max|eigenvalue| * 1e-12.
pub fn pseudoinverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let k = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let cutoff = k as f64 * max * 1e-12;
    let inv_vals: Vec<f64> = eig
        .eigenvalues
        .iter()
        .map(|&v| if v.abs() <= cutoff { 0.0 } else { 1.0 / v })
        .collect();
    let mut out = DMatrix::zeros(k, k);
    for (e, &iv) in inv_vals.iter().enumerate() {
        if iv != 0.0 {
            let q = eig.eigenvectors.column(e);
            for i in 0..k {
                for j in 0..k {
                    out[(i, j)] += iv * q[i] * q[j];
                }
            }
        }
    }
    out
}

/// Symmetric D x D matrix of partial correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCorrMatrix {
    values: DMatrix<f64>,
}

impl PartialCorrMatrix {
    /// Crate-internal: for closed forms that guarantee the invariants.
    pub(crate) fn from_values_unchecked(values: DMatrix<f64>) -> Self {
        Self { values }
    }

    fn from_precision(prec: &DMatrix<f64>) -> Self {
        let k = prec.nrows();
        let values = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                1.0
            } else {
                let denom = (prec[(i, i)] * prec[(j, j)]).sqrt();
                if denom > 0.0 {
                    (-prec[(i, j)] / denom).clamp(-1.0, 1.0)
                } else {
                    0.0
                }
            }
        });
        Self { values }
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }
}

/// Logratio-based partial correlations from a covariance matrix.
///
/// ALR input is inverted directly (rejected as singular past a condition
/// number of [`CONDITION_LIMIT`]) and yields the (D-1) x (D-1) partial
/// correlations of the non-reference parts. CLR input goes through the
/// pseudoinverse and yields the full D x D matrix; the two routes agree
/// for the parts they share.
pub fn partial_correlation(cov: &CovMatrix) -> Result<PartialCorrMatrix> {
    match cov.representation() {
        Representation::Alr { .. } => {
            let k = cov.dim();
            let eig = SymmetricEigen::new(cov.values().clone());
            let max = eig.eigenvalues.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            let min = eig
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &v| a.min(v.abs()));
            let condition = if min > 0.0 { max / min } else { f64::INFINITY };
            if !condition.is_finite() || condition >= CONDITION_LIMIT {
                return Err(Error::SingularCovariance { condition });
            }
            let mut prec = DMatrix::zeros(k, k);
            for e in 0..k {
                let q = eig.eigenvectors.column(e);
                let iv = 1.0 / eig.eigenvalues[e];
                for i in 0..k {
                    for j in 0..k {
                        prec[(i, j)] += iv * q[i] * q[j];
                    }
                }
            }
            Ok(PartialCorrMatrix::from_precision(&prec))
        }
        Representation::Clr => {
            let prec = pseudoinverse(cov.values());
            Ok(PartialCorrMatrix::from_precision(&prec))
        }
        Representation::Basis => Err(Error::RepresentationMismatch {
            expected: "ALR or CLR".into(),
            got: "BASIS".into(),
        }),
    }
}
