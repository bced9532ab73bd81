//! James-Stein covariance shrinkage with targets for logratio covariance
//! matrices.
//!
//! The estimator is the convex combination `lambda * T + (1 - lambda) * S`
//! of the sample covariance S with a structured target T, with the optimal
//! intensity estimated from the data moments. Diagonal targets are wrong
//! for logratio covariances (their variables share a reference), so two
//! routes respect the compositional structure: shrink the basis covariance
//! with a diagonal target and backtransform (the pipeline preferred here),
//! or shrink the logratio covariance directly toward a logratio-uncorrelated
//! target built from its own entries.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::composition::{CompositionMatrix, CountMatrix};
use crate::covariance::{
    CovMatrix, Representation, omega_to_gamma, omega_to_sigma, sample_covariance,
};
use crate::error::{Error, Result};
use crate::lu::{lu_gamma_raw, lu_sigma_raw};

/// Shrinkage target families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TargetKind {
    /// diag(S): the classical target for unconstrained data.
    Diagonal,
    /// Logratio-uncorrelated target in ALR form.
    LuAlr,
    /// Logratio-uncorrelated target in CLR form.
    LuClr,
    /// Caller-supplied target (treated as diagonal for intensity purposes).
    Custom,
}

impl std::fmt::Display for TargetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetKind::Diagonal => write!(f, "diagonal"),
            TargetKind::LuAlr => write!(f, "lu-alr"),
            TargetKind::LuClr => write!(f, "lu-clr"),
            TargetKind::Custom => write!(f, "custom"),
        }
    }
}

/// Estimated shrinkage intensity with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaEstimate {
    /// Intensity clamped to [0, 1].
    pub lambda: f64,
    /// Raw ratio before clamping.
    pub preclamp: f64,
    /// True when the denominator vanished (target already attained); the
    /// convention is lambda = 1.
    pub degenerate: bool,
    /// True when the covariance-of-covariance cross term was skipped
    /// because D exceeded the exact-mode limit.
    pub approximate: bool,
}

/// Shrunk covariance plus the intensities that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageEstimate {
    pub covariance: CovMatrix,
    pub lambda: f64,
    /// Separate intensity for the diagonal, when variance shrinkage ran.
    pub lambda_var: Option<f64>,
    pub target_kind: TargetKind,
    pub lambda_preclamp: f64,
    pub lambda_var_preclamp: Option<f64>,
    pub degenerate: bool,
    pub approximate_cross_term: bool,
    /// The LU target implied a nonpositive alpha entry (allowed, flagged).
    pub nonpositive_target_alpha: bool,
}

/// Convex combination `lambda * T + (1 - lambda) * S`.
pub fn shrink(s: &DMatrix<f64>, t: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::LambdaOutOfRange(lambda));
    }
    if s.shape() != t.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", s.nrows(), s.ncols()),
            got: format!("{} x {}", t.nrows(), t.ncols()),
        });
    }
    Ok(t * lambda + s * (1.0 - lambda))
}

/// Centered data with the per-pair moment sums shared by the intensity
/// estimators. w_mij = c_mi * c_mj are the centered cross products whose
/// empirical variance estimates var(s_ij).
struct Moments {
    centered: DMatrix<f64>,
    n: usize,
    k: usize,
    /// Unbiased sample covariance (n / (n-1) times the mean of w).
    s: DMatrix<f64>,
}

impl Moments {
    fn new(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        let k = x.ncols();
        if n < 3 {
            return Err(Error::TooFewSamples {
                required: 3,
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
        let mut s = centered.transpose() * &centered;
        s /= (n - 1) as f64;
        for i in 0..k {
            for j in (i + 1)..k {
                let m = 0.5 * (s[(i, j)] + s[(j, i)]);
                s[(i, j)] = m;
                s[(j, i)] = m;
            }
        }
        Ok(Self { centered, n, k, s })
    }

    fn scale(&self) -> f64 {
        let nf = self.n as f64;
        nf / (nf - 1.0).powi(3)
    }

    /// Sum over unordered off-diagonal pairs, doubled, of var-hat(s_ij).
    fn offdiag_variance_sum(&self) -> f64 {
        let n = self.n;
        let nf = n as f64;
        let mut total = 0.0;
        for i in 0..self.k {
            let ci = self.centered.column(i);
            for j in (i + 1)..self.k {
                let cj = self.centered.column(j);
                let mut sum_w = 0.0;
                let mut sum_w2 = 0.0;
                for m in 0..n {
                    let w = ci[m] * cj[m];
                    sum_w += w;
                    sum_w2 += w * w;
                }
                let mean_w = sum_w / nf;
                total += sum_w2 - nf * mean_w * mean_w;
            }
        }
        2.0 * self.scale() * total
    }

    /// Per-sample row sums of the centered data.
    fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|m| self.centered.row(m).iter().sum())
            .collect()
    }

    /// Per-sample sums of squared centered entries.
    fn row_square_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|m| self.centered.row(m).iter().map(|v| v * v).sum())
            .collect()
    }
}

/// Optimal intensity for a diagonal target: the variance of the
/// off-diagonal covariance entries over their squared magnitudes, clamped
/// to [0, 1]. A vanishing denominator (no off-diagonal signal) maps to
/// lambda = 1: the target is already attained and full shrinkage is the
/// stable choice.
pub fn estimate_lambda_diagonal(x: &DMatrix<f64>) -> Result<LambdaEstimate> {
    let moments = Moments::new(x)?;
    let num = moments.offdiag_variance_sum();
    let mut den = 0.0;
    for i in 0..moments.k {
        for j in 0..moments.k {
            if i != j {
                den += moments.s[(i, j)] * moments.s[(i, j)];
            }
        }
    }
    Ok(finish_lambda(num, den, false))
}

fn finish_lambda(num: f64, den: f64, approximate: bool) -> LambdaEstimate {
    if den == 0.0 {
        return LambdaEstimate {
            lambda: 1.0,
            preclamp: f64::INFINITY,
            degenerate: true,
            approximate,
        };
    }
    let preclamp = num / den;
    LambdaEstimate {
        lambda: preclamp.clamp(0.0, 1.0),
        preclamp,
        degenerate: false,
        approximate,
    }
}

/// Parts dimension D above which the exact cross term of
/// [`estimate_lambda_general`] is replaced by zero.
pub const EXACT_CROSS_TERM_LIMIT: usize = 100;

/// Optimal intensity for the general mean-squared-error criterion:
/// `sum_{i != j} [var(s_ij) - cov(s_ij, tau_ij)] / sum_{i != j} (s_ij - tau_ij)^2`.
///
/// The LU targets are linear combinations of the covariance entries, so the
/// cross term is computed exactly from the same moments (no Monte Carlo);
/// above `exact_limit` parts it is set to zero and the estimate is flagged
/// approximate. The diagonal target has no cross term and reduces to
/// [`estimate_lambda_diagonal`].
pub fn estimate_lambda_general_with(
    x: &DMatrix<f64>,
    target_kind: TargetKind,
    exact_limit: usize,
) -> Result<LambdaEstimate> {
    let moments = Moments::new(x)?;
    let k = moments.k;
    let n = moments.n;
    let nf = n as f64;
    let scale = moments.scale();
    let s = &moments.s;

    let (target, d_parts): (DMatrix<f64>, usize) = match target_kind {
        TargetKind::Diagonal | TargetKind::Custom => (DMatrix::from_diagonal(&s.diagonal()), k),
        TargetKind::LuAlr => {
            let cov = CovMatrix::new(s.clone(), Representation::Alr { ref_index: k + 1 })?;
            (lu_target_alr(&cov)?.covariance.values().clone(), k + 1)
        }
        TargetKind::LuClr => {
            let cov = CovMatrix::new(s.clone(), Representation::Clr)?;
            (lu_target_clr(&cov)?.covariance.values().clone(), k)
        }
    };

    let mut den = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                den += (s[(i, j)] - target[(i, j)]).powi(2);
            }
        }
    }

    let var_sum = moments.offdiag_variance_sum();

    let exact = d_parts <= exact_limit;
    let cross_sum = if !exact {
        0.0
    } else {
        match target_kind {
            TargetKind::Diagonal | TargetKind::Custom => 0.0,
            TargetKind::LuAlr => {
                // tau_ij (i != j) is the off-diagonal mean of S, so the
                // aggregated cross term collapses to the variance of the
                // per-sample off-diagonal product totals g_m = r_m^2 - h_m.
                let d = (k + 1) as f64;
                let coef = 1.0 / ((d - 1.0) * (d - 2.0));
                let r = moments.row_sums();
                let h = moments.row_square_sums();
                let g: Vec<f64> = r.iter().zip(&h).map(|(rm, hm)| rm * rm - hm).collect();
                let g_mean = g.iter().sum::<f64>() / nf;
                let g_var: f64 = g.iter().map(|gm| (gm - g_mean).powi(2)).sum();
                coef * scale * g_var
            }
            TargetKind::LuClr => {
                // t_ij (i != j) = -(s_ii + s_jj)/(D-2) + tr(S)/((D-1)(D-2)).
                let d = k as f64;
                let r = moments.row_sums();
                let h = moments.row_square_sums();
                let g: Vec<f64> = r.iter().zip(&h).map(|(rm, hm)| rm * rm - hm).collect();
                let g_mean = g.iter().sum::<f64>() / nf;
                let h_mean = h.iter().sum::<f64>() / nf;

                // B = sum_{i!=j} sum_l cov(s_ij, s_ll).
                let b: f64 = g
                    .iter()
                    .zip(&h)
                    .map(|(gm, hm)| (gm - g_mean) * (hm - h_mean))
                    .sum::<f64>()
                    * scale;

                // A = sum_{i!=j} [cov(s_ij, s_ii) + cov(s_ij, s_jj)]
                //   = 2 sum_i sum_m (w_mii - mean) * sum_{j!=i}(w_mij - mean).
                let w_diag_mean: Vec<f64> = (0..k)
                    .map(|i| {
                        moments
                            .centered
                            .column(i)
                            .iter()
                            .map(|c| c * c)
                            .sum::<f64>()
                            / nf
                    })
                    .collect();
                let w_row_mean: Vec<f64> = (0..k)
                    .map(|i| {
                        let ci = moments.centered.column(i);
                        (0..n).map(|m| ci[m] * r[m]).sum::<f64>() / nf
                    })
                    .collect();
                let mut a = 0.0;
                for i in 0..k {
                    let ci = moments.centered.column(i);
                    let mut acc = 0.0;
                    for m in 0..n {
                        let w_ii = ci[m] * ci[m];
                        let offdiag_m = ci[m] * r[m] - w_ii;
                        let offdiag_mean = w_row_mean[i] - w_diag_mean[i];
                        acc += (w_ii - w_diag_mean[i]) * (offdiag_m - offdiag_mean);
                    }
                    a += acc;
                }
                a *= 2.0 * scale;

                -a / (d - 2.0) + b / ((d - 1.0) * (d - 2.0))
            }
        }
    };

    Ok(finish_lambda(
        var_sum - cross_sum,
        den,
        !exact && !matches!(target_kind, TargetKind::Diagonal | TargetKind::Custom),
    ))
}

/// [`estimate_lambda_general_with`] at the default exact-mode limit.
pub fn estimate_lambda_general(
    x: &DMatrix<f64>,
    target_kind: TargetKind,
) -> Result<LambdaEstimate> {
    estimate_lambda_general_with(x, target_kind, EXACT_CROSS_TERM_LIMIT)
}

/// Result of shrinking a variance vector toward its median.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceShrinkage {
    pub values: Vec<f64>,
    pub lambda_var: f64,
    pub preclamp: f64,
    pub median: f64,
}

fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    }
}

/// Shrink empirical variances toward their median with an intensity
/// estimated from the variance of each variance.
pub fn shrink_variances(v: &[f64], x: &DMatrix<f64>) -> Result<VarianceShrinkage> {
    let n = x.nrows();
    let k = x.ncols();
    if n < 3 {
        return Err(Error::TooFewSamples {
            required: 3,
            got: n,
        });
    }
    if v.len() != k {
        return Err(Error::ShapeMismatch {
            expected: format!("{k} variances"),
            got: format!("{}", v.len()),
        });
    }
    let nf = n as f64;
    let scale = nf / (nf - 1.0).powi(3);
    let med = median(v);

    let mut num = 0.0;
    for i in 0..k {
        let col = x.column(i);
        let mean = col.sum() / nf;
        let mut sum_w = 0.0;
        let mut sum_w2 = 0.0;
        for m in 0..n {
            let c = col[m] - mean;
            let w = c * c;
            sum_w += w;
            sum_w2 += w * w;
        }
        let mean_w = sum_w / nf;
        num += scale * (sum_w2 - nf * mean_w * mean_w);
    }
    let den: f64 = v.iter().map(|&vi| (vi - med).powi(2)).sum();

    let (lambda_var, preclamp) = if den == 0.0 {
        (1.0, f64::INFINITY)
    } else {
        let raw = num / den;
        (raw.clamp(0.0, 1.0), raw)
    };
    Ok(VarianceShrinkage {
        values: apply_variance_shrinkage(v, med, lambda_var),
        lambda_var,
        preclamp,
        median: med,
    })
}

/// Apply a fixed intensity toward the given median (the forced-intensity
/// escape hatch; lambda_var = 1 collapses every variance onto the median).
pub fn apply_variance_shrinkage(v: &[f64], median: f64, lambda_var: f64) -> Vec<f64> {
    v.iter()
        .map(|&vi| lambda_var * median + (1.0 - lambda_var) * vi)
        .collect()
}

/// A logratio-uncorrelated shrinkage target with its implied alpha vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LuTarget {
    pub covariance: CovMatrix,
    /// Alpha entries recovered from the input's CLR diagonal. Nonpositive
    /// entries are permitted in a target and only flagged.
    pub implied_alpha: Vec<f64>,
    pub nonpositive_alpha: bool,
}

/// Invert the LU map alpha -> diag(Gamma): with T the trace of the CLR
/// covariance, alpha_i = (gamma_ii - T / (D (D-1))) * D / (D-2). Feeding the
/// result back through the LU structure reproduces any LU covariance
/// exactly, which is what makes these targets fixed points on LU matrices.
fn implied_alpha_from_clr_diag(diag: &[f64]) -> Vec<f64> {
    let d = diag.len() as f64;
    let trace: f64 = diag.iter().sum();
    let offset = trace / (d * (d - 1.0));
    diag.iter().map(|&g| (g - offset) * d / (d - 2.0)).collect()
}

/// LU target for an ALR covariance: the LU matrix whose alpha is recovered
/// from the CLR diagonal of S. Off-diagonal entries all equal the
/// off-diagonal mean of S.
pub fn lu_target_alr(s: &CovMatrix) -> Result<LuTarget> {
    let ref_index = match s.representation() {
        Representation::Alr { ref_index } => ref_index,
        other => {
            return Err(Error::RepresentationMismatch {
                expected: "ALR".into(),
                got: other.to_string(),
            });
        }
    };
    let gamma = crate::covariance::sigma_to_gamma(s)?;
    let diag: Vec<f64> = (0..gamma.dim()).map(|i| gamma.values()[(i, i)]).collect();
    // Alpha in natural part order, one entry per part including the reference.
    let alpha = implied_alpha_from_clr_diag(&diag);
    let nonpositive_alpha = alpha.iter().any(|&a| a <= 0.0);
    // lu_sigma_raw expects the reference alpha last; reorder for interior
    // references, keeping the non-reference parts in natural order.
    let mut reordered: Vec<f64> = alpha
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != ref_index - 1)
        .map(|(_, &a)| a)
        .collect();
    reordered.push(alpha[ref_index - 1]);
    let values = lu_sigma_raw(&reordered);
    Ok(LuTarget {
        covariance: CovMatrix::new(values, Representation::Alr { ref_index })?,
        implied_alpha: alpha,
        nonpositive_alpha,
    })
}

/// LU target for a CLR covariance, built from its diagonal only.
pub fn lu_target_clr(g: &CovMatrix) -> Result<LuTarget> {
    if g.representation() != Representation::Clr {
        return Err(Error::RepresentationMismatch {
            expected: "CLR".into(),
            got: g.representation().to_string(),
        });
    }
    let diag: Vec<f64> = (0..g.dim()).map(|i| g.values()[(i, i)]).collect();
    let alpha = implied_alpha_from_clr_diag(&diag);
    let nonpositive_alpha = alpha.iter().any(|&a| a <= 0.0);
    let values = lu_gamma_raw(&alpha);
    Ok(LuTarget {
        covariance: CovMatrix::new(values, Representation::Clr)?,
        implied_alpha: alpha,
        nonpositive_alpha,
    })
}

/// Shrink a logratio covariance directly toward an analytic target built
/// from its own entries. `x` must be the data matrix the covariance was
/// estimated from, in the same representation (it supplies the moments for
/// the intensity). `Diagonal`/`Custom` use diag(S) — the naive arms of the
/// benchmarks.
pub fn shrink_logratio_direct(
    cov: &CovMatrix,
    x: &DMatrix<f64>,
    target_kind: TargetKind,
) -> Result<ShrinkageEstimate> {
    if x.ncols() != cov.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("data with {} columns", cov.dim()),
            got: format!("{}", x.ncols()),
        });
    }
    match (target_kind, cov.representation()) {
        (TargetKind::LuAlr, Representation::Alr { .. }) => {}
        (TargetKind::LuClr, Representation::Clr) => {}
        (TargetKind::Diagonal | TargetKind::Custom, Representation::Alr { .. })
        | (TargetKind::Diagonal | TargetKind::Custom, Representation::Clr) => {}
        (kind, repr) => {
            return Err(Error::RepresentationMismatch {
                expected: format!("representation compatible with {kind} target"),
                got: repr.to_string(),
            });
        }
    }

    let (target_values, nonpositive_target_alpha) = match target_kind {
        TargetKind::LuAlr => {
            let t = lu_target_alr(cov)?;
            (t.covariance.values().clone(), t.nonpositive_alpha)
        }
        TargetKind::LuClr => {
            let t = lu_target_clr(cov)?;
            (t.covariance.values().clone(), t.nonpositive_alpha)
        }
        TargetKind::Diagonal | TargetKind::Custom => {
            (DMatrix::from_diagonal(&cov.values().diagonal()), false)
        }
    };

    let est = estimate_lambda_general(x, target_kind)?;
    let shrunk = shrink(cov.values(), &target_values, est.lambda)?;
    Ok(ShrinkageEstimate {
        covariance: CovMatrix::new(shrunk, cov.representation())?,
        lambda: est.lambda,
        lambda_var: None,
        target_kind,
        lambda_preclamp: est.preclamp,
        lambda_var_preclamp: None,
        degenerate: est.degenerate,
        approximate_cross_term: est.approximate,
        nonpositive_target_alpha,
    })
}

/// Input side of the basis pipeline.
#[derive(Debug, Clone, Copy)]
pub enum PipelineInput<'a> {
    Compositions(&'a CompositionMatrix),
    /// Counts must be zero-free (impute first).
    Counts(&'a CountMatrix),
}

/// Diagonal-target shrinkage of the constant-size basis covariance:
/// C = cov(log p), off-diagonals scaled by (1 - lambda), diagonal optionally
/// shrunk toward the median variance with its own intensity.
pub fn shrink_basis_omega(
    p: &CompositionMatrix,
    variance_shrinkage: bool,
) -> Result<(CovMatrix, LambdaEstimate, Option<VarianceShrinkage>)> {
    let logs = p.log_values();
    let c = sample_covariance(&logs)?;
    let est = estimate_lambda_diagonal(&logs)?;
    let mut omega = shrink(&c, &DMatrix::from_diagonal(&c.diagonal()), est.lambda)?;
    let vs = if variance_shrinkage {
        let v: Vec<f64> = (0..c.nrows()).map(|i| c[(i, i)]).collect();
        let vs = shrink_variances(&v, &logs)?;
        for i in 0..omega.nrows() {
            omega[(i, i)] = vs.values[i];
        }
        Some(vs)
    } else {
        None
    };
    let cov = CovMatrix::new(omega, Representation::Basis)?
        .with_labels(p.part_labels().map(|l| l.to_vec()))?;
    Ok((cov, est, vs))
}

/// The basis-covariance shrinkage pipeline: estimate the constant-size
/// (t = 1) basis covariance from the log compositions, shrink it toward its
/// diagonal, and backtransform to the requested logratio representation.
pub fn shrink_basis_pipeline(
    input: PipelineInput<'_>,
    output: Representation,
    variance_shrinkage: bool,
) -> Result<ShrinkageEstimate> {
    let owned;
    let p: &CompositionMatrix = match input {
        PipelineInput::Compositions(p) => p,
        PipelineInput::Counts(counts) => {
            // Surface the first zero with its position rather than a generic failure.
            let v = counts.values();
            for i in 0..v.nrows() {
                for j in 0..v.ncols() {
                    if v[(i, j)] == 0 {
                        return Err(Error::ZeroEntry { row: i, col: j });
                    }
                }
            }
            owned = counts.frequencies()?;
            &owned
        }
    };
    let (omega, est, vs) = shrink_basis_omega(p, variance_shrinkage)?;
    let covariance = match output {
        Representation::Alr { ref_index } => omega_to_sigma(&omega, ref_index)?,
        Representation::Clr => omega_to_gamma(&omega)?,
        Representation::Basis => {
            return Err(Error::RepresentationMismatch {
                expected: "ALR or CLR output".into(),
                got: "BASIS".into(),
            });
        }
    };
    Ok(ShrinkageEstimate {
        covariance,
        lambda: est.lambda,
        lambda_var: vs.as_ref().map(|v| v.lambda_var),
        target_kind: TargetKind::Diagonal,
        lambda_preclamp: est.preclamp,
        lambda_var_preclamp: vs.as_ref().map(|v| v.preclamp),
        degenerate: est.degenerate,
        approximate_cross_term: false,
        nonpositive_target_alpha: false,
    })
}

/// Naive direct shrinkage of a logratio covariance with a diagonal target
/// (the benchmark's naive-ALR / naive-CLR arms): diagonal-target intensity on
/// the logratio data plus optional median variance shrinkage.
pub fn shrink_diagonal_with_data(
    cov: &CovMatrix,
    x: &DMatrix<f64>,
    variance_shrinkage: bool,
) -> Result<ShrinkageEstimate> {
    if x.ncols() != cov.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("data with {} columns", cov.dim()),
            got: format!("{}", x.ncols()),
        });
    }
    let est = estimate_lambda_diagonal(x)?;
    let mut shrunk = shrink(
        cov.values(),
        &DMatrix::from_diagonal(&cov.values().diagonal()),
        est.lambda,
    )?;
    let vs = if variance_shrinkage {
        let v: Vec<f64> = (0..cov.dim()).map(|i| cov.values()[(i, i)]).collect();
        let vs = shrink_variances(&v, x)?;
        for i in 0..shrunk.nrows() {
            shrunk[(i, i)] = vs.values[i];
        }
        Some(vs)
    } else {
        None
    };
    Ok(ShrinkageEstimate {
        covariance: CovMatrix::new(shrunk, cov.representation())?,
        lambda: est.lambda,
        lambda_var: vs.as_ref().map(|v| v.lambda_var),
        target_kind: TargetKind::Diagonal,
        lambda_preclamp: est.preclamp,
        lambda_var_preclamp: vs.as_ref().map(|v| v.preclamp),
        degenerate: est.degenerate,
        approximate_cross_term: false,
        nonpositive_target_alpha: false,
    })
}

/// Conjugate normal-Wishart prior for the Bayesian reading of shrinkage.
#[derive(Debug, Clone, PartialEq)]
pub struct WishartPrior {
    nu: u64,
    v: DMatrix<f64>,
    kappa: f64,
    mu0: DVector<f64>,
}

impl WishartPrior {
    pub fn new(nu: u64, v: DMatrix<f64>, kappa: f64, mu0: DVector<f64>) -> Result<Self> {
        let k = v.nrows();
        if v.ncols() != k || mu0.len() != k {
            return Err(Error::ShapeMismatch {
                expected: format!("{k} x {k} scale matrix and mean of length {k}"),
                got: format!("{} x {}, mean {}", v.nrows(), v.ncols(), mu0.len()),
            });
        }
        if nu < k as u64 {
            return Err(Error::Scenario(format!(
                "degrees of freedom {nu} below dimension {k}"
            )));
        }
        let mut max_asym = 0.0f64;
        for i in 0..k {
            for j in (i + 1)..k {
                max_asym = max_asym.max((v[(i, j)] - v[(j, i)]).abs());
            }
        }
        if max_asym > 1e-10 {
            return Err(Error::NotSymmetric { max_abs: max_asym });
        }
        if Cholesky::new(v.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        if kappa <= 0.0 || kappa.is_nan() {
            return Err(Error::Scenario(format!("kappa {kappa} must be positive")));
        }
        Ok(Self { nu, v, kappa, mu0 })
    }

    pub fn nu(&self) -> u64 {
        self.nu
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn mu0(&self) -> &DVector<f64> {
        &self.mu0
    }
}

/// The (lambda, T) pair under which James-Stein shrinkage coincides with
/// the posterior-mode update of a normal-Wishart model:
/// lambda = (nu + 1) / (nu + N) and
/// T = (V + kappa N / (kappa + N) (xbar - mu0)(xbar - mu0)^T) / (nu + 1),
/// so that (nu + N) * shrink(S, T, lambda) equals the posterior scale
/// matrix (N - 1) S + V + kappa N / (kappa + N) (xbar - mu0)(xbar - mu0)^T.
pub fn bayes_equivalence(
    prior: &WishartPrior,
    n: usize,
    xbar: &DVector<f64>,
    s: &DMatrix<f64>,
) -> Result<(f64, DMatrix<f64>)> {
    let k = prior.v.nrows();
    if xbar.len() != k || s.nrows() != k || s.ncols() != k {
        return Err(Error::ShapeMismatch {
            expected: format!("mean of length {k} and {k} x {k} covariance"),
            got: format!(
                "mean {}, covariance {} x {}",
                xbar.len(),
                s.nrows(),
                s.ncols()
            ),
        });
    }
    let nu = prior.nu as f64;
    let nf = n as f64;
    let lambda = (nu + 1.0) / (nu + nf);
    let diff = xbar - &prior.mu0;
    let weight = prior.kappa * nf / (prior.kappa + nf);
    let t = (&prior.v + &diff * diff.transpose() * weight) / (nu + 1.0);
    Ok((lambda, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::{alr, closure, clr};
    use crate::covariance::partial_correlation;
    use crate::lu::AlphaVector;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
    }

    fn gaussian_iid(n: usize, k: usize, sds: &[f64], rng: &mut ChaCha20Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, k, |_, j| {
            let z: f64 = rng.sample(StandardNormal);
            z * sds[j]
        })
    }

    #[test]
    fn shrink_endpoints_and_midpoint() {
        let s = DMatrix::from_row_slice(1, 1, &[2.0]);
        let t = DMatrix::from_row_slice(1, 1, &[4.0]);
        assert_eq!(shrink(&s, &t, 0.0).unwrap()[(0, 0)], 2.0);
        assert_eq!(shrink(&s, &t, 1.0).unwrap()[(0, 0)], 4.0);
        assert_eq!(shrink(&s, &t, 0.5).unwrap()[(0, 0)], 3.0);
        assert!(matches!(
            shrink(&s, &t, 1.5),
            Err(Error::LambdaOutOfRange(_))
        ));
        let bad = DMatrix::zeros(2, 2);
        assert!(matches!(
            shrink(&s, &bad, 0.5),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn lambda_diagonal_near_one_for_uncorrelated_population() {
        // Small N, truly diagonal population: the target is right, shrink hard.
        let mut lambdas = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha20Rng::seed_from_u64(1000 + seed);
            let sds = vec![1.0; 20];
            let x = gaussian_iid(8, 20, &sds, &mut rng);
            lambdas.push(estimate_lambda_diagonal(&x).unwrap().lambda);
        }
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(lambdas[50] > 0.8, "median lambda {}", lambdas[50]);
    }

    #[test]
    fn lambda_diagonal_near_zero_for_duplicated_columns() {
        // Perfect correlation, lots of data: the diagonal target is wrong.
        let mut lambdas = Vec::new();
        for seed in 0..100 {
            let mut rng = ChaCha20Rng::seed_from_u64(2000 + seed);
            let n = 500;
            let x = DMatrix::from_fn(n, 2, |i, _| {
                let _ = i;
                0.0
            });
            let mut x = x;
            for i in 0..n {
                let z: f64 = rng.sample(StandardNormal);
                x[(i, 0)] = 5.0 * z;
                x[(i, 1)] = 5.0 * z;
            }
            lambdas.push(estimate_lambda_diagonal(&x).unwrap().lambda);
        }
        lambdas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(lambdas[50] < 0.2, "median lambda {}", lambdas[50]);
    }

    #[test]
    fn lambda_diagonal_degenerate_denominator() {
        // Constant columns: every off-diagonal covariance is exactly zero.
        let x = DMatrix::from_fn(5, 3, |_, j| j as f64);
        let est = estimate_lambda_diagonal(&x).unwrap();
        assert_eq!(est.lambda, 1.0);
        assert!(est.degenerate);
    }

    #[test]
    fn lambda_diagonal_requires_three_samples() {
        let x = DMatrix::zeros(2, 3);
        assert!(matches!(
            estimate_lambda_diagonal(&x),
            Err(Error::TooFewSamples { .. })
        ));
    }

    /// Independent diagonal-target intensity oracle with naked loops.
    fn lambda_diagonal_oracle(x: &DMatrix<f64>) -> f64 {
        let n = x.nrows();
        let k = x.ncols();
        let nf = n as f64;
        let means: Vec<f64> = (0..k).map(|j| x.column(j).sum() / nf).collect();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                let w: Vec<f64> = (0..n)
                    .map(|m| (x[(m, i)] - means[i]) * (x[(m, j)] - means[j]))
                    .collect();
                let w_mean = w.iter().sum::<f64>() / nf;
                let var_hat =
                    nf / (nf - 1.0).powi(3) * w.iter().map(|v| (v - w_mean).powi(2)).sum::<f64>();
                let s_ij = nf / (nf - 1.0) * w_mean;
                num += var_hat;
                den += s_ij * s_ij;
            }
        }
        (num / den).clamp(0.0, 1.0)
    }

    #[test]
    fn general_machinery_reduces_to_diagonal_formula() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for _ in 0..10 {
            let x = DMatrix::from_fn(12, 6, |_, _| rng.random_range(-1.0..1.0));
            let via_general = estimate_lambda_general(&x, TargetKind::Diagonal)
                .unwrap()
                .lambda;
            let via_diag = estimate_lambda_diagonal(&x).unwrap().lambda;
            let oracle = lambda_diagonal_oracle(&x);
            assert!((via_general - via_diag).abs() < 1e-12);
            assert!((via_general - oracle).abs() < 1e-12);
        }
    }

    /// Brute-force cross term: expand tau as explicit linear combinations of
    /// covariance entries and sum cov-hat(s_ij, s_kl) with those coefficients.
    fn cross_term_oracle(x: &DMatrix<f64>, kind: TargetKind) -> f64 {
        let n = x.nrows();
        let k = x.ncols();
        let nf = n as f64;
        let scale = nf / (nf - 1.0).powi(3);
        let means: Vec<f64> = (0..k).map(|j| x.column(j).sum() / nf).collect();
        let w = |m: usize, i: usize, j: usize| (x[(m, i)] - means[i]) * (x[(m, j)] - means[j]);
        let w_mean = |i: usize, j: usize| (0..n).map(|m| w(m, i, j)).sum::<f64>() / nf;
        let cov_hat = |i: usize, j: usize, a: usize, b: usize| {
            let mij = w_mean(i, j);
            let mab = w_mean(a, b);
            scale
                * (0..n)
                    .map(|m| (w(m, i, j) - mij) * (w(m, a, b) - mab))
                    .sum::<f64>()
        };
        // coefficient of s_ab inside tau_ij, for i != j
        let coef = |i: usize, j: usize, a: usize, b: usize| -> f64 {
            match kind {
                TargetKind::LuAlr => {
                    let d = (k + 1) as f64;
                    if a != b {
                        1.0 / ((d - 1.0) * (d - 2.0))
                    } else {
                        0.0
                    }
                }
                TargetKind::LuClr => {
                    let d = k as f64;
                    if a != b {
                        0.0
                    } else {
                        let mut c = 1.0 / ((d - 1.0) * (d - 2.0));
                        if a == i {
                            c -= 1.0 / (d - 2.0);
                        }
                        if a == j {
                            c -= 1.0 / (d - 2.0);
                        }
                        c
                    }
                }
                _ => 0.0,
            }
        };
        let mut total = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i == j {
                    continue;
                }
                for a in 0..k {
                    for b in 0..k {
                        let c = coef(i, j, a, b);
                        if c != 0.0 {
                            total += c * cov_hat(i, j, a, b);
                        }
                    }
                }
            }
        }
        total
    }

    fn lambda_general_oracle(x: &DMatrix<f64>, kind: TargetKind) -> f64 {
        let moments = Moments::new(x).unwrap();
        let s = moments.s.clone();
        let target = match kind {
            TargetKind::LuAlr => {
                let cov = CovMatrix::new(
                    s.clone(),
                    Representation::Alr {
                        ref_index: s.nrows() + 1,
                    },
                )
                .unwrap();
                lu_target_alr(&cov).unwrap().covariance.values().clone()
            }
            TargetKind::LuClr => {
                let cov = CovMatrix::new(s.clone(), Representation::Clr).unwrap();
                lu_target_clr(&cov).unwrap().covariance.values().clone()
            }
            _ => DMatrix::from_diagonal(&s.diagonal()),
        };
        let mut den = 0.0;
        for i in 0..s.nrows() {
            for j in 0..s.nrows() {
                if i != j {
                    den += (s[(i, j)] - target[(i, j)]).powi(2);
                }
            }
        }
        let var_sum = moments.offdiag_variance_sum();
        ((var_sum - cross_term_oracle(x, kind)) / den).clamp(0.0, 1.0)
    }

    #[test]
    fn general_lambda_matches_brute_force_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(32);
        for kind in [TargetKind::LuAlr, TargetKind::LuClr] {
            for _ in 0..5 {
                let x = DMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
                let fast = estimate_lambda_general(&x, kind).unwrap().lambda;
                let slow = lambda_general_oracle(&x, kind);
                assert!(
                    (fast - slow).abs() < 1e-12,
                    "{kind}: fast {fast} vs oracle {slow}"
                );
            }
        }
    }

    #[test]
    fn general_lambda_higher_for_lu_population() {
        // Paired comparison: data from an exactly LU population should pull
        // the LU-target intensity above that of a correlated population.
        let alpha = AlphaVector::new(vec![1.0, 0.6, 1.4, 0.9, 1.2, 0.8]).unwrap();
        let sigma_lu = crate::lu::lu_sigma(&alpha);
        let chol_lu = Cholesky::new(sigma_lu.values().clone()).unwrap();
        // Non-LU covariance with structured off-diagonal signal.
        let mut non_lu = sigma_lu.values().clone();
        for i in 0..5 {
            for j in 0..5 {
                if i != j {
                    non_lu[(i, j)] += 0.45 * if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                }
            }
        }
        let chol_non = Cholesky::new(non_lu.clone()).expect("still PD");

        let draw = |chol: &Cholesky<f64, nalgebra::Dyn>, rng: &mut ChaCha20Rng| {
            let n = 12;
            DMatrix::from_fn(n, 5, |_, _| rng.sample::<f64, _>(StandardNormal))
                * chol.l().transpose()
        };
        let mut wins = 0;
        for seed in 0..100 {
            let mut rng = ChaCha20Rng::seed_from_u64(3000 + seed);
            let x_lu = draw(&chol_lu, &mut rng);
            let x_non = draw(&chol_non, &mut rng);
            let l_lu = estimate_lambda_general(&x_lu, TargetKind::LuAlr)
                .unwrap()
                .lambda;
            let l_non = estimate_lambda_general(&x_non, TargetKind::LuAlr)
                .unwrap()
                .lambda;
            if l_lu > l_non {
                wins += 1;
            }
        }
        assert!(wins > 50, "LU population won only {wins}/100 comparisons");
    }

    #[test]
    fn general_lambda_degenerate_for_constant_columns() {
        let x = DMatrix::from_fn(6, 4, |_, j| j as f64 * 2.0);
        let est = estimate_lambda_general(&x, TargetKind::LuClr).unwrap();
        assert_eq!(est.lambda, 1.0);
        assert!(est.degenerate);
    }

    #[test]
    fn general_lambda_approximate_mode_above_limit() {
        let mut rng = ChaCha20Rng::seed_from_u64(33);
        let x = DMatrix::from_fn(10, 6, |_, _| rng.random_range(-1.0..1.0));
        let exact = estimate_lambda_general_with(&x, TargetKind::LuAlr, 100).unwrap();
        let approx = estimate_lambda_general_with(&x, TargetKind::LuAlr, 3).unwrap();
        assert!(!exact.approximate);
        assert!(approx.approximate);
        assert_ne!(exact.lambda, approx.lambda);
    }

    #[test]
    fn variance_shrinkage_fixed_points() {
        // Equal variances: the median is the data, nothing moves.
        let mut rng = ChaCha20Rng::seed_from_u64(34);
        let x = gaussian_iid(10, 4, &[1.0; 4], &mut rng);
        let v = vec![2.5; 4];
        let vs = shrink_variances(&v, &x).unwrap();
        assert_eq!(vs.values, v);
        assert_eq!(vs.lambda_var, 1.0);

        // Forced full shrinkage: everything lands on the median.
        let v = vec![1.0, 2.0, 10.0];
        let forced = apply_variance_shrinkage(&v, 2.0, 1.0);
        assert_eq!(forced, vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn variance_shrinkage_reduces_mse_for_equal_population() {
        // True variances all 1; with N = 8 the raw variances scatter and
        // pulling toward the median must help on aggregate.
        let mut raw_mse = 0.0;
        let mut shrunk_mse = 0.0;
        for seed in 0..100 {
            let mut rng = ChaCha20Rng::seed_from_u64(4000 + seed);
            let x = gaussian_iid(8, 10, &[1.0; 10], &mut rng);
            let c = sample_covariance(&x).unwrap();
            let v: Vec<f64> = (0..10).map(|i| c[(i, i)]).collect();
            let vs = shrink_variances(&v, &x).unwrap();
            raw_mse += v.iter().map(|vi| (vi - 1.0).powi(2)).sum::<f64>();
            shrunk_mse += vs.values.iter().map(|vi| (vi - 1.0).powi(2)).sum::<f64>();
        }
        assert!(
            shrunk_mse < raw_mse,
            "shrunk {shrunk_mse} not below raw {raw_mse}"
        );
    }

    #[test]
    fn lu_targets_are_fixed_points() {
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        for _ in 0..20 {
            let d = rng.random_range(3..=12);
            let alpha =
                AlphaVector::new((0..d).map(|_| rng.random_range(0.3..4.0)).collect()).unwrap();
            let sigma = crate::lu::lu_sigma(&alpha);
            let t_alr = lu_target_alr(&sigma).unwrap();
            assert!(
                max_abs_diff(t_alr.covariance.values(), sigma.values()) < 1e-12,
                "ALR target moved an LU matrix"
            );
            assert!(!t_alr.nonpositive_alpha);
            for (a, b) in t_alr.implied_alpha.iter().zip(alpha.values()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }

            let gamma = crate::lu::lu_gamma(&alpha);
            let t_clr = lu_target_clr(&gamma).unwrap();
            assert!(
                max_abs_diff(t_clr.covariance.values(), gamma.values()) < 1e-12,
                "CLR target moved an LU matrix"
            );
        }
    }

    #[test]
    fn lu_target_alr_structure() {
        // Off-diagonals all equal the off-diagonal mean; zero maps to zero.
        let mut rng = ChaCha20Rng::seed_from_u64(36);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let s = CovMatrix::new(
            &a * a.transpose() + DMatrix::identity(4, 4),
            Representation::Alr { ref_index: 5 },
        )
        .unwrap();
        let t = lu_target_alr(&s).unwrap();
        let tv = t.covariance.values();
        let mut offdiag_mean = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    offdiag_mean += s.values()[(i, j)];
                }
            }
        }
        offdiag_mean /= 12.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_abs_diff_eq!(tv[(i, j)], offdiag_mean, epsilon = 1e-12);
                }
            }
        }

        let zero =
            CovMatrix::new(DMatrix::zeros(3, 3), Representation::Alr { ref_index: 4 }).unwrap();
        let t = lu_target_alr(&zero).unwrap();
        assert!(t.covariance.values().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn lu_target_alr_fixed_point_with_interior_reference() {
        // An LU covariance expressed against an interior reference part:
        // collapse a diagonal basis covariance at reference r. The target
        // must hand it back with alpha reported in natural part order.
        let mut rng = ChaCha20Rng::seed_from_u64(45);
        for _ in 0..10 {
            let d = rng.random_range(4..=9);
            let r = rng.random_range(1..d); // strictly interior
            let alpha: Vec<f64> = (0..d).map(|_| rng.random_range(0.3..4.0)).collect();
            let omega = CovMatrix::new(
                DMatrix::from_diagonal(&DVector::from_vec(alpha.clone())),
                Representation::Basis,
            )
            .unwrap();
            let sigma = crate::covariance::omega_to_sigma(&omega, r).unwrap();
            let t = lu_target_alr(&sigma).unwrap();
            assert!(
                max_abs_diff(t.covariance.values(), sigma.values()) < 1e-12,
                "interior reference {r} of {d} moved an LU matrix"
            );
            for (got, want) in t.implied_alpha.iter().zip(&alpha) {
                assert_abs_diff_eq!(got, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn lu_target_alr_identity_is_boundary_lu() {
        // S = I is the alpha_D -> 0 boundary of the LU family: the exact
        // inversion returns it unchanged with a flagged zero alpha.
        let s = CovMatrix::new(
            DMatrix::identity(2, 2),
            Representation::Alr { ref_index: 3 },
        )
        .unwrap();
        let t = lu_target_alr(&s).unwrap();
        assert!(max_abs_diff(t.covariance.values(), s.values()) < 1e-12);
        assert!(t.nonpositive_alpha);
        assert_abs_diff_eq!(t.implied_alpha[2], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn lu_target_clr_uses_diagonal_only_and_balances_rows() {
        let mut rng = ChaCha20Rng::seed_from_u64(37);
        let alpha = AlphaVector::new((0..5).map(|_| rng.random_range(0.3..4.0)).collect()).unwrap();
        let gamma = crate::lu::lu_gamma(&alpha);
        // Perturb only the off-diagonal: the target must not change.
        let mut bent = gamma.values().clone();
        bent[(0, 1)] += 0.1;
        bent[(1, 0)] += 0.1;
        bent[(0, 2)] -= 0.1;
        bent[(2, 0)] -= 0.1;
        let bent = CovMatrix::new(bent, Representation::Clr).unwrap();
        let t1 = lu_target_clr(&gamma).unwrap();
        let t2 = lu_target_clr(&bent).unwrap();
        assert!(max_abs_diff(t1.covariance.values(), t2.covariance.values()) < 1e-12);
        assert!(t1.covariance.clr_row_sums_within(1e-10));

        // Equal diagonal d: consistent with an equal-alpha LU matrix, so the
        // diagonal is reproduced as-is.
        let g = CovMatrix::new(crate::lu::lu_gamma_raw(&[2.0; 6]), Representation::Clr).unwrap();
        let t = lu_target_clr(&g).unwrap();
        for i in 0..6 {
            assert_abs_diff_eq!(
                t.covariance.values()[(i, i)],
                g.values()[(i, i)],
                epsilon = 1e-12
            );
        }

        let zero = CovMatrix::new(DMatrix::zeros(4, 4), Representation::Clr).unwrap();
        let t = lu_target_clr(&zero).unwrap();
        assert!(t.covariance.values().iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn lu_clr_target_matches_its_linear_coefficient_form() {
        // The intensity machinery treats the CLR target as a fixed linear
        // combination of the covariance diagonal; that expansion must agree
        // with the target builder itself entry by entry.
        let mut rng = ChaCha20Rng::seed_from_u64(46);
        for _ in 0..10 {
            let d = rng.random_range(4..=9);
            let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            let g = CovMatrix::new(
                &a * a.transpose() + DMatrix::identity(d, d),
                Representation::Clr,
            )
            .unwrap();
            let target = lu_target_clr(&g).unwrap();
            let df = d as f64;
            let trace: f64 = (0..d).map(|i| g.values()[(i, i)]).sum();
            for i in 0..d {
                for j in 0..d {
                    if i == j {
                        continue;
                    }
                    let linear = -(g.values()[(i, i)] + g.values()[(j, j)]) / (df - 2.0)
                        + trace / ((df - 1.0) * (df - 2.0));
                    assert_abs_diff_eq!(
                        target.covariance.values()[(i, j)],
                        linear,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn direct_shrinkage_representation_checks() {
        let s = CovMatrix::new(DMatrix::identity(3, 3), Representation::Clr).unwrap();
        let x = DMatrix::zeros(5, 3);
        assert!(matches!(
            shrink_logratio_direct(&s, &x, TargetKind::LuAlr),
            Err(Error::RepresentationMismatch { .. })
        ));
    }

    fn random_compositions(n: usize, d: usize, rng: &mut ChaCha20Rng) -> CompositionMatrix {
        let raw = DMatrix::from_fn(n, d, |_, _| rng.random_range(0.05..4.0));
        closure(&raw).unwrap()
    }

    #[test]
    fn pipeline_vanishing_lambda_recovers_sample_covariance() {
        // Plenty of samples, strong correlation: lambda is tiny and the
        // pipeline output approaches the plain logratio sample covariance.
        let mut rng = ChaCha20Rng::seed_from_u64(38);
        let n = 4000;
        let d = 4;
        let mut raw = DMatrix::zeros(n, d);
        for i in 0..n {
            let base: f64 = rng.random_range(0.5..2.0);
            for j in 0..d {
                let wobble: f64 = rng.random_range(0.9..1.1);
                raw[(i, j)] = base.powf(1.0 + j as f64) * wobble;
            }
        }
        let p = closure(&raw).unwrap();
        let est = shrink_basis_pipeline(
            PipelineInput::Compositions(&p),
            Representation::Alr { ref_index: d },
            false,
        )
        .unwrap();
        assert!(est.lambda < 0.05, "lambda {}", est.lambda);
        let x = alr(&p, d).unwrap();
        let s = sample_covariance(x.values()).unwrap();
        let scale = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(est.covariance.values(), &s) < 0.05 * scale);
    }

    #[test]
    fn pipeline_makes_wide_data_invertible() {
        let mut rng = ChaCha20Rng::seed_from_u64(39);
        let p = random_compositions(8, 40, &mut rng);
        let x = alr(&p, 40).unwrap();
        let raw_cov = CovMatrix::sample_alr(&x).unwrap();
        assert!(matches!(
            partial_correlation(&raw_cov),
            Err(Error::SingularCovariance { .. })
        ));

        let est = shrink_basis_pipeline(
            PipelineInput::Compositions(&p),
            Representation::Alr { ref_index: 40 },
            true,
        )
        .unwrap();
        assert!(Cholesky::new(est.covariance.values().clone()).is_some());
        assert!(partial_correlation(&est.covariance).is_ok());
    }

    #[test]
    fn pipeline_alr_and_clr_partial_correlations_agree() {
        let mut rng = ChaCha20Rng::seed_from_u64(40);
        let p = random_compositions(12, 8, &mut rng);
        let alr_est = shrink_basis_pipeline(
            PipelineInput::Compositions(&p),
            Representation::Alr { ref_index: 8 },
            true,
        )
        .unwrap();
        let clr_est =
            shrink_basis_pipeline(PipelineInput::Compositions(&p), Representation::Clr, true)
                .unwrap();
        let r_alr = partial_correlation(&alr_est.covariance).unwrap();
        let r_clr = partial_correlation(&clr_est.covariance).unwrap();
        for i in 0..7 {
            for j in 0..7 {
                assert!(
                    (r_alr.values()[(i, j)] - r_clr.values()[(i, j)]).abs() < 1e-9,
                    "pipeline ALR/CLR partial correlations diverge at ({i},{j})"
                );
            }
        }
    }

    #[test]
    fn pipeline_positive_definite_across_seeds() {
        for seed in 0..20 {
            let mut rng = ChaCha20Rng::seed_from_u64(5000 + seed);
            let n = rng.random_range(3..10);
            let d = rng.random_range(12..30);
            let p = random_compositions(n, d, &mut rng);
            let est = shrink_basis_pipeline(
                PipelineInput::Compositions(&p),
                Representation::Alr { ref_index: d },
                true,
            )
            .unwrap();
            assert!(
                Cholesky::new(est.covariance.values().clone()).is_some(),
                "seed {seed}: pipeline output not PD (n={n}, d={d})"
            );
        }
    }

    #[test]
    fn pipeline_rejects_zero_counts() {
        let counts =
            CountMatrix::new(DMatrix::from_row_slice(2, 3, &[1u64, 0, 3, 2, 2, 2]), None).unwrap();
        assert!(matches!(
            shrink_basis_pipeline(PipelineInput::Counts(&counts), Representation::Clr, true),
            Err(Error::ZeroEntry { row: 0, col: 1 })
        ));
    }

    #[test]
    fn shrinking_omega_commutes_with_the_transform() {
        // The basis-to-ALR collapse is linear, so shrinking before or after
        // transforming must agree exactly.
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        let a = DMatrix::from_fn(5, 5, |_, _| rng.random_range(-1.0..1.0));
        let omega_vals = &a * a.transpose() + DMatrix::identity(5, 5);
        let omega = CovMatrix::new(omega_vals.clone(), Representation::Basis).unwrap();
        let target = DMatrix::from_diagonal(&omega_vals.diagonal());
        let lambda = 0.37;

        let shrunk_omega = CovMatrix::new(
            shrink(&omega_vals, &target, lambda).unwrap(),
            Representation::Basis,
        )
        .unwrap();
        let route_a = omega_to_sigma(&shrunk_omega, 5).unwrap();

        let sigma = omega_to_sigma(&omega, 5).unwrap();
        let target_cov = CovMatrix::new(target, Representation::Basis).unwrap();
        let sigma_target = omega_to_sigma(&target_cov, 5).unwrap();
        let route_b = shrink(sigma.values(), sigma_target.values(), lambda).unwrap();

        assert!(max_abs_diff(route_a.values(), &route_b) < 1e-12);
    }

    #[test]
    fn direct_lu_shrinkage_smoke() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let p = random_compositions(15, 6, &mut rng);
        let x = alr(&p, 6).unwrap();
        let s = CovMatrix::sample_alr(&x).unwrap();
        let est = shrink_logratio_direct(&s, x.values(), TargetKind::LuAlr).unwrap();
        assert!((0.0..=1.0).contains(&est.lambda));
        assert_eq!(est.target_kind, TargetKind::LuAlr);

        let y = clr(&p);
        let g = CovMatrix::sample_clr(&y).unwrap();
        let est = shrink_logratio_direct(&g, y.values(), TargetKind::LuClr).unwrap();
        assert!((0.0..=1.0).contains(&est.lambda));
    }

    #[test]
    fn bayes_lambda_spot_check() {
        let prior = WishartPrior::new(1, DMatrix::identity(1, 1), 1.0, DVector::zeros(1)).unwrap();
        let (lambda, _) =
            bayes_equivalence(&prior, 3, &DVector::zeros(1), &DMatrix::identity(1, 1)).unwrap();
        assert_abs_diff_eq!(lambda, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn bayes_target_with_matching_mean() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let prior =
            WishartPrior::new(4, v.clone(), 2.0, DVector::from_vec(vec![0.3, -0.1])).unwrap();
        let xbar = DVector::from_vec(vec![0.3, -0.1]);
        let (_, t) = bayes_equivalence(&prior, 10, &xbar, &DMatrix::identity(2, 2)).unwrap();
        assert!(max_abs_diff(&t, &(v / 5.0)) < 1e-14);
    }

    #[test]
    fn bayes_identity_on_random_instances() {
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        for _ in 0..100 {
            let k = rng.random_range(2..6);
            let a = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let v = &a * a.transpose() + DMatrix::identity(k, k);
            let nu = rng.random_range(k as u64..k as u64 + 10);
            let kappa = rng.random_range(0.1..5.0);
            let mu0 = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            let prior = WishartPrior::new(nu, v.clone(), kappa, mu0.clone()).unwrap();

            let n = rng.random_range(2usize..30);
            let xbar = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            let b = DMatrix::from_fn(k, k, |_, _| rng.random_range(-1.0..1.0));
            let s = &b * b.transpose();

            let (lambda, t) = bayes_equivalence(&prior, n, &xbar, &s).unwrap();
            let shrunk = shrink(&s, &t, lambda).unwrap();
            let lhs = shrunk * (nu as f64 + n as f64);
            let diff = &xbar - &mu0;
            let rhs = &s * (n as f64 - 1.0)
                + &v
                + &diff * diff.transpose() * (kappa * n as f64 / (kappa + n as f64));
            assert!(max_abs_diff(&lhs, &rhs) < 1e-10);
        }
    }

    #[test]
    fn wishart_prior_validation() {
        assert!(matches!(
            WishartPrior::new(1, DMatrix::identity(2, 2), 1.0, DVector::zeros(2)),
            Err(Error::Scenario(_))
        ));
        assert!(matches!(
            WishartPrior::new(
                3,
                DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
                1.0,
                DVector::zeros(2)
            ),
            Err(Error::NotPositiveDefinite)
        ));
    }
}
