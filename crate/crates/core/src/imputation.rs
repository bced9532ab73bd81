//! Zero replacement for count bases.
//!
//! Count zeros must be handled before any log transform. Two row-wise
//! methods are provided: multiplicative replacement with a per-row pseudo
//! detection limit (CZM style), and James-Stein shrinkage of the multinomial
//! frequencies toward the uniform distribution, which imputes zeros as a
//! side effect whenever the shrinkage intensity is positive.

use nalgebra::DMatrix;

use crate::composition::{CompositionMatrix, CountMatrix};
use crate::error::{Error, Result};

/// Which imputation produced a frequency matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputationMethod {
    Czm,
    FreqShrink,
}

impl std::fmt::Display for ImputationMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ImputationMethod::Czm => write!(f, "czm"),
            ImputationMethod::FreqShrink => write!(f, "freq-shrink"),
        }
    }
}

/// Imputation parameters and per-row diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationParams {
    /// CZM detection-limit fraction (None for frequency shrinkage).
    pub delta_fraction: Option<f64>,
    /// Per-row shrinkage intensities (frequency shrinkage only).
    pub row_lambdas: Option<Vec<f64>>,
    /// Rows where frequency shrinkage fell back to CZM (lambda = 0 with
    /// zeros present).
    pub czm_fallback_rows: Vec<usize>,
}

/// Strictly positive frequencies with unit row sums, plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedFrequencies {
    values: CompositionMatrix,
    method: ImputationMethod,
    params: ImputationParams,
}

impl ImputedFrequencies {
    pub fn values(&self) -> &CompositionMatrix {
        &self.values
    }

    pub fn into_compositions(self) -> CompositionMatrix {
        self.values
    }

    pub fn method(&self) -> ImputationMethod {
        self.method
    }

    pub fn params(&self) -> &ImputationParams {
        &self.params
    }
}

/// Default CZM detection-limit fraction.
pub const DEFAULT_DELTA_FRACTION: f64 = 0.65;

fn czm_row(
    counts: &CountMatrix,
    row: usize,
    delta_fraction: f64,
    out: &mut DMatrix<f64>,
) -> Result<()> {
    let d = counts.n_parts();
    let n: u64 = counts.values().row(row).iter().sum();
    if n == 0 {
        return Err(Error::EmptyRow { row });
    }
    let nf = n as f64;
    let zeros = counts.values().row(row).iter().filter(|&&c| c == 0).count();
    if zeros == 0 {
        for j in 0..d {
            out[(row, j)] = counts.values()[(row, j)] as f64 / nf;
        }
        return Ok(());
    }
    // Zero cells get delta = fraction of the pseudo detection limit 1/(n+1);
    // observed cells are scaled multiplicatively so the row stays on the simplex.
    let delta = delta_fraction / (nf + 1.0);
    let replaced_mass = zeros as f64 * delta;
    if replaced_mass >= 1.0 {
        return Err(Error::DeltaExceedsRowMass { row, zeros, delta });
    }
    for j in 0..d {
        let c = counts.values()[(row, j)];
        out[(row, j)] = if c == 0 {
            delta
        } else {
            (c as f64 / nf) * (1.0 - replaced_mass)
        };
    }
    Ok(())
}

/// Count Zero Multiplicative replacement.
///
/// Zero cells of a row with total n become `delta_fraction / (n + 1)`; the
/// observed frequencies are scaled by one minus the replaced mass, so each
/// row keeps its unit sum. Zero-free rows reduce to plain closure.
pub fn impute_czm(counts: &CountMatrix, delta_fraction: f64) -> Result<ImputedFrequencies> {
    if !(delta_fraction > 0.0 && delta_fraction < 1.0) {
        return Err(Error::DeltaOutOfRange(delta_fraction));
    }
    let mut out = DMatrix::zeros(counts.n_samples(), counts.n_parts());
    for row in 0..counts.n_samples() {
        czm_row(counts, row, delta_fraction, &mut out)?;
    }
    let values = CompositionMatrix::new(out, counts.part_labels().map(|l| l.to_vec()))?;
    Ok(ImputedFrequencies {
        values,
        method: ImputationMethod::Czm,
        params: ImputationParams {
            delta_fraction: Some(delta_fraction),
            row_lambdas: None,
            czm_fallback_rows: Vec::new(),
        },
    })
}

/// James-Stein shrinkage of multinomial frequencies toward uniform.
///
/// Per row with total n and ML frequencies theta:
/// `lambda = (1 - sum theta^2) / ((n - 1) * sum (1/D - theta)^2)`, clamped
/// to [0, 1] with a zero denominator mapping to 1 (the target is already
/// attained). Zeros become strictly positive whenever lambda > 0; the rare
/// lambda = 0 rows with zeros fall back to CZM and are reported.
pub fn impute_freq_shrink(counts: &CountMatrix) -> Result<ImputedFrequencies> {
    let d = counts.n_parts();
    let df = d as f64;
    let uniform = 1.0 / df;
    let mut out = DMatrix::zeros(counts.n_samples(), d);
    let mut row_lambdas = Vec::with_capacity(counts.n_samples());
    let mut czm_fallback_rows = Vec::new();

    for row in 0..counts.n_samples() {
        let n: u64 = counts.values().row(row).iter().sum();
        if n < 2 {
            return Err(Error::RowTotalTooSmall { row, total: n });
        }
        let nf = n as f64;
        let theta: Vec<f64> = (0..d)
            .map(|j| counts.values()[(row, j)] as f64 / nf)
            .collect();
        let sum_sq: f64 = theta.iter().map(|t| t * t).sum();
        let dist_sq: f64 = theta.iter().map(|t| (uniform - t).powi(2)).sum();
        let lambda = if dist_sq == 0.0 {
            1.0
        } else {
            ((1.0 - sum_sq) / ((nf - 1.0) * dist_sq)).clamp(0.0, 1.0)
        };
        row_lambdas.push(lambda);

        let has_zero = theta.contains(&0.0);
        if lambda == 0.0 && has_zero {
            czm_fallback_rows.push(row);
            czm_row(counts, row, DEFAULT_DELTA_FRACTION, &mut out)?;
        } else {
            for j in 0..d {
                out[(row, j)] = lambda * uniform + (1.0 - lambda) * theta[j];
            }
        }
    }

    let values = CompositionMatrix::new(out, counts.part_labels().map(|l| l.to_vec()))?;
    Ok(ImputedFrequencies {
        values,
        method: ImputationMethod::FreqShrink,
        params: ImputationParams {
            delta_fraction: None,
            row_lambdas: Some(row_lambdas),
            czm_fallback_rows,
        },
    })
}
