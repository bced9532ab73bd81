//! Logistic-normal sampling, densities, and seeded RNG streams.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};

use crate::composition::{AlrMatrix, CompositionMatrix, alr, alr_inverse};
use crate::covariance::{CovMatrix, Representation};
use crate::error::{Error, Result};

/// Deterministic, order-independent RNG stream for a benchmark stage.
///
/// The ChaCha20 key is the little-endian bytes of `(master_seed, repetition,
/// stage)` followed by the fixed tag `b"logratio"`, so any implementation of
/// ChaCha20 with the same key layout reproduces the stream exactly,
/// regardless of how repetitions are scheduled across threads.
pub fn rng_stream(master_seed: u64, repetition: u64, stage: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&repetition.to_le_bytes());
    key[16..24].copy_from_slice(&stage.to_le_bytes());
    key[24..32].copy_from_slice(b"logratio");
    ChaCha20Rng::from_seed(key)
}

/// Lower Cholesky factor of an ALR covariance, or NotPositiveDefinite.
pub(crate) fn cholesky_factor(sigma: &CovMatrix) -> Result<DMatrix<f64>> {
    match sigma.representation() {
        Representation::Alr { .. } => {}
        other => {
            return Err(Error::RepresentationMismatch {
                expected: "ALR".into(),
                got: other.to_string(),
            });
        }
    }
    Cholesky::new(sigma.values().clone())
        .map(|c| c.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Draw `n` logistic-normal compositions: ALR coordinates are multivariate
/// normal with the given mean and covariance, then backtransformed to the
/// simplex. Deterministic for a fixed seed.
pub fn sample_logistic_normal(
    mu: &DVector<f64>,
    sigma: &CovMatrix,
    n: usize,
    seed: u64,
) -> Result<CompositionMatrix> {
    let factor = cholesky_factor(sigma)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    sample_logistic_normal_prepared(mu, &factor, sigma_ref_index(sigma)?, n, &mut rng)
}

fn sigma_ref_index(sigma: &CovMatrix) -> Result<usize> {
    match sigma.representation() {
        Representation::Alr { ref_index } => Ok(ref_index),
        other => Err(Error::RepresentationMismatch {
            expected: "ALR".into(),
            got: other.to_string(),
        }),
    }
}

/// Sampling core for callers that manage the Cholesky factor and RNG stream
/// themselves (the benchmark reuses the factor across repetitions).
pub(crate) fn sample_logistic_normal_prepared(
    mu: &DVector<f64>,
    chol_l: &DMatrix<f64>,
    ref_index: usize,
    n: usize,
    rng: &mut ChaCha20Rng,
) -> Result<CompositionMatrix> {
    let k = chol_l.nrows();
    if mu.len() != k {
        return Err(Error::ShapeMismatch {
            expected: format!("mean of length {k}"),
            got: format!("{}", mu.len()),
        });
    }
    let mut x = DMatrix::zeros(n, k);
    let mut z = DVector::zeros(k);
    for i in 0..n {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let row = mu + chol_l * &z;
        for j in 0..k {
            x[(i, j)] = row[j];
        }
    }
    let alr_matrix = AlrMatrix::new(x, ref_index, None)?;
    alr_inverse(&alr_matrix)
}

/// Log-density of the logistic-normal distribution at a single composition:
/// the Gaussian log-density of its ALR coordinates plus the Jacobian term
/// -sum_j log p_j.
pub fn logistic_normal_logdensity(
    p: &DVector<f64>,
    mu: &DVector<f64>,
    sigma: &CovMatrix,
) -> Result<f64> {
    let ref_index = sigma_ref_index(sigma)?;
    let k = sigma.dim();
    if p.len() != k + 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("composition of {} parts", k + 1),
            got: format!("{}", p.len()),
        });
    }
    if mu.len() != k {
        return Err(Error::ShapeMismatch {
            expected: format!("mean of length {k}"),
            got: format!("{}", mu.len()),
        });
    }
    let chol = Cholesky::new(sigma.values().clone()).ok_or(Error::NotPositiveDefinite)?;

    let comp = CompositionMatrix::new(DMatrix::from_fn(1, k + 1, |_, j| p[j]), None)?;
    let x = alr(&comp, ref_index)?;
    let mut diff = DVector::zeros(k);
    for j in 0..k {
        diff[j] = x.values()[(0, j)] - mu[j];
    }
    let solved = chol.solve(&diff);
    let quad = diff.dot(&solved);
    let log_det: f64 = (0..k).map(|i| chol.l_dirty()[(i, i)].ln()).sum::<f64>() * 2.0;
    let log_normal = -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln() + log_det + quad);
    let jacobian: f64 = (0..k + 1).map(|j| p[j].ln()).sum();
    Ok(log_normal - jacobian)
}

/// Multinomial draw via the conditional-binomial chain; used to build
/// synthetic count bases. Deterministic given the RNG stream.
pub fn sample_multinomial_counts(
    probs: &[f64],
    total: u64,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<u64>> {
    let d = probs.len();
    if d < 2 {
        return Err(Error::DimensionTooSmall {
            required: 2,
            got: d,
        });
    }
    let mut counts = vec![0u64; d];
    let mut remaining_n = total;
    let mut remaining_p = 1.0f64;
    for j in 0..d - 1 {
        if remaining_n == 0 {
            break;
        }
        let p = (probs[j] / remaining_p).clamp(0.0, 1.0);
        let draw = if p >= 1.0 {
            remaining_n
        } else {
            Binomial::new(remaining_n, p)
                .map_err(|e| Error::Scenario(format!("binomial: {e}")))?
                .sample(rng)
        };
        counts[j] = draw;
        remaining_n -= draw;
        remaining_p -= probs[j];
        if remaining_p <= 0.0 {
            break;
        }
    }
    counts[d - 1] += remaining_n;
    Ok(counts)
}
