//! Seeded Monte-Carlo benchmarks of the covariance estimators.
//!
//! Two protocols: draw logistic-normal samples against a known population
//! covariance and score each estimator arm with elementwise mean squared
//! error, or subsample a count dataset against a ground truth estimated on
//! its full zero-free pool (optionally routing the zero-containing draws
//! through imputation first). Repetitions own independent RNG streams keyed
//! on (master_seed, repetition, stage), so reports are byte-identical at any
//! thread count.

use std::path::Path;
use std::str::FromStr;

use nalgebra::{Cholesky, DMatrix, DVector};
use rayon::prelude::*;
use serde::Deserialize;

use crate::composition::{CompositionMatrix, CountMatrix, alr, clr};
use crate::covariance::{
    CovMatrix, PartialCorrMatrix, Representation, gamma_to_sigma, omega_to_gamma, omega_to_sigma,
    partial_correlation, sigma_to_gamma,
};
use crate::error::{Error, Result};
use crate::imputation::{DEFAULT_DELTA_FRACTION, impute_czm, impute_freq_shrink};
use crate::shrinkage::{shrink_basis_omega, shrink_diagonal_with_data};
use crate::simulate::{rng_stream, sample_logistic_normal_prepared};

/// Estimation procedures compared by the benchmarks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimatorKind {
    /// Plain sample covariance, no shrinkage.
    None,
    /// Direct diagonal-target shrinkage of the ALR covariance.
    NaiveAlr,
    /// Direct diagonal-target shrinkage of the CLR covariance.
    NaiveClr,
    /// Basis-covariance shrinkage, backtransformed.
    Basis,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            EstimatorKind::None => "none",
            EstimatorKind::NaiveAlr => "naive-alr",
            EstimatorKind::NaiveClr => "naive-clr",
            EstimatorKind::Basis => "basis",
        };
        write!(f, "{s}")
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(EstimatorKind::None),
            "naive-alr" => Ok(EstimatorKind::NaiveAlr),
            "naive-clr" => Ok(EstimatorKind::NaiveClr),
            "basis" => Ok(EstimatorKind::Basis),
            other => Err(Error::Scenario(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Zero-handling arm of the subsampling benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ImputationArm {
    /// Draw from the zero-free pool; no imputation needed.
    ZeroFree,
    /// Draw from the full pool, multiplicative zero replacement.
    Czm,
    /// Draw from the full pool, frequency shrinkage.
    FreqShrink,
}

impl std::fmt::Display for ImputationArm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ImputationArm::ZeroFree => "zero-free",
            ImputationArm::Czm => "czm",
            ImputationArm::FreqShrink => "freq-shrink",
        };
        write!(f, "{s}")
    }
}

impl FromStr for ImputationArm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero-free" => Ok(ImputationArm::ZeroFree),
            "czm" => Ok(ImputationArm::Czm),
            "freq-shrink" => Ok(ImputationArm::FreqShrink),
            other => Err(Error::Scenario(format!("unknown imputation {other:?}"))),
        }
    }
}

/// What a record's MSE was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricKind {
    CovClr,
    CovAlr,
    Pcor,
}

impl std::fmt::Display for MetricKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            MetricKind::CovClr => "cov_clr",
            MetricKind::CovAlr => "cov_alr",
            MetricKind::Pcor => "pcor",
        };
        write!(f, "{s}")
    }
}

/// One scored estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRecord {
    pub repetition: u64,
    pub n: usize,
    pub estimator: EstimatorKind,
    pub imputation: Option<ImputationArm>,
    pub metric: MetricKind,
    pub mse: f64,
    /// The arm's covariance was rank deficient (pseudoinverse route).
    pub singular: bool,
}

/// All records of a run, sorted on (repetition, n, estimator, imputation,
/// metric) so emission is independent of scheduling.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchmarkReport {
    records: Vec<BenchmarkRecord>,
}

impl BenchmarkReport {
    fn from_records(mut records: Vec<BenchmarkRecord>) -> Self {
        records.sort_by(|a, b| {
            (a.repetition, a.n, a.estimator, a.imputation, a.metric).cmp(&(
                b.repetition,
                b.n,
                b.estimator,
                b.imputation,
                b.metric,
            ))
        });
        Self { records }
    }

    pub fn records(&self) -> &[BenchmarkRecord] {
        &self.records
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("repetition,n,estimator,imputation,metric,mse,singular\n");
        for r in &self.records {
            let imputation = match r.imputation {
                Some(arm) => arm.to_string(),
                None => "none".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.repetition, r.n, r.estimator, imputation, r.metric, r.mse, r.singular
            ));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }

    /// Median MSE over repetitions for one (estimator, imputation, n, metric)
    /// cell; None when no records match.
    pub fn median_mse(
        &self,
        estimator: EstimatorKind,
        imputation: Option<ImputationArm>,
        n: usize,
        metric: MetricKind,
    ) -> Option<f64> {
        let mut values: Vec<f64> = self
            .records
            .iter()
            .filter(|r| {
                r.estimator == estimator
                    && r.imputation == imputation
                    && r.n == n
                    && r.metric == metric
            })
            .map(|r| r.mse)
            .collect();
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mid = values.len() / 2;
        Some(if values.len() % 2 == 1 {
            values[mid]
        } else {
            0.5 * (values[mid - 1] + values[mid])
        })
    }
}

/// Mean of squared differences over all entries.
pub fn elementwise_mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", a.nrows(), a.ncols()),
            got: format!("{} x {}", b.nrows(), b.ncols()),
        });
    }
    let total: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
    Ok(total / (a.nrows() * a.ncols()) as f64)
}

/// Mean of squared differences over off-diagonal entries only (partial
/// correlation matrices have an identically-1 diagonal).
pub fn offdiagonal_mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} x {}", a.nrows(), a.ncols()),
            got: format!("{} x {}", b.nrows(), b.ncols()),
        });
    }
    let k = a.nrows();
    let mut total = 0.0;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                total += (a[(i, j)] - b[(i, j)]).powi(2);
            }
        }
    }
    Ok(total / (k * k - k) as f64)
}

/// Run `f` on a dedicated rayon pool of the given width (None = caller's
/// pool). Reports are identical either way; this only controls wall time.
pub fn with_thread_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        None => f(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("failed to build thread pool")
            .install(f),
    }
}

/// Ground truth for MSE scoring, always expressed with reference part D.
struct GroundTruth {
    sigma: CovMatrix,
    gamma: CovMatrix,
    pcor: PartialCorrMatrix,
}

impl GroundTruth {
    fn from_sigma(sigma: &CovMatrix) -> Result<Self> {
        let d = sigma.n_parts();
        let gamma = sigma_to_gamma(sigma)?;
        let sigma_last = gamma_to_sigma(&gamma, d)?;
        let pcor = partial_correlation(&gamma)?;
        Ok(Self {
            sigma: sigma_last,
            gamma,
            pcor,
        })
    }

    /// Unshrunk estimates on a composition matrix (the subsampling truth).
    fn from_compositions(p: &CompositionMatrix) -> Result<Self> {
        let d = p.n_parts();
        let sigma = CovMatrix::sample_alr(&alr(p, d)?)?;
        let gamma = CovMatrix::sample_clr(&clr(p))?;
        let pcor = partial_correlation(&gamma)?;
        Ok(Self { sigma, gamma, pcor })
    }
}

struct ArmEstimate {
    estimator: EstimatorKind,
    sigma: CovMatrix,
    gamma: CovMatrix,
    pcor: PartialCorrMatrix,
    singular: bool,
}

/// Estimate every requested arm on one drawn sample. Partial correlations
/// always go through the CLR pseudoinverse (identical to the ALR inverse
/// where that exists); unshrunk arms at N <= D are flagged singular rather
/// than aborted, since their MSE is part of the comparison.
fn estimator_arms(
    p: &CompositionMatrix,
    estimators: &[EstimatorKind],
    variance_shrinkage: bool,
) -> Result<Vec<ArmEstimate>> {
    let d = p.n_parts();
    let n = p.n_samples();
    let alr_x = alr(p, d)?;
    let clr_y = clr(p);
    let s = CovMatrix::sample_alr(&alr_x)?;
    let g = CovMatrix::sample_clr(&clr_y)?;

    let mut arms = Vec::with_capacity(estimators.len());
    for &estimator in estimators {
        let arm = match estimator {
            EstimatorKind::None => {
                let pcor = partial_correlation(&g)?;
                ArmEstimate {
                    estimator,
                    sigma: s.clone(),
                    gamma: g.clone(),
                    pcor,
                    singular: n < d,
                }
            }
            EstimatorKind::NaiveAlr => {
                let est = shrink_diagonal_with_data(&s, alr_x.values(), variance_shrinkage)?;
                let gamma = sigma_to_gamma(&est.covariance)?;
                let pcor = partial_correlation(&gamma)?;
                ArmEstimate {
                    estimator,
                    sigma: est.covariance,
                    gamma,
                    pcor,
                    singular: false,
                }
            }
            EstimatorKind::NaiveClr => {
                let est = shrink_diagonal_with_data(&g, clr_y.values(), variance_shrinkage)?;
                let sigma = gamma_to_sigma(&est.covariance, d)?;
                let pcor = partial_correlation(&est.covariance)?;
                ArmEstimate {
                    estimator,
                    sigma,
                    gamma: est.covariance,
                    pcor,
                    singular: false,
                }
            }
            EstimatorKind::Basis => {
                let (omega, _, _) = shrink_basis_omega(p, variance_shrinkage)?;
                let sigma = omega_to_sigma(&omega, d)?;
                let gamma = omega_to_gamma(&omega)?;
                let pcor = partial_correlation(&gamma)?;
                ArmEstimate {
                    estimator,
                    sigma,
                    gamma,
                    pcor,
                    singular: false,
                }
            }
        };
        arms.push(arm);
    }
    Ok(arms)
}

fn score_arms(
    arms: &[ArmEstimate],
    truth: &GroundTruth,
    repetition: u64,
    n: usize,
    imputation: Option<ImputationArm>,
    records: &mut Vec<BenchmarkRecord>,
) -> Result<()> {
    for arm in arms {
        let entries = [
            (
                MetricKind::CovClr,
                elementwise_mse(arm.gamma.values(), truth.gamma.values())?,
            ),
            (
                MetricKind::CovAlr,
                elementwise_mse(arm.sigma.values(), truth.sigma.values())?,
            ),
            (
                MetricKind::Pcor,
                offdiagonal_mse(arm.pcor.values(), truth.pcor.values())?,
            ),
        ];
        for (metric, mse) in entries {
            records.push(BenchmarkRecord {
                repetition,
                n,
                estimator: arm.estimator,
                imputation,
                metric,
                mse,
                singular: arm.singular,
            });
        }
    }
    Ok(())
}

/// Synthetic logistic-normal benchmark: fixed population (mu, Sigma),
/// repeated sampling at each N, every arm scored against the population.
#[derive(Debug, Clone)]
pub struct SyntheticScenario {
    pub mu: DVector<f64>,
    pub sigma: CovMatrix,
    pub n_list: Vec<usize>,
    pub repetitions: u64,
    pub estimators: Vec<EstimatorKind>,
    pub master_seed: u64,
    pub variance_shrinkage: bool,
}

fn stage_draw(n: usize) -> u64 {
    n as u64
}

pub fn run_synthetic_benchmark(scenario: &SyntheticScenario) -> Result<BenchmarkReport> {
    if scenario.estimators.is_empty() {
        return Err(Error::Scenario("estimator list is empty".into()));
    }
    if scenario.repetitions == 0 {
        return Err(Error::Scenario("repetitions must be >= 1".into()));
    }
    if scenario.n_list.iter().any(|&n| n < 3) {
        return Err(Error::Scenario(
            "sample sizes below 3 cannot be estimated".into(),
        ));
    }
    let ref_index = match scenario.sigma.representation() {
        Representation::Alr { ref_index } => ref_index,
        other => {
            return Err(Error::RepresentationMismatch {
                expected: "ALR".into(),
                got: other.to_string(),
            });
        }
    };
    if scenario.mu.len() != scenario.sigma.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("mean of length {}", scenario.sigma.dim()),
            got: format!("{}", scenario.mu.len()),
        });
    }
    let chol = Cholesky::new(scenario.sigma.values().clone())
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let truth = GroundTruth::from_sigma(&scenario.sigma)?;

    let nested: Vec<Vec<BenchmarkRecord>> = (0..scenario.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<Vec<BenchmarkRecord>> {
            let mut records = Vec::new();
            for &n in &scenario.n_list {
                let mut rng = rng_stream(scenario.master_seed, rep, stage_draw(n));
                let p =
                    sample_logistic_normal_prepared(&scenario.mu, &chol, ref_index, n, &mut rng)?;
                let arms = estimator_arms(&p, &scenario.estimators, scenario.variance_shrinkage)?;
                score_arms(&arms, &truth, rep, n, None, &mut records)?;
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;

    Ok(BenchmarkReport::from_records(
        nested.into_iter().flatten().collect(),
    ))
}

/// Subsampling benchmark against a count dataset.
#[derive(Debug, Clone)]
pub struct SubsampleScenario {
    /// Genes (columns) drawn per repetition.
    pub subset_size: usize,
    pub n_list: Vec<usize>,
    pub repetitions: u64,
    pub estimators: Vec<EstimatorKind>,
    pub imputations: Vec<ImputationArm>,
    pub master_seed: u64,
    pub delta_fraction: f64,
    pub variance_shrinkage: bool,
}

const STAGE_COLUMNS: u64 = 1 << 40;

fn stage_rows(n: usize, zero_free_pool: bool) -> u64 {
    let tag: u64 = if zero_free_pool { 2 } else { 3 };
    (tag << 40) | n as u64
}

/// Draw `take` distinct indices from `pool`, returned in ascending order so
/// estimates are invariant to draw order (and exact when take == pool size).
fn sample_without_replacement(
    pool: &[usize],
    take: usize,
    rng: &mut rand_chacha::ChaCha20Rng,
) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut pool = pool.to_vec();
    let (chosen, _) = pool.partial_shuffle(rng, take);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    chosen
}

pub fn run_subsample_benchmark(
    dataset: &CountMatrix,
    scenario: &SubsampleScenario,
) -> Result<BenchmarkReport> {
    if scenario.estimators.is_empty() {
        return Err(Error::Scenario("estimator list is empty".into()));
    }
    if scenario.imputations.is_empty() {
        return Err(Error::Scenario("imputation arm list is empty".into()));
    }
    if scenario.repetitions == 0 {
        return Err(Error::Scenario("repetitions must be >= 1".into()));
    }
    if scenario.subset_size < 3 || scenario.subset_size > dataset.n_parts() {
        return Err(Error::Scenario(format!(
            "subset size {} outside 3..={}",
            scenario.subset_size,
            dataset.n_parts()
        )));
    }
    let max_n = *scenario
        .n_list
        .iter()
        .max()
        .ok_or_else(|| Error::Scenario("sample size list is empty".into()))?;
    if scenario.n_list.iter().any(|&n| n < 3) {
        return Err(Error::Scenario(
            "sample sizes below 3 cannot be estimated".into(),
        ));
    }

    let all_columns: Vec<usize> = (0..dataset.n_parts()).collect();
    let all_rows: Vec<usize> = (0..dataset.n_samples()).collect();

    let nested: Vec<Vec<BenchmarkRecord>> = (0..scenario.repetitions)
        .into_par_iter()
        .map(|rep| -> Result<Vec<BenchmarkRecord>> {
            let mut records = Vec::new();

            let mut col_rng = rng_stream(scenario.master_seed, rep, STAGE_COLUMNS);
            let cols = sample_without_replacement(&all_columns, scenario.subset_size, &mut col_rng);
            let sub = dataset.select_columns(&cols)?;

            let zero_free: Vec<usize> = (0..sub.n_samples())
                .filter(|&i| sub.values().row(i).iter().all(|&c| c > 0))
                .collect();
            if zero_free.len() < max_n {
                return Err(Error::InsufficientZeroFreeRows {
                    available: zero_free.len(),
                    needed: max_n,
                });
            }

            let truth =
                GroundTruth::from_compositions(&sub.select_rows(&zero_free).frequencies()?)?;

            for &n in &scenario.n_list {
                // One row draw per pool; imputation arms on the full pool
                // share it, so methods are compared on identical counts.
                let mut drawn: [Option<CountMatrix>; 2] = [None, None];
                for &arm in &scenario.imputations {
                    let zero_free_pool = arm == ImputationArm::ZeroFree;
                    let slot = usize::from(!zero_free_pool);
                    if drawn[slot].is_none() {
                        let pool = if zero_free_pool {
                            &zero_free
                        } else {
                            &all_rows
                        };
                        let mut rng =
                            rng_stream(scenario.master_seed, rep, stage_rows(n, zero_free_pool));
                        let rows = sample_without_replacement(pool, n, &mut rng);
                        drawn[slot] = Some(sub.select_rows(&rows));
                    }
                    let counts = drawn[slot].as_ref().unwrap();
                    let comps = match arm {
                        ImputationArm::ZeroFree => counts.frequencies()?,
                        ImputationArm::Czm => {
                            impute_czm(counts, scenario.delta_fraction)?.into_compositions()
                        }
                        ImputationArm::FreqShrink => {
                            impute_freq_shrink(counts)?.into_compositions()
                        }
                    };
                    let arms =
                        estimator_arms(&comps, &scenario.estimators, scenario.variance_shrinkage)?;
                    score_arms(&arms, &truth, rep, n, Some(arm), &mut records)?;
                }
            }
            Ok(records)
        })
        .collect::<Result<_>>()?;

    Ok(BenchmarkReport::from_records(
        nested.into_iter().flatten().collect(),
    ))
}

/// On-disk scenario description (TOML).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    kind: String,
    n_list: Vec<usize>,
    repetitions: u64,
    estimators: Vec<String>,
    master_seed: u64,
    #[serde(default = "default_true")]
    variance_shrinkage: bool,
    // synthetic: either explicit population files ...
    mu: Option<String>,
    sigma: Option<String>,
    /// ... or a count dataset the population is estimated from.
    #[serde(default)]
    zero_free_subset: bool,
    // dataset (subsample always; synthetic when mu/sigma are absent)
    dataset: Option<String>,
    #[serde(default)]
    dataset_has_header: bool,
    subset_size: Option<usize>,
    imputations: Option<Vec<String>>,
    delta_fraction: Option<f64>,
}

fn default_true() -> bool {
    true
}

/// Population parameters estimated from a count dataset: ALR mean and
/// sample covariance (reference = last part), optionally restricted to
/// zero-free rows so no imputation touches the ground truth.
pub fn population_from_counts(
    counts: &CountMatrix,
    zero_free_subset: bool,
) -> Result<(DVector<f64>, CovMatrix)> {
    let source;
    let counts = if zero_free_subset {
        let rows: Vec<usize> = (0..counts.n_samples())
            .filter(|&i| counts.values().row(i).iter().all(|&c| c > 0))
            .collect();
        if rows.len() < 2 {
            return Err(Error::InsufficientZeroFreeRows {
                available: rows.len(),
                needed: 2,
            });
        }
        source = counts.select_rows(&rows);
        &source
    } else {
        counts
    };
    let comps = counts.frequencies()?;
    let d = comps.n_parts();
    let x = alr(&comps, d)?;
    let n = x.n_samples();
    let mu = DVector::from_fn(x.values().ncols(), |j, _| {
        x.values().column(j).sum() / n as f64
    });
    let sigma = CovMatrix::sample_alr(&x)?;
    Ok((mu, sigma))
}

/// A scenario loaded from TOML, with file references resolved.
pub enum LoadedScenario {
    Synthetic(SyntheticScenario),
    Subsample {
        dataset: CountMatrix,
        scenario: SubsampleScenario,
    },
}

impl LoadedScenario {
    pub fn run(&self) -> Result<BenchmarkReport> {
        match self {
            LoadedScenario::Synthetic(s) => run_synthetic_benchmark(s),
            LoadedScenario::Subsample { dataset, scenario } => {
                run_subsample_benchmark(dataset, scenario)
            }
        }
    }
}

/// Parse a scenario TOML file; relative data paths resolve against the
/// scenario file's directory.
pub fn load_scenario(path: &Path) -> Result<LoadedScenario> {
    let text = std::fs::read_to_string(path)?;
    let file: ScenarioFile =
        toml::from_str(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let resolve = |p: &str| -> std::path::PathBuf {
        let candidate = Path::new(p);
        if candidate.is_absolute() {
            candidate.to_path_buf()
        } else {
            base.join(candidate)
        }
    };

    let estimators: Vec<EstimatorKind> = file
        .estimators
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_>>()?;

    match file.kind.as_str() {
        "synthetic" => {
            let (mu, sigma) = match (&file.mu, &file.sigma, &file.dataset) {
                (Some(mu_path), Some(sigma_path), None) => {
                    let mu = DVector::from_vec(crate::io::read_vector(&resolve(mu_path))?);
                    let sigma = crate::io::read_covariance(&resolve(sigma_path))?;
                    (mu, sigma)
                }
                (None, None, Some(dataset_path)) => {
                    let counts =
                        crate::io::read_counts(&resolve(dataset_path), file.dataset_has_header)?;
                    population_from_counts(&counts, file.zero_free_subset)?
                }
                _ => {
                    return Err(Error::Scenario(
                        "synthetic scenario needs either `mu` and `sigma`, or `dataset`".into(),
                    ));
                }
            };
            Ok(LoadedScenario::Synthetic(SyntheticScenario {
                mu,
                sigma,
                n_list: file.n_list,
                repetitions: file.repetitions,
                estimators,
                master_seed: file.master_seed,
                variance_shrinkage: file.variance_shrinkage,
            }))
        }
        "subsample" => {
            let dataset_path = file
                .dataset
                .ok_or_else(|| Error::Scenario("subsample scenario needs `dataset`".into()))?;
            let dataset = crate::io::read_counts(&resolve(&dataset_path), file.dataset_has_header)?;
            let imputations: Vec<ImputationArm> = file
                .imputations
                .ok_or_else(|| Error::Scenario("subsample scenario needs `imputations`".into()))?
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_>>()?;
            Ok(LoadedScenario::Subsample {
                dataset,
                scenario: SubsampleScenario {
                    subset_size: file.subset_size.ok_or_else(|| {
                        Error::Scenario("subsample scenario needs `subset_size`".into())
                    })?,
                    n_list: file.n_list,
                    repetitions: file.repetitions,
                    estimators,
                    imputations,
                    master_seed: file.master_seed,
                    delta_fraction: file.delta_fraction.unwrap_or(DEFAULT_DELTA_FRACTION),
                    variance_shrinkage: file.variance_shrinkage,
                },
            })
        }
        other => Err(Error::Scenario(format!("unknown scenario kind {other:?}"))),
    }
}
