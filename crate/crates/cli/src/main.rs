//! Command-line front end: impute counts, shrink covariance matrices,
//! simulate logistic-normal compositions, trace closure-induced partial
//! correlations, and run the seeded benchmarks.

use std::path::{Path, PathBuf};

use anyhow::{Context, bail};
use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use coshrink::bench::{load_scenario, with_thread_pool};
use coshrink::composition::{CompositionMatrix, alr, clr};
use coshrink::covariance::{CovMatrix, Representation};
use coshrink::imputation::{impute_czm, impute_freq_shrink};
use coshrink::io;
use coshrink::lu::{
    AlphaVector, dilution_experiment, removal_order_random, removal_order_smallest, strongest_pair,
};
use coshrink::shrinkage::{
    PipelineInput, ShrinkageEstimate, TargetKind, shrink_basis_pipeline, shrink_diagonal_with_data,
    shrink_logratio_direct,
};
use coshrink::simulate::sample_logistic_normal;

#[derive(Parser)]
#[command(
    name = "coshrink",
    version,
    about = "Covariance shrinkage for compositional data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    Counts,
    Compositions,
}

#[derive(Clone, Copy, ValueEnum)]
enum ShrinkMethod {
    /// Basis-covariance shrinkage, backtransformed to a logratio covariance.
    Basis,
    /// Diagonal-target shrinkage of the ALR covariance.
    NaiveAlr,
    /// Diagonal-target shrinkage of the CLR covariance.
    NaiveClr,
    /// Logratio-uncorrelated target in ALR form.
    LuAlr,
    /// Logratio-uncorrelated target in CLR form.
    LuClr,
    /// Plain sample covariance, no shrinkage.
    None,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeMethod {
    Czm,
    FreqShrink,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderKind {
    /// Remove the part with the smallest 1/alpha first (deterministic).
    Smallest,
    /// Seeded random removal order.
    Random,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate a (shrunk) covariance matrix from counts or compositions.
    Shrink {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: InputKind,
        #[arg(long, value_enum)]
        method: ShrinkMethod,
        /// 1-based ALR reference part; defaults to the last part for
        /// ALR-form output. CLR-form methods ignore it.
        #[arg(long = "ref", value_name = "k")]
        ref_part: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Write intensity diagnostics as JSON.
        #[arg(long)]
        lambda_report: Option<PathBuf>,
        /// Skip the separate median-target shrinkage of the diagonal.
        #[arg(long)]
        no_variance_shrinkage: bool,
        /// First input row holds part labels.
        #[arg(long)]
        has_header: bool,
    },
    /// Replace count zeros and emit strictly positive frequencies.
    Impute {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        method: ImputeMethod,
        #[arg(long, default_value_t = coshrink::imputation::DEFAULT_DELTA_FRACTION)]
        delta_fraction: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        has_header: bool,
    },
    /// Closure-induced partial correlation of a pair under part removal.
    LuDilution {
        /// CSV of positive alpha values (row or column layout).
        #[arg(long)]
        alpha: PathBuf,
        /// 1-based pair "i,j"; defaults to the strongest pair.
        #[arg(long)]
        pair: Option<String>,
        #[arg(long, value_enum, default_value = "smallest")]
        order: OrderKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw logistic-normal compositions.
    Simulate {
        /// CSV holding the ALR mean vector.
        #[arg(long)]
        mu: PathBuf,
        /// Covariance CSV with a `# repr=ALR ref=<k>` header.
        #[arg(long)]
        sigma: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a benchmark scenario from a TOML description.
    Benchmark {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (default: rayon's choice). The report is
        /// byte-identical at any width.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Serialize)]
struct LambdaReport {
    lambda: f64,
    lambda_var: Option<f64>,
    lambda_preclamp: f64,
    target_kind: String,
    #[serde(rename = "D")]
    d: usize,
    #[serde(rename = "N")]
    n: usize,
}

fn write_lambda_report(
    path: &Path,
    est: &ShrinkageEstimate,
    d: usize,
    n: usize,
) -> anyhow::Result<()> {
    let report = LambdaReport {
        lambda: est.lambda,
        lambda_var: est.lambda_var,
        lambda_preclamp: est.lambda_preclamp,
        target_kind: est.target_kind.to_string(),
        d,
        n,
    };
    std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(())
}

fn load_compositions(
    input: &Path,
    kind: InputKind,
    has_header: bool,
) -> anyhow::Result<CompositionMatrix> {
    match kind {
        InputKind::Compositions => {
            io::read_compositions(input, has_header).context("reading compositions")
        }
        InputKind::Counts => {
            let counts = io::read_counts(input, has_header).context("reading counts")?;
            if counts.has_zeros() {
                bail!(
                    "counts contain zeros; run `coshrink impute` first or pass imputed frequencies"
                );
            }
            Ok(counts.frequencies()?)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn run_shrink(
    input: PathBuf,
    kind: InputKind,
    method: ShrinkMethod,
    ref_part: Option<usize>,
    out: PathBuf,
    lambda_report: Option<PathBuf>,
    no_variance_shrinkage: bool,
    has_header: bool,
) -> anyhow::Result<()> {
    let p = load_compositions(&input, kind, has_header)?;
    let d = p.n_parts();
    let n = p.n_samples();
    let variance_shrinkage = !no_variance_shrinkage;
    let ref_index = ref_part.unwrap_or(d);

    let est = match method {
        ShrinkMethod::Basis => {
            let output = match ref_part {
                Some(k) => Representation::Alr { ref_index: k },
                None => Representation::Clr,
            };
            shrink_basis_pipeline(PipelineInput::Compositions(&p), output, variance_shrinkage)?
        }
        ShrinkMethod::NaiveAlr => {
            let x = alr(&p, ref_index)?;
            let s = CovMatrix::sample_alr(&x)?;
            shrink_diagonal_with_data(&s, x.values(), variance_shrinkage)?
        }
        ShrinkMethod::NaiveClr => {
            let y = clr(&p);
            let g = CovMatrix::sample_clr(&y)?;
            shrink_diagonal_with_data(&g, y.values(), variance_shrinkage)?
        }
        ShrinkMethod::LuAlr => {
            let x = alr(&p, ref_index)?;
            let s = CovMatrix::sample_alr(&x)?;
            shrink_logratio_direct(&s, x.values(), TargetKind::LuAlr)?
        }
        ShrinkMethod::LuClr => {
            let y = clr(&p);
            let g = CovMatrix::sample_clr(&y)?;
            shrink_logratio_direct(&g, y.values(), TargetKind::LuClr)?
        }
        ShrinkMethod::None => {
            let covariance = match ref_part {
                Some(k) => CovMatrix::sample_alr(&alr(&p, k)?)?,
                None => CovMatrix::sample_clr(&clr(&p))?,
            };
            ShrinkageEstimate {
                covariance,
                lambda: 0.0,
                lambda_var: None,
                target_kind: TargetKind::Custom,
                lambda_preclamp: 0.0,
                lambda_var_preclamp: None,
                degenerate: false,
                approximate_cross_term: false,
                nonpositive_target_alpha: false,
            }
        }
    };

    io::write_covariance(&out, &est.covariance)?;
    if let Some(path) = lambda_report {
        write_lambda_report(&path, &est, d, n)?;
    }
    Ok(())
}

fn parse_pair(s: &str) -> anyhow::Result<(usize, usize)> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        bail!("pair must look like \"i,j\"");
    }
    Ok((parts[0].trim().parse()?, parts[1].trim().parse()?))
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Shrink {
            input,
            kind,
            method,
            ref_part,
            out,
            lambda_report,
            no_variance_shrinkage,
            has_header,
        } => run_shrink(
            input,
            kind,
            method,
            ref_part,
            out,
            lambda_report,
            no_variance_shrinkage,
            has_header,
        )?,

        Command::Impute {
            input,
            method,
            delta_fraction,
            out,
            has_header,
        } => {
            let counts = io::read_counts(&input, has_header).context("reading counts")?;
            let imputed = match method {
                ImputeMethod::Czm => impute_czm(&counts, delta_fraction)?,
                ImputeMethod::FreqShrink => impute_freq_shrink(&counts)?,
            };
            let comps = imputed.values();
            io::write_matrix(&out, comps.values(), comps.part_labels())?;
        }

        Command::LuDilution {
            alpha,
            pair,
            order,
            seed,
            out,
        } => {
            let values = io::read_vector(&alpha)?;
            let alpha = AlphaVector::new(values)?;
            let pair = match pair {
                Some(s) => parse_pair(&s)?,
                None => strongest_pair(&alpha),
            };
            let order = match order {
                OrderKind::Smallest => removal_order_smallest(&alpha, pair),
                OrderKind::Random => removal_order_random(&alpha, pair, seed),
            };
            let series = dilution_experiment(&alpha, pair, &order)?;
            let mut csv = String::from("d,r\n");
            for (d, r) in series {
                csv.push_str(&format!("{d},{r}\n"));
            }
            std::fs::write(&out, csv)?;
        }

        Command::Simulate {
            mu,
            sigma,
            n,
            seed,
            out,
        } => {
            let mu = DVector::from_vec(io::read_vector(&mu)?);
            let sigma = io::read_covariance(&sigma)?;
            let p = sample_logistic_normal(&mu, &sigma, n, seed)?;
            io::write_matrix(&out, p.values(), p.part_labels())?;
        }

        Command::Benchmark {
            scenario,
            out,
            threads,
        } => {
            let loaded = load_scenario(&scenario)?;
            let report = with_thread_pool(threads, || loaded.run())?;
            report.write_csv(&out)?;
        }
    }
    Ok(())
}
