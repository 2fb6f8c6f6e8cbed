//! Command-line argument definitions.
//!
//! Flags mirror the library defaults: leaving everything unset reproduces
//! the reference protocol (shifted Legendre basis of size 40, `α = 0.5`,
//! `η = 0.05`, `q_max = 7`, `K = q + 2`, `m = ⌊1 + T^0.65⌋`,
//! `h = ⌊1 + T^0.3⌋`, 20 random projections mixing 5 Legendre elements).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fraccurve_core::basis::BasisKind;
use fraccurve_core::cointegration::Statistic;
use fraccurve_core::dgp::DGPParams;
use fraccurve_core::memest::DMethod;
use fraccurve_core::montecarlo::McTable;

use crate::hmd::Gender;

/// Fractional cointegration analysis for curve-valued time series.
#[derive(Debug, Parser)]
#[command(name = "fraccurve", version, about, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an HMD Mx_1x1 mortality file into a functional series.
    ImportHmd(ImportHmdArgs),
    /// Generate a synthetic series with known ground truth.
    Simulate(SimulateArgs),
    /// Run one of the Monte Carlo study designs.
    Mc(McArgs),
    /// Simulate critical-value tables for the variance-ratio test.
    CriticalValues(CriticalValuesArgs),
    /// Sequential variance-ratio test for the dominant dimension.
    TestRank(TestRankArgs),
    /// Local Whittle estimation of a memory order.
    EstimateMemory(EstimateMemoryArgs),
    /// Split a series into dominant, long-range and short-range parts.
    Decompose(DecomposeArgs),
    /// Full analysis: memory orders, dimensions, subspaces, score series.
    Pipeline(PipelineArgs),
}

/// Basis families accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BasisArg {
    /// Orthonormal shifted Legendre polynomials on `[0, 1]`.
    ShiftedLegendre,
    /// Constant plus sine/cosine pairs.
    Fourier,
}

impl From<BasisArg> for BasisKind {
    fn from(arg: BasisArg) -> Self {
        match arg {
            BasisArg::ShiftedLegendre => BasisKind::ShiftedLegendre,
            BasisArg::Fourier => BasisKind::Fourier,
        }
    }
}

/// Test statistic driving accept/reject decisions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum StatisticArg {
    /// `Λ⁰`, the largest rescaled generalized eigenvalue.
    Max,
    /// `Λ¹`, the sum of the first `q`.
    Trace,
}

impl From<StatisticArg> for Statistic {
    fn from(arg: StatisticArg) -> Self {
        match arg {
            StatisticArg::Max => Statistic::Max,
            StatisticArg::Trace => Statistic::Trace,
        }
    }
}

/// Monte Carlo designs exposed by `mc`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    /// Determination frequencies for the dominant dimension.
    DominantDimension,
    /// Determination frequencies for the long-range dependent dimension.
    LrdDimension,
    /// Bias/variance/MSE of the estimators of `d`.
    MemoryD,
    /// Bias/variance/MSE of the estimators of `d − b`.
    MemoryDMinusB,
    /// Coverage and interval scores of the confidence intervals.
    Coverage,
    /// Size and power of the variance-ratio test.
    SizePower,
}

impl From<TableArg> for McTable {
    fn from(arg: TableArg) -> Self {
        match arg {
            TableArg::DominantDimension => McTable::T1,
            TableArg::LrdDimension => McTable::T2,
            TableArg::MemoryD => McTable::T3,
            TableArg::MemoryDMinusB => McTable::T4,
            TableArg::Coverage => McTable::T5,
            TableArg::SizePower => McTable::SizePower,
        }
    }
}

/// Which memory order `estimate-memory` targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    /// Memory order `d` of the dominant component.
    D,
    /// Memory order `d − b` of the long-range dependent component.
    DMinusB,
}

/// Estimation method for `d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    /// Local Whittle on first differences, plus one (the default).
    Differenced,
    /// Local Whittle on the initialized series over a nonstationary range.
    Levels,
}

impl From<MethodArg> for DMethod {
    fn from(arg: MethodArg) -> Self {
        match arg {
            MethodArg::Differenced => DMethod::Differenced,
            MethodArg::Levels => DMethod::Levels,
        }
    }
}

/// Generator parameters shared by `simulate` and `mc`.
#[derive(Debug, Args)]
pub struct DgpArgs {
    /// Memory order of the nonstationary block.
    #[arg(long, default_value_t = 0.95)]
    pub d: f64,
    /// Memory order of the long-range dependent block.
    #[arg(long, default_value_t = 0.3)]
    pub d_minus_b: f64,
    /// Dimension of the nonstationary block.
    #[arg(long, default_value_t = 3)]
    pub q_d: usize,
    /// Dimension of the long-range dependent block.
    #[arg(long, default_value_t = 2)]
    pub q_db: usize,
    /// Total coordinate dimension.
    #[arg(long, default_value_t = 25)]
    pub p_dim: usize,
    /// Half-width of the uniform law for ARMA and band coefficients.
    #[arg(long, default_value_t = 0.15)]
    pub arma_range: f64,
    /// Band width of the short-range coefficient operators.
    #[arg(long, default_value_t = 2)]
    pub band: usize,
    /// Geometric decay of the short-range innovation variances.
    #[arg(long, default_value_t = 0.97)]
    pub innov_decay: f64,
    /// Number of short-range coordinates receiving innovations.
    #[arg(long, default_value_t = 20)]
    pub innov_rank: usize,
    /// Innovation standard deviation of the long-range dependent scores.
    #[arg(long, default_value_t = 1.0)]
    pub lrd_scale: f64,
}

impl DgpArgs {
    pub fn to_params(&self) -> DGPParams {
        DGPParams {
            d: self.d,
            d_minus_b: self.d_minus_b,
            q_d: self.q_d,
            q_db: self.q_db,
            p: self.p_dim,
            arma_range: self.arma_range,
            band: self.band,
            innov_decay: self.innov_decay,
            innov_rank: self.innov_rank,
            lrd_scale: self.lrd_scale,
        }
    }
}

#[derive(Debug, Args)]
pub struct ImportHmdArgs {
    /// HMD Mx_1x1 death-rate file.
    #[arg(long)]
    pub input: PathBuf,
    /// Gender column to extract.
    #[arg(long, value_enum)]
    pub gender: Gender,
    /// Basis family for the curve representation.
    #[arg(long, value_enum, default_value_t = BasisArg::ShiftedLegendre)]
    pub basis: BasisArg,
    /// Number of basis functions.
    #[arg(long, default_value_t = 40)]
    pub dim: usize,
    /// Destination series CSV (a `.meta.json` sidecar is written next to it).
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of observations to generate.
    #[arg(long = "t")]
    pub t_len: usize,
    /// Generator seed.
    #[arg(long)]
    pub seed: u64,
    /// Destination series CSV (sidecar and a `.truth.json` are written next
    /// to it).
    #[arg(long)]
    pub output: PathBuf,
    #[command(flatten)]
    pub dgp: DgpArgs,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Study design to run.
    #[arg(long, value_enum)]
    pub table: TableArg,
    /// Number of Monte Carlo replications.
    #[arg(long)]
    pub reps: usize,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub t_list: Vec<usize>,
    /// Master seed; replication `i` at sample size index `t` uses the
    /// substream `(seed, design, t, i)`.
    #[arg(long)]
    pub seed: u64,
    /// Directory receiving `report.csv` and `provenance.json`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Critical-value table (required by the test-based designs).
    #[arg(long)]
    pub cv_table: Option<PathBuf>,
    /// `q_max` values (dominant-dimension) or ratio windows `K`,
    /// comma separated.
    #[arg(long, value_delimiter = ',')]
    pub k_list: Option<Vec<usize>>,
    /// Bartlett bandwidth exponents `h = ⌊1 + T^e⌋`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub h_exponents: Option<Vec<f64>>,
    /// Whittle bandwidth exponent `m = ⌊1 + T^e⌋`.
    #[arg(long, default_value_t = 0.65)]
    pub m_exponent: f64,
    /// Nominal confidence level of the coverage design.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Extra fractional integration order of the variance-ratio test.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Significance level of the variance-ratio test.
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Evaluate critical values at a per-replication plug-in estimate of
    /// `d` instead of the generator's order.
    #[arg(long)]
    pub plug_in_d: bool,
    #[command(flatten)]
    pub dgp: DgpArgs,
}

#[derive(Debug, Args)]
pub struct CriticalValuesArgs {
    /// Tabulate `q = 1, …, q_max`.
    #[arg(long, conflicts_with = "q_list")]
    pub q_max: Option<usize>,
    /// Explicit list of ranks, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub q_list: Option<Vec<usize>>,
    /// Extra fractional integration order.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Smallest memory order of the `d` grid.
    #[arg(long, default_value_t = 0.51)]
    pub d_min: f64,
    /// Largest memory order of the `d` grid.
    #[arg(long, default_value_t = 1.49)]
    pub d_max: f64,
    /// Step of the `d` grid.
    #[arg(long, default_value_t = 0.01)]
    pub d_step: f64,
    /// Significance levels `η`, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.05, 0.10])]
    pub eta_list: Vec<f64>,
    /// Path discretization steps of the simulated limit processes.
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    /// Replications per `(q, d)` cell (at least 1,000).
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    /// Simulation seed; cell draws use substreams of it.
    #[arg(long)]
    pub seed: u64,
    /// Destination CSV. If the file already exists with the same grid,
    /// seed and replication count, missing ranks are added to it.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TestRankArgs {
    /// Series CSV written by `import-hmd` or `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Critical-value table covering the plug-in memory order.
    #[arg(long)]
    pub cv_table: PathBuf,
    /// Largest rank tested; defaults to the eigenvalue-ratio estimate
    /// plus two.
    #[arg(long)]
    pub q_max: Option<usize>,
    /// Projection dimension rule `K = q + offset`.
    #[arg(long, default_value_t = 2, conflicts_with = "k_fixed")]
    pub k_offset: usize,
    /// Fixed projection dimension `K` for every step.
    #[arg(long)]
    pub k_fixed: Option<usize>,
    /// Extra fractional integration order.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Significance level of each step.
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Statistic driving the decisions.
    #[arg(long, value_enum, default_value_t = StatisticArg::Max)]
    pub statistic: StatisticArg,
    /// Evaluate critical values at this memory order instead of the
    /// plug-in estimate.
    #[arg(long)]
    pub d: Option<f64>,
    /// Seed for the random projections of the plug-in estimate; required
    /// unless `--d` is given.
    #[arg(long, required_unless_present = "d")]
    pub seed: Option<u64>,
    /// Whittle bandwidth exponent of the plug-in estimate.
    #[arg(long, default_value_t = 0.65)]
    pub m_exponent: f64,
    /// Number of random projections of the plug-in estimate.
    #[arg(long, default_value_t = 20)]
    pub l: usize,
    /// Number of Legendre elements mixed per projection.
    #[arg(long, default_value_t = 5)]
    pub j: usize,
    /// Destination JSON report; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateMemoryArgs {
    /// Series CSV written by `import-hmd` or `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Memory order to estimate.
    #[arg(long, value_enum, default_value_t = TargetArg::D)]
    pub target: TargetArg,
    /// Estimation method for `d` (ignored for `d − b`).
    #[arg(long, value_enum, default_value_t = MethodArg::Differenced)]
    pub method: MethodArg,
    /// Dominant dimension; required when targeting `d − b`.
    #[arg(long)]
    pub q_d: Option<usize>,
    /// Number of random projections.
    #[arg(long, default_value_t = 20)]
    pub l: usize,
    /// Elements mixed per projection; defaults to 5 for `d`, 2 for `d − b`.
    #[arg(long)]
    pub j: Option<usize>,
    /// Explicit Whittle bandwidth; overrides the exponent.
    #[arg(long)]
    pub m: Option<usize>,
    /// Whittle bandwidth exponent, `m = ⌊1 + T^e⌋`.
    #[arg(long, default_value_t = 0.65)]
    pub m_exponent: f64,
    /// Confidence level for an attached interval.
    #[arg(long)]
    pub ci: Option<f64>,
    /// Seed for the random projections.
    #[arg(long)]
    pub seed: u64,
    /// Destination JSON report; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Series CSV written by `import-hmd` or `simulate`.
    #[arg(long)]
    pub input: PathBuf,
    /// Dominant dimension; estimated by eigenvalue ratio when omitted.
    #[arg(long)]
    pub q_d: Option<usize>,
    /// Eigenvalue-ratio window `K`.
    #[arg(long, default_value_t = 6)]
    pub k: usize,
    /// Explicit Bartlett bandwidth; overrides the exponent.
    #[arg(long)]
    pub h: Option<usize>,
    /// Bartlett bandwidth exponent, `h = ⌊1 + T^e⌋`.
    #[arg(long, default_value_t = 0.3)]
    pub h_exponent: f64,
    /// Number of leading score series to emit.
    #[arg(long, default_value_t = 3)]
    pub scores: usize,
    /// Directory receiving `decomposition.json` and `scores.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Series CSV written by `import-hmd` or `simulate`.
    #[arg(long, conflicts_with = "hmd", required_unless_present = "hmd")]
    pub input: Option<PathBuf>,
    /// Ingest this HMD Mx_1x1 file instead of a series CSV.
    #[arg(long, requires = "gender")]
    pub hmd: Option<PathBuf>,
    /// Gender column of the HMD file.
    #[arg(long, value_enum)]
    pub gender: Option<Gender>,
    /// Basis family for HMD ingestion.
    #[arg(long, value_enum, default_value_t = BasisArg::ShiftedLegendre)]
    pub basis: BasisArg,
    /// Basis size for HMD ingestion.
    #[arg(long, default_value_t = 40)]
    pub dim: usize,
    /// Critical-value table covering the plug-in memory order.
    #[arg(long)]
    pub cv_table: PathBuf,
    /// Seed for the random projections of the memory estimators.
    #[arg(long)]
    pub seed: u64,
    /// Directory receiving `report.json`, `steps.csv` and `scores.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Extra fractional integration order of the variance-ratio test.
    #[arg(long, default_value_t = 0.5)]
    pub alpha: f64,
    /// Significance level of each sequential step.
    #[arg(long, default_value_t = 0.05)]
    pub eta: f64,
    /// Largest rank tested.
    #[arg(long, default_value_t = 7)]
    pub q_max: usize,
    /// Projection dimension rule `K = q + offset`.
    #[arg(long, default_value_t = 2)]
    pub k_offset: usize,
    /// Ratio window of the eigenvalue-ratio estimate and the second-stage
    /// split.
    #[arg(long, default_value_t = 7)]
    pub lrs_k: usize,
    /// Whittle bandwidth exponent, `m = ⌊1 + T^e⌋`.
    #[arg(long, default_value_t = 0.65)]
    pub m_exponent: f64,
    /// Bartlett bandwidth exponent, `h = ⌊1 + T^e⌋`.
    #[arg(long, default_value_t = 0.3)]
    pub h_exponent: f64,
    /// Number of random projections of the memory estimators.
    #[arg(long, default_value_t = 20)]
    pub l: usize,
    /// Legendre elements mixed when estimating `d`.
    #[arg(long, default_value_t = 5)]
    pub j_d: usize,
    /// Eigendirections mixed when estimating `d − b`.
    #[arg(long, default_value_t = 2)]
    pub j_db: usize,
    /// Statistic driving the sequential decisions.
    #[arg(long, value_enum, default_value_t = StatisticArg::Max)]
    pub statistic: StatisticArg,
    /// Confidence level of the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Score series to emit, as 1-based eigenvector indices; defaults to
    /// one representative per estimated block.
    #[arg(long, value_delimiter = ',')]
    pub score_indices: Option<Vec<usize>>,
}
