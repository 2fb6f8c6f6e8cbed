//! Monte Carlo harness over the synthetic generator.
//!
//! [`run_table`] simulates replications of the [`dgp`](crate::dgp) process
//! and aggregates one of six study designs selected by [`McTable`]:
//! dominant-dimension recovery (`T1`), long-range dimension recovery
//! (`T2`), bias and dispersion of the memory estimators (`T3`, `T4`),
//! confidence-interval coverage and interval scores (`T5`), and size/power
//! of the variance-ratio test (`SizePower`).
//!
//! Reports are bit-reproducible: each replication draws from a substream
//! keyed by `(seed, table, T index, rep)`, replications are collected in
//! index order regardless of thread scheduling, and aggregation uses
//! compensated summation so the output bytes depend only on the
//! configuration and seed.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cointegration::{
    lrd_srd_split, ratio_estimate_qd, sequential_rank_test, vr_statistics, KRule, Statistic,
};
use crate::covariance::{eigen, sample_cov, Projection};
use crate::dgp::{gen_dgp, DGPParams};
use crate::error::{Error, Result};
use crate::limitsim::CriticalValueTable;
use crate::memest::{estimate_d, estimate_d_minus_b, DMethod, DEFAULT_J_D, DEFAULT_J_DB, DEFAULT_L};
use crate::rng::substream;
use crate::series::FunctionalSeries;
use crate::spectra::{local_whittle, lw_confidence, power_bandwidth, AdmissibleRange};

/// Study design to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum McTable {
    /// Correct-determination and underestimation frequencies for the
    /// sequential variance-ratio estimator and the eigenvalue-ratio
    /// estimator of the dominant dimension.
    T1,
    /// Recovery frequencies for the long-range dependent dimension across
    /// Bartlett bandwidths and ratio windows.
    T2,
    /// Bias, variance and MSE of the memory estimators of `d`.
    T3,
    /// Bias, variance and MSE of the memory estimators of `d − b`.
    T4,
    /// Coverage differences and interval scores of the local Whittle
    /// confidence intervals.
    T5,
    /// Size and power of the variance-ratio test at fixed ratio windows.
    SizePower,
}

impl McTable {
    pub fn name(&self) -> &'static str {
        match self {
            McTable::T1 => "dominant-dimension",
            McTable::T2 => "lrd-dimension",
            McTable::T3 => "memory-d",
            McTable::T4 => "memory-d-minus-b",
            McTable::T5 => "coverage",
            McTable::SizePower => "size-power",
        }
    }

    /// Substream identifier; fixed so reports are stable across versions.
    fn stream_id(&self) -> u64 {
        match self {
            McTable::T1 => 61,
            McTable::T2 => 62,
            McTable::T3 => 63,
            McTable::T4 => 64,
            McTable::T5 => 65,
            McTable::SizePower => 66,
        }
    }

    /// Whether the design rejects against simulated critical values.
    pub fn needs_cv_table(&self) -> bool {
        matches!(self, McTable::T1 | McTable::SizePower)
    }
}

/// Configuration of a Monte Carlo run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MCConfig {
    pub table: McTable,
    pub reps: usize,
    pub t_list: Vec<usize>,
    pub seed: u64,
    /// Generator parameters; the defaults reproduce the reference design.
    pub dgp: DGPParams,
    /// Tuning windows: `q_max` values for the sequential test and `K`
    /// values for eigenvalue ratios (`T1`, `T2`, `SizePower`).
    pub k_list: Vec<usize>,
    /// Bartlett bandwidth exponents `h = ⌊1 + T^e⌋` (`T2`).
    pub h_exponents: Vec<f64>,
    /// Whittle bandwidth exponent `m = ⌊1 + T^e⌋` (`T3`, `T4`, `T5`).
    pub m_exponent: f64,
    /// Nominal confidence level (`T5`).
    pub level: f64,
    /// Extra fractional integration order of the variance-ratio test.
    pub alpha: f64,
    /// Significance level of the variance-ratio test.
    pub eta: f64,
    /// Evaluate sequential-test critical values at a per-replication
    /// plug-in memory estimate instead of the generator's `d` (`T1`).
    #[serde(default)]
    pub plug_in_d: bool,
}

impl MCConfig {
    /// Configuration with per-table defaults for `reps` replications at the
    /// sample sizes in `t_list`.
    pub fn for_table(table: McTable, reps: usize, t_list: Vec<usize>, seed: u64) -> MCConfig {
        MCConfig {
            table,
            reps,
            t_list,
            seed,
            dgp: DGPParams::default(),
            k_list: vec![4, 5, 6],
            h_exponents: vec![0.3, 0.4],
            m_exponent: 0.65,
            level: 0.95,
            alpha: crate::cointegration::DEFAULT_ALPHA,
            eta: crate::cointegration::DEFAULT_ETA,
            plug_in_d: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.reps < 1 {
            return Err(Error::invalid("reps", "need at least one replication"));
        }
        if self.t_list.is_empty() {
            return Err(Error::invalid("T_list", "need at least one sample size"));
        }
        if let Some(&t) = self.t_list.iter().find(|&&t| t < 50) {
            return Err(Error::invalid("T_list", format!("sample size {t} too small (need ≥ 50)")));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "smoothing order must be positive"));
        }
        if !(0.0 < self.eta && self.eta < 1.0) {
            return Err(Error::invalid("eta", "significance level must lie in (0,1)"));
        }
        if !(0.0 < self.level && self.level < 1.0) {
            return Err(Error::invalid("level", "confidence level must lie in (0,1)"));
        }
        if !(0.0 < self.m_exponent && self.m_exponent < 1.0) {
            return Err(Error::invalid("m_exponent", "bandwidth exponent must lie in (0,1)"));
        }
        if self.h_exponents.is_empty() && self.table == McTable::T2 {
            return Err(Error::invalid("h_exponents", "need at least one bandwidth exponent"));
        }
        if self.h_exponents.iter().any(|&e| !(0.0 < e && e < 1.0)) {
            return Err(Error::invalid("h_exponents", "bandwidth exponents must lie in (0,1)"));
        }
        let p = self.dgp.p;
        let q_d = self.dgp.q_d;
        match self.table {
            McTable::T1 => {
                if self.k_list.is_empty() {
                    return Err(Error::invalid("k_list", "need at least one q_max value"));
                }
                if let Some(&k) = self.k_list.iter().find(|&&k| k < 1 || k + 2 >= p) {
                    return Err(Error::invalid(
                        "k_list",
                        format!("q_max={k} needs 1 ≤ q_max and q_max + 2 < p = {p}"),
                    ));
                }
            }
            McTable::T2 => {
                if self.k_list.is_empty() {
                    return Err(Error::invalid("k_list", "need at least one ratio window"));
                }
                if let Some(&k) = self.k_list.iter().find(|&&k| k < 1 || k + q_d + 1 >= p) {
                    return Err(Error::invalid(
                        "k_list",
                        format!("K={k} needs 1 ≤ K < p − q_d − 1 = {}", p - q_d - 1),
                    ));
                }
            }
            McTable::SizePower => {
                if self.k_list.is_empty() {
                    return Err(Error::invalid("k_list", "need at least one ratio window"));
                }
                if let Some(&k) = self.k_list.iter().find(|&&k| k < q_d + 1 || k >= p) {
                    return Err(Error::invalid(
                        "k_list",
                        format!("K={k} must cover the power null: q_d + 1 = {} ≤ K < p", q_d + 1),
                    ));
                }
            }
            McTable::T3 | McTable::T5 => {
                if DEFAULT_J_D > p {
                    return Err(Error::invalid("p", "dimension too small for the d estimator"));
                }
            }
            McTable::T4 => {
                if q_d + DEFAULT_J_DB > p {
                    return Err(Error::invalid("p", "dimension too small for the d−b estimator"));
                }
            }
        }
        if self.table == McTable::T5 && q_d + DEFAULT_J_DB > p {
            return Err(Error::invalid("p", "dimension too small for the d−b estimator"));
        }
        Ok(())
    }
}

/// One aggregated report row: a statistic for one estimator configuration,
/// with one value and one standard error per sample size.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct McRow {
    pub block: String,
    pub selector: String,
    pub method: String,
    pub values: Vec<f64>,
    pub ses: Vec<f64>,
}

/// Aggregated Monte Carlo report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MCReport {
    pub table: String,
    pub version: String,
    pub seed: u64,
    pub reps: usize,
    pub t_list: Vec<usize>,
    /// Provenance notes for modelling choices the report depends on.
    pub notes: Vec<String>,
    pub config: MCConfig,
    pub rows: Vec<McRow>,
}

impl MCReport {
    /// Wide CSV: one column per sample size, then matching standard-error
    /// columns. Fixed six-decimal formatting keeps the bytes reproducible.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,selector,method");
        for t in &self.t_list {
            let _ = write!(out, ",T={t}");
        }
        for t in &self.t_list {
            let _ = write!(out, ",se_T={t}");
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{}", row.block, row.selector, row.method);
            for v in &row.values {
                let _ = write!(out, ",{v:.6}");
            }
            for s in &row.ses {
                let _ = write!(out, ",{s:.6}");
            }
            out.push('\n');
        }
        out
    }

    /// JSON provenance block: seed, replication count, version and the full
    /// configuration, without the data rows.
    pub fn provenance_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Provenance<'a> {
            table: &'a str,
            version: &'a str,
            seed: u64,
            reps: usize,
            t_list: &'a [usize],
            notes: &'a [String],
            config: &'a MCConfig,
        }
        let p = Provenance {
            table: &self.table,
            version: &self.version,
            seed: self.seed,
            reps: self.reps,
            t_list: &self.t_list,
            notes: &self.notes,
            config: &self.config,
        };
        serde_json::to_string_pretty(&p).map_err(Error::from)
    }

    /// Write `report.csv` and `provenance.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(Error::from)?;
        fs::write(dir.join("report.csv"), self.to_csv()).map_err(Error::from)?;
        fs::write(dir.join("provenance.json"), self.provenance_json()?).map_err(Error::from)?;
        Ok(())
    }
}

/// Kahan-compensated accumulator; order-stable sums for reproducibility.
#[derive(Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum
    }
}

fn kahan_mean<I: Iterator<Item = f64>>(xs: I, n: usize) -> f64 {
    let mut acc = Kahan::default();
    for x in xs {
        acc.add(x);
    }
    acc.total() / n as f64
}

/// Mean and its standard error (population variance; zero for one rep).
fn mean_se(records: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = records.len();
    let mean = kahan_mean(records.iter().map(|r| r[j]), n);
    let var = kahan_mean(records.iter().map(|r| (r[j] - mean) * (r[j] - mean)), n);
    (mean, (var / n as f64).sqrt())
}

/// Population variance of a column and a moment-based standard error.
fn var_se(records: &[Vec<f64>], j: usize) -> (f64, f64) {
    let n = records.len();
    let mean = kahan_mean(records.iter().map(|r| r[j]), n);
    let var = kahan_mean(records.iter().map(|r| (r[j] - mean) * (r[j] - mean)), n);
    let m4 = kahan_mean(records.iter().map(|r| (r[j] - mean).powi(4)), n);
    let se2 = (m4 - var * var).max(0.0) / n as f64;
    (var, se2.sqrt())
}

/// Frequency of `pred` over a column with its binomial standard error.
fn freq_se(records: &[Vec<f64>], j: usize, pred: impl Fn(f64) -> bool) -> (f64, f64) {
    let n = records.len();
    let p = kahan_mean(records.iter().map(|r| if pred(r[j]) { 1.0 } else { 0.0 }), n);
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// Run all replications for one sample size; each record is one
/// replication's metric vector. Replications are independent substreams and
/// the result order is the replication order, so thread count is
/// irrelevant to the output.
fn run_reps<F>(cfg: &MCConfig, t_idx: usize, t_len: usize, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&FunctionalSeries, &mut ChaCha8Rng) -> Result<Vec<f64>> + Sync,
{
    let table_id = cfg.table.stream_id();
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(cfg.seed, &[table_id, t_idx as u64, rep as u64]);
            let (series, _truth) = gen_dgp(&cfg.dgp, t_len, &mut rng)?;
            f(&series, &mut rng)
        })
        .collect()
}

struct RowBuilder {
    rows: Vec<McRow>,
}

impl RowBuilder {
    fn new() -> Self {
        RowBuilder { rows: Vec::new() }
    }

    /// Append `(value, se)` for the next sample size to the row identified
    /// by the labels, creating it on first use (rows keep first-use order).
    fn push(&mut self, block: &str, selector: &str, method: &str, value: f64, se: f64) {
        let row = match self
            .rows
            .iter_mut()
            .find(|r| r.block == block && r.selector == selector && r.method == method)
        {
            Some(r) => r,
            None => {
                self.rows.push(McRow {
                    block: block.to_string(),
                    selector: selector.to_string(),
                    method: method.to_string(),
                    values: Vec::new(),
                    ses: Vec::new(),
                });
                self.rows.last_mut().unwrap()
            }
        };
        row.values.push(value);
        row.ses.push(se);
    }
}

/// Run the configured study and aggregate the report.
///
/// `cv` supplies critical values and is required for the designs that
/// reject against them (see [`McTable::needs_cv_table`]); lookup failures
/// for a missing cell propagate with the offending cell named.
pub fn run_table(cfg: &MCConfig, cv: Option<&CriticalValueTable>) -> Result<MCReport> {
    cfg.validate()?;
    if cfg.table.needs_cv_table() && cv.is_none() {
        return Err(Error::invalid(
            "cv_table",
            format!("critical-value table required for the {} design", cfg.table.name()),
        ));
    }
    let mut builder = RowBuilder::new();
    let mut notes = vec![
        "ARMA score innovations: standard normal (law not fixed by the design)".to_string(),
        "ARMA burn-in: 200 observations".to_string(),
    ];
    match cfg.table {
        McTable::T1 => run_t1(cfg, cv.unwrap(), &mut builder, &mut notes)?,
        McTable::T2 => run_t2(cfg, &mut builder)?,
        McTable::T3 => run_t3(cfg, &mut builder)?,
        McTable::T4 => run_t4(cfg, &mut builder)?,
        McTable::T5 => run_t5(cfg, &mut builder)?,
        McTable::SizePower => run_size_power(cfg, cv.unwrap(), &mut builder, &mut notes)?,
    }
    Ok(MCReport {
        table: cfg.table.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        reps: cfg.reps,
        t_list: cfg.t_list.clone(),
        notes,
        config: cfg.clone(),
        rows: builder.rows,
    })
}

fn run_t1(
    cfg: &MCConfig,
    cv: &CriticalValueTable,
    builder: &mut RowBuilder,
    notes: &mut Vec<String>,
) -> Result<()> {
    notes.push(if cfg.plug_in_d {
        "critical values evaluated at a per-replication plug-in estimate of d".to_string()
    } else {
        "critical values evaluated at the generator's memory order d".to_string()
    });
    let q_d = cfg.dgp.q_d;
    for (t_idx, &t_len) in cfg.t_list.iter().enumerate() {
        let records = run_reps(cfg, t_idx, t_len, |series, rng| {
            let d_for_cv = if cfg.plug_in_d {
                let m = power_bandwidth(t_len, cfg.m_exponent);
                estimate_d(series, DEFAULT_L, DEFAULT_J_D, m, rng, DMethod::Differenced)?.value
            } else {
                cfg.dgp.d
            };
            let mut metrics = Vec::with_capacity(2 * cfg.k_list.len());
            for &q_max in &cfg.k_list {
                let seq = sequential_rank_test(
                    series,
                    q_max,
                    KRule::Offset(2),
                    cfg.alpha,
                    cfg.eta,
                    d_for_cv,
                    cv,
                    Statistic::Max,
                )?;
                metrics.push(seq.q_bar as f64);
            }
            let eigs = eigen(&sample_cov(series, true))?;
            for &k in &cfg.k_list {
                let (q_hat, _) = ratio_estimate_qd(&eigs, k)?;
                metrics.push(q_hat as f64);
            }
            Ok(metrics)
        })?;
        for (i, &k) in cfg.k_list.iter().enumerate() {
            let sel = format!("q_max={k}");
            let (v, se) = freq_se(&records, i, |q| q as usize == q_d);
            builder.push("correct_determination", &sel, "proposed", v, se);
            let (v, se) = freq_se(&records, i, |q| (q as usize) < q_d);
            builder.push("underestimation", &sel, "proposed", v, se);
        }
        for (i, &k) in cfg.k_list.iter().enumerate() {
            let col = cfg.k_list.len() + i;
            let sel = format!("K={k}");
            let (v, se) = freq_se(&records, col, |q| q as usize == q_d);
            builder.push("correct_determination", &sel, "eigenvalue-ratio", v, se);
            let (v, se) = freq_se(&records, col, |q| (q as usize) < q_d);
            builder.push("underestimation", &sel, "eigenvalue-ratio", v, se);
        }
    }
    Ok(())
}

fn run_t2(cfg: &MCConfig, builder: &mut RowBuilder) -> Result<()> {
    let q_d = cfg.dgp.q_d;
    let q_db = cfg.dgp.q_db;
    for (t_idx, &t_len) in cfg.t_list.iter().enumerate() {
        let records = run_reps(cfg, t_idx, t_len, |series, _rng| {
            let eigs = eigen(&sample_cov(series, true))?;
            let p_bar = Projection::from_frame(eigs.leading(q_d))?;
            let mut metrics = Vec::with_capacity(cfg.h_exponents.len() * cfg.k_list.len());
            for &h_exp in &cfg.h_exponents {
                let h = power_bandwidth(t_len, h_exp);
                for &k in &cfg.k_list {
                    let split = lrd_srd_split(series, &p_bar, h, k)?;
                    metrics.push(split.q_db as f64);
                }
            }
            Ok(metrics)
        })?;
        let mut col = 0;
        for &h_exp in &cfg.h_exponents {
            for &k in &cfg.k_list {
                let sel = format!("h_exp={h_exp},K={k}");
                let (v, se) = freq_se(&records, col, |q| q as usize == q_db);
                builder.push("correct_determination", &sel, "proposed", v, se);
                let (v, se) = freq_se(&records, col, |q| (q as usize) < q_db);
                builder.push("underestimation", &sel, "proposed", v, se);
                col += 1;
            }
        }
    }
    Ok(())
}

/// Per-replication memory estimates of `d`: the random-projection
/// estimator and the leading-eigenvector baseline on the initialized
/// series.
fn d_estimates(series: &FunctionalSeries, m: usize, rng: &mut ChaCha8Rng) -> Result<[f64; 2]> {
    let proposed = estimate_d(series, DEFAULT_L, DEFAULT_J_D, m, rng, DMethod::Differenced)?.value;
    let z0 = series.initialize();
    let eigs = eigen(&sample_cov(&z0, false))?;
    let v1 = eigs.vectors().column(0).clone_owned();
    let score = z0.scores(&v1);
    let baseline = local_whittle(&score, m, AdmissibleRange::nonstationary())?;
    Ok([proposed, baseline])
}

/// Per-replication memory estimates of `d − b`: the mixed-eigenvector
/// estimator and its single-eigenvector baseline.
fn db_estimates(
    series: &FunctionalSeries,
    q_d: usize,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<[f64; 2]> {
    let proposed = estimate_d_minus_b(series, q_d, DEFAULT_L, DEFAULT_J_DB, m, rng)?.value;
    let baseline = estimate_d_minus_b(series, q_d, 1, 1, m, rng)?.value;
    Ok([proposed, baseline])
}

fn push_moment_rows(
    builder: &mut RowBuilder,
    records: &[Vec<f64>],
    selector: &str,
    methods: &[(&str, usize)],
    truth: f64,
) {
    for &(method, col) in methods {
        let (mean, se) = mean_se(records, col);
        builder.push("mean_bias", selector, method, mean - truth, se);
        let (var, se) = var_se(records, col);
        builder.push("variance", selector, method, var, se);
        let sq: Vec<Vec<f64>> =
            records.iter().map(|r| vec![(r[col] - truth) * (r[col] - truth)]).collect();
        let (mse, se) = mean_se(&sq, 0);
        builder.push("mse", selector, method, mse, se);
    }
}

fn run_t3(cfg: &MCConfig, builder: &mut RowBuilder) -> Result<()> {
    for (t_idx, &t_len) in cfg.t_list.iter().enumerate() {
        let m = power_bandwidth(t_len, cfg.m_exponent);
        let records = run_reps(cfg, t_idx, t_len, |series, rng| {
            let d = d_estimates(series, m, rng)?;
            Ok(d.to_vec())
        })?;
        let sel = format!("m_exp={}", cfg.m_exponent);
        push_moment_rows(
            builder,
            &records,
            &sel,
            &[("proposed", 0), ("leading-eigenvector", 1)],
            cfg.dgp.d,
        );
    }
    Ok(())
}

fn run_t4(cfg: &MCConfig, builder: &mut RowBuilder) -> Result<()> {
    let q_d = cfg.dgp.q_d;
    for (t_idx, &t_len) in cfg.t_list.iter().enumerate() {
        let m = power_bandwidth(t_len, cfg.m_exponent);
        let records = run_reps(cfg, t_idx, t_len, |series, rng| {
            let db = db_estimates(series, q_d, m, rng)?;
            Ok(db.to_vec())
        })?;
        let sel = format!("m_exp={}", cfg.m_exponent);
        push_moment_rows(
            builder,
            &records,
            &sel,
            &[("proposed", 0), ("single-eigenvector", 1)],
            cfg.dgp.d_minus_b,
        );
    }
    Ok(())
}

fn run_t5(cfg: &MCConfig, builder: &mut RowBuilder) -> Result<()> {
    let q_d = cfg.dgp.q_d;
    let score_alpha = 1.0 - cfg.level;
    for (t_idx, &t_len) in cfg.t_list.iter().enumerate() {
        let m = power_bandwidth(t_len, cfg.m_exponent);
        // Interval half-width of the pivotal normal band at this bandwidth.
        let (_, hw) = lw_confidence(0.0, m, cfg.level)?;
        let records = run_reps(cfg, t_idx, t_len, |series, rng| {
            let d = d_estimates(series, m, rng)?;
            let db = db_estimates(series, q_d, m, rng)?;
            Ok(vec![d[0], d[1], db[0], db[1]])
        })?;
        let specs: [(&str, &str, usize, f64); 4] = [
            ("target=d", "proposed", 0, cfg.dgp.d),
            ("target=d", "leading-eigenvector", 1, cfg.dgp.d),
            ("target=d-b", "proposed", 2, cfg.dgp.d_minus_b),
            ("target=d-b", "single-eigenvector", 3, cfg.dgp.d_minus_b),
        ];
        for &(sel, method, col, truth) in &specs {
            let selector = format!("m_exp={},{sel}", cfg.m_exponent);
            let (covered, se) = freq_se(&records, col, |est| (est - truth).abs() <= hw);
            builder.push("coverage_difference", &selector, method, (covered - cfg.level).abs(), se);
            let scores: Vec<Vec<f64>> = records
                .iter()
                .map(|r| {
                    let miss = (r[col] - truth).abs() - hw;
                    vec![2.0 * hw + (2.0 / score_alpha) * miss.max(0.0)]
                })
                .collect();
            let (score, se) = mean_se(&scores, 0);
            builder.push("interval_score", &selector, method, score, se);
        }
    }
    Ok(())
}

fn run_size_power(
    cfg: &MCConfig,
    cv: &CriticalValueTable,
    builder: &mut RowBuilder,
    notes: &mut Vec<String>,
) -> Result<()> {
    notes.push("critical values evaluated at the generator's memory order d".to_string());
    let q_d = cfg.dgp.q_d;
    let size_cv = cv.lookup(q_d, cfg.alpha, cfg.dgp.d, cfg.eta)?;
    let power_cv = cv.lookup(q_d + 1, cfg.alpha, cfg.dgp.d, cfg.eta)?;
    for (t_idx, &t_len) in cfg.t_list.iter().enumerate() {
        let records = run_reps(cfg, t_idx, t_len, |series, _rng| {
            let mut metrics = Vec::with_capacity(4 * cfg.k_list.len());
            for &k in &cfg.k_list {
                let at_truth = vr_statistics(series, q_d, k, cfg.alpha)?;
                let above = vr_statistics(series, q_d + 1, k, cfg.alpha)?;
                metrics.push(f64::from(at_truth.stat_max > size_cv.crit_max));
                metrics.push(f64::from(at_truth.stat_trace > size_cv.crit_trace));
                metrics.push(f64::from(above.stat_max > power_cv.crit_max));
                metrics.push(f64::from(above.stat_trace > power_cv.crit_trace));
            }
            Ok(metrics)
        })?;
        for (i, &k) in cfg.k_list.iter().enumerate() {
            let sel = format!("K={k}");
            let base = 4 * i;
            let (v, se) = freq_se(&records, base, |x| x > 0.5);
            builder.push("size", &sel, "max", v, se);
            let (v, se) = freq_se(&records, base + 1, |x| x > 0.5);
            builder.push("size", &sel, "trace", v, se);
            let (v, se) = freq_se(&records, base + 2, |x| x > 0.5);
            builder.push("power", &sel, "max", v, se);
            let (v, se) = freq_se(&records, base + 3, |x| x > 0.5);
            builder.push("power", &sel, "trace", v, se);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limitsim::build_cv_table;

    fn cv_at_design_d(qs: &[usize]) -> CriticalValueTable {
        build_cv_table(qs, 0.5, &[0.95], &[0.05], 256, 2000, 424242).unwrap()
    }

    fn small_config(table: McTable) -> MCConfig {
        let mut cfg = MCConfig::for_table(table, 30, vec![200], 7);
        cfg.k_list = vec![4];
        cfg.h_exponents = vec![0.4];
        cfg
    }

    #[test]
    fn config_validation_catches_bad_windows() {
        let mut cfg = small_config(McTable::T2);
        cfg.k_list = vec![25];
        assert!(cfg.validate().is_err());

        let mut cfg = small_config(McTable::SizePower);
        cfg.k_list = vec![3];
        assert!(cfg.validate().is_err());

        let mut cfg = small_config(McTable::T1);
        cfg.t_list = vec![20];
        assert!(cfg.validate().is_err());

        let mut cfg = small_config(McTable::T1);
        cfg.reps = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn cv_table_is_required_for_rejection_designs() {
        let cfg = small_config(McTable::T1);
        let err = run_table(&cfg, None).unwrap_err();
        assert!(err.to_string().contains("critical-value table"));
        assert!(run_table(&small_config(McTable::T3), None).is_ok());
    }

    #[test]
    fn missing_q_cell_propagates_with_cell_name() {
        let mut cfg = small_config(McTable::SizePower);
        cfg.reps = 2;
        let cv = cv_at_design_d(&[3]);
        let err = run_table(&cfg, Some(&cv)).unwrap_err();
        assert!(err.to_string().contains("q=4"), "error was: {err}");
    }

    #[test]
    fn single_rep_report_is_degenerate() {
        let mut cfg = small_config(McTable::T3);
        cfg.reps = 1;
        cfg.t_list = vec![100];
        let report = run_table(&cfg, None).unwrap();
        let var_rows: Vec<_> =
            report.rows.iter().filter(|r| r.block == "variance").collect();
        assert_eq!(var_rows.len(), 2);
        for row in var_rows {
            assert_eq!(row.values[0], 0.0);
            assert_eq!(row.ses[0], 0.0);
        }
        let bias = report
            .rows
            .iter()
            .find(|r| r.block == "mean_bias" && r.method == "proposed")
            .unwrap()
            .values[0];
        let mse = report
            .rows
            .iter()
            .find(|r| r.block == "mse" && r.method == "proposed")
            .unwrap()
            .values[0];
        assert!((mse - bias * bias).abs() < 1e-12);
    }

    #[test]
    fn single_rep_frequencies_are_indicators() {
        let mut cfg = small_config(McTable::T2);
        cfg.reps = 1;
        let report = run_table(&cfg, None).unwrap();
        for row in &report.rows {
            assert!(row.values[0] == 0.0 || row.values[0] == 1.0);
            assert_eq!(row.ses[0], 0.0);
        }
    }

    #[test]
    fn t1_recovers_rank_at_moderate_length() {
        let mut cfg = small_config(McTable::T1);
        cfg.reps = 120;
        cfg.t_list = vec![350];
        let cv = cv_at_design_d(&[1, 2, 3, 4]);
        let report = run_table(&cfg, Some(&cv)).unwrap();
        let correct = report
            .rows
            .iter()
            .find(|r| r.block == "correct_determination" && r.method == "proposed")
            .unwrap();
        assert!(
            correct.values[0] > 0.6 && correct.values[0] <= 1.0,
            "sequential correct rate {}",
            correct.values[0]
        );
        let lrs = report
            .rows
            .iter()
            .find(|r| r.block == "correct_determination" && r.method == "eigenvalue-ratio")
            .unwrap();
        assert!(
            correct.values[0] > lrs.values[0],
            "sequential {} should beat ratio {}",
            correct.values[0],
            lrs.values[0]
        );
    }

    #[test]
    fn size_power_orders_sensibly() {
        let mut cfg = small_config(McTable::SizePower);
        cfg.reps = 80;
        cfg.t_list = vec![350];
        let cv = cv_at_design_d(&[3, 4]);
        let report = run_table(&cfg, Some(&cv)).unwrap();
        let get = |block: &str, method: &str| {
            report
                .rows
                .iter()
                .find(|r| r.block == block && r.method == method)
                .unwrap()
                .values[0]
        };
        assert!(get("size", "max") <= 0.15, "max size {}", get("size", "max"));
        assert!(get("size", "trace") <= 0.15, "trace size {}", get("size", "trace"));
        assert!(get("power", "max") >= 0.4, "max power {}", get("power", "max"));
        assert!(
            get("power", "max") >= get("power", "trace"),
            "max power {} vs trace {}",
            get("power", "max"),
            get("power", "trace")
        );
    }

    #[test]
    fn reports_are_byte_identical_across_thread_counts() {
        let mut cfg = small_config(McTable::T4);
        cfg.reps = 12;
        cfg.t_list = vec![120, 150];
        let run_with = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run_table(&cfg, None).unwrap())
        };
        let a = run_with(1);
        let b = run_with(4);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_eq!(a.provenance_json().unwrap(), b.provenance_json().unwrap());
    }

    #[test]
    fn csv_layout_matches_config_shape() {
        let mut cfg = small_config(McTable::T5);
        cfg.reps = 3;
        cfg.t_list = vec![100, 120];
        let report = run_table(&cfg, None).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "block,selector,method,T=100,T=120,se_T=100,se_T=120");
        // 2 blocks × 2 targets × 2 methods.
        assert_eq!(lines.count(), 8);
        for row in &report.rows {
            assert_eq!(row.values.len(), 2);
            assert_eq!(row.ses.len(), 2);
        }
    }

    #[test]
    fn write_dir_round_trips(
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config(McTable::T2);
        cfg.reps = 2;
        cfg.t_list = vec![100];
        let report = run_table(&cfg, None).unwrap();
        report.write_dir(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
        assert_eq!(csv, report.to_csv());
        let json = std::fs::read_to_string(dir.path().join("provenance.json")).unwrap();
        assert!(json.contains("\"seed\": 7"));
    }
}
