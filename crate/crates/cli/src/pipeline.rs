//! End-to-end analysis of one curve-valued series.
//!
//! The pipeline chains the estimation stages in their natural order:
//!
//! 1. memory order `d` (random-projection local Whittle on first
//!    differences, plus the levels baseline on the leading eigenvector),
//! 2. the dominant dimension `q̄_d` by the sequential variance-ratio test
//!    with critical values evaluated at the plug-in `d̂`, next to the
//!    eigenvalue-ratio estimate,
//! 3. when a dominant subspace was found, the long-range/short-range split
//!    of its complement and the memory order `d̂ − b` of the long-range
//!    part,
//! 4. principal-component score series `⟨Z_t⁰, v̂_j⟩` for selected `j`
//!    (plot-ready evidence of the different persistence regimes).
//!
//! Every stochastic step draws from a substream of the configured seed, so
//! a report is reproduced exactly by its recorded provenance.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use fraccurve_core::cointegration::{
    lrd_srd_split, ratio_estimate_qd, sequential_rank_test, KRule, RankTestOutcome, Statistic,
};
use fraccurve_core::covariance::{eigen, sample_cov, Projection};
use fraccurve_core::limitsim::CriticalValueTable;
use fraccurve_core::memest::{estimate_d, estimate_d_minus_b, memory_ci, DMethod, MemoryEstimate};
use fraccurve_core::rng::substream;
use fraccurve_core::spectra::{local_whittle, power_bandwidth, AdmissibleRange};
use fraccurve_core::{BasisKind, Error, FunctionalSeries, Result};

/// Substream identifiers of the pipeline's stochastic stages.
const STREAM_D: u64 = 71;
const STREAM_DB: u64 = 72;
const STREAM_DB_BASELINE: u64 = 73;

/// Tuning parameters of [`run_pipeline`].
///
/// The defaults reproduce the reference protocol for mortality curves;
/// every field maps to one command-line flag.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Basis family used when ingesting raw curves.
    pub basis: BasisKind,
    /// Basis size used when ingesting raw curves.
    pub dim: usize,
    /// Extra fractional integration order of the variance-ratio test.
    pub alpha: f64,
    /// Significance level of each sequential step.
    pub eta: f64,
    /// Largest rank tested.
    pub q_max: usize,
    /// Projection dimension rule `K = q + offset`.
    pub k_offset: usize,
    /// Ratio window of the eigenvalue-ratio estimate and the second-stage
    /// split.
    pub lrs_k: usize,
    /// Whittle bandwidth exponent, `m = ⌊1 + T^e⌋`.
    pub m_exponent: f64,
    /// Bartlett bandwidth exponent, `h = ⌊1 + T^e⌋`.
    pub h_exponent: f64,
    /// Number of random projections of the memory estimators.
    pub l: usize,
    /// Legendre elements mixed when estimating `d`.
    pub j_d: usize,
    /// Eigendirections mixed when estimating `d − b`.
    pub j_db: usize,
    /// Statistic driving the sequential decisions.
    pub statistic: Statistic,
    /// Confidence level of the reported intervals.
    pub level: f64,
    /// Score series to emit (1-based eigenvector indices); `None` picks
    /// one representative per estimated block.
    pub score_indices: Option<Vec<usize>>,
    /// Seed of the stochastic stages.
    pub seed: u64,
}

impl PipelineConfig {
    /// Reference protocol with the given seed.
    pub fn new(seed: u64) -> Self {
        PipelineConfig {
            basis: BasisKind::ShiftedLegendre,
            dim: 40,
            alpha: 0.5,
            eta: 0.05,
            q_max: 7,
            k_offset: 2,
            lrs_k: 7,
            m_exponent: 0.65,
            h_exponent: 0.3,
            l: 20,
            j_d: 5,
            j_db: 2,
            statistic: Statistic::Max,
            level: 0.95,
            score_indices: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim", "basis size must be positive"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::invalid("alpha", "fractional order alpha must be positive"));
        }
        if !(0.0 < self.eta && self.eta < 1.0) {
            return Err(Error::invalid("eta", "significance level must lie in (0,1)"));
        }
        if self.q_max < 1 {
            return Err(Error::invalid("q_max", "need q_max ≥ 1"));
        }
        if self.lrs_k < 1 {
            return Err(Error::invalid("lrs_k", "ratio window must be positive"));
        }
        for (name, e) in [("m_exponent", self.m_exponent), ("h_exponent", self.h_exponent)] {
            if !(0.0 < e && e < 1.0) {
                return Err(Error::invalid("exponent", format!("{name} must lie in (0,1), got {e}")));
            }
        }
        if self.l < 1 || self.j_d < 1 || self.j_db < 1 {
            return Err(Error::invalid("projections", "L, J_d and J_db must be positive"));
        }
        if !(0.0 < self.level && self.level < 1.0) {
            return Err(Error::invalid("level", "confidence level must lie in (0,1)"));
        }
        if let Some(indices) = &self.score_indices {
            if indices.is_empty() || indices.contains(&0) {
                return Err(Error::invalid(
                    "score_indices",
                    "score indices are 1-based and at least one is required",
                ));
            }
        }
        Ok(())
    }
}

/// Second-stage results, present when a dominant subspace was found.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondStageReport {
    /// Bartlett bandwidth `h` of the long-run covariance.
    pub bandwidth_h: usize,
    /// Ratio window used on the projected spectrum.
    pub ratio_window: usize,
    /// Estimated dimension of the long-range dependent subspace.
    pub q_db: usize,
    /// Dimension of the short-range remainder, `p − q̄_d − q̂_{d−b}`.
    pub srd_rank: usize,
    /// Mixed-eigenvector memory estimate of `d − b`, with interval.
    pub d_minus_b: MemoryEstimate,
    /// Single-eigenvector baseline estimate of `d − b`.
    pub d_minus_b_lrs: f64,
}

/// Provenance of the critical-value table used by the sequential test.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CvTableInfo {
    pub path: String,
    pub seed: u64,
    pub replications: usize,
    pub path_steps: usize,
    pub alpha: f64,
}

/// Full analysis report; serialized as `report.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub label: String,
    pub t_len: usize,
    pub p: usize,
    /// Whittle bandwidth `m` shared by all memory estimates.
    pub bandwidth_m: usize,
    /// Random-projection memory estimate of `d`, with interval.
    pub d_hat: MemoryEstimate,
    /// Leading-eigenvector baseline estimate of `d`.
    pub d_hat_lrs: f64,
    /// Dominant dimension from the sequential test; zero when every
    /// hypothesis was rejected.
    pub q_bar: usize,
    /// True when `q_bar == 0`: the test found no direction of the dominant
    /// order and the second stage was skipped.
    pub no_dominant_subspace: bool,
    /// True when the plug-in `d̂` left the critical-value grid and clamped
    /// edge values were used.
    pub cv_clamped: bool,
    /// Per-step test outcomes in the order tested (descending `q`).
    pub steps: Vec<RankTestOutcome>,
    /// Eigenvalue-ratio estimate of the dominant dimension.
    pub q_hat_lrs: usize,
    pub second_stage: Option<SecondStageReport>,
    /// Eigenvector indices of the emitted score series.
    pub score_indices: Vec<usize>,
    pub provenance: Provenance,
}

/// Everything needed to reproduce the report.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config: PipelineConfig,
    pub cv_table: CvTableInfo,
}

/// Score series `⟨Z_t⁰, v̂_j⟩` for the selected indices, column per index.
#[derive(Clone, Debug)]
pub struct ScoreSeries {
    pub indices: Vec<usize>,
    pub values: DMatrix<f64>,
}

impl ScoreSeries {
    /// Plot-ready CSV: `t` column plus one `s<j>` column per index.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for &j in &self.indices {
            out.push_str(&format!(",s{j}"));
        }
        out.push('\n');
        for t in 0..self.values.nrows() {
            out.push_str(&format!("{}", t + 1));
            for c in 0..self.values.ncols() {
                out.push_str(&format!(",{}", self.values[(t, c)]));
            }
            out.push('\n');
        }
        out
    }
}

/// Per-step CSV of the sequential walk; `report.json` holds the same data
/// with full precision and provenance.
pub fn steps_to_csv(steps: &[RankTestOutcome]) -> String {
    let mut out = String::from(
        "q,K,d_used,stat_max,stat_trace,crit_max,crit_trace,reject_max,reject_trace\n",
    );
    for s in steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.q_tested,
            s.k_used,
            s.d_used.map_or(String::new(), |v| v.to_string()),
            s.stat_max,
            s.stat_trace,
            s.crit_max.map_or(String::new(), |v| v.to_string()),
            s.crit_trace.map_or(String::new(), |v| v.to_string()),
            s.reject_max.map_or(String::new(), |v| v.to_string()),
            s.reject_trace.map_or(String::new(), |v| v.to_string()),
        ));
    }
    out
}

/// One representative score index per estimated block: the first dominant,
/// first long-range and first short-range direction (falling back to the
/// three leading indices when no dominant subspace was found).
fn default_score_indices(q_bar: usize, q_db: Option<usize>, p: usize) -> Vec<usize> {
    let mut picks = if q_bar == 0 {
        vec![1, 2, 3]
    } else {
        let mut v = vec![1, q_bar + 1];
        if let Some(q_db) = q_db {
            v.push(q_bar + q_db + 1);
        }
        v
    };
    picks.retain(|&j| j <= p);
    picks.dedup();
    picks
}

/// Run the full analysis on one series.
///
/// `cv_path` is recorded in the provenance; the table itself must cover
/// the ranks `1..=q_max` at the configured `alpha` and `eta`.
pub fn run_pipeline(
    series: &FunctionalSeries,
    cv: &CriticalValueTable,
    cfg: &PipelineConfig,
    cv_path: &str,
) -> Result<(PipelineReport, ScoreSeries)> {
    cfg.validate()?;
    let t_len = series.len();
    let p = series.dim();
    let m = power_bandwidth(t_len, cfg.m_exponent);

    // Stage 1: memory order of the dominant component.
    let mut rng_d = substream(cfg.seed, &[STREAM_D]);
    let d_hat = memory_ci(
        &estimate_d(series, cfg.l, cfg.j_d, m, &mut rng_d, DMethod::Differenced)?,
        cfg.level,
    )?;
    let z0 = series.initialize();
    let eigs0 = eigen(&sample_cov(&z0, false))?;
    let v1 = eigs0.vectors().column(0).clone_owned();
    let d_hat_lrs = local_whittle(&z0.scores(&v1), m, AdmissibleRange::nonstationary())?;

    // Stage 2: dominant dimension, critical values at the plug-in d̂.
    let seq = sequential_rank_test(
        series,
        cfg.q_max,
        KRule::Offset(cfg.k_offset),
        cfg.alpha,
        cfg.eta,
        d_hat.value,
        cv,
        cfg.statistic,
    )?;
    let eigs_centered = eigen(&sample_cov(series, true))?;
    let (q_hat_lrs, _) = ratio_estimate_qd(&eigs_centered, cfg.lrs_k)?;

    // Stage 3: split the stationary complement and estimate d − b. The
    // dominant subspace is spanned by the leading q̄_d eigenvectors of the
    // sample covariance, matching the split's population target.
    let second_stage = if seq.q_bar > 0 && seq.q_bar + 2 <= p {
        let h = power_bandwidth(t_len, cfg.h_exponent);
        let window = cfg.lrs_k.min(p - seq.q_bar - 1);
        let p_bar = Projection::from_frame(eigs_centered.leading(seq.q_bar))?;
        let split = lrd_srd_split(series, &p_bar, h, window)?;
        let mut rng_db = substream(cfg.seed, &[STREAM_DB]);
        let d_minus_b = memory_ci(
            &estimate_d_minus_b(series, seq.q_bar, cfg.l, cfg.j_db, m, &mut rng_db)?,
            cfg.level,
        )?;
        let mut rng_base = substream(cfg.seed, &[STREAM_DB_BASELINE]);
        let d_minus_b_lrs =
            estimate_d_minus_b(series, seq.q_bar, 1, 1, m, &mut rng_base)?.value;
        Some(SecondStageReport {
            bandwidth_h: h,
            ratio_window: window,
            q_db: split.q_db,
            srd_rank: split.srd.rank(),
            d_minus_b,
            d_minus_b_lrs,
        })
    } else {
        None
    };

    // Stage 4: principal-component score series of the initialized curves.
    let indices = match &cfg.score_indices {
        Some(list) => {
            let mut list = list.clone();
            list.sort_unstable();
            list.dedup();
            if let Some(&bad) = list.iter().find(|&&j| j > p) {
                return Err(Error::invalid(
                    "score_indices",
                    format!("index {bad} exceeds the dimension p={p}"),
                ));
            }
            list
        }
        None => default_score_indices(
            seq.q_bar,
            second_stage.as_ref().map(|s| s.q_db),
            p,
        ),
    };
    let mut values = DMatrix::zeros(z0.len(), indices.len());
    for (c, &j) in indices.iter().enumerate() {
        let scores = z0.scores(&eigs0.vectors().column(j - 1).clone_owned());
        for (t, v) in scores.into_iter().enumerate() {
            values[(t, c)] = v;
        }
    }

    let report = PipelineReport {
        label: series.label().to_string(),
        t_len,
        p,
        bandwidth_m: m,
        d_hat,
        d_hat_lrs,
        q_bar: seq.q_bar,
        no_dominant_subspace: seq.q_bar == 0,
        cv_clamped: seq.cv_clamped,
        steps: seq.steps,
        q_hat_lrs,
        second_stage,
        score_indices: indices.clone(),
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            cv_table: CvTableInfo {
                path: cv_path.to_string(),
                seed: cv.seed(),
                replications: cv.replications(),
                path_steps: cv.path_steps(),
                alpha: cv.alpha(),
            },
        },
    };
    Ok((report, ScoreSeries { indices, values }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fraccurve_core::dgp::{gen_dgp, DGPParams};
    use fraccurve_core::limitsim::build_cv_table;
    use fraccurve_core::Basis;
    use nalgebra::DVector;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::OnceLock;

    fn small_cv() -> &'static CriticalValueTable {
        static CV: OnceLock<CriticalValueTable> = OnceLock::new();
        CV.get_or_init(|| {
            build_cv_table(
                &[1, 2, 3, 4, 5],
                0.5,
                &[0.6, 0.8, 0.95, 1.1],
                &[0.05],
                250,
                1000,
                90,
            )
            .unwrap()
        })
    }

    fn cfg(seed: u64) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(seed);
        cfg.q_max = 5;
        cfg.lrs_k = 6;
        cfg
    }

    #[test]
    fn recovers_the_generator_blocks_on_a_long_sample() {
        let params = DGPParams::default();
        let mut rng = substream(7, &[90, 0]);
        let (series, _) = gen_dgp(&params, 1000, &mut rng).unwrap();
        let (report, scores) = run_pipeline(&series, small_cv(), &cfg(11), "cv.csv").unwrap();
        assert_eq!(report.q_bar, params.q_d);
        assert!(!report.no_dominant_subspace);
        assert!((report.d_hat.value - params.d).abs() < 0.25);
        let second = report.second_stage.expect("dominant subspace found");
        assert_eq!(second.q_db + second.srd_rank + report.q_bar, params.p);
        // The initialized series drops its first observation.
        assert_eq!(scores.values.ncols(), report.score_indices.len());
        assert_eq!(scores.values.nrows(), 999);
        // Dominant scores dwarf short-range scores.
        let lead: f64 = scores.values.column(0).amax();
        let tail: f64 = scores.values.column(scores.values.ncols() - 1).amax();
        assert!(lead > tail);
    }

    #[test]
    fn white_noise_reports_no_dominant_subspace() {
        let basis = Basis::new(BasisKind::Fourier, 8).unwrap();
        let mut rng = substream(5, &[91, 0]);
        let coeffs = DMatrix::from_fn(400, 8, |_, _| StandardNormal.sample(&mut rng));
        let series = FunctionalSeries::new(coeffs, basis, "noise").unwrap();
        let (report, scores) = run_pipeline(&series, small_cv(), &cfg(13), "cv.csv").unwrap();
        assert_eq!(report.q_bar, 0);
        assert!(report.no_dominant_subspace);
        assert!(report.second_stage.is_none());
        assert_eq!(report.steps.len(), 5);
        assert_eq!(report.score_indices, vec![1, 2, 3]);
        assert_eq!(scores.values.ncols(), 3);
    }

    #[test]
    fn report_round_trips_through_json() {
        let params = DGPParams::default();
        let mut rng = substream(7, &[90, 1]);
        let (series, _) = gen_dgp(&params, 300, &mut rng).unwrap();
        let (report, _) = run_pipeline(&series, small_cv(), &cfg(17), "cv.csv").unwrap();
        let text = serde_json::to_string_pretty(&report).unwrap();
        let back: PipelineReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back.q_bar, report.q_bar);
        assert_eq!(back.provenance.config.seed, 17);
        assert_eq!(back.steps.len(), report.steps.len());
    }

    #[test]
    fn identical_seeds_reproduce_the_report_exactly() {
        let params = DGPParams::default();
        let mut rng = substream(7, &[90, 2]);
        let (series, _) = gen_dgp(&params, 300, &mut rng).unwrap();
        let (a, _) = run_pipeline(&series, small_cv(), &cfg(23), "cv.csv").unwrap();
        let (b, _) = run_pipeline(&series, small_cv(), &cfg(23), "cv.csv").unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let (c, _) = run_pipeline(&series, small_cv(), &cfg(29), "cv.csv").unwrap();
        assert!((a.d_hat.value - c.d_hat.value).abs() > 0.0);
    }

    #[test]
    fn explicit_score_indices_are_validated() {
        let params = DGPParams::default();
        let mut rng = substream(7, &[90, 3]);
        let (series, _) = gen_dgp(&params, 200, &mut rng).unwrap();
        let mut bad = cfg(31);
        bad.score_indices = Some(vec![1, 26]);
        assert!(run_pipeline(&series, small_cv(), &bad, "cv.csv").is_err());
        let mut good = cfg(31);
        good.score_indices = Some(vec![2, 2, 1]);
        let (report, scores) = run_pipeline(&series, small_cv(), &good, "cv.csv").unwrap();
        assert_eq!(report.score_indices, vec![1, 2]);
        assert_eq!(scores.to_csv().lines().next().unwrap(), "t,s1,s2");
    }

    #[test]
    fn scores_match_direct_projections() {
        let params = DGPParams::default();
        let mut rng = substream(7, &[90, 4]);
        let (series, _) = gen_dgp(&params, 200, &mut rng).unwrap();
        let mut cfg = cfg(37);
        cfg.score_indices = Some(vec![4]);
        let (_, scores) = run_pipeline(&series, small_cv(), &cfg, "cv.csv").unwrap();
        let z0 = series.initialize();
        let eigs0 = eigen(&sample_cov(&z0, false)).unwrap();
        let v: DVector<f64> = eigs0.vectors().column(3).clone_owned();
        let direct = z0.scores(&v);
        assert_eq!(scores.values.nrows(), direct.len());
        for (t, &value) in direct.iter().enumerate() {
            assert_eq!(scores.values[(t, 0)], value);
        }
    }
}
