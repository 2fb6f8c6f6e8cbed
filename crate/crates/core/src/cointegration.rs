//! Dimension estimation and testing for the dominant and long-range
//! dependent subspaces of a curve-valued time series.
//!
//! The observed series is modelled as a sum of three orthogonal pieces: a
//! nonstationary part of dimension `q_d` carrying memory `d > 1/2`, a
//! stationary long-range dependent part of dimension `q_{d−b}`, and a
//! short-range dependent remainder. Three estimation routes live here:
//!
//! * [`ratio_estimate_qd`] reads `q_d` off the eigenvalue scree of the
//!   sample covariance (largest adjacent ratio);
//! * [`vr_statistics`] and [`sequential_rank_test`] test `H₀: q_d = q`
//!   against `H₀: q_d < q` with variance-ratio statistics, walking `q`
//!   downward until the first non-rejection;
//! * [`lrd_srd_split`] finds the long-range dependent directions inside the
//!   stationary complement from a projected long-run covariance.
//!
//! The variance-ratio statistics compare the centered series `Z̄_t` with its
//! fractional partial sum `Z̃_t = Δ₊^{−α} Z̄_t`. On a nonstationary
//! direction the extra integration changes the growth rate by exactly
//! `T^{α}`, so the generalized eigenvalues `ν̂ B_T w = A_T w` restricted to
//! the leading principal directions settle at rate `T^{−2α}`; on a
//! stationary direction they vanish more slowly, and `T^{2α} ν̂_j` diverges.
//! Small rescaled eigenvalues therefore signal nonstationary directions,
//! and the test rejects `H₀: q_d = q` when the largest (or the sum) of the
//! `q` smallest rescaled eigenvalues exceeds a simulated critical value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{
    bartlett_lrcov, eigen, eigen_sym_matrix, gen_eigen, sample_cov, EigenSystem, Projection,
};
use crate::error::{Error, Result};
use crate::fracdiff::frac_filter;
use crate::limitsim::CriticalValueTable;
use crate::series::FunctionalSeries;

/// Default fractional order of the extra integration step.
pub const DEFAULT_ALPHA: f64 = 0.5;

/// Default significance level of the sequential test.
pub const DEFAULT_ETA: f64 = 0.05;

/// Which variance-ratio statistic drives accept/reject decisions.
///
/// Both statistics are always computed and reported; this enum only selects
/// the one that controls the sequential walk. The max form tends to be more
/// powerful in short samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    /// `Λ⁰ = T^{2α} max_{j≤q} ν̂_j`.
    Max,
    /// `Λ¹ = T^{2α} Σ_{j≤q} ν̂_j`.
    Trace,
}

/// Rule mapping a tested rank `q` to the projection dimension `K`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KRule {
    /// `K = q + offset`, keeping a fixed number of stationary directions in
    /// the projection window at every step.
    Offset(usize),
    /// The same `K` at every step; the caller must keep `K ≥ q_max`.
    Fixed(usize),
}

impl Default for KRule {
    fn default() -> Self {
        KRule::Offset(2)
    }
}

impl KRule {
    /// Projection dimension used when testing rank `q`.
    pub fn k_for(&self, q: usize) -> usize {
        match *self {
            KRule::Offset(offset) => q + offset,
            KRule::Fixed(k) => k,
        }
    }
}

/// Variance-ratio test result for a single hypothesised rank.
///
/// [`vr_statistics`] fills only the statistic fields; the sequential test
/// attaches the plug-in memory order, critical values and decisions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankTestOutcome {
    /// Hypothesised rank `q` under `H₀: q_d = q`.
    pub q_tested: usize,
    /// Fractional order of the extra integration step.
    pub alpha: f64,
    /// Plug-in memory estimate used for the critical-value lookup; absent
    /// when no lookup was performed.
    pub d_used: Option<f64>,
    /// Rescaled generalized eigenvalues `T^{2α} ν̂_1 ≤ … ≤ T^{2α} ν̂_q`.
    pub nu_scaled: Vec<f64>,
    /// `Λ⁰ = T^{2α} max_{j≤q} ν̂_j`.
    pub stat_max: f64,
    /// `Λ¹ = T^{2α} Σ_{j≤q} ν̂_j`.
    pub stat_trace: f64,
    /// Simulated `(1−η)` quantile for `Λ⁰`, when looked up.
    pub crit_max: Option<f64>,
    /// Simulated `(1−η)` quantile for `Λ¹`, when looked up.
    pub crit_trace: Option<f64>,
    /// `Λ⁰ > crit_max`, when critical values were attached.
    pub reject_max: Option<bool>,
    /// `Λ¹ > crit_trace`, when critical values were attached.
    pub reject_trace: Option<bool>,
    /// Projection dimension `K` of this step.
    pub k_used: usize,
}

impl RankTestOutcome {
    /// Rejection decision under the chosen statistic, if critical values
    /// were attached.
    pub fn reject(&self, statistic: Statistic) -> Option<bool> {
        match statistic {
            Statistic::Max => self.reject_max,
            Statistic::Trace => self.reject_trace,
        }
    }
}

/// Result of the sequential rank test.
#[derive(Clone, Debug)]
pub struct SequentialOutcome {
    /// First non-rejected rank walking `q_max, …, 1`; zero when every
    /// hypothesis is rejected (no dominant subspace detected).
    pub q_bar: usize,
    /// Orthogonal projection onto the span of the first `q̄_d` generalized
    /// eigenvectors of the accepting step; the zero projection when
    /// `q_bar == 0`.
    pub p_tilde: Projection,
    /// Per-step outcomes in the order tested (descending `q`).
    pub steps: Vec<RankTestOutcome>,
    /// True when the plug-in `d` fell outside the critical-value grid and
    /// clamped edge values were used.
    pub cv_clamped: bool,
}

/// How the dominant subspace of a [`SubspaceDecomposition`] was estimated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecompositionMethod {
    /// Eigenvalue-ratio estimator on the sample covariance.
    EigenRatio,
    /// Sequential variance-ratio test.
    SequentialVR,
}

/// Estimated splitting `H = H_N ⊕ H_LRD ⊕ H_SRD` of the coordinate space.
#[derive(Clone, Debug)]
pub struct SubspaceDecomposition {
    /// Dimension of the dominant (nonstationary) subspace.
    pub q_d: usize,
    /// Dimension of the long-range dependent subspace, when estimated.
    pub q_db: Option<usize>,
    /// Projection onto the dominant subspace; rank `q_d`.
    pub p_hat: Projection,
    /// Projection onto the long-range dependent subspace, when estimated.
    pub q_hat: Option<Projection>,
    /// Estimation route of the dominant part.
    pub method: DecompositionMethod,
}

impl SubspaceDecomposition {
    /// Assemble and validate a decomposition.
    ///
    /// The dominant projection must have rank `q_d`; when a long-range
    /// dependent pair is given its projection must have the stated rank and
    /// be orthogonal to the dominant one (`‖P̂ Q̂‖_F ≤ 1e-8`).
    pub fn new(
        q_d: usize,
        p_hat: Projection,
        lrd: Option<(usize, Projection)>,
        method: DecompositionMethod,
    ) -> Result<Self> {
        if p_hat.rank() != q_d {
            return Err(Error::invalid(
                "p_hat",
                format!("dominant projection has rank {}, expected q_d = {q_d}", p_hat.rank()),
            ));
        }
        let (q_db, q_hat) = match lrd {
            Some((q_db, q_hat)) => {
                if q_hat.rank() != q_db {
                    return Err(Error::invalid(
                        "q_hat",
                        format!("LRD projection has rank {}, expected q_db = {q_db}", q_hat.rank()),
                    ));
                }
                if q_hat.dim() != p_hat.dim() {
                    return Err(Error::DimensionMismatch {
                        context: "subspace decomposition",
                        expected: p_hat.dim(),
                        actual: q_hat.dim(),
                    });
                }
                let cross = p_hat.matrix() * q_hat.matrix();
                if cross.norm() > 1e-8 {
                    return Err(Error::numerical(
                        "subspace decomposition",
                        format!(
                            "dominant and LRD projections are not orthogonal (‖P̂ Q̂‖ = {:.3e})",
                            cross.norm()
                        ),
                    ));
                }
                (Some(q_db), Some(q_hat))
            }
            None => (None, None),
        };
        Ok(SubspaceDecomposition { q_d, q_db, p_hat, q_hat, method })
    }

    /// Projection onto the short-range dependent remainder,
    /// `I − P̂ − Q̂` (with `Q̂ = 0` when no LRD part was estimated).
    pub fn srd(&self) -> Result<Projection> {
        let p = self.p_hat.dim();
        let lrd_rank = self.q_hat.as_ref().map_or(0, Projection::rank);
        let total = self.p_hat.rank() + lrd_rank;
        if total == 0 {
            return Ok(Projection::identity(p));
        }
        let mut combined = DMatrix::zeros(p, total);
        combined.columns_mut(0, self.p_hat.rank()).copy_from(self.p_hat.frame());
        if let Some(q_hat) = &self.q_hat {
            combined.columns_mut(self.p_hat.rank(), q_hat.rank()).copy_from(q_hat.frame());
        }
        Ok(Projection::from_span(&combined)?.complement())
    }
}

/// Largest-adjacent-ratio argmax over the first `k` eigenvalues, with the
/// smallest index winning ties. Errors when a denominator in the window is
/// numerically zero, since the ratio then carries no information.
fn ratio_argmax(values: &DVector<f64>, k: usize, context: &'static str) -> Result<usize> {
    let floor = 1e-14 * values[0].abs().max(f64::MIN_POSITIVE);
    let mut best_j = 0usize;
    let mut best_ratio = f64::NEG_INFINITY;
    for j in 0..k {
        let denom = values[j + 1];
        if denom <= floor {
            return Err(Error::numerical(
                context,
                format!("degenerate spectrum: eigenvalue {} in the ratio window is numerically zero", j + 2),
            ));
        }
        let ratio = values[j] / denom;
        if ratio > best_ratio {
            best_ratio = ratio;
            best_j = j;
        }
    }
    Ok(best_j + 1)
}

/// Eigenvalue-ratio estimate of the dominant dimension.
///
/// `q̂_d = argmax_{1≤j≤K} μ̂_j/μ̂_{j+1}` over the descending spectrum of the
/// sample covariance, ties broken to the smallest index, together with the
/// projection onto the leading `q̂_d` eigenvectors. The window needs
/// `K + 1` eigenvalues, all of `μ̂_2, …, μ̂_{K+1}` nonzero.
pub fn ratio_estimate_qd(eigs: &EigenSystem, k: usize) -> Result<(usize, Projection)> {
    let p = eigs.values().len();
    if k < 1 || k + 1 > p {
        return Err(Error::invalid(
            "K",
            format!("eigenvalue-ratio window needs 1 ≤ K ≤ p − 1, got K={k}, p={p}"),
        ));
    }
    let q_hat = ratio_argmax(eigs.values(), k, "ratio_estimate_qd")?;
    let p_hat = Projection::from_frame(eigs.leading(q_hat))?;
    Ok((q_hat, p_hat))
}

/// Variance-ratio statistics for `H₀: q_d = q`, without decisions.
pub fn vr_statistics(
    series: &FunctionalSeries,
    q: usize,
    k: usize,
    alpha: f64,
) -> Result<RankTestOutcome> {
    vr_statistics_with_vectors(series, q, k, alpha).map(|(outcome, _)| outcome)
}

/// Variance-ratio statistics plus the generalized eigenvectors.
///
/// Centers the series, forms `Z̃_t = Δ₊^{−α} Z̄_t`, projects both onto the
/// span `P̂_K` of the leading `K` covariance eigenvectors and solves the
/// pencil `ν̂ B_T ŵ = A_T ŵ` with `A_T = Σ_t P̂_K Z̄_t ⊗ P̂_K Z̄_t` and
/// `B_T = Σ_t P̂_K Z̃_t ⊗ P̂_K Z̃_t`. Returns the outcome together with the
/// full-space pencil eigenvectors (columns ordered by ascending `ν̂`), from
/// which the caller can assemble a dominant-subspace estimate.
pub fn vr_statistics_with_vectors(
    series: &FunctionalSeries,
    q: usize,
    k: usize,
    alpha: f64,
) -> Result<(RankTestOutcome, DMatrix<f64>)> {
    let t_len = series.len();
    let p = series.dim();
    if t_len < 10 {
        return Err(Error::invalid(
            "series",
            format!("variance-ratio test needs at least 10 observations, got {t_len}"),
        ));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "fractional order alpha must be positive"));
    }
    if q < 1 || q > k || k >= p {
        return Err(Error::invalid(
            "q",
            format!("rank test needs 1 ≤ q ≤ K < p, got q={q}, K={k}, p={p}"),
        ));
    }

    let centered = series.center();
    let smoothed = frac_filter(&centered, -alpha)?;
    let eigs = eigen(&sample_cov(&centered, false))?;
    let proj_k = Projection::from_frame(eigs.leading(k))?;
    // gen_eigen compresses the pencil onto the frame of proj_k, so the raw
    // Gram matrices already represent A_T and B_T restricted to ran P̂_K.
    let a = centered.coeffs().transpose() * centered.coeffs();
    let b = smoothed.coeffs().transpose() * smoothed.coeffs();
    let (nu, w) = gen_eigen(&a, &b, &proj_k)?;

    let scale = (t_len as f64).powf(2.0 * alpha);
    let nu_scaled: Vec<f64> = nu.iter().take(q).map(|&v| (v * scale).max(0.0)).collect();
    let stat_max = nu_scaled[q - 1];
    let stat_trace = nu_scaled.iter().sum();
    let outcome = RankTestOutcome {
        q_tested: q,
        alpha,
        d_used: None,
        nu_scaled,
        stat_max,
        stat_trace,
        crit_max: None,
        crit_trace: None,
        reject_max: None,
        reject_trace: None,
        k_used: k,
    };
    Ok((outcome, w))
}

/// Sequential variance-ratio rank test.
///
/// Tests `H₀: q_d = q` for `q = q_max, q_max−1, …, 1`, each step at level
/// `eta` with `K` from the rule and critical values looked up at the
/// plug-in `d_hat`. The walk stops at the first non-rejection; `q̄_d` is
/// that rank, or zero when everything rejects. The dominant-subspace
/// estimate `P̃` spans the first `q̄_d` pencil eigenvectors of the accepting
/// step, orthonormalized.
#[allow(clippy::too_many_arguments)]
pub fn sequential_rank_test(
    series: &FunctionalSeries,
    q_max: usize,
    k_rule: KRule,
    alpha: f64,
    eta: f64,
    d_hat: f64,
    table: &CriticalValueTable,
    statistic: Statistic,
) -> Result<SequentialOutcome> {
    if q_max < 1 {
        return Err(Error::invalid("q_max", "sequential test needs q_max ≥ 1"));
    }
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::invalid("eta", format!("significance level must lie in (0,1), got {eta}")));
    }
    let mut steps = Vec::with_capacity(q_max);
    let mut cv_clamped = false;
    for q in (1..=q_max).rev() {
        let k = k_rule.k_for(q);
        let (mut outcome, w) = vr_statistics_with_vectors(series, q, k, alpha)?;
        let cv = table.lookup(q, alpha, d_hat, eta)?;
        cv_clamped |= cv.clamped;
        outcome.d_used = Some(d_hat);
        outcome.crit_max = Some(cv.crit_max);
        outcome.crit_trace = Some(cv.crit_trace);
        outcome.reject_max = Some(outcome.stat_max > cv.crit_max);
        outcome.reject_trace = Some(outcome.stat_trace > cv.crit_trace);
        let reject = outcome.reject(statistic).expect("decision was just attached");
        steps.push(outcome);
        if !reject {
            let span = w.columns(0, q).into_owned();
            let p_tilde = Projection::from_span(&span)?;
            return Ok(SequentialOutcome { q_bar: q, p_tilde, steps, cv_clamped });
        }
    }
    let p_tilde = Projection::zero(series.dim());
    Ok(SequentialOutcome { q_bar: 0, p_tilde, steps, cv_clamped })
}

/// Result of the long-range/short-range split of the stationary part.
#[derive(Clone, Debug)]
pub struct LrdSrdSplit {
    /// Estimated dimension of the long-range dependent subspace.
    pub q_db: usize,
    /// Projection onto the leading `q̂_{d−b}` eigenvectors of the projected
    /// long-run covariance.
    pub q_hat: Projection,
    /// Projection onto the short-range dependent remainder,
    /// `I − P̄ − Q̂`.
    pub srd: Projection,
    /// Full spectrum of `M = (I − P̄) Λ̂ (I − P̄)`, descending.
    pub eigensystem: EigenSystem,
}

/// Split the stationary complement into long-range and short-range
/// dependent subspaces.
///
/// Forms the Bartlett long-run covariance `Λ̂` of the centered series with
/// bandwidth `h`, projects out the dominant subspace,
/// `M = (I − P̄) Λ̂ (I − P̄)`, and reads `q̂_{d−b}` off the eigenvalue-ratio
/// argmax of `M`'s spectrum over the first `K` ratios. Long-range
/// dependent directions accumulate autocovariance mass as the bandwidth
/// grows, so their eigenvalues dominate the scree. The bandwidth should
/// grow slower than `T^{1/2}`; `⌊1 + T^{0.3}⌋` and `⌊1 + T^{0.4}⌋` are the
/// usual presets.
pub fn lrd_srd_split(
    series: &FunctionalSeries,
    p_bar: &Projection,
    h: usize,
    k: usize,
) -> Result<LrdSrdSplit> {
    let p = series.dim();
    if p_bar.dim() != p {
        return Err(Error::DimensionMismatch {
            context: "lrd_srd_split",
            expected: p,
            actual: p_bar.dim(),
        });
    }
    let free = p - p_bar.rank();
    if k < 1 || k + 1 > free {
        return Err(Error::invalid(
            "K",
            format!(
                "ratio window needs 1 ≤ K ≤ p − rank(P̄) − 1, got K={k} with p={p}, rank(P̄)={}",
                p_bar.rank()
            ),
        ));
    }

    let centered = series.center();
    let lr = bartlett_lrcov(&centered, h)?;
    let complement = DMatrix::identity(p, p) - p_bar.matrix();
    let m = &complement * lr.matrix() * &complement;
    let eigensystem = eigen_sym_matrix(&m)?;
    let q_db = ratio_argmax(eigensystem.values(), k, "lrd_srd_split")?;
    let q_hat = Projection::from_frame(eigensystem.leading(q_db))?;

    let mut combined = DMatrix::zeros(p, p_bar.rank() + q_db);
    combined.columns_mut(0, p_bar.rank()).copy_from(p_bar.frame());
    combined.columns_mut(p_bar.rank(), q_db).copy_from(q_hat.frame());
    let srd = Projection::from_span(&combined)?.complement();

    Ok(LrdSrdSplit { q_db, q_hat, srd, eigensystem })
}

/// Suggested `q_max` for the sequential test: the eigenvalue-ratio
/// estimate plus a safety margin of two, so the walk starts above any
/// plausible rank.
pub fn suggest_q_max(series: &FunctionalSeries) -> Result<usize> {
    let eigs = eigen(&sample_cov(series, true))?;
    let k = (series.dim() - 1).min(5);
    let (q_hat, _) = ratio_estimate_qd(&eigs, k)?;
    Ok(q_hat + 2)
}

/// Human-readable eigenvalue scree with adjacent ratios and the
/// `μ̂_K − μ̂_{K+1}` gap check for the projection dimension `K`.
///
/// The ratio test is only informative when the `K`-th stationary
/// eigenvalue stays away from the next one; a small relative gap is
/// flagged so the caller can try a different `K`.
pub fn scree_report(eigs: &EigenSystem, k: usize) -> String {
    let values = eigs.values();
    let p = values.len();
    let shown = (k + 1).min(p);
    let mut out = String::from("  j    mu_j          mu_j/mu_{j+1}\n");
    for j in 0..shown {
        let ratio = if j + 1 < p && values[j + 1].abs() > 0.0 {
            format!("{:12.4}", values[j] / values[j + 1])
        } else {
            String::from("           -")
        };
        out.push_str(&format!("{:3}  {:12.6}  {ratio}\n", j + 1, values[j]));
    }
    if k + 1 <= p {
        let gap = values[k - 1] - values[k.min(p - 1)];
        let rel = gap / values[0].abs().max(f64::MIN_POSITIVE);
        out.push_str(&format!("gap mu_{k} - mu_{} = {gap:.6} ({rel:.2e} of mu_1)\n", k + 1));
        if rel < 1e-3 {
            out.push_str("warning: the K-th eigenvalue gap is small; the ratio window may be uninformative, consider another K\n");
        }
    }
    out
}
