//! Synthetic curve-valued series with a known three-part memory structure.
//!
//! The generator builds a `p`-dimensional coefficient series over a Fourier
//! basis whose coordinate directions split into three blocks with known
//! ground truth:
//!
//! * `q_d` nonstationary directions: truncated fractional integration of
//!   order `d` applied to independent ARMA(1,1) score series;
//! * `q_db` long-range dependent directions: stationary fractional
//!   integration of order `d − b` of ARMA(1,1) scores with innovation
//!   standard deviation `lrd_scale`, approximated by filtering over a long
//!   pre-sample so the kept window carries the process history;
//! * the remaining directions: a banded vector ARMA(1,1) with innovation
//!   variances decaying geometrically across coordinates.
//!
//! ARMA and band coefficients are drawn uniformly from
//! `[−arma_range, arma_range]` and redrawn on every call, so replications
//! differ in dynamics and not just in innovations. The basis directions are
//! assigned by permuting the first `q_d + q_db` coordinates among
//! themselves and the remaining ones among themselves; the union of the
//! dominant and long-range dependent subspaces is therefore fixed while
//! their realizations vary. All ARMA recursions discard a burn-in prefix.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind};
use crate::covariance::Projection;
use crate::error::{Error, Result};
use crate::fracdiff::FracFilter;
use crate::series::FunctionalSeries;

/// Observations discarded from the start of every ARMA recursion.
pub const BURN_IN: usize = 200;

/// Pre-sample length of the stationary fractional filter for the
/// long-range dependent block. The truncated filter applied over the
/// pre-sample plus the kept window approximates the stationary (infinite
/// past) process; at `d − b = 0.3` the omitted tail carries under 1.5% of
/// the stationary variance.
pub const LRD_PRE_SAMPLE: usize = 1200;

/// Series length below which fractional filters use direct convolution
/// rather than FFT.
const FFT_CUTOVER: usize = 256;

/// Parameters of the synthetic generator.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DGPParams {
    /// Memory order of the nonstationary block.
    pub d: f64,
    /// Memory order of the long-range dependent block.
    pub d_minus_b: f64,
    /// Dimension of the nonstationary block.
    pub q_d: usize,
    /// Dimension of the long-range dependent block.
    pub q_db: usize,
    /// Total coordinate dimension.
    pub p: usize,
    /// Half-width of the uniform law for ARMA and band coefficients.
    pub arma_range: f64,
    /// Band width of the short-range block's coefficient operators
    /// (`|j−k| ≤ band` entries are nonzero).
    pub band: usize,
    /// Geometric decay of the short-range innovation variances.
    pub innov_decay: f64,
    /// Number of short-range coordinates receiving innovations.
    pub innov_rank: usize,
    /// Innovation standard deviation of the long-range dependent block's
    /// ARMA scores.
    pub lrd_scale: f64,
}

impl Default for DGPParams {
    fn default() -> Self {
        DGPParams {
            d: 0.95,
            d_minus_b: 0.3,
            q_d: 3,
            q_db: 2,
            p: 25,
            arma_range: 0.15,
            band: 2,
            innov_decay: 0.97,
            innov_rank: 20,
            lrd_scale: 1.0,
        }
    }
}

impl DGPParams {
    /// Dimension of the short-range dependent block.
    pub fn srd_dim(&self) -> usize {
        self.p - self.q_d - self.q_db
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_d + self.q_db > self.p {
            return Err(Error::invalid(
                "q_d/q_db",
                format!("blocks exceed dimension: q_d={} + q_db={} > p={}", self.q_d, self.q_db, self.p),
            ));
        }
        if self.q_d > 0 && !(0.5 < self.d && self.d < 1.5) {
            return Err(Error::invalid("d", format!("memory order must lie in (1/2, 3/2), got {}", self.d)));
        }
        if self.q_db > 0 && !(0.0 <= self.d_minus_b && self.d_minus_b < 0.5) {
            return Err(Error::invalid(
                "d_minus_b",
                format!("long-range order must lie in [0, 1/2), got {}", self.d_minus_b),
            ));
        }
        if !(self.arma_range >= 0.0) {
            return Err(Error::invalid("arma_range", "coefficient range must be nonnegative"));
        }
        if self.arma_range >= 1.0 {
            return Err(Error::invalid(
                "arma_range",
                format!("coefficient range {} admits unstable AR draws", self.arma_range),
            ));
        }
        if !(0.0 < self.innov_decay && self.innov_decay <= 1.0) {
            return Err(Error::invalid("innov_decay", "decay must lie in (0, 1]"));
        }
        if !(self.lrd_scale > 0.0 && self.lrd_scale.is_finite()) {
            return Err(Error::invalid("lrd_scale", "innovation scale must be positive and finite"));
        }
        let srd = self.srd_dim();
        if srd > 0 && (self.innov_rank < 1 || self.innov_rank > srd) {
            return Err(Error::invalid(
                "innov_rank",
                format!("need 1 ≤ innov_rank ≤ p − q_d − q_db = {srd}, got {}", self.innov_rank),
            ));
        }
        // Row sums of the banded operators bound the spectral radius; with
        // 2·band+1 entries of magnitude ≤ arma_range the recursion must
        // stay stable.
        if self.arma_range * (2 * self.band + 1) as f64 >= 1.0 {
            return Err(Error::invalid(
                "band",
                "banded operator can reach unit row sums; shrink arma_range or band",
            ));
        }
        Ok(())
    }
}

/// Ground truth attached to a generated series.
#[derive(Clone, Debug)]
pub struct GroundTruth {
    /// Projection onto the nonstationary subspace (rank `q_d`).
    pub p_proj: Projection,
    /// Projection onto the long-range dependent subspace (rank `q_db`).
    pub q_proj: Projection,
    /// Coordinate assignment: block direction `j` (zero-based, blocks in
    /// order nonstationary, long-range, short-range) lives on coordinate
    /// `permutation[j]`.
    pub permutation: Vec<usize>,
}

/// Scalar ARMA(1,1) path `x_t = φ x_{t−1} + ε_t + θ ε_{t−1}` with standard
/// normal innovations, after burn-in.
fn arma_path(phi: f64, theta: f64, t_len: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if phi.abs() >= 1.0 {
        return Err(Error::numerical("gen_dgp", format!("unstable AR coefficient {phi}")));
    }
    let mut x = 0.0;
    let mut prev_eps = 0.0;
    let mut out = Vec::with_capacity(t_len);
    for step in 0..BURN_IN + t_len {
        let eps: f64 = rng.sample(StandardNormal);
        x = phi * x + eps + theta * prev_eps;
        prev_eps = eps;
        if step >= BURN_IN {
            out.push(x);
        }
    }
    Ok(out)
}

/// Generate a series of length `t_len` from `params`.
///
/// Draw order from `rng` is fixed: the two basis permutations, then per
/// nonstationary direction its ARMA pair and innovations, the same for the
/// long-range block, then the short-range band entries of `A` and `B`
/// (row-major) followed by the innovation vectors. Identical generator
/// state therefore reproduces the series byte for byte.
pub fn gen_dgp(
    params: &DGPParams,
    t_len: usize,
    rng: &mut impl Rng,
) -> Result<(FunctionalSeries, GroundTruth)> {
    params.validate()?;
    if t_len < 10 {
        return Err(Error::invalid("T", format!("need at least 10 observations, got {t_len}")));
    }
    let p = params.p;
    let front = params.q_d + params.q_db;
    let srd = params.srd_dim();

    // Basis assignment: the first `front` coordinates are permuted among
    // themselves, the remaining ones among themselves.
    let mut permutation: Vec<usize> = (0..front).collect();
    permutation.shuffle(rng);
    let mut rest: Vec<usize> = (front..p).collect();
    rest.shuffle(rng);
    permutation.extend(rest);

    let mut coeffs = DMatrix::zeros(t_len, p);
    let range = params.arma_range;

    // Nonstationary block: ARMA scores, fractionally integrated to order d.
    if params.q_d > 0 {
        let mut scores = DMatrix::zeros(t_len, params.q_d);
        for j in 0..params.q_d {
            let phi = rng.random_range(-range..=range);
            let theta = rng.random_range(-range..=range);
            let path = arma_path(phi, theta, t_len, rng)?;
            for t in 0..t_len {
                scores[(t, j)] = path[t];
            }
        }
        let filter = FracFilter::with_fft(-params.d, t_len, t_len >= FFT_CUTOVER)?;
        filter.apply_matrix(&mut scores);
        for j in 0..params.q_d {
            let target = permutation[j];
            for t in 0..t_len {
                coeffs[(t, target)] = scores[(t, j)];
            }
        }
    }

    // Long-range dependent block: stationary fractional integration of
    // order d − b, approximated by filtering over a pre-sample and keeping
    // the final window.
    if params.q_db > 0 {
        let ext = LRD_PRE_SAMPLE + t_len;
        let mut scores = DMatrix::zeros(ext, params.q_db);
        for j in 0..params.q_db {
            let phi = rng.random_range(-range..=range);
            let theta = rng.random_range(-range..=range);
            let path = arma_path(phi, theta, ext, rng)?;
            for t in 0..ext {
                scores[(t, j)] = path[t];
            }
        }
        let filter = FracFilter::with_fft(-params.d_minus_b, ext, ext >= FFT_CUTOVER)?;
        filter.apply_matrix(&mut scores);
        for j in 0..params.q_db {
            let target = permutation[params.q_d + j];
            for t in 0..t_len {
                coeffs[(t, target)] = params.lrd_scale * scores[(LRD_PRE_SAMPLE + t, j)];
            }
        }
    }

    // Short-range block: banded vector ARMA(1,1) with geometrically
    // decaying innovation loadings on the first `innov_rank` coordinates.
    if srd > 0 {
        let mut a_op = DMatrix::zeros(srd, srd);
        for j in 0..srd {
            for k in 0..srd {
                if j.abs_diff(k) <= params.band {
                    a_op[(j, k)] = rng.random_range(-range..=range);
                }
            }
        }
        let mut b_op = DMatrix::zeros(srd, srd);
        for j in 0..srd {
            for k in 0..srd {
                if j.abs_diff(k) <= params.band {
                    b_op[(j, k)] = rng.random_range(-range..=range);
                }
            }
        }
        let sds: Vec<f64> =
            (0..params.innov_rank).map(|j| params.innov_decay.powi(j as i32).sqrt()).collect();
        let mut x = DVector::zeros(srd);
        let mut prev_eps = DVector::zeros(srd);
        for step in 0..BURN_IN + t_len {
            let mut eps = DVector::zeros(srd);
            for j in 0..params.innov_rank {
                eps[j] = sds[j] * rng.sample::<f64, _>(StandardNormal);
            }
            x = &a_op * x + &eps + &b_op * prev_eps;
            prev_eps = eps;
            if step >= BURN_IN {
                let t = step - BURN_IN;
                for j in 0..srd {
                    coeffs[(t, permutation[front + j])] = x[j];
                }
            }
        }
    }

    let basis = Basis::new(BasisKind::Fourier, p)?;
    let series = FunctionalSeries::new(coeffs, basis, "dgp")?;

    let unit_frame = |cols: &[usize]| {
        let mut frame = DMatrix::zeros(p, cols.len());
        for (c, &coord) in cols.iter().enumerate() {
            frame[(coord, c)] = 1.0;
        }
        frame
    };
    let p_proj = Projection::from_frame(unit_frame(&permutation[..params.q_d]))?;
    let q_proj = Projection::from_frame(unit_frame(&permutation[params.q_d..front]))?;

    Ok((series, GroundTruth { p_proj, q_proj, permutation }))
}
