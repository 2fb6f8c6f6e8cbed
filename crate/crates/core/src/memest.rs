//! Memory-order estimation for curve-valued time series.
//!
//! The memory order `d` of the dominant component and the order `d − b` of
//! the long-range dependent component are both estimated by projecting the
//! series onto scalar score sequences and running the local Whittle
//! estimator on each. A single unlucky projection can sit nearly orthogonal
//! to the direction carrying the strongest memory, which biases the scalar
//! estimate downward; repeating the projection `L` times with random
//! coefficients and reporting the maximum guards against this.
//!
//! For `d` the projections mix the first `J` shifted Legendre elements
//! (expressed in the series' own basis) with `N(1,1)` weights. The default
//! operates on first differences, whose
//! memory `d − 1` stays in the stationary Whittle range for any
//! `d ∈ (1/2, 3/2)`, and adds the differencing order back. The levels
//! variant runs directly on the initialized series over a nonstationary
//! admissible range; it is simpler but unreliable once `d ≥ 1`, and the
//! differenced form is therefore the default.
//!
//! For `d − b` the projections mix the covariance eigenvectors just below
//! the dominant block, `v̂_{q_d+1}, …, v̂_{q_d+J}`, with the leading
//! coefficient pinned to one so the combination never loses its component
//! in the first stationary eigendirection.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{Basis, BasisKind};
use crate::covariance::{eigen, sample_cov};
use crate::error::{Error, Result};
use crate::series::FunctionalSeries;
use crate::spectra::{local_whittle, lw_confidence, AdmissibleRange};

/// Default number of random projections.
pub const DEFAULT_L: usize = 20;

/// Default number of mixed directions when estimating `d`.
pub const DEFAULT_J_D: usize = 5;

/// Default number of mixed eigendirections when estimating `d − b`.
pub const DEFAULT_J_DB: usize = 2;

/// Which memory order an estimate refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MemoryTarget {
    /// Memory of the dominant (nonstationary) component.
    D,
    /// Memory of the long-range dependent component.
    DMinusB,
}

/// Whether the scalar estimates run on levels or first differences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DMethod {
    /// Local Whittle on the initialized series over a nonstationary range;
    /// inconsistent for `d ≥ 1`.
    Levels,
    /// Local Whittle on first differences over the stationary range, plus
    /// one. Valid across `d ∈ (1/2, 3/2)`; the default.
    Differenced,
}

/// One random projection and its scalar memory estimate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionEstimate {
    /// Projection index `ℓ`, starting at 1.
    pub ell: usize,
    /// Mixing coefficients: on the first `J` Legendre elements for `d`, on
    /// `v̂_{q_d+1}, …, v̂_{q_d+J}` (leading coefficient fixed at 1) for
    /// `d − b`.
    pub coefficients: Vec<f64>,
    /// Raw local Whittle estimate of the projected score series, before
    /// any differencing correction.
    pub d_hat: f64,
}

/// Confidence interval attached to a memory estimate.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MemoryCi {
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// True when the interval applies a single-projection law to a
    /// max-over-projections estimator.
    pub approximate: bool,
}

/// A functional memory-order estimate with its per-projection trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MemoryEstimate {
    pub target: MemoryTarget,
    /// Reported order: the maximum of the per-projection estimates, plus
    /// one for the differenced `d` estimator.
    pub value: f64,
    pub per_projection: Vec<ProjectionEstimate>,
    /// Local Whittle bandwidth used on every projection.
    pub m: usize,
    pub method: DMethod,
    /// Projections dropped because their score series was degenerate
    /// (indices `ℓ`, starting at 1).
    pub skipped: Vec<usize>,
    pub ci: Option<MemoryCi>,
}

/// Fit local Whittle to a batch of score series in parallel, keeping the
/// per-projection order. Degenerate projections are skipped.
fn fit_projections(
    scores: Vec<(usize, Vec<f64>, Vec<f64>)>,
    m: usize,
    range: AdmissibleRange,
) -> Result<(Vec<ProjectionEstimate>, Vec<usize>)> {
    let fitted: Vec<(usize, Vec<f64>, Result<f64>)> = scores
        .into_par_iter()
        .map(|(ell, coefficients, x)| {
            let fit = local_whittle(&x, m, range);
            (ell, coefficients, fit)
        })
        .collect();
    let mut per_projection = Vec::new();
    let mut skipped = Vec::new();
    for (ell, coefficients, fit) in fitted {
        match fit {
            Ok(d_hat) => per_projection.push(ProjectionEstimate { ell, coefficients, d_hat }),
            Err(Error::Numerical { .. }) => skipped.push(ell),
            Err(other) => return Err(other),
        }
    }
    if per_projection.is_empty() {
        return Err(Error::invalid(
            "projections",
            "no valid projection: every projected score series was degenerate",
        ));
    }
    Ok((per_projection, skipped))
}

fn max_d_hat(per_projection: &[ProjectionEstimate]) -> f64 {
    per_projection.iter().map(|p| p.d_hat).fold(f64::NEG_INFINITY, f64::max)
}

/// Coordinates of the first `j` orthonormal shifted Legendre elements in
/// `basis`, as the columns of a `p × j` matrix.
///
/// When `basis` is itself shifted Legendre the columns are exact unit
/// vectors; otherwise each entry is the inner product `⟨p_c, φ_i⟩` computed
/// by composite Simpson quadrature on a fine grid (both families are smooth
/// and band-limited, so the rule converges far past `f64` working accuracy).
fn legendre_in_basis(basis: &Basis, j: usize) -> DMatrix<f64> {
    let p = basis.size();
    if basis.kind() == BasisKind::ShiftedLegendre {
        let mut e = DMatrix::zeros(p, j);
        for c in 0..j {
            e[(c, c)] = 1.0;
        }
        return e;
    }
    let n = 4001;
    let h = 1.0 / (n - 1) as f64;
    let grid: Vec<f64> = (0..n).map(|g| g as f64 * h).collect();
    let phi = basis.eval_matrix(&grid);
    let legendre = Basis::new(BasisKind::ShiftedLegendre, j).expect("j >= 1");
    let pl = legendre.eval_matrix(&grid);
    let mut e = DMatrix::zeros(p, j);
    for c in 0..j {
        for i in 0..p {
            let mut acc = 0.0;
            for (g, w) in simpson_weights(n).enumerate() {
                acc += w * pl[(g, c)] * phi[(g, i)];
            }
            e[(i, c)] = acc * h / 3.0;
        }
    }
    e
}

fn simpson_weights(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |g| {
        if g == 0 || g == n - 1 {
            1.0
        } else if g % 2 == 1 {
            4.0
        } else {
            2.0
        }
    })
}

/// Estimate the dominant memory order `d`.
///
/// Draws `L` random directions `v^(ℓ) = Σ_{j≤J} a_{j,ℓ} p_{j−1}` with
/// `a_{j,ℓ} ~ N(1,1)` over the first `J` orthonormal shifted Legendre
/// elements (weights drawn from `rng` in `ℓ`-major order), projects the
/// differenced or initialized series onto each, runs local Whittle with
/// bandwidth `m` and reports the maximum, plus one under
/// [`DMethod::Differenced`]. The Legendre elements are expressed in the
/// series' own basis, so for Legendre-basis data the directions mix the
/// first `J` coordinates directly.
pub fn estimate_d(
    series: &FunctionalSeries,
    l: usize,
    j: usize,
    m: usize,
    rng: &mut impl Rng,
    method: DMethod,
) -> Result<MemoryEstimate> {
    let p = series.dim();
    if l < 1 {
        return Err(Error::invalid("L", "need at least one projection"));
    }
    if j < 1 || j > p {
        return Err(Error::invalid("J", format!("need 1 ≤ J ≤ p, got J={j} with p={p}")));
    }
    let normal = Normal::new(1.0, 1.0).expect("valid normal");
    let weights: Vec<Vec<f64>> =
        (0..l).map(|_| (0..j).map(|_| normal.sample(rng)).collect()).collect();

    let (working, range) = match method {
        DMethod::Differenced => (series.first_difference(), AdmissibleRange::stationary()),
        DMethod::Levels => (series.initialize(), AdmissibleRange::nonstationary()),
    };
    let elements = legendre_in_basis(series.basis(), j);
    let scores: Vec<(usize, Vec<f64>, Vec<f64>)> = weights
        .into_iter()
        .enumerate()
        .map(|(idx, a)| {
            let mut v = DVector::zeros(p);
            for (c, &w) in a.iter().enumerate() {
                v.axpy(w, &elements.column(c).into_owned(), 1.0);
            }
            (idx + 1, a, working.scores(&v))
        })
        .collect();

    let (per_projection, skipped) = fit_projections(scores, m, range)?;
    let offset = match method {
        DMethod::Differenced => 1.0,
        DMethod::Levels => 0.0,
    };
    Ok(MemoryEstimate {
        target: MemoryTarget::D,
        value: offset + max_d_hat(&per_projection),
        per_projection,
        m,
        method,
        skipped,
        ci: None,
    })
}

/// Estimate the memory order `d − b` of the long-range dependent part.
///
/// Mixes the covariance eigenvectors just below the dominant block,
/// `ṽ^(ℓ) = v̂_{q_d+1} + Σ_{j=2}^{J} a_{j,ℓ} v̂_{q_d+j}` with
/// `a_{j,ℓ} ~ N(0,1)` (leading coefficient fixed at one), projects the
/// centered series onto each and reports the maximum local Whittle
/// estimate over the stationary range. With `L = 1, J = 1` this reduces to
/// the plain estimator on `⟨Z̄_t, v̂_{q_d+1}⟩`.
pub fn estimate_d_minus_b(
    series: &FunctionalSeries,
    q_d: usize,
    l: usize,
    j: usize,
    m: usize,
    rng: &mut impl Rng,
) -> Result<MemoryEstimate> {
    let p = series.dim();
    if l < 1 {
        return Err(Error::invalid("L", "need at least one projection"));
    }
    if j < 1 || q_d + j > p {
        return Err(Error::invalid(
            "J",
            format!("need 1 ≤ J with q_d + J ≤ p, got q_d={q_d}, J={j}, p={p}"),
        ));
    }
    let normal = Normal::new(0.0, 1.0).expect("valid normal");
    let weights: Vec<Vec<f64>> = (0..l)
        .map(|_| {
            let mut a = vec![1.0];
            a.extend((1..j).map(|_| normal.sample(rng)));
            a
        })
        .collect();

    let centered = series.center();
    let eigs = eigen(&sample_cov(&centered, false))?;
    let scores: Vec<(usize, Vec<f64>, Vec<f64>)> = weights
        .into_iter()
        .enumerate()
        .map(|(idx, a)| {
            let mut v = DVector::zeros(p);
            for (c, &w) in a.iter().enumerate() {
                v.axpy(w, &eigs.vectors().column(q_d + c).into_owned(), 1.0);
            }
            (idx + 1, a, centered.scores(&v))
        })
        .collect();

    let (per_projection, skipped) =
        fit_projections(scores, m, AdmissibleRange::stationary())?;
    Ok(MemoryEstimate {
        target: MemoryTarget::DMinusB,
        value: max_d_hat(&per_projection),
        per_projection,
        m,
        method: DMethod::Levels,
        skipped,
        ci: None,
    })
}

/// Attach a confidence interval to a memory estimate.
///
/// Applies the single-projection local Whittle law, half-width
/// `z_{(1+level)/2} / (2√m)`, at the reported value. For a
/// max-over-projections estimate this is an approximation and is flagged
/// as such.
pub fn memory_ci(est: &MemoryEstimate, level: f64) -> Result<MemoryEstimate> {
    let (lo, hi) = lw_confidence(est.value, est.m, level)?;
    let mut out = est.clone();
    out.ci = Some(MemoryCi { lo, hi, level, approximate: est.per_projection.len() > 1 });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{Basis, BasisKind};
    use crate::fracdiff::frac_filter_vec;
    use crate::rng::substream;
    use crate::spectra::power_bandwidth;
    use approx::assert_abs_diff_eq;
    use nalgebra::DMatrix;
    use rand_distr::StandardNormal;

    fn series_from(coeffs: DMatrix<f64>, label: &str) -> FunctionalSeries {
        let basis = Basis::new(BasisKind::ShiftedLegendre, coeffs.ncols()).unwrap();
        FunctionalSeries::new(coeffs, basis, label).unwrap()
    }

    /// Fractional noise of order `d` in the first coordinate, white noise
    /// elsewhere.
    fn embedded_series(t_len: usize, p: usize, d: f64, seed: u64) -> FunctionalSeries {
        let mut rng = substream(seed, &[70, 1]);
        let mut coeffs = DMatrix::zeros(t_len, p);
        for j in 0..p {
            let eps: Vec<f64> =
                (0..t_len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let col = if j == 0 { frac_filter_vec(&eps, -d).unwrap() } else { eps };
            for t in 0..t_len {
                coeffs[(t, j)] = col[t];
            }
        }
        series_from(coeffs, "embedded")
    }

    #[test]
    fn legendre_elements_are_exact_unit_vectors_in_legendre_basis() {
        let basis = Basis::new(BasisKind::ShiftedLegendre, 6).unwrap();
        let e = legendre_in_basis(&basis, 3);
        for c in 0..3 {
            for i in 0..6 {
                let want = if i == c { 1.0 } else { 0.0 };
                assert_eq!(e[(i, c)], want);
            }
        }
    }

    #[test]
    fn legendre_elements_in_fourier_basis_match_analytic_coordinates() {
        // p_0 ≡ 1 coincides with φ_1, and p_1(x) = √3(2x−1) has the Fourier
        // coordinates ⟨p_1, √2 sin(2πkx)⟩ = −√6/(πk), zero on the constant
        // and every cosine.
        let basis = Basis::new(BasisKind::Fourier, 5).unwrap();
        let e = legendre_in_basis(&basis, 2);
        let pi = std::f64::consts::PI;
        assert_abs_diff_eq!(e[(0, 0)], 1.0, epsilon = 1e-10);
        for i in 1..5 {
            assert_abs_diff_eq!(e[(i, 0)], 0.0, epsilon = 1e-10);
        }
        assert_abs_diff_eq!(e[(0, 1)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e[(1, 1)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e[(2, 1)], -6.0f64.sqrt() / pi, epsilon = 1e-9);
        assert_abs_diff_eq!(e[(3, 1)], 0.0, epsilon = 1e-10);
        assert_abs_diff_eq!(e[(4, 1)], -6.0f64.sqrt() / (2.0 * pi), epsilon = 1e-9);
    }

    #[test]
    fn fourier_j1_projection_reduces_to_first_coordinate() {
        // The order-zero Legendre element equals the constant Fourier
        // function, so a J = 1 estimate on Fourier data must match the
        // plain first-coordinate estimate exactly.
        let mut rng = substream(53, &[70, 3]);
        let t_len = 400;
        let coeffs = DMatrix::from_fn(t_len, 5, |_, j| {
            let z: f64 = rng.sample(StandardNormal);
            if j == 0 {
                z * 3.0
            } else {
                z
            }
        });
        let fourier = Basis::new(BasisKind::Fourier, 5).unwrap();
        let series = FunctionalSeries::new(coeffs.clone(), fourier, "fourier").unwrap();
        let m = power_bandwidth(t_len, 0.65);

        let mut probe = substream(19, &[1]);
        let a = Normal::new(1.0, 1.0).unwrap().sample(&mut probe);
        let diff = series.first_difference();
        let manual: Vec<f64> =
            (0..diff.len()).map(|t| a * diff.coeffs()[(t, 0)]).collect();
        let expected =
            1.0 + local_whittle(&manual, m, AdmissibleRange::stationary()).unwrap();

        let mut rng = substream(19, &[1]);
        let est = estimate_d(&series, 1, 1, m, &mut rng, DMethod::Differenced).unwrap();
        assert_abs_diff_eq!(est.value, expected, epsilon = 1e-12);
    }

    #[test]
    fn single_projection_differenced_equals_manual_whittle() {
        let series = embedded_series(500, 3, 0.95, 3);
        let m = power_bandwidth(500, 0.65);

        // Replicate the single N(1,1) weight the estimator will draw.
        let mut probe = substream(11, &[1]);
        let a = Normal::new(1.0, 1.0).unwrap().sample(&mut probe);
        let diff = series.first_difference();
        let manual: Vec<f64> =
            (0..diff.len()).map(|t| a * diff.coeffs()[(t, 0)]).collect();
        let expected =
            1.0 + local_whittle(&manual, m, AdmissibleRange::stationary()).unwrap();

        let mut rng = substream(11, &[1]);
        let est = estimate_d(&series, 1, 1, m, &mut rng, DMethod::Differenced).unwrap();
        assert_eq!(est.value, expected);
        assert_eq!(est.per_projection.len(), 1);
        assert_eq!(est.per_projection[0].coefficients, vec![a]);
        assert_eq!(est.value, 1.0 + est.per_projection[0].d_hat);
    }

    #[test]
    fn embedded_fractional_noise_recovered() {
        let m = power_bandwidth(500, 0.65);
        let mut hits = 0;
        for seed in 0..20u64 {
            let series = embedded_series(500, 3, 0.95, 100 + seed);
            let mut rng = substream(7, &[seed]);
            let est = estimate_d(&series, 1, 1, m, &mut rng, DMethod::Differenced).unwrap();
            if (0.75..=1.15).contains(&est.value) {
                hits += 1;
            }
        }
        assert!(hits >= 18, "only {hits}/20 estimates landed in [0.75, 1.15]");
    }

    #[test]
    fn levels_and_differences_agree_below_one() {
        // For d < 1 both variants are consistent and should roughly agree.
        let series = embedded_series(1000, 3, 0.85, 5);
        let m = power_bandwidth(1000, 0.65);
        let mut rng = substream(5, &[1]);
        let diff = estimate_d(&series, 5, 1, m, &mut rng, DMethod::Differenced).unwrap();
        let mut rng = substream(5, &[1]);
        let lev = estimate_d(&series, 5, 1, m, &mut rng, DMethod::Levels).unwrap();
        assert!((diff.value - 0.85).abs() < 0.25, "differenced {}", diff.value);
        assert!((lev.value - 0.85).abs() < 0.25, "levels {}", lev.value);
    }

    #[test]
    fn reported_value_is_max_over_projections() {
        let series = embedded_series(400, 4, 0.9, 9);
        let m = power_bandwidth(400, 0.65);
        let mut rng = substream(9, &[2]);
        let est = estimate_d(&series, 10, 2, m, &mut rng, DMethod::Differenced).unwrap();
        let max = est
            .per_projection
            .iter()
            .map(|p| p.d_hat)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(est.value, 1.0 + max);
        assert_eq!(est.per_projection.len(), 10);
        assert!(est.skipped.is_empty());
    }

    #[test]
    fn estimate_is_monotone_in_l_for_nested_draws() {
        // With the same rng the first five weight vectors coincide, so the
        // ten-projection estimate can only move the max up.
        let series = embedded_series(400, 4, 0.9, 13);
        let m = power_bandwidth(400, 0.65);
        let mut rng = substream(13, &[3]);
        let small = estimate_d(&series, 5, 2, m, &mut rng, DMethod::Differenced).unwrap();
        let mut rng = substream(13, &[3]);
        let large = estimate_d(&series, 10, 2, m, &mut rng, DMethod::Differenced).unwrap();
        assert!(large.value >= small.value);
        for (a, b) in small.per_projection.iter().zip(&large.per_projection) {
            assert_eq!(a.coefficients, b.coefficients);
            assert_eq!(a.d_hat, b.d_hat);
        }
    }

    #[test]
    fn estimate_d_is_scale_invariant() {
        let series = embedded_series(600, 3, 0.9, 17);
        let scaled = series_from(series.coeffs() * 1000.0, "scaled");
        let m = power_bandwidth(600, 0.65);
        let mut rng = substream(17, &[4]);
        let base = estimate_d(&series, 5, 2, m, &mut rng, DMethod::Differenced).unwrap();
        let mut rng = substream(17, &[4]);
        let big = estimate_d(&scaled, 5, 2, m, &mut rng, DMethod::Differenced).unwrap();
        assert_abs_diff_eq!(base.value, big.value, epsilon = 1e-6);
    }

    #[test]
    fn degenerate_projections_error_out() {
        // The first two coordinates are identically zero, so every mixed
        // projection over J = 2 is a zero series.
        let mut rng = substream(23, &[5]);
        let t_len = 200;
        let coeffs = DMatrix::from_fn(t_len, 4, |_, j| {
            if j < 2 {
                0.0
            } else {
                rng.sample::<f64, _>(StandardNormal)
            }
        });
        let series = series_from(coeffs, "degenerate");
        let mut rng = substream(23, &[6]);
        let err = estimate_d(&series, 3, 2, 20, &mut rng, DMethod::Differenced).unwrap_err();
        assert!(err.to_string().contains("projection"), "got {err}");
    }

    #[test]
    fn estimate_d_validates_arguments() {
        let series = embedded_series(200, 3, 0.9, 29);
        let mut rng = substream(29, &[7]);
        assert!(estimate_d(&series, 0, 1, 20, &mut rng, DMethod::Differenced).is_err());
        assert!(estimate_d(&series, 1, 0, 20, &mut rng, DMethod::Differenced).is_err());
        assert!(estimate_d(&series, 1, 4, 20, &mut rng, DMethod::Differenced).is_err());
    }

    /// One nonstationary direction plus two long-range dependent ones.
    fn lrd_series(t_len: usize, seed: u64) -> FunctionalSeries {
        let mut rng = substream(seed, &[70, 2]);
        let mut coeffs = DMatrix::zeros(t_len, 5);
        for j in 0..5 {
            let eps: Vec<f64> =
                (0..t_len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let col = match j {
                0 => frac_filter_vec(&eps, -0.95).unwrap(),
                1 | 2 => frac_filter_vec(&eps, -0.3).unwrap(),
                _ => eps,
            };
            for t in 0..t_len {
                coeffs[(t, j)] = col[t];
            }
        }
        series_from(coeffs, "lrd")
    }

    #[test]
    fn baseline_reduction_matches_manual_eigen_projection() {
        let series = lrd_series(800, 31);
        let m = power_bandwidth(800, 0.65);

        let centered = series.center();
        let eigs = eigen(&sample_cov(&centered, false)).unwrap();
        let v = eigs.vectors().column(1).into_owned();
        let manual = centered.scores(&v);
        let expected = local_whittle(&manual, m, AdmissibleRange::stationary()).unwrap();

        let mut rng = substream(31, &[8]);
        let est = estimate_d_minus_b(&series, 1, 1, 1, m, &mut rng).unwrap();
        assert_eq!(est.value, expected);
        assert_eq!(est.per_projection[0].coefficients, vec![1.0]);
        assert_eq!(est.target, MemoryTarget::DMinusB);
    }

    #[test]
    fn lrd_memory_recovered() {
        let m = power_bandwidth(1000, 0.65);
        let mut hits = 0;
        for seed in 0..10u64 {
            let series = lrd_series(1000, 200 + seed);
            let mut rng = substream(37, &[seed]);
            let est = estimate_d_minus_b(&series, 1, DEFAULT_L, DEFAULT_J_DB, m, &mut rng)
                .unwrap();
            if (est.value - 0.3).abs() < 0.2 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "only {hits}/10 estimates landed near 0.3");
    }

    #[test]
    fn estimate_d_minus_b_validates_arguments() {
        let series = lrd_series(300, 41);
        let mut rng = substream(41, &[9]);
        assert!(estimate_d_minus_b(&series, 4, 1, 2, 20, &mut rng).is_err());
        assert!(estimate_d_minus_b(&series, 1, 0, 2, 20, &mut rng).is_err());
        assert!(estimate_d_minus_b(&series, 1, 1, 0, 20, &mut rng).is_err());
    }

    #[test]
    fn confidence_interval_has_closed_form_width() {
        let series = embedded_series(500, 3, 0.9, 43);
        let m = power_bandwidth(500, 0.65);
        let mut rng = substream(43, &[10]);
        let est = estimate_d(&series, 5, 2, m, &mut rng, DMethod::Differenced).unwrap();
        let with_ci = memory_ci(&est, 0.95).unwrap();
        let ci = with_ci.ci.unwrap();
        let half = 1.959_963_984_540_054 / (2.0 * (m as f64).sqrt());
        assert_abs_diff_eq!(ci.hi - ci.lo, 2.0 * half, epsilon = 1e-9);
        assert!(ci.lo <= with_ci.value && with_ci.value <= ci.hi);
        assert_eq!(ci.level, 0.95);
        assert!(ci.approximate);

        let mut rng = substream(43, &[11]);
        let single = estimate_d(&series, 1, 1, m, &mut rng, DMethod::Differenced).unwrap();
        let single_ci = memory_ci(&single, 0.95).unwrap();
        assert!(!single_ci.ci.unwrap().approximate);
    }

    #[test]
    fn estimate_serializes_round_trip() {
        let series = embedded_series(300, 3, 0.9, 47);
        let mut rng = substream(47, &[12]);
        let est = estimate_d(&series, 3, 2, 30, &mut rng, DMethod::Differenced).unwrap();
        let json = serde_json::to_string(&est).unwrap();
        let back: MemoryEstimate = serde_json::from_str(&json).unwrap();
        assert_eq!(back.value, est.value);
        assert_eq!(back.per_projection.len(), est.per_projection.len());
        assert_eq!(back.method, DMethod::Differenced);
        assert_eq!(back.target, MemoryTarget::D);
    }
}
