//! Periodogram and local Whittle memory estimation.
//!
//! The scalar engine behind all memory estimation: every functional estimator
//! in this crate reduces curves to scalar score series and feeds them through
//! the semiparametric local Whittle estimator, which minimizes the
//! narrow-band objective
//!
//! `R(d) = log( m⁻¹ Σ_{j≤m} λ_j^{2d} I(λ_j) ) − 2d·m⁻¹ Σ_{j≤m} log λ_j`
//!
//! over the first `m` Fourier frequencies `λ_j = 2πj/T` (Robinson-style
//! narrow-band estimation). The asymptotic law `√m(d̂ − d) → N(0, 1/4)`
//! yields the confidence intervals in [`lw_confidence`].
//!
//! On levels of nonstationary series the estimator is only reliable for
//! memory below one (it converges to 1 for true orders in `[1, 3/2)`);
//! callers targeting that range difference first and add one back, which is
//! what the functional estimators in [`crate::memest`] default to.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Periodogram ordinates `I(λ_j) = (2πT)⁻¹|Σ_t x_t e^{itλ_j}|²` at the
/// Fourier frequencies `λ_j = 2πj/T`, `j = 1..⌊T/2⌋`.
#[derive(Clone, Debug)]
pub struct Periodogram {
    t_len: usize,
    ordinates: Vec<f64>,
}

impl Periodogram {
    /// Number of ordinates, `⌊T/2⌋`.
    pub fn len(&self) -> usize {
        self.ordinates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ordinates.is_empty()
    }

    /// Sample size `T` of the underlying series.
    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn ordinates(&self) -> &[f64] {
        &self.ordinates
    }

    /// Fourier frequency `λ_j = 2πj/T` (1-based `j`).
    pub fn frequency(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.t_len as f64
    }
}

/// Compute the periodogram by FFT. Requires `T ≥ 4` and finite input.
pub fn periodogram(x: &[f64]) -> Result<Periodogram> {
    let t_len = x.len();
    if t_len < 4 {
        return Err(Error::invalid("x", "periodogram needs at least 4 observations"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("x", "periodogram input must be finite"));
    }
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(t_len).process(&mut buf);
    let scale = 1.0 / (2.0 * std::f64::consts::PI * t_len as f64);
    let ordinates = (1..=t_len / 2).map(|j| buf[j].norm_sqr() * scale).collect();
    Ok(Periodogram { t_len, ordinates })
}

/// Admissible interval `[lo, hi]` over which the Whittle objective is
/// minimized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmissibleRange {
    lo: f64,
    hi: f64,
}

impl AdmissibleRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::invalid("range", format!("need finite lo < hi, got [{lo}, {hi}]")));
        }
        Ok(AdmissibleRange { lo, hi })
    }

    /// Default range for stationary targets: `[−0.49, 0.49]`.
    pub fn stationary() -> Self {
        AdmissibleRange { lo: -0.49, hi: 0.49 }
    }

    /// Default range for nonstationary targets: `[0.05, 1.45]`.
    pub fn nonstationary() -> Self {
        AdmissibleRange { lo: 0.05, hi: 1.45 }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Evaluate the Whittle objective `R(d)` from a precomputed periodogram.
pub fn whittle_objective(pg: &Periodogram, m: usize, d: f64) -> Result<f64> {
    check_bandwidth(pg, m)?;
    let mean_loglam: f64 =
        (1..=m).map(|j| pg.frequency(j).ln()).sum::<f64>() / m as f64;
    let s: f64 = (1..=m)
        .map(|j| (2.0 * d * pg.frequency(j).ln()).exp() * pg.ordinates[j - 1])
        .sum();
    Ok((s / m as f64).ln() - 2.0 * d * mean_loglam)
}

fn check_bandwidth(pg: &Periodogram, m: usize) -> Result<()> {
    if m < 2 || m > pg.len() {
        return Err(Error::invalid(
            "m",
            format!("bandwidth must satisfy 2 ≤ m ≤ ⌊T/2⌋ = {}, got {m}", pg.len()),
        ));
    }
    Ok(())
}

/// Local Whittle estimate of the memory parameter of `x`.
///
/// Minimizes `R(d)` over `range` by a 512-point grid scan followed by
/// golden-section refinement to `1e-7`; the returned point's objective value
/// never exceeds that of any grid point.
pub fn local_whittle(x: &[f64], m: usize, range: AdmissibleRange) -> Result<f64> {
    local_whittle_pgram(&periodogram(x)?, m, range)
}

/// [`local_whittle`] on a precomputed periodogram (avoids repeated FFTs when
/// several bandwidths or ranges are tried on the same series).
pub fn local_whittle_pgram(pg: &Periodogram, m: usize, range: AdmissibleRange) -> Result<f64> {
    check_bandwidth(pg, m)?;
    let ords = &pg.ordinates[..m];
    if ords.iter().all(|&v| v <= 0.0) {
        return Err(Error::numerical(
            "local_whittle",
            "periodogram vanishes on the estimation band (constant series?)",
        ));
    }
    let loglam: Vec<f64> = (1..=m).map(|j| pg.frequency(j).ln()).collect();
    let mean_loglam: f64 = loglam.iter().sum::<f64>() / m as f64;
    let objective = |d: f64| -> f64 {
        let s: f64 = ords
            .iter()
            .zip(&loglam)
            .map(|(&i, &ll)| (2.0 * d * ll).exp() * i)
            .sum();
        (s / m as f64).ln() - 2.0 * d * mean_loglam
    };

    const GRID: usize = 512;
    let step = (range.hi - range.lo) / (GRID - 1) as f64;
    let (mut best_d, mut best_r) = (range.lo, objective(range.lo));
    let mut best_i = 0;
    for i in 1..GRID {
        let d = range.lo + i as f64 * step;
        let r = objective(d);
        if r < best_r {
            best_r = r;
            best_d = d;
            best_i = i;
        }
    }

    // Refine inside the bracket formed by the grid neighbors of the winner.
    let mut a = range.lo + best_i.saturating_sub(1) as f64 * step;
    let mut b = (range.lo + (best_i + 1) as f64 * step).min(range.hi);
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d_pt = a + INVPHI * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d_pt);
    while b - a > 1e-7 {
        if fc <= fd {
            b = d_pt;
            d_pt = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d_pt;
            fc = fd;
            d_pt = a + INVPHI * (b - a);
            fd = objective(d_pt);
        }
    }
    let mid = 0.5 * (a + b);
    let r_mid = objective(mid);
    Ok(if r_mid <= best_r { mid } else { best_d })
}

/// Two-sided confidence interval `d̂ ± z_{(1+level)/2}/(2√m)` from the
/// `N(0, 1/4)` limit law of the local Whittle estimator.
pub fn lw_confidence(d_hat: f64, m: usize, level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level", format!("confidence level must lie in (0,1), got {level}")));
    }
    if m == 0 {
        return Err(Error::invalid("m", "bandwidth must be positive"));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 * (1.0 + level));
    let half = z / (2.0 * (m as f64).sqrt());
    Ok((d_hat - half, d_hat + half))
}

/// Power-rule bandwidth `⌊1 + T^exponent⌋`, the paper-style default for both
/// Whittle bandwidths (`T^0.65`) and Bartlett lags (`T^0.3`, `T^0.4`).
pub fn power_bandwidth(t_len: usize, exponent: f64) -> usize {
    (1.0 + (t_len as f64).powf(exponent)).floor() as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fracdiff::frac_filter_vec;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, StandardNormal};

    /// Naive O(T²) DFT periodogram, the oracle for the FFT path.
    fn naive_periodogram(x: &[f64]) -> Vec<f64> {
        let t_len = x.len();
        (1..=t_len / 2)
            .map(|j| {
                let lam = 2.0 * std::f64::consts::PI * j as f64 / t_len as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ang = lam * (t + 1) as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                (re * re + im * im) / (2.0 * std::f64::consts::PI * t_len as f64)
            })
            .collect()
    }

    #[test]
    fn fft_matches_naive_dft() {
        let mut rng = crate::rng::substream(21, &[0]);
        let x: Vec<f64> = (0..128).map(|_| StandardNormal.sample(&mut rng)).collect();
        let pg = periodogram(&x).unwrap();
        let oracle = naive_periodogram(&x);
        for (a, b) in pg.ordinates().iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn constant_series_has_no_power() {
        let x = vec![5.0; 32];
        let pg = periodogram(&x).unwrap();
        for &o in pg.ordinates() {
            assert!(o < 1e-12);
        }
    }

    #[test]
    fn pure_cosine_concentrates_at_first_frequency() {
        let t_len = 64;
        let x: Vec<f64> = (1..=t_len)
            .map(|t| 2.0 * (2.0 * std::f64::consts::PI * t as f64 / t_len as f64).cos())
            .collect();
        let pg = periodogram(&x).unwrap();
        let expected = t_len as f64 / (2.0 * std::f64::consts::PI);
        assert_abs_diff_eq!(pg.ordinates()[0], expected, epsilon = 1e-9);
        for &o in &pg.ordinates()[1..] {
            assert!(o <= 1e-9);
        }
    }

    #[test]
    fn unit_impulse_has_flat_spectrum() {
        let mut x = vec![0.0; 8];
        x[0] = 1.0;
        let pg = periodogram(&x).unwrap();
        let expected = 1.0 / (2.0 * std::f64::consts::PI * 8.0);
        for &o in pg.ordinates() {
            assert_abs_diff_eq!(o, expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_invariance_of_ordinates() {
        let mut rng = crate::rng::substream(22, &[0]);
        let x: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut rng)).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 7.5).collect();
        let a = periodogram(&x).unwrap();
        let b = periodogram(&shifted).unwrap();
        for (u, v) in a.ordinates().iter().zip(b.ordinates()) {
            assert!((u - v).abs() < 1e-9 * (1.0 + u.abs()));
        }
    }

    fn white_noise(t_len: usize, seed: u64) -> Vec<f64> {
        let mut rng = crate::rng::substream(23, &[seed]);
        (0..t_len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn white_noise_memory_near_zero() {
        let t_len = 2048;
        let m = power_bandwidth(t_len, 0.65);
        let mut hits = 0;
        for seed in 0..200 {
            let d = local_whittle(&white_noise(t_len, seed), m, AdmissibleRange::stationary()).unwrap();
            if (-0.1..=0.1).contains(&d) {
                hits += 1;
            }
        }
        assert!(hits >= 190, "only {hits}/200 white-noise estimates in [-0.1, 0.1]");
    }

    #[test]
    fn arfima_memory_recovered() {
        let t_len = 2048;
        let m = power_bandwidth(t_len, 0.65);
        let mut hits = 0;
        for seed in 200..400 {
            let x = frac_filter_vec(&white_noise(t_len, seed), -0.3).unwrap();
            let d = local_whittle(&x, m, AdmissibleRange::stationary()).unwrap();
            if (0.2..=0.4).contains(&d) {
                hits += 1;
            }
        }
        assert!(hits >= 190, "only {hits}/200 ARFIMA(0,0.3,0) estimates in [0.2, 0.4]");
    }

    #[test]
    fn degenerate_range_clamps() {
        let x = white_noise(256, 999);
        let range = AdmissibleRange::new(0.2, 0.2001).unwrap();
        let d = local_whittle(&x, 30, range).unwrap();
        assert!((0.2..=0.2001).contains(&d));
    }

    #[test]
    fn scale_and_shift_invariance_of_argmin() {
        let x = white_noise(512, 77);
        let m = power_bandwidth(512, 0.65);
        let range = AdmissibleRange::stationary();
        let base = local_whittle(&x, m, range).unwrap();
        let grid_step = (range.hi() - range.lo()) / 511.0;

        let scaled: Vec<f64> = x.iter().map(|v| v * -3.7).collect();
        let shifted: Vec<f64> = x.iter().map(|v| v + 100.0).collect();
        let d_scaled = local_whittle(&scaled, m, range).unwrap();
        let d_shifted = local_whittle(&shifted, m, range).unwrap();
        assert!((d_scaled - base).abs() <= grid_step + 1e-6);
        assert!((d_shifted - base).abs() <= grid_step + 1e-6);
    }

    #[test]
    fn returned_point_beats_grid() {
        let x = frac_filter_vec(&white_noise(1024, 5), -0.25).unwrap();
        let pg = periodogram(&x).unwrap();
        let m = power_bandwidth(1024, 0.65);
        let range = AdmissibleRange::stationary();
        let d_hat = local_whittle_pgram(&pg, m, range).unwrap();
        let r_hat = whittle_objective(&pg, m, d_hat).unwrap();
        for i in 0..512 {
            let d = range.lo() + i as f64 * (range.hi() - range.lo()) / 511.0;
            let r = whittle_objective(&pg, m, d).unwrap();
            assert!(r_hat <= r + 1e-12, "grid point {d} beats the returned argmin");
        }
    }

    #[test]
    fn confidence_interval_closed_form() {
        let (lo, hi) = lw_confidence(0.3, 100, 0.95).unwrap();
        assert_abs_diff_eq!(lo, 0.3 - 1.959_964 / 20.0, epsilon = 1e-6);
        assert_abs_diff_eq!(hi, 0.3 + 1.959_964 / 20.0, epsilon = 1e-6);

        // Width halves when m quadruples.
        let (lo4, hi4) = lw_confidence(0.3, 400, 0.95).unwrap();
        assert_abs_diff_eq!((hi4 - lo4) * 2.0, hi - lo, epsilon = 1e-12);

        // Near-zero level gives a near-zero width.
        let (lo0, hi0) = lw_confidence(0.0, 4, 1e-12).unwrap();
        assert!(hi0 - lo0 < 1e-10);
        assert!(lw_confidence(0.0, 4, 1.0).is_err());
    }

    #[test]
    fn bandwidth_rule_examples() {
        // ⌊1 + 200^0.65⌋ = 32, ⌊1 + 1000^0.65⌋ = 90: the paper-style presets.
        assert_eq!(power_bandwidth(200, 0.65), 32);
        assert_eq!(power_bandwidth(1000, 0.65), 90);
        assert_eq!(power_bandwidth(1000, 0.3), 8);
        assert_eq!(power_bandwidth(1000, 0.4), 16);
    }
}
