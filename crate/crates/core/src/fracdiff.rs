//! Truncated fractional differencing `Δ^d_+` and its inverse.
//!
//! The fractional difference operator `(1−L)^d` expands into the power series
//! `Σ_j c_j(d) L^j` with `c_j = Γ(j−d)/(Γ(−d)Γ(j+1))`. The truncated variant
//! applies only the in-sample past: `(Δ^d_+ X)_t = Σ_{j=0}^{t−1} c_j X_{t−j}`.
//! Integration is differencing with the negated order, `Δ^{−d}_+`, and the
//! truncated filters are exact convolution inverses of each other.
//!
//! Coefficients are computed by the multiplicative recurrence
//! `c_0 = 1, c_j = c_{j−1}·(j−1−d)/j`, never by direct Gamma evaluation
//! (which overflows beyond `j ≈ 170`). Filtering runs as direct `O(T²)`
//! convolution for short series and switches to FFT convolution for long
//! ones; both paths agree to `1e-9` and are individually deterministic.

use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::series::FunctionalSeries;

/// Series length above which [`frac_filter`] uses FFT convolution.
pub const FFT_THRESHOLD: usize = 2048;

/// Coefficients `c_0..c_{n−1}` of `(1−L)^d`.
#[derive(Clone, Debug)]
pub struct FracCoefficients {
    d: f64,
    coeffs: Vec<f64>,
}

impl FracCoefficients {
    pub fn order(&self) -> f64 {
        self.d
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
}

/// Compute the first `n` filter coefficients of `(1−L)^d`.
pub fn frac_coeffs(d: f64, n: usize) -> Result<FracCoefficients> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one coefficient"));
    }
    if !d.is_finite() {
        return Err(Error::invalid("d", "order must be finite"));
    }
    let mut coeffs = vec![0.0; n];
    coeffs[0] = 1.0;
    for j in 1..n {
        coeffs[j] = coeffs[j - 1] * ((j as f64 - 1.0 - d) / j as f64);
    }
    Ok(FracCoefficients { d, coeffs })
}

/// A prepared filter: coefficients for a fixed `(d, T)`, with the FFT plan
/// (when active) cached so repeated applications amortize planning.
pub struct FracFilter {
    coeffs: Vec<f64>,
    t_len: usize,
    fft: Option<FftPlan>,
}

struct FftPlan {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    coeff_spectrum: Vec<Complex64>,
}

impl FracFilter {
    /// Prepare the filter for series of length `t_len`, choosing the
    /// convolution path by the [`FFT_THRESHOLD`] rule.
    pub fn new(d: f64, t_len: usize) -> Result<Self> {
        Self::with_fft(d, t_len, t_len > FFT_THRESHOLD)
    }

    /// Prepare the filter with an explicit convolution path. Monte Carlo
    /// layers that apply one order to thousands of draws select FFT even
    /// below the threshold.
    pub fn with_fft(d: f64, t_len: usize, use_fft: bool) -> Result<Self> {
        if t_len == 0 {
            return Err(Error::EmptyInput("frac_filter series"));
        }
        let coeffs = frac_coeffs(d, t_len)?.coeffs;
        let fft = if use_fft && t_len > 1 {
            let size = (2 * t_len - 1).next_power_of_two();
            let mut planner = FftPlanner::new();
            let forward = planner.plan_fft_forward(size);
            let inverse = planner.plan_fft_inverse(size);
            let mut buf = vec![Complex64::new(0.0, 0.0); size];
            for (j, &c) in coeffs.iter().enumerate() {
                buf[j].re = c;
            }
            forward.process(&mut buf);
            Some(FftPlan {
                size,
                forward,
                inverse,
                coeff_spectrum: buf,
            })
        } else {
            None
        };
        Ok(FracFilter { coeffs, t_len, fft })
    }

    pub fn order_len(&self) -> usize {
        self.t_len
    }

    /// Filter one column in place.
    pub fn apply_slice(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.t_len, "filter prepared for a different length");
        match &self.fft {
            None => {
                // Truncated convolution runs backwards so the update stays in place.
                for t in (0..self.t_len).rev() {
                    let mut acc = 0.0;
                    for j in 0..=t {
                        acc += self.coeffs[j] * x[t - j];
                    }
                    x[t] = acc;
                }
            }
            Some(plan) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); plan.size];
                for (t, &v) in x.iter().enumerate() {
                    buf[t].re = v;
                }
                plan.forward.process(&mut buf);
                for (b, c) in buf.iter_mut().zip(&plan.coeff_spectrum) {
                    *b *= c;
                }
                plan.inverse.process(&mut buf);
                let scale = 1.0 / plan.size as f64;
                for (t, v) in x.iter_mut().enumerate() {
                    *v = buf[t].re * scale;
                }
            }
        }
    }

    /// Filter every column of a `T×p` matrix.
    pub fn apply_matrix(&self, x: &mut DMatrix<f64>) {
        assert_eq!(x.nrows(), self.t_len, "filter prepared for a different length");
        for mut col in x.column_iter_mut() {
            let slice: &mut [f64] = col.as_mut_slice();
            self.apply_slice(slice);
        }
    }
}

/// Apply `Δ^d_+` to every coordinate of a series; `Δ^{−d}_+` is `d ↦ −d`.
pub fn frac_filter(series: &FunctionalSeries, d: f64) -> Result<FunctionalSeries> {
    let mut coeffs = series.coeffs().clone();
    let filter = FracFilter::new(d, coeffs.nrows())?;
    filter.apply_matrix(&mut coeffs);
    Ok(FunctionalSeries::from_valid(
        coeffs,
        *series.basis(),
        series.label().to_string(),
    ))
}

/// Univariate convenience wrapper around [`FracFilter`].
pub fn frac_filter_vec(x: &[f64], d: f64) -> Result<Vec<f64>> {
    let mut out = x.to_vec();
    let filter = FracFilter::new(d, x.len())?;
    filter.apply_slice(&mut out);
    Ok(out)
}
