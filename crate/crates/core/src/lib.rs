//! Fractional cointegration analysis for curve-valued functional time series.
//!
//! A sample of curves `Z_1, ..., Z_T` (each observed on a common grid or in a
//! fixed basis) may mix components of different memory orders: a nonstationary
//! fractional trend of order `d > 1/2`, stationary long-range dependent
//! directions of order `d - b`, and short-range dependent remainder. This
//! crate provides the tools to detect and separate those components:
//!
//! - truncated fractional differencing and integration ([`fracdiff`]),
//! - eigenvalue-ratio estimation of the dominant subspace dimension and a
//!   variance-ratio test for fractional cointegration rank ([`cointegration`]),
//! - simulation of the nonstandard limit laws and critical-value tables
//!   ([`limitsim`]),
//! - local Whittle memory estimation along random directions ([`memest`]),
//! - long-run covariance machinery ([`covariance`]) and spectral utilities
//!   ([`spectra`]),
//! - a synthetic data-generating process with known ground truth ([`dgp`])
//!   plus Monte Carlo drivers ([`montecarlo`]).
//!
//! All stochastic routines take explicit seeds and produce results that do not
//! depend on thread count (see [`rng`]).

pub mod basis;
pub mod cointegration;
pub mod covariance;
pub mod dgp;
pub mod error;
pub mod fracdiff;
pub mod io;
pub mod limitsim;
pub mod memest;
pub mod montecarlo;
pub mod rng;
pub mod series;
pub mod spectra;

pub use basis::{Basis, BasisKind};
pub use error::{Error, Result};
pub use series::{Curve, FunctionalSeries};
