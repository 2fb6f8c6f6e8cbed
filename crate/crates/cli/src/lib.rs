//! Command-line front end for the fractional cointegration toolkit.
//!
//! The binary exposes one subcommand per stage of the analysis: data
//! ingestion (`import-hmd`), synthetic data (`simulate`), Monte Carlo
//! studies (`mc`), critical-value simulation (`critical-values`), the
//! sequential rank test (`test-rank`), memory-order estimation
//! (`estimate-memory`), the trend/long-range/short-range split
//! (`decompose`) and the end-to-end report (`pipeline`).
//!
//! Results go to files (CSV tables plus JSON reports carrying the full
//! configuration and seeds that produced them); stdout gets a short
//! human-readable summary. Every stochastic command takes an explicit
//! `--seed` and is byte-reproducible regardless of thread count.
//!
//! Exit codes: `0` on success, `2` on data errors (unreadable or malformed
//! inputs, numerical failures on degenerate data), `3` on configuration
//! errors (invalid flags or parameter combinations).

pub mod args;
pub mod commands;
pub mod hmd;
pub mod pipeline;

use fraccurve_core::Error;

/// Map a core error to the process exit code.
///
/// Parameter violations are configuration mistakes (`3`); everything else
/// (I/O, format, dimension and numerical failures) originates in the data
/// (`2`).
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter { .. } => 3,
        _ => 2,
    }
}
