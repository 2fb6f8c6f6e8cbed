//! Simulation of the variance-ratio test's null distribution and cached
//! critical-value tables.
//!
//! Under the null `q_d = q` the scaled generalized eigenvalues
//! `T^{2α}(ν̂_1, …, ν̂_q)` converge to the eigenvalues of
//! `(∫B̃_{d+α}B̃'_{d+α})⁻¹ ∫B̄_dB̄'_d`, functionals of `q`-dimensional
//! type-II fractional Brownian motion. No closed form is known, so critical
//! values are obtained by Monte Carlo. Two discretizations are implemented:
//!
//! - **pipeline** (primary): simulate `q` independent `I(d)` series of
//!   length `n` and push them through the exact finite-sample statistic
//!   construction (center, `Δ₊^{−α}`, covariance pencil, `n^{2α}` scaling).
//!   This reproduces the truncated filters and demeaning of the real test
//!   verbatim, so no discretization convention can drift;
//! - **direct** (cross-check oracle): Riemann sums of the limit functionals
//!   with `B̄_d(r) = B_d(r) − ∫B_d` and
//!   `B̃_{d+α}(r) = B_{d+α}(r) − (∫B_d)·r^α/Γ(α+1)`, both paths driven by a
//!   common innovation sequence. The tilt coefficient is `∫B_d` — the limit
//!   of the scaled sample mean that the `Δ₊^{−α}` filter acts on — which is
//!   the functional the pipeline statistic converges to; the two methods'
//!   quantiles agree to well under 5%.
//!
//! Tables are deterministic given their seed: draw `i` of cell `(q, d)` uses
//! the RNG substream keyed by `(seed, q, d-index, i)`, so results do not
//! depend on thread count.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::{gen_eigen, Projection};
use crate::error::{Error, Result};
use crate::fracdiff::FracFilter;
use crate::rng::substream;

/// A simulated type-II fractional Brownian motion path on `{0, 1/n, …, 1}`.
#[derive(Clone, Debug)]
pub struct FbmPath {
    d: f64,
    values: Vec<f64>,
}

impl FbmPath {
    pub fn order(&self) -> f64 {
        self.d
    }

    /// Number of steps `n`; the path holds `n + 1` values.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// `B_d(k/n)`, `k = 0..=n`, with `B_d(0) = 0` exactly.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Simulate `B_d` by scaled truncated fractional partial sums:
/// `y = Δ₊^{−d}ε` with i.i.d. standard normal `ε`, and
/// `B_d(k/n) = n^{1/2−d}·y_k`.
///
/// Requires `n ≥ 16` and `d > −1/2` (the boundary `d = 1/2` of the
/// nonstationary regime is excluded from critical-value grids — the variance
/// grows only logarithmically there — but the path itself is well defined).
pub fn simulate_fbm(d: f64, n: usize, rng: &mut impl Rng) -> Result<FbmPath> {
    if n < 16 {
        return Err(Error::invalid("n", "fBM discretization needs at least 16 steps"));
    }
    if d <= -0.5 {
        return Err(Error::invalid("d", "fBM order must exceed −1/2"));
    }
    let mut y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    FracFilter::new(-d, n)?.apply_slice(&mut y);
    let scale = (n as f64).powf(0.5 - d);
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    values.extend(y.iter().map(|&v| scale * v));
    Ok(FbmPath { d, values })
}

/// One draw from the null distribution: scaled generalized eigenvalues
/// (ascending) and the max/trace statistics built from them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NullDraw {
    pub nu: Vec<f64>,
    pub stat_max: f64,
    pub stat_trace: f64,
}

/// Reusable sampler for a fixed `(q, d, alpha, n)` cell; preparing the
/// fractional filters (including their FFT plans) once amortizes the setup
/// over thousands of draws.
pub struct NullSampler {
    q: usize,
    d: f64,
    alpha: f64,
    n: usize,
    filt_d: FracFilter,
    filt_alpha: FracFilter,
}

/// Draws whose pencil is numerically singular are retried with fresh
/// innovations at most this many times before erroring.
const MAX_RETRIES: usize = 3;

impl NullSampler {
    pub fn new(q: usize, d: f64, alpha: f64, n: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::invalid("q", "null distribution needs q ≥ 1"));
        }
        if !(0.5 < d && d < 1.5) {
            return Err(Error::invalid("d", format!("d must lie in (0.5, 1.5), got {d}")));
        }
        if alpha <= 0.0 {
            return Err(Error::invalid("alpha", "alpha must be positive"));
        }
        if n < 16 {
            return Err(Error::invalid("n", "need at least 16 path steps"));
        }
        // FFT convolution wins well below the generic threshold when one
        // plan serves many draws.
        let use_fft = n >= 256;
        Ok(NullSampler {
            q,
            d,
            alpha,
            n,
            filt_d: FracFilter::with_fft(-d, n, use_fft)?,
            filt_alpha: FracFilter::with_fft(-alpha, n, use_fft)?,
        })
    }

    /// One pipeline draw.
    pub fn draw(&self, rng: &mut impl Rng) -> Result<NullDraw> {
        for _ in 0..=MAX_RETRIES {
            let mut y = DMatrix::from_fn(self.n, self.q, |_, _| rng.sample::<f64, _>(StandardNormal));
            self.filt_d.apply_matrix(&mut y);
            center_columns(&mut y);
            let mut ztil = y.clone();
            self.filt_alpha.apply_matrix(&mut ztil);
            let a = y.transpose() * &y;
            let b = ztil.transpose() * &ztil;
            match gen_eigen(&a, &b, &Projection::identity(self.q)) {
                Ok((nu, _)) => {
                    let scale = (self.n as f64).powf(2.0 * self.alpha);
                    let nu: Vec<f64> = nu.iter().map(|&v| v * scale).collect();
                    return Ok(finish_draw(nu));
                }
                Err(Error::Numerical { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::numerical(
            "null_draw",
            format!("singular pencil persisted through {MAX_RETRIES} retries"),
        ))
    }

    /// One direct-functional draw (Riemann sums of the limit law).
    pub fn draw_direct(&self, rng: &mut impl Rng) -> Result<NullDraw> {
        let filt_da = FracFilter::with_fft(-(self.d + self.alpha), self.n, self.n >= 256)?;
        let n = self.n;
        let nf = n as f64;
        let tilt_gamma = statrs::function::gamma::gamma(self.alpha + 1.0);
        let tilt: Vec<f64> = (1..=n)
            .map(|k| (k as f64 / nf).powf(self.alpha) / tilt_gamma)
            .collect();
        for _ in 0..=MAX_RETRIES {
            let mut bbar = DMatrix::zeros(n, self.q);
            let mut btil = DMatrix::zeros(n, self.q);
            for j in 0..self.q {
                let eps: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let mut y_d = eps.clone();
                self.filt_d.apply_slice(&mut y_d);
                let mut y_da = eps;
                filt_da.apply_slice(&mut y_da);
                let s_d = nf.powf(0.5 - self.d);
                let s_da = nf.powf(0.5 - self.d - self.alpha);
                let mean_bd = s_d * y_d.iter().sum::<f64>() / nf;
                for k in 0..n {
                    bbar[(k, j)] = s_d * y_d[k] - mean_bd;
                    btil[(k, j)] = s_da * y_da[k] - mean_bd * tilt[k];
                }
            }
            let a = bbar.transpose() * &bbar / nf;
            let b = btil.transpose() * &btil / nf;
            match gen_eigen(&a, &b, &Projection::identity(self.q)) {
                Ok((nu, _)) => return Ok(finish_draw(nu.iter().copied().collect())),
                Err(Error::Numerical { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::numerical(
            "null_draw_direct",
            format!("singular pencil persisted through {MAX_RETRIES} retries"),
        ))
    }
}

fn center_columns(x: &mut DMatrix<f64>) {
    let t = x.nrows() as f64;
    for mut col in x.column_iter_mut() {
        let mean = col.sum() / t;
        col.add_scalar_mut(-mean);
    }
}

fn finish_draw(nu: Vec<f64>) -> NullDraw {
    let stat_max = *nu.last().expect("q >= 1");
    let stat_trace = nu.iter().sum();
    NullDraw { nu, stat_max, stat_trace }
}

/// One pipeline draw of the null law (convenience wrapper).
pub fn null_draw(q: usize, d: f64, alpha: f64, n: usize, rng: &mut impl Rng) -> Result<NullDraw> {
    NullSampler::new(q, d, alpha, n)?.draw(rng)
}

/// One direct-functional draw of the null law (cross-check oracle).
pub fn null_draw_direct(
    q: usize,
    d: f64,
    alpha: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<NullDraw> {
    NullSampler::new(q, d, alpha, n)?.draw_direct(rng)
}

/// Result of a critical-value lookup.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CvLookup {
    pub crit_max: f64,
    pub crit_trace: f64,
    /// True when the requested `d` fell outside the table's grid and was
    /// clamped to the nearest edge.
    pub clamped: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CvMeta {
    n: usize,
    #[serde(rename = "R")]
    reps: usize,
    seed: u64,
    alpha: f64,
    version: String,
}

/// Simulated `(1−η)` quantiles of `Λ⁰` and `Λ¹` on a `(q, d, η)` grid for a
/// fixed `α`, with full build provenance.
#[derive(Clone, Debug)]
pub struct CriticalValueTable {
    meta: CvMeta,
    qs: Vec<usize>,
    d_grid: Vec<f64>,
    etas: Vec<f64>,
    crit_max: Vec<f64>,
    crit_trace: Vec<f64>,
}

/// Current on-disk format version.
const CV_FORMAT_VERSION: &str = "1";

impl CriticalValueTable {
    pub fn alpha(&self) -> f64 {
        self.meta.alpha
    }

    pub fn qs(&self) -> &[usize] {
        &self.qs
    }

    pub fn d_grid(&self) -> &[f64] {
        &self.d_grid
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn path_steps(&self) -> usize {
        self.meta.n
    }

    pub fn replications(&self) -> usize {
        self.meta.reps
    }

    pub fn seed(&self) -> u64 {
        self.meta.seed
    }

    fn idx(&self, qi: usize, di: usize, ei: usize) -> usize {
        (qi * self.d_grid.len() + di) * self.etas.len() + ei
    }

    /// Critical values at `(q, d, η)`; `d` between grid points interpolates
    /// linearly, `d` outside the grid clamps with a flag. Missing `q` or `η`
    /// is a hard table-miss error naming the cell.
    pub fn lookup(&self, q: usize, alpha: f64, d: f64, eta: f64) -> Result<CvLookup> {
        if (alpha - self.meta.alpha).abs() > 1e-9 {
            return Err(Error::invalid(
                "cv_table",
                format!("table was built for alpha={}, requested alpha={alpha}", self.meta.alpha),
            ));
        }
        let qi = self.qs.iter().position(|&v| v == q).ok_or_else(|| {
            Error::invalid(
                "cv_table",
                format!("no critical values for cell (q={q}, alpha={alpha}, d={d}, eta={eta}): q not in table {:?}", self.qs),
            )
        })?;
        let ei = self
            .etas
            .iter()
            .position(|&v| (v - eta).abs() < 1e-9)
            .ok_or_else(|| {
                Error::invalid(
                    "cv_table",
                    format!("no critical values for cell (q={q}, alpha={alpha}, d={d}, eta={eta}): eta not in table {:?}", self.etas),
                )
            })?;

        let d_lo = self.d_grid[0];
        let d_hi = *self.d_grid.last().expect("nonempty grid");
        let (d_eff, clamped) = if d < d_lo {
            (d_lo, true)
        } else if d > d_hi {
            (d_hi, true)
        } else {
            (d, false)
        };
        // Bracket d_eff on the grid and interpolate.
        let hi_pos = self
            .d_grid
            .iter()
            .position(|&g| g >= d_eff - 1e-12)
            .expect("d_eff within grid range");
        let (crit_max, crit_trace) = if (self.d_grid[hi_pos] - d_eff).abs() < 1e-9 || hi_pos == 0 {
            let i = self.idx(qi, hi_pos, ei);
            (self.crit_max[i], self.crit_trace[i])
        } else {
            let lo_pos = hi_pos - 1;
            let w = (d_eff - self.d_grid[lo_pos]) / (self.d_grid[hi_pos] - self.d_grid[lo_pos]);
            let ilo = self.idx(qi, lo_pos, ei);
            let ihi = self.idx(qi, hi_pos, ei);
            (
                (1.0 - w) * self.crit_max[ilo] + w * self.crit_max[ihi],
                (1.0 - w) * self.crit_trace[ilo] + w * self.crit_trace[ihi],
            )
        };
        Ok(CvLookup { crit_max, crit_trace, clamped })
    }

    /// Serialize to CSV with a JSON metadata header line. The file is
    /// written to a temporary sibling and atomically renamed, so a partial
    /// table can never appear at `path`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        std::fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        {
            let out = tmp.as_file_mut();
            writeln!(out, "#{}", serde_json::to_string(&self.meta)?)?;
            writeln!(out, "q,alpha,d,eta,crit_max,crit_trace")?;
            for (qi, &q) in self.qs.iter().enumerate() {
                for (di, &d) in self.d_grid.iter().enumerate() {
                    for (ei, &eta) in self.etas.iter().enumerate() {
                        let i = self.idx(qi, di, ei);
                        writeln!(
                            out,
                            "{q},{},{d},{eta},{},{}",
                            self.meta.alpha, self.crit_max[i], self.crit_trace[i]
                        )?;
                    }
                }
            }
            out.flush()?;
        }
        tmp.persist(path)
            .map_err(|e| Error::Io(e.error))?;
        Ok(())
    }

    /// Read a table previously written by [`CriticalValueTable::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = std::io::BufReader::new(file);
        let mut meta_line = String::new();
        reader.read_line(&mut meta_line)?;
        let meta_json = meta_line
            .trim()
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("missing JSON metadata header line".into()))?;
        let meta: CvMeta = serde_json::from_str(meta_json)?;

        let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let mut rows: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
        for record in csv.records() {
            let r = record?;
            if r.len() != 6 {
                return Err(Error::Format(format!("expected 6 columns, got {}", r.len())));
            }
            let parse = |i: usize| -> Result<f64> {
                r[i].parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{}` in cv table", &r[i])))
            };
            let q: usize = r[0]
                .parse()
                .map_err(|_| Error::Format(format!("bad q `{}` in cv table", &r[0])))?;
            let alpha = parse(1)?;
            if (alpha - meta.alpha).abs() > 1e-9 {
                return Err(Error::Format("row alpha differs from metadata alpha".into()));
            }
            rows.push((q, parse(2)?, parse(3)?, parse(4)?, parse(5)?));
        }
        if rows.is_empty() {
            return Err(Error::Format("empty cv table".into()));
        }
        let mut qs: Vec<usize> = rows.iter().map(|r| r.0).collect();
        qs.sort_unstable();
        qs.dedup();
        let mut d_grid: Vec<f64> = rows.iter().map(|r| r.1).collect();
        d_grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        d_grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let mut etas: Vec<f64> = rows.iter().map(|r| r.2).collect();
        etas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        etas.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

        let cells = qs.len() * d_grid.len() * etas.len();
        if rows.len() != cells {
            return Err(Error::Format(format!(
                "cv table is not a full grid: {} rows for {} cells",
                rows.len(),
                cells
            )));
        }
        let mut table = CriticalValueTable {
            meta,
            qs,
            d_grid,
            etas,
            crit_max: vec![f64::NAN; cells],
            crit_trace: vec![f64::NAN; cells],
        };
        for (q, d, eta, cmax, ctrace) in rows {
            let qi = table.qs.iter().position(|&v| v == q).unwrap();
            let di = table
                .d_grid
                .iter()
                .position(|&v| (v - d).abs() < 1e-12)
                .unwrap();
            let ei = table.etas.iter().position(|&v| (v - eta).abs() < 1e-12).unwrap();
            let i = table.idx(qi, di, ei);
            table.crit_max[i] = cmax;
            table.crit_trace[i] = ctrace;
        }
        if table.crit_max.iter().any(|v| v.is_nan()) {
            return Err(Error::Format("cv table grid has duplicate or missing cells".into()));
        }
        Ok(table)
    }
}

/// Assemble a table from pre-computed quantiles, for tests that need full
/// control over the critical values (e.g. forcing accept or reject paths).
#[cfg(test)]
pub(crate) fn table_from_parts(
    alpha: f64,
    qs: Vec<usize>,
    d_grid: Vec<f64>,
    etas: Vec<f64>,
    crit_max: Vec<f64>,
    crit_trace: Vec<f64>,
) -> CriticalValueTable {
    assert_eq!(crit_max.len(), qs.len() * d_grid.len() * etas.len());
    assert_eq!(crit_trace.len(), crit_max.len());
    CriticalValueTable {
        meta: CvMeta {
            n: 0,
            reps: 0,
            seed: 0,
            alpha,
            version: CV_FORMAT_VERSION.to_string(),
        },
        qs,
        d_grid,
        etas,
        crit_max,
        crit_trace,
    }
}

/// Default critical-value grid in `d`: `0.51, 0.52, …, 1.49`.
pub fn default_d_grid() -> Vec<f64> {
    (51..=149).map(|i| i as f64 / 100.0).collect()
}

/// Default significance levels `η`.
pub fn default_etas() -> Vec<f64> {
    vec![0.01, 0.05, 0.10]
}

/// Build a critical-value table by parallel Monte Carlo.
///
/// Empirical `(1−η)` quantiles (order statistic `⌈(1−η)R⌉`) of the max and
/// trace statistics are tabulated per `(q, d)` cell. Deterministic for a
/// given `seed` regardless of thread count: draw `i` of cell `(q, d_i)` uses
/// the substream `(seed, q, d-index, i)`.
pub fn build_cv_table(
    q_range: &[usize],
    alpha: f64,
    d_grid: &[f64],
    etas: &[f64],
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    if q_range.is_empty() || d_grid.is_empty() || etas.is_empty() {
        return Err(Error::invalid("grid", "q_range, d_grid and etas must be nonempty"));
    }
    if reps < 1000 {
        return Err(Error::invalid("reps", "critical values need at least 1,000 replications"));
    }
    let mut qs = q_range.to_vec();
    qs.sort_unstable();
    qs.dedup();
    let mut d_sorted = d_grid.to_vec();
    d_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut etas_sorted = etas.to_vec();
    etas_sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for &eta in &etas_sorted {
        if !(0.0 < eta && eta < 1.0) {
            return Err(Error::invalid("etas", format!("eta must lie in (0,1), got {eta}")));
        }
    }

    let n_cells = qs.len() * d_sorted.len();
    let mut crit_max = vec![0.0; n_cells * etas_sorted.len()];
    let mut crit_trace = vec![0.0; n_cells * etas_sorted.len()];
    for (qi, &q) in qs.iter().enumerate() {
        for (di, &d) in d_sorted.iter().enumerate() {
            let sampler = NullSampler::new(q, d, alpha, n)?;
            let draws: Result<Vec<NullDraw>> = (0..reps)
                .into_par_iter()
                .map(|i| {
                    let mut rng = substream(seed, &[q as u64, di as u64, i as u64]);
                    sampler.draw(&mut rng)
                })
                .collect();
            let draws = draws?;
            let mut maxs: Vec<f64> = draws.iter().map(|d| d.stat_max).collect();
            let mut traces: Vec<f64> = draws.iter().map(|d| d.stat_trace).collect();
            maxs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            traces.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (ei, &eta) in etas_sorted.iter().enumerate() {
                let rank = ((1.0 - eta) * reps as f64).ceil() as usize;
                let pos = rank.clamp(1, reps) - 1;
                let cell = (qi * d_sorted.len() + di) * etas_sorted.len() + ei;
                crit_max[cell] = maxs[pos];
                crit_trace[cell] = traces[pos];
            }
        }
    }
    Ok(CriticalValueTable {
        meta: CvMeta {
            n,
            reps,
            seed,
            alpha,
            version: CV_FORMAT_VERSION.to_string(),
        },
        qs,
        d_grid: d_sorted,
        etas: etas_sorted,
        crit_max,
        crit_trace,
    })
}
