//! Subcommand runners.
//!
//! Each runner turns parsed arguments into library calls, writes its
//! artifacts and prints a one-line summary. All validation errors surface
//! as [`fraccurve_core::Error`] values; the binary maps them to exit
//! codes.

use std::fs;

use serde::Serialize;

use fraccurve_core::cointegration::{
    lrd_srd_split, ratio_estimate_qd, sequential_rank_test, KRule, RankTestOutcome,
    SequentialOutcome, Statistic,
};
use fraccurve_core::covariance::{eigen, sample_cov, Projection};
use fraccurve_core::dgp::{gen_dgp, DGPParams};
use fraccurve_core::limitsim::{build_cv_table, CriticalValueTable};
use fraccurve_core::memest::{
    estimate_d, estimate_d_minus_b, memory_ci, DMethod, MemoryEstimate,
};
use fraccurve_core::montecarlo::{run_table, MCConfig};
use fraccurve_core::rng::substream;
use fraccurve_core::spectra::power_bandwidth;
use fraccurve_core::{io, Basis, Error, Result};

use crate::args::{
    Cli, Command, CriticalValuesArgs, DecomposeArgs, EstimateMemoryArgs, ImportHmdArgs, McArgs,
    PipelineArgs, SimulateArgs, TargetArg, TestRankArgs,
};
use crate::hmd::import_hmd;
use crate::pipeline::{run_pipeline, steps_to_csv, PipelineConfig};

/// Dispatch a parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ImportHmd(args) => cmd_import_hmd(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Mc(args) => cmd_mc(args),
        Command::CriticalValues(args) => cmd_critical_values(args),
        Command::TestRank(args) => cmd_test_rank(args),
        Command::EstimateMemory(args) => cmd_estimate_memory(args),
        Command::Decompose(args) => cmd_decompose(args),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn cmd_import_hmd(args: ImportHmdArgs) -> Result<()> {
    let basis = Basis::new(args.basis.into(), args.dim)?;
    let series = import_hmd(&args.input, args.gender, basis)?;
    io::write_series(&series, &args.output)?;
    println!(
        "imported {} curves (p = {}) as `{}` into {}",
        series.len(),
        series.dim(),
        series.label(),
        args.output.display()
    );
    Ok(())
}

/// Ground truth sidecar of a simulated series. The block projections are
/// coordinate spans, so the permutation determines them completely.
#[derive(Serialize)]
struct TruthSidecar<'a> {
    params: &'a DGPParams,
    t_len: usize,
    seed: u64,
    /// Block direction `j` (blocks ordered dominant, long-range,
    /// short-range) lives on this coordinate.
    permutation: &'a [usize],
    /// Coordinates spanning the dominant subspace.
    dominant_coords: &'a [usize],
    /// Coordinates spanning the long-range dependent subspace.
    lrd_coords: &'a [usize],
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let params = args.dgp.to_params();
    let mut rng = substream(args.seed, &[]);
    let (series, truth) = gen_dgp(&params, args.t_len, &mut rng)?;
    let series = series.with_label(format!("dgp-seed{}", args.seed));
    io::write_series(&series, &args.output)?;
    let truth_path = args.output.with_extension("truth.json");
    let sidecar = TruthSidecar {
        params: &params,
        t_len: args.t_len,
        seed: args.seed,
        permutation: &truth.permutation,
        dominant_coords: &truth.permutation[..params.q_d],
        lrd_coords: &truth.permutation[params.q_d..params.q_d + params.q_db],
    };
    fs::write(&truth_path, serde_json::to_string_pretty(&sidecar)?)?;
    println!(
        "simulated {} observations (p = {}, d = {}, d−b = {}) into {}",
        args.t_len,
        params.p,
        params.d,
        params.d_minus_b,
        args.output.display()
    );
    Ok(())
}

fn cmd_mc(args: McArgs) -> Result<()> {
    let mut cfg = MCConfig::for_table(args.table.into(), args.reps, args.t_list.clone(), args.seed);
    cfg.dgp = args.dgp.to_params();
    if let Some(k_list) = args.k_list {
        cfg.k_list = k_list;
    }
    if let Some(h_exponents) = args.h_exponents {
        cfg.h_exponents = h_exponents;
    }
    cfg.m_exponent = args.m_exponent;
    cfg.level = args.level;
    cfg.alpha = args.alpha;
    cfg.eta = args.eta;
    cfg.plug_in_d = args.plug_in_d;
    let cv = args.cv_table.as_deref().map(CriticalValueTable::read_csv).transpose()?;
    let report = run_table(&cfg, cv.as_ref())?;
    report.write_dir(&args.out_dir)?;
    println!(
        "{} design: {} replications at T = {:?}; wrote report.csv and provenance.json in {}",
        report.table,
        report.reps,
        report.t_list,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_critical_values(args: CriticalValuesArgs) -> Result<()> {
    let mut qs = match (&args.q_list, args.q_max) {
        (Some(list), _) => list.clone(),
        (None, Some(q_max)) => (1..=q_max).collect(),
        (None, None) => {
            return Err(Error::invalid("q", "give either --q-max or --q-list"));
        }
    };
    if qs.iter().any(|&q| q == 0) {
        return Err(Error::invalid("q", "ranks are positive"));
    }
    if !(args.d_step > 0.0) || args.d_max < args.d_min {
        return Err(Error::invalid("d_grid", "need d_min ≤ d_max and a positive step"));
    }
    let mut d_grid = Vec::new();
    let mut k = 0usize;
    loop {
        let d = args.d_min + k as f64 * args.d_step;
        if d > args.d_max + 1e-12 {
            break;
        }
        d_grid.push(d);
        k += 1;
    }

    // Extension: a table built with the same grid, seed and budget is
    // reproduced cell by cell (draws are substreamed per rank), so adding
    // ranks just means rebuilding the union.
    if args.output.exists() {
        let existing = CriticalValueTable::read_csv(&args.output)?;
        let same_grid = existing.d_grid().len() == d_grid.len()
            && existing
                .d_grid()
                .iter()
                .zip(&d_grid)
                .all(|(a, b)| (a - b).abs() < 1e-9)
            && existing.etas().len() == args.eta_list.len()
            && existing
                .etas()
                .iter()
                .zip(&args.eta_list)
                .all(|(a, b)| (a - b).abs() < 1e-12);
        if !same_grid
            || (existing.alpha() - args.alpha).abs() > 1e-12
            || existing.path_steps() != args.steps
            || existing.replications() != args.reps
            || existing.seed() != args.seed
        {
            return Err(Error::invalid(
                "output",
                format!(
                    "{} exists with a different grid, seed or budget; extending would mix \
                     incompatible simulations (pick another --output to rebuild)",
                    args.output.display()
                ),
            ));
        }
        if qs.iter().all(|q| existing.qs().contains(q)) {
            println!(
                "{} already covers q = {:?}; nothing to do",
                args.output.display(),
                qs
            );
            return Ok(());
        }
        qs.extend_from_slice(existing.qs());
    }

    let table = build_cv_table(
        &qs,
        args.alpha,
        &d_grid,
        &args.eta_list,
        args.steps,
        args.reps,
        args.seed,
    )?;
    table.write_csv(&args.output)?;
    println!(
        "tabulated q = {:?} on {} memory orders × {} levels ({} replications each) into {}",
        table.qs(),
        table.d_grid().len(),
        table.etas().len(),
        table.replications(),
        args.output.display()
    );
    Ok(())
}

/// Sequential-test report emitted by `test-rank`; the pipeline embeds the
/// same step records in its own report.
#[derive(Serialize)]
struct RankReport {
    label: String,
    q_bar: usize,
    no_dominant_subspace: bool,
    statistic: Statistic,
    eta: f64,
    d_used: f64,
    d_source: &'static str,
    cv_clamped: bool,
    steps: Vec<RankTestOutcome>,
    d_estimate: Option<MemoryEstimate>,
}

fn cmd_test_rank(args: TestRankArgs) -> Result<()> {
    let series = io::read_series(&args.input)?;
    let cv = CriticalValueTable::read_csv(&args.cv_table)?;
    let (d_used, d_source, d_estimate) = match args.d {
        Some(d) => (d, "flag", None),
        None => {
            let seed = args.seed.expect("clap requires --seed without --d");
            let m = power_bandwidth(series.len(), args.m_exponent);
            let mut rng = substream(seed, &[81]);
            let est = estimate_d(&series, args.l, args.j, m, &mut rng, DMethod::Differenced)?;
            (est.value, "plug-in", Some(est))
        }
    };
    let q_max = match args.q_max {
        Some(q) => q,
        None => fraccurve_core::cointegration::suggest_q_max(&series)?,
    };
    let k_rule = match args.k_fixed {
        Some(k) => KRule::Fixed(k),
        None => KRule::Offset(args.k_offset),
    };
    let statistic: Statistic = args.statistic.into();
    let seq: SequentialOutcome = sequential_rank_test(
        &series,
        q_max,
        k_rule,
        args.alpha,
        args.eta,
        d_used,
        &cv,
        statistic,
    )?;
    let report = RankReport {
        label: series.label().to_string(),
        q_bar: seq.q_bar,
        no_dominant_subspace: seq.q_bar == 0,
        statistic,
        eta: args.eta,
        d_used,
        d_source,
        cv_clamped: seq.cv_clamped,
        steps: seq.steps,
        d_estimate,
    };
    let text = serde_json::to_string_pretty(&report)?;
    match &args.output {
        Some(path) => {
            fs::write(path, text)?;
            println!("q_bar = {} (d {} = {:.4}); report in {}", report.q_bar, d_source, d_used, path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_estimate_memory(args: EstimateMemoryArgs) -> Result<()> {
    let series = io::read_series(&args.input)?;
    let m = match args.m {
        Some(m) => m,
        None => power_bandwidth(series.len(), args.m_exponent),
    };
    let mut estimate = match args.target {
        TargetArg::D => {
            let j = args.j.unwrap_or(5);
            let mut rng = substream(args.seed, &[82]);
            estimate_d(&series, args.l, j, m, &mut rng, args.method.into())?
        }
        TargetArg::DMinusB => {
            let q_d = args.q_d.ok_or_else(|| {
                Error::invalid("q_d", "--q-d is required when targeting d − b")
            })?;
            let j = args.j.unwrap_or(2);
            let mut rng = substream(args.seed, &[83]);
            estimate_d_minus_b(&series, q_d, args.l, j, m, &mut rng)?
        }
    };
    if let Some(level) = args.ci {
        estimate = memory_ci(&estimate, level)?;
    }
    let text = serde_json::to_string_pretty(&estimate)?;
    match &args.output {
        Some(path) => {
            fs::write(path, text)?;
            println!("estimate = {:.4} (m = {}); report in {}", estimate.value, m, path.display());
        }
        None => println!("{text}"),
    }
    Ok(())
}

/// Subspace split emitted by `decompose`.
#[derive(Serialize)]
struct DecompositionReport {
    label: String,
    t_len: usize,
    p: usize,
    q_d: usize,
    q_d_source: &'static str,
    ratio_window: usize,
    bandwidth_h: usize,
    q_db: usize,
    srd_rank: usize,
    /// Spectrum of the projected long-run covariance, descending.
    split_eigenvalues: Vec<f64>,
    score_indices: Vec<usize>,
}

fn cmd_decompose(args: DecomposeArgs) -> Result<()> {
    let series = io::read_series(&args.input)?;
    let p = series.dim();
    let eigs = eigen(&sample_cov(&series, true))?;
    let (q_d, q_d_source) = match args.q_d {
        Some(q) => {
            if q == 0 || q + 2 > p {
                return Err(Error::invalid(
                    "q_d",
                    format!("need 1 ≤ q_d ≤ p − 2 to leave room for the split, got {q} with p={p}"),
                ));
            }
            (q, "flag")
        }
        None => (ratio_estimate_qd(&eigs, args.k)?.0, "eigenvalue-ratio"),
    };
    let h = match args.h {
        Some(h) => h,
        None => power_bandwidth(series.len(), args.h_exponent),
    };
    let p_bar = Projection::from_frame(eigs.leading(q_d))?;
    let window = args.k.min(p - q_d - 1);
    let split = lrd_srd_split(&series, &p_bar, h, window)?;

    if args.scores == 0 || args.scores > p {
        return Err(Error::invalid(
            "scores",
            format!("need 1 ≤ scores ≤ p, got {} with p={p}", args.scores),
        ));
    }
    let z0 = series.initialize();
    let eigs0 = eigen(&sample_cov(&z0, false))?;
    let indices: Vec<usize> = (1..=args.scores).collect();
    let mut csv = String::from("t");
    for &j in &indices {
        csv.push_str(&format!(",s{j}"));
    }
    csv.push('\n');
    let columns: Vec<Vec<f64>> = indices
        .iter()
        .map(|&j| z0.scores(&eigs0.vectors().column(j - 1).clone_owned()))
        .collect();
    for t in 0..z0.len() {
        csv.push_str(&format!("{}", t + 1));
        for col in &columns {
            csv.push_str(&format!(",{}", col[t]));
        }
        csv.push('\n');
    }

    let report = DecompositionReport {
        label: series.label().to_string(),
        t_len: series.len(),
        p,
        q_d,
        q_d_source,
        ratio_window: window,
        bandwidth_h: h,
        q_db: split.q_db,
        srd_rank: split.srd.rank(),
        split_eigenvalues: split.eigensystem.values().iter().copied().collect(),
        score_indices: indices,
    };
    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("decomposition.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(args.out_dir.join("scores.csv"), csv)?;
    println!(
        "q_d = {q_d} ({q_d_source}), q_db = {}, short-range rank {}; wrote decomposition.json and scores.csv in {}",
        report.q_db,
        report.srd_rank,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    let series = match (&args.input, &args.hmd) {
        (Some(path), None) => io::read_series(path)?,
        (None, Some(path)) => {
            let gender = args.gender.expect("clap requires --gender with --hmd");
            let basis = Basis::new(args.basis.into(), args.dim)?;
            import_hmd(path, gender, basis)?
        }
        _ => unreachable!("clap enforces exactly one input source"),
    };
    let cv = CriticalValueTable::read_csv(&args.cv_table)?;
    let cfg = PipelineConfig {
        basis: args.basis.into(),
        dim: args.dim,
        alpha: args.alpha,
        eta: args.eta,
        q_max: args.q_max,
        k_offset: args.k_offset,
        lrs_k: args.lrs_k,
        m_exponent: args.m_exponent,
        h_exponent: args.h_exponent,
        l: args.l,
        j_d: args.j_d,
        j_db: args.j_db,
        statistic: args.statistic.into(),
        level: args.level,
        score_indices: args.score_indices.clone(),
        seed: args.seed,
    };
    let cv_path = args.cv_table.display().to_string();
    let (report, scores) = run_pipeline(&series, &cv, &cfg, &cv_path)?;

    fs::create_dir_all(&args.out_dir)?;
    fs::write(args.out_dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    fs::write(args.out_dir.join("steps.csv"), steps_to_csv(&report.steps))?;
    fs::write(args.out_dir.join("scores.csv"), scores.to_csv())?;

    let mut line = format!(
        "{}: d = {:.4} (baseline {:.4}), q_bar = {} (ratio estimate {})",
        report.label, report.d_hat.value, report.d_hat_lrs, report.q_bar, report.q_hat_lrs
    );
    match &report.second_stage {
        Some(second) => {
            line.push_str(&format!(
                ", d−b = {:.4} (baseline {:.4}), q_db = {}",
                second.d_minus_b.value, second.d_minus_b_lrs, second.q_db
            ));
        }
        None => line.push_str("; no dominant subspace detected"),
    }
    if report.cv_clamped {
        line.push_str(" [warning: plug-in d outside the critical-value grid]");
    }
    println!("{line}");
    println!("wrote report.json, steps.csv and scores.csv in {}", args.out_dir.display());
    Ok(())
}
