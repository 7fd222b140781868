//! Command-line harness: solve instances under one or more stabilization
//! modes, write per-iteration traces and a per-instance summary, and print
//! a comparison table of iteration counts and wall times.
//!
//! Exit codes: 0 when every run certified and the modes agreed, 1 on any
//! usage/IO/solve error, 2 when a run failed to certify (timeout) or
//! differently stabilized runs certified different values (which signals a
//! bug, so the table withholds speedups for them).

use std::collections::BTreeMap;
use std::error::Error;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ngcg::doi::{FdoiVariant, SdoiVariant};
use ngcg::driver::{self, RunConfig, SolveOutcome};
use ngcg::instance::parse_cvrplib;
use ngcg::rmp::DoiMode;
use ngcg::synth::benchmark_suite;
use ngcg::Instance;

/// Certified values across modes may differ by at most this, relatively.
const CONSISTENCY_RTOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "ngcg",
    version,
    about = "Column generation for capacitated routing, with stabilized masters"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve instances and write trace.csv / summary.csv.
    Run(RunArgs),
    /// Write the built-in synthetic benchmark suite as .vrp files.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// One instance file (CVRP format, EUC_2D distances).
    #[arg(long, conflicts_with = "dir")]
    instance: Option<PathBuf>,
    /// Directory of .vrp files; without this or --instance, the built-in
    /// suite runs.
    #[arg(long)]
    dir: Option<PathBuf>,
    /// Stabilization modes to run, comma separated: none, s, f, sf.
    #[arg(long, value_delimiter = ',', default_value = "none,s,f,sf")]
    doi: Vec<DoiMode>,
    /// Neighborhood size of the route relaxation.
    #[arg(long, default_value_t = 5)]
    ng_size: usize,
    /// Swap bounds kept per customer (incoming and outgoing).
    #[arg(long, default_value_t = 10)]
    sdoi_k: usize,
    /// Rebate grid levels per customer.
    #[arg(long, default_value_t = 10)]
    sigma_levels: usize,
    /// Fraction of the maximal rebate total smoothing must keep.
    #[arg(long, default_value_t = 0.999)]
    delta: f64,
    /// Convergence tolerance on the minimum reduced cost.
    #[arg(long, default_value_t = 1e-6)]
    epsilon: f64,
    /// Most columns added per pricing round.
    #[arg(long, default_value_t = 30)]
    max_cols: usize,
    /// Per-route fixed cost override.
    #[arg(long)]
    fixed_cost: Option<f64>,
    /// Vehicle-count override for the Lagrangian bound.
    #[arg(long)]
    kappa: Option<usize>,
    /// Wall-clock limit per (instance, mode), in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    #[arg(long, value_enum, default_value_t = VariantArg::Tight)]
    sdoi_variant: VariantArg,
    #[arg(long, value_enum, default_value_t = VariantArg::Tight)]
    fdoi_variant: VariantArg,
    /// Output directory for the CSV files.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Directory to write the .vrp files into.
    #[arg(long, default_value = "instances")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Easy,
    Tight,
}

impl From<VariantArg> for SdoiVariant {
    fn from(v: VariantArg) -> SdoiVariant {
        match v {
            VariantArg::Easy => SdoiVariant::Easy,
            VariantArg::Tight => SdoiVariant::Tight,
        }
    }
}

impl From<VariantArg> for FdoiVariant {
    fn from(v: VariantArg) -> FdoiVariant {
        match v {
            VariantArg::Easy => FdoiVariant::Easy,
            VariantArg::Tight => FdoiVariant::Tight,
        }
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(help) => {
            let _ = help.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Generate(args) => cmd_generate(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<ExitCode, Box<dyn Error>> {
    fs::create_dir_all(&args.out)?;
    let suite = benchmark_suite();
    for inst in &suite {
        let path = args.out.join(format!("{}.vrp", inst.name()));
        fs::write(&path, inst.to_vrp_string())?;
    }
    println!(
        "wrote {} instances to {}",
        suite.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn load_instances(args: &RunArgs) -> Result<Vec<Instance>, Box<dyn Error>> {
    if let Some(path) = &args.instance {
        return Ok(vec![read_instance(path)?]);
    }
    if let Some(dir) = &args.dir {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "vrp"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(format!("no .vrp files in {}", dir.display()).into());
        }
        return paths.iter().map(|p| read_instance(p)).collect();
    }
    Ok(benchmark_suite())
}

fn read_instance(path: &Path) -> Result<Instance, Box<dyn Error>> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    parse_cvrplib(&text).map_err(|e| format!("{}: {e}", path.display()).into())
}

struct InstanceReport {
    name: String,
    n: usize,
    kappa: usize,
    outcomes: BTreeMap<String, SolveOutcome>,
    /// None until checked; Some(true) when all certified values agree.
    consistent: Option<bool>,
}

fn cmd_run(args: RunArgs) -> Result<ExitCode, Box<dyn Error>> {
    let mut modes: Vec<DoiMode> = Vec::new();
    for &m in &args.doi {
        if !modes.contains(&m) {
            modes.push(m);
        }
    }
    if modes.is_empty() {
        return Err("at least one --doi mode is required".into());
    }
    let instances = load_instances(&args)?;
    fs::create_dir_all(&args.out)?;

    let mut trace = String::from(
        "instance,mode,restart,iter,time_s,rmp_obj,lower_bound,min_rc,n_cols,n_active_doi\n",
    );
    let mut reports: Vec<InstanceReport> = Vec::new();

    for inst in &instances {
        let mut report = InstanceReport {
            name: inst.name().to_string(),
            n: inst.n_customers(),
            kappa: args.kappa.unwrap_or_else(|| inst.vehicle_bound()),
            outcomes: BTreeMap::new(),
            consistent: None,
        };
        for &mode in &modes {
            let cfg = RunConfig {
                mode,
                ng_size: args.ng_size,
                sdoi_k: args.sdoi_k,
                sigma_levels: args.sigma_levels,
                delta: args.delta,
                epsilon: args.epsilon,
                max_cols: args.max_cols,
                fixed_cost: args.fixed_cost,
                vehicle_bound: args.kappa,
                time_limit: args.time_limit.map(Duration::from_secs_f64),
                sdoi_variant: args.sdoi_variant.into(),
                fdoi_variant: args.fdoi_variant.into(),
            };
            let outcome = driver::solve(inst, &cfg)?;
            for row in &outcome.trace.rows {
                let _ = writeln!(
                    trace,
                    "{},{},{},{},{:.4},{:.6},{:.6},{:.6},{},{}",
                    inst.name(),
                    mode,
                    row.restart,
                    row.iteration,
                    row.elapsed,
                    row.rmp_objective,
                    row.lower_bound,
                    row.min_reduced_cost,
                    row.n_columns,
                    row.n_active_doi,
                );
            }
            log::info!(
                "{} [{}]: value {:.3}, {} iterations, {} columns",
                inst.name(),
                mode,
                outcome.final_objective,
                outcome.iterations,
                outcome.n_columns
            );
            report.outcomes.insert(mode.to_string(), outcome);
        }
        report.consistent = check_consistency(&report);
        reports.push(report);
    }

    fs::write(args.out.join("trace.csv"), trace)?;
    fs::write(args.out.join("summary.csv"), summary_csv(&modes, &reports))?;
    print!("{}", console_table(&modes, &reports));
    println!("results written to {}", args.out.display());

    // Success means every run certified and the modes agreed everywhere.
    let uncertified: Vec<String> = reports
        .iter()
        .flat_map(|r| {
            r.outcomes
                .iter()
                .filter(|(_, o)| !o.certified)
                .map(|(m, _)| format!("{} [{m}]", r.name))
        })
        .collect();
    let broken: Vec<&str> = reports
        .iter()
        .filter(|r| r.consistent == Some(false))
        .map(|r| r.name.as_str())
        .collect();
    if !uncertified.is_empty() {
        eprintln!("runs without a clean certification: {}", uncertified.join(", "));
    }
    if !broken.is_empty() {
        eprintln!(
            "certified values disagree across modes on: {}",
            broken.join(", ")
        );
    }
    if !uncertified.is_empty() || !broken.is_empty() {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

/// Some(true)/Some(false) when every run certified; None when timeouts
/// make the comparison meaningless.
fn check_consistency(report: &InstanceReport) -> Option<bool> {
    if report.outcomes.len() < 2 {
        return Some(true);
    }
    if !report.outcomes.values().all(|o| o.certified) {
        return None;
    }
    let mut values = report.outcomes.values().map(|o| o.final_objective);
    let first = values.next().unwrap();
    let ok = values.all(|v| (v - first).abs() <= CONSISTENCY_RTOL * first.abs().max(1.0));
    Some(ok)
}

fn fmt_opt(v: Option<f64>, prec: usize) -> String {
    v.map_or(String::new(), |v| format!("{v:.prec$}"))
}

fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 0 {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

/// Wall-time speedup of `mode` over the plain run (plain time divided by
/// mode time). Withheld unless the final values proved comparable.
fn speedup(report: &InstanceReport, mode: DoiMode) -> Option<f64> {
    if report.consistent != Some(true) {
        return None;
    }
    let base = report.outcomes.get("none")?.wall_time.as_secs_f64();
    let t = report.outcomes.get(&mode.to_string())?.wall_time.as_secs_f64();
    (t > 0.0).then(|| base / t)
}

fn summary_csv(modes: &[DoiMode], reports: &[InstanceReport]) -> String {
    let stabilized: Vec<DoiMode> = modes
        .iter()
        .copied()
        .filter(|&m| m != DoiMode::None)
        .collect();
    let with_speedups = modes.contains(&DoiMode::None);

    let mut header = vec!["instance".to_string(), "n".into(), "kappa".into()];
    for m in modes {
        header.push(format!("value_{m}"));
    }
    for m in modes {
        header.push(format!("iters_{m}"));
    }
    for m in modes {
        header.push(format!("restarts_{m}"));
    }
    for m in modes {
        header.push(format!("time_{m}"));
    }
    if with_speedups {
        for m in &stabilized {
            header.push(format!("speedup_{m}"));
        }
    }
    header.push("consistent".into());
    let mut out = header.join(",");
    out.push('\n');

    for r in reports {
        let mut cells = vec![r.name.clone(), r.n.to_string(), r.kappa.to_string()];
        for m in modes {
            let o = &r.outcomes[&m.to_string()];
            cells.push(format!("{:.6}", o.final_objective));
        }
        for m in modes {
            cells.push(r.outcomes[&m.to_string()].cg_iterations().to_string());
        }
        for m in modes {
            cells.push(r.outcomes[&m.to_string()].restarts.to_string());
        }
        for m in modes {
            cells.push(format!(
                "{:.4}",
                r.outcomes[&m.to_string()].wall_time.as_secs_f64()
            ));
        }
        if with_speedups {
            for &m in &stabilized {
                cells.push(fmt_opt(speedup(r, m), 4));
            }
        }
        cells.push(match r.consistent {
            Some(true) => "yes".into(),
            Some(false) => "no".into(),
            None => "timeout".into(),
        });
        out.push_str(&cells.join(","));
        out.push('\n');
    }

    // Aggregate rows over the numeric comparison columns.
    for (label, agg) in [("mean", mean as fn(&[f64]) -> Option<f64>), ("median", median)] {
        let mut cells = vec![label.to_string(), String::new(), String::new()];
        for _ in modes {
            cells.push(String::new()); // values are not aggregated
        }
        for m in modes {
            let xs: Vec<f64> = reports
                .iter()
                .map(|r| r.outcomes[&m.to_string()].cg_iterations() as f64)
                .collect();
            cells.push(fmt_opt(agg(&xs), 2));
        }
        for m in modes {
            let xs: Vec<f64> = reports
                .iter()
                .map(|r| r.outcomes[&m.to_string()].restarts as f64)
                .collect();
            cells.push(fmt_opt(agg(&xs), 2));
        }
        for m in modes {
            let xs: Vec<f64> = reports
                .iter()
                .map(|r| r.outcomes[&m.to_string()].wall_time.as_secs_f64())
                .collect();
            cells.push(fmt_opt(agg(&xs), 4));
        }
        if with_speedups {
            for &m in &stabilized {
                let xs: Vec<f64> = reports.iter().filter_map(|r| speedup(r, m)).collect();
                cells.push(fmt_opt(agg(&xs), 4));
            }
        }
        cells.push(String::new());
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

fn console_table(modes: &[DoiMode], reports: &[InstanceReport]) -> String {
    let with_speedups = modes.contains(&DoiMode::None);
    let mut head = vec![
        "instance".to_string(),
        "n".into(),
        "K".into(),
        "value".into(),
    ];
    for m in modes {
        head.push(format!("iters[{m}]"));
    }
    for m in modes {
        head.push(format!("time[{m}]"));
    }
    let mut rows: Vec<Vec<String>> = vec![head];

    for r in reports {
        let any = r.outcomes.values().next().unwrap();
        let mut row = vec![
            r.name.clone(),
            r.n.to_string(),
            r.kappa.to_string(),
            format!("{:.2}", any.final_objective),
        ];
        for &m in modes {
            let o = &r.outcomes[&m.to_string()];
            let mut cell = o.cg_iterations().to_string();
            if o.timed_out {
                cell.push_str(" (t/o)");
            }
            row.push(cell);
        }
        for &m in modes {
            let o = &r.outcomes[&m.to_string()];
            let mut cell = format!("{:.2}", o.wall_time.as_secs_f64());
            if with_speedups && m != DoiMode::None && !o.timed_out {
                match speedup(r, m) {
                    Some(s) => {
                        let _ = write!(cell, " ({s:.1}x)");
                    }
                    None => cell.push_str(" (-)"),
                }
            }
            row.push(cell);
        }
        rows.push(row);
    }

    for (label, agg) in [("mean", mean as fn(&[f64]) -> Option<f64>), ("median", median)] {
        let mut row = vec![label.to_string(), String::new(), String::new(), String::new()];
        for &m in modes {
            let iters: Vec<f64> = reports
                .iter()
                .map(|r| r.outcomes[&m.to_string()].cg_iterations() as f64)
                .collect();
            row.push(fmt_opt(agg(&iters), 1));
        }
        for &m in modes {
            let times: Vec<f64> = reports
                .iter()
                .map(|r| r.outcomes[&m.to_string()].wall_time.as_secs_f64())
                .collect();
            let mut cell = fmt_opt(agg(&times), 2);
            if with_speedups && m != DoiMode::None {
                let sp: Vec<f64> = reports.iter().filter_map(|r| speedup(r, m)).collect();
                if let Some(s) = agg(&sp) {
                    let _ = write!(cell, " ({s:.1}x)");
                }
            }
            row.push(cell);
        }
        rows.push(row);
    }

    let cols = rows[0].len();
    let mut widths = vec![0usize; cols];
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if j > 0 {
                out.push_str("  ");
            }
            if j == 0 {
                let _ = write!(out, "{cell:<width$}", width = widths[j]);
            } else {
                let _ = write!(out, "{cell:>width$}", width = widths[j]);
            }
        }
        out.push('\n');
        if i == 0 {
            let total = widths.iter().sum::<usize>() + 2 * (cols - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}
