//! `homoment`: defect tables, moment-based fitting, rank tests and simulation
//! for homoscedastic Gaussian mixtures.

mod input;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use homoment::estimate::{fit_1d, fit_k2_order, sample_cumulants, Estimate, UnivariateMoments};
use homoment::geometry::{
    ambient_dim, check_reports, defect_table, format_table, parameter_count, table1_cells, DefectReport, Mismatch,
    RankEngine, RankOptions, MAX_D, MAX_N,
};
use homoment::models::{sample_mixture, HomoscedasticParams};
use homoment::ranktest::{estimate_components, estimate_components_sample, sample_moments_1d, ComponentCount};
use serde_json::{json, Value};

use input::{parse_list, parse_range, read_csv, InputError, Values};

const SCHEMA: &str = "homoment/1";

const EXIT_INPUT: u8 = 2;
const EXIT_MODEL: u8 = 3;
const EXIT_CHECK: u8 = 4;

#[derive(Parser)]
#[command(name = "homoment", version, about = "Moment methods for homoscedastic Gaussian mixtures")]
struct Cli {
    /// Seed for every randomized step
    #[arg(long, global = true, env = "HOMOMENT_SEED", default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Engine {
    Exact,
    Modular,
}

#[derive(Subcommand)]
enum Command {
    /// Secant dimensions and defects over a grid of (n, k, d)
    DefectTable {
        /// Dimensions: N, A..B (inclusive) or a comma list
        #[arg(long, value_parser = parse_range)]
        n: Values,
        /// Component counts; by default every k up to the first with par ≥ N
        #[arg(long, value_parser = parse_range)]
        k: Option<Values>,
        /// Moment orders
        #[arg(long, value_parser = parse_range, default_value = "3")]
        d: Values,
        /// Compare against the reference table and the d = 3 classification
        #[arg(long)]
        check: bool,
        #[arg(long, value_enum, default_value = "table")]
        format: Format,
        #[arg(long, value_enum, default_value = "exact")]
        engine: Engine,
    },
    /// Two-component fit from a CSV sample
    Fit2 {
        #[arg(long)]
        input: PathBuf,
        /// Highest cumulant order used (4 or 5)
        #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u8).range(4..=5))]
        order: u8,
    },
    /// Univariate k-component fit
    Fit1d {
        #[arg(long)]
        k: usize,
        /// Raw moments m_1,m_2,… (comma separated)
        #[arg(long, conflicts_with = "input", required_unless_present = "input", allow_hyphen_values = true)]
        moments: Option<String>,
        /// One-column CSV sample
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Estimate the number of components by secant membership
    RankTest {
        #[arg(long)]
        kmax: usize,
        #[arg(long, conflicts_with = "input", required_unless_present = "input", allow_hyphen_values = true)]
        moments: Option<String>,
        /// One-column CSV sample; thresholds are calibrated by bootstrap
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        replicates: usize,
    },
    /// Draw a sample from a homoscedastic mixture
    Simulate {
        /// Parameters as a JSON file or inline JSON: {"means", "weights", "cov"}
        #[arg(long)]
        params: String,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        /// Output CSV path; stdout by default
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// A failed internal consistency check.
#[derive(Debug)]
struct CheckFailed(usize);

impl std::fmt::Display for CheckFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} mismatches against reference values", self.0)
    }
}

impl std::error::Error for CheckFailed {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => report(&e),
    }
}

fn report(e: &anyhow::Error) -> ExitCode {
    let (code, exit) = if let Some(l) = e.downcast_ref::<homoment::Error>() {
        (l.code(), if l.is_input_error() { EXIT_INPUT } else { EXIT_MODEL })
    } else if let Some(i) = e.downcast_ref::<InputError>() {
        (i.code, EXIT_INPUT)
    } else if e.downcast_ref::<CheckFailed>().is_some() {
        ("CHECK_FAILED", EXIT_CHECK)
    } else if e.downcast_ref::<serde_json::Error>().is_some() {
        ("INPUT_MALFORMED", EXIT_INPUT)
    } else if e.downcast_ref::<std::io::Error>().is_some() {
        ("IO_ERROR", EXIT_INPUT)
    } else {
        ("INTERNAL", EXIT_CHECK)
    };
    let body = json!({ "schema": SCHEMA, "error": { "code": code, "message": format!("{e:#}") } });
    eprintln!("{body}");
    ExitCode::from(exit)
}

fn print_json(v: &Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::DefectTable { n, k, d, check, format, engine } => {
            cmd_defect_table(&n.0, k.as_ref().map(|k| k.0.as_slice()), &d.0, check, format, engine, seed)
        }
        Command::Fit2 { input, order } => cmd_fit2(&input, order as usize),
        Command::Fit1d { k, moments, input } => cmd_fit1d(k, moments.as_deref(), input.as_deref()),
        Command::RankTest { kmax, moments, input, replicates } => cmd_rank_test(kmax, moments.as_deref(), input.as_deref(), replicates, seed),
        Command::Simulate { params, count, output } => cmd_simulate(&params, count, output.as_deref(), seed),
    }
}

fn cells(ns: &[usize], ks: Option<&[usize]>, ds: &[usize]) -> Result<Vec<(usize, usize, usize)>> {
    if let Some(&n) = ns.iter().find(|&&n| n == 0 || n > MAX_N) {
        return Err(homoment::Error::Envelope(format!("n = {n} outside 1..={MAX_N}")).into());
    }
    if let Some(&d) = ds.iter().find(|&&d| d < 2 || d > MAX_D) {
        return Err(homoment::Error::Envelope(format!("d = {d} outside 2..={MAX_D}")).into());
    }
    let mut out = Vec::new();
    for &d in ds {
        match ks {
            Some(ks) => out.extend(ns.iter().flat_map(|&n| ks.iter().map(move |&k| (n, k, d)))),
            None if d == 3 => out.extend(table1_cells(ns.iter().copied())),
            None => {
                for &n in ns {
                    let mut k = if n == 1 { 1 } else { 2 };
                    loop {
                        out.push((n, k, d));
                        if parameter_count(n, k) >= ambient_dim(n, d) {
                            break;
                        }
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn cmd_defect_table(
    ns: &[usize],
    ks: Option<&[usize]>,
    ds: &[usize],
    check: bool,
    format: Format,
    engine: Engine,
    seed: u64,
) -> Result<ExitCode> {
    if ns.is_empty() {
        return Err(InputError::new("INPUT_MISSING", "--n is required").into());
    }
    let cells = cells(ns, ks, ds)?;
    let opts = RankOptions {
        engine: match engine {
            Engine::Exact => RankEngine::Exact,
            Engine::Modular => RankEngine::Modular,
        },
        ..RankOptions::default()
    };
    let reports = defect_table(&cells, seed, &opts)?;
    let mismatches = if check { check_reports(&reports) } else { Vec::new() };
    match format {
        Format::Table => print!("{}", format_table(&reports)),
        Format::Csv => print!("{}", reports_csv(&reports)?),
        Format::Json => print_json(&json!({
            "schema": SCHEMA,
            "command": "defect-table",
            "seed": seed,
            "rows": reports,
            "check": check.then(|| json!({ "rows": reports.len(), "mismatches": mismatches })),
        }))?,
    }
    if check {
        for m in &mismatches {
            eprintln!("{}", describe(m));
        }
        eprintln!("check: {} rows, {} mismatches", reports.len(), mismatches.len());
        if !mismatches.is_empty() {
            return Err(CheckFailed(mismatches.len()).into());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn describe(m: &Mismatch) -> String {
    format!("mismatch ({}, {}, {}) {} {}: expected {}, got {}", m.n, m.k, m.d, m.source, m.field, m.expected, m.got)
}

fn reports_csv(reports: &[DefectReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["n", "k", "d", "par", "N", "exp", "dim", "delta", "Delta"])?;
    for r in reports {
        w.write_record([r.n, r.k, r.d, r.par, r.ambient, r.expected, r.dim, r.defect, r.delta_fiber].map(|v| v.to_string()))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn cmd_fit2(path: &std::path::Path, order: usize) -> Result<ExitCode> {
    let data = read_csv(path)?;
    let n = data[0].len();
    let estimates: Vec<Estimate> = if n == 1 {
        let col: Vec<f64> = data.iter().map(|r| r[0]).collect();
        vec![fit_1d(&sample_moments_1d(&col, 4)?, 2)?]
    } else {
        let cumulants = sample_cumulants(&data, order)?;
        fit_k2_order(&cumulants, order)?
    };
    print_json(&json!({
        "schema": SCHEMA,
        "command": "fit2",
        "nvars": n,
        "samples": data.len(),
        "order": if n == 1 { 4 } else { order },
        "method": if n == 1 { "univariate" } else { "two-component" },
        "estimates": estimates,
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn univariate_input(moments: Option<&str>, input: Option<&std::path::Path>, order: usize) -> Result<(UnivariateMoments<f64>, Option<Vec<f64>>)> {
    match (moments, input) {
        (Some(m), _) => Ok((UnivariateMoments::new(parse_list(m)?), None)),
        (None, Some(p)) => {
            let data = read_csv(p)?;
            if data[0].len() != 1 {
                return Err(InputError::new("INPUT_MALFORMED", format!("expected one column, found {}", data[0].len())).into());
            }
            let col: Vec<f64> = data.into_iter().map(|r| r[0]).collect();
            Ok((sample_moments_1d(&col, order)?, Some(col)))
        }
        (None, None) => Err(InputError::new("INPUT_MISSING", "either --moments or --input is required").into()),
    }
}

fn cmd_fit1d(k: usize, moments: Option<&str>, input: Option<&std::path::Path>) -> Result<ExitCode> {
    let (m, _) = univariate_input(moments, input, 2 * k)?;
    let estimate = fit_1d(&m, k)?;
    print_json(&json!({ "schema": SCHEMA, "command": "fit1d", "k": k, "estimate": estimate }))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_rank_test(kmax: usize, moments: Option<&str>, input: Option<&std::path::Path>, replicates: usize, seed: u64) -> Result<ExitCode> {
    let (m, data) = univariate_input(moments, input, 2 * kmax + 1)?;
    let count: ComponentCount = match data {
        Some(col) => estimate_components_sample(&col, kmax, replicates, seed)?,
        None => estimate_components(&m, kmax)?,
    };
    let accepted = count.k <= kmax;
    print_json(&json!({
        "schema": SCHEMA,
        "command": "rank-test",
        "kmax": kmax,
        "k_hat": count.k,
        "accepted": accepted,
        "verdicts": count.verdicts,
    }))?;
    Ok(if accepted { ExitCode::SUCCESS } else { ExitCode::from(EXIT_MODEL) })
}

fn cmd_simulate(params: &str, count: usize, output: Option<&std::path::Path>, seed: u64) -> Result<ExitCode> {
    let text = if params.trim_start().starts_with('{') {
        params.to_string()
    } else {
        std::fs::read_to_string(params).map_err(|e| InputError::new("INPUT_UNREADABLE", format!("{params}: {e}")))?
    };
    let p: HomoscedasticParams<f64> = serde_json::from_str(&text).context("parsing mixture parameters")?;
    let rows = sample_mixture(&p, count, seed)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record((1..=p.nvars()).map(|i| format!("x{i}")))?;
    for r in &rows {
        w.write_record(r.iter().map(|x| x.to_string()))?;
    }
    let bytes = w.into_inner()?;
    match output {
        Some(path) => std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(ExitCode::SUCCESS)
}
