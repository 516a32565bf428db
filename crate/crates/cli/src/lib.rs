//! Command implementations behind the `cyclebounds` binary.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure or internal error |
//! | 2 | input or configuration failed validation |
//! | 3 | data violate cyclic monotonicity and `--allow-cm-violation` was not given |
//! | 4 | a bound LP was infeasible |

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use cyclebounds::bench::{loglog_slope, time_scaling, Stage};
use cyclebounds::experiment::{timing_summary, DominanceSummary, Progress};
use cyclebounds::ineq::{build_sharp_system_unchecked, Provenance};
use cyclebounds::io::{parse_experiment_config, parse_market_file, parse_markets_csv, parse_scenario_arg, MarketFile, SCHEMA_VERSION};
use cyclebounds::report::{emit_report, EmitOptions, ReportFormat};
use cyclebounds::rng::RNG_ALGORITHM;
use cyclebounds::{
    build_two_cycle_system, build_weights, compute_bounds, enumerate_all_cycles_oracle,
    floyd_warshall, run_experiment, Error, Execution, ExperimentConfig, Method,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_CM_VIOLATION: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::CyclicMonotonicityViolated { .. } => EXIT_CM_VIOLATION,
        Error::Infeasible => EXIT_INFEASIBLE,
        Error::Unbounded | Error::PivotLimit(_) => EXIT_IO,
        _ => EXIT_INVALID,
    }
}

/// Writes `contents` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct BoundsArgs {
    pub input: PathBuf,
    /// Extra counterfactuals, `name=d1,...,dJ`.
    pub counterfactuals: Vec<String>,
    pub method: Method,
    pub allow_cm_violation: bool,
    /// Stdout when absent.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct CmDiagnostic {
    cyclically_monotone: bool,
    min_cycle_slack: f64,
    negative_cycle_markets: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct GoodBounds {
    good: usize,
    lower: f64,
    upper: f64,
}

#[derive(Debug, Serialize)]
struct ConstraintRecord {
    l1: usize,
    l_star: usize,
    rhs: f64,
}

#[derive(Debug, Serialize)]
struct ScenarioBounds {
    name: String,
    feasible: bool,
    goods: Vec<GoodBounds>,
    constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Serialize)]
struct BoundsOutput {
    schema_version: u32,
    method: Method,
    num_goods: usize,
    num_markets: usize,
    cyclic_monotonicity: CmDiagnostic,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    scenarios: Vec<ScenarioBounds>,
}

fn load_markets(args: &BoundsArgs) -> Result<MarketFile, Error> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| Error::Parse(format!("{}: {e}", args.input.display())))?;
    let mut file = if args.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        MarketFile {
            data: parse_markets_csv(&text)?,
            scenarios: Vec::new(),
        }
    } else {
        parse_market_file(&text)?
    };
    for arg in &args.counterfactuals {
        let (name, scen) = parse_scenario_arg(arg, file.data.num_goods())?;
        if file.scenarios.iter().any(|(n, _)| *n == name) {
            return Err(Error::Parse(format!("duplicate counterfactual name `{name}`")));
        }
        file.scenarios.push((name, scen));
    }
    if file.scenarios.is_empty() {
        return Err(Error::Parse("no counterfactual scenarios given".into()));
    }
    Ok(file)
}

/// `bounds`: per-scenario, per-good bounds with provenance and the
/// cyclic-monotonicity diagnostic.
pub fn cmd_bounds(args: &BoundsArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let file = match load_markets(args) {
        Ok(f) => f,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let data = &file.data;
    let j = data.num_goods();

    let apsp = floyd_warshall(&build_weights(data));
    let mut warning = None;
    if !apsp.cyclically_monotone {
        let msg = format!(
            "data violate cyclic monotonicity: min_cycle_slack = {:.6e}, markets on negative cycles: {:?}",
            apsp.min_cycle_slack, apsp.negative_cycle_markets
        );
        if !args.allow_cm_violation {
            let _ = writeln!(err, "error: {msg}");
            let _ = writeln!(err, "hint: pass --allow-cm-violation to compute bounds anyway");
            return EXIT_CM_VIOLATION;
        }
        let _ = writeln!(err, "warning: {msg}");
        warning = Some(format!("WARNING: {msg}; bounds may be empty or invalid"));
    }

    let mut scenarios = Vec::with_capacity(file.scenarios.len());
    let mut any_infeasible = false;
    for (name, scen) in &file.scenarios {
        let system = match args.method {
            Method::TwoCycle => build_two_cycle_system(data, scen),
            Method::AllCycles => build_sharp_system_unchecked(data, scen, &apsp, Execution::Parallel),
            Method::Oracle => enumerate_all_cycles_oracle(data, scen),
        };
        let result = system.and_then(|sys| compute_bounds(&sys, j, Execution::Parallel).map(|b| (sys, b)));
        let (system, bounds) = match result {
            Ok(r) => r,
            Err(e) => {
                let _ = writeln!(err, "error: scenario `{name}`: {e}");
                return exit_code(&e);
            }
        };
        if !bounds.feasible {
            any_infeasible = true;
            let _ = writeln!(err, "error: scenario `{name}`: the inequality system is infeasible");
        }
        scenarios.push(ScenarioBounds {
            name: name.clone(),
            feasible: bounds.feasible,
            goods: (0..j)
                .filter(|_| bounds.feasible)
                .map(|g| GoodBounds {
                    good: g + 1,
                    lower: bounds.lower[g],
                    upper: bounds.upper[g],
                })
                .collect(),
            constraints: system
                .provenance
                .iter()
                .zip(&system.constraints)
                .map(|(p, c): (&Provenance, _)| ConstraintRecord {
                    l1: p.l1,
                    l_star: p.l_star,
                    rhs: c.b,
                })
                .collect(),
        });
    }

    let output = BoundsOutput {
        schema_version: SCHEMA_VERSION,
        method: args.method,
        num_goods: j,
        num_markets: data.num_markets(),
        cyclic_monotonicity: CmDiagnostic {
            cyclically_monotone: apsp.cyclically_monotone,
            min_cycle_slack: apsp.min_cycle_slack,
            negative_cycle_markets: apsp.negative_cycle_markets.clone(),
        },
        warning,
        scenarios,
    };
    let mut text = serde_json::to_string_pretty(&output).expect("bounds output serializes");
    text.push('\n');
    let written = match &args.output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => out.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: writing output: {e}");
        return EXIT_IO;
    }
    if any_infeasible {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    }
}

#[derive(Debug, Clone)]
pub struct SimulateArgs {
    /// Built-in defaults when absent.
    pub config: Option<PathBuf>,
    pub output_dir: PathBuf,
    /// Also write wall-clock means into the CSV (breaks byte reproducibility).
    pub timings_in_csv: bool,
    pub quiet: bool,
}

#[derive(Debug, Serialize)]
struct TimingRecord {
    markets: usize,
    method: Method,
    mean_seconds: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    schema_version: u32,
    tool_version: &'static str,
    config: &'a ExperimentConfig,
    base_seed: u64,
    rng_algorithm: &'static str,
    started_unix_seconds: u64,
    wall_clock_seconds: f64,
    timings: Vec<TimingRecord>,
    dominance: Option<DominanceSummary>,
    cm_violations: &'a [usize],
    min_cycle_slack: Option<f64>,
    files: [&'static str; 2],
}

pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_MD: &str = "report.md";
pub const MANIFEST: &str = "manifest.json";

/// `simulate`: runs the Monte Carlo study and writes the CSV and markdown
/// reports plus a run manifest into `output_dir`.
pub fn cmd_simulate(args: &SimulateArgs, err: &mut dyn Write) -> i32 {
    let cfg = match &args.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", path.display());
                    return EXIT_INVALID;
                }
            };
            match parse_experiment_config(&text) {
                Ok(c) => c,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", path.display());
                    return EXIT_INVALID;
                }
            }
        }
        None => ExperimentConfig::default(),
    };

    if let Err(e) = std::fs::create_dir_all(&args.output_dir) {
        let _ = writeln!(err, "error: {}: {e}", args.output_dir.display());
        return EXIT_IO;
    }

    let started = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let clock = Instant::now();
    let quiet = args.quiet;
    let progress = move |p: Progress| {
        if !quiet {
            eprint!("\rreplications {}/{}", p.completed, p.total);
            if p.completed == p.total {
                eprintln!();
            }
        }
    };
    let report = match run_experiment(&cfg, &progress) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let wall = clock.elapsed().as_secs_f64();

    let csv = emit_report(
        &report,
        ReportFormat::Csv,
        EmitOptions {
            timings: args.timings_in_csv,
        },
    );
    let md = emit_report(&report, ReportFormat::Markdown, EmitOptions::default());
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION"),
        config: &cfg,
        base_seed: cfg.base_seed,
        rng_algorithm: RNG_ALGORITHM,
        started_unix_seconds: started,
        wall_clock_seconds: wall,
        timings: timing_summary(&report)
            .into_iter()
            .map(|((markets, method), mean_seconds)| TimingRecord {
                markets,
                method,
                mean_seconds,
            })
            .collect(),
        dominance: report.dominance,
        cm_violations: &report.cm_violations,
        min_cycle_slack: report.min_cycle_slack,
        files: [REPORT_CSV, REPORT_MD],
    };
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');

    for (name, body) in [
        (REPORT_CSV, csv.as_bytes()),
        (REPORT_MD, md.as_bytes()),
        (MANIFEST, manifest_text.as_bytes()),
    ] {
        if let Err(e) = write_atomic(&args.output_dir.join(name), body) {
            let _ = writeln!(err, "error: writing {name}: {e}");
            return EXIT_IO;
        }
    }
    EXIT_OK
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub m_list: Vec<usize>,
    pub repeats: usize,
    pub end_to_end: bool,
    pub seed: u64,
}

/// `bench`: median wall-clock per market count and the fitted log-log slope.
pub fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if args.m_list.is_empty() {
        let _ = writeln!(err, "error: at least one market count is required");
        return EXIT_INVALID;
    }
    let stage = if args.end_to_end { Stage::EndToEnd } else { Stage::System };
    let rows = match time_scaling(&args.m_list, args.repeats, stage, args.seed) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let _ = writeln!(out, "{:>8}  {:>14}", "M", "median_seconds");
    for r in &rows {
        let _ = writeln!(out, "{:>8}  {:>14.6}", r.markets, r.median_seconds);
    }
    match loglog_slope(&rows) {
        Some(s) => {
            let _ = writeln!(out, "log-log slope: {s:.3}");
        }
        None => {
            let _ = writeln!(out, "log-log slope: n/a (fewer than two market counts)");
        }
    }
    EXIT_OK
}
