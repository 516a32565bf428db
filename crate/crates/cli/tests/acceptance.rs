//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.
//!
//! The tests share one lock so the timing checks never compete with the
//! Monte Carlo runs for cores.

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use rand::Rng;

use cyclebounds::bench::{loglog_slope, synthetic_study, time_pipeline, time_scaling, Stage};
use cyclebounds::ineq::Constraint;
use cyclebounds::rng::stream;
use cyclebounds::{
    build_sharp_system, build_weights, compute_bounds, enumerate_all_cycles_oracle, floyd_warshall,
    generate_study, run_experiment, DgpConfig, Error, Execution, ExperimentConfig,
    ExperimentReport, Family, LpProblem, Method, Sense,
};

fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict outside libtest's capture and fails on error.
fn verdict(n: u32, name: &str, outcome: Result<String, String>) {
    let line = match &outcome {
        Ok(detail) => format!("acceptance {n} {name}: PASS ({detail})"),
        Err(detail) => format!("acceptance {n} {name}: FAIL ({detail})"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    if let Err(detail) = outcome {
        panic!("criterion {n} failed: {detail}");
    }
}

fn default_experiment(family: Family) -> &'static ExperimentReport {
    static LOGIT: OnceLock<ExperimentReport> = OnceLock::new();
    static PROBIT: OnceLock<ExperimentReport> = OnceLock::new();
    let cell = match family {
        Family::Logit => &LOGIT,
        Family::Probit => &PROBIT,
    };
    cell.get_or_init(|| {
        let mut cfg = ExperimentConfig::default();
        cfg.dgp.family = family;
        let start = Instant::now();
        let rep = run_experiment(&cfg, &|_| {}).expect("default experiment runs");
        let _ = writeln!(
            std::io::stderr(),
            "default {} experiment: {:.1} s",
            family.as_str(),
            start.elapsed().as_secs_f64()
        );
        rep
    })
}

#[test]
fn criterion_1_sharp_system_matches_cycle_enumeration() {
    let _g = serial();
    let start = Instant::now();
    let mut rng = stream(0xA11C);
    let mut worst_rhs = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut outcome = Ok(());
    let mut systems = 0;
    'instances: for i in 0..200u64 {
        let j = rng.random_range(2..=4usize);
        let m = rng.random_range(2..=7usize);
        let cfg = DgpConfig {
            num_goods: j,
            num_markets: m,
            alpha: rng.random_range(0.5..2.0),
            beta: (0..j).map(|_| rng.random_range(0.0..3.0)).collect(),
            seed: i,
            ..DgpConfig::default()
        };
        let study = generate_study(&cfg).unwrap();
        let apsp = floyd_warshall(&build_weights(&study.data));
        for cf in &study.counterfactuals {
            let sharp = build_sharp_system(&study.data, &cf.scenario, &apsp).unwrap();
            let oracle = enumerate_all_cycles_oracle(&study.data, &cf.scenario).unwrap();
            for (a, b) in sharp.rhs().iter().zip(oracle.rhs()) {
                worst_rhs = worst_rhs.max((a - b).abs());
            }
            let bs = compute_bounds(&sharp, j, Execution::Sequential).unwrap();
            let bo = compute_bounds(&oracle, j, Execution::Sequential).unwrap();
            for g in 0..j {
                worst_bound = worst_bound
                    .max((bs.lower[g] - bo.lower[g]).abs())
                    .max((bs.upper[g] - bo.upper[g]).abs());
            }
            systems += 1;
            if worst_rhs > 1e-10 || worst_bound > 1e-8 {
                outcome = Err(format!("instance {i} (M={m}, J={j})"));
                break 'instances;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "{systems} systems, max rhs diff {worst_rhs:.1e}, max bound diff {worst_bound:.1e}, {secs:.2} s"
    );
    let result = match outcome {
        Err(e) => Err(format!("{e}: {detail}")),
        Ok(()) if secs >= 60.0 => Err(format!("too slow: {detail}")),
        Ok(()) => Ok(detail),
    };
    verdict(1, "oracle equivalence", result);
}

fn check_dominance(rep: &ExperimentReport) -> Result<String, String> {
    let d = rep.dominance.ok_or("both methods should have run")?;
    let expected = rep.num_sims * rep.m_list.len() * rep.num_goods * rep.num_goods;
    if rep.cm_violations.iter().any(|&v| v > 0) {
        return Err(format!("cyclic monotonicity failed in {:?} replications", rep.cm_violations));
    }
    if d.comparisons != expected {
        return Err(format!("{} of {expected} comparisons made", d.comparisons));
    }
    if d.violations > 0 {
        return Err(format!("{} violations, max excess {:.3e}", d.violations, d.max_excess));
    }
    Ok(format!(
        "{} {} comparisons, max excess {:.2e}",
        d.comparisons,
        rep.family.as_str(),
        d.max_excess
    ))
}

#[test]
fn criterion_2_all_cycles_never_wider() {
    let _g = serial();
    let logit = check_dominance(default_experiment(Family::Logit));
    let probit = check_dominance(default_experiment(Family::Probit));
    let result = match (logit, probit) {
        (Ok(a), Ok(b)) => Ok(format!("{a}; {b}")),
        (Err(e), _) => Err(format!("logit: {e}")),
        (_, Err(e)) => Err(format!("probit: {e}")),
    };
    verdict(2, "dominance", result);
}

fn min_coverage(rep: &ExperimentReport) -> Result<f64, String> {
    let mut worst = 1.0f64;
    for c in &rep.cells {
        if c.failures > 0 {
            return Err(format!(
                "M={} cf={} {} good {}: {} failed replications",
                c.markets, c.cf_good, c.method, c.good, c.failures
            ));
        }
        worst = worst.min(c.coverage);
    }
    Ok(worst)
}

#[test]
fn criterion_3_bounds_cover_true_shares() {
    let _g = serial();
    let result = min_coverage(default_experiment(Family::Logit)).and_then(|logit| {
        let probit = min_coverage(default_experiment(Family::Probit))?;
        let detail = format!("min cell coverage logit {logit:.3}, probit {probit:.3}");
        if logit < 1.0 {
            Err(format!("logit below 100%: {detail}"))
        } else if probit < 0.99 {
            Err(format!("probit below 99%: {detail}"))
        } else {
            Ok(detail)
        }
    });
    verdict(3, "coverage", result);
}

#[test]
fn criterion_4_logit_data_are_cyclically_monotone() {
    let _g = serial();
    let mut rng = stream(0xC4C4);
    let mut worst = f64::INFINITY;
    let mut bad = 0;
    for i in 0..500u64 {
        let j = rng.random_range(2..=4usize);
        let cfg = DgpConfig {
            num_goods: j,
            num_markets: rng.random_range(2..=60usize),
            alpha: rng.random_range(0.0..3.0),
            beta: (0..j).map(|_| rng.random_range(-2.0..4.0)).collect(),
            price_high: rng.random_range(1.5..6.0),
            seed: 1000 + i,
            ..DgpConfig::default()
        };
        let study = generate_study(&cfg).unwrap();
        let slack = floyd_warshall(&build_weights(&study.data)).min_cycle_slack;
        worst = worst.min(slack);
        if slack < -1e-10 {
            bad += 1;
        }
    }
    let detail = format!("500 instances, min slack {worst:.2e}");
    let result = if bad == 0 {
        Ok(detail)
    } else {
        Err(format!("{bad} instances below -1e-10: {detail}"))
    };
    verdict(4, "cyclic monotonicity", result);
}

#[test]
fn criterion_5_runtime_and_scaling() {
    let _g = serial();
    let study = synthetic_study(1000, 5).unwrap();
    let e2e = time_pipeline(&study, Stage::EndToEnd).unwrap();
    let rows = time_scaling(&[125, 250, 500, 1000], 3, Stage::System, 1).unwrap();
    let slope = loglog_slope(&rows).unwrap();
    let detail = format!("M=1000 end-to-end {e2e:.2} s, log-log slope {slope:.2}");
    let result = if e2e > 60.0 {
        Err(format!("over budget: {detail}"))
    } else if !(2.3..=3.5).contains(&slope) {
        Err(format!("slope out of range: {detail}"))
    } else {
        Ok(detail)
    };
    verdict(5, "performance", result);
}

fn vertex_optimum(p: &LpProblem) -> Option<f64> {
    let j = p.objective.len();
    let mut rows: Vec<(Vec<f64>, f64)> = p.halfspaces.iter().map(|h| (h.a.clone(), h.b)).collect();
    for i in 0..j {
        let mut a = vec![0.0; j];
        a[i] = -1.0;
        rows.push((a, 0.0));
    }
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut best: Option<f64> = None;
    for pick in subsets(rows.len(), j - 1) {
        let mut mat: Vec<Vec<f64>> = pick
            .iter()
            .map(|&r| {
                let mut v = rows[r].0.clone();
                v.push(rows[r].1);
                v
            })
            .collect();
        mat.push(vec![1.0; j + 1]);
        let Some(s) = solve_square(mat) else { continue };
        if rows.iter().all(|(a, b)| dot(a, &s) <= b + 1e-9) {
            let v = dot(&p.objective, &s);
            best = Some(match (best, p.sense) {
                (None, _) => v,
                (Some(b), Sense::Maximize) => b.max(v),
                (Some(b), Sense::Minimize) => b.min(v),
            });
        }
    }
    best
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for first in 0..n {
        for mut rest in subsets(n, k - 1).into_iter().filter(|r| r.first().is_none_or(|&f| f > first)) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Gaussian elimination on an augmented `n x (n+1)` matrix.
fn solve_square(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[p][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, p);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=n {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

#[test]
fn criterion_6_lp_matches_vertex_enumeration() {
    let _g = serial();
    let mut rng = stream(0x1F);
    let mut worst = 0.0f64;
    let (mut feasible, mut infeasible) = (0, 0);
    let mut failure = None;
    for case in 0..500 {
        let j = rng.random_range(1..=3usize);
        let k = rng.random_range(0..=8usize);
        // Mostly anchored at a random simplex point so most cases are feasible.
        let mut anchor: Vec<f64> = (0..j).map(|_| -rng.random_range(1e-3..1.0f64).ln()).collect();
        let total: f64 = anchor.iter().sum();
        anchor.iter_mut().for_each(|x| *x /= total);
        let anchored = rng.random_bool(0.8);
        let halfspaces: Vec<Constraint> = (0..k)
            .map(|_| {
                let a: Vec<f64> = (0..j).map(|_| rng.random_range(-1.0..1.0)).collect();
                let b = if anchored {
                    a.iter().zip(&anchor).map(|(x, y)| x * y).sum::<f64>() + rng.random_range(0.0..0.3)
                } else {
                    rng.random_range(-0.6..0.8)
                };
                Constraint { a, b }
            })
            .collect();
        let sense = if rng.random_bool(0.5) { Sense::Minimize } else { Sense::Maximize };
        let objective: Vec<f64> = (0..j).map(|_| rng.random_range(-1.0..1.0)).collect();
        let p = LpProblem::new(objective, sense, halfspaces).unwrap();
        match (cyclebounds::solve_lp(&p), vertex_optimum(&p)) {
            (Ok(sol), Some(v)) => {
                feasible += 1;
                worst = worst.max((sol.value - v).abs());
                if (sol.value - v).abs() > 1e-8 {
                    failure = Some(format!("case {case}: simplex {} vs vertices {v}", sol.value));
                    break;
                }
            }
            (Err(Error::Infeasible), None) => infeasible += 1,
            (got, want) => {
                failure = Some(format!("case {case}: simplex {got:?} vs vertices {want:?}"));
                break;
            }
        }
    }
    let detail = format!("{feasible} feasible, {infeasible} infeasible, max diff {worst:.1e}");
    let result = match failure {
        None => Ok(detail),
        Some(f) => Err(format!("{f}; {detail}")),
    };
    verdict(6, "LP correctness", result);
}

const DETERMINISM_CONFIG: &str = r#"
schema_version = 1
m_list = [20, 45]
num_sims = 6
base_seed = 77

[dgp]
family = "probit"
probit_draws = 20000
truth_draws = 200000
"#;

fn simulate(config: &Path, out: &Path) -> Vec<u8> {
    let status = Command::new(env!("CARGO_BIN_EXE_cyclebounds"))
        .args(["simulate", "--quiet", "--config"])
        .arg(config)
        .arg("--output-dir")
        .arg(out)
        .status()
        .expect("binary runs");
    assert!(status.success(), "simulate exited with {status}");
    std::fs::read(out.join("report.csv")).unwrap()
}

#[test]
fn criterion_7_simulate_is_byte_reproducible() {
    let _g = serial();
    let dir = tempfile::tempdir().unwrap();
    let parallel = dir.path().join("parallel.toml");
    let sequential = dir.path().join("sequential.toml");
    std::fs::write(&parallel, DETERMINISM_CONFIG).unwrap();
    std::fs::write(
        &sequential,
        DETERMINISM_CONFIG.replace("base_seed = 77", "base_seed = 77\nexecution = \"sequential\""),
    )
    .unwrap();

    let first = simulate(&parallel, &dir.path().join("a"));
    let second = simulate(&parallel, &dir.path().join("b"));
    let serial_run = simulate(&sequential, &dir.path().join("c"));
    let result = if first != second {
        Err("two runs of the same config differ".to_string())
    } else if first != serial_run {
        Err("sequential and parallel execution differ".to_string())
    } else if first.is_empty() {
        Err("empty report".to_string())
    } else {
        Ok(format!("{} identical bytes across 3 runs", first.len()))
    };
    verdict(7, "determinism", result);
}

#[test]
fn two_cycle_only_report_has_no_dominance() {
    let _g = serial();
    let cfg = ExperimentConfig {
        m_list: vec![10],
        num_sims: 2,
        methods: vec![Method::TwoCycle],
        ..ExperimentConfig::default()
    };
    let rep = run_experiment(&cfg, &|_| {}).unwrap();
    assert!(rep.dominance.is_none());
    assert!(rep.cells.iter().all(|c| c.method == Method::TwoCycle));
}
