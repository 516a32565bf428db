//! Monte Carlo comparison of the 2-cycle and all-cycles bound systems.
//!
//! Each replication draws a study, builds both inequality systems for every
//! price-increase counterfactual and records per-good widths, coverage of the
//! true counterfactual share and timings. Replications are independent jobs
//! seeded by `derive_seed(base_seed, [M, replication])`, so results do not
//! depend on scheduling.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dgp::{generate_study, DgpConfig, Family, GeneratedStudy};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{build_weights, floyd_warshall};
use crate::ineq::{build_sharp_system, build_two_cycle_system};
use crate::lp::compute_bounds;
use crate::model::Method;
use crate::rng::{derive_seed, RNG_ALGORITHM};

/// Slack allowed when checking that a true share lies within its bounds.
pub const COVERAGE_TOL: f64 = 1e-9;
/// Slack allowed when checking that all-cycles widths never exceed 2-cycle widths.
pub const DOMINANCE_TOL: f64 = 1e-9;
/// Fewest probit draws accepted for experiment use.
pub const MIN_EXPERIMENT_PROBIT_DRAWS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Template; `num_markets` and `seed` are overwritten per replication.
    pub dgp: DgpConfig,
    pub m_list: Vec<usize>,
    pub num_sims: usize,
    pub methods: Vec<Method>,
    pub base_seed: u64,
    pub execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dgp: DgpConfig::default(),
            m_list: vec![200, 500, 1000],
            num_sims: 100,
            methods: vec![Method::TwoCycle, Method::AllCycles],
            base_seed: 20_170_101,
            execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_sims == 0 {
            return Err(Error::InvalidConfig("num_sims must be at least 1".into()));
        }
        if let Some(m) = self.m_list.iter().find(|&&m| m < 2) {
            return Err(Error::InvalidConfig(format!("market counts must be >= 2, got {m}")));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if self.methods.contains(&Method::Oracle) {
            return Err(Error::InvalidConfig(
                "the enumeration oracle is not available in experiments".into(),
            ));
        }
        if self.dgp.family == Family::Probit
            && (self.dgp.probit_draws < MIN_EXPERIMENT_PROBIT_DRAWS
                || self.dgp.truth_draws < MIN_EXPERIMENT_PROBIT_DRAWS)
        {
            return Err(Error::InvalidConfig(format!(
                "probit experiments need at least {MIN_EXPERIMENT_PROBIT_DRAWS} draws"
            )));
        }
        let mut probe = self.dgp.clone();
        probe.num_markets = self.m_list.first().copied().unwrap_or(2);
        probe.validate()
    }

    /// Methods in canonical order without duplicates.
    pub fn method_list(&self) -> Vec<Method> {
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
}

/// Aggregate for one `(M, counterfactual, method, good)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub markets: usize,
    /// 1-based good whose price rises.
    pub cf_good: usize,
    pub method: Method,
    /// 1-based good whose share is bounded.
    pub good: usize,
    pub mean_width: f64,
    /// Across-replication standard deviation, `S - 1` denominator; 0 with fewer than two.
    pub sd_width: f64,
    pub coverage: f64,
    pub failures: usize,
    pub mean_seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominanceSummary {
    /// Per-replication, per-good width comparisons performed.
    pub comparisons: usize,
    pub violations: usize,
    /// Largest `width_all_cycles - width_two_cycle` seen.
    pub max_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub family: Family,
    pub num_goods: usize,
    pub num_sims: usize,
    pub m_list: Vec<usize>,
    pub methods: Vec<Method>,
    pub cells: Vec<CellStats>,
    /// Present when both methods ran.
    pub dominance: Option<DominanceSummary>,
    /// Replications per `M` whose data failed the negative-cycle check.
    pub cm_violations: Vec<usize>,
    /// Smallest `min_cycle_slack` over all replications that built the graph.
    pub min_cycle_slack: Option<f64>,
    pub rng_algorithm: String,
}

impl ExperimentReport {
    pub fn cell(&self, markets: usize, cf_good: usize, method: Method, good: usize) -> Option<&CellStats> {
        self.cells.iter().find(|c| {
            c.markets == markets && c.cf_good == cf_good && c.method == method && c.good == good
        })
    }
}

#[derive(Debug, Clone)]
struct MethodOutcome {
    widths: Vec<f64>,
    covered: Vec<bool>,
    seconds: f64,
}

#[derive(Debug, Clone)]
struct Replication {
    /// `[cf_good][method position]`, `None` for a failed cell.
    outcomes: Vec<Vec<Option<MethodOutcome>>>,
    min_cycle_slack: Option<f64>,
    cm_violated: bool,
}

fn replicate(study: &GeneratedStudy, methods: &[Method]) -> Result<Replication> {
    let j = study.data.num_goods();
    let mut apsp = None;
    let mut apsp_seconds = 0.0;
    if methods.contains(&Method::AllCycles) {
        let start = Instant::now();
        let result = floyd_warshall(&build_weights(&study.data));
        apsp_seconds = start.elapsed().as_secs_f64();
        apsp = Some(result);
    }
    let min_cycle_slack = apsp.as_ref().map(|a| a.min_cycle_slack);
    let cm_violated = apsp.as_ref().is_some_and(|a| !a.cyclically_monotone);

    let mut outcomes = Vec::with_capacity(study.counterfactuals.len());
    for cf in &study.counterfactuals {
        let mut row = Vec::with_capacity(methods.len());
        for &method in methods {
            let start = Instant::now();
            let system = match method {
                Method::TwoCycle => Some(build_two_cycle_system(&study.data, &cf.scenario)?),
                Method::AllCycles => {
                    let apsp = apsp.as_ref().expect("apsp computed for all_cycles");
                    match build_sharp_system(&study.data, &cf.scenario, apsp) {
                        Ok(sys) => Some(sys),
                        Err(Error::CyclicMonotonicityViolated { .. }) => None,
                        Err(e) => return Err(e),
                    }
                }
                Method::Oracle => unreachable!("rejected by config validation"),
            };
            let outcome = match system {
                None => None,
                Some(sys) => {
                    let bounds = compute_bounds(&sys, j, Execution::Sequential)?;
                    let mut seconds = start.elapsed().as_secs_f64();
                    if method == Method::AllCycles {
                        seconds += apsp_seconds;
                    }
                    bounds.feasible.then(|| MethodOutcome {
                        widths: bounds.widths(),
                        covered: bounds.covers(&cf.true_share, COVERAGE_TOL),
                        seconds,
                    })
                }
            };
            row.push(outcome);
        }
        outcomes.push(row);
    }
    Ok(Replication {
        outcomes,
        min_cycle_slack,
        cm_violated,
    })
}

/// Runs every replication and aggregates the cell statistics.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    progress: &(dyn Fn(Progress) + Sync),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let methods = cfg.method_list();
    let j = cfg.dgp.num_goods;
    let sims = cfg.num_sims;
    let total = cfg.m_list.len() * sims;
    let done = AtomicUsize::new(0);

    let runs = cfg.execution.map_indexed(total, |job| {
        let markets = cfg.m_list[job / sims];
        let sim = job % sims;
        let dgp = DgpConfig {
            num_markets: markets,
            seed: derive_seed(cfg.base_seed, &[markets as u64, sim as u64]),
            ..cfg.dgp.clone()
        };
        let rep = generate_study(&dgp).and_then(|study| replicate(&study, &methods));
        let completed = done.fetch_add(1, Ordering::SeqCst) + 1;
        progress(Progress { completed, total });
        rep
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    let mut cm_violations = Vec::with_capacity(cfg.m_list.len());
    let mut min_cycle_slack: Option<f64> = None;
    let both = methods.contains(&Method::TwoCycle) && methods.contains(&Method::AllCycles);
    let mut dominance = DominanceSummary {
        comparisons: 0,
        violations: 0,
        max_excess: f64::NEG_INFINITY,
    };

    for (mi, &markets) in cfg.m_list.iter().enumerate() {
        let reps = &runs[mi * sims..(mi + 1) * sims];
        cm_violations.push(reps.iter().filter(|r| r.cm_violated).count());
        for slack in reps.iter().filter_map(|r| r.min_cycle_slack) {
            min_cycle_slack = Some(min_cycle_slack.map_or(slack, |m| m.min(slack)));
        }

        for cf in 0..j {
            for (pos, &method) in methods.iter().enumerate() {
                let ok: Vec<&MethodOutcome> =
                    reps.iter().filter_map(|r| r.outcomes[cf][pos].as_ref()).collect();
                let failures = sims - ok.len();
                let mean_seconds = mean(ok.iter().map(|o| o.seconds));
                for good in 0..j {
                    let widths: Vec<f64> = ok.iter().map(|o| o.widths[good]).collect();
                    let covered = ok.iter().filter(|o| o.covered[good]).count();
                    cells.push(CellStats {
                        markets,
                        cf_good: cf + 1,
                        method,
                        good: good + 1,
                        mean_width: mean(widths.iter().copied()).unwrap_or(f64::NAN),
                        sd_width: sample_sd(&widths),
                        coverage: if ok.is_empty() {
                            f64::NAN
                        } else {
                            covered as f64 / ok.len() as f64
                        },
                        failures,
                        mean_seconds,
                    });
                }
            }

            if both {
                let two = methods.iter().position(|&m| m == Method::TwoCycle).unwrap();
                let all = methods.iter().position(|&m| m == Method::AllCycles).unwrap();
                for r in reps {
                    if let (Some(t), Some(a)) = (&r.outcomes[cf][two], &r.outcomes[cf][all]) {
                        for (wt, wa) in t.widths.iter().zip(&a.widths) {
                            let excess = wa - wt;
                            dominance.comparisons += 1;
                            dominance.max_excess = dominance.max_excess.max(excess);
                            if excess > DOMINANCE_TOL {
                                dominance.violations += 1;
                            }
                        }
                    }
                }
            }
        }
    }

    Ok(ExperimentReport {
        family: cfg.dgp.family,
        num_goods: j,
        num_sims: sims,
        m_list: cfg.m_list.clone(),
        methods,
        cells,
        dominance: both.then_some(dominance),
        cm_violations,
        min_cycle_slack,
        rng_algorithm: RNG_ALGORITHM.to_string(),
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Per-`(M, method)` mean wall-clock seconds, averaged over counterfactuals.
pub fn timing_summary(report: &ExperimentReport) -> BTreeMap<(usize, Method), f64> {
    let mut acc: BTreeMap<(usize, Method), (f64, usize)> = BTreeMap::new();
    for c in report.cells.iter().filter(|c| c.good == 1) {
        if let Some(s) = c.mean_seconds {
            let e = acc.entry((c.markets, c.method)).or_default();
            e.0 += s;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}
