//! Half-space systems `a's <= b` on the unknown counterfactual share `s`.
//!
//! Every constraint is indexed by the first market `l1` of a cycle
//! `l1 -> l2 -> ... -> l_{K-1} -> M+1 -> l1`, with `a = delta_{l1} - delta_{M+1}`
//! and `b` the summed weight of the path `l1 -> ... -> l_{K-1}` plus the closing
//! edge `(delta_{l_{K-1}} - delta_{M+1})'s_{l_{K-1}}`. The three builders differ
//! only in which paths they minimize `b` over.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::ApspResult;
use crate::model::{diff_dot, MarketData, Method, Scenario};

/// Largest market count the exhaustive enumeration accepts.
pub const ORACLE_MAX_MARKETS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub a: Vec<f64>,
    pub b: f64,
}

/// Which path produced a constraint. Market indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub l1: usize,
    /// Last observed market before the counterfactual on the minimizing path.
    pub l_star: usize,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalitySystem {
    pub num_goods: usize,
    pub constraints: Vec<Constraint>,
    pub provenance: Vec<Provenance>,
}

impl InequalitySystem {
    pub fn empty(num_goods: usize) -> Self {
        Self {
            num_goods,
            constraints: Vec::new(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    pub fn rhs(&self) -> Vec<f64> {
        self.constraints.iter().map(|c| c.b).collect()
    }

    pub fn method(&self) -> Option<Method> {
        self.provenance.first().map(|p| p.method)
    }

    /// Largest violation `a's - b` over all constraints (nonpositive when `s` is feasible).
    pub fn max_violation(&self, share: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| crate::model::dot(&c.a, share) - c.b)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_dims(data: &MarketData, scen: &Scenario) -> Result<()> {
    if scen.num_goods() != data.num_goods() {
        return Err(Error::dimension(
            "counterfactual delta",
            data.num_goods(),
            scen.num_goods(),
        ));
    }
    Ok(())
}

fn lhs(data: &MarketData, scen: &Scenario, l1: usize) -> Vec<f64> {
    data.market(l1)
        .delta
        .iter()
        .zip(scen.delta())
        .map(|(a, b)| a - b)
        .collect()
}

/// `(delta_l - delta_{M+1})'s_l` for every market `l`.
fn closing_edges(data: &MarketData, scen: &Scenario) -> Vec<f64> {
    data.markets()
        .iter()
        .map(|m| diff_dot(&m.delta, scen.delta(), &m.share))
        .collect()
}

fn assemble(
    data: &MarketData,
    scen: &Scenario,
    method: Method,
    rows: Vec<(f64, usize)>,
) -> InequalitySystem {
    let (constraints, provenance) = rows
        .into_iter()
        .enumerate()
        .map(|(l1, (b, l_star))| {
            (
                Constraint {
                    a: lhs(data, scen, l1),
                    b,
                },
                Provenance {
                    l1: l1 + 1,
                    l_star: l_star + 1,
                    method,
                },
            )
        })
        .unzip();
    InequalitySystem {
        num_goods: data.num_goods(),
        constraints,
        provenance,
    }
}

/// The 2-cycle baseline: `(delta_{l1} - delta_{M+1})'s <= (delta_{l1} - delta_{M+1})'s_{l1}`.
pub fn build_two_cycle_system(data: &MarketData, scen: &Scenario) -> Result<InequalitySystem> {
    check_dims(data, scen)?;
    let rows = closing_edges(data, scen)
        .into_iter()
        .enumerate()
        .map(|(l, b)| (b, l))
        .collect();
    Ok(assemble(data, scen, Method::TwoCycle, rows))
}

/// Sharpest constraint per `l1`: `b(l1) = min_l D[l1][l] + (delta_l - delta_{M+1})'s_l`.
///
/// Ties in the minimization go to the smallest `l`. Fails when `apsp` flags a
/// negative cycle; use [`build_sharp_system_unchecked`] to proceed anyway.
pub fn build_sharp_system(
    data: &MarketData,
    scen: &Scenario,
    apsp: &ApspResult,
) -> Result<InequalitySystem> {
    apsp.require_monotone()?;
    build_sharp_system_unchecked(data, scen, apsp, Execution::Sequential)
}

pub fn build_sharp_system_unchecked(
    data: &MarketData,
    scen: &Scenario,
    apsp: &ApspResult,
    exec: Execution,
) -> Result<InequalitySystem> {
    check_dims(data, scen)?;
    let m = data.num_markets();
    if apsp.size() != m {
        return Err(Error::dimension("shortest-path matrix", m, apsp.size()));
    }
    let closing = closing_edges(data, scen);
    let rows = exec.map_indexed(m, |l1| {
        let dist = apsp.dist.row(l1);
        let mut best = (f64::INFINITY, 0);
        for (l, (d, c)) in dist.iter().zip(&closing).enumerate() {
            let rhs = d + c;
            if rhs < best.0 {
                best = (rhs, l);
            }
        }
        best
    });
    Ok(assemble(data, scen, Method::AllCycles, rows))
}

/// Reference implementation: minimizes the cycle sum over every simple path
/// `l1 -> ... -> l_{K-1}` of distinct markets, for `M <= 10`.
pub fn enumerate_all_cycles_oracle(data: &MarketData, scen: &Scenario) -> Result<InequalitySystem> {
    check_dims(data, scen)?;
    let m = data.num_markets();
    if m > ORACLE_MAX_MARKETS {
        return Err(Error::InstanceTooLarge {
            markets: m,
            limit: ORACLE_MAX_MARKETS,
        });
    }
    let closing = closing_edges(data, scen);
    let edge = |i: usize, j: usize| {
        let mi = data.market(i);
        diff_dot(&mi.delta, &data.market(j).delta, &mi.share)
    };

    struct Search<'a, F> {
        edge: &'a F,
        closing: &'a [f64],
        visited: Vec<bool>,
        best: (f64, usize),
    }

    impl<F: Fn(usize, usize) -> f64> Search<'_, F> {
        fn extend(&mut self, at: usize, acc: f64) {
            let rhs = acc + self.closing[at];
            if rhs < self.best.0 || (rhs == self.best.0 && at < self.best.1) {
                self.best = (rhs, at);
            }
            for next in 0..self.closing.len() {
                if !self.visited[next] {
                    self.visited[next] = true;
                    let w = (self.edge)(at, next);
                    self.extend(next, acc + w);
                    self.visited[next] = false;
                }
            }
        }
    }

    let rows = (0..m)
        .map(|l1| {
            let mut search = Search {
                edge: &edge,
                closing: &closing,
                visited: vec![false; m],
                best: (f64::INFINITY, 0),
            };
            search.visited[l1] = true;
            search.extend(l1, 0.0);
            search.best
        })
        .collect();
    Ok(assemble(data, scen, Method::Oracle, rows))
}
