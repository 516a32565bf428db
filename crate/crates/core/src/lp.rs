//! Linear programs over the share simplex cut by an inequality system.
//!
//! The equality `1's = 1` is eliminated by substituting the last coordinate,
//! leaving `J - 1` nonnegative variables, one row per half-space and one row for
//! `s_J >= 0`. Those are solved by a dense dictionary simplex (rows are basic
//! variables, columns nonbasic) with Bland's rule and a one-artificial phase 1.
//! Each pivot costs `O(rows * J)`, so thousands of half-spaces are cheap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ineq::{Constraint, InequalitySystem};
use crate::model::{check_finite, dot, BoundsResult, Method};

/// Smallest magnitude accepted as a pivot element or improving reduced cost.
pub const PIVOT_TOL: f64 = 1e-10;
/// Phase-1 optimum below `-FEASIBILITY_TOL` means the polytope is empty.
pub const FEASIBILITY_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

/// Optimize `objective's` over `{s in simplex : a's <= b for every half-space}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub sense: Sense,
    pub halfspaces: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>, sense: Sense, halfspaces: Vec<Constraint>) -> Result<Self> {
        let j = objective.len();
        if j == 0 {
            return Err(Error::InvalidConfig("objective must have at least one coordinate".into()));
        }
        check_finite(&objective, || "objective".to_string())?;
        for (k, h) in halfspaces.iter().enumerate() {
            if h.a.len() != j {
                return Err(Error::dimension(format!("half-space {}", k + 1), j, h.a.len()));
            }
            check_finite(&h.a, || format!("half-space {}", k + 1))?;
            if !h.b.is_finite() {
                return Err(Error::non_finite(format!("half-space {} rhs", k + 1), 1));
            }
        }
        Ok(Self {
            objective,
            sense,
            halfspaces,
        })
    }

    /// Bound on coordinate `good` of the share vector.
    pub fn coordinate(num_goods: usize, good: usize, sense: Sense, halfspaces: Vec<Constraint>) -> Result<Self> {
        let mut objective = vec![0.0; num_goods];
        objective[good] = 1.0;
        Self::new(objective, sense, halfspaces)
    }

    pub fn num_goods(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub point: Vec<f64>,
}

/// Solves `p`, returning the optimal value and an attaining vertex.
pub fn solve_lp(p: &LpProblem) -> Result<LpSolution> {
    let j = p.num_goods();
    let last = j - 1;
    if j == 1 {
        // The simplex is the single point s = (1).
        if p.halfspaces.iter().any(|h| h.a[0] > h.b + FEASIBILITY_TOL) {
            return Err(Error::Infeasible);
        }
        return Ok(LpSolution {
            value: p.objective[0],
            point: vec![1.0],
        });
    }

    // s_last = 1 - sum(x): a's <= b  becomes  sum_i (a_i - a_last) x_i <= b - a_last.
    let n = last;
    let mut rows: Vec<(Vec<f64>, f64)> = p
        .halfspaces
        .iter()
        .map(|h| {
            let coef = h.a[..last].iter().map(|a| a - h.a[last]).collect();
            (coef, h.b - h.a[last])
        })
        .collect();
    rows.push((vec![1.0; n], 1.0));

    let sign = match p.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let f: Vec<f64> = p.objective[..last]
        .iter()
        .map(|c| sign * (c - p.objective[last]))
        .collect();

    let x = Dictionary::solve(&rows, &f)?;
    let mut point = Vec::with_capacity(j);
    point.extend(x.iter().map(|v| v.max(0.0)));
    let rest: f64 = point.iter().sum();
    point.push((1.0 - rest).max(0.0));
    Ok(LpSolution {
        value: dot(&p.objective, &point),
        point,
    })
}

/// Lower and upper bound on every coordinate of the counterfactual share.
///
/// Runs `2J` independent solves; an infeasible system yields a result with
/// `feasible = false` rather than an error.
pub fn compute_bounds(sys: &InequalitySystem, num_goods: usize, exec: Execution) -> Result<BoundsResult> {
    if sys.num_goods != num_goods {
        return Err(Error::dimension("inequality system", num_goods, sys.num_goods));
    }
    let method = sys.method().unwrap_or(Method::AllCycles);
    let solves = exec.map_indexed(2 * num_goods, |job| {
        let sense = if job % 2 == 0 { Sense::Minimize } else { Sense::Maximize };
        let problem = LpProblem::coordinate(num_goods, job / 2, sense, sys.constraints.clone())?;
        solve_lp(&problem)
    });

    let mut result = BoundsResult {
        method,
        feasible: true,
        lower: Vec::with_capacity(num_goods),
        upper: Vec::with_capacity(num_goods),
        lower_witness: Vec::with_capacity(num_goods),
        upper_witness: Vec::with_capacity(num_goods),
    };
    for (job, solved) in solves.into_iter().enumerate() {
        let sol = match solved {
            Ok(sol) => sol,
            Err(Error::Infeasible) => return Ok(BoundsResult::infeasible(method, num_goods)),
            Err(e) => return Err(e),
        };
        let value = sol.value.clamp(0.0, 1.0);
        if job % 2 == 0 {
            result.lower.push(value);
            result.lower_witness.push(sol.point);
        } else {
            result.upper.push(value);
            result.upper_witness.push(sol.point);
        }
    }
    for g in 0..num_goods {
        // Both solves are exact up to rounding; keep the interval well formed.
        if result.lower[g] > result.upper[g] {
            let mid = 0.5 * (result.lower[g] + result.upper[g]);
            result.lower[g] = mid;
            result.upper[g] = mid;
        }
    }
    Ok(result)
}

/// Dictionary form `x_B = c + T x_N`, objective `z = z0 + e'x_N`.
struct Dictionary {
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    constant: Vec<f64>,
    /// Row-major `rows x cols`.
    table: Vec<f64>,
    obj_const: f64,
    obj: Vec<f64>,
    cols: usize,
    pivots: usize,
}

impl Dictionary {
    /// Maximizes `f'x` subject to `G x <= h`, `x >= 0` and returns `x`.
    fn solve(rows: &[(Vec<f64>, f64)], f: &[f64]) -> Result<Vec<f64>> {
        let n = f.len();
        let m = rows.len();
        let needs_phase1 = rows.iter().any(|(_, h)| *h < 0.0);
        let artificial = n + m;
        let cols = if needs_phase1 { n + 1 } else { n };

        // Labels: originals 0..n, slacks n..n+m, artificial n+m.
        let mut table = Vec::with_capacity(m * cols);
        for (g, _) in rows {
            table.extend(g.iter().map(|v| -v));
            if needs_phase1 {
                table.push(1.0);
            }
        }
        let mut nonbasic: Vec<usize> = (0..n).collect();
        if needs_phase1 {
            nonbasic.push(artificial);
        }
        let mut dict = Dictionary {
            basic: (n..n + m).collect(),
            nonbasic,
            constant: rows.iter().map(|(_, h)| *h).collect(),
            table,
            obj_const: 0.0,
            obj: vec![0.0; cols],
            cols,
            pivots: 0,
        };

        if needs_phase1 {
            dict.obj[n] = -1.0;
            let mut leave = 0;
            for r in 1..m {
                let better = dict.constant[r] < dict.constant[leave]
                    || (dict.constant[r] == dict.constant[leave] && dict.basic[r] < dict.basic[leave]);
                if better {
                    leave = r;
                }
            }
            dict.pivot(leave, n);
            dict.optimize()?;
            if dict.obj_const < -FEASIBILITY_TOL {
                return Err(Error::Infeasible);
            }
            dict.drop_artificial(artificial);
            dict.set_objective(f);
        } else {
            dict.obj.copy_from_slice(f);
        }
        dict.optimize()?;

        let mut x = vec![0.0; n];
        for (r, &label) in dict.basic.iter().enumerate() {
            if label < n {
                x[label] = dict.constant[r];
            }
        }
        Ok(x)
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.table[r * self.cols..(r + 1) * self.cols]
    }

    /// Bland's rule iterations until no reduced cost is positive.
    fn optimize(&mut self) -> Result<()> {
        loop {
            let entering = (0..self.cols)
                .filter(|&c| self.obj[c] > PIVOT_TOL)
                .min_by_key(|&c| self.nonbasic[c]);
            let Some(col) = entering else {
                return Ok(());
            };

            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.basic.len() {
                let t = self.table[r * self.cols + col];
                if t >= -PIVOT_TOL {
                    continue;
                }
                let ratio = self.constant[r].max(0.0) / -t;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((best, best_ratio)) => {
                        if ratio < best_ratio - 1e-12
                            || (ratio <= best_ratio + 1e-12 && self.basic[r] < self.basic[best])
                        {
                            Some((r, ratio))
                        } else {
                            Some((best, best_ratio))
                        }
                    }
                };
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, col);
            if self.pivots > MAX_PIVOTS {
                return Err(Error::PivotLimit(MAX_PIVOTS));
            }
        }
    }

    /// Exchanges basic variable of `row` with nonbasic variable of `col`.
    fn pivot(&mut self, row: usize, col: usize) {
        self.pivots += 1;
        let cols = self.cols;
        let a = self.table[row * cols + col];

        let start = row * cols;
        for c in 0..cols {
            self.table[start + c] = if c == col { 1.0 / a } else { -self.table[start + c] / a };
        }
        self.constant[row] = -self.constant[row] / a;
        let pivot_row: Vec<f64> = self.row(row).to_vec();
        let pivot_const = self.constant[row];

        for r in 0..self.basic.len() {
            if r == row {
                continue;
            }
            let t = self.table[r * cols + col];
            if t == 0.0 {
                continue;
            }
            let dst = &mut self.table[r * cols..(r + 1) * cols];
            for c in 0..cols {
                dst[c] = if c == col { t * pivot_row[c] } else { dst[c] + t * pivot_row[c] };
            }
            self.constant[r] += t * pivot_const;
        }

        let t = self.obj[col];
        if t != 0.0 {
            for c in 0..cols {
                self.obj[c] = if c == col { t * pivot_row[c] } else { self.obj[c] + t * pivot_row[c] };
            }
            self.obj_const += t * pivot_const;
        }

        std::mem::swap(&mut self.basic[row], &mut self.nonbasic[col]);
    }

    /// Removes the phase-1 variable, pivoting it out first if it is still basic.
    fn drop_artificial(&mut self, artificial: usize) {
        if let Some(row) = self.basic.iter().position(|&b| b == artificial) {
            let best = (0..self.cols)
                .filter(|&c| self.nonbasic[c] != artificial)
                .max_by(|&a, &b| {
                    self.row(row)[a].abs().total_cmp(&self.row(row)[b].abs())
                });
            match best {
                Some(col) if self.row(row)[col].abs() > PIVOT_TOL => self.pivot(row, col),
                _ => {
                    // Redundant row pinned at zero: delete it.
                    self.basic.remove(row);
                    self.constant.remove(row);
                    self.table.drain(row * self.cols..(row + 1) * self.cols);
                }
            }
        }
        let col = self
            .nonbasic
            .iter()
            .position(|&l| l == artificial)
            .expect("artificial variable is nonbasic");
        let old_cols = self.cols;
        let mut table = Vec::with_capacity(self.basic.len() * (old_cols - 1));
        for r in 0..self.basic.len() {
            let row = &self.table[r * old_cols..(r + 1) * old_cols];
            table.extend(row.iter().enumerate().filter(|&(c, _)| c != col).map(|(_, v)| *v));
        }
        self.table = table;
        self.nonbasic.remove(col);
        self.cols = old_cols - 1;
    }

    /// Expresses `f'x` in terms of the current nonbasic variables.
    fn set_objective(&mut self, f: &[f64]) {
        let n = f.len();
        self.obj = self
            .nonbasic
            .iter()
            .map(|&l| if l < n { f[l] } else { 0.0 })
            .collect();
        self.obj_const = 0.0;
        for r in 0..self.basic.len() {
            let label = self.basic[r];
            if label < n {
                let w = f[label];
                self.obj_const += w * self.constant[r];
                for c in 0..self.cols {
                    self.obj[c] += w * self.table[r * self.cols + c];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half(a: &[f64], b: f64) -> Constraint {
        Constraint { a: a.to_vec(), b }
    }

    #[test]
    fn bare_simplex_max() {
        let p = LpProblem::coordinate(3, 0, Sense::Maximize, vec![]).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.point, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_binding_constraint() {
        let p = LpProblem::coordinate(2, 0, Sense::Maximize, vec![half(&[1.0, 0.0], 0.6)]).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert!((sol.value - 0.6).abs() < 1e-12);
        assert!((sol.point[0] - 0.6).abs() < 1e-12);
        assert!((sol.point[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn empty_polytope_is_infeasible() {
        // s1 <= 0.2 and s2 <= 0.2 cannot hold on the 2-simplex.
        let hs = vec![half(&[1.0, 0.0], 0.2), half(&[0.0, 1.0], 0.2)];
        let p = LpProblem::coordinate(2, 0, Sense::Minimize, hs.clone()).unwrap();
        assert_eq!(solve_lp(&p), Err(Error::Infeasible));
        let sys = InequalitySystem {
            num_goods: 2,
            constraints: hs,
            provenance: vec![],
        };
        let bounds = compute_bounds(&sys, 2, Execution::Sequential).unwrap();
        assert!(!bounds.feasible);
    }

    #[test]
    fn phase_one_reaches_interior_region() {
        // s1 >= 0.7 written as -s1 <= -0.7, origin of the reduced problem violates it.
        let hs = vec![half(&[-1.0, 0.0, 0.0], -0.7), half(&[0.0, 1.0, 0.0], 0.1)];
        let p = LpProblem::coordinate(3, 2, Sense::Maximize, hs.clone()).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert!((sol.value - 0.3).abs() < 1e-12);
        let p = LpProblem::coordinate(3, 0, Sense::Minimize, hs).unwrap();
        assert!((solve_lp(&p).unwrap().value - 0.7).abs() < 1e-12);
    }

    #[test]
    fn one_good() {
        let p = LpProblem::coordinate(1, 0, Sense::Maximize, vec![half(&[2.0], 3.0)]).unwrap();
        assert_eq!(solve_lp(&p).unwrap().point, vec![1.0]);
        let p = LpProblem::coordinate(1, 0, Sense::Maximize, vec![half(&[2.0], 1.0)]).unwrap();
        assert_eq!(solve_lp(&p), Err(Error::Infeasible));
    }

    #[test]
    fn bounds_without_constraints() {
        let sys = InequalitySystem::empty(3);
        let b = compute_bounds(&sys, 3, Execution::Sequential).unwrap();
        assert!(b.feasible);
        assert_eq!(b.lower, vec![0.0; 3]);
        assert_eq!(b.upper, vec![1.0; 3]);
    }

    #[test]
    fn bounds_complement_on_two_goods() {
        let sys = InequalitySystem {
            num_goods: 2,
            constraints: vec![half(&[1.0, 0.0], 0.6)],
            provenance: vec![],
        };
        let b = compute_bounds(&sys, 2, Execution::Parallel).unwrap();
        assert!((b.lower[0] - 0.0).abs() < 1e-12 && (b.upper[0] - 0.6).abs() < 1e-12);
        assert!((b.lower[1] - 0.4).abs() < 1e-12 && (b.upper[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_malformed_problems() {
        assert!(LpProblem::new(vec![], Sense::Maximize, vec![]).is_err());
        assert!(LpProblem::new(vec![1.0, 0.0], Sense::Maximize, vec![half(&[1.0], 0.0)]).is_err());
        assert!(LpProblem::new(vec![1.0, 0.0], Sense::Maximize, vec![half(&[1.0, 0.0], f64::NAN)]).is_err());
    }

    #[test]
    fn degenerate_constraints_terminate() {
        // Many constraints through the same vertex e1.
        let hs: Vec<Constraint> = (0..20)
            .map(|k| {
                let t = k as f64 / 20.0;
                half(&[t, 1.0 + t, 0.5 + t], t)
            })
            .collect();
        let p = LpProblem::coordinate(3, 1, Sense::Maximize, hs).unwrap();
        let sol = solve_lp(&p).unwrap();
        assert!(sol.value.abs() < 1e-12);
    }

    /// Optimum over all basic feasible points: `J - 1` active inequalities plus `1's = 1`.
    fn vertex_optimum(p: &LpProblem) -> Option<f64> {
        let j = p.num_goods();
        let mut rows: Vec<(Vec<f64>, f64)> = p.halfspaces.iter().map(|h| (h.a.clone(), h.b)).collect();
        for i in 0..j {
            let mut a = vec![0.0; j];
            a[i] = -1.0;
            rows.push((a, 0.0));
        }
        let mut best: Option<f64> = None;
        let mut pick = vec![0usize; j - 1];
        fn combos(n: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                cur.push(i);
                combos(n, k, i + 1, cur, out);
                cur.pop();
            }
        }
        let mut all = Vec::new();
        combos(rows.len(), j - 1, 0, &mut Vec::new(), &mut all);
        for c in all {
            pick.clone_from(&c);
            let mut mat: Vec<Vec<f64>> = pick.iter().map(|&r| {
                let mut v = rows[r].0.clone();
                v.push(rows[r].1);
                v
            }).collect();
            let mut ones = vec![1.0; j];
            ones.push(1.0);
            mat.push(ones);
            if let Some(s) = gauss(mat) {
                let ok = rows.iter().all(|(a, b)| dot(a, &s) <= b + 1e-9);
                if ok {
                    let v = dot(&p.objective, &s);
                    best = Some(match (best, p.sense) {
                        (None, _) => v,
                        (Some(b), Sense::Maximize) => b.max(v),
                        (Some(b), Sense::Minimize) => b.min(v),
                    });
                }
            }
        }
        best
    }

    fn gauss(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
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

    fn random_problem() -> impl Strategy<Value = LpProblem> {
        (2usize..=3, 0usize..=6, any::<bool>()).prop_flat_map(|(j, k, max)| {
            (
                prop::collection::vec(-1.0f64..1.0, j),
                prop::collection::vec((prop::collection::vec(-1.0f64..1.0, j), -0.5f64..1.0), k),
            )
                .prop_map(move |(obj, hs)| {
                    let sense = if max { Sense::Maximize } else { Sense::Minimize };
                    let hs = hs.into_iter().map(|(a, b)| Constraint { a, b }).collect();
                    LpProblem::new(obj, sense, hs).unwrap()
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]
        #[test]
        fn agrees_with_vertex_enumeration(p in random_problem()) {
            let oracle = vertex_optimum(&p);
            match (solve_lp(&p), oracle) {
                (Ok(sol), Some(v)) => {
                    prop_assert!((sol.value - v).abs() <= 1e-8, "{} vs {}", sol.value, v);
                    prop_assert!(sol.point.iter().all(|&x| x >= 0.0));
                    prop_assert!((sol.point.iter().sum::<f64>() - 1.0).abs() <= 1e-8);
                    for h in &p.halfspaces {
                        prop_assert!(dot(&h.a, &sol.point) <= h.b + 1e-8);
                    }
                }
                (Err(Error::Infeasible), None) => {}
                (got, want) => prop_assert!(false, "solver {:?} vs oracle {:?}", got, want),
            }
        }
    }
}
