//! The complete bidirected market graph and its all-pairs shortest paths.
//!
//! Edge `i -> j` carries `w_ij = (delta_i - delta_j)'s_i`. The matrix is not
//! antisymmetric in general: `w_ij + w_ji = (delta_i - delta_j)'(s_i - s_j)`,
//! which is nonnegative exactly when the 2-cycle through `i` and `j` is.

use crate::error::{Error, Result};
use crate::model::{diff_dot, MarketData};

/// Diagonal entries of the distance matrix below `-CYCLE_TOL` flag a negative cycle.
pub const CYCLE_TOL: f64 = 1e-9;

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    size: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    /// Builds from nested rows; every row must have `rows.len()` entries.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let size = rows.len();
        let mut data = Vec::with_capacity(size * size);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != size {
                return Err(Error::dimension(format!("matrix row {}", i + 1), size, row.len()));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { size, data })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.size + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.size..(i + 1) * self.size]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.size.max(1)).map(<[f64]>::to_vec).collect()
    }
}

/// Edge weights of the market graph; the diagonal is exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(SquareMatrix);

impl WeightMatrix {
    /// Wraps an arbitrary square matrix of finite entries, forcing a zero diagonal.
    pub fn from_matrix(mut matrix: SquareMatrix) -> Result<Self> {
        if let Some(pos) = matrix.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::non_finite("weight matrix", pos + 1));
        }
        for i in 0..matrix.size {
            matrix.set(i, i, 0.0);
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn size(&self) -> usize {
        self.0.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// `W[i][j] = (delta_i - delta_j)'s_i`.
pub fn build_weights(data: &MarketData) -> WeightMatrix {
    let m = data.num_markets();
    let mut w = SquareMatrix::zeros(m);
    for i in 0..m {
        let mi = data.market(i);
        for j in 0..m {
            if i != j {
                w.set(i, j, diff_dot(&mi.delta, &data.market(j).delta, &mi.share));
            }
        }
    }
    WeightMatrix(w)
}

/// Shortest path lengths between every ordered pair of markets.
#[derive(Debug, Clone, PartialEq)]
pub struct ApspResult {
    /// Path lengths with the diagonal zeroed.
    pub dist: SquareMatrix,
    pub cyclically_monotone: bool,
    /// Minimum diagonal entry before zeroing; negative iff some cycle has negative weight.
    pub min_cycle_slack: f64,
    /// 1-based markets whose diagonal fell below `-CYCLE_TOL`.
    pub negative_cycle_markets: Vec<usize>,
}

impl ApspResult {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist.get(i, j)
    }

    pub fn size(&self) -> usize {
        self.dist.size()
    }

    /// Error describing the violation, or `Ok` when the graph has no negative cycle.
    pub fn require_monotone(&self) -> Result<()> {
        if self.cyclically_monotone {
            Ok(())
        } else {
            Err(Error::CyclicMonotonicityViolated {
                min_cycle_slack: self.min_cycle_slack,
                markets: self.negative_cycle_markets.clone(),
            })
        }
    }
}

/// Floyd-Warshall over the dense weight matrix.
///
/// The diagonal starts at zero (the empty path), so after relaxation `D[i][i]`
/// is the lighter of zero and the lightest closed walk through `i` found by the
/// recursion. Pivot row and column updates are skipped: with `D[k][k] = 0` they
/// are no-ops, and with a negative cycle they would only compound it. The
/// recursion always runs to completion; a negative cycle is reported through
/// `cyclically_monotone` rather than an early return.
pub fn floyd_warshall(weights: &WeightMatrix) -> ApspResult {
    let m = weights.size();
    let mut dist = weights.0.clone();
    let mut pivot_row = vec![0.0; m];

    for k in 0..m {
        pivot_row.copy_from_slice(dist.row(k));
        pivot_row[k] = f64::INFINITY;
        for i in 0..m {
            if i == k {
                continue;
            }
            let row = &mut dist.data[i * m..(i + 1) * m];
            let via = row[k];
            for (d, &r) in row.iter_mut().zip(&pivot_row) {
                let cand = via + r;
                if cand < *d {
                    *d = cand;
                }
            }
        }
    }

    let mut min_cycle_slack = f64::INFINITY;
    let mut negative_cycle_markets = Vec::new();
    for i in 0..m {
        let d = dist.get(i, i);
        min_cycle_slack = min_cycle_slack.min(d);
        if d < -CYCLE_TOL {
            negative_cycle_markets.push(i + 1);
        }
        dist.set(i, i, 0.0);
    }
    if m == 0 {
        min_cycle_slack = 0.0;
    }

    ApspResult {
        dist,
        cyclically_monotone: min_cycle_slack >= -CYCLE_TOL,
        min_cycle_slack,
        negative_cycle_markets,
    }
}
