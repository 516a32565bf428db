//! Synthetic logit and probit markets and 1% price-increase counterfactuals.
//!
//! Mean utilities are `delta_mj = beta_j - alpha * p_mj` with prices drawn
//! i.i.d. uniform. Probit shares are simulated frequencies under correlated
//! normal errors. All markets of one study share the same error draws, so the
//! simulated shares are subgradients of one convex surplus function and the
//! data are cyclically monotone exactly, not just up to integration noise.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::model::{check_finite, Market, MarketData, Scenario};
use crate::rng::{derive_seed, stream};

/// Relative price change of the counterfactual good.
pub const PRICE_INCREASE: f64 = 0.01;

/// Error covariance for the three-good probit model.
pub fn default_probit_sigma() -> Vec<Vec<f64>> {
    vec![
        vec![1.0, -0.7, 0.3],
        vec![-0.7, 1.0, 0.3],
        vec![0.3, 0.3, 1.0],
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Logit,
    Probit,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Logit => "logit",
            Family::Probit => "probit",
        }
    }
}

// Stream tags below a study seed.
const PRICE_STREAM: u64 = 1;
const DATA_DRAW_STREAM: u64 = 2;
const TRUTH_DRAW_STREAM: u64 = 3;
/// Draws per independently seeded chunk of the high-precision share integral.
const TRUTH_CHUNK: usize = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DgpConfig {
    pub num_goods: usize,
    pub num_markets: usize,
    pub family: Family,
    /// Error covariance, used by the probit family only.
    pub sigma: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub price_low: f64,
    pub price_high: f64,
    pub seed: u64,
    /// Simulation draws behind observed probit shares.
    pub probit_draws: usize,
    /// Simulation draws behind true probit counterfactual shares.
    pub truth_draws: usize,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            num_goods: 3,
            num_markets: 200,
            family: Family::Logit,
            sigma: default_probit_sigma(),
            alpha: 1.0,
            beta: vec![2.0, 2.0, 2.0],
            price_low: 1.0,
            price_high: 3.0,
            seed: 0,
            probit_draws: 100_000,
            truth_draws: 10_000_000,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        let j = self.num_goods;
        if j == 0 {
            return Err(Error::InvalidConfig("num_goods must be positive".into()));
        }
        if self.num_markets < 2 {
            return Err(Error::InvalidConfig("num_markets must be at least 2".into()));
        }
        if self.beta.len() != j {
            return Err(Error::dimension("beta", j, self.beta.len()));
        }
        check_finite(&self.beta, || "beta".to_string())?;
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if !(self.price_low.is_finite() && self.price_high.is_finite() && self.price_low < self.price_high) {
            return Err(Error::InvalidConfig(format!(
                "price range must satisfy low < high, got [{}, {}]",
                self.price_low, self.price_high
            )));
        }
        if self.family == Family::Probit {
            cholesky(&self.sigma)?;
            if self.sigma.len() != j {
                return Err(Error::dimension("sigma", j, self.sigma.len()));
            }
            if self.probit_draws == 0 || self.truth_draws == 0 {
                return Err(Error::InvalidConfig("probit draw counts must be positive".into()));
            }
        }
        Ok(())
    }
}

/// `exp(delta_j - max delta) / sum_k exp(delta_k - max delta)`.
pub fn logit_shares(delta: &[f64]) -> Vec<f64> {
    let top = delta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = delta.iter().map(|d| (d - top).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Lower-triangular `L` with `L L' = sigma`, row-major `J x J`.
pub fn cholesky(sigma: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = sigma.len();
    for (i, row) in sigma.iter().enumerate() {
        if row.len() != n {
            return Err(Error::dimension(format!("sigma row {}", i + 1), n, row.len()));
        }
        check_finite(row, || format!("sigma row {}", i + 1))?;
    }
    for i in 0..n {
        for j in 0..i {
            if (sigma[i][j] - sigma[j][i]).abs() > 1e-12 * (1.0 + sigma[i][j].abs()) {
                return Err(Error::CholeskyFailure { pivot: i + 1 });
            }
        }
    }
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = sigma[i][j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::CholeskyFailure { pivot: i + 1 });
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(l)
}

fn correlated_draw<R: Rng>(rng: &mut R, chol: &[f64], z: &mut [f64], out: &mut [f64]) {
    let n = z.len();
    for v in z.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    for i in 0..n {
        out[i] = (0..=i).map(|k| chol[i * n + k] * z[k]).sum();
    }
}

/// Index of the largest `delta_k + eps_k`; ties go to the lowest index.
#[inline]
fn choice(delta: &[f64], eps: &[f64]) -> usize {
    let mut best = 0;
    let mut best_u = delta[0] + eps[0];
    for k in 1..delta.len() {
        let u = delta[k] + eps[k];
        if u > best_u {
            best = k;
            best_u = u;
        }
    }
    best
}

fn frequencies(counts: &[u64], total: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// A fixed set of correlated error draws reused for every share evaluation.
#[derive(Debug, Clone)]
pub struct ProbitSimulator {
    num_goods: usize,
    draws: Vec<f64>,
}

impl ProbitSimulator {
    pub fn new(sigma: &[Vec<f64>], num_draws: usize, seed: u64) -> Result<Self> {
        if num_draws == 0 {
            return Err(Error::InvalidConfig("probit draw count must be positive".into()));
        }
        let chol = cholesky(sigma)?;
        let j = sigma.len();
        let mut rng = stream(seed);
        let mut z = vec![0.0; j];
        let mut draws = vec![0.0; num_draws * j];
        for eps in draws.chunks_mut(j) {
            correlated_draw(&mut rng, &chol, &mut z, eps);
        }
        Ok(Self { num_goods: j, draws })
    }

    pub fn num_draws(&self) -> usize {
        self.draws.len() / self.num_goods
    }

    /// Choice frequencies at `delta`; each draw counts toward exactly one good.
    pub fn shares(&self, delta: &[f64]) -> Vec<f64> {
        assert_eq!(delta.len(), self.num_goods, "delta length");
        let mut counts = vec![0u64; self.num_goods];
        for eps in self.draws.chunks(self.num_goods) {
            counts[choice(delta, eps)] += 1;
        }
        frequencies(&counts, self.num_draws())
    }
}

/// Simulated probit shares from `num_draws` draws of `N(0, sigma)` seeded by `seed`.
pub fn probit_shares(delta: &[f64], sigma: &[Vec<f64>], num_draws: usize, seed: u64) -> Result<Vec<f64>> {
    if delta.len() != sigma.len() {
        return Err(Error::dimension("delta", sigma.len(), delta.len()));
    }
    check_finite(delta, || "delta".to_string())?;
    Ok(ProbitSimulator::new(sigma, num_draws, seed)?.shares(delta))
}

/// Probit shares for several utility vectors under one common set of draws,
/// generated in independently seeded chunks so nothing is stored.
pub fn probit_shares_streaming(
    deltas: &[Vec<f64>],
    sigma: &[Vec<f64>],
    num_draws: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    let chol = cholesky(sigma)?;
    let j = sigma.len();
    if let Some(d) = deltas.iter().find(|d| d.len() != j) {
        return Err(Error::dimension("delta", j, d.len()));
    }
    let chunks = num_draws.div_ceil(TRUTH_CHUNK);
    let partial = exec.map_indexed(chunks, |c| {
        let len = TRUTH_CHUNK.min(num_draws - c * TRUTH_CHUNK);
        let mut rng = stream(derive_seed(seed, &[c as u64]));
        let mut z = vec![0.0; j];
        let mut eps = vec![0.0; j];
        let mut counts = vec![vec![0u64; j]; deltas.len()];
        for _ in 0..len {
            correlated_draw(&mut rng, &chol, &mut z, &mut eps);
            for (d, cnt) in deltas.iter().zip(counts.iter_mut()) {
                cnt[choice(d, &eps)] += 1;
            }
        }
        counts
    });
    let mut totals = vec![vec![0u64; j]; deltas.len()];
    for chunk in partial {
        for (t, c) in totals.iter_mut().zip(chunk) {
            for (a, b) in t.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    Ok(totals.iter().map(|c| frequencies(c, num_draws)).collect())
}

/// Counterfactual "price of good `good` up by 1%" and its true share vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterfactual {
    /// 0-based good whose price rises.
    pub good: usize,
    pub scenario: Scenario,
    pub true_share: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedStudy {
    pub data: MarketData,
    /// Prices of the observed markets, row per market.
    pub prices: Vec<Vec<f64>>,
    /// Prices of the extra baseline draw the counterfactuals start from.
    pub baseline_prices: Vec<f64>,
    pub baseline_delta: Vec<f64>,
    pub counterfactuals: Vec<Counterfactual>,
}

fn utilities(cfg: &DgpConfig, prices: &[f64]) -> Vec<f64> {
    cfg.beta
        .iter()
        .zip(prices)
        .map(|(b, p)| b - cfg.alpha * p)
        .collect()
}

pub fn generate_study(cfg: &DgpConfig) -> Result<GeneratedStudy> {
    generate_study_with(cfg, Execution::Sequential)
}

/// Draws `M` markets plus one baseline market and builds the `J` price-increase
/// counterfactuals from the baseline. Output depends only on `cfg`.
pub fn generate_study_with(cfg: &DgpConfig, exec: Execution) -> Result<GeneratedStudy> {
    cfg.validate()?;
    let j = cfg.num_goods;
    let m = cfg.num_markets;

    let mut rng = stream(derive_seed(cfg.seed, &[PRICE_STREAM]));
    let width = cfg.price_high - cfg.price_low;
    let mut all_prices: Vec<Vec<f64>> = (0..=m)
        .map(|_| {
            (0..j)
                .map(|_| cfg.price_low + width * rng.random::<f64>())
                .collect()
        })
        .collect();
    let baseline_prices = all_prices.pop().expect("baseline draw");
    let prices = all_prices;
    let deltas: Vec<Vec<f64>> = prices.iter().map(|p| utilities(cfg, p)).collect();
    let baseline_delta = utilities(cfg, &baseline_prices);

    let cf_deltas: Vec<Vec<f64>> = (0..j)
        .map(|good| {
            let mut p = baseline_prices.clone();
            p[good] *= 1.0 + PRICE_INCREASE;
            utilities(cfg, &p)
        })
        .collect();

    let (shares, truths) = match cfg.family {
        Family::Logit => (
            deltas.iter().map(|d| logit_shares(d)).collect::<Vec<_>>(),
            cf_deltas.iter().map(|d| logit_shares(d)).collect::<Vec<_>>(),
        ),
        Family::Probit => {
            let sim = ProbitSimulator::new(
                &cfg.sigma,
                cfg.probit_draws,
                derive_seed(cfg.seed, &[DATA_DRAW_STREAM]),
            )?;
            let shares = exec.map_indexed(m, |i| sim.shares(&deltas[i]));
            let truths = probit_shares_streaming(
                &cf_deltas,
                &cfg.sigma,
                cfg.truth_draws,
                derive_seed(cfg.seed, &[TRUTH_DRAW_STREAM]),
                exec,
            )?;
            (shares, truths)
        }
    };

    let markets = deltas
        .into_iter()
        .zip(shares)
        .map(|(d, s)| Market::new(d, s))
        .collect();
    let data = MarketData::new(j, markets)?;
    let counterfactuals = cf_deltas
        .into_iter()
        .zip(truths)
        .enumerate()
        .map(|(good, (delta, true_share))| {
            Ok(Counterfactual {
                good,
                scenario: Scenario::new(delta, j)?,
                true_share,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(GeneratedStudy {
        data,
        prices,
        baseline_prices,
        baseline_delta,
        counterfactuals,
    })
}
