//! Domain types shared across the pipeline: observed markets, the
//! counterfactual scenario and the resulting share bounds.
//!
//! Shares are full simplex points. When a model has an outside good it has to
//! be one of the `J` coordinates; nothing here cares which.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shares below this (negative) value, or sums further than this from one, are rejected.
pub const SHARE_ACCEPT_TOL: f64 = 1e-6;

/// A single observed market: mean utilities and the matching share vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    pub delta: Vec<f64>,
    pub share: Vec<f64>,
}

impl Market {
    pub fn new(delta: Vec<f64>, share: Vec<f64>) -> Self {
        Self { delta, share }
    }
}

/// Validated collection of `M >= 2` markets over `J` goods.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    num_goods: usize,
    markets: Vec<Market>,
}

impl MarketData {
    /// Validates and normalizes raw markets. See [`validate_market_data`].
    pub fn new(num_goods: usize, markets: Vec<Market>) -> Result<Self> {
        validate_market_data(num_goods, markets)
    }

    pub(crate) fn with_min_markets(
        num_goods: usize,
        markets: Vec<Market>,
        min_markets: usize,
    ) -> Result<Self> {
        if num_goods == 0 {
            return Err(Error::InvalidConfig("number of goods must be positive".into()));
        }
        if markets.len() < min_markets {
            return Err(Error::TooFewMarkets {
                required: min_markets,
                found: markets.len(),
            });
        }
        let markets = markets
            .into_iter()
            .enumerate()
            .map(|(idx, market)| normalize_market(idx + 1, num_goods, market))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { num_goods, markets })
    }

    pub fn num_goods(&self) -> usize {
        self.num_goods
    }

    pub fn num_markets(&self) -> usize {
        self.markets.len()
    }

    pub fn markets(&self) -> &[Market] {
        &self.markets
    }

    /// Market by 0-based position.
    pub fn market(&self, idx: usize) -> &Market {
        &self.markets[idx]
    }

    pub fn into_markets(self) -> Vec<Market> {
        self.markets
    }
}

/// Checks dimensions, finiteness and the simplex condition for every market.
///
/// Negative share components down to `-1e-6` are clamped to zero, and a share
/// vector whose sum is off by at most `1e-6` is rescaled to sum to one. The
/// rescaling is skipped when the sum is already within a few ulps of one, which
/// makes the function idempotent on its own output.
pub fn validate_market_data(num_goods: usize, markets: Vec<Market>) -> Result<MarketData> {
    MarketData::with_min_markets(num_goods, markets, 2)
}

fn normalize_market(market_no: usize, num_goods: usize, market: Market) -> Result<Market> {
    let Market { delta, mut share } = market;
    if delta.len() != num_goods {
        return Err(Error::dimension(
            format!("market {market_no} delta"),
            num_goods,
            delta.len(),
        ));
    }
    if share.len() != num_goods {
        return Err(Error::dimension(
            format!("market {market_no} share"),
            num_goods,
            share.len(),
        ));
    }
    check_finite(&delta, || format!("market {market_no} delta"))?;
    check_finite(&share, || format!("market {market_no} share"))?;
    normalize_simplex(&mut share).map_err(|reason| Error::NotASimplexPoint {
        market: market_no,
        reason,
    })?;
    Ok(Market { delta, share })
}

pub(crate) fn check_finite(values: &[f64], context: impl FnOnce() -> String) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::non_finite(context(), pos + 1)),
        None => Ok(()),
    }
}

/// Clamps tiny negatives and rescales `share` onto the simplex in place.
fn normalize_simplex(share: &mut [f64]) -> std::result::Result<(), String> {
    if let Some((pos, &v)) = share
        .iter()
        .enumerate()
        .find(|(_, &v)| v < -SHARE_ACCEPT_TOL)
    {
        return Err(format!("component {} is {v:.3e}", pos + 1));
    }
    let sum: f64 = share.iter().sum();
    if (sum - 1.0).abs() > SHARE_ACCEPT_TOL {
        return Err(format!("components sum to {sum:.9}"));
    }
    for v in share.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = share.iter().sum();
    // Rounding in the sum of J terms rescaled by 1/sum stays below ~1.5 J eps.
    let settled = 4.0 * share.len() as f64 * f64::EPSILON;
    if (sum - 1.0).abs() > settled {
        for v in share.iter_mut() {
            *v /= sum;
        }
    }
    Ok(())
}

/// Mean utilities of the counterfactual market `M + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    delta_cf: Vec<f64>,
}

impl Scenario {
    pub fn new(delta_cf: Vec<f64>, num_goods: usize) -> Result<Self> {
        if delta_cf.len() != num_goods {
            return Err(Error::dimension(
                "counterfactual delta",
                num_goods,
                delta_cf.len(),
            ));
        }
        check_finite(&delta_cf, || "counterfactual delta".to_string())?;
        Ok(Self { delta_cf })
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta_cf
    }

    pub fn num_goods(&self) -> usize {
        self.delta_cf.len()
    }
}

/// How an inequality system was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Cycles of length two only: one constraint per market against the counterfactual.
    TwoCycle,
    /// Every cycle, reduced to `M` constraints through all-pairs shortest paths.
    AllCycles,
    /// Exhaustive enumeration of simple paths; reference implementation for small `M`.
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::TwoCycle => "two_cycle",
            Method::AllCycles => "all_cycles",
            Method::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "two_cycle" => Ok(Method::TwoCycle),
            "all_cycles" => Ok(Method::AllCycles),
            "oracle" => Ok(Method::Oracle),
            other => Err(Error::Parse(format!("unknown method `{other}`"))),
        }
    }
}

/// Per-good bounds on the counterfactual share vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub method: Method,
    pub feasible: bool,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Share vector attaining `lower[j]`, one per good. Empty when infeasible.
    pub lower_witness: Vec<Vec<f64>>,
    /// Share vector attaining `upper[j]`, one per good. Empty when infeasible.
    pub upper_witness: Vec<Vec<f64>>,
}

impl BoundsResult {
    pub fn infeasible(method: Method, num_goods: usize) -> Self {
        Self {
            method,
            feasible: false,
            lower: vec![f64::NAN; num_goods],
            upper: vec![f64::NAN; num_goods],
            lower_witness: Vec::new(),
            upper_witness: Vec::new(),
        }
    }

    pub fn num_goods(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, good: usize) -> f64 {
        self.upper[good] - self.lower[good]
    }

    pub fn widths(&self) -> Vec<f64> {
        (0..self.num_goods()).map(|j| self.width(j)).collect()
    }

    /// Whether `share` lies inside every interval, with slack `tol`.
    pub fn covers(&self, share: &[f64], tol: f64) -> Vec<bool> {
        share
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&s, (&lo, &hi))| self.feasible && s >= lo - tol && s <= hi + tol)
            .collect()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `(x - y)'s` without allocating the difference.
pub(crate) fn diff_dot(x: &[f64], y: &[f64], s: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .zip(s)
        .map(|((a, b), w)| (a - b) * w)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn market(delta: &[f64], share: &[f64]) -> Market {
        Market::new(delta.to_vec(), share.to_vec())
    }

    #[test]
    fn valid_input_is_unchanged() {
        let raw = vec![
            market(&[0.3, -1.2], &[0.5, 0.5]),
            market(&[1.0, 2.0], &[0.3, 0.7]),
        ];
        let data = validate_market_data(2, raw.clone()).unwrap();
        assert_eq!(data.markets(), raw.as_slice());
        assert_eq!(data.num_markets(), 2);
    }

    #[test]
    fn share_sum_above_one_is_rejected() {
        let raw = vec![
            market(&[0.0, 0.0], &[0.5, 0.5]),
            market(&[0.0, 0.0], &[0.5, 0.6]),
        ];
        match validate_market_data(2, raw) {
            Err(Error::NotASimplexPoint { market, .. }) => assert_eq!(market, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn tiny_negative_is_clamped() {
        let raw = vec![
            market(&[0.0, 0.0], &[1.0 + 1e-13, -1e-13]),
            market(&[0.0, 0.0], &[0.5, 0.5]),
        ];
        let data = validate_market_data(2, raw).unwrap();
        assert_eq!(data.market(0).share, vec![1.0, 0.0]);
    }

    #[test]
    fn large_negative_is_rejected() {
        let raw = vec![
            market(&[0.0, 0.0], &[1.0 + 1e-5, -1e-5]),
            market(&[0.0, 0.0], &[0.5, 0.5]),
        ];
        assert!(matches!(
            validate_market_data(2, raw),
            Err(Error::NotASimplexPoint { market: 1, .. })
        ));
    }

    #[test]
    fn dimension_and_finiteness_errors() {
        let raw = vec![market(&[0.0], &[0.5, 0.5]), market(&[0.0, 0.0], &[0.5, 0.5])];
        assert!(matches!(
            validate_market_data(2, raw),
            Err(Error::DimensionMismatch { .. })
        ));
        let raw = vec![
            market(&[0.0, f64::NAN], &[0.5, 0.5]),
            market(&[0.0, 0.0], &[0.5, 0.5]),
        ];
        assert!(matches!(
            validate_market_data(2, raw),
            Err(Error::NonFinite { position: 2, .. })
        ));
        let raw = vec![market(&[0.0, 0.0], &[0.5, 0.5])];
        assert!(matches!(
            validate_market_data(2, raw),
            Err(Error::TooFewMarkets { required: 2, found: 1 })
        ));
    }

    #[test]
    fn scenario_checks_length() {
        assert!(Scenario::new(vec![0.0, 1.0], 2).is_ok());
        assert!(Scenario::new(vec![0.0], 2).is_err());
        assert!(Scenario::new(vec![0.0, f64::INFINITY], 2).is_err());
    }

    #[test]
    fn method_round_trips_through_str() {
        for m in [Method::TwoCycle, Method::AllCycles, Method::Oracle] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
    }

    fn perturbed_simplex(j: usize) -> impl Strategy<Value = Vec<f64>> {
        (
            prop::collection::vec(0.0f64..1.0, j),
            prop::collection::vec(-2e-7f64..2e-7, j),
        )
            .prop_filter_map("degenerate", |(raw, noise)| {
                let total: f64 = raw.iter().sum();
                if total < 1e-3 {
                    return None;
                }
                Some(raw.iter().zip(&noise).map(|(r, e)| r / total + e).collect())
            })
    }

    proptest! {
        #[test]
        fn validation_is_idempotent_and_small(
            shares in prop::collection::vec(perturbed_simplex(4), 2..6),
        ) {
            let raw: Vec<Market> = shares
                .iter()
                .map(|s| Market::new(vec![0.0; 4], s.clone()))
                .collect();
            let once = validate_market_data(4, raw.clone()).unwrap();
            let twice = validate_market_data(4, once.markets().to_vec()).unwrap();
            for (a, b) in once.markets().iter().zip(twice.markets()) {
                for (x, y) in a.share.iter().zip(&b.share) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            for (r, v) in raw.iter().zip(once.markets()) {
                for (x, y) in r.share.iter().zip(&v.share) {
                    prop_assert!((x - y).abs() <= 1e-6);
                    prop_assert!(*y >= 0.0);
                }
            }
        }
    }
}
