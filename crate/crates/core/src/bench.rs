//! Wall-clock scaling of the all-cycles pipeline on synthetic logit data.

use std::time::Instant;

use crate::dgp::{generate_study, DgpConfig, GeneratedStudy};
use crate::error::Result;
use crate::exec::Execution;
use crate::graph::{build_weights, floyd_warshall};
use crate::ineq::build_sharp_system;
use crate::lp::compute_bounds;
use crate::model::MarketData;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub markets: usize,
    pub median_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Weights, Floyd-Warshall and the sharp system.
    System,
    /// The above plus the `2J` bound LPs.
    EndToEnd,
}

/// Logit study with `markets` observed markets (a single market is allowed here).
pub fn synthetic_study(markets: usize, seed: u64) -> Result<GeneratedStudy> {
    let cfg = DgpConfig {
        num_markets: markets.max(2),
        seed,
        ..DgpConfig::default()
    };
    let mut study = generate_study(&cfg)?;
    if markets < 2 {
        let mut kept = study.data.into_markets();
        kept.truncate(markets);
        study.data = MarketData::with_min_markets(cfg.num_goods, kept, markets)?;
    }
    Ok(study)
}

/// Seconds for one pass of `stage` on the first counterfactual of `study`.
pub fn time_pipeline(study: &GeneratedStudy, stage: Stage) -> Result<f64> {
    let scenario = &study.counterfactuals[0].scenario;
    let start = Instant::now();
    let apsp = floyd_warshall(&build_weights(&study.data));
    let system = build_sharp_system(&study.data, scenario, &apsp)?;
    if stage == Stage::EndToEnd {
        let bounds = compute_bounds(&system, study.data.num_goods(), Execution::Sequential)?;
        std::hint::black_box(bounds);
    }
    std::hint::black_box(&system);
    Ok(start.elapsed().as_secs_f64())
}

/// Median over `repeats` timings per market count.
pub fn time_scaling(m_list: &[usize], repeats: usize, stage: Stage, seed: u64) -> Result<Vec<ScalingRow>> {
    m_list
        .iter()
        .map(|&m| {
            let study = synthetic_study(m, seed)?;
            let mut samples = (0..repeats.max(1))
                .map(|_| time_pipeline(&study, stage))
                .collect::<Result<Vec<f64>>>()?;
            samples.sort_by(f64::total_cmp);
            let n = samples.len();
            let median = if n % 2 == 1 {
                samples[n / 2]
            } else {
                0.5 * (samples[n / 2 - 1] + samples[n / 2])
            };
            Ok(ScalingRow {
                markets: m,
                median_seconds: median,
            })
        })
        .collect()
}

/// Least-squares slope of `ln(seconds)` on `ln(M)`; `None` with fewer than two usable rows.
pub fn loglog_slope(rows: &[ScalingRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.markets > 0 && r.median_seconds > 0.0)
        .map(|r| ((r.markets as f64).ln(), r.median_seconds.ln()))
        .collect();
    let distinct = pts.iter().any(|p| p.0 != pts[0].0);
    if pts.len() < 2 || !distinct {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
