//! Sharp bounds on counterfactual market shares in semiparametric discrete
//! choice models.
//!
//! Observed markets `(delta_m, s_m)` that satisfy cyclic monotonicity restrict
//! the unknown share vector of a counterfactual market through one inequality
//! per cycle of markets. Instead of enumerating cycles, the sharpest
//! inequality for each starting market is read off the all-pairs shortest
//! paths of the market graph ([`graph`]) in `O(M^3)`, giving `M` constraints
//! ([`ineq`]). Per-good bounds then come from `2J` small linear programs
//! ([`lp`]).
//!
//! ```
//! use cyclebounds::{
//!     build_sharp_system, build_weights, compute_bounds, floyd_warshall, Execution, Market,
//!     MarketData, Scenario,
//! };
//!
//! let data = MarketData::new(
//!     2,
//!     vec![
//!         Market::new(vec![1.0, 0.0], vec![0.6, 0.4]),
//!         Market::new(vec![0.0, 0.0], vec![0.5, 0.5]),
//!     ],
//! )?;
//! let scenario = Scenario::new(vec![0.5, 0.0], 2)?;
//! let apsp = floyd_warshall(&build_weights(&data));
//! let system = build_sharp_system(&data, &scenario, &apsp)?;
//! let bounds = compute_bounds(&system, 2, Execution::Sequential)?;
//! assert!(bounds.lower[0] <= bounds.upper[0]);
//! # Ok::<(), cyclebounds::Error>(())
//! ```

pub mod bench;
pub mod dgp;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod graph;
pub mod ineq;
pub mod io;
pub mod lp;
pub mod model;
pub mod report;
pub mod rng;

pub use dgp::{generate_study, logit_shares, probit_shares, DgpConfig, Family, GeneratedStudy};
pub use error::{Error, Result};
pub use exec::Execution;
pub use experiment::{run_experiment, ExperimentConfig, ExperimentReport};
pub use graph::{build_weights, floyd_warshall, ApspResult, WeightMatrix};
pub use ineq::{
    build_sharp_system, build_two_cycle_system, enumerate_all_cycles_oracle, InequalitySystem,
};
pub use lp::{compute_bounds, solve_lp, LpProblem, Sense};
pub use model::{validate_market_data, BoundsResult, Market, MarketData, Method, Scenario};
