//! Quantitative experiments: equivalence decay with Poisson/Chernoff
//! control, the walker-crossing bound, and hydrodynamic comparisons.

pub mod chernoff;
pub mod equivalence;
pub mod hydrodynamics;
pub mod walkers;

use serde::{Deserialize, Serialize};

use crate::model::{BoundaryRateSum, ModelSpec};
use crate::Result;

pub use chernoff::{chernoff_h, chernoff_poisson_tail, poisson_tail_above, poisson_tail_exact};
pub use equivalence::{
    fit_decay_rate, run_equivalence_experiment, DecayFit, DecayVerdict, EquivalenceConfig, EquivalenceResult,
    EquivalenceRow, TailCheck,
};
pub use hydrodynamics::{run_hydro_experiment, run_reservoir_discrepancy, HydroConfig, HydroResult, ReservoirResult};
pub use walkers::{walker_crossing_estimate, WalkerConfig, WalkerResult};

/// Initial density profile ρ₀ on [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    /// ρ₀(u) = u
    Linear,
    Constant(f64),
}

impl Profile {
    pub fn value(&self, u: f64) -> f64 {
        match *self {
            Profile::Linear => u,
            Profile::Constant(c) => c,
        }
    }

    pub fn name(&self) -> String {
        match self {
            Profile::Linear => "linear".into(),
            Profile::Constant(c) => format!("constant({c})"),
        }
    }
}

/// Wilson score interval for k successes in n trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// B(N) over an N-grid with the verdict on B(N)/N being decreasing.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionTable {
    pub rows: Vec<BoundaryRateSum>,
    pub decreasing: bool,
}

impl ConditionTable {
    pub fn verdict(&self) -> &'static str {
        if self.decreasing {
            "condition o(N): consistent"
        } else {
            "condition o(N): not supported on this grid"
        }
    }
}

pub fn condition_table(spec: &ModelSpec, ns: &[usize]) -> Result<ConditionTable> {
    let rows = ns.iter().map(|&n| spec.with_n(n).boundary_rate_sum()).collect::<Result<Vec<_>>>()?;
    let decreasing = rows.windows(2).all(|w| w[1].per_site < w[0].per_site);
    Ok(ConditionTable { rows, decreasing })
}
