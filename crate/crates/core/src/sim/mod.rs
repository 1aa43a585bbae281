//! Exact continuous-time simulation of one process under κ(N)ℒ^N, and the
//! matrix-exponential oracle used to check it on tiny lattices.

pub mod engine;
pub mod exact;
mod path;
pub mod sumtree;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use engine::{Engine, Event, EventKind, StepOutcome};
pub use exact::{exact_ctmc_distribution, Generator, MAX_EXACT_STATES};
pub use path::{block_densities, block_size, PathRecord, Snapshot, FULL_SNAPSHOT_MAX_N};

use crate::model::{Capacity, Configuration, ModelSpec};
use crate::{Error, Result};

/// Default event budget per trajectory.
pub const DEFAULT_MAX_EVENTS: u64 = 2_000_000_000;

/// RNG stream for trial `trial` of an experiment seeded with `master`.
///
/// ChaCha streams are indexed by a 64-bit counter, so trial streams are
/// independent of scheduling and of how many trials run.
pub fn trial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(trial);
    rng
}

/// Stream for sampling trial `trial`'s initial configuration, disjoint from
/// the dynamics stream of the same trial.
pub fn initial_rng(master: u64, trial: u64) -> ChaCha8Rng {
    trial_rng(master ^ 0x9E37_79B9_7F4A_7C15, trial)
}

/// Checks a snapshot grid: strictly increasing, within [0, horizon].
pub fn validate_grid(grid: &[f64], horizon: f64) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("snapshot grid is empty".into()));
    }
    if grid[0] < 0.0 || grid[grid.len() - 1] > horizon {
        return Err(Error::InvalidArgument(format!("snapshot grid must lie in [0, {horizon}]")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument("snapshot grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `count` equally spaced times from 0 to `horizon` inclusive (one point if
/// the horizon is 0).
pub fn uniform_grid(horizon: f64, count: usize) -> Vec<f64> {
    if horizon == 0.0 || count <= 1 {
        return vec![if count <= 1 { horizon } else { 0.0 }];
    }
    (0..count).map(|i| horizon * (i as f64 / (count - 1) as f64)).collect()
}

/// Independent Bernoulli(ρ₀(u_x)) occupancies on Λ_N (k = 1), u_x the
/// centre (x − ½)/(N − 1) of site x's cell in [0, 1].
pub fn sample_initial_configuration<R, F>(profile: F, n: usize, rng: &mut R) -> Result<Configuration>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let mut bits = Vec::with_capacity(n.saturating_sub(1));
    for x in 1..n {
        let u = (x as f64 - 0.5) / (n - 1) as f64;
        let rho = profile(u);
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidProfile(format!("ρ₀({u}) = {rho} is outside [0,1]")));
        }
        bits.push(u32::from(rng.random::<f64>() < rho));
    }
    Configuration::from_occupancy(Capacity::EXCLUSION, bits)
}

/// Runs `engine` to the spec horizon, calling `on_snapshot(engine, i)` for
/// every grid time and `after_event` after every applied event. Handles
/// schedule breakpoints exactly (rates are piecewise constant in time, so
/// the pending draw is discarded and redrawn at a breakpoint). Returns
/// `true` if the event budget cut the run short.
pub(crate) fn drive<R: Rng + ?Sized>(
    engine: &mut Engine,
    spec: &ModelSpec,
    grid: &[f64],
    rng: &mut R,
    max_events: u64,
    mut on_snapshot: impl FnMut(&Engine, usize) -> Result<()>,
    mut after_event: impl FnMut(&Engine, &Event) -> Result<()>,
) -> Result<bool> {
    let horizon = spec.horizon;
    let alpha = &spec.rates.alpha_schedule;
    let beta = &spec.rates.beta_schedule;
    let schedules_matter =
        engine.regimes().iter().any(|r| r.has_influx()) && !(alpha.is_constant() && beta.is_constant());
    let mut next = 0usize;
    let start_events = engine.event_count();
    loop {
        let t = engine.time();
        let breakpoint = if schedules_matter {
            match (alpha.next_breakpoint(t), beta.next_breakpoint(t)) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) => a.or(b),
            }
        } else {
            None
        };
        let limit = breakpoint.map_or(horizon, |b| b.min(horizon));
        let event_time = match engine.propose(rng) {
            StepOutcome::Absorbed => None,
            StepOutcome::Event { event, wait } => {
                let te = t + wait;
                if te <= limit {
                    Some((event, wait, te))
                } else {
                    None
                }
            }
        };
        match event_time {
            None => {
                while next < grid.len() && grid[next] <= limit {
                    on_snapshot(engine, next)?;
                    next += 1;
                }
                if limit >= horizon {
                    return Ok(false);
                }
                engine.clock.set(limit);
                engine.set_reservoir_factors(alpha.factor_at(limit), beta.factor_at(limit));
            }
            Some((event, wait, te)) => {
                while next < grid.len() && grid[next] < te {
                    on_snapshot(engine, next)?;
                    next += 1;
                }
                if engine.event_count() - start_events >= max_events {
                    return Ok(true);
                }
                engine.apply(&event)?;
                engine.clock.advance(wait);
                after_event(engine, &event)?;
            }
        }
    }
}

/// Single-process simulator with its own RNG stream.
pub struct Simulator {
    spec: ModelSpec,
    engine: Engine,
    rng: ChaCha8Rng,
}

impl Simulator {
    pub fn new(spec: &ModelSpec, eta0: Configuration, seed: u64, trial: u64) -> Result<Self> {
        let engine = Engine::new(spec, vec![(spec.regime, eta0)])?;
        Ok(Self { spec: spec.clone(), engine, rng: trial_rng(seed, trial) })
    }

    /// One event of κ(N)ℒ^N; the clock advances by the waiting time.
    pub fn step(&mut self) -> Result<StepOutcome> {
        self.engine.step(&mut self.rng)
    }

    pub fn state(&self) -> &Configuration {
        self.engine.copy(0)
    }

    pub fn time(&self) -> f64 {
        self.engine.time()
    }

    pub fn total_rate(&self) -> f64 {
        self.engine.total_rate()
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }
}

/// Simulates to the spec horizon and records the state at each grid time.
pub fn simulate(spec: &ModelSpec, eta0: &Configuration, grid: &[f64], seed: u64) -> Result<PathRecord> {
    simulate_trial(spec, eta0, grid, seed, 0, DEFAULT_MAX_EVENTS)
}

pub fn simulate_trial(
    spec: &ModelSpec,
    eta0: &Configuration,
    grid: &[f64],
    seed: u64,
    trial: u64,
    max_events: u64,
) -> Result<PathRecord> {
    validate_grid(grid, spec.horizon)?;
    let mut engine = Engine::new(spec, vec![(spec.regime, eta0.clone())])?;
    let mut rng = trial_rng(seed, trial);
    let mut record = PathRecord::new(spec, seed, trial);
    let truncated = drive(
        &mut engine,
        spec,
        grid,
        &mut rng,
        max_events,
        |e, i| {
            record.push(grid[i], e.copy(0), e.influx_count(0), e.outflux_count(0), e.event_count());
            Ok(())
        },
        |_, _| Ok(()),
    )?;
    record.truncated = truncated;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpKernel, Regime};

    #[test]
    fn zero_horizon_gives_single_snapshot() {
        let spec = ModelSpec::tasep(8, 1.0, 1.0, -0.5).with_horizon(0.0);
        let eta = Configuration::exclusion(&[1, 0, 1, 0, 1, 0, 1]).unwrap();
        let rec = simulate(&spec, &eta, &uniform_grid(0.0, 5), 3).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec.configuration(0), Some(&eta));
        assert_eq!(rec.events, vec![0]);
    }

    #[test]
    fn impermeable_conserves_mass() {
        let spec = ModelSpec::taljep(32, 0.5, 1.0, 1.0, -0.5).with_regime(Regime::Impermeable);
        let mut rng = trial_rng(1, 0);
        let eta = sample_initial_configuration(|u| u, 32, &mut rng).unwrap();
        let rec = simulate(&spec, &eta, &uniform_grid(1.0, 21), 17).unwrap();
        assert!(rec.events[rec.len() - 1] > 0);
        for i in 0..rec.len() {
            assert_eq!(rec.configuration(i).unwrap().total_mass(), eta.total_mass());
        }
    }

    #[test]
    fn mass_balance_and_monotone_counters() {
        let spec = ModelSpec::tasep(24, 0.8, 0.6, -0.3);
        let eta = Configuration::empty(24, Capacity::EXCLUSION).unwrap();
        for seed in 0..20 {
            let rec = simulate(&spec, &eta, &uniform_grid(1.0, 11), seed).unwrap();
            for i in 0..rec.len() {
                let mass = rec.configuration(i).unwrap().total_mass() as i64;
                assert_eq!(mass, rec.cum_influx[i] as i64 - rec.cum_outflux[i] as i64);
                if i > 0 {
                    assert!(rec.cum_influx[i] >= rec.cum_influx[i - 1]);
                    assert!(rec.cum_outflux[i] >= rec.cum_outflux[i - 1]);
                    assert!(rec.events[i] >= rec.events[i - 1]);
                }
            }
        }
    }

    #[test]
    fn identical_inputs_give_identical_paths() {
        let spec = ModelSpec::taljep(40, 2.0, 0.5, 0.5, -0.5);
        let mut rng = trial_rng(2, 0);
        let eta = sample_initial_configuration(|u| u, 40, &mut rng).unwrap();
        let grid = uniform_grid(1.0, 6);
        let a = simulate(&spec, &eta, &grid, 99).unwrap();
        let b = simulate(&spec, &eta, &grid, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate(&spec, &eta, &grid, 100).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn budget_truncates() {
        let spec = ModelSpec::tasep(64, 1.0, 1.0, -0.5);
        let eta = Configuration::empty(64, Capacity::EXCLUSION).unwrap();
        let rec = simulate_trial(&spec, &eta, &uniform_grid(1.0, 3), 1, 0, 10).unwrap();
        assert!(rec.truncated);
        assert!(rec.events.iter().all(|&e| e <= 10));
    }

    #[test]
    fn initial_profile_extremes() {
        let mut rng = trial_rng(5, 0);
        let empty = sample_initial_configuration(|_| 0.0, 50, &mut rng).unwrap();
        assert_eq!(empty.total_mass(), 0);
        let full = sample_initial_configuration(|_| 1.0, 50, &mut rng).unwrap();
        assert_eq!(full.total_mass(), 49);
        assert!(sample_initial_configuration(|u| 2.0 * u, 50, &mut rng).is_err());
    }

    #[test]
    fn linear_profile_mass_concentrates() {
        // Σ Bernoulli(x/N): mean (N−1)/2, sd ≤ √N/2; 4σ band ≈ 0.02·(N−1)
        let n = 10_000;
        let mut rng = trial_rng(8, 3);
        let eta = sample_initial_configuration(|u| u, n, &mut rng).unwrap();
        let frac = eta.total_mass() as f64 / (n - 1) as f64;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
    }

    #[test]
    fn schedule_switches_reservoirs_off() {
        let mut spec = ModelSpec::tasep(16, 1.0, 1.0, -0.25);
        spec.rates.alpha_schedule = crate::model::Schedule::new(vec![(0.0, 1.0), (0.3, 0.0)]).unwrap();
        spec.rates.beta_schedule = spec.rates.alpha_schedule.clone();
        let eta = Configuration::empty(16, Capacity::EXCLUSION).unwrap();
        let grid = vec![0.0, 0.3, 0.6, 1.0];
        for seed in 0..10 {
            let rec = simulate(&spec, &eta, &grid, seed).unwrap();
            assert_eq!(rec.cum_influx[1], rec.cum_influx[3]);
            assert_eq!(rec.cum_outflux[1], rec.cum_outflux[3]);
        }
    }

    #[test]
    fn bad_grid_is_rejected() {
        let spec = ModelSpec::tasep(8, 1.0, 1.0, -0.5);
        let eta = Configuration::empty(8, Capacity::EXCLUSION).unwrap();
        assert!(simulate(&spec, &eta, &[0.5, 0.2], 1).is_err());
        assert!(simulate(&spec, &eta, &[0.0, 2.0], 1).is_err());
        let spec = ModelSpec { kernel: JumpKernel::LongJump { gamma: -1.0 }, ..spec };
        assert!(simulate(&spec, &eta, &[0.0], 1).is_err());
    }
}
