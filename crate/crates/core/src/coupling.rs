//! Attractive coupling of the impermeable (ξ), influx-only (ζ) and
//! full weak-reservoir (η̂) processes on one probability space.
//!
//! All three copies live in one [`Engine`]; its level construction gives,
//! on every bond, a joint move at the minimum rate and solo moves at the
//! residuals, which is the pairwise min/residual split against ζ. Influx
//! is split the same way between ζ and η̂ (ξ never sees it); outflux acts
//! on η̂ alone.

use rand::Rng;
use serde::Serialize;

use crate::model::{Configuration, ModelSpec, Regime};
use crate::sim::{drive, trial_rng, validate_grid, Engine, Event, EventKind, PathRecord, StepOutcome};
use crate::{Error, Result};

pub const XI: usize = 0;
pub const ZETA: usize = 1;
pub const HAT: usize = 2;

/// Outcome of one coupled step.
pub type CoupledStep = StepOutcome;

/// true iff a(x) ≤ b(x) at every site.
pub fn verify_ordering(a: &Configuration, b: &Configuration) -> Result<bool> {
    a.le(b)
}

/// Ordering and mass-difference bookkeeping; reads configurations from an
/// engine so the driver can own the engine.
#[derive(Clone, Debug)]
struct ConeChecker {
    initial_mass: Vec<u64>,
    full_checks: bool,
    last_d: (u64, u64),
}

impl ConeChecker {
    fn mass(&self, e: &Engine, c: usize) -> u64 {
        self.initial_mass[c] + e.influx_count(c) - e.outflux_count(c)
    }

    fn mass_differences(&self, e: &Engine) -> (u64, u64) {
        let z = self.mass(e, ZETA);
        let d1 = z - self.mass(e, XI);
        let d2 = if e.copies().len() > HAT { z - self.mass(e, HAT) } else { 0 };
        (d1, d2)
    }

    fn check_all(e: &Engine) -> Result<()> {
        let cs = e.copies();
        if !cs[XI].le(&cs[ZETA])? {
            return Err(cone_error("ξ ≤ ζ", None));
        }
        if let Some(h) = cs.get(HAT) {
            if !h.le(&cs[ZETA])? {
                return Err(cone_error("η̂ ≤ ζ", None));
            }
        }
        Ok(())
    }

    fn check_sites(e: &Engine, sites: &[usize]) -> Result<()> {
        let cs = e.copies();
        for &x in sites {
            let z = cs[ZETA].get(x);
            if cs[XI].get(x) > z {
                return Err(cone_error("ξ ≤ ζ", Some(x)));
            }
            if cs.get(HAT).is_some_and(|h| h.get(x) > z) {
                return Err(cone_error("η̂ ≤ ζ", Some(x)));
            }
        }
        Ok(())
    }

    fn after_event(&mut self, e: &Engine, event: &Event) -> Result<()> {
        match event.kind {
            EventKind::Bulk { from, to } => Self::check_sites(e, &[from, to])?,
            EventKind::Influx { site } | EventKind::Outflux { site } => Self::check_sites(e, &[site])?,
        }
        if self.full_checks {
            Self::check_all(e)?;
        }
        let d = self.mass_differences(e);
        // |ζ| − |η̂| may drop when η̂ alone takes influx at a site where ζ is full
        if d.0 < self.last_d.0 {
            return Err(Error::ConeViolated(format!("|ζ| − |ξ| decreased: {} → {}", self.last_d.0, d.0)));
        }
        self.last_d = d;
        Ok(())
    }
}

/// Ordered pair (ξ, ζ) or triple (ξ, ζ, η̂) under the coupling generator.
#[derive(Clone, Debug)]
pub struct CoupledState {
    engine: Engine,
    checker: ConeChecker,
}

fn cone_error(pair: &str, site: Option<usize>) -> Error {
    match site {
        Some(x) => Error::ConeViolated(format!("{pair} fails at site {x}")),
        None => Error::ConeViolated(format!("{pair} fails")),
    }
}

impl CoupledState {
    pub fn new(spec: &ModelSpec, xi: Configuration, zeta: Configuration, hat: Option<Configuration>) -> Result<Self> {
        if xi.n() != zeta.n() || hat.as_ref().is_some_and(|h| h.n() != zeta.n()) {
            return Err(Error::Mismatch("coupled copies must share the lattice".into()));
        }
        if !xi.le(&zeta)? {
            return Err(cone_error("ξ ≤ ζ", None));
        }
        if let Some(h) = &hat {
            if !h.le(&zeta)? {
                return Err(cone_error("η̂ ≤ ζ", None));
            }
        }
        let mut copies = vec![(Regime::Impermeable, xi), (Regime::InfluxOnly, zeta)];
        if let Some(h) = hat {
            copies.push((Regime::FullWeak, h));
        }
        let engine = Engine::new(spec, copies)?;
        let initial_mass: Vec<u64> = engine.copies().iter().map(|c| c.total_mass()).collect();
        let mut checker = ConeChecker { initial_mass, full_checks: cfg!(debug_assertions), last_d: (0, 0) };
        checker.last_d = checker.mass_differences(&engine);
        Ok(Self { engine, checker })
    }

    /// The same configuration in every copy.
    pub fn from_common(spec: &ModelSpec, eta: Configuration, with_hat: bool) -> Result<Self> {
        let hat = with_hat.then(|| eta.clone());
        Self::new(spec, eta.clone(), eta, hat)
    }

    /// Full O(N) ordering scan after every event (on by default in debug
    /// builds). Without it only the touched sites are compared, which is
    /// already complete given ordered data before the event.
    pub fn with_full_checks(mut self, on: bool) -> Self {
        self.checker.full_checks = on;
        self
    }

    pub fn xi(&self) -> &Configuration {
        self.engine.copy(XI)
    }

    pub fn zeta(&self) -> &Configuration {
        self.engine.copy(ZETA)
    }

    pub fn hat(&self) -> Option<&Configuration> {
        self.engine.copies().get(HAT)
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn time(&self) -> f64 {
        self.engine.time()
    }

    /// (D1, D2) = (|ζ| − |ξ|, |ζ| − |η̂|); D2 = 0 without η̂.
    pub fn mass_differences(&self) -> (u64, u64) {
        self.checker.mass_differences(&self.engine)
    }

    /// Full pointwise check of both orderings.
    pub fn check_ordering(&self) -> Result<()> {
        ConeChecker::check_all(&self.engine)
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<CoupledStep> {
        let outcome = self.engine.step(rng)?;
        if let StepOutcome::Event { event, .. } = outcome {
            self.checker.after_event(&self.engine, &event)?;
        }
        Ok(outcome)
    }
}

/// Coupled trajectories on a common grid plus the mass differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoupledPaths {
    pub xi: PathRecord,
    pub zeta: PathRecord,
    pub hat: Option<PathRecord>,
    pub d1: Vec<u64>,
    pub d2: Vec<u64>,
    /// Events applied (each checked against the cone).
    pub events: u64,
    pub truncated: bool,
}

impl CoupledPaths {
    /// ζ path in columnar form with D1, D2 columns.
    pub fn write_columnar<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        let d1: Vec<i64> = self.d1.iter().map(|&v| v as i64).collect();
        let d2: Vec<i64> = self.d2.iter().map(|&v| v as i64).collect();
        self.zeta.write_columnar(w, &[("D1", &d1), ("D2", &d2)])
    }
}

/// Runs the coupling to the spec horizon. The spec's own regime field is
/// ignored: the copies carry their regimes.
#[allow(clippy::too_many_arguments)]
pub fn coupled_simulate(
    spec: &ModelSpec,
    xi: &Configuration,
    zeta: &Configuration,
    hat: Option<&Configuration>,
    grid: &[f64],
    seed: u64,
    trial: u64,
    max_events: u64,
) -> Result<CoupledPaths> {
    let state = CoupledState::new(spec, xi.clone(), zeta.clone(), hat.cloned())?;
    coupled_simulate_from(spec, state, grid, seed, trial, max_events)
}

pub fn coupled_simulate_from(
    spec: &ModelSpec,
    mut state: CoupledState,
    grid: &[f64],
    seed: u64,
    trial: u64,
    max_events: u64,
) -> Result<CoupledPaths> {
    validate_grid(grid, spec.horizon)?;
    let mut rng = trial_rng(seed, trial);
    let with_hat = state.hat().is_some();
    let mut rec = [
        PathRecord::new(&spec.with_regime(Regime::Impermeable), seed, trial),
        PathRecord::new(&spec.with_regime(Regime::InfluxOnly), seed, trial),
        PathRecord::new(&spec.with_regime(Regime::FullWeak), seed, trial),
    ];
    let mut d1 = Vec::with_capacity(grid.len());
    let mut d2 = Vec::with_capacity(grid.len());
    let mut checker = state.checker.clone();
    let reader = state.checker.clone();
    let copies = if with_hat { 3 } else { 2 };
    let truncated = drive(
        &mut state.engine,
        spec,
        grid,
        &mut rng,
        max_events,
        |e, i| {
            for (c, r) in rec.iter_mut().enumerate().take(copies) {
                r.push(grid[i], e.copy(c), e.influx_count(c), e.outflux_count(c), e.event_count());
            }
            let d = reader.mass_differences(e);
            d1.push(d.0);
            d2.push(d.1);
            Ok(())
        },
        |e, ev| checker.after_event(e, ev),
    )?;
    ConeChecker::check_all(&state.engine)?;
    let [xi, zeta, hat] = rec;
    let mut paths = CoupledPaths {
        xi,
        zeta,
        hat: with_hat.then_some(hat),
        d1,
        d2,
        events: state.engine.event_count(),
        truncated,
    };
    paths.xi.truncated = truncated;
    paths.zeta.truncated = truncated;
    if let Some(h) = paths.hat.as_mut() {
        h.truncated = truncated;
    }
    Ok(paths)
}

/// Dense generator of the coupled chain on the ordered cone, for tiny N.
#[derive(Clone, Debug)]
pub struct JointGenerator {
    /// Joint states as tuples of configurations (ξ, ζ[, η̂]).
    pub states: Vec<Vec<Configuration>>,
    pub q: Vec<Vec<f64>>,
}

/// Builds the coupled generator by enumerating the engine's active events
/// from every ordered joint state.
pub fn joint_generator(spec: &ModelSpec, with_hat: bool) -> Result<JointGenerator> {
    let singles = crate::sim::exact::state_count(spec.n, spec.capacity)?;
    let copies = if with_hat { 3 } else { 2 };
    let total = singles.checked_pow(copies as u32).filter(|&s| s <= 1 << 12).ok_or_else(|| {
        Error::StateSpaceTooLarge { states: (singles as u128).pow(copies as u32), limit: 1 << 12 }
    })?;
    let mut states = Vec::new();
    let mut index = std::collections::HashMap::new();
    for s in 0..total {
        let mut rest = s;
        let mut tuple = Vec::with_capacity(copies);
        for _ in 0..copies {
            tuple.push(Configuration::from_state_index(spec.n, spec.capacity, rest % singles)?);
            rest /= singles;
        }
        let ordered = tuple[XI].le(&tuple[ZETA])? && (copies < 3 || tuple[HAT].le(&tuple[ZETA])?);
        if ordered {
            index.insert(tuple.clone(), states.len());
            states.push(tuple);
        }
    }
    let mut q = vec![vec![0.0; states.len()]; states.len()];
    for (i, tuple) in states.iter().enumerate() {
        let state = CoupledState::new(spec, tuple[XI].clone(), tuple[ZETA].clone(), tuple.get(HAT).cloned())?;
        for (event, rate) in state.engine.active_events() {
            let mut next = state.engine.clone();
            next.apply(&event)?;
            let j = *index
                .get(next.copies())
                .ok_or_else(|| Error::ConeViolated(format!("event {event:?} leaves the ordered cone")))?;
            q[i][j] += rate;
            q[i][i] -= rate;
        }
    }
    Ok(JointGenerator { states, q })
}
