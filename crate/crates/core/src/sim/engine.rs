//! Event table shared by the single-process simulator and the coupling.
//!
//! The engine carries up to [`MAX_COPIES`] configurations on one lattice.
//! Each copy has its own regime (which generators act on it). For every
//! bulk bond, influx site and outflux site the per-copy rates r_c are
//! stacked with the basic coupling: sorting the distinct values
//! v_1 < v_2 < …, segment j has length v_j − v_{j−1} and moves exactly the
//! copies with r_c ≥ v_j. Every copy therefore moves at its own rate, and
//! two copies move together at the minimum of their rates. With a single
//! copy this degenerates to the plain Gillespie table.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::sumtree::SumTree;
use crate::model::{Capacity, Configuration, ModelSpec, Move, RateFunctions, Regime};
use crate::{Error, Result};

pub const MAX_COPIES: usize = 3;

/// What happens at an event, before it is restricted to the copies in the mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    Bulk { from: usize, to: usize },
    Influx { site: usize },
    Outflux { site: usize },
}

/// An event acting on the copies whose bit is set in `mask`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub mask: u8,
}

impl Event {
    pub fn moves(&self, copy: usize) -> bool {
        self.mask & (1 << copy) != 0
    }

    pub fn as_move(&self) -> Move {
        match self.kind {
            EventKind::Bulk { from, to } => Move::Jump { from, to },
            EventKind::Influx { site } => Move::FlipUp(site),
            EventKind::Outflux { site } => Move::FlipDown(site),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepOutcome {
    Event { event: Event, wait: f64 },
    /// Total rate is zero; no event will ever occur under current rates.
    Absorbed,
}

#[derive(Clone, Copy, Debug)]
struct Bond {
    from: usize,
    to: usize,
    /// κ·p(to − from)
    rate: f64,
}

/// Kahan-compensated clock in macroscopic time units.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Clock {
    sum: f64,
    carry: f64,
}

impl Clock {
    pub fn now(&self) -> f64 {
        self.sum
    }

    pub fn advance(&mut self, dt: f64) {
        let y = dt - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn set(&mut self, t: f64) {
        self.sum = t;
        self.carry = 0.0;
    }
}

#[derive(Clone, Debug)]
pub struct Engine {
    capacity: Capacity,
    rates: RateFunctions,
    copies: Vec<Configuration>,
    regimes: Vec<Regime>,
    bonds: Vec<Bond>,
    /// bond indices touching each site (0-based site − 1)
    site_bonds: Vec<Vec<u32>>,
    influx_base: Vec<f64>,
    outflux_base: Vec<f64>,
    alpha_factor: f64,
    beta_factor: f64,
    tree: SumTree,
    masks: Vec<u8>,
    pub(crate) clock: Clock,
    influx_counts: [u64; MAX_COPIES],
    outflux_counts: [u64; MAX_COPIES],
    events: u64,
}

impl Engine {
    /// Rates are in macroscopic units: every generator carries its κ(N) factor.
    pub fn new(spec: &ModelSpec, copies: Vec<(Regime, Configuration)>) -> Result<Self> {
        spec.validate()?;
        if copies.is_empty() || copies.len() > MAX_COPIES {
            return Err(Error::InvalidArgument(format!("engine holds 1..={MAX_COPIES} copies")));
        }
        for (_, c) in &copies {
            if c.n() != spec.n || c.capacity() != spec.capacity {
                return Err(Error::Mismatch(format!(
                    "configuration (n={}, {:?}) does not match spec (n={}, {:?})",
                    c.n(),
                    c.capacity(),
                    spec.n,
                    spec.capacity
                )));
            }
        }
        let n = spec.n;
        let sites = n - 1;
        let kappa = spec.kappa_value();
        let displacements = spec.kernel.bulk_displacements(n);
        let mut bonds = Vec::new();
        let mut site_bonds = vec![Vec::new(); sites];
        for x in 1..n as i64 {
            for &(z, p) in &displacements {
                let y = x + z;
                if y < 1 || y >= n as i64 {
                    continue;
                }
                let idx = bonds.len() as u32;
                bonds.push(Bond { from: x as usize, to: y as usize, rate: kappa * p });
                site_bonds[x as usize - 1].push(idx);
                site_bonds[y as usize - 1].push(idx);
            }
        }
        let any_influx = copies.iter().any(|(r, _)| r.has_influx());
        let any_outflux = copies.iter().any(|(r, _)| r.has_outflux());
        let influx_base = if any_influx { spec.influx_rate_profile()? } else { vec![0.0; sites] };
        let outflux_base = if any_outflux { spec.outflux_rate_profile()? } else { vec![0.0; sites] };
        let ncopies = copies.len();
        let leaves = (bonds.len() + 2 * sites) * ncopies;
        let (regimes, copies): (Vec<_>, Vec<_>) = copies.into_iter().unzip();
        let mut engine = Self {
            capacity: spec.capacity,
            rates: spec.rates.clone(),
            copies,
            regimes,
            bonds,
            site_bonds,
            influx_base,
            outflux_base,
            alpha_factor: spec.rates.alpha_schedule.factor_at(0.0),
            beta_factor: spec.rates.beta_schedule.factor_at(0.0),
            tree: SumTree::new(leaves),
            masks: vec![0; leaves],
            clock: Clock::default(),
            influx_counts: [0; MAX_COPIES],
            outflux_counts: [0; MAX_COPIES],
            events: 0,
        };
        engine.rebuild();
        Ok(engine)
    }

    pub fn copies(&self) -> &[Configuration] {
        &self.copies
    }

    pub fn copy(&self, c: usize) -> &Configuration {
        &self.copies[c]
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn time(&self) -> f64 {
        self.clock.now()
    }

    pub fn total_rate(&self) -> f64 {
        self.tree.total()
    }

    pub fn event_count(&self) -> u64 {
        self.events
    }

    pub fn influx_count(&self, c: usize) -> u64 {
        self.influx_counts[c]
    }

    pub fn outflux_count(&self, c: usize) -> u64 {
        self.outflux_counts[c]
    }

    pub fn leaf_rates(&self) -> impl Iterator<Item = f64> + '_ {
        self.tree.leaves()
    }

    fn ncopies(&self) -> usize {
        self.copies.len()
    }

    fn sites(&self) -> usize {
        self.site_bonds.len()
    }

    fn influx_leaf(&self, site: usize) -> usize {
        (self.bonds.len() + site - 1) * self.ncopies()
    }

    fn outflux_leaf(&self, site: usize) -> usize {
        (self.bonds.len() + self.sites() + site - 1) * self.ncopies()
    }

    /// Writes the coupled segments for per-copy rates into leaves
    /// `base..base+ncopies`.
    fn write_segments(&mut self, base: usize, rates: &[f64; MAX_COPIES]) {
        let c = self.ncopies();
        let mut levels = [0.0f64; MAX_COPIES];
        let mut count = 0;
        for &r in &rates[..c] {
            if r > 0.0 && !levels[..count].contains(&r) {
                levels[count] = r;
                count += 1;
            }
        }
        levels[..count].sort_by(|a, b| a.partial_cmp(b).expect("finite rates"));
        let mut prev = 0.0;
        for j in 0..c {
            if j < count {
                let v = levels[j];
                let mask = (0..c).filter(|&i| rates[i] >= v).fold(0u8, |m, i| m | (1 << i));
                self.tree.set(base + j, v - prev);
                self.masks[base + j] = mask;
                prev = v;
            } else {
                self.tree.set(base + j, 0.0);
                self.masks[base + j] = 0;
            }
        }
    }

    fn refresh_bond(&mut self, b: usize) {
        let bond = self.bonds[b];
        let mut rates = [0.0; MAX_COPIES];
        for (c, cfg) in self.copies.iter().enumerate() {
            rates[c] = bond.rate * self.rates.bulk(cfg.get(bond.from), cfg.get(bond.to), self.capacity);
        }
        self.write_segments(b * self.ncopies(), &rates);
    }

    fn refresh_boundary(&mut self, site: usize) {
        let mut rin = [0.0; MAX_COPIES];
        let mut rout = [0.0; MAX_COPIES];
        let base_in = self.influx_base[site - 1] * self.alpha_factor;
        let base_out = self.outflux_base[site - 1] * self.beta_factor;
        for (c, cfg) in self.copies.iter().enumerate() {
            let v = cfg.get(site);
            if self.regimes[c].has_influx() {
                rin[c] = base_in * RateFunctions::influx_factor(v, self.capacity);
            }
            if self.regimes[c].has_outflux() {
                rout[c] = base_out * RateFunctions::outflux_factor(v);
            }
        }
        self.write_segments(self.influx_leaf(site), &rin);
        self.write_segments(self.outflux_leaf(site), &rout);
    }

    fn refresh_site(&mut self, site: usize) {
        for k in 0..self.site_bonds[site - 1].len() {
            let b = self.site_bonds[site - 1][k] as usize;
            self.refresh_bond(b);
        }
        self.refresh_boundary(site);
    }

    /// Recomputes every leaf from scratch.
    pub fn rebuild(&mut self) {
        for b in 0..self.bonds.len() {
            self.refresh_bond(b);
        }
        for s in 1..=self.sites() {
            self.refresh_boundary(s);
        }
    }

    /// Updates the reservoir time modulation; used at schedule breakpoints.
    pub(crate) fn set_reservoir_factors(&mut self, alpha: f64, beta: f64) {
        if alpha != self.alpha_factor || beta != self.beta_factor {
            self.alpha_factor = alpha;
            self.beta_factor = beta;
            for s in 1..=self.sites() {
                self.refresh_boundary(s);
            }
        }
    }

    fn event_at(&self, leaf: usize) -> Event {
        let c = self.ncopies();
        let group = leaf / c;
        let nb = self.bonds.len();
        let kind = if group < nb {
            let b = self.bonds[group];
            EventKind::Bulk { from: b.from, to: b.to }
        } else if group < nb + self.sites() {
            EventKind::Influx { site: group - nb + 1 }
        } else {
            EventKind::Outflux { site: group - nb - self.sites() + 1 }
        };
        Event { kind, mask: self.masks[leaf] }
    }

    /// Draws the waiting time and the next event without applying it.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> StepOutcome {
        let total = self.tree.total();
        if total <= 0.0 {
            return StepOutcome::Absorbed;
        }
        let e: f64 = Exp1.sample(rng);
        let wait = e / total;
        let u = rng.random::<f64>() * total;
        let leaf = self.tree.find(u);
        StepOutcome::Event { event: self.event_at(leaf), wait }
    }

    /// Applies `event` to the copies in its mask and refreshes the leaves
    /// that can change. Does not move the clock.
    pub fn apply(&mut self, event: &Event) -> Result<()> {
        let mv = event.as_move();
        for c in 0..self.ncopies() {
            if event.moves(c) {
                let changed = self.copies[c].apply_in_place(mv)?;
                debug_assert!(changed, "event with positive rate must change copy {c}");
                match event.kind {
                    EventKind::Influx { .. } => self.influx_counts[c] += 1,
                    EventKind::Outflux { .. } => self.outflux_counts[c] += 1,
                    EventKind::Bulk { .. } => {}
                }
            }
        }
        self.events += 1;
        match event.kind {
            EventKind::Bulk { from, to } => {
                self.refresh_site(from);
                self.refresh_site(to);
            }
            EventKind::Influx { site } | EventKind::Outflux { site } => self.refresh_site(site),
        }
        Ok(())
    }

    /// One Gillespie step: draw, apply and advance the clock.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<StepOutcome> {
        let outcome = self.propose(rng);
        if let StepOutcome::Event { event, wait } = outcome {
            self.apply(&event)?;
            self.clock.advance(wait);
        }
        Ok(outcome)
    }

    /// Every event with positive rate in the current state.
    pub fn active_events(&self) -> Vec<(Event, f64)> {
        self.tree
            .leaves()
            .enumerate()
            .filter(|(_, r)| *r > 0.0)
            .map(|(i, r)| (self.event_at(i), r))
            .collect()
    }

    /// Replaces the configurations (same dimensions) and rebuilds the table.
    pub fn reset_copies(&mut self, copies: Vec<Configuration>) -> Result<()> {
        if copies.len() != self.copies.len()
            || copies.iter().zip(&self.copies).any(|(a, b)| a.n() != b.n() || a.capacity() != b.capacity())
        {
            return Err(Error::Mismatch("reset with incompatible configurations".into()));
        }
        self.copies = copies;
        self.rebuild();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpKernel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single(spec: &ModelSpec, eta: Configuration) -> Engine {
        Engine::new(spec, vec![(spec.regime, eta)]).unwrap()
    }

    #[test]
    fn full_tasep_is_absorbed() {
        let spec = ModelSpec::tasep(6, 1.0, 1.0, -0.5).with_regime(Regime::Impermeable);
        let e = single(&spec, Configuration::full(6, Capacity::EXCLUSION).unwrap());
        assert_eq!(e.total_rate(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(e.propose(&mut rng), StepOutcome::Absorbed);
    }

    #[test]
    fn empty_without_influx_is_absorbed() {
        let spec = ModelSpec::tasep(6, 0.0, 1.0, -0.5);
        let e = single(&spec, Configuration::empty(6, Capacity::EXCLUSION).unwrap());
        assert_eq!(e.total_rate(), 0.0);
    }

    #[test]
    fn single_active_move_is_deterministic() {
        let spec = ModelSpec::tasep(4, 1.0, 1.0, -0.5).with_regime(Regime::Impermeable);
        let e = single(&spec, Configuration::exclusion(&[1, 0, 1]).unwrap());
        let active = e.active_events();
        assert_eq!(active.len(), 1);
        assert_eq!(active[0].0.kind, EventKind::Bulk { from: 1, to: 2 });
        assert!((active[0].1 - 4.0).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            match e.propose(&mut rng) {
                StepOutcome::Event { event, .. } => {
                    assert_eq!(event.kind, EventKind::Bulk { from: 1, to: 2 })
                }
                StepOutcome::Absorbed => panic!("not absorbed"),
            }
        }
    }

    #[test]
    fn leaves_match_generator_after_many_steps() {
        // nonzero leaf ⇔ b > 0, checked against a fresh rebuild
        let spec = ModelSpec::taljep(12, 0.7, 0.6, 0.4, -0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eta = Configuration::exclusion(&[1, 0, 1, 1, 0, 0, 1, 0, 1, 0, 0]).unwrap();
        let mut e = single(&spec, eta);
        for _ in 0..2_000 {
            e.step(&mut rng).unwrap();
            let mut fresh = e.clone();
            fresh.rebuild();
            let a: Vec<f64> = e.leaf_rates().collect();
            let b: Vec<f64> = fresh.leaf_rates().collect();
            assert_eq!(a, b);
            let naive: f64 = a.iter().sum();
            assert!((e.total_rate() - naive).abs() <= 1e-9 * naive.max(1e-300));
        }
    }

    #[test]
    fn coupled_segments_split_rates() {
        let spec = ModelSpec::tasep(3, 1.0, 1.0, -0.5);
        let xi = Configuration::exclusion(&[0, 0]).unwrap();
        let zeta = Configuration::exclusion(&[1, 0]).unwrap();
        let e = Engine::new(&spec, vec![(Regime::Impermeable, xi), (Regime::InfluxOnly, zeta)]).unwrap();
        let bulk: Vec<_> = e
            .active_events()
            .into_iter()
            .filter(|(ev, _)| matches!(ev.kind, EventKind::Bulk { .. }))
            .collect();
        // only the ζ-only move at bond (1,2)
        assert_eq!(bulk.len(), 1);
        assert_eq!(bulk[0].0.mask, 0b10);
    }

    #[test]
    fn table_kernel_with_backward_jumps_runs() {
        let spec = ModelSpec {
            kernel: JumpKernel::Table(vec![(-1, 0.5), (1, 1.0), (2, 0.25)]),
            ..ModelSpec::tasep(8, 0.5, 0.5, -0.5)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut e = single(&spec, Configuration::exclusion(&[1, 0, 1, 0, 1, 0, 1]).unwrap());
        for _ in 0..500 {
            e.step(&mut rng).unwrap();
        }
        let mass = e.copy(0).total_mass() as i64;
        assert_eq!(mass - 4, e.influx_count(0) as i64 - e.outflux_count(0) as i64);
    }
}
