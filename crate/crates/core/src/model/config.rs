use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Maximal number of particles per site.
///
/// `Unbounded` stands for k = ∞; it carries a hard cap so that occupancies
/// fit in memory, and any move that would exceed the cap is reported as
/// [`Error::CapacityOverflow`] instead of being silently clamped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Capacity {
    Finite(u32),
    Unbounded { cap: u32 },
}

impl Capacity {
    pub const EXCLUSION: Capacity = Capacity::Finite(1);

    /// Largest storable occupancy.
    pub fn max_occupancy(self) -> u32 {
        match self {
            Capacity::Finite(k) => k,
            Capacity::Unbounded { cap } => cap,
        }
    }

    /// `m == k`; never true for k = ∞.
    pub fn is_full(self, m: u32) -> bool {
        matches!(self, Capacity::Finite(k) if m >= k)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Capacity::Finite(_))
    }
}

/// Elementary transformations of a configuration.
///
/// Sites are bulk indices in `1..=n-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    /// η^{x,y}: swap the occupancies of `x` and `y`.
    Exchange { x: usize, y: usize },
    /// η^{x→y}: move one particle, identity if η(x)=0 or η(y)=k.
    Jump { from: usize, to: usize },
    /// η^{x↑}: add a particle unless η(x)=k.
    FlipUp(usize),
    /// η^{x↓}: remove a particle unless η(x)=0.
    FlipDown(usize),
}

/// Occupancy vector over the bulk Λ_N = {1, …, N−1}.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Configuration {
    n: usize,
    capacity: Capacity,
    occupancy: Vec<u32>,
}

impl Configuration {
    pub fn empty(n: usize, capacity: Capacity) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("lattice size n={n} must be ≥ 2")));
        }
        Ok(Self { n, capacity, occupancy: vec![0; n - 1] })
    }

    pub fn full(n: usize, capacity: Capacity) -> Result<Self> {
        let mut c = Self::empty(n, capacity)?;
        let k = capacity.max_occupancy();
        c.occupancy.iter_mut().for_each(|o| *o = k);
        Ok(c)
    }

    /// Builds from occupancies of sites 1..=n−1 in order (so `n = len + 1`).
    pub fn from_occupancy(capacity: Capacity, occupancy: Vec<u32>) -> Result<Self> {
        let n = occupancy.len() + 1;
        if n < 2 {
            return Err(Error::InvalidSpec("configuration needs at least one bulk site".into()));
        }
        let k = capacity.max_occupancy();
        if let Some((i, &v)) = occupancy.iter().enumerate().find(|(_, &v)| v > k) {
            return Err(Error::CapacityOverflow { site: i + 1, cap: k.min(v) });
        }
        Ok(Self { n, capacity, occupancy })
    }

    /// Exclusion configuration from 0/1 values.
    pub fn exclusion(bits: &[u8]) -> Result<Self> {
        Self::from_occupancy(Capacity::EXCLUSION, bits.iter().map(|&b| u32::from(b)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    /// Number of bulk sites, N − 1.
    pub fn sites(&self) -> usize {
        self.occupancy.len()
    }

    pub fn occupancy(&self) -> &[u32] {
        &self.occupancy
    }

    /// η(x) for x ∈ Λ_N. Panics outside the bulk.
    #[inline]
    pub fn get(&self, x: usize) -> u32 {
        self.occupancy[x - 1]
    }

    pub fn try_get(&self, x: i64) -> Result<u32> {
        self.check_site(x)?;
        Ok(self.occupancy[x as usize - 1])
    }

    pub fn total_mass(&self) -> u64 {
        self.occupancy.iter().map(|&v| u64::from(v)).sum()
    }

    fn check_site(&self, x: i64) -> Result<()> {
        if x < 1 || x as usize > self.n - 1 {
            Err(Error::SiteOutsideBulk { site: x, max: self.n - 1 })
        } else {
            Ok(())
        }
    }

    /// Applies `mv`, returning the new configuration.
    pub fn apply_move(&self, mv: Move) -> Result<Self> {
        let mut next = self.clone();
        next.apply_in_place(mv)?;
        Ok(next)
    }

    /// In-place variant of [`apply_move`](Self::apply_move). Returns whether
    /// the configuration changed. On error the configuration is untouched.
    pub fn apply_in_place(&mut self, mv: Move) -> Result<bool> {
        let k = self.capacity;
        match mv {
            Move::Exchange { x, y } => {
                self.check_site(x as i64)?;
                self.check_site(y as i64)?;
                let (a, b) = (self.get(x), self.get(y));
                self.occupancy.swap(x - 1, y - 1);
                Ok(a != b)
            }
            Move::Jump { from, to } => {
                self.check_site(from as i64)?;
                self.check_site(to as i64)?;
                let (a, b) = (self.get(from), self.get(to));
                if a == 0 || k.is_full(b) || from == to {
                    return Ok(false);
                }
                if b >= k.max_occupancy() {
                    return Err(Error::CapacityOverflow { site: to, cap: k.max_occupancy() });
                }
                self.occupancy[from - 1] -= 1;
                self.occupancy[to - 1] += 1;
                Ok(true)
            }
            Move::FlipUp(x) => {
                self.check_site(x as i64)?;
                let a = self.get(x);
                if k.is_full(a) {
                    return Ok(false);
                }
                if a >= k.max_occupancy() {
                    return Err(Error::CapacityOverflow { site: x, cap: k.max_occupancy() });
                }
                self.occupancy[x - 1] += 1;
                Ok(true)
            }
            Move::FlipDown(x) => {
                self.check_site(x as i64)?;
                if self.get(x) == 0 {
                    return Ok(false);
                }
                self.occupancy[x - 1] -= 1;
                Ok(true)
            }
        }
    }

    /// Pointwise order a ≤ b.
    pub fn le(&self, other: &Self) -> Result<bool> {
        if self.occupancy.len() != other.occupancy.len() {
            return Err(Error::Mismatch(format!(
                "lengths {} and {}",
                self.occupancy.len(),
                other.occupancy.len()
            )));
        }
        Ok(self.occupancy.iter().zip(&other.occupancy).all(|(a, b)| a <= b))
    }

    /// Index of this configuration in the mixed-radix enumeration of Ω_N
    /// (site 1 is the least significant digit).
    pub fn state_index(&self) -> usize {
        let base = self.capacity.max_occupancy() as usize + 1;
        self.occupancy.iter().rev().fold(0usize, |acc, &v| acc * base + v as usize)
    }

    /// Inverse of [`state_index`](Self::state_index).
    pub fn from_state_index(n: usize, capacity: Capacity, mut index: usize) -> Result<Self> {
        let mut c = Self::empty(n, capacity)?;
        let base = capacity.max_occupancy() as usize + 1;
        for v in c.occupancy.iter_mut() {
            *v = (index % base) as u32;
            index /= base;
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: u32, occ: &[u32]) -> Configuration {
        Configuration::from_occupancy(Capacity::Finite(k), occ.to_vec()).unwrap()
    }

    #[test]
    fn exchange_swaps_sites() {
        let eta = cfg(1, &[1, 0]);
        assert_eq!(eta.apply_move(Move::Exchange { x: 1, y: 2 }).unwrap(), cfg(1, &[0, 1]));
    }

    #[test]
    fn jump_into_full_site_is_identity() {
        let eta = cfg(2, &[2, 2]);
        assert_eq!(eta.apply_move(Move::Jump { from: 1, to: 2 }).unwrap(), eta);
    }

    #[test]
    fn jump_from_empty_site_is_identity() {
        let eta = cfg(2, &[0, 1]);
        assert_eq!(eta.apply_move(Move::Jump { from: 1, to: 2 }).unwrap(), eta);
    }

    #[test]
    fn flips_follow_delta_rules() {
        let eta = cfg(1, &[0, 1, 0]);
        let out = eta
            .apply_move(Move::FlipUp(1))
            .and_then(|e| e.apply_move(Move::FlipDown(2)))
            .unwrap();
        assert_eq!(out, cfg(1, &[1, 0, 0]));
        // clamped at 0 and k
        assert_eq!(out.apply_move(Move::FlipDown(2)).unwrap(), out);
        assert_eq!(out.apply_move(Move::FlipUp(1)).unwrap(), out);
    }

    #[test]
    fn out_of_range_site_is_rejected() {
        let eta = cfg(1, &[0, 1, 0]);
        for mv in [Move::FlipUp(0), Move::FlipDown(4), Move::Jump { from: 1, to: 9 }] {
            let err = eta.apply_move(mv).unwrap_err();
            assert!(err.to_string().starts_with("site outside bulk"), "{err}");
        }
    }

    #[test]
    fn unbounded_capacity_reports_overflow() {
        let cap = Capacity::Unbounded { cap: 3 };
        let eta = Configuration::from_occupancy(cap, vec![3, 3]).unwrap();
        assert!(matches!(
            eta.apply_move(Move::Jump { from: 1, to: 2 }),
            Err(Error::CapacityOverflow { site: 2, cap: 3 })
        ));
        assert!(matches!(eta.apply_move(Move::FlipUp(1)), Err(Error::CapacityOverflow { .. })));
    }

    #[test]
    fn state_index_round_trips() {
        let eta = cfg(2, &[2, 0, 1, 2]);
        let idx = eta.state_index();
        assert_eq!(Configuration::from_state_index(5, Capacity::Finite(2), idx).unwrap(), eta);
    }

    #[test]
    fn ordering_requires_equal_lengths() {
        assert!(cfg(1, &[0, 1]).le(&cfg(1, &[1, 0, 0])).is_err());
        assert!(!cfg(1, &[0, 1]).le(&cfg(1, &[1, 0])).unwrap());
        assert!(cfg(1, &[0, 0]).le(&cfg(1, &[1, 1])).unwrap());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_move(sites: usize) -> impl Strategy<Value = Move> {
            let s = 1..=sites;
            prop_oneof![
                (s.clone(), s.clone()).prop_map(|(x, y)| Move::Exchange { x, y }),
                (s.clone(), s.clone()).prop_map(|(from, to)| Move::Jump { from, to }),
                s.clone().prop_map(Move::FlipUp),
                s.prop_map(Move::FlipDown),
            ]
        }

        proptest! {
            #[test]
            fn moves_respect_capacity(
                k in 1u32..4,
                init in proptest::collection::vec(0u32..4, 2..10),
                moves in proptest::collection::vec(arb_move(9), 1..60),
            ) {
                let init: Vec<u32> = init.into_iter().map(|v| v.min(k)).collect();
                let sites = init.len();
                let mut eta = Configuration::from_occupancy(Capacity::Finite(k), init).unwrap();
                for mv in moves {
                    let before = eta.total_mass();
                    let in_range = match mv {
                        Move::Exchange { x, y } | Move::Jump { from: x, to: y } => x <= sites && y <= sites,
                        Move::FlipUp(x) | Move::FlipDown(x) => x <= sites,
                    };
                    match eta.apply_in_place(mv) {
                        Ok(changed) => {
                            prop_assert!(in_range);
                            let after = eta.total_mass();
                            match mv {
                                Move::Exchange { .. } | Move::Jump { .. } => prop_assert_eq!(before, after),
                                Move::FlipUp(_) => prop_assert_eq!(after, before + u64::from(changed)),
                                Move::FlipDown(_) => prop_assert_eq!(after + u64::from(changed), before),
                            }
                        }
                        Err(_) => prop_assert!(!in_range),
                    }
                    prop_assert!(eta.occupancy().iter().all(|&v| v <= k));
                }
            }
        }
    }
}
