use serde::{Deserialize, Serialize};

use super::config::Capacity;
use crate::{Error, Result};

/// Bulk jump rate b(η(x), η(y)).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BulkRate {
    /// b(n, m) = n(1 − m), k = 1.
    Exclusion,
    /// b(n, m) = n(k − m)/k, finite k.
    Misanthrope,
    /// b(n, m) = 1{n > 0}·1{m < k}.
    ZeroRange,
    /// Arbitrary (k+1)×(k+1) table, row-major in n.
    Table { k: u32, values: Vec<f64> },
}

impl BulkRate {
    #[inline]
    pub fn rate(&self, n: u32, m: u32, capacity: Capacity) -> f64 {
        match self {
            BulkRate::Exclusion => f64::from(n.min(1)) * f64::from(1 - m.min(1)),
            BulkRate::Misanthrope => {
                let k = capacity.max_occupancy();
                f64::from(n) * f64::from(k.saturating_sub(m)) / f64::from(k)
            }
            BulkRate::ZeroRange => {
                if n > 0 && !capacity.is_full(m) {
                    1.0
                } else {
                    0.0
                }
            }
            BulkRate::Table { k, values } => {
                let w = *k as usize + 1;
                values[n as usize * w + m as usize]
            }
        }
    }

    /// Checks the attractiveness conditions by exhaustive scan over S_k:
    /// non-decreasing in n, non-increasing in m, and b(n,m) = 0 iff n = 0 or
    /// m = k. For k = ∞ the scan runs up to the hard cap.
    pub fn validate(&self, capacity: Capacity) -> Result<()> {
        let k = capacity.max_occupancy();
        match self {
            BulkRate::Exclusion if capacity != Capacity::EXCLUSION => {
                return Err(Error::InvalidRates("exclusion rate requires capacity k = 1".into()));
            }
            BulkRate::Misanthrope if !capacity.is_finite() => {
                return Err(Error::InvalidRates("misanthrope rate n(k−m)/k needs finite k".into()));
            }
            BulkRate::Table { k: tk, values } => {
                if capacity != Capacity::Finite(*tk) {
                    return Err(Error::InvalidRates(format!(
                        "rate table built for k={tk}, capacity is {capacity:?}"
                    )));
                }
                let w = *tk as usize + 1;
                if values.len() != w * w {
                    return Err(Error::InvalidRates(format!(
                        "rate table has {} entries, expected {}",
                        values.len(),
                        w * w
                    )));
                }
            }
            _ => {}
        }
        for n in 0..=k {
            for m in 0..=k {
                let b = self.rate(n, m, capacity);
                if !(b.is_finite() && b >= 0.0) {
                    return Err(Error::InvalidRates(format!("b({n},{m}) = {b}")));
                }
                let should_vanish = n == 0 || capacity.is_full(m);
                if should_vanish != (b == 0.0) {
                    return Err(Error::InvalidRates(format!(
                        "b({n},{m}) = {b} violates the zero-set condition"
                    )));
                }
                if n > 0 && self.rate(n - 1, m, capacity) > b {
                    return Err(Error::InvalidRates(format!("b not non-decreasing in n at ({n},{m})")));
                }
                if m > 0 && self.rate(n, m - 1, capacity) < b {
                    return Err(Error::InvalidRates(format!("b not non-increasing in m at ({n},{m})")));
                }
            }
        }
        Ok(())
    }
}

/// Rate profile on one side of the exterior, indexed by distance from the
/// bulk: d = −x on the left (x ≤ 0), d = x − N on the right (x ≥ N).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideProfile {
    pub near: Vec<f64>,
    pub tail: f64,
}

impl SideProfile {
    pub fn constant(v: f64) -> Self {
        Self { near: Vec::new(), tail: v }
    }

    pub fn at(&self, d: usize) -> f64 {
        self.near.get(d).copied().unwrap_or(self.tail)
    }

    pub fn sup(&self) -> f64 {
        self.near.iter().copied().fold(self.tail, f64::max)
    }
}

/// Exterior rate function (α or β) on ℤ ∖ Λ_N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reservoir {
    pub left: SideProfile,
    pub right: SideProfile,
}

impl Reservoir {
    pub fn constant(v: f64) -> Self {
        Self { left: SideProfile::constant(v), right: SideProfile::constant(v) }
    }

    pub fn left_only(v: f64) -> Self {
        Self { left: SideProfile::constant(v), right: SideProfile::constant(0.0) }
    }

    pub fn right_only(v: f64) -> Self {
        Self { left: SideProfile::constant(0.0), right: SideProfile::constant(v) }
    }

    /// Value at an exterior site x (x ≤ 0 or x ≥ n).
    pub fn at(&self, x: i64, n: usize) -> f64 {
        if x <= 0 {
            self.left.at((-x) as usize)
        } else {
            debug_assert!(x >= n as i64);
            self.right.at((x - n as i64) as usize)
        }
    }

    pub fn sup(&self) -> f64 {
        self.left.sup().max(self.right.sup())
    }

    fn validate(&self, name: &str) -> Result<()> {
        let all = self.left.near.iter().chain(&self.right.near).chain([&self.left.tail, &self.right.tail]);
        for &v in all {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidRates(format!("{name} has invalid value {v}")));
            }
        }
        Ok(())
    }
}

/// Piecewise-constant time modulation of reservoir rates, in macroscopic
/// time. Breakpoints are `(start, factor)` sorted by start; the first start
/// must be 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pieces: Vec<(f64, f64)>,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { pieces: vec![(0.0, 1.0)] }
    }
}

impl Schedule {
    pub fn new(pieces: Vec<(f64, f64)>) -> Result<Self> {
        if pieces.first().map(|p| p.0) != Some(0.0) {
            return Err(Error::InvalidRates("schedule must start at t = 0".into()));
        }
        for w in pieces.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidRates("schedule breakpoints must increase".into()));
            }
        }
        if pieces.iter().any(|&(_, f)| !(f.is_finite() && f >= 0.0)) {
            return Err(Error::InvalidRates("schedule factors must be finite and ≥ 0".into()));
        }
        Ok(Self { pieces })
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn factor_at(&self, t: f64) -> f64 {
        let i = self.pieces.partition_point(|&(s, _)| s <= t);
        self.pieces[i.saturating_sub(1)].1
    }

    /// First breakpoint strictly after `t`.
    pub fn next_breakpoint(&self, t: f64) -> Option<f64> {
        self.pieces.iter().map(|p| p.0).find(|&s| s > t)
    }

    /// ∫_0^T factor(t) dt.
    pub fn integral(&self, horizon: f64) -> f64 {
        let mut total = 0.0;
        for (i, &(start, f)) in self.pieces.iter().enumerate() {
            if start >= horizon {
                break;
            }
            let end = self.pieces.get(i + 1).map_or(horizon, |p| p.0.min(horizon));
            total += f * (end - start);
        }
        total
    }

    pub fn sup(&self) -> f64 {
        self.pieces.iter().map(|p| p.1).fold(0.0, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.pieces.len() == 1
    }
}

/// Bulk and boundary rate functions.
///
/// Boundary rates factor as b_influx(x, m) = α(x)·1{m < k} and
/// b_outflux(n, y) = 1{n > 0}·β(y); for k = 1 these are α(x)(1 − m) and
/// n·β(y).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFunctions {
    pub bulk: BulkRate,
    pub alpha: Reservoir,
    pub beta: Reservoir,
    pub alpha_schedule: Schedule,
    pub beta_schedule: Schedule,
}

impl RateFunctions {
    pub fn exclusion(alpha: f64, beta: f64) -> Self {
        Self {
            bulk: BulkRate::Exclusion,
            alpha: Reservoir::constant(alpha),
            beta: Reservoir::constant(beta),
            alpha_schedule: Schedule::default(),
            beta_schedule: Schedule::default(),
        }
    }

    pub fn validate(&self, capacity: Capacity) -> Result<()> {
        self.bulk.validate(capacity)?;
        self.alpha.validate("alpha")?;
        self.beta.validate("beta")
    }

    #[inline]
    pub fn bulk(&self, n: u32, m: u32, capacity: Capacity) -> f64 {
        self.bulk.rate(n, m, capacity)
    }

    /// Occupancy factor of b_influx at the target site.
    #[inline]
    pub fn influx_factor(m: u32, capacity: Capacity) -> f64 {
        if capacity.is_full(m) {
            0.0
        } else {
            1.0
        }
    }

    /// Occupancy factor of b_outflux at the source site.
    #[inline]
    pub fn outflux_factor(n: u32) -> f64 {
        f64::from(n.min(1))
    }

    /// ‖b_influx‖_∞ including the time modulation.
    pub fn influx_sup(&self) -> f64 {
        self.alpha.sup() * self.alpha_schedule.sup()
    }

    pub fn outflux_sup(&self) -> f64 {
        self.beta.sup() * self.beta_schedule.sup()
    }
}
