//! Matrix-exponential law of κ(N)ℒ^N on the full state space, for tiny N.
//!
//! The generator is assembled straight from the rate formulas (no event
//! table is shared with the engine), and exp(tQ) is applied to a point mass
//! by uniformization over steps with Λτ ≤ 8.

use crate::model::{Capacity, Configuration, ModelSpec, RateFunctions, Regime};
use crate::{Error, Result};

pub const MAX_EXACT_STATES: usize = 1 << 16;

const STEP_LOAD: f64 = 8.0;
const TAIL_MASS: f64 = 1e-15;

/// Sparse generator: off-diagonal entries and the diagonal.
#[derive(Clone, Debug)]
pub struct Generator {
    n: usize,
    capacity: Capacity,
    /// (from, to, rate), from ≠ to, rate > 0
    entries: Vec<(usize, usize, f64)>,
    diag: Vec<f64>,
}

pub fn state_count(n: usize, capacity: Capacity) -> Result<usize> {
    let base = capacity.max_occupancy() as u128 + 1;
    let mut states: u128 = 1;
    for _ in 1..n {
        states = states.saturating_mul(base);
        if states > MAX_EXACT_STATES as u128 {
            return Err(Error::StateSpaceTooLarge { states, limit: MAX_EXACT_STATES });
        }
    }
    Ok(states as usize)
}

impl Generator {
    /// Generator of `regime` dynamics with reservoir rates multiplied by the
    /// given time factors.
    pub fn new(spec: &ModelSpec, regime: Regime, alpha_factor: f64, beta_factor: f64) -> Result<Self> {
        spec.validate()?;
        let n = spec.n;
        let cap = spec.capacity;
        let states = state_count(n, cap)?;
        let kappa = spec.kappa_value();
        let r_in = if regime.has_influx() { spec.influx_rate_profile()? } else { vec![0.0; n - 1] };
        let r_out = if regime.has_outflux() { spec.outflux_rate_profile()? } else { vec![0.0; n - 1] };
        let mut entries = Vec::new();
        let mut diag = vec![0.0; states];
        for s in 0..states {
            let eta = Configuration::from_state_index(n, cap, s)?;
            let mut push = |to: Configuration, rate: f64| {
                if rate > 0.0 {
                    let t = to.state_index();
                    if t != s {
                        entries.push((s, t, rate));
                        diag[s] -= rate;
                    }
                }
            };
            for x in 1..n {
                for y in 1..n {
                    if x == y {
                        continue;
                    }
                    let p = spec.kernel.rate(y as i64 - x as i64);
                    if p == 0.0 {
                        continue;
                    }
                    let rate = kappa * p * spec.rates.bulk(eta.get(x), eta.get(y), cap);
                    if rate > 0.0 {
                        push(eta.apply_move(crate::model::Move::Jump { from: x, to: y })?, rate);
                    }
                }
                let up = alpha_factor * r_in[x - 1] * RateFunctions::influx_factor(eta.get(x), cap);
                if up > 0.0 {
                    push(eta.apply_move(crate::model::Move::FlipUp(x))?, up);
                }
                let down = beta_factor * r_out[x - 1] * RateFunctions::outflux_factor(eta.get(x));
                if down > 0.0 {
                    push(eta.apply_move(crate::model::Move::FlipDown(x))?, down);
                }
            }
        }
        Ok(Self { n, capacity: cap, entries, diag })
    }

    pub fn states(&self) -> usize {
        self.diag.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capacity(&self) -> Capacity {
        self.capacity
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Dense row-major Q (for tests on very small spaces).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let s = self.states();
        let mut q = vec![vec![0.0; s]; s];
        for (i, d) in self.diag.iter().enumerate() {
            q[i][i] = *d;
        }
        for &(a, b, r) in &self.entries {
            q[a][b] += r;
        }
        q
    }

    /// max_i |Σ_j Q_ij|.
    pub fn max_row_sum(&self) -> f64 {
        let mut sums = self.diag.clone();
        for &(a, _, r) in &self.entries {
            sums[a] += r;
        }
        sums.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// p ← p·exp(tQ).
    pub fn propagate(&self, p: &mut Vec<f64>, t: f64) {
        let lambda = self.diag.iter().fold(0.0f64, |m, d| m.max(-d));
        if t <= 0.0 || lambda == 0.0 {
            return;
        }
        let steps = (lambda * t / STEP_LOAD).ceil().max(1.0) as usize;
        let tau = t / steps as f64;
        let load = lambda * tau;
        for _ in 0..steps {
            let mut term = p.clone();
            let mut weight = (-load).exp();
            let mut acc: Vec<f64> = term.iter().map(|v| v * weight).collect();
            let mut mass = weight;
            let mut k = 0usize;
            while 1.0 - mass > TAIL_MASS && k < 10_000 {
                k += 1;
                term = self.uniformized_step(&term, lambda);
                weight *= load / k as f64;
                mass += weight;
                for (a, v) in acc.iter_mut().zip(&term) {
                    *a += weight * v;
                }
            }
            *p = acc;
        }
    }

    /// v·P with P = I + Q/Λ.
    fn uniformized_step(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        let mut out: Vec<f64> = v.iter().zip(&self.diag).map(|(x, d)| x * (1.0 + d / lambda)).collect();
        for &(a, b, r) in &self.entries {
            out[b] += v[a] * r / lambda;
        }
        out
    }
}

/// Law of η_t under the spec's regime started from η₀, indexed by
/// [`Configuration::state_index`]. Piecewise-constant reservoir schedules
/// are propagated piece by piece.
pub fn exact_ctmc_distribution(spec: &ModelSpec, eta0: &Configuration, t: f64) -> Result<Vec<f64>> {
    if eta0.n() != spec.n || eta0.capacity() != spec.capacity {
        return Err(Error::Mismatch("initial configuration does not match spec".into()));
    }
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("time t={t} must be ≥ 0")));
    }
    let states = state_count(spec.n, spec.capacity)?;
    let mut p = vec![0.0; states];
    p[eta0.state_index()] = 1.0;
    let alpha = &spec.rates.alpha_schedule;
    let beta = &spec.rates.beta_schedule;
    let mut now = 0.0;
    while now < t {
        let next = [alpha.next_breakpoint(now), beta.next_breakpoint(now)]
            .into_iter()
            .flatten()
            .fold(t, f64::min);
        let q = Generator::new(spec, spec.regime, alpha.factor_at(now), beta.factor_at(now))?;
        q.propagate(&mut p, next - now);
        now = next;
    }
    Ok(p)
}
