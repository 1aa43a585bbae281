use serde::{Deserialize, Serialize};

use super::config::Capacity;
use super::kernel::{JumpKernel, KernelPhase};
use super::rates::{RateFunctions, Reservoir};
use crate::{Error, Result};

/// Boundary weakness θ(N).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Theta {
    /// θ(N) = N^m with m < 0.
    Power(f64),
    /// θ ≡ 0.
    Zero,
    /// Tabulated values per N.
    Table(Vec<(usize, f64)>),
}

impl Theta {
    pub fn value(&self, n: usize) -> Result<f64> {
        match self {
            Theta::Power(m) => Ok((n as f64).powf(*m)),
            Theta::Zero => Ok(0.0),
            Theta::Table(t) => t
                .iter()
                .find(|(k, _)| *k == n)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::InvalidSpec(format!("θ table has no entry for N={n}"))),
        }
    }
}

/// Time speed-up κ(N).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Kappa {
    /// Chosen from the kernel phase: N, N/ln N or N^γ.
    Auto,
    Linear,
    LinearOverLog,
    Power(f64),
    Constant(f64),
}

impl Kappa {
    pub fn value(&self, n: usize, kernel: &JumpKernel) -> f64 {
        let nf = n as f64;
        match self {
            Kappa::Auto => match kernel.phase() {
                KernelPhase::Hyperbolic => nf,
                KernelPhase::Critical => nf / nf.ln(),
                KernelPhase::Fractional(g) => nf.powf(g),
            },
            Kappa::Linear => nf,
            Kappa::LinearOverLog => nf / nf.ln(),
            Kappa::Power(e) => nf.powf(*e),
            Kappa::Constant(c) => *c,
        }
    }
}

/// Which generators act on the process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// κ ℒ_bulk.
    Impermeable,
    /// κ ℒ_bulk + θκ ℒ_influx.
    InfluxOnly,
    /// κ ℒ_bulk + θκ (ℒ_influx + ℒ_outflux).
    FullWeak,
}

impl Regime {
    pub fn has_influx(self) -> bool {
        !matches!(self, Regime::Impermeable)
    }

    pub fn has_outflux(self) -> bool {
        matches!(self, Regime::FullWeak)
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::Impermeable => "impermeable",
            Regime::InfluxOnly => "influx_only",
            Regime::FullWeak => "full_weak",
        }
    }
}

/// Complete description of one particle system on Λ_N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    pub capacity: Capacity,
    pub kernel: JumpKernel,
    pub rates: RateFunctions,
    pub theta: Theta,
    pub kappa: Kappa,
    /// Macroscopic horizon T; the engine runs microscopic time κ(N)·T.
    pub horizon: f64,
    pub regime: Regime,
}

/// B(N) = κθ Σ_{x∈Λ,y∉Λ} (p(x,y) + p(y,x)) and its parts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundaryRateSum {
    pub n: usize,
    pub kappa: f64,
    pub theta: f64,
    /// κθ Σ p(y,x): influx direction.
    pub influx_side: f64,
    /// κθ Σ p(x,y): outflux direction.
    pub outflux_side: f64,
    pub total: f64,
    /// B(N)/N, the o(N) diagnostic.
    pub per_site: f64,
}

impl ModelSpec {
    /// Nearest-neighbour TASEP with constant reservoirs and θ = N^m.
    pub fn tasep(n: usize, alpha: f64, beta: f64, theta_exponent: f64) -> Self {
        Self {
            n,
            capacity: Capacity::EXCLUSION,
            kernel: JumpKernel::NearestNeighbour,
            rates: RateFunctions::exclusion(alpha, beta),
            theta: Theta::Power(theta_exponent),
            kappa: Kappa::Linear,
            horizon: 1.0,
            regime: Regime::FullWeak,
        }
    }

    /// Long-jump TALJEP with κ from the kernel phase.
    pub fn taljep(n: usize, gamma: f64, alpha: f64, beta: f64, theta_exponent: f64) -> Self {
        Self {
            kernel: JumpKernel::LongJump { gamma },
            kappa: Kappa::Auto,
            ..Self::tasep(n, alpha, beta, theta_exponent)
        }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_regime(&self, regime: Regime) -> Self {
        Self { regime, ..self.clone() }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidSpec(format!("n={} must be ≥ 2", self.n)));
        }
        self.kernel.validate()?;
        self.rates.validate(self.capacity)?;
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::InvalidSpec(format!("horizon T={} must be ≥ 0", self.horizon)));
        }
        if self.regime != Regime::Impermeable {
            match &self.theta {
                Theta::Power(m) if !(*m < 0.0) => {
                    return Err(Error::InvalidSpec(format!(
                        "θ(N)=N^m must vanish: m={m} is not < 0"
                    )));
                }
                Theta::Table(t) if t.iter().any(|(_, v)| !(v.is_finite() && *v >= 0.0)) => {
                    return Err(Error::InvalidSpec("θ table values must be ≥ 0".into()));
                }
                _ => {}
            }
        }
        let kappa = self.kappa_value();
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidSpec(format!("κ(N)={kappa} must be positive")));
        }
        self.theta_value()?;
        Ok(())
    }

    pub fn kappa_value(&self) -> f64 {
        self.kappa.value(self.n, &self.kernel)
    }

    pub fn theta_value(&self) -> Result<f64> {
        self.theta.value(self.n)
    }

    /// θ(N)κ(N).
    pub fn boundary_scale(&self) -> Result<f64> {
        Ok(self.theta_value()? * self.kappa_value())
    }

    /// Time-independent influx rates r_in(y) = θκ Σ_{x∉Λ} p(x,y) α(x),
    /// y = 1..N−1, with exact finite sums and closed tail sums.
    pub fn influx_rate_profile(&self) -> Result<Vec<f64>> {
        self.kernel.validate()?;
        let scale = self.boundary_scale()?;
        Ok((1..self.n).map(|y| scale * exterior_to_site(&self.kernel, &self.rates.alpha, self.n, y)).collect())
    }

    /// r_out(x) = θκ Σ_{y∉Λ} p(x,y) β(y), x = 1..N−1.
    pub fn outflux_rate_profile(&self) -> Result<Vec<f64>> {
        self.kernel.validate()?;
        let scale = self.boundary_scale()?;
        Ok((1..self.n).map(|x| scale * site_to_exterior(&self.kernel, &self.rates.beta, self.n, x)).collect())
    }

    pub fn boundary_rate_sum(&self) -> Result<BoundaryRateSum> {
        let kappa = self.kappa_value();
        let theta = self.theta_value()?;
        let pairs = self.kernel.boundary_pair_sum(self.n)?;
        let side = kappa * theta * pairs;
        let total = 2.0 * side;
        Ok(BoundaryRateSum {
            n: self.n,
            kappa,
            theta,
            influx_side: side,
            outflux_side: side,
            total,
            per_site: total / self.n as f64,
        })
    }

    /// λ_N = ∫_0^T ‖b_influx(t)‖_∞ dt · θκ Σ_{x∈Λ,y∉Λ} p(y,x): mean of the
    /// Poisson variable dominating the number of injected particles.
    pub fn influx_poisson_mean(&self) -> Result<f64> {
        let b = self.boundary_rate_sum()?;
        let alpha_time = self.rates.alpha.sup() * self.rates.alpha_schedule.integral(self.horizon);
        Ok(alpha_time * b.influx_side)
    }

    /// Outflux analogue of [`influx_poisson_mean`](Self::influx_poisson_mean)
    /// with ‖β‖_∞ and Σ p(x,y).
    pub fn outflux_poisson_mean(&self) -> Result<f64> {
        let b = self.boundary_rate_sum()?;
        let beta_time = self.rates.beta.sup() * self.rates.beta_schedule.integral(self.horizon);
        Ok(beta_time * b.outflux_side)
    }
}

/// Σ_{x∉Λ} p(y − x)·r(x) for bulk site y.
fn exterior_to_site(kernel: &JumpKernel, r: &Reservoir, n: usize, y: usize) -> f64 {
    let mut total = 0.0;
    // left: x = −d, displacement y + d
    let left = &r.left;
    for (d, &v) in left.near.iter().enumerate() {
        total += v * kernel.rate((y + d) as i64);
    }
    if left.tail != 0.0 {
        total += left.tail * kernel.positive_tail((y + left.near.len()) as u64);
    }
    // right: x = n + d, displacement −(n + d − y)
    let right = &r.right;
    for (d, &v) in right.near.iter().enumerate() {
        total += v * kernel.rate(-((n + d - y) as i64));
    }
    if right.tail != 0.0 {
        total += right.tail * kernel.negative_tail((n + right.near.len() - y) as u64);
    }
    total
}

/// Σ_{y∉Λ} p(y − x)·r(y) for bulk site x.
fn site_to_exterior(kernel: &JumpKernel, r: &Reservoir, n: usize, x: usize) -> f64 {
    let mut total = 0.0;
    // right: y = n + d, displacement n + d − x
    let right = &r.right;
    for (d, &v) in right.near.iter().enumerate() {
        total += v * kernel.rate((n + d - x) as i64);
    }
    if right.tail != 0.0 {
        total += right.tail * kernel.positive_tail((n + right.near.len() - x) as u64);
    }
    // left: y = −d, displacement −(x + d)
    let left = &r.left;
    for (d, &v) in left.near.iter().enumerate() {
        total += v * kernel.rate(-((x + d) as i64));
    }
    if left.tail != 0.0 {
        total += left.tail * kernel.negative_tail((x + left.near.len()) as u64);
    }
    total
}
