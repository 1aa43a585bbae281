use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Translation-invariant jump rates p(x, y) = p(y − x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum JumpKernel {
    /// p(z) = 1 iff z = 1.
    NearestNeighbour,
    /// p(z) = z^{−(1+γ)} for z ≥ 1.
    LongJump { gamma: f64 },
    /// Finite displacement → rate map; displacements may be negative.
    Table(Vec<(i64, f64)>),
}

/// Total per-particle rate and the normalised displacement law.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelPmf {
    pub total_rate: f64,
    kind: PmfKind,
}

#[derive(Clone, Debug, PartialEq)]
enum PmfKind {
    Finite(Vec<(i64, f64)>),
    PowerLaw { exponent: f64 },
}

impl KernelPmf {
    /// Probability of displacement `z`.
    pub fn prob(&self, z: i64) -> f64 {
        match &self.kind {
            PmfKind::Finite(entries) => {
                entries.iter().find(|(d, _)| *d == z).map_or(0.0, |(_, p)| *p)
            }
            PmfKind::PowerLaw { exponent } => {
                if z >= 1 {
                    (z as f64).powf(-exponent) / self.total_rate
                } else {
                    0.0
                }
            }
        }
    }

    /// Support with probabilities for finite kernels; `None` for power laws.
    pub fn finite_support(&self) -> Option<&[(i64, f64)]> {
        match &self.kind {
            PmfKind::Finite(e) => Some(e),
            PmfKind::PowerLaw { .. } => None,
        }
    }
}

/// Coarse phase of a kernel, which fixes the natural time scale κ(N).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelPhase {
    /// Finite mean jump: κ(N) = N.
    Hyperbolic,
    /// γ = 1: κ(N) = N / ln N.
    Critical,
    /// γ ∈ (0,1): κ(N) = N^γ.
    Fractional(f64),
}

/// Number of leading terms summed directly before the Euler–Maclaurin tail.
const DIRECT_TERMS: u64 = 64;

/// Σ_{z ≥ from} z^{−s} for s > 1, from ≥ 1.
///
/// Terms below [`DIRECT_TERMS`] are summed directly; the remainder uses the
/// Euler–Maclaurin expansion with three Bernoulli corrections, whose truncation
/// error is below 1e−14 relative for the exponents used here.
pub fn power_sum_tail(s: f64, from: u64) -> f64 {
    assert!(s > 1.0, "power sum needs exponent > 1, got {s}");
    let from = from.max(1);
    let start = from.max(DIRECT_TERMS);
    // sum small terms last-to-first to reduce rounding
    let direct: f64 = (from..start).rev().map(|z| (z as f64).powf(-s)).sum();
    let m = start as f64;
    let fm = m.powf(-s);
    let integral = m.powf(1.0 - s) / (s - 1.0);
    let c1 = s * fm / (12.0 * m);
    let c2 = s * (s + 1.0) * (s + 2.0) * fm / (720.0 * m.powi(3));
    let c3 = s * (s + 1.0) * (s + 2.0) * (s + 3.0) * (s + 4.0) * fm / (30240.0 * m.powi(5));
    direct + integral + 0.5 * fm + c1 - c2 + c3
}

/// Riemann zeta ζ(s) for s > 1.
pub fn zeta(s: f64) -> f64 {
    power_sum_tail(s, 1)
}

impl JumpKernel {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpKernel::NearestNeighbour => Ok(()),
            JumpKernel::LongJump { gamma } => {
                if gamma.is_finite() && *gamma > 0.0 {
                    Ok(())
                } else {
                    Err(Error::NonSummableKernel(format!("long-jump exponent γ={gamma} must be > 0")))
                }
            }
            JumpKernel::Table(entries) => {
                let mut seen = std::collections::BTreeSet::new();
                for &(z, r) in entries {
                    if z == 0 {
                        return Err(Error::InvalidKernel("displacement 0 is not a jump".into()));
                    }
                    if !(r.is_finite() && r >= 0.0) {
                        return Err(Error::InvalidKernel(format!("rate {r} at displacement {z}")));
                    }
                    if !seen.insert(z) {
                        return Err(Error::InvalidKernel(format!("duplicate displacement {z}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// p(z).
    pub fn rate(&self, z: i64) -> f64 {
        match self {
            JumpKernel::NearestNeighbour => f64::from(u8::from(z == 1)),
            JumpKernel::LongJump { gamma } => {
                if z >= 1 {
                    (z as f64).powf(-(1.0 + gamma))
                } else {
                    0.0
                }
            }
            JumpKernel::Table(entries) => {
                entries.iter().find(|(d, _)| *d == z).map_or(0.0, |(_, r)| *r)
            }
        }
    }

    /// Σ_z p(z).
    pub fn total_rate(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self {
            JumpKernel::NearestNeighbour => 1.0,
            JumpKernel::LongJump { gamma } => zeta(1.0 + gamma),
            JumpKernel::Table(entries) => entries.iter().map(|(_, r)| r).sum(),
        })
    }

    pub fn pmf(&self) -> Result<KernelPmf> {
        let total_rate = self.total_rate()?;
        let kind = match self {
            JumpKernel::NearestNeighbour => PmfKind::Finite(vec![(1, 1.0)]),
            JumpKernel::LongJump { gamma } => PmfKind::PowerLaw { exponent: 1.0 + gamma },
            JumpKernel::Table(entries) => {
                if total_rate <= 0.0 {
                    return Err(Error::InvalidKernel("table kernel has zero total rate".into()));
                }
                let mut e: Vec<_> = entries
                    .iter()
                    .filter(|(_, r)| *r > 0.0)
                    .map(|&(z, r)| (z, r / total_rate))
                    .collect();
                e.sort_by_key(|(z, _)| *z);
                PmfKind::Finite(e)
            }
        };
        Ok(KernelPmf { total_rate, kind })
    }

    /// Σ_{z ≥ from} p(z) for `from ≥ 1`.
    pub fn positive_tail(&self, from: u64) -> f64 {
        let from = from.max(1);
        match self {
            JumpKernel::NearestNeighbour => f64::from(u8::from(from <= 1)),
            JumpKernel::LongJump { gamma } => power_sum_tail(1.0 + gamma, from),
            JumpKernel::Table(entries) => entries
                .iter()
                .filter(|(z, _)| *z >= from as i64)
                .map(|(_, r)| r)
                .sum(),
        }
    }

    /// Σ_{z ≤ −from} p(z) for `from ≥ 1`.
    pub fn negative_tail(&self, from: u64) -> f64 {
        let from = from.max(1);
        match self {
            JumpKernel::NearestNeighbour | JumpKernel::LongJump { .. } => 0.0,
            JumpKernel::Table(entries) => entries
                .iter()
                .filter(|(z, _)| *z <= -(from as i64))
                .map(|(_, r)| r)
                .sum(),
        }
    }

    /// Σ_z p(z)·min(|z|, n−1): the number of (bulk, exterior) pairs at each
    /// displacement, weighted by the kernel. Equal to both
    /// Σ_{x∈Λ,y∉Λ} p(x,y) and Σ_{x∈Λ,y∉Λ} p(y,x).
    pub fn boundary_pair_sum(&self, n: usize) -> Result<f64> {
        self.validate()?;
        let cap = (n - 1) as f64;
        Ok(match self {
            JumpKernel::NearestNeighbour => 1.0,
            JumpKernel::LongJump { gamma } => {
                let s = 1.0 + gamma;
                let head: f64 = (1..n).rev().map(|z| (z as f64).powf(1.0 - s)).sum();
                head + cap * power_sum_tail(s, n as u64)
            }
            JumpKernel::Table(entries) => {
                entries.iter().map(|&(z, r)| r * (z.unsigned_abs() as f64).min(cap)).sum()
            }
        })
    }

    /// Displacements usable by bulk jumps on Λ_N, i.e. |z| ≤ n − 2, p(z) > 0.
    pub fn bulk_displacements(&self, n: usize) -> Vec<(i64, f64)> {
        let reach = n.saturating_sub(2) as i64;
        match self {
            JumpKernel::NearestNeighbour => {
                if reach >= 1 {
                    vec![(1, 1.0)]
                } else {
                    vec![]
                }
            }
            JumpKernel::LongJump { .. } => (1..=reach).map(|z| (z, self.rate(z))).collect(),
            JumpKernel::Table(entries) => {
                let mut e: Vec<_> = entries
                    .iter()
                    .copied()
                    .filter(|&(z, r)| r > 0.0 && z.abs() <= reach)
                    .collect();
                e.sort_by_key(|(z, _)| *z);
                e
            }
        }
    }

    /// Σ_z z·p(z), the mean drift per unit time.
    pub fn first_moment(&self) -> Result<f64> {
        self.validate()?;
        match self {
            JumpKernel::NearestNeighbour => Ok(1.0),
            JumpKernel::LongJump { gamma } => {
                if *gamma > 1.0 {
                    Ok(zeta(*gamma))
                } else {
                    Err(Error::NonSummableKernel(format!("mean jump infinite for γ={gamma} ≤ 1")))
                }
            }
            JumpKernel::Table(e) => Ok(e.iter().map(|&(z, r)| z as f64 * r).sum()),
        }
    }

    /// Σ_{z≥1} z^q p(z) for positive displacements (q real).
    pub fn positive_moment(&self, q: f64) -> Result<f64> {
        self.validate()?;
        match self {
            JumpKernel::NearestNeighbour => Ok(1.0),
            JumpKernel::LongJump { gamma } => {
                let s = 1.0 + gamma - q;
                if s > 1.0 {
                    Ok(zeta(s))
                } else {
                    Err(Error::NonSummableKernel(format!("moment of order {q} infinite for γ={gamma}")))
                }
            }
            JumpKernel::Table(e) => {
                Ok(e.iter().filter(|(z, _)| *z > 0).map(|&(z, r)| (z as f64).powf(q) * r).sum())
            }
        }
    }

    pub fn phase(&self) -> KernelPhase {
        match self {
            JumpKernel::LongJump { gamma } if *gamma < 1.0 => KernelPhase::Fractional(*gamma),
            JumpKernel::LongJump { gamma } if *gamma == 1.0 => KernelPhase::Critical,
            _ => KernelPhase::Hyperbolic,
        }
    }

    /// True when every jump goes to the right.
    pub fn is_totally_asymmetric(&self) -> bool {
        match self {
            JumpKernel::NearestNeighbour | JumpKernel::LongJump { .. } => true,
            JumpKernel::Table(e) => e.iter().all(|&(z, r)| z > 0 || r == 0.0),
        }
    }

    /// Sampler for single displacements drawn from the normalised kernel.
    pub fn sampler(&self) -> Result<DisplacementSampler> {
        let pmf = self.pmf()?;
        Ok(match self {
            JumpKernel::NearestNeighbour => DisplacementSampler::Constant(1),
            JumpKernel::LongJump { gamma } => {
                DisplacementSampler::PowerLaw(PowerLawSampler::new(*gamma, 4096))
            }
            JumpKernel::Table(_) => {
                let support = pmf.finite_support().expect("table pmf is finite").to_vec();
                let mut acc = 0.0;
                let cdf = support
                    .iter()
                    .map(|(_, p)| {
                        acc += p;
                        acc
                    })
                    .collect();
                DisplacementSampler::Table {
                    values: support.into_iter().map(|(z, _)| z).collect(),
                    cdf,
                }
            }
        })
    }
}

#[derive(Clone, Debug)]
pub enum DisplacementSampler {
    Constant(i64),
    Table { values: Vec<i64>, cdf: Vec<f64> },
    PowerLaw(PowerLawSampler),
}

impl DisplacementSampler {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        match self {
            DisplacementSampler::Constant(z) => *z,
            DisplacementSampler::Table { values, cdf } => {
                let u = rng.random::<f64>() * cdf[cdf.len() - 1];
                let i = cdf.partition_point(|&c| c <= u).min(values.len() - 1);
                values[i]
            }
            DisplacementSampler::PowerLaw(s) => s.sample(rng) as i64,
        }
    }
}

/// Exact sampler for P(z) ∝ z^{−(1+γ)}, z ≥ 1, split at a head cutoff `J`:
/// inversion over a cumulative table for z ≤ J, rejection from a continuous
/// Pareto envelope for z > J.
#[derive(Clone, Debug)]
pub struct PowerLawSampler {
    exponent: f64,
    head_cdf: Vec<f64>,
    tail_mass: f64,
}

impl PowerLawSampler {
    pub fn new(gamma: f64, head: u64) -> Self {
        let exponent = 1.0 + gamma;
        let head = head.max(1);
        let mut acc = 0.0;
        let head_cdf = (1..=head)
            .map(|z| {
                acc += (z as f64).powf(-exponent);
                acc
            })
            .collect();
        let tail_mass = power_sum_tail(exponent, head + 1);
        Self { exponent, head_cdf, tail_mass }
    }

    /// Largest displacement covered by the inversion table.
    pub fn head(&self) -> u64 {
        self.head_cdf.len() as u64
    }

    /// Σ_{z ≤ J} z^{−(1+γ)}.
    pub fn head_mass(&self) -> f64 {
        self.head_cdf[self.head_cdf.len() - 1]
    }

    /// Σ_{z > J} z^{−(1+γ)}.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = self.head_mass() + self.tail_mass;
        if rng.random::<f64>() * total < self.head_mass() {
            self.sample_head(rng)
        } else {
            self.sample_tail(rng)
        }
    }

    /// Draw from the law conditioned on z ≤ J.
    pub fn sample_head<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = rng.random::<f64>() * self.head_mass();
        (self.head_cdf.partition_point(|&c| c <= u).min(self.head_cdf.len() - 1) + 1) as u64
    }

    /// Draw from the law conditioned on z > J.
    pub fn sample_tail<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        sample_power_tail(rng, self.exponent, self.head() + 1)
    }
}

/// Exact draw of z ≥ z0 with P(z) ∝ z^{−s}, s > 1.
///
/// Proposal ⌊Y⌋ with Y Pareto on [z0, ∞); the acceptance ratio
/// z^{−s} / ∫_z^{z+1} y^{−s} dy is bounded by (1 + 1/z0)^s.
pub fn sample_power_tail<R: Rng + ?Sized>(rng: &mut R, s: f64, z0: u64) -> u64 {
    let z0f = z0.max(1) as f64;
    let bound = (1.0 + 1.0 / z0f).powf(s);
    loop {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        let y = z0f * u.powf(-1.0 / (s - 1.0));
        if !y.is_finite() || y >= 9.0e18 {
            continue;
        }
        let z = y.floor();
        // ∫_z^{z+1} y^{-s} dy = z^{1-s} (1 - (1+1/z)^{1-s}) / (s-1)
        let cell = z.powf(1.0 - s) * -((1.0 - s) * (1.0 / z).ln_1p()).exp_m1() / (s - 1.0);
        let ratio = z.powf(-s) / cell;
        if rng.random::<f64>() * bound <= ratio {
            return z as u64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    /// Oracle: partial sums plus the integral tail bracket
    /// ∫_{M+1}^∞ ≤ Σ_{z>M} ≤ ∫_M^∞, midpoint of the bracket.
    fn zeta_oracle(s: f64, terms: u64) -> (f64, f64) {
        let partial: f64 = (1..=terms).rev().map(|z| (z as f64).powf(-s)).sum();
        let m = terms as f64;
        let lo = (m + 1.0).powf(1.0 - s) / (s - 1.0);
        let hi = m.powf(1.0 - s) / (s - 1.0);
        (partial + 0.5 * (lo + hi), 0.5 * (hi - lo))
    }

    #[test]
    fn nearest_neighbour_pmf() {
        let pmf = JumpKernel::NearestNeighbour.pmf().unwrap();
        assert_eq!(pmf.total_rate, 1.0);
        assert_eq!(pmf.prob(1), 1.0);
        assert_eq!(pmf.prob(2), 0.0);
    }

    #[test]
    fn long_jump_gamma_one_normalisation() {
        let pmf = JumpKernel::LongJump { gamma: 1.0 }.pmf().unwrap();
        assert!((pmf.total_rate - PI * PI / 6.0).abs() < 1e-12 * pmf.total_rate);
        let (oracle, half_width) = zeta_oracle(2.0, 200_000);
        assert!((pmf.total_rate - oracle).abs() <= half_width + 1e-12);
        assert!((pmf.prob(1) - 0.607_927_101_854_026_6).abs() < 1e-12);
    }

    #[test]
    fn zeta_matches_known_values() {
        assert!((zeta(4.0) - PI.powi(4) / 90.0).abs() < 1e-14);
        assert!((zeta(3.0) - 1.202_056_903_159_594_3).abs() < 1e-14);
        assert!((zeta(1.5) - 2.612_375_348_685_488).abs() < 1e-12);
        // tail starting deep in the expansion region
        let (oracle, hw) = zeta_oracle(2.5, 100_000);
        let tail = power_sum_tail(2.5, 1_000) + (1..1_000u64).map(|z| (z as f64).powf(-2.5)).sum::<f64>();
        assert!((tail - oracle).abs() <= hw + 1e-12);
    }

    #[test]
    fn table_kernel_normalises() {
        let k = JumpKernel::Table(vec![(1, 0.5), (2, 0.5)]);
        let pmf = k.pmf().unwrap();
        assert_eq!(pmf.total_rate, 1.0);
        assert_eq!(pmf.prob(1), 0.5);
        assert_eq!(pmf.prob(2), 0.5);
    }

    #[test]
    fn non_summable_kernel_is_rejected() {
        for gamma in [0.0, -1.0, f64::NAN] {
            let err = JumpKernel::LongJump { gamma }.pmf().unwrap_err();
            assert!(err.to_string().starts_with("non-summable kernel"));
        }
        assert!(JumpKernel::Table(vec![(0, 1.0)]).validate().is_err());
        assert!(JumpKernel::Table(vec![(1, -1.0)]).validate().is_err());
    }

    #[test]
    fn boundary_pair_sum_brute_force() {
        // direct double sum over x ∈ Λ_N and exterior y within a wide window
        let kernels = [
            JumpKernel::NearestNeighbour,
            JumpKernel::Table(vec![(-2, 0.3), (1, 0.5), (3, 0.2)]),
        ];
        for kernel in &kernels {
            for n in [2usize, 3, 5, 9] {
                let mut out = 0.0;
                let mut inn = 0.0;
                for x in 1..n as i64 {
                    for y in -20..=n as i64 + 20 {
                        if y >= 1 && y < n as i64 {
                            continue;
                        }
                        out += kernel.rate(y - x);
                        inn += kernel.rate(x - y);
                    }
                }
                let s = kernel.boundary_pair_sum(n).unwrap();
                assert!((s - out).abs() < 1e-12 && (s - inn).abs() < 1e-12, "{kernel:?} n={n}");
            }
        }
    }

    #[test]
    fn power_tail_sampler_matches_pmf() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = 2.5;
        let z0 = 3;
        let norm = power_sum_tail(s, z0);
        let draws = 200_000;
        let mut counts = [0u32; 4];
        for _ in 0..draws {
            let z = sample_power_tail(&mut rng, s, z0);
            assert!(z >= z0);
            if z < z0 + 4 {
                counts[(z - z0) as usize] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = ((z0 + i as u64) as f64).powf(-s) / norm;
            let sd = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((c as f64 / draws as f64 - p).abs() < 5.0 * sd, "z={} p={p}", z0 + i as u64);
        }
    }

    #[test]
    fn head_tail_split_is_consistent() {
        let sampler = PowerLawSampler::new(1.0, 16);
        let total = sampler.head_mass() + sampler.tail_mass();
        assert!((total - PI * PI / 6.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..1000).all(|_| sampler.sample_head(&mut rng) <= 16));
        assert!((0..1000).all(|_| sampler.sample_tail(&mut rng) > 16));
    }
}
