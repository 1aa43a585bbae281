//! Poisson tails: the Chernoff bound and the exact tail it bounds.

use statrs::distribution::{DiscreteCDF, Poisson};

use crate::{Error, Real, Result};

/// h(u) = ((1+u)ln(1+u) − u)/u², by its Taylor series for u < 1e−4.
pub fn chernoff_h<T: Real>(u: T) -> T {
    if u.abs() < T::lit(1e-4) {
        // Σ_{k≥2} (−u)^{k−2} / (k(k−1))
        let mut sum = T::zero();
        let mut pow = T::one();
        for k in 2..10u32 {
            let kk = T::from_u32(k * (k - 1)).expect("small integer");
            sum = sum + pow / kk;
            pow = -pow * u;
        }
        sum
    } else {
        ((T::one() + u) * u.ln_1p() - u) / (u * u)
    }
}

/// Bound on P(Poisson(λ) ≥ λ + x): exp(−(x²/λ)·h(x/λ)), and 1 for x ≤ 0.
pub fn chernoff_poisson_tail<T: Real>(lambda: T, x: T) -> T {
    if !(x > T::zero()) {
        return T::one();
    }
    let u = x / lambda;
    (-(x * x / lambda) * chernoff_h(u)).exp()
}

/// P(Poisson(λ) ≥ k).
pub fn poisson_tail_exact(lambda: f64, k: u64) -> Result<f64> {
    if k == 0 {
        return Ok(1.0);
    }
    if lambda == 0.0 {
        return Ok(0.0);
    }
    let p = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(format!("Poisson({lambda}): {e}")))?;
    Ok(p.sf(k - 1))
}

/// P(Poisson(λ) ≥ λ + x) with the real threshold rounded up.
pub fn poisson_tail_above(lambda: f64, x: f64) -> Result<f64> {
    let k = (lambda + x).ceil().max(0.0);
    poisson_tail_exact(lambda, k as u64)
}
