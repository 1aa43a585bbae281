//! Empirical measures π^N(η) and the distances between them: total
//! variation, a certified bracket for the Lévy–Prokhorov distance, and the
//! uniform-in-time TV distance Δ between two paths.
//!
//! Every quantity here is a ratio of integers (atoms sit on the grid x/N
//! with weights in multiples of 1/(N−1)), so the computations run on integer
//! numerators and convert to the scalar `S` only at the end. With
//! `S = Rational` the results are exact.

use std::marker::PhantomData;

use serde::Serialize;

use crate::model::Configuration;
use crate::sim::{PathRecord, Snapshot};
use crate::{Error, Result, Scalar};

/// π^N(η) = (N−1)^{-1} Σ_x η(x) δ_{x/N}.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure<S> {
    n: usize,
    /// counts[x−1] = η(x)
    counts: Vec<u32>,
    _scalar: PhantomData<S>,
}

impl<S: Scalar> EmpiricalMeasure<S> {
    pub fn from_configuration(eta: &Configuration) -> Self {
        Self { n: eta.n(), counts: eta.occupancy().to_vec(), _scalar: PhantomData }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// (location, weight) pairs with positive weight, by increasing location.
    pub fn atoms(&self) -> Vec<(S, S)> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (S::from_usize_ratio(i + 1, self.n), S::from_usize_ratio(c as usize, self.n - 1)))
            .collect()
    }

    /// (N−1)·π(ℝ) = |η|.
    pub fn mass_numerator(&self) -> u64 {
        self.counts.iter().map(|&c| u64::from(c)).sum()
    }

    pub fn total_mass(&self) -> S {
        S::from_u64(self.mass_numerator()).expect("mass representable")
            / S::from_usize(self.n - 1).expect("n representable")
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Mismatch(format!("grid 1/{} vs 1/{}", self.n, other.n)));
        }
        Ok(())
    }
}

pub fn empirical_measure<S: Scalar>(eta: &Configuration) -> EmpiricalMeasure<S> {
    EmpiricalMeasure::from_configuration(eta)
}

/// (N−1)·Σ(μ−ν)⁺ and (N−1)·Σ(μ−ν)⁻ as integers.
pub fn tv_parts(mu: &EmpiricalMeasure<impl Scalar>, nu: &EmpiricalMeasure<impl Scalar>) -> Result<(u64, u64)> {
    if mu.n != nu.n {
        return Err(Error::Mismatch(format!("grid 1/{} vs 1/{}", mu.n, nu.n)));
    }
    let mut pos = 0u64;
    let mut neg = 0u64;
    for (&a, &b) in mu.counts.iter().zip(&nu.counts) {
        if a > b {
            pos += u64::from(a - b);
        } else {
            neg += u64::from(b - a);
        }
    }
    Ok((pos, neg))
}

/// (N−1)·‖μ−ν‖_TV: an integer.
pub fn tv_numerator<S: Scalar>(mu: &EmpiricalMeasure<S>, nu: &EmpiricalMeasure<S>) -> Result<u64> {
    let (p, n) = tv_parts(mu, nu)?;
    Ok(p.max(n))
}

/// sup_A |(μ−ν)(A)|.
pub fn tv_distance<S: Scalar>(mu: &EmpiricalMeasure<S>, nu: &EmpiricalMeasure<S>) -> Result<S> {
    let num = tv_numerator(mu, nu)?;
    Ok(S::from_u64(num).expect("representable") / S::from_usize(mu.n - 1).expect("representable"))
}

/// Lévy–Prokhorov bracket with the TV distance it was derived from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport<S> {
    pub tv: S,
    pub lp_lower: S,
    pub lp_upper: S,
    pub notes: Vec<String>,
}

/// Candidate ε for shift g: max(g/N, c/(N−1)) kept as the numerator over
/// N(N−1).
fn candidate(n: usize, g: usize, c: u64) -> u64 {
    let n = n as u64;
    (g as u64 * (n - 1)).max(c * n)
}

fn over_grid<S: Scalar>(n: usize, numerator: u64) -> S {
    S::from_u64(numerator).expect("representable") / S::from_usize(n * (n - 1)).expect("representable")
}

/// For a family of sets given by `excess(g)` = (N−1)·max_A [μ(A) − ν(A^{g/N})]
/// the LP-type distance is min_g max(g/N, excess(g)/(N−1)): the closed
/// g/N-neighbourhood of a grid set is constant for ε ∈ [g/N, (g+1)/N).
fn lp_from_excess(n: usize, mut excess: impl FnMut(usize) -> u64) -> u64 {
    let mut best = u64::MAX;
    for g in 0..=n {
        let c = excess(g);
        best = best.min(candidate(n, g, c));
        if c == 0 {
            break;
        }
    }
    best
}

/// (N−1)·max over half-lines A of μ(A) − ν(A^{g/N}), one direction.
fn half_line_excess(mu: &[u32], nu: &[u32], g: usize) -> u64 {
    let m = mu.len();
    let prefix = |v: &[u32]| {
        let mut p = vec![0i64; m + 1];
        for i in 0..m {
            p[i + 1] = p[i] + i64::from(v[i]);
        }
        p
    };
    let pm = prefix(mu);
    let pn = prefix(nu);
    let mut best = 0i64;
    for i in 0..m {
        // lower half-line up to site i+1, expanded by g sites to the right
        let hi = (i + 1 + g).min(m);
        best = best.max(pm[i + 1] - pn[hi]);
        // upper half-line from site i+1, expanded by g sites to the left
        let lo = i.saturating_sub(g);
        best = best.max((pm[m] - pm[i]) - (pn[m] - pn[lo]));
    }
    best as u64
}

/// Lower bound from half-lines, both directions, as the numerator over N(N−1).
fn lp_lower_numerator(mu: &[u32], nu: &[u32], n: usize) -> u64 {
    let a = lp_from_excess(n, |g| half_line_excess(mu, nu, g));
    let b = lp_from_excess(n, |g| half_line_excess(nu, mu, g));
    a.max(b)
}

/// Certified bracket lp_lower ≤ d_LP ≤ lp_upper = TV.
///
/// The lower bound restricts the supremum in the LP definition to half-lines
/// (the CDF scan), in both directions.
pub fn lp_bracket<S: Scalar>(mu: &EmpiricalMeasure<S>, nu: &EmpiricalMeasure<S>) -> Result<MetricReport<S>> {
    mu.same_grid(nu)?;
    let n = mu.n;
    let tv_num = tv_numerator(mu, nu)?;
    let lower_num = lp_lower_numerator(&mu.counts, &nu.counts, n);
    // both numerators over N(N−1)
    let tv_scaled = tv_num * n as u64;
    let mut notes = Vec::new();
    let lower_num = if lower_num > tv_scaled {
        notes.push("half-line bound exceeded TV; clipped".to_string());
        tv_scaled
    } else {
        lower_num
    };
    if lower_num == tv_scaled {
        notes.push("bracket is tight".to_string());
    }
    Ok(MetricReport {
        tv: over_grid(n, tv_scaled),
        lp_lower: over_grid(n, lower_num),
        lp_upper: over_grid(n, tv_scaled),
        notes,
    })
}

pub const MAX_BRUTEFORCE_ATOMS: usize = 12;

/// Exact d_LP by enumerating every union of atoms (the only sets that
/// matter), for supports of at most 12 atoms.
pub fn lp_exact_bruteforce<S: Scalar>(mu: &EmpiricalMeasure<S>, nu: &EmpiricalMeasure<S>) -> Result<S> {
    mu.same_grid(nu)?;
    let n = mu.n;
    let support = |v: &[u32]| v.iter().filter(|&&c| c > 0).count();
    let atoms = support(&mu.counts).max(support(&nu.counts));
    if atoms > MAX_BRUTEFORCE_ATOMS {
        return Err(Error::InvalidArgument(format!(
            "exact LP limited to {MAX_BRUTEFORCE_ATOMS} atoms, got {atoms}"
        )));
    }
    let one_way = |a: &[u32], b: &[u32]| {
        let sites: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0).collect();
        lp_from_excess(n, |g| {
            let mut best = 0i64;
            for subset in 0u32..(1 << sites.len()) {
                let mut inside = 0i64;
                let mut covered = vec![false; b.len()];
                for (k, &s) in sites.iter().enumerate() {
                    if subset & (1 << k) != 0 {
                        inside += i64::from(a[s]);
                        let lo = s.saturating_sub(g);
                        let hi = (s + g).min(b.len() - 1);
                        covered[lo..=hi].iter_mut().for_each(|c| *c = true);
                    }
                }
                let reached: i64 = covered.iter().zip(b).filter(|(c, _)| **c).map(|(_, &v)| i64::from(v)).sum();
                best = best.max(inside - reached);
            }
            best as u64
        })
    };
    let num = one_way(&mu.counts, &nu.counts).max(one_way(&nu.counts, &mu.counts));
    Ok(over_grid(n, num))
}

fn snapshot_measure<S: Scalar>(s: &Snapshot) -> Result<EmpiricalMeasure<S>> {
    match s {
        Snapshot::Full(c) => Ok(EmpiricalMeasure::from_configuration(c)),
        Snapshot::Blocks(_) => {
            Err(Error::InvalidArgument("path stores block densities only; TV needs full snapshots".into()))
        }
    }
}

/// (N−1)·TV at every common snapshot.
pub fn tv_numerator_path(p1: &PathRecord, p2: &PathRecord) -> Result<Vec<u64>> {
    if p1.n() != p2.n() {
        return Err(Error::Mismatch(format!("paths on N={} and N={}", p1.n(), p2.n())));
    }
    if p1.times != p2.times {
        return Err(Error::Mismatch("paths have different snapshot grids".into()));
    }
    p1.snapshots
        .iter()
        .zip(&p2.snapshots)
        .map(|(a, b)| tv_numerator(&snapshot_measure::<f64>(a)?, &snapshot_measure::<f64>(b)?))
        .collect()
}

/// Δ = max over snapshots of ‖π₁(t) − π₂(t)‖_TV.
pub fn sup_tv_path<S: Scalar>(p1: &PathRecord, p2: &PathRecord) -> Result<S> {
    let num = tv_numerator_path(p1, p2)?.into_iter().max().unwrap_or(0);
    Ok(S::from_u64(num).expect("representable") / S::from_usize(p1.n() - 1).expect("representable"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Capacity;
    use crate::Rational;
    use proptest::prelude::*;

    fn em(bits: &[u8]) -> EmpiricalMeasure<Rational> {
        EmpiricalMeasure::from_configuration(&Configuration::exclusion(bits).unwrap())
    }

    #[test]
    fn atoms_and_mass() {
        let mu = em(&[1, 0, 1, 0]);
        assert_eq!(mu.atoms(), vec![(Rational::new(1, 5), Rational::new(1, 4)), (Rational::new(3, 5), Rational::new(1, 4))]);
        assert_eq!(mu.total_mass(), Rational::new(1, 2));
        assert_eq!(em(&[0, 0, 0]).total_mass(), Rational::from_integer(0));
        assert!(em(&[0, 0]).atoms().is_empty());
        let full = Configuration::full(9, Capacity::EXCLUSION).unwrap();
        assert_eq!(empirical_measure::<Rational>(&full).total_mass(), Rational::from_integer(1));
    }

    #[test]
    fn tv_examples() {
        assert_eq!(tv_distance(&em(&[1, 0, 1]), &em(&[1, 0, 1])).unwrap(), Rational::from_integer(0));
        assert_eq!(tv_distance(&em(&[0, 0, 0, 0]), &em(&[1, 1, 0, 0])).unwrap(), Rational::new(1, 2));
        assert_eq!(tv_distance(&em(&[1, 0, 0, 0]), &em(&[0, 1, 0, 0])).unwrap(), Rational::new(1, 4));
        assert!(tv_distance(&em(&[1, 0]), &em(&[1, 0, 0])).is_err());
    }

    #[test]
    fn lp_of_single_shift() {
        // one particle moved by 2/5 with weight 1/4: moving costs 2/5 > 1/4,
        // so the LP distance is the weight
        let mu = em(&[1, 0, 0, 0]);
        let nu = em(&[0, 0, 1, 0]);
        let r = lp_bracket(&mu, &nu).unwrap();
        let exact = lp_exact_bruteforce(&mu, &nu).unwrap();
        assert_eq!(exact, Rational::new(1, 4));
        assert_eq!(r.lp_upper, Rational::new(1, 4));
        assert!(r.lp_lower <= exact && exact <= r.lp_upper);
        assert_eq!(r.lp_lower, Rational::new(1, 4));
    }

    #[test]
    fn lp_of_short_shift_is_the_distance() {
        // N = 101, one site step 1/101 < weight 1/100
        let mut a = vec![0u8; 100];
        let mut b = vec![0u8; 100];
        a[10] = 1;
        b[11] = 1;
        let mu = em(&a);
        let nu = em(&b);
        assert_eq!(lp_exact_bruteforce(&mu, &nu).unwrap(), Rational::new(1, 101));
        let r = lp_bracket(&mu, &nu).unwrap();
        assert_eq!(r.lp_lower, Rational::new(1, 101));
        assert_eq!(r.tv, Rational::new(1, 100));
    }

    #[test]
    fn identical_measures_have_zero_bracket() {
        let mu = em(&[1, 1, 0, 1]);
        let r = lp_bracket(&mu, &mu).unwrap();
        assert_eq!((r.tv, r.lp_lower, r.lp_upper), (Rational::from_integer(0), Rational::from_integer(0), Rational::from_integer(0)));
    }

    #[test]
    fn float_and_exact_agree() {
        let a = Configuration::exclusion(&[1, 0, 1, 1, 0, 0, 1]).unwrap();
        let b = Configuration::exclusion(&[0, 1, 1, 0, 1, 0, 0]).unwrap();
        let rf = lp_bracket(&EmpiricalMeasure::<f64>::from_configuration(&a), &EmpiricalMeasure::from_configuration(&b)).unwrap();
        let rq = lp_bracket(&EmpiricalMeasure::<Rational>::from_configuration(&a), &EmpiricalMeasure::from_configuration(&b)).unwrap();
        assert!((rf.lp_lower - *rq.lp_lower.numer() as f64 / *rq.lp_lower.denom() as f64).abs() < 1e-15);
        assert!((rf.tv - *rq.tv.numer() as f64 / *rq.tv.denom() as f64).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn bracket_sandwiches_bruteforce(
            n in 3usize..14,
            a in proptest::collection::vec(0u8..2, 12),
            b in proptest::collection::vec(0u8..2, 12),
        ) {
            let mu = em(&a[..n - 1]);
            let nu = em(&b[..n - 1]);
            let r = lp_bracket(&mu, &nu).unwrap();
            let exact = lp_exact_bruteforce(&mu, &nu).unwrap();
            prop_assert!(r.lp_lower <= exact, "{:?} > {:?}", r.lp_lower, exact);
            prop_assert!(exact <= r.lp_upper, "{:?} > {:?}", exact, r.lp_upper);
            prop_assert!(r.lp_upper == r.tv);
        }

        #[test]
        fn ordered_pairs_satisfy_mass_identity(
            bits in proptest::collection::vec((0u8..2, 0u8..2), 1..64),
        ) {
            let lo: Vec<u8> = bits.iter().map(|&(a, b)| a & b).collect();
            let hi: Vec<u8> = bits.iter().map(|&(a, b)| a | b).collect();
            let a = Configuration::exclusion(&lo).unwrap();
            let b = Configuration::exclusion(&hi).unwrap();
            let tv = tv_distance(&EmpiricalMeasure::<Rational>::from_configuration(&a), &EmpiricalMeasure::from_configuration(&b)).unwrap();
            let n = a.n() as i64;
            prop_assert_eq!(tv * Rational::from_integer(n - 1), Rational::from_integer(b.total_mass() as i64 - a.total_mass() as i64));
        }
    }
}
