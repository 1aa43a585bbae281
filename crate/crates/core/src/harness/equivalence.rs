//! Equivalence decay: how often the coupled impermeable and weak-reservoir
//! paths separate by more than ε, against the Poisson control on injected
//! particles.

use rayon::prelude::*;
use serde::Serialize;

use super::chernoff::chernoff_poisson_tail;
use super::{wilson_interval, Profile};
use crate::coupling::coupled_simulate;
use crate::metrics::tv_numerator_path;
use crate::model::{ModelSpec, Regime};
use crate::sim::{initial_rng, sample_initial_configuration, uniform_grid, DEFAULT_MAX_EVENTS};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceConfig {
    /// Model at every N (its `n` is replaced along the grid).
    pub spec: ModelSpec,
    pub epsilon: f64,
    /// Further ε values evaluated on the same trajectories.
    pub epsilon_grid: Vec<f64>,
    pub ns: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub profile: Profile,
    /// Snapshots per path for the direct TV cross-check.
    pub snapshots: usize,
    pub max_events: u64,
}

impl EquivalenceConfig {
    pub fn new(spec: ModelSpec, epsilon: f64, ns: Vec<usize>, trials: usize, seed: u64) -> Self {
        Self {
            spec,
            epsilon,
            epsilon_grid: vec![0.05, 0.1, 0.2, 0.5],
            ns,
            trials,
            seed,
            profile: Profile::Linear,
            snapshots: 5,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }
}

/// Empirical tail of the injected-particle count against the Chernoff bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailCheck {
    pub threshold: f64,
    pub empirical: f64,
    pub bound: f64,
    /// Monte Carlo standard error allowance unit.
    pub sigma: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceRow {
    pub n: usize,
    pub trials: usize,
    /// trials with (D1 + D2)/(N−1) > ε
    pub exceed: usize,
    pub p_hat: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    /// (ε, p̂) on the ε grid
    pub p_hat_by_epsilon: Vec<(f64, f64)>,
    pub lambda_n: f64,
    pub lambda_out: f64,
    pub b_over_n: f64,
    pub mean_influx: f64,
    pub mean_outflux: f64,
    pub influx_tails: Vec<TailCheck>,
    pub outflux_tails: Vec<TailCheck>,
    /// trials where the direct sup-TV between ξ and η̂ exceeded the
    /// triangle bound through ζ (must be 0)
    pub triangle_violations: usize,
    pub mean_direct_delta: f64,
    pub mean_triangle_delta: f64,
    pub events: u64,
    pub truncated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum DecayVerdict {
    ExponentialOnly,
    SuperexponentialConsistent,
    /// r_N decreased somewhere before censoring.
    NotMonotone,
    Censored { floor: f64 },
}

impl DecayVerdict {
    pub fn label(&self) -> String {
        match self {
            DecayVerdict::ExponentialOnly => "exponential only".into(),
            DecayVerdict::SuperexponentialConsistent => "superexponential-consistent".into(),
            DecayVerdict::NotMonotone => "not monotone".into(),
            DecayVerdict::Censored { floor } => format!("censored at {}", format_floor(*floor)),
        }
    }
}

fn format_floor(floor: f64) -> String {
    let e = -floor.log10();
    if (e - e.round()).abs() < 1e-9 {
        format!("10^{{-{}}}", e.round() as i64)
    } else {
        format!("{floor:e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecayFit {
    pub ns: Vec<usize>,
    /// r_N = −ln(max(p̂_N, 1/trials))/N
    pub r: Vec<f64>,
    pub censored: Vec<bool>,
    /// r_N non-decreasing over the uncensored prefix
    pub monotone_until_censoring: bool,
    pub verdict: DecayVerdict,
}

impl DecayFit {
    pub fn verdict_label(&self) -> String {
        self.verdict.label()
    }
}

/// r_N sequence and verdict. Relative tolerance 1e−6 separates "constant"
/// from "increasing".
pub fn fit_decay_rate(ns: &[usize], p_hat: &[f64], trials: usize) -> Result<DecayFit> {
    if ns.len() != p_hat.len() || ns.is_empty() {
        return Err(Error::InvalidArgument("N grid and p̂ must have equal, non-zero length".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("zero trials".into()));
    }
    let floor = 1.0 / trials as f64;
    let censored: Vec<bool> = p_hat.iter().map(|&p| p <= 0.0).collect();
    let r: Vec<f64> = ns.iter().zip(p_hat).map(|(&n, &p)| -(p.max(floor)).ln() / n as f64).collect();
    let prefix = censored.iter().position(|&c| c).unwrap_or(ns.len());
    let tol = 1e-6;
    let live = &r[..prefix];
    let monotone = live.windows(2).all(|w| w[1] >= w[0] - tol * w[0].abs().max(1e-300));
    let verdict = if prefix < 2 && censored.iter().any(|&c| c) {
        DecayVerdict::Censored { floor }
    } else if prefix < 2 {
        // a single uncensored point carries no trend
        DecayVerdict::ExponentialOnly
    } else if !monotone {
        DecayVerdict::NotMonotone
    } else if live.windows(2).all(|w| (w[1] - w[0]).abs() <= tol * w[0].abs().max(1e-300)) {
        DecayVerdict::ExponentialOnly
    } else {
        DecayVerdict::SuperexponentialConsistent
    };
    Ok(DecayFit { ns: ns.to_vec(), r, censored, monotone_until_censoring: monotone, verdict })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquivalenceResult {
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
    pub rows: Vec<EquivalenceRow>,
    pub decay: DecayFit,
    /// p̂_N non-increasing in N
    pub p_hat_non_increasing: bool,
    /// B(N)/N decreasing along the grid
    pub condition_decreasing: bool,
}

struct Trial {
    d_sum: u64,
    influx: u64,
    outflux: u64,
    direct_num: u64,
    triangle_num: u64,
    events: u64,
    truncated: bool,
}

fn tail_checks(counts: &[u64], lambda: f64, thresholds: &[f64]) -> Vec<TailCheck> {
    let trials = counts.len() as f64;
    thresholds
        .iter()
        .map(|&thr| {
            let hits = counts.iter().filter(|&&c| c as f64 >= thr).count() as f64;
            let empirical = hits / trials;
            let bound = chernoff_poisson_tail(lambda, thr - lambda);
            let q = bound.clamp(1.0 / trials, 1.0);
            let sigma = (q * (1.0 - q) / trials).sqrt();
            TailCheck { threshold: thr, empirical, bound, sigma, ok: empirical <= bound + 4.0 * sigma }
        })
        .collect()
}

fn run_one_n(cfg: &EquivalenceConfig, n: usize, n_index: usize) -> Result<EquivalenceRow> {
    let spec = cfg.spec.with_n(n).with_regime(Regime::FullWeak);
    spec.validate()?;
    let grid = uniform_grid(spec.horizon, cfg.snapshots.max(2));
    let seed = cfg.seed.wrapping_add(n_index as u64);
    let outcomes: Vec<Result<Trial>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            let mut init_rng = initial_rng(seed, trial as u64);
            let eta = sample_initial_configuration(|u| cfg.profile.value(u), n, &mut init_rng)?;
            let paths = coupled_simulate(&spec, &eta, &eta, Some(&eta), &grid, seed, trial as u64, cfg.max_events)?;
            let last = paths.d1.len() - 1;
            let hat = paths.hat.as_ref().expect("triple");
            let direct = tv_numerator_path(&paths.xi, hat)?;
            let direct_num = direct.into_iter().max().unwrap_or(0);
            let triangle_num =
                paths.d1.iter().zip(&paths.d2).map(|(a, b)| a + b).max().unwrap_or(0);
            Ok(Trial {
                // sup over snapshots: |ζ| − |η̂| is not monotone; TV ≤ 1 caps the sum
                d_sum: triangle_num.min(n as u64 - 1),
                influx: paths.zeta.cum_influx[last],
                outflux: hat.cum_outflux[last],
                direct_num,
                triangle_num,
                events: paths.events,
                truncated: paths.truncated,
            })
        })
        .collect();
    let trials: Vec<Trial> = outcomes.into_iter().collect::<Result<_>>()?;
    let scale = (n - 1) as f64;
    let count_above = |eps: f64| trials.iter().filter(|t| t.d_sum as f64 / scale > eps).count();
    let exceed = count_above(cfg.epsilon);
    let total = trials.len();
    let p_hat = exceed as f64 / total as f64;
    let (wilson_lo, wilson_hi) = wilson_interval(exceed, total, 1.96);
    let lambda_n = spec.influx_poisson_mean()?;
    let lambda_out = spec.outflux_poisson_mean()?;
    let b = spec.boundary_rate_sum()?;
    let influx: Vec<u64> = trials.iter().map(|t| t.influx).collect();
    let outflux: Vec<u64> = trials.iter().map(|t| t.outflux).collect();
    let eps_n = cfg.epsilon * n as f64;
    let mean = |v: &[u64]| v.iter().sum::<u64>() as f64 / v.len() as f64;
    Ok(EquivalenceRow {
        n,
        trials: total,
        exceed,
        p_hat,
        wilson_lo,
        wilson_hi,
        p_hat_by_epsilon: cfg.epsilon_grid.iter().map(|&e| (e, count_above(e) as f64 / total as f64)).collect(),
        lambda_n,
        lambda_out,
        b_over_n: b.per_site,
        mean_influx: mean(&influx),
        mean_outflux: mean(&outflux),
        influx_tails: tail_checks(&influx, lambda_n, &[lambda_n, 2.0 * lambda_n, eps_n]),
        outflux_tails: tail_checks(&outflux, lambda_out, &[lambda_out, 2.0 * lambda_out, eps_n]),
        triangle_violations: trials.iter().filter(|t| t.direct_num > t.triangle_num).count(),
        mean_direct_delta: trials.iter().map(|t| t.direct_num as f64 / scale).sum::<f64>() / total as f64,
        mean_triangle_delta: trials.iter().map(|t| t.triangle_num as f64 / scale).sum::<f64>() / total as f64,
        events: trials.iter().map(|t| t.events).sum(),
        truncated: trials.iter().filter(|t| t.truncated).count(),
    })
}

/// Coupled triples at every N of the grid; Δ(ξ, η̂) is bounded through ζ.
pub fn run_equivalence_experiment(cfg: &EquivalenceConfig) -> Result<EquivalenceResult> {
    if cfg.trials == 0 {
        return Err(Error::InvalidArgument("zero trials".into()));
    }
    if cfg.ns.is_empty() || cfg.ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("N grid must be non-empty and strictly increasing".into()));
    }
    if cfg.spec.regime != Regime::FullWeak {
        return Err(Error::InvalidSpec("equivalence experiment needs the full weak regime".into()));
    }
    let rows = cfg
        .ns
        .iter()
        .enumerate()
        .map(|(i, &n)| run_one_n(cfg, n, i))
        .collect::<Result<Vec<_>>>()?;
    let p: Vec<f64> = rows.iter().map(|r| r.p_hat).collect();
    let decay = fit_decay_rate(&cfg.ns, &p, cfg.trials)?;
    Ok(EquivalenceResult {
        epsilon: cfg.epsilon,
        trials: cfg.trials,
        seed: cfg.seed,
        p_hat_non_increasing: p.windows(2).all(|w| w[1] <= w[0]),
        condition_decreasing: rows.windows(2).all(|w| w[1].b_over_n < w[0].b_over_n),
        rows,
        decay,
    })
}

impl EquivalenceResult {
    /// One row per N.
    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "n,trials,exceed,p_hat,wilson_lo,wilson_hi,r_n,lambda_n,lambda_out,b_over_n,mean_influx,mean_outflux,mean_direct_delta,mean_triangle_delta,triangle_violations,events,truncated")?;
        for (row, r) in self.rows.iter().zip(&self.decay.r) {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                row.n,
                row.trials,
                row.exceed,
                row.p_hat,
                row.wilson_lo,
                row.wilson_hi,
                r,
                row.lambda_n,
                row.lambda_out,
                row.b_over_n,
                row.mean_influx,
                row.mean_outflux,
                row.mean_direct_delta,
                row.mean_triangle_delta,
                row.triangle_violations,
                row.events,
                row.truncated
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Theta;

    #[test]
    fn synthetic_exponential() {
        let ns = [10usize, 20, 30, 40];
        let p: Vec<f64> = ns.iter().map(|&n| (-(n as f64)).exp()).collect();
        let fit = fit_decay_rate(&ns, &p, 1_000_000_000_000_000_000).unwrap();
        assert!(fit.r.iter().all(|r| (r - 1.0).abs() < 1e-12));
        assert_eq!(fit.verdict_label(), "exponential only");
    }

    #[test]
    fn synthetic_superexponential() {
        let ns = [4usize, 6, 8, 10];
        let p: Vec<f64> = ns.iter().map(|&n| (-(n as f64) * (n as f64).ln()).exp()).collect();
        let fit = fit_decay_rate(&ns, &p, usize::MAX).unwrap();
        for (r, &n) in fit.r.iter().zip(&ns) {
            assert!((r - (n as f64).ln()).abs() < 1e-9);
        }
        assert_eq!(fit.verdict_label(), "superexponential-consistent");
    }

    #[test]
    fn all_zero_is_censored() {
        let fit = fit_decay_rate(&[32, 64, 128], &[0.0, 0.0, 0.0], 10_000).unwrap();
        assert_eq!(fit.verdict_label(), "censored at 10^{-4}");
    }

    #[test]
    fn large_epsilon_never_exceeds() {
        let spec = ModelSpec::tasep(16, 1.0, 1.0, -0.5);
        let mut cfg = EquivalenceConfig::new(spec, 1.0, vec![8, 16], 50, 3);
        cfg.epsilon_grid = vec![1.0, 2.0];
        let r = run_equivalence_experiment(&cfg).unwrap();
        assert!(r.rows.iter().all(|row| row.p_hat == 0.0));
    }

    #[test]
    fn zero_theta_gives_zero_delta() {
        let spec = ModelSpec { theta: Theta::Zero, ..ModelSpec::tasep(16, 1.0, 1.0, -0.5) };
        let cfg = EquivalenceConfig::new(spec, 0.01, vec![8, 16], 30, 5);
        let r = run_equivalence_experiment(&cfg).unwrap();
        for row in &r.rows {
            assert_eq!(row.p_hat, 0.0);
            assert_eq!(row.mean_direct_delta, 0.0);
            assert_eq!(row.mean_influx, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = ModelSpec::tasep(16, 1.0, 1.0, -0.5);
        assert!(run_equivalence_experiment(&EquivalenceConfig::new(spec.clone(), 0.1, vec![16, 8], 10, 1)).is_err());
        assert!(run_equivalence_experiment(&EquivalenceConfig::new(spec, 0.1, vec![8], 0, 1)).is_err());
    }
}
