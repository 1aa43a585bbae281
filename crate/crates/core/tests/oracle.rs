//! Monte Carlo marginals against the exact CTMC law on tiny lattices.

use mislab::coupling::coupled_simulate;
use mislab::model::{Capacity, Configuration, JumpKernel, Kappa, ModelSpec, RateFunctions, Regime, Theta};
use mislab::sim::{exact_ctmc_distribution, simulate_trial, DEFAULT_MAX_EVENTS};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

fn histogram(configs: &[Configuration], states: usize) -> Vec<f64> {
    let mut h = vec![0.0; states];
    for c in configs {
        h[c.state_index()] += 1.0 / configs.len() as f64;
    }
    h
}

fn random_spec(rng: &mut ChaCha8Rng) -> ModelSpec {
    let n = rng.random_range(3..=6);
    let kernel = match rng.random_range(0..3) {
        0 => JumpKernel::NearestNeighbour,
        1 => JumpKernel::LongJump { gamma: rng.random_range(0.5..3.0) },
        _ => {
            let mut table = vec![(1, rng.random_range(0.2..2.0)), (-1, rng.random_range(0.0..1.0))];
            table.push((rng.random_range(2..5), rng.random_range(0.0..1.0)));
            JumpKernel::Table(table)
        }
    };
    let regime = [Regime::Impermeable, Regime::InfluxOnly, Regime::FullWeak][rng.random_range(0..3)];
    ModelSpec {
        n,
        capacity: Capacity::EXCLUSION,
        kernel,
        rates: RateFunctions::exclusion(rng.random_range(0.0..3.0), rng.random_range(0.0..3.0)),
        theta: Theta::Power(rng.random_range(-1.0..-0.1)),
        kappa: Kappa::Constant(rng.random_range(0.5..2.0)),
        horizon: 1.0,
        regime,
    }
}

/// Random kernels, rates and regimes for N ≤ 6: simulated marginals at three
/// times within 3·√(|Ω|/trials) of the exact law.
#[test]
fn simulator_matches_exact_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let trials = 20_000usize;
    for case in 0..6u64 {
        let spec = random_spec(&mut rng);
        let states = 1usize << (spec.n - 1);
        let eta0 = Configuration::from_state_index(spec.n, Capacity::EXCLUSION, rng.random_range(0..states)).unwrap();
        let grid = [0.1, 0.4, 1.0];
        let paths: Vec<_> = (0..trials as u64)
            .into_par_iter()
            .map(|t| simulate_trial(&spec, &eta0, &grid, 100 + case, t, DEFAULT_MAX_EVENTS).unwrap())
            .collect();
        let tol = 3.0 * (states as f64 / trials as f64).sqrt();
        for (i, &t) in grid.iter().enumerate() {
            let finals: Vec<Configuration> = paths.iter().map(|p| p.configuration(i).unwrap().clone()).collect();
            let exact = exact_ctmc_distribution(&spec, &eta0, t).unwrap();
            let d = tv(&histogram(&finals, states), &exact);
            assert!(d <= tol, "case {case} {:?} t={t}: TV {d} > {tol}", spec.kernel);
        }
    }
}

/// Each marginal of the coupled triple is the corresponding process.
#[test]
fn coupled_marginals_match_exact_laws_n5() {
    let spec = ModelSpec::taljep(5, 2.0, 1.5, 0.7, -0.5).with_horizon(0.5);
    let eta0 = Configuration::exclusion(&[0, 1, 1, 0]).unwrap();
    let trials = 100_000u64;
    let runs: Vec<_> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = coupled_simulate(&spec, &eta0, &eta0, Some(&eta0), &[0.5], 3, t, DEFAULT_MAX_EVENTS).unwrap();
            [
                p.xi.final_configuration().unwrap().clone(),
                p.zeta.final_configuration().unwrap().clone(),
                p.hat.unwrap().final_configuration().unwrap().clone(),
            ]
        })
        .collect();
    for (c, regime) in [Regime::Impermeable, Regime::InfluxOnly, Regime::FullWeak].into_iter().enumerate() {
        let finals: Vec<Configuration> = runs.iter().map(|r| r[c].clone()).collect();
        let exact = exact_ctmc_distribution(&spec.with_regime(regime), &eta0, 0.5).unwrap();
        let d = tv(&histogram(&finals, 16), &exact);
        assert!(d <= 0.02, "{regime:?}: TV {d}");
    }
}
