//! Empirical density profiles against the Godunov solution, and the
//! reservoir discrepancy between impermeable and weak-reservoir copies.

use rayon::prelude::*;
use serde::Serialize;

use super::Profile;
use crate::coupling::coupled_simulate;
use crate::hydro::{burgers_solve, compare_configuration, empirical_blocks, BurgersProblem, DensityField};
use crate::model::{JumpKernel, KernelPhase, ModelSpec, Regime};
use crate::sim::{initial_rng, sample_initial_configuration, simulate_trial, DEFAULT_MAX_EVENTS};
use crate::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct HydroConfig {
    /// N and the horizon T come from the spec.
    pub spec: ModelSpec,
    pub profile: Profile,
    pub seeds: usize,
    pub seed: u64,
    /// Godunov cells on [0, 1].
    pub cells: usize,
    /// Comparison blocks; `None` uses ⌊√N⌉.
    pub blocks: Option<usize>,
    pub max_events: u64,
}

impl HydroConfig {
    pub fn new(spec: ModelSpec, seeds: usize, seed: u64) -> Self {
        Self {
            spec,
            profile: Profile::Linear,
            seeds,
            seed,
            cells: 1024,
            blocks: None,
            max_events: DEFAULT_MAX_EVENTS,
        }
    }

    pub fn blocks_for(&self, n: usize) -> usize {
        self.blocks.unwrap_or_else(|| ((n as f64).sqrt().round() as usize).max(1))
    }

    fn check(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::InvalidArgument("need at least one seed".into()));
        }
        if self.spec.capacity.max_occupancy() != 1 {
            return Err(Error::InvalidArgument("hydrodynamic comparison needs exclusion (k = 1)".into()));
        }
        Ok(())
    }
}

/// Burgers time per unit of macroscopic particle time: the kernel's mean
/// drift. Only hyperbolic kernels have a Burgers limit.
pub fn time_dilation(kernel: &JumpKernel) -> Result<f64> {
    if kernel.phase() != KernelPhase::Hyperbolic {
        return Err(Error::InvalidArgument(format!("no Burgers limit for kernel {kernel:?}")));
    }
    kernel.first_moment()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HydroResult {
    pub n: usize,
    pub t: f64,
    pub cells: usize,
    pub blocks: usize,
    pub time_dilation: f64,
    pub seed: u64,
    /// L¹ discrepancy per seed
    pub l1: Vec<f64>,
    pub mean_l1: f64,
    /// block averages: mean empirical profile and the coarsened field
    pub mean_profile: Vec<f64>,
    pub pde_profile: Vec<f64>,
    pub truncated: usize,
    #[serde(skip)]
    pub field: DensityField<f64>,
}

impl HydroResult {
    /// Block centre, mean empirical density, Godunov density.
    pub fn write_profile_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "x,empirical,godunov")?;
        let b = self.blocks as f64;
        for (i, (e, p)) in self.mean_profile.iter().zip(&self.pde_profile).enumerate() {
            writeln!(w, "{},{},{}", (i as f64 + 0.5) / b, e, p)?;
        }
        Ok(())
    }

    pub fn write_l1_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "trial,l1")?;
        for (i, v) in self.l1.iter().enumerate() {
            writeln!(w, "{i},{v}")?;
        }
        Ok(())
    }
}

/// Impermeable runs from product initial data against Godunov on [0, 1]
/// with ghost values ρ₀(0), ρ₀(1).
pub fn run_hydro_experiment(cfg: &HydroConfig) -> Result<HydroResult> {
    cfg.check()?;
    let spec = cfg.spec.with_regime(Regime::Impermeable);
    spec.validate()?;
    let n = spec.n;
    let t = spec.horizon;
    let dilation = time_dilation(&spec.kernel)?;
    let profile = cfg.profile;
    let mut field = burgers_solve(
        |u: f64| profile.value(u),
        &BurgersProblem::new(0.0, 1.0, cfg.cells, t * dilation).with_output_times(vec![t * dilation]),
    )?;
    field.time_dilation = dilation;
    let k = field.time_index(t * dilation)?;
    let blocks = cfg.blocks_for(n);
    let grid = [t];
    let runs: Vec<(f64, Vec<f64>, bool)> = (0..cfg.seeds)
        .into_par_iter()
        .map(|trial| {
            let eta = sample_initial_configuration(|u| profile.value(u), n, &mut initial_rng(cfg.seed, trial as u64))?;
            let path = simulate_trial(&spec, &eta, &grid, cfg.seed, trial as u64, cfg.max_events)?;
            let last = path.final_configuration().expect("one snapshot");
            let l1 = compare_configuration(last, &field, k, blocks)?;
            Ok((l1, empirical_blocks(last, 0.0, 1.0, blocks)?, path.truncated))
        })
        .collect::<Result<_>>()?;
    let seeds = runs.len() as f64;
    let mut mean_profile = vec![0.0; blocks];
    for (_, prof, _) in &runs {
        for (m, v) in mean_profile.iter_mut().zip(prof) {
            *m += v / seeds;
        }
    }
    let l1: Vec<f64> = runs.iter().map(|r| r.0).collect();
    Ok(HydroResult {
        n,
        t,
        cells: cfg.cells,
        blocks,
        time_dilation: dilation,
        seed: cfg.seed,
        mean_l1: l1.iter().sum::<f64>() / seeds,
        l1,
        mean_profile,
        pde_profile: field.coarsen(k, 0.0, 1.0, blocks)?,
        truncated: runs.iter().filter(|r| r.2).count(),
        field,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReservoirRow {
    pub n: usize,
    pub blocks: usize,
    pub l1: Vec<f64>,
    pub median: f64,
    /// mean (D1 + D2)(T)/N, the mass-difference ceiling on the L¹ gap
    pub mean_mass_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReservoirResult {
    pub seed: u64,
    pub rows: Vec<ReservoirRow>,
}

impl ReservoirResult {
    pub fn decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].median < w[0].median)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "n,blocks,seeds,median_l1,mean_mass_gap")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{},{}", r.n, r.blocks, r.l1.len(), r.median, r.mean_mass_gap)?;
        }
        Ok(())
    }
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

/// Block-profile L¹ distance between the impermeable and the weak-reservoir
/// copy of the level coupling, started from a common configuration.
pub fn run_reservoir_discrepancy(cfg: &HydroConfig, ns: &[usize]) -> Result<ReservoirResult> {
    cfg.check()?;
    let profile = cfg.profile;
    let mut rows = Vec::with_capacity(ns.len());
    for (idx, &n) in ns.iter().enumerate() {
        let spec = cfg.spec.with_n(n);
        spec.validate()?;
        let blocks = cfg.blocks_for(n);
        let seed = cfg.seed.wrapping_add(idx as u64);
        let grid = [spec.horizon];
        let runs: Vec<(f64, f64)> = (0..cfg.seeds)
            .into_par_iter()
            .map(|trial| {
                let eta = sample_initial_configuration(|u| profile.value(u), n, &mut initial_rng(seed, trial as u64))?;
                let paths = coupled_simulate(&spec, &eta, &eta, Some(&eta), &grid, seed, trial as u64, cfg.max_events)?;
                let xi = paths.xi.final_configuration().expect("one snapshot");
                let hat = paths.hat.as_ref().and_then(|h| h.final_configuration()).expect("hat copy");
                let a: Vec<f64> = empirical_blocks(xi, 0.0, 1.0, blocks)?;
                let b = empirical_blocks(hat, 0.0, 1.0, blocks)?;
                let w = 1.0 / blocks as f64;
                let l1 = a.iter().zip(&b).map(|(x, y)| (x - y).abs() * w).sum();
                let gap = (paths.d1[0] + paths.d2[0]) as f64 / n as f64;
                Ok((l1, gap))
            })
            .collect::<Result<_>>()?;
        let l1: Vec<f64> = runs.iter().map(|r| r.0).collect();
        rows.push(ReservoirRow {
            n,
            blocks,
            median: median(&l1),
            mean_mass_gap: runs.iter().map(|r| r.1).sum::<f64>() / runs.len() as f64,
            l1,
        });
    }
    Ok(ReservoirResult { seed: cfg.seed, rows })
}
