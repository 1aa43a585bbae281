use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use mislab::coupling::coupled_simulate;
use mislab::harness::{
    chernoff_h, chernoff_poisson_tail, condition_table, poisson_tail_above, run_equivalence_experiment,
    run_hydro_experiment, run_reservoir_discrepancy, walker_crossing_estimate, EquivalenceConfig, HydroConfig,
    WalkerConfig,
};
use mislab::io::{schema_help, OutputDir, RunConfig, Telemetry};
use mislab::metrics::{empirical_measure, lp_bracket};
use mislab::sim::{initial_rng, sample_initial_configuration, simulate_trial, uniform_grid};
use mislab::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;

#[derive(Parser)]
#[command(name = "mislab", version, about = "Exclusion and misanthrope processes with weak reservoirs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// Root of the output tree; runs go to <out-dir>/<subcommand>-seed<seed>.
    #[arg(long, env = "MISLAB_OUT_DIR", default_value = "mislab-out")]
    out_dir: PathBuf,
    /// Overrides `trials` (`hydro.seeds` for hydro).
    #[arg(long)]
    trials: Option<u64>,
    /// Overrides `grid`, the number of snapshots.
    #[arg(long)]
    grid: Option<u64>,
    /// Overrides any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories of one process.
    Simulate(Common),
    /// Run the coupled impermeable / influx-only / weak-reservoir processes.
    Couple(Common),
    /// Sweep N and estimate the probability of an ε-discrepancy.
    Equivalence(Common),
    /// Compare empirical profiles with the Godunov solution.
    Hydro(Common),
    /// Poisson tail: Chernoff bound against the exact value.
    Chernoff {
        #[command(flatten)]
        common: Common,
        /// Overrides `chernoff.lambda`.
        #[arg(long)]
        lambda: Option<f64>,
        /// Overrides `chernoff.x`.
        #[arg(long)]
        x: Option<f64>,
    },
    /// Estimate long-jump walker crossings against the moment bound.
    Walkers(Common),
    /// Check the rates and the boundary condition without running dynamics.
    Validate(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Couple(_) => "couple",
            Command::Equivalence(_) => "equivalence",
            Command::Hydro(_) => "hydro",
            Command::Chernoff { .. } => "chernoff",
            Command::Walkers(_) => "walkers",
            Command::Validate(_) => "validate",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Simulate(c)
            | Command::Couple(c)
            | Command::Equivalence(c)
            | Command::Hydro(c)
            | Command::Walkers(c)
            | Command::Validate(c) => c,
            Command::Chernoff { common, .. } => common,
        }
    }
}

/// What a subcommand reports back besides its files.
#[derive(Default)]
struct Outcome {
    events: u64,
    truncated: usize,
}

fn build_config(cmd: &Command) -> Result<RunConfig> {
    let c = cmd.common();
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    for pair in &c.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = c.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(t) = c.trials {
        let key = if matches!(cmd, Command::Hydro(_)) { "hydro.seeds" } else { "trials" };
        cfg.set(key, &t.to_string())?;
    }
    if let Some(g) = c.grid {
        cfg.set("grid", &g.to_string())?;
    }
    if let Command::Chernoff { lambda, x, .. } = cmd {
        if let Some(l) = lambda {
            cfg.set("chernoff.lambda", &l.to_string())?;
        }
        if let Some(x) = x {
            cfg.set("chernoff.x", &x.to_string())?;
        }
    }
    Ok(cfg)
}

fn simulate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let spec = cfg.model_spec()?;
    let profile = cfg.profile()?;
    let seed = cfg.seed()?;
    let grid = uniform_grid(spec.horizon, cfg.usize("grid")?);
    let max_events = cfg.u64("max_events")?;
    let paths = (0..cfg.u64("simulate.paths")?)
        .into_par_iter()
        .map(|trial| {
            let eta = sample_initial_configuration(|u| profile.value(u), spec.n, &mut initial_rng(seed, trial))?;
            simulate_trial(&spec, &eta, &grid, seed, trial, max_events)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut outcome = Outcome::default();
    for p in &paths {
        out.write_with(&format!("path-{}.csv", p.trial), |w| p.write_columnar(w, &[]))?;
        outcome.events += p.events.last().copied().unwrap_or(0);
        outcome.truncated += usize::from(p.truncated);
    }
    println!("simulate: {} path(s), {} snapshot(s) each, {} events", paths.len(), grid.len(), outcome.events);
    Ok(outcome)
}

#[derive(Serialize)]
struct CoupleSummary {
    events: u64,
    truncated: bool,
    d1_final: u64,
    d2_final: u64,
    tv_xi_zeta: f64,
    lp_lower_xi_zeta: f64,
    lp_upper_xi_zeta: f64,
}

fn couple(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let spec = cfg.model_spec()?;
    let seed = cfg.seed()?;
    let profile = cfg.profile()?;
    let eta = sample_initial_configuration(|u| profile.value(u), spec.n, &mut initial_rng(seed, 0))?;
    let grid = uniform_grid(spec.horizon, cfg.usize("grid")?);
    let hat = cfg.bool("couple.hat").then_some(&eta);
    let paths = coupled_simulate(&spec, &eta, &eta, hat, &grid, seed, 0, cfg.u64("max_events")?)?;
    out.write_with("coupled.csv", |w| paths.write_columnar(w))?;
    out.write_with("xi.csv", |w| paths.xi.write_columnar(w, &[]))?;
    if let Some(h) = &paths.hat {
        out.write_with("hat.csv", |w| h.write_columnar(w, &[]))?;
    }
    let xi = paths.xi.final_configuration().expect("grid is non-empty");
    let zeta = paths.zeta.final_configuration().expect("grid is non-empty");
    let report = lp_bracket::<f64>(&empirical_measure(xi), &empirical_measure(zeta))?;
    let last = paths.d1.len() - 1;
    let summary = CoupleSummary {
        events: paths.events,
        truncated: paths.truncated,
        d1_final: paths.d1[last],
        d2_final: paths.d2[last],
        tv_xi_zeta: report.tv,
        lp_lower_xi_zeta: report.lp_lower,
        lp_upper_xi_zeta: report.lp_upper,
    };
    out.write_json("summary.json", &summary)?;
    println!(
        "couple: D1(T) = {}, D2(T) = {}, TV(ξ, ζ) = {:.6}, LP ∈ [{:.6}, {:.6}], {} events (every event checked against the order)",
        summary.d1_final, summary.d2_final, summary.tv_xi_zeta, summary.lp_lower_xi_zeta, summary.lp_upper_xi_zeta, summary.events
    );
    Ok(Outcome { events: paths.events, truncated: usize::from(paths.truncated) })
}

fn equivalence(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let spec = cfg.model_spec()?;
    let mut ec = EquivalenceConfig::new(
        spec,
        cfg.f64("equivalence.epsilon")?,
        cfg.usize_list("equivalence.ns")?,
        cfg.usize("trials")?,
        cfg.seed()?,
    );
    ec.profile = cfg.profile()?;
    ec.snapshots = cfg.usize("grid")?;
    ec.max_events = cfg.u64("max_events")?;
    let r = run_equivalence_experiment(&ec)?;
    out.write_with("equivalence.csv", |w| r.write_csv(w))?;
    out.write_columns("p_hat.csv", ("n", "p_hat"), &r.rows.iter().map(|row| (row.n as f64, row.p_hat)).collect::<Vec<_>>())?;
    out.write_columns(
        "decay_rate.csv",
        ("n", "r"),
        &r.decay.ns.iter().zip(&r.decay.r).map(|(&n, &v)| (n as f64, v)).collect::<Vec<_>>(),
    )?;
    out.write_json("equivalence.json", &r)?;
    for row in &r.rows {
        println!(
            "N = {:5}  p̂ = {:.4} [{:.4}, {:.4}]  λ_N = {:.3}  mean influx = {:.3}",
            row.n, row.p_hat, row.wilson_lo, row.wilson_hi, row.lambda_n, row.mean_influx
        );
    }
    println!("decay: {}", r.decay.verdict_label());
    Ok(Outcome {
        events: r.rows.iter().map(|row| row.events).sum(),
        truncated: r.rows.iter().map(|row| row.truncated).sum(),
    })
}

fn hydro(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let mut hc = HydroConfig::new(cfg.model_spec()?, cfg.usize("hydro.seeds")?, cfg.seed()?);
    hc.profile = cfg.profile()?;
    hc.cells = cfg.usize("hydro.cells")?;
    hc.blocks = cfg.hydro_blocks()?;
    hc.max_events = cfg.u64("max_events")?;
    let r = run_hydro_experiment(&hc)?;
    out.write_with("field.csv", |w| r.field.write_csv(w))?;
    out.write_with("profile.csv", |w| r.write_profile_csv(w))?;
    out.write_with("l1.csv", |w| r.write_l1_csv(w))?;
    out.write_json("hydro.json", &r)?;
    println!(
        "hydro: N = {}, T = {}, {} runs, {} blocks, time dilation {}: mean L1 = {:.5}",
        r.n, r.t, r.l1.len(), r.blocks, r.time_dilation, r.mean_l1
    );
    let ns = cfg.usize_list("hydro.reservoir_ns")?;
    if !ns.is_empty() {
        let res = run_reservoir_discrepancy(&hc, &ns)?;
        out.write_with("reservoir.csv", |w| res.write_csv(w))?;
        for row in &res.rows {
            println!("reservoir: N = {:5}  median L1(impermeable, weak) = {:.5}", row.n, row.median);
        }
    }
    Ok(Outcome { events: 0, truncated: r.truncated })
}

#[derive(Serialize)]
struct ChernoffSummary {
    lambda: f64,
    x: f64,
    h: f64,
    bound: f64,
    exact_tail: f64,
}

fn chernoff(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let lambda = cfg.f64("chernoff.lambda")?;
    let x = cfg.f64("chernoff.x")?;
    let s = ChernoffSummary {
        lambda,
        x,
        h: chernoff_h(x / lambda),
        bound: chernoff_poisson_tail(lambda, x),
        exact_tail: poisson_tail_above(lambda, x)?,
    };
    out.write_json("chernoff.json", &s)?;
    let mut curve = String::from("x,bound,exact\n");
    for i in 0..=60 {
        let xi = lambda * f64::from(i) / 20.0;
        curve.push_str(&format!("{},{},{}\n", xi, chernoff_poisson_tail(lambda, xi), poisson_tail_above(lambda, xi)?));
    }
    out.write_bytes("curve.csv", curve.as_bytes())?;
    println!("P(Poisson({lambda}) ≥ {lambda} + {x}):");
    println!("bound = {:.5}", s.bound);
    println!("exact tail = {:.5}", s.exact_tail);
    Ok(Outcome::default())
}

fn walkers(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    let mut wc = WalkerConfig::new(
        cfg.f64("kernel.gamma")?,
        cfg.f64_list("walkers.m")?,
        cfg.usize("n")?,
        cfg.f64("horizon.T")?,
        cfg.usize("trials")?,
        cfg.seed()?,
    );
    wc.coverage = cfg.f64("walkers.coverage")?;
    let r = walker_crossing_estimate(&wc)?;
    out.write_with("walkers.csv", |w| r.write_csv(w))?;
    out.write_columns("estimate.csv", ("m", "estimate"), &r.ms.iter().copied().zip(r.estimates.iter().copied()).collect::<Vec<_>>())?;
    out.write_columns("bound.csv", ("m", "bound"), &r.ms.iter().copied().zip(r.bounds.iter().copied()).collect::<Vec<_>>())?;
    out.write_json("walkers.json", &r)?;
    for i in 0..r.ms.len() {
        println!(
            "m = {:4}  crossings = {:.6} ± {:.6}  bound = {:.4}  C·N·m^(-γ') = {:.4}",
            r.ms[i], r.estimates[i], r.std_errors[i], r.bounds[i], r.reference[i]
        );
    }
    Ok(Outcome::default())
}

fn validate(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome> {
    // model_spec() runs the exhaustive monotonicity scan of the bulk rate
    let spec = cfg.model_spec()?;
    println!("bulk rate {:?}: attractive on S_k (non-decreasing in n, non-increasing in m)", spec.rates.bulk);
    let table = condition_table(&spec, &cfg.usize_list("equivalence.ns")?)?;
    let mut csv = String::from("n,kappa,theta,influx_side,outflux_side,total,per_site\n");
    println!("{:>8} {:>14} {:>12}", "N", "B(N)", "B(N)/N");
    for r in &table.rows {
        println!("{:>8} {:>14.6} {:>12.6}", r.n, r.total, r.per_site);
        csv.push_str(&format!("{},{},{},{},{},{},{}\n", r.n, r.kappa, r.theta, r.influx_side, r.outflux_side, r.total, r.per_site));
    }
    println!("{}", table.verdict());
    out.write_bytes("condition.csv", csv.as_bytes())?;
    out.write_json("validate.json", &table)?;
    Ok(Outcome::default())
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_)
            | Error::InvalidSpec(_)
            | Error::InvalidRates(_)
            | Error::InvalidKernel(_)
            | Error::NonSummableKernel(_)
            | Error::InvalidProfile(_)
            | Error::InvalidArgument(_)
            | Error::CflViolated { .. }
            | Error::StateSpaceTooLarge { .. }
    )
}

fn run(cmd: &Command) -> std::result::Result<u8, (u8, Error)> {
    let cfg = build_config(cmd).map_err(|e| (EXIT_CONFIG, e))?;
    if let Some(jobs) = cmd.common().jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| (1, Error::InvalidArgument(e.to_string())))?;
    }
    let fail = |e: Error| (if is_config_error(&e) { EXIT_CONFIG } else { 1 }, e);
    let seed = cfg.seed().map_err(fail)?;
    let started = Instant::now();
    let mut out = OutputDir::create(&cmd.common().out_dir, cmd.name(), seed).map_err(fail)?;
    let outcome = match cmd {
        Command::Simulate(_) => simulate(&cfg, &mut out),
        Command::Couple(_) => couple(&cfg, &mut out),
        Command::Equivalence(_) => equivalence(&cfg, &mut out),
        Command::Hydro(_) => hydro(&cfg, &mut out),
        Command::Chernoff { .. } => chernoff(&cfg, &mut out),
        Command::Walkers(_) => walkers(&cfg, &mut out),
        Command::Validate(_) => validate(&cfg, &mut out),
    }
    .map_err(fail)?;
    let dir = out.path().to_path_buf();
    let telemetry = Telemetry { wall_clock_seconds: started.elapsed().as_secs_f64(), events: outcome.events };
    out.finish(cmd.name(), &cfg, telemetry).map_err(fail)?;
    println!("outputs: {}", dir.display());
    if outcome.truncated > 0 {
        eprintln!(
            "error: event budget max_events exceeded in {} trajectory(ies); outputs are truncated, raise max_events",
            outcome.truncated
        );
        return Ok(EXIT_BUDGET);
    }
    Ok(0)
}

fn main() -> ExitCode {
    let help = schema_help();
    let command = Cli::command().mut_subcommands(|s| s.after_long_help(help.clone()).after_help(help.clone()));
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err((code, e)) => {
            eprintln!("error: {e}");
            ExitCode::from(code)
        }
    }
}
