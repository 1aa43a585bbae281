//! Flat `key = value` run configuration.
//!
//! [`SCHEMA`] is the only list of keys: parsing, validation, defaults, the
//! canonical echo and the help text are all derived from it.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::harness::Profile;
use crate::model::{BulkRate, Capacity, JumpKernel, Kappa, ModelSpec, RateFunctions, Regime, Theta};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueKind {
    /// integer ≥ min
    Int { min: u64 },
    /// finite float, optionally bounded below (inclusive) or strictly above
    Float { min: Option<f64>, above: Option<f64> },
    /// one of a fixed list
    Choice(&'static [&'static str]),
    /// comma-separated positive floats
    FloatList,
    /// comma-separated integers ≥ 2
    IntList,
    Bool,
    /// free-form, checked when used
    Text,
}

#[derive(Clone, Copy, Debug)]
pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub kind: ValueKind,
    pub help: &'static str,
}

const fn key(key: &'static str, default: &'static str, kind: ValueKind, help: &'static str) -> KeySpec {
    KeySpec { key, default, kind, help }
}

const POSITIVE: ValueKind = ValueKind::Float { min: None, above: Some(0.0) };
const NON_NEGATIVE: ValueKind = ValueKind::Float { min: Some(0.0), above: None };

pub const SCHEMA: &[KeySpec] = &[
    key("n", "64", ValueKind::Int { min: 2 }, "lattice size N; the bulk is {1, …, N−1}"),
    key("capacity.k", "1", ValueKind::Text, "maximal occupancy k: a positive integer or 'inf'"),
    key("capacity.cap", "64", ValueKind::Int { min: 1 }, "storage cap per site when capacity.k = inf"),
    key("bulk.rate", "exclusion", ValueKind::Choice(&["exclusion", "misanthrope", "zero_range"]), "bulk rate b(n, m)"),
    key("kernel.variant", "nn", ValueKind::Choice(&["nn", "long_jump"]), "jump kernel: nearest neighbour or z^{-(1+γ)}"),
    key("kernel.gamma", "2", POSITIVE, "tail exponent γ of the long-jump kernel"),
    key("rates.alpha", "1", NON_NEGATIVE, "constant influx rate α"),
    key("rates.beta", "1", NON_NEGATIVE, "constant outflux rate β"),
    key("theta.m", "-0.5", ValueKind::Text, "θ(N) = N^m with m < 0, or 'zero' for θ ≡ 0"),
    key(
        "kappa.preset",
        "auto",
        ValueKind::Choice(&["auto", "linear", "linear_over_log", "power", "constant"]),
        "time speed-up κ(N); auto picks N, N/ln N or N^γ from the kernel",
    ),
    key("kappa.value", "1", POSITIVE, "exponent for kappa.preset = power, value for constant"),
    key("horizon.T", "1", NON_NEGATIVE, "macroscopic horizon T"),
    key("regime", "full_weak", ValueKind::Choice(&["impermeable", "influx_only", "full_weak"]), "generators in force"),
    key("seed", "1", ValueKind::Int { min: 0 }, "master seed"),
    key("init.profile", "linear", ValueKind::Text, "initial density: 'linear' (ρ₀(u) = u) or a constant in [0, 1]"),
    key("trials", "1000", ValueKind::Int { min: 1 }, "Monte Carlo trials (equivalence, walkers)"),
    key("grid", "11", ValueKind::Int { min: 1 }, "snapshots on a uniform grid over [0, T]"),
    key("max_events", "2000000000", ValueKind::Int { min: 1 }, "event budget per trajectory; exceeding it exits with 3"),
    key("simulate.paths", "1", ValueKind::Int { min: 1 }, "trajectories written by simulate"),
    key("couple.hat", "true", ValueKind::Bool, "include the weak-reservoir copy in couple"),
    key("equivalence.epsilon", "0.1", POSITIVE, "threshold ε for p̂_N"),
    key("equivalence.ns", "32,64,128,256", ValueKind::IntList, "N grid of the equivalence sweep and the validate table"),
    key("hydro.seeds", "20", ValueKind::Int { min: 1 }, "independent runs averaged by hydro"),
    key("hydro.cells", "1024", ValueKind::Int { min: 16 }, "Godunov cells on [0, 1]"),
    key("hydro.blocks", "auto", ValueKind::Text, "comparison blocks: a positive integer or 'auto' (⌊√N⌉)"),
    key("hydro.reservoir_ns", "128,256,512", ValueKind::IntList, "N grid for the reservoir discrepancy; empty skips it"),
    key("walkers.m", "1,2,4,8", ValueKind::FloatList, "start offsets m (walkers start at distance ≥ mN)"),
    key("walkers.coverage", "1000", POSITIVE, "start window covers all but 1/coverage of the bound"),
    key("chernoff.lambda", "10", POSITIVE, "Poisson mean λ"),
    key("chernoff.x", "10", ValueKind::Float { min: None, above: None }, "excess x in P(P ≥ λ + x)"),
];

pub fn key_spec(k: &str) -> Option<&'static KeySpec> {
    SCHEMA.iter().find(|s| s.key == k)
}

/// Help text listing every accepted key.
pub fn schema_help() -> String {
    let width = SCHEMA.iter().map(|s| s.key.len()).max().unwrap_or(0);
    let mut out = String::from("Configuration keys (key = value, '#' starts a comment):\n");
    for s in SCHEMA {
        let extra = match s.kind {
            ValueKind::Choice(opts) => format!(" [{}]", opts.join("|")),
            _ => String::new(),
        };
        writeln!(out, "  {:width$}  {}{} (default: {})", s.key, s.help, extra, s.default).expect("string write");
    }
    out
}

fn check_value(spec: &KeySpec, v: &str) -> Result<()> {
    let bad = |why: String| Err(Error::Config(format!("{} = '{}': {}", spec.key, v, why)));
    match spec.kind {
        ValueKind::Int { min } => match v.parse::<u64>() {
            Ok(x) if x >= min => Ok(()),
            Ok(_) => bad(format!("must be ≥ {min}")),
            Err(_) => bad("expected a non-negative integer".into()),
        },
        ValueKind::Float { min, above } => match v.parse::<f64>() {
            Ok(x) if !x.is_finite() => bad("must be finite".into()),
            Ok(x) if min.is_some_and(|m| x < m) => bad(format!("must be ≥ {}", min.unwrap_or_default())),
            Ok(x) if above.is_some_and(|m| x <= m) => bad(format!("must be > {}", above.unwrap_or_default())),
            Ok(_) => Ok(()),
            Err(_) => bad("expected a number".into()),
        },
        ValueKind::Choice(opts) => {
            if opts.contains(&v) {
                Ok(())
            } else {
                bad(format!("expected one of {}", opts.join(", ")))
            }
        }
        ValueKind::FloatList => {
            for item in v.split(',').filter(|s| !s.trim().is_empty()) {
                match item.trim().parse::<f64>() {
                    Ok(x) if x.is_finite() && x > 0.0 => {}
                    _ => return bad(format!("'{item}' is not a positive number")),
                }
            }
            Ok(())
        }
        ValueKind::IntList => {
            for item in v.split(',').filter(|s| !s.trim().is_empty()) {
                match item.trim().parse::<usize>() {
                    Ok(x) if x >= 2 => {}
                    _ => return bad(format!("'{item}' is not an integer ≥ 2")),
                }
            }
            Ok(())
        }
        ValueKind::Bool => match v {
            "true" | "false" => Ok(()),
            _ => bad("expected true or false".into()),
        },
        ValueKind::Text => Ok(()),
    }
}

/// Validated key → value map; absent keys read their schema default.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl RunConfig {
    /// Parses `key = value` lines. Unknown and repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1)))?;
            let k = k.trim();
            if let Some(prev) = seen.insert(k.to_string(), i + 1) {
                return Err(Error::Config(format!("line {}: key '{k}' already set on line {prev}", i + 1)));
            }
            cfg.set(k, v.trim()).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", i + 1)),
                other => other,
            })?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, k: &str, v: &str) -> Result<()> {
        let spec = key_spec(k).ok_or_else(|| {
            Error::Config(format!("unknown key '{k}'; run with --help to list accepted keys"))
        })?;
        check_value(spec, v)?;
        self.values.insert(spec.key, v.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{pair}' is not of the form key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn get(&self, k: &str) -> &str {
        match self.values.get(k) {
            Some(v) => v,
            None => key_spec(k).unwrap_or_else(|| panic!("key '{k}' missing from schema")).default,
        }
    }

    pub fn is_set(&self, k: &str) -> bool {
        self.values.contains_key(k)
    }

    pub fn u64(&self, k: &str) -> Result<u64> {
        self.get(k).parse().map_err(|_| Error::Config(format!("{k} is not an integer")))
    }

    pub fn usize(&self, k: &str) -> Result<usize> {
        Ok(self.u64(k)? as usize)
    }

    pub fn f64(&self, k: &str) -> Result<f64> {
        self.get(k).parse().map_err(|_| Error::Config(format!("{k} is not a number")))
    }

    pub fn bool(&self, k: &str) -> bool {
        self.get(k) == "true"
    }

    pub fn f64_list(&self, k: &str) -> Result<Vec<f64>> {
        self.get(k)
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("{k}: bad item '{s}'"))))
            .collect()
    }

    pub fn usize_list(&self, k: &str) -> Result<Vec<usize>> {
        self.get(k)
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse().map_err(|_| Error::Config(format!("{k}: bad item '{s}'"))))
            .collect()
    }

    /// Every key with its effective value, in schema order.
    pub fn effective(&self) -> Vec<(&'static str, String)> {
        SCHEMA.iter().map(|s| (s.key, self.get(s.key).to_string())).collect()
    }

    /// Canonical text form of [`effective`](Self::effective); parses back
    /// to an equal configuration.
    pub fn render(&self) -> String {
        self.effective().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64("seed")
    }

    pub fn profile(&self) -> Result<Profile> {
        match self.get("init.profile") {
            "linear" => Ok(Profile::Linear),
            other => match other.parse::<f64>() {
                Ok(c) if (0.0..=1.0).contains(&c) => Ok(Profile::Constant(c)),
                _ => Err(Error::Config(format!("init.profile = '{other}': expected 'linear' or a number in [0, 1]"))),
            },
        }
    }

    pub fn hydro_blocks(&self) -> Result<Option<usize>> {
        match self.get("hydro.blocks") {
            "auto" => Ok(None),
            v => match v.parse::<usize>() {
                Ok(b) if b > 0 => Ok(Some(b)),
                _ => Err(Error::Config(format!("hydro.blocks = '{v}': expected a positive integer or 'auto'"))),
            },
        }
    }

    /// The model described by the model keys, validated.
    pub fn model_spec(&self) -> Result<ModelSpec> {
        let capacity = match self.get("capacity.k") {
            "inf" => Capacity::Unbounded { cap: self.u64("capacity.cap")? as u32 },
            v => match v.parse::<u32>() {
                Ok(k) if k >= 1 => Capacity::Finite(k),
                _ => return Err(Error::Config(format!("capacity.k = '{v}': expected a positive integer or 'inf'"))),
            },
        };
        let kernel = match self.get("kernel.variant") {
            "nn" => JumpKernel::NearestNeighbour,
            _ => JumpKernel::LongJump { gamma: self.f64("kernel.gamma")? },
        };
        let mut rates = RateFunctions::exclusion(self.f64("rates.alpha")?, self.f64("rates.beta")?);
        rates.bulk = match self.get("bulk.rate") {
            "exclusion" => BulkRate::Exclusion,
            "misanthrope" => BulkRate::Misanthrope,
            _ => BulkRate::ZeroRange,
        };
        let theta = match self.get("theta.m") {
            "zero" => Theta::Zero,
            v => match v.parse::<f64>() {
                Ok(m) if m.is_finite() && m < 0.0 => Theta::Power(m),
                _ => return Err(Error::Config(format!("theta.m = '{v}': expected a negative number or 'zero'"))),
            },
        };
        let kappa = match self.get("kappa.preset") {
            "auto" => Kappa::Auto,
            "linear" => Kappa::Linear,
            "linear_over_log" => Kappa::LinearOverLog,
            "power" => Kappa::Power(self.f64("kappa.value")?),
            _ => Kappa::Constant(self.f64("kappa.value")?),
        };
        let regime = match self.get("regime") {
            "impermeable" => Regime::Impermeable,
            "influx_only" => Regime::InfluxOnly,
            _ => Regime::FullWeak,
        };
        let spec = ModelSpec {
            n: self.usize("n")?,
            capacity,
            kernel,
            rates,
            theta,
            kappa,
            horizon: self.f64("horizon.T")?,
            regime,
        };
        spec.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_tasep_preset() {
        let spec = RunConfig::default().model_spec().unwrap();
        assert_eq!(spec, ModelSpec { kappa: Kappa::Auto, ..ModelSpec::tasep(64, 1.0, 1.0, -0.5) });
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let cfg = RunConfig::parse("# preset\n n = 128 \nkernel.variant=long_jump # TALJEP\n\nkernel.gamma = 0.5\n").unwrap();
        let spec = cfg.model_spec().unwrap();
        assert_eq!(spec.n, 128);
        assert_eq!(spec.kernel, JumpKernel::LongJump { gamma: 0.5 });
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let err = RunConfig::parse("n = 8\nalpha = 1\n").unwrap_err().to_string();
        assert!(err.contains("line 2") && err.contains("unknown key 'alpha'"), "{err}");
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in ["n = 1", "rates.alpha = -1", "regime = open", "kernel.gamma = 0", "couple.hat = yes", "n = 8\nn = 9"] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
        let cfg = RunConfig::parse("theta.m = 0.5").unwrap();
        assert!(matches!(cfg.model_spec(), Err(Error::Config(_))));
        let cfg = RunConfig::parse("capacity.k = 2").unwrap();
        assert!(cfg.model_spec().is_err(), "exclusion bulk rate needs k = 1");
        let cfg = RunConfig::parse("capacity.k = 2\nbulk.rate = misanthrope").unwrap();
        assert_eq!(cfg.model_spec().unwrap().capacity, Capacity::Finite(2));
    }

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::parse("n = 32\ntheta.m = zero\nwalkers.m = 1,3").unwrap();
        cfg.set_pair("seed=9").unwrap();
        let again = RunConfig::parse(&cfg.render()).unwrap();
        assert_eq!(again.effective(), cfg.effective());
        assert_eq!(again.model_spec().unwrap(), cfg.model_spec().unwrap());
    }

    #[test]
    fn help_lists_every_key() {
        let help = schema_help();
        for s in SCHEMA {
            assert!(help.contains(s.key));
        }
    }
}
