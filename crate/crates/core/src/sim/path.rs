use std::io::Write;

use serde::Serialize;

use crate::model::{Configuration, ModelSpec};
use crate::{Error, Result};

/// Full configurations are kept up to this lattice size; above it only
/// block densities are stored.
pub const FULL_SNAPSHOT_MAX_N: usize = 4096;

/// Upper bound on the number of density columns written per snapshot.
pub const OUTPUT_BLOCKS: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Snapshot {
    Full(Configuration),
    Blocks(Vec<f64>),
}

/// Trajectory of one process sampled on a macroscopic time grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathRecord {
    pub spec: ModelSpec,
    pub seed: u64,
    pub trial: u64,
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub cum_influx: Vec<u64>,
    pub cum_outflux: Vec<u64>,
    pub events: Vec<u64>,
    pub truncated: bool,
}

/// Sites per output block for a lattice of size n.
pub fn block_size(n: usize) -> usize {
    (n - 1).div_ceil(OUTPUT_BLOCKS).max(1)
}

/// Mean occupancy over consecutive blocks of `block` bulk sites.
pub fn block_densities(eta: &Configuration, block: usize) -> Vec<f64> {
    eta.occupancy()
        .chunks(block)
        .map(|c| c.iter().map(|&v| f64::from(v)).sum::<f64>() / c.len() as f64)
        .collect()
}

impl PathRecord {
    pub(crate) fn new(spec: &ModelSpec, seed: u64, trial: u64) -> Self {
        Self {
            spec: spec.clone(),
            seed,
            trial,
            times: Vec::new(),
            snapshots: Vec::new(),
            cum_influx: Vec::new(),
            cum_outflux: Vec::new(),
            events: Vec::new(),
            truncated: false,
        }
    }

    pub(crate) fn push(&mut self, t: f64, eta: &Configuration, influx: u64, outflux: u64, events: u64) {
        let snap = if eta.n() <= FULL_SNAPSHOT_MAX_N {
            Snapshot::Full(eta.clone())
        } else {
            Snapshot::Blocks(block_densities(eta, block_size(eta.n())))
        };
        self.times.push(t);
        self.snapshots.push(snap);
        self.cum_influx.push(influx);
        self.cum_outflux.push(outflux);
        self.events.push(events);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    /// Stored configuration at snapshot `i`, if full snapshots are kept.
    pub fn configuration(&self, i: usize) -> Option<&Configuration> {
        match &self.snapshots[i] {
            Snapshot::Full(c) => Some(c),
            Snapshot::Blocks(_) => None,
        }
    }

    pub fn final_configuration(&self) -> Option<&Configuration> {
        self.snapshots.len().checked_sub(1).and_then(|i| self.configuration(i))
    }

    pub fn densities(&self, i: usize) -> Vec<f64> {
        match &self.snapshots[i] {
            Snapshot::Full(c) => block_densities(c, block_size(c.n())),
            Snapshot::Blocks(b) => b.clone(),
        }
    }

    /// Columnar text output: `#`-prefixed metadata, a header row, then one row
    /// per snapshot with t, cum_influx, cum_outflux, events, any `extra`
    /// integer columns, and the block densities.
    pub fn write_columnar<W: Write>(&self, w: &mut W, extra: &[(&str, &[i64])]) -> Result<()> {
        for (name, col) in extra {
            if col.len() != self.len() {
                return Err(Error::Mismatch(format!("column {name} has {} rows, expected {}", col.len(), self.len())));
            }
        }
        let block = block_size(self.n());
        writeln!(w, "# n={}", self.n())?;
        writeln!(w, "# regime={}", self.spec.regime.name())?;
        writeln!(w, "# seed={} trial={}", self.seed, self.trial)?;
        writeln!(w, "# block_sites={block}")?;
        writeln!(w, "# truncated={}", self.truncated)?;
        let blocks = (self.n() - 1).div_ceil(block);
        let mut header = String::from("t,cum_influx,cum_outflux,events");
        for (name, _) in extra {
            header.push(',');
            header.push_str(name);
        }
        for b in 0..blocks {
            header.push_str(&format!(",rho_{b}"));
        }
        writeln!(w, "{header}")?;
        for i in 0..self.len() {
            let mut row = format!("{},{},{},{}", self.times[i], self.cum_influx[i], self.cum_outflux[i], self.events[i]);
            for (_, col) in extra {
                row.push_str(&format!(",{}", col[i]));
            }
            for d in self.densities(i) {
                row.push_str(&format!(",{d}"));
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }
}
