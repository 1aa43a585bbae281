//! Godunov solver for ∂_t ρ + ∂_x [ρ(1−ρ)] = 0 and comparison of particle
//! configurations with its solution.

use std::io::Write;

use serde::Serialize;

use crate::model::Configuration;
use crate::sim::{PathRecord, Snapshot};
use crate::{Error, Real, Result};

#[inline]
fn flux<T: Real>(rho: T) -> T {
    rho * (T::one() - rho)
}

/// Exact Riemann flux for the concave flux ρ(1−ρ).
#[inline]
pub fn godunov_flux<T: Real>(left: T, right: T) -> T {
    let half = T::lit(0.5);
    if left <= right {
        flux(left).min(flux(right))
    } else if right <= half && half <= left {
        T::lit(0.25)
    } else {
        flux(left).max(flux(right))
    }
}

/// Setup for [`burgers_solve`].
#[derive(Clone, Debug)]
pub struct BurgersProblem<T> {
    pub a: T,
    pub b: T,
    pub cells: usize,
    pub horizon: T,
    /// Times at which the field is stored; 0 and the horizon are always added.
    pub output_times: Vec<T>,
    /// Fixed step; defaults to `cfl`·Δx.
    pub dt: Option<T>,
    pub cfl: T,
}

impl<T: Real> BurgersProblem<T> {
    pub fn new(a: T, b: T, cells: usize, horizon: T) -> Self {
        Self { a, b, cells, horizon, output_times: Vec::new(), dt: None, cfl: T::lit(0.9) }
    }

    pub fn with_output_times(mut self, times: Vec<T>) -> Self {
        self.output_times = times;
        self
    }

    pub fn with_dt(mut self, dt: T) -> Self {
        self.dt = Some(dt);
        self
    }

    pub fn dx(&self) -> T {
        (self.b - self.a) / T::from_usize(self.cells).expect("cells representable")
    }
}

/// Cell averages on a uniform grid over [a, b] at stored times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityField<T> {
    pub a: T,
    pub b: T,
    pub cells: usize,
    pub times: Vec<T>,
    pub rho: Vec<Vec<T>>,
    /// ∫_0^t flux through the left edge (inflow positive), per stored time.
    pub left_inflow: Vec<T>,
    /// ∫_0^t flux through the right edge (outflow positive), per stored time.
    pub right_outflow: Vec<T>,
    /// Microscopic-to-Burgers time factor applied when comparing paths.
    pub time_dilation: T,
}

impl<T: Real> DensityField<T> {
    pub fn dx(&self) -> T {
        (self.b - self.a) / T::from_usize(self.cells).expect("cells representable")
    }

    pub fn center(&self, j: usize) -> T {
        self.a + (T::from_usize(j).expect("index") + T::lit(0.5)) * self.dx()
    }

    pub fn mass(&self, i: usize) -> T {
        self.rho[i].iter().fold(T::zero(), |s, &v| s + v) * self.dx()
    }

    /// Index of the stored time equal to `t` (within 1e−9 relative).
    pub fn time_index(&self, t: T) -> Result<usize> {
        let tol = T::lit(1e-9) * t.abs().max(T::one());
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .ok_or_else(|| Error::InvalidArgument(format!("field has no stored time {t:?}")))
    }

    /// Averages of the piecewise-constant field over `blocks` equal
    /// subintervals of [lo, hi] ⊆ [a, b].
    pub fn coarsen(&self, i: usize, lo: T, hi: T, blocks: usize) -> Result<Vec<T>> {
        let eps = T::lit(1e-12) * (self.b - self.a);
        if lo < self.a - eps || hi > self.b + eps || !(hi > lo) || blocks == 0 {
            return Err(Error::Mismatch(format!(
                "window [{lo:?}, {hi:?}] not inside field [{:?}, {:?}]",
                self.a, self.b
            )));
        }
        let dx = self.dx();
        let w = (hi - lo) / T::from_usize(blocks).expect("blocks");
        let row = &self.rho[i];
        let mut out = Vec::with_capacity(blocks);
        for k in 0..blocks {
            let s = lo + T::from_usize(k).expect("k") * w;
            let e = s + w;
            let first = ((s - self.a) / dx).floor().to_usize().unwrap_or(0).min(self.cells - 1);
            let mut acc = T::zero();
            let mut j = first;
            while j < self.cells {
                let cl = self.a + T::from_usize(j).expect("j") * dx;
                let cr = cl + dx;
                if cl >= e {
                    break;
                }
                let overlap = cr.min(e) - cl.max(s);
                if overlap > T::zero() {
                    acc = acc + overlap * row[j];
                }
                j += 1;
            }
            out.push(acc / w);
        }
        Ok(out)
    }

    /// Rectangular CSV: metadata comments, header `t,c0,c1,…`, one row per
    /// stored time.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "# a={:?} b={:?} cells={} dx={:?}", self.a, self.b, self.cells, self.dx())?;
        writeln!(w, "# flux=rho(1-rho) scheme=godunov time_dilation={:?}", self.time_dilation)?;
        let mut header = String::from("t");
        for j in 0..self.cells {
            header.push_str(&format!(",c{j}"));
        }
        writeln!(w, "{header}")?;
        for (t, row) in self.times.iter().zip(&self.rho) {
            let mut line = format!("{t:?}");
            for v in row {
                line.push_str(&format!(",{v:?}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Godunov scheme with constant ghost cells ρ₀(a), ρ₀(b). Initial cell
/// values are ρ₀ at cell centres.
pub fn burgers_solve<T: Real>(rho0: impl Fn(T) -> T, problem: &BurgersProblem<T>) -> Result<DensityField<T>> {
    let BurgersProblem { a, b, cells, horizon, .. } = *problem;
    if cells < 16 {
        return Err(Error::InvalidArgument(format!("need at least 16 cells, got {cells}")));
    }
    if !(b > a) || !(horizon >= T::zero()) {
        return Err(Error::InvalidArgument("window must satisfy a < b and T ≥ 0".into()));
    }
    let dx = problem.dx();
    let dt_max = match problem.dt {
        Some(dt) if dt > dx || !(dt > T::zero()) => {
            return Err(Error::CflViolated { dt: dt.to_f64().unwrap_or(f64::NAN), dx: dx.to_f64().unwrap_or(f64::NAN) })
        }
        Some(dt) => dt,
        None => problem.cfl.min(T::one()) * dx,
    };
    let check = |v: T, x: T| {
        if v >= T::zero() && v <= T::one() {
            Ok(v)
        } else {
            Err(Error::InvalidProfile(format!("ρ₀({x:?}) = {v:?} is outside [0,1]")))
        }
    };
    let ghost_left = check(rho0(a), a)?;
    let ghost_right = check(rho0(b), b)?;
    let mut rho = Vec::with_capacity(cells);
    for j in 0..cells {
        let x = a + (T::from_usize(j).expect("j") + T::lit(0.5)) * dx;
        rho.push(check(rho0(x), x)?);
    }
    let mut outputs: Vec<T> = problem.output_times.iter().copied().filter(|&t| t >= T::zero() && t <= horizon).collect();
    outputs.push(T::zero());
    outputs.push(horizon);
    outputs.sort_by(|x, y| x.partial_cmp(y).expect("finite times"));
    outputs.dedup();
    let mut field = DensityField {
        a,
        b,
        cells,
        times: Vec::new(),
        rho: Vec::new(),
        left_inflow: Vec::new(),
        right_outflow: Vec::new(),
        time_dilation: T::one(),
    };
    let mut t = T::zero();
    let mut inflow = T::zero();
    let mut outflow = T::zero();
    let mut fluxes = vec![T::zero(); cells + 1];
    let ratio_tol = T::lit(1e-12);
    for &target in &outputs {
        while target - t > ratio_tol * target.max(T::one()) {
            let dt = dt_max.min(target - t);
            let lam = dt / dx;
            fluxes[0] = godunov_flux(ghost_left, rho[0]);
            for j in 1..cells {
                fluxes[j] = godunov_flux(rho[j - 1], rho[j]);
            }
            fluxes[cells] = godunov_flux(rho[cells - 1], ghost_right);
            for j in 0..cells {
                rho[j] = rho[j] - lam * (fluxes[j + 1] - fluxes[j]);
            }
            inflow = inflow + dt * fluxes[0];
            outflow = outflow + dt * fluxes[cells];
            t = t + dt;
        }
        t = target;
        field.times.push(target);
        field.rho.push(rho.clone());
        field.left_inflow.push(inflow);
        field.right_outflow.push(outflow);
    }
    Ok(field)
}

/// Occupancy averages of the zeros/ones line embedding over `blocks` equal
/// subintervals of [lo, hi] in macroscopic units. The N−1 bulk sites tile
/// [0, 1]: site x covers [(x−1)/(N−1), x/(N−1)).
pub fn empirical_blocks<T: Real>(eta: &Configuration, lo: T, hi: T, blocks: usize) -> Result<Vec<T>> {
    let n = eta.n();
    let width = T::from_usize(n - 1).expect("n");
    let w = (hi - lo) / T::from_usize(blocks).expect("blocks");
    let mut out = Vec::with_capacity(blocks);
    for k in 0..blocks {
        let s = (lo + T::from_usize(k).expect("k") * w) * width;
        let e = (lo + T::from_usize(k + 1).expect("k") * w) * width;
        // cells i = x − 1 whose left edge lies in [s, e)
        let first = s.ceil().to_i64().ok_or_else(|| Error::InvalidArgument("window not finite".into()))?;
        let last = e.ceil().to_i64().ok_or_else(|| Error::InvalidArgument("window not finite".into()))? - 1;
        if last < first {
            return Err(Error::InvalidArgument(format!("block {k} contains no site; use fewer blocks")));
        }
        let mut acc = 0u64;
        for i in first..=last {
            acc += if i < 0 {
                0
            } else if i >= (n - 1) as i64 {
                1
            } else {
                u64::from(eta.get(i as usize + 1))
            };
        }
        out.push(T::from_u64(acc).expect("count") / T::from_i64(last - first + 1).expect("count"));
    }
    Ok(out)
}

/// Σ_blocks |ρ̂ − ρ|·w between a configuration and a stored field row.
pub fn compare_configuration<T: Real>(
    eta: &Configuration,
    field: &DensityField<T>,
    time_index: usize,
    blocks: usize,
) -> Result<T> {
    let emp = empirical_blocks(eta, field.a, field.b, blocks)?;
    let pde = field.coarsen(time_index, field.a, field.b, blocks)?;
    let w = (field.b - field.a) / T::from_usize(blocks).expect("blocks");
    Ok(emp.iter().zip(&pde).fold(T::zero(), |s, (&p, &q)| s + (p - q).abs() * w))
}

/// L¹ discrepancy between the path's snapshot at macroscopic time `t` and
/// the field at time `t`·time_dilation.
pub fn compare_density<T: Real>(path: &PathRecord, field: &DensityField<T>, t: f64, blocks: usize) -> Result<T> {
    let i = path
        .times
        .iter()
        .position(|&s| (s - t).abs() <= 1e-12 * t.abs().max(1.0))
        .ok_or_else(|| Error::InvalidArgument(format!("path has no snapshot at t={t}")))?;
    let k = field.time_index(T::lit(t) * field.time_dilation)?;
    match &path.snapshots[i] {
        Snapshot::Full(eta) => compare_configuration(eta, field, k, blocks),
        Snapshot::Blocks(_) => Err(Error::InvalidArgument("comparison needs a full snapshot".into())),
    }
}

/// Closed-form rarefaction for ρ₀ = 1{x<0}: clamp((1 − x/t)/2, 0, 1).
pub fn rarefaction<T: Real>(x: T, t: T) -> T {
    if t <= T::zero() {
        return if x < T::zero() { T::one() } else { T::zero() };
    }
    ((T::one() - x / t) * T::lit(0.5)).max(T::zero()).min(T::one())
}
