//! Simulation laboratory for misanthrope and exclusion processes in contact
//! with weak reservoirs.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] holds configurations, jump kernels, rate functions and the
//!   static boundary quantities (influx profiles, boundary rate sums).
//! * [`sim`] is an exact continuous-time simulator built on a prefix-sum
//!   event tree, plus a matrix-exponential oracle for tiny lattices.
//! * [`coupling`] runs the attractive triple coupling of the impermeable,
//!   influx-only and weak-reservoir processes on one probability space.
//! * [`metrics`] maps configurations to empirical measures and brackets the
//!   Lévy–Prokhorov distance between total variation and a CDF scan.
//! * [`hydro`] is a Godunov solver for Burgers' equation with TASEP flux.
//! * [`harness`] drives the quantitative experiments.
//! * [`io`] reads flat key-value configs and writes CSV/JSON outputs.
//!
//! Numerical code that does not depend on the Monte Carlo engine is generic
//! over the scalar type: [`metrics`] accepts any [`Scalar`] (including exact
//! rationals), [`hydro`] and the Chernoff bound accept any [`Real`].

pub mod coupling;
pub mod error;
pub mod harness;
pub mod hydro;
pub mod io;
pub mod metrics;
pub mod model;
pub mod sim;

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

pub use error::{Error, Result};

/// Ordered field-like scalar: enough for exact rational arithmetic.
pub trait Scalar:
    Num + PartialOrd + Copy + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
    fn from_usize_ratio(num: usize, den: usize) -> Self {
        Self::from_usize(num).expect("numerator representable")
            / Self::from_usize(den).expect("denominator representable")
    }
}

impl<T> Scalar for T where
    T: Num + PartialOrd + Copy + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static
{
}

/// Floating point scalar: f32 or f64.
pub trait Real: Float + Scalar {
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }
}

impl<T> Real for T where T: Float + Scalar {}

/// Exact rational scalar used for integer identities on empirical measures.
pub type Rational = num_rational::Rational64;

pub type EmpiricalMeasure64 = metrics::EmpiricalMeasure<f64>;
pub type EmpiricalMeasureExact = metrics::EmpiricalMeasure<Rational>;
pub type MetricReport64 = metrics::MetricReport<f64>;
pub type DensityField64 = hydro::DensityField<f64>;
pub type DensityField32 = hydro::DensityField<f32>;

pub use coupling::{CoupledPaths, CoupledState, CoupledStep};
pub use model::{
    Capacity, Configuration, JumpKernel, Kappa, ModelSpec, Move, RateFunctions, Regime, Theta,
};
pub use sim::{PathRecord, Simulator, StepOutcome};
