//! Configurations, jump kernels, rate functions and static boundary
//! quantities shared by every dynamics in the crate.

mod config;
mod embed;
pub mod kernel;
mod rates;
mod spec;

pub use config::{Capacity, Configuration, Move};
pub use embed::{embed_to_line, LineConfiguration};
pub use kernel::{JumpKernel, KernelPhase, KernelPmf};
pub use rates::{BulkRate, RateFunctions, Reservoir, Schedule, SideProfile};
pub use spec::{BoundaryRateSum, Kappa, ModelSpec, Regime, Theta};
