//! Throughput analysis of CDF-based opportunistic scheduling with best-M
//! partial CQI feedback in multicell OFDMA downlinks.
//!
//! The crate offers three independent views of the same quantity:
//!
//! * [`exact_rate`] evaluates the per-user and sum rates in closed form,
//!   with [`exact_rate::g_k_quadrature`] as a numerical oracle;
//! * [`asymptotics`] approximates them through extreme-value normalizing
//!   constants;
//! * [`simulator`] measures them in a drop-based Monte Carlo system model,
//!   alongside greedy and round-robin baselines.
//!
//! [`planner`] uses the first two to find the smallest feedback load `M`
//! reaching a target fraction of the full-feedback rate, and [`cli`]
//! wires everything to scenario files and CSV reports.

pub mod asymptotics;
pub mod channel;
pub mod cli;
pub mod error;
pub mod exact_rate;
pub mod feedback;
mod hiprec;
pub mod planner;
pub mod simulator;
pub mod specfun;

pub use error::{Error, Result};
