//! EV charging case study on top of `okra-core`.
//!
//! Each day of a session trace becomes one instance: the day's time slots
//! are knapsacks with a common per-slot capacity, and each charging session
//! is an item that may draw up to its charger rate in every slot of its
//! parking window. Per trial, fresh value functions are sampled and the
//! threshold policy, the fixed-price baseline and the offline optimum are
//! compared.

pub mod report;
pub mod session;
pub mod sim;

pub use report::{cdf_rows, emit, read_cdf, write_cdf, CdfRow};
pub use session::{gen_sessions, load_sessions, read_sessions, save_sessions, LoadOptions, LoadReport, Session};
pub use sim::{
    adaptive_adjust, build_instance, capacity_for, run_comparison, ComparisonReport, Congestion, EvValues, SimConfig,
};
