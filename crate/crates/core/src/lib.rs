//! Online allocation of divisible items across multiple capacitated
//! knapsacks with per-item rate limits and concave values.
//!
//! * [`thresholds`]: competitive ratios and threshold functions.
//! * [`ota`]: online threshold-based allocation (plus a fixed-price baseline
//!   and an integral variant).
//! * [`offline`]: offline optima with duality-gap certificates and a grid
//!   brute force for tiny instances.
//! * [`adversary`]: worst-case and random instance generators and the
//!   empirical competitive-ratio harness.

pub mod adversary;
pub mod error;
mod flow;
pub mod io;
pub mod model;
pub mod numeric;
pub mod offline;
pub mod ota;
pub mod thresholds;

pub use error::{OkraError, Result};
pub use model::{Allocation, Instance, Item, ItemValue, Mode, Regime, Setup, ValueFunction, TOL};
