//! Time-of-flight mobile localization.
//!
//! A mobile ranges against fixed towers by timing request/acknowledge round
//! trips, converts the turn-around times to distances and trilaterates its
//! position. The crate provides:
//!
//! - [`geometry`]: points, distances and hex-cell tower layouts,
//! - [`trilateration`]: three-tower and least-squares position solvers,
//! - [`timing`]: turn-around to distance conversion, delay calibration,
//!   clock quantization and the precision feasibility bound,
//! - [`simulator`]: a deterministic discrete-event run of the ranging
//!   protocol plus Monte Carlo sweeps,
//! - [`ingest`]: ping-trace parsing and round-trip statistics,
//! - [`cli`]: the `toftrack` command-line tool.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod geometry;
pub mod ingest;
pub mod simulator;
pub mod timing;
pub mod trilateration;

pub use geometry::{distance, hex_cell_layout, Point3, TowerSite};
pub use timing::{RangingMode, TimingModel, SPEED_OF_LIGHT};
pub use trilateration::{LocationFix, RangeMeasurement, ZBranch, ZConvention};
