//! Cycle-level simulator for near-bank near-memory processing of
//! multiresolution hash-grid NeRF training.
//!
//! The crate pairs a numerically checked functional reference of the
//! hash-encoding / MLP / volume-rendering pipeline with an LPDDR4
//! bank/subarray timing model, spatial-locality hash functions, address
//! mapping schemes, a per-bank compute-engine cost model, and an
//! inter-bank parallelism planner.

pub mod config;
pub mod dram;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod hashgrid;
pub mod mapping;
pub mod nerf;
pub mod parallelism;
pub mod report;
pub mod workload;

pub use error::{Result, SimError};
