//! Elastic fidelity simulator.
//!
//! Decoders run their arithmetic on an [`alu::Alu`] whose results may be
//! corrupted by bit flips according to per-region [`fault::FaultSpec`]s.
//! Sweeps measure how decoded quality and decode failures respond to error
//! rate and bit range, and a power model turns region rates into normalized
//! power.

pub mod alu;
pub mod codec;
pub mod config;
pub mod corpus;
pub mod fault;
pub mod io;
pub mod media;
pub mod metrics;
pub mod plot;
pub mod power;
pub mod rng;
pub mod sweep;
