//! Thornlet: a small component framework for grid-based simulations.
//!
//! Components ("thorns") are described by three declaration files
//! (`interface.ccl`, `param.ccl`, `schedule.ccl`) plus compiled routines.
//! At run time the active thorns are assembled into a validated
//! configuration, their schedule items are sorted into a hierarchical
//! schedule, and the routines are executed over a slab-decomposed grid
//! whose ranks are simulated in-process.

pub mod ccl;
pub mod driver;
pub mod flesh;
pub mod harness;
pub mod runtime;
pub mod schedule;
pub mod sentinel;
pub mod thorns;
