//! Open-system simulation of a three-level cascade emitter whose upper
//! transition couples ultrastrongly to a single cavity mode.
//!
//! Losses are treated with a dressed-basis Lindblad master equation, and
//! detection-level quantities use the positive-frequency parts of system
//! operators. All frequencies are in units of the cavity frequency ω₀.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod correlations;
pub mod dissipation;
pub mod dressed;
pub mod dynamics;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod observables;

pub use error::{Error, Result};
