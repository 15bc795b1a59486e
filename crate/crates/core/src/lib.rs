//! Open systems composed along wiring diagrams.

#![allow(clippy::needless_range_loop)]

pub mod commands;
pub mod dot;
pub mod dsl;
pub mod error;
pub mod expr;
pub mod finset;
pub mod format;
pub mod lens;
pub mod machine;
pub mod ode;
pub mod petri;
pub mod wiring;

pub use error::{Error, Result, Verdict};
