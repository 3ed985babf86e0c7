//! Classical Monte Carlo simulator of a single-atom hyperfine qubit held in a
//! movable optical tweezer.

// Range checks are written as `!(x > lo)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coherence;
pub mod config;
pub mod constants;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod io;
pub mod motion;
pub mod report;
pub mod rng;
pub mod thermometry;
pub mod trap;

pub use error::{Result, SimError};
