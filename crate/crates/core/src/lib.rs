//! Delay-adaptive robust Volt/Var control laboratory.
//!
//! The crate chains an AC power-flow engine, an interval predictor for the
//! feeder operating state, a Dec-POMDP environment whose reward is the
//! worst case over three representative states, and multi-agent TD3
//! training with one policy head per representative state and
//! potential-based reward shaping. [`bench`] wires these into train / eval /
//! grid-search oracle / report commands.

pub mod bench;
pub mod cases;
pub mod delay;
pub mod env;
mod error;
pub mod forecast;
pub mod grid;
pub mod marl;
pub mod powerflow;

pub use error::{Error, Result};
