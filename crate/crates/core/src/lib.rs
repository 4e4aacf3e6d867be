//! Precision-scaled approximation of decision-tree classifiers for
//! fully parallel hardware.
//!
//! A CART tree is trained on min-max normalized data; each comparator then
//! gets its own bit width and a small integer offset to its threshold. A
//! multi-objective search trades classification error against comparator
//! area, and any chosen design can be emitted as combinational Verilog.

pub mod api;
pub mod area;
pub mod dataset;
pub mod dtree;
mod error;
pub mod evaluator;
pub mod moo;
pub mod pipeline;
pub mod quantizer;
pub mod rng;
pub mod rtl;

pub use error::{Error, Result};
