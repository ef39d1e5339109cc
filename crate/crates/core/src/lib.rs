//! Few-shot error detection for relational data.
//!
//! A classifier over per-cell representations is trained from a small set
//! of labeled cells. Labeled errors are scarce, so the training set is
//! augmented with synthetic errors drawn from a noisy channel learned from
//! the errors that are available (or from weakly supervised repairs).

pub mod constraints;
pub mod data;
pub mod detector;
pub mod error;
pub mod features;
pub mod harness;
pub mod neural;
pub mod noisychannel;

pub use error::{Error, Result};
