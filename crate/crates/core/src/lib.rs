//! Gain-scheduled data-enabled predictive control.
//!
//! Trajectory data of a nonlinear plant is split by a scheduling variable into
//! regions, each with its own block-Hankel representation. A receding-horizon
//! controller solves the regularized DeePC program on the representation of
//! the active region or composite region.

pub mod deepc;
pub mod error;
pub mod harness;
pub mod par;
pub mod partition;
pub mod plant;
pub mod qp;
pub mod scheduler;
pub mod signal;

pub use error::{Error, Result};
