//! Finite pointed metric measure spaces and the approximation, weak-limit and
//! categorical machinery built on top of them.

pub mod approx;
pub mod category;
pub mod convergence;
pub mod error;
pub mod gallery;
pub mod io;
pub mod mmspace;
pub mod verdict;
pub mod weaklimit;

pub use error::{MmError, Result};
pub use verdict::{Evidence, Verdict};
