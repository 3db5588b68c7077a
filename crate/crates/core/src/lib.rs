//! Inertial forward-backward splitting with general momentum schedules.

pub mod analysis;
pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod io;
pub mod problems;
pub mod prox;
pub mod schedules;
pub mod solver;
pub mod vecops;

pub use error::{Error, Result};
