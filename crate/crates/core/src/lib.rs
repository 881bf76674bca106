//! Shape optimization for an elliptic obstacle problem, posed as a boundary
//! control problem on a fixed disk.

pub mod bfgs;
pub mod config;
pub mod control;
pub mod error;
pub mod export;
pub mod fem;
pub mod mesh;
pub mod objective;
pub mod obstacle;
pub mod pipeline;
pub mod sparse;

pub use error::{Error, Result};
