#![allow(clippy::needless_range_loop)]

pub mod actions;
pub mod builtins;
pub mod dual;
pub mod error;
pub mod geometry;
pub mod leaves;
pub mod lie;
pub mod linalg;
pub mod poisson;
pub mod polarity;
pub mod reconstruction;
pub mod rng;

pub use error::{Error, Result};
