#![allow(clippy::needless_range_loop)]

pub mod autodiff;
pub mod dypn;
pub mod error;
pub mod exec;
pub mod hybrid;
pub mod instance;
pub mod metrics;
pub mod moea;
pub mod objectives;
pub mod reinforce;
pub mod rng;
pub mod tsp;

pub use error::{Error, Result};
