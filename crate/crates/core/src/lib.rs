#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod linalg;
pub mod loss;
pub mod master;
pub mod optimizer;
pub mod privacy;
pub mod projection;
pub mod rng;
pub mod tuning;

pub use error::{Error, Result};
