// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod config;
pub mod io;
pub mod continuation;
pub mod error;
pub mod jmap;
pub mod orbit;
pub mod sphere;
pub mod su_algebra;
pub mod torus;
pub mod verify;

pub use error::{Error, Result};
