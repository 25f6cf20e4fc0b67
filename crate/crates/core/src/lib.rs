// `!(x > 0.0)` is used deliberately throughout so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod airy_model;
pub mod boundary;
pub mod config;
pub mod csv_out;
pub mod eigen;
pub mod expr;
pub mod oscillatory;
pub mod pointwise;
pub mod quad;
pub mod selftest;
pub mod special;
pub mod verify;

pub use error::{Error, Result};
