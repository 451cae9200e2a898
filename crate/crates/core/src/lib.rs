#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod classify;
pub mod cli;
pub mod config;
pub mod disc;
pub mod distance;
pub mod domain;
pub mod error;
pub mod expr;
pub mod extremal;
pub mod geometry;
pub mod models;
mod optim;
mod quad;
pub mod verify;

pub use error::{Error, Result};
