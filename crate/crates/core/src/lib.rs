#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod field;
pub mod grid;
pub mod maximal;
pub mod numeric;
pub mod stopping;
pub mod suite;
pub mod verify;
pub mod weights;
pub mod young;

pub use config::{ExperimentConfig, TheoremId};
pub use error::{Error, Result};
