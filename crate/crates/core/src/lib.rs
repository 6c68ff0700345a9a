#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data_synth;
pub mod dataset_io;
pub mod eigensystems;
pub mod error;
pub mod kernels;
pub mod par;
pub mod points;
pub mod risk_eval;
pub mod smoothness;
pub mod spectral_estimator;
pub mod stats;

pub use error::{Error, Result};
pub use points::Points;
