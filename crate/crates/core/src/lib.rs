//! Class-aware sharpness-aware minimization (ImbSAM) alongside SGD and SAM,
//! with synthetic long-tailed data, a small MLP classifier and Hessian-based
//! sharpness diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod objective;
pub mod optim;
pub mod params;
pub mod tensor;

pub use error::{Error, Result};
pub use objective::{hessian_vector_product, Objective};
pub use params::{flatten_params, unflatten_params, GradVector, Layout, Linear, ParamVector};
pub use tensor::Tensor;
