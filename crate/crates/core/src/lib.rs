// `!(x > 0.0)` is used deliberately throughout so that NaN takes the failure branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discretization;
pub mod domain;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod nonlinearity;
pub mod par;
pub mod solvers;
pub mod thresholds;
