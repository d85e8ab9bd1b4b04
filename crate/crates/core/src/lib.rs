#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Support vector machines in reproducing kernel Banach spaces `B^p_Φ` built
//! from Matérn kernels, with independent numerical oracles.

pub mod cli;
pub mod error;
pub mod finite_rkbs;
pub mod function_space;
pub mod kernels;
pub mod lp_semi_inner;
pub mod oracle;
pub mod solver;

pub use error::{Error, Result};
