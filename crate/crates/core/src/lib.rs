#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod branch;
pub mod extended;
pub mod identities;
pub mod io;
pub mod model;
pub mod quadrature;
pub mod variational;
