#![no_std]
// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

extern crate alloc;

mod error;
pub mod linalg;

pub use error::Error;
pub mod geometry;
pub mod wendland;
pub mod rkhs;
pub mod expr;
pub mod koopman;
pub mod control;
pub mod stability;
pub mod systems;
