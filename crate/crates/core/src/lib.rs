//! Joint-space tolerance certificates for serial arms near half-space
//! obstacles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod kinematics;
pub mod linalg;
pub mod nlp;
mod par;
pub mod pipeline;
pub mod poly;
pub mod report;
pub mod sos;
#[cfg(test)]
mod testing;
pub mod verify;

pub use par::set_thread_limit;
