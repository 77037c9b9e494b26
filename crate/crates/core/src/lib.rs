//! Spatially sparse optimization of time-dependent controls with a
//! fractional Sobolev penalty on the bounding function.
//!
//! The pipeline: build a [`mesh::Mesh`] and [`mesh::TimeGrid`], assemble
//! the Gram matrices in [`fracnorm`], wrap everything in a
//! [`problem::ProblemSpec`], and run [`mm::mm_solve`].

pub mod analysis;
pub mod config;
pub mod error;
pub mod fracnorm;
pub mod mesh;
pub mod mm;
pub mod problem;
pub mod quadrature;
pub mod smoothing;
pub mod subqp;

#[cfg(feature = "cli")]
pub mod cli;

pub use error::{Error, Result};
