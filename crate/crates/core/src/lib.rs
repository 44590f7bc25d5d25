//! Desk-scale active learning for velocity-field surrogate models on 3D
//! vascular point clouds.
//!
//! The crate implements a pool-based active-learning loop around a small
//! per-point velocity regressor, with an analytic steady-flow labeler in
//! place of a CFD engine:
//!
//! - [`geometry`]: synthetic bifurcation point clouds, boundary features,
//!   farthest-point sampling.
//! - [`oracle`]: analytic Poiseuille labeler and velocity fields.
//! - [`diffops`]: k-NN graphs, moving-least-squares derivatives, and
//!   Navier-Stokes continuity/momentum residuals on point clouds.
//! - [`surrogate`]: the trainable regressor with exact backprop and
//!   Monte Carlo dropout committees.
//! - [`queries`]: geometry-variance, query-by-committee, physics-adherence,
//!   and random query strategies.
//! - [`engine`]: pool bookkeeping, evaluation metrics, and the experiment
//!   driver.
//! - [`io`]: binary interchange formats for shapes, fields, and models.

pub mod diffops;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod io;
pub mod math;
pub mod oracle;
pub mod queries;
pub mod surrogate;

pub use error::{Error, Result};
