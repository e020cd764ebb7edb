//! Density ratio estimation through variational f-divergence losses.
//!
//! The crate is organized by stage:
//!
//! - [`autodiff`]: tensors, a gradient tape, rectifier MLPs and Adam.
//! - [`divergence`]: convex generators, their conjugates, and the losses built on them.
//! - [`synthdata`]: Gaussian-versus-mixture problems with a closed-form density ratio.
//! - [`trainer`]: mini-batch training with validation early stopping.
//! - [`analysis`]: Lp errors, nearest-neighbor moments, and error-bound formulas.
//! - [`bench`]: experiment sweeps, CSV tables and SVG figures.

// `!(x > 0.0)` is the NaN-rejecting form
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod autodiff;
pub mod bench;
pub mod divergence;
pub mod stats;
pub mod synthdata;
pub mod trainer;
