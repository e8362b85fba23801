//! Pseudo-spectral simulation and certification toolkit for stochastic
//! reaction-diffusion systems with transport noise on the periodic torus.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checker;
pub mod energy;
pub mod ensemble;
pub mod error;
pub mod gronwall;
pub mod model;
pub mod noise;
pub mod sampling;
pub mod solver;
pub mod stats;
pub mod torus;

pub use error::{Error, Result};
