//! Spectroscopy modelling and analysis for group-IV color centers in diamond.
//!
//! - [`units`]: CODATA 2018 constants and energy/force-constant conversions.
//! - [`vibmodel`]: harmonic impurity-mode model and isotope shifts of the ZPL.
//! - [`levels`]: four-line level structure, thermal visibility, line shapes.
//! - [`ensemble`]: seeded emitter-population and PLE-scan simulation.
//! - [`fitting`]: Levenberg–Marquardt engine and multi-peak fits.
//! - [`analysis`]: spectral coincidence, identical pairs, depth correction.
//! - [`io`], [`svg`], [`cli`]: file formats, plots and the batch front end.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod ensemble;
pub mod error;
pub mod exec;
pub mod fitting;
pub mod io;
pub mod levels;
pub mod rng;
pub mod spectrum;
pub mod svg;
pub mod units;
pub mod vibmodel;

pub use error::{Error, Result};
