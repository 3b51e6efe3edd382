//! Linear, unconditionally energy-stable finite-element solver for a
//! Caginalp-type phase-field model of photopolymer curing, coupled to
//! quasi-static thermo-elasticity.
//!
//! The time stepper uses a scalar auxiliary variable for the double-well
//! energy, so each step needs only symmetric positive definite solves and a
//! rank-one correction.

pub mod app;
pub mod config;
pub mod elasticity;
pub mod error;
pub mod fem;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod model;
pub mod output;
pub mod sav;
pub mod source;

pub use error::{Error, Result};
