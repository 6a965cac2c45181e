//! Exact one-component reduction of linear quantum dynamics and
//! leakage-elimination control.
//!
//! A linear system `∂ₜX = M(t)X` is split into a one-dimensional target
//! component and its complement. The target amplitude then obeys a scalar
//! integro-differential equation with memory kernel `g(t, s)`, and control
//! enters only through the accumulated phase `C(t)`.

pub mod error;
pub mod lindyn;
pub mod one_component;
pub mod control;
pub mod adiabatic;
pub mod models;
pub mod runner;

pub use error::{Error, Result};
