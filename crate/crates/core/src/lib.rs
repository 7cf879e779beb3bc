//! Numerical laboratory for the quasi-periodically forced quadratic map
//! `(θ, x) ↦ (θ + ω, c_{α,β}(θ)·x(1 − x))`.
//!
//! The crate computes the attracting invariant curve by pullback
//! iteration, locates the torus-collision parameter α_c, measures how the
//! attractor approaches the repeller `x = 0` as β → 1, and checks the
//! computational lemmas behind those asymptotics on dense grids.

pub mod asymptotics;
pub mod attractor;
pub mod commands;
pub mod config;
pub mod critical;
pub mod dd;
pub mod diophantine;
pub mod dynamics;
pub mod output;
pub mod error;
pub mod search;
pub mod verify;

pub use diophantine::{Arc, RotationNumber};
pub use dynamics::{LiftedState, RegionConstants, SystemParams};
pub use error::{Error, Result};
