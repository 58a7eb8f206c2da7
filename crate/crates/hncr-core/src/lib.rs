//! Hyperbolic collaborative filtering toolkit.
//!
//! Implements a neural recommender whose user/item representations live
//! in the Poincaré ball: gyrovector arithmetic ([`ball`]), reverse-mode
//! autodiff ([`autodiff`]), an implicit-feedback data pipeline ([`data`]),
//! semantic neighbor construction ([`neighbors`]), the recommender model
//! with Riemannian SGD training ([`model`]), and ranking/classification
//! evaluation ([`eval`]).
//!
//! The numeric kernel is generic over the scalar type ([`num::Real`],
//! `f32` or `f64`); the shipped tolerances and the pipeline default to
//! `f64` via the aliases below.

pub mod autodiff;
pub mod ball;
pub mod data;
pub mod eval;
pub mod model;
pub mod neighbors;
pub mod num;
pub mod rng;

pub use num::{Real, Value, EPS_BALL};

/// Default scalar of the full pipeline.
pub type Scalar = f64;

pub type BallPoint64 = ball::BallPoint<f64>;
pub type Curvature64 = ball::Curvature<f64>;
pub type TangentVector64 = ball::TangentVector<f64>;
pub type Tape64 = autodiff::Tape<f64>;
