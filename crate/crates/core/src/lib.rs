//! Riemannian geometry of an exact isotopy class of positive Lagrangian
//! graphs in flat and twisted almost Calabi-Yau models on `T*T^n`.

pub mod ambient;
pub mod cli;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod exterior;
pub mod graph;
pub mod mirror;
pub mod torus;
pub mod validation;

pub use error::{Error, Result};
