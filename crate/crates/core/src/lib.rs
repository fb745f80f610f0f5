//! Numerical laboratory for the asymmetric sinh-Poisson mean-field equation
//!
//! ```text
//! −Δv = λ₁ e^v/∫e^v − λ₂ e^{−γv}/∫e^{−γv} − κ,   ∫v = 0,   κ = (λ₁−λ₂)/|Σ|
//! ```
//!
//! on flat rectangular tori: spectral operators ([`torus`]), the variational
//! functional ([`model`]), the admissible parameter region ([`region`]),
//! Liouville-bubble test functions ([`bubbles`]), mountain-pass and Newton
//! solvers ([`minimax`]) and blow-up mass diagnostics ([`blowup`]).

pub mod blowup;
pub mod bubbles;
pub mod cli;
pub mod config;
pub mod error;
pub mod field_io;
pub mod krylov;
pub mod minimax;
pub mod model;
pub mod region;
pub mod torus;

pub use error::{Error, Result};
pub use model::{Parameters, TwoAtomMeasure};
pub use torus::{Field, Grid, Point, TorusGrid};
