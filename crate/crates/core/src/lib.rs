//! Numerics for the charged scalar field system (Maxwell coupled to a
//! complex scalar through the minimal connection `D = ∂ + iA`).
//!
//! Conventions used throughout:
//! - Minkowski metric `diag(-1, 1, 1, 1)`, Cartesian coordinates `(t, x1, x2, x3)`.
//! - Null frame `L = ∂t + ∂r`, `Lbar = ∂t - ∂r`, unit angular vectors `e_A`.
//! - Volume form `ε_{0123} = +1`; `E_i = F_{0i}`, `H_i = (*F)_{0i}`.
//! - Current `J_α = Im(φ · conj(D_α φ))`, field equations `∇^β F_{αβ} = J_α`.

pub mod analysis;
pub mod charge;
pub mod energy;
pub mod error;
pub mod evolve;
pub mod fields;
pub mod geometry;
pub mod manufactured;
pub mod quad;
pub mod report;
pub mod tolerances;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
