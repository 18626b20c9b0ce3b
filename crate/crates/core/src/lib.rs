//! Numerical toolkit for higher order mean curvature estimates of hypersurfaces in
//! Riemannian and Lorentzian space forms.
//!
//! Modules, bottom up:
//!
//! - [`spaceform`]: model spaces, distance to a point, its gradient and Hessian.
//! - [`comparison`]: `C_b`, `φ_b`, the Cauchy problem `g'' = G^2 g`, the Sturm
//!   comparison and the barrier ingredients of the maximum principle.
//! - [`curvature`]: `S_k`, `H_k`, Newton tensors, Garding chain.
//! - [`immersion`]: parametric patches and their shape operators.
//! - [`operators`]: `Hess u` and `L_k u` for `u = ρ ∘ f`, the key inequality, and a
//!   sequence search for the Omori-Yau principle.
//! - [`harness`]: scenario files, estimate checks and reports.

pub mod comparison;
pub mod curvature;
pub mod error;
pub mod harness;
pub mod immersion;
pub mod operators;
pub mod spaceform;

pub use error::{Error, Result};
