//! Certification and synthesis of first-order optimization algorithms.
//!
//! An algorithm `x⁺ = A x + B ∇H(C x)`, `z = D x` is viewed as a linear system
//! in feedback with the gradient of an unknown `H ∈ S(m, L)`. Convergence rates
//! and averaged H2 noise-rejection levels are certified by searching for
//! ρ-weighted Zames-Falb multipliers through KYP linear matrix inequalities;
//! the same inequalities drive convex and alternating (BMI) synthesis.
//!
//! Module overview:
//! - [`statespace`]: realizations, series connection, ρ-scaling, frequency evaluation.
//! - [`algorithms`]: algorithm realizations, equilibrium conditions, named methods.
//! - [`multipliers`]: Zames-Falb parameter classes and the `(M_Δ, ψ_Δ)` factorization.
//! - [`plantbuild`]: augmented plants whose KYP inequalities the theorems test.
//! - [`sdp`]: affine matrix expressions, the `SdpProblem` container and its solver.
//! - [`lmi`]: assembly of every analysis and synthesis inequality.
//! - [`engines`]: bisection, H2 minimization, synthesis drivers, FDI verification.
//! - [`sampling`]: random objectives and simulation-based H2 estimates.

pub mod algorithms;
pub mod engines;
pub mod error;
pub mod linalg;
pub mod lmi;
pub mod multipliers;
pub mod plantbuild;
pub mod sampling;
pub mod sdp;
pub mod statespace;

pub use error::{IqcError, Result};
