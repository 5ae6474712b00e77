//! Orthonormal residual-stress basis fields on a spherical shell.
//!
//! A residual stress field is a self-equilibrated stress in an unloaded body:
//! divergence-free in the interior and traction-free on the boundary. On a
//! spherical shell `r_inner < r < r_outer`, the spherically symmetric members
//! of a quadratic stress-gradient functional's extremizer family reduce to a
//! pair of radial profiles `(S_par, S_perp)` with
//!
//! ```text
//! S_par' + 2 (S_par - S_perp) / r = 0        (equilibrium)
//! S_par(r_inner) = S_par(r_outer) = 0        (traction-free boundary)
//! ```
//!
//! The functional is parameterized by strip coordinates `(p, k)` with
//! `0 <= p <= 5`, `k >= 0`; the modes themselves depend on `p` only. The crate
//! solves the mode constants at `p = 0` with a damped Newton iteration,
//! continues them in `p` with a predictor-corrector scheme, and expands
//! candidate residual stress fields (thermoelastic, shrink-fit, or sampled
//! from CSV) in the resulting orthonormal basis.
//!
//! Module layout:
//! - [`fields`]: radial profiles, stress fields and their pointwise calculus
//! - [`quadrature`]: adaptive Gauss-Legendre integrals, inner products, energy
//! - [`basis`]: mode constants, Newton solve at `p = 0`, continuation in `p`
//! - [`candidates`]: benchmark stress fields and CSV ingestion
//! - [`fitting`]: expansion coefficients, error curves, decay slopes

pub mod basis;
pub mod candidates;
pub mod fields;
pub mod fitting;
pub mod quadrature;

mod linalg;
