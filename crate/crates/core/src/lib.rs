//! Numerical laboratory for almost-Fuchsian geometry.
//!
//! The crate builds discrete models of closed hyperbolic surfaces sitting as
//! minimal surfaces inside hyperbolic 3-manifolds, sweeps out the parallel
//! (equidistant) foliation on either side, and measures the quasiconformal
//! data of the leaves: principal curvatures, complex dilatations, and the
//! resulting distance bounds between the two conformal ends. A separate
//! module realizes convex surfaces in the ball model from boundary support
//! functions, and another verifies the second variation of the area
//! functional against the natural Hermitian pairing of quadratic
//! differentials.
//!
//! Everything is deterministic: fixed seeds, sequential reductions, and
//! compensated summation, so identical inputs reproduce identical bytes.

pub mod commands;
pub mod config;
pub mod epstein;
pub mod foliation;
pub mod gauss;
pub mod moebius;
pub mod numeric;
pub mod sparse;
pub mod surface;
pub mod wp;
