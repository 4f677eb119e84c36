//! Numerical tolerance tiers used across the crate.
//!
//! Three tiers, loosest wins when routes of different quality are compared:
//! construction-level checks sit at machine-roundoff scale, dynamical
//! identities allow eigensolver drift over a time grid, and anything limited
//! by a physical truncation (Fock cutoffs, integrator steps) gets the loose
//! tier.

/// Construction-level checks: Hermiticity, state norms, basis orthonormality.
pub const CONSTRUCTION: f64 = 1e-12;

/// Dynamical identities compared between two exact evolution routes.
pub const IDENTITY: f64 = 1e-10;

/// Truncation-limited comparisons (Fock cutoffs, step-limited integrators).
pub const TRUNCATION: f64 = 1e-6;

/// Unitarity deviation allowed for a propagator, `max |U†U - 1|`.
pub const UNITARITY: f64 = 1e-10;

/// Relative excitation-number drift allowed for the classical bilinear flow.
pub const FLOW_DRIFT: f64 = 1e-6;

/// Default cap on joint Hilbert-space dimension; guards accidental blowups.
pub const DIM_CAP: usize = 4096;
