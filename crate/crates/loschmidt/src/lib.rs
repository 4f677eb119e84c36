//! Decoherence of a central system as Loschmidt-echo fidelity decay of its
//! environment.
//!
//! Three model families realize the same identity: a dephasing coupling whose
//! branch coherences are environment echo amplitudes, a bilinear
//! oscillator-bath model whose cat-state coherence follows from classical
//! label trajectories, and a short-time factorization for generic couplings.
//! Each dynamical route is paired with an independent brute-force oracle.

pub mod config;
pub mod dephasing;
pub mod ensemble;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod oscillator;
pub mod shorttime;
pub mod tol;

pub use error::{Error, Result};

/// Complex double throughout.
pub type C64 = num_complex::Complex64;
