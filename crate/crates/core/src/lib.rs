//! Design of linear-optical heralding circuits in full Fock space.
//!
//! The library works with the `N_st x N_st` unitary acting on the n-photon
//! sector of `N` optical modes as the primary design variable. Unit heralding
//! fidelity is enforced exactly through a constraint-preserving manifold
//! update, while realizability by a passive interferometer is driven to zero
//! through an optical-residual least-squares problem. Once a unitary is both
//! exactly heralding and optically feasible, the underlying `N x N` scattering
//! matrix is extracted and can be decomposed into a rectangular mesh of
//! two-mode splitters and phase shifters.
//!
//! Module map:
//! - [`fock`]: occupation-number bases, ladder operators, Fock-space lifts of
//!   scattering matrices and a permanent-based amplitude oracle.
//! - [`herald`]: heralding problems, the unit-fidelity constraint set, its
//!   tangent projector and the constraint-preserving update.
//! - [`feasibility`]: the gamma-operator basis, optical residuals,
//!   Gauss-Newton pieces and scattering-matrix extraction.
//! - [`solver`]: the two-step (normal/tangent) constrained optimizer, the
//!   multistart driver and the direct `P*F^p` baseline.
//! - [`circuits`]: the closed-form six-mode Bell ansatz and Clements-style
//!   mesh decomposition.

pub mod circuits;
pub mod error;
pub mod feasibility;
pub mod fock;
pub mod herald;
pub mod io;
pub mod linalg;
pub mod solver;

pub use error::CoreError;

/// Complex double, the scalar type used throughout.
pub type C64 = num_complex::Complex<f64>;
