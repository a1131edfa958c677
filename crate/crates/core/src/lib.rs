//! Numerics for the 2D Landau Hamiltonian perturbed by radially symmetric
//! step potentials.
//!
//! The operator splits into angular-momentum sectors. Each sector is solved
//! in its unperturbed Landau eigenbasis, eigenvalues near a Landau level are
//! tracked to full double precision, and two uses are built on top:
//! splitting evidence for sign-definite perturbations ([`splitting`]) and
//! a Newton solver that keeps chosen sectors exactly on a Landau level with a
//! sign-changing annular potential ([`pinning`]).

pub mod cli;
pub mod error;
pub mod landau_basis;
pub mod perturbation;
pub mod pinning;
pub mod quadrature;
pub mod radial_potential;
pub mod report;
pub mod sector_solver;
mod shooting;
pub mod specfun;
pub mod splitting;

pub use error::{Error, Result};
pub use landau_basis::{FieldParams, SectorIndex};
pub use radial_potential::{Annulus, ConstructionParams, CouplingVector, StepPotential};
pub use sector_solver::{SectorEigenvalue, SectorModel};
pub use specfun::{LogWeight, PolySeries};
