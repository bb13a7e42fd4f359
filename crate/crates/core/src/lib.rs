//! Affinely-rigid body dynamics.
//!
//! The configuration of the body is an orientation-preserving linear map φ
//! together with a centre-of-mass position x. The modules cover the kinematics
//! of that configuration space, kinetic-energy models invariant under spatial
//! and/or material affine transformations, their Poisson structure, full and
//! reduced equations of motion, closed-form geodesic families and boundedness
//! classification.

pub mod dynamics;
pub mod error;
pub mod geodesics;
pub mod kinematics;
pub mod lattice;
pub mod linalg;

pub use error::{Error, Result};
pub mod models;
pub mod poisson;
pub mod sampling;
