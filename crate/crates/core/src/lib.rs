//! Multiphase biofilm growth in a slow sand filter.
//!
//! The model couples a P0 upwind discontinuous Galerkin transport of biomass
//! and substrate concentrations, a Cahn-Hilliard chemical potential on P1,
//! a P2/P0 Stokes flow and a stoichiometric reaction step.

pub mod error;
pub mod fields;
pub mod io;
pub mod mesh;
pub mod physics;
pub mod potential;
pub mod quadrature;
pub mod reactions;
pub mod scenarios;
pub mod sparse;
pub mod stepper;
pub mod stokes;
pub mod transport;

pub use error::{Error, Result};
