//! Multiscale finite elements for Schrödinger-type eigenvalue problems with
//! random potentials, with POD-compressed bases and quasi-Monte Carlo sampling.

pub mod assembly;
pub mod eigen;
pub mod lattice;
pub mod error;
pub mod local;
pub mod mesh;
pub mod msfem;
pub mod pod;
pub mod potential;
pub mod sparse;
pub mod uq;

pub use error::{Error, Result};
