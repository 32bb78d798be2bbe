//! Lowest-order edge finite elements for the time-harmonic Maxwell problem,
//! with estimators for the constants governing quasi-optimality of the
//! Galerkin solution.

pub mod assembly;
pub mod elements;
pub mod factors;
pub mod mesh;
pub mod operators;
pub mod solvers;
pub mod sparse;
pub mod studies;
pub mod vtk;
