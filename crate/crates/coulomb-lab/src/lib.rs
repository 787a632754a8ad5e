//! Lie-algebra-valued exterior calculus on a periodic slab with conductor
//! boundary conditions: Green operators, Coulomb gauge fixing, Coulomb
//! curvature, the boundary operator `T_A`, bracket-span constructions and
//! small-loop holonomy.
//!
//! The domain is `T² × [0, 1]` with a normal-adapted metric. Fields are
//! collocated at grid nodes and stored as real coefficients in a basis of the
//! Lie algebra (see [`lie::Algebra`]).

pub mod bundle;
pub mod cli;
pub mod config;
pub mod error;
pub mod forms;
pub mod geometry;
pub mod holonomy;
pub mod io;
pub mod lie;
pub mod report;
pub mod solver;
pub mod span;
pub mod study;
pub mod suites;

pub use error::{Error, Result};
