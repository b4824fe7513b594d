//! Dimension theory for model expanding systems and their symbolic horseshoes.
//!
//! The crate computes singular-value potentials of the derivative cocycle,
//! sub-additive topological pressure (separated-set estimates and exact SFT
//! values), measure-theoretic pressure, Lyapunov and Carathéodory singular
//! dimensions, box-counting and local dimensions, and the dimension of
//! horseshoes extracted from measure-typical blocks.
//!
//! Everything is built on [`systems::ModelSystem`], a small family of
//! piecewise-affine (plus one perturbed circle map) systems with exact
//! Markov codings.

pub mod catalog;
pub mod cocycle;
pub mod dimension;
pub mod error;
pub mod horseshoe;
pub mod measure;
pub mod numeric;
pub mod pressure;
pub mod systems;
pub mod verify;

pub use error::{Error, Result};
pub use measure::{ErgodicMeasure, MeasureSpec};
pub use systems::{ModelSystem, Point, SymbolicCoding, SystemSpec};
