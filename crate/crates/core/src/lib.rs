//! Ramanujan Schreier graph towers over `PGL2(Z/q^n)` built from quaternion
//! generators, with the verification machinery (coverings, girth, spectra)
//! needed to check them.

pub mod error;
pub mod format;
pub mod modarith;
pub mod multigraph;
pub mod projgroup;
pub mod quat;
pub mod spectra;
pub mod tower;

pub use error::{Error, Result};
pub use modarith::PrimePower;
pub use multigraph::{CoveringVerdict, Edge, Girth, GraphMorphism, SerreGraph};
pub use projgroup::{PairCoset, ProjMatrix, ProjPoint, ResidueMatrix};
pub use quat::{FreeWord, GeneratorSet, Quaternion, Splitting};
pub use spectra::{EigenMethod, SpectralReport};
pub use tower::{Mode, Tower, TowerConfig, TowerLevel, TowerOptions, Variant};
