//! Two-box structures of irreducible planar algebras.
//!
//! A two-box structure is a finite-dimensional complex *-algebra carrying two
//! multiplications (the product and the one-string coproduct), a Markov trace,
//! a contragredient rotation and a loop value `delta`. This crate models such
//! structures concretely by their structure constants, verifies the axioms
//! numerically, constructs the standard examples (Temperley-Lieb, group
//! subfactors and their Fourier duals, the odd dihedral subgroup family, free
//! and tensor products), analyses positivity (Schur products, biprojections,
//! virtual normalizers), and classifies the four-dimensional exchange-type
//! structures.

pub mod axioms;
pub mod blocks;
pub mod catalog;
pub mod classify;
pub mod cli;
pub mod io;
pub mod linalg;
pub mod positivity;
pub mod rng;
pub mod structure;

pub use axioms::{verify_axioms, AxiomCheck, AxiomReport};
pub use blocks::{block_decomposition, rank, BlockDecomposition};
pub use linalg::{Mat, Tolerance, C64};
pub use structure::{Element, Structure, StructureError, TwoBoxStructure};
