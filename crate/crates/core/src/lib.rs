//! Exact q-combinatorics and samplers for q-exchangeable laws on words.
//!
//! The crate covers Mallows measures on permutations, the q-shuffle measures
//! `P^(v)` on infinite words, the q-Pascal pyramid with its Martin kernel and
//! Gibbs-harmonic functions, decreasing flags over finite fields, and the
//! quantile construction that sends `P^(v)` marginals towards product laws.
//!
//! All probabilities used in identity checks are exact rationals
//! ([`ExactScalar`]); floats appear only in Monte-Carlo and limit studies.
//!
//! ```
//! use qshuffle_core::{pyramid, LatticeVertex, QParam};
//!
//! let q = QParam::parse("1/2").unwrap();
//! let lambda: LatticeVertex = "2,2".parse().unwrap();
//! assert_eq!(pyramid::dim_vertex(&lambda, &q).to_string(), "35/16");
//! ```

#![allow(clippy::result_large_err)]

pub mod error;
mod fenwick;
pub mod flags;
pub mod geometric;
pub mod harness;
pub mod mallows;
pub mod pvmeasure;
pub mod pyramid;
pub mod qkernel;
pub mod quantize;
pub mod words;

pub use error::{Error, Result};
pub use flags::{FlagChain, GaloisField, Subspace};
pub use mallows::Permutation;
pub use pvmeasure::{Backend, MonomialMatrix, PvSampler};
pub use pyramid::{HarmonicFunction, LatticeVertex};
pub use qkernel::{ExactScalar, Mode, Multiplicity, QParam};
pub use quantize::QuantileSpec;
pub use words::{FiniteWord, HeightFunction, InversionFreeWord, Letter, Tail};
