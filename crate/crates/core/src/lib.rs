//! Symmetrically thermalizing unitaries (STUs) for two identical thermal
//! qudits.
//!
//! An STU maps `τ(β) ⊗ τ(β)` to a state whose two marginals are both
//! `τ(β′)` with `β′ <= β`. The crate builds such unitaries explicitly as
//! direct sums of real orthogonal blocks on the locally classical subspaces
//! `|j, j+i⟩`, verifies them at machine precision, and computes the
//! correlation/energy trade-off they saturate.

pub mod block_unitary;
pub mod bounds;
pub mod copies;
pub mod error;
pub mod lcs;
pub mod lemmas;
pub mod lp;
pub mod majorize;
pub mod oracle;
pub mod spectra;
pub mod stu_majorised;
pub mod stu_geometric;
pub mod stu_norm;

pub use error::{Error, Result};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod book_introduction {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/spectra.md")]
mod book_spectra {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/decomposition.md")]
mod book_decomposition {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/majorisation.md")]
mod book_majorisation {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/constructions.md")]
mod book_constructions {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/geometry.md")]
mod book_geometry {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/bounds.md")]
mod book_bounds {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/copies.md")]
mod book_copies {}
#[cfg(doctest)]
#[doc = include_str!("../../../book/src/verification.md")]
mod book_verification {}
