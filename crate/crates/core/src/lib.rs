//! Language identity removal for multilingual sentence embeddings.
//!
//! Embeddings from one language share a few dominant directions that encode
//! *which language* a sentence is in rather than what it means. This crate
//! finds those directions as the top right singular vectors of a
//! per-language embedding matrix ([`lir::fit_components`]) and projects
//! them out ([`lir::remove`], [`lir::remove_batch`]).
//!
//! Around that core sit the pieces needed to check the effect:
//! retrieval MAP, zero-shot transfer classification and PCA export in
//! [`eval`], a seeded synthetic generator in [`synth`], and the on-disk
//! formats in [`io`].

pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod io;
pub mod linalg;
pub mod lir;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use linalg::{Matrix, SvdResult};
pub use lir::{FitOptions, LanguageCheck, RemovalMode};
pub use types::{ComponentBasis, EmbeddingRecord, EmbeddingSet, LanguageMatrix, RetrievalDataset};
