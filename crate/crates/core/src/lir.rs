//! Language identity removal: fit the top right singular vectors of a
//! language matrix and project them out of that language's embeddings.
//!
//! Component estimates stabilise with sample size; around 10,000 rows per
//! language is a good target for real encoders, though any `n >= r` works.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint;
use crate::linalg::{self, Matrix};
use crate::types::{ComponentBasis, EmbeddingRecord, EmbeddingSet, LanguageMatrix};

/// How the fitted components are subtracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RemovalMode {
    /// `e - C·Cᵀ·e`: standard orthogonal projection. Idempotent.
    #[default]
    Orthogonal,
    /// `e - C·Cᵀ·e / ‖e‖₂`, the formula with its norm denominator taken
    /// literally. Matches `Orthogonal` on unit vectors only.
    PaperEq1,
}

impl RemovalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RemovalMode::Orthogonal => "orthogonal",
            RemovalMode::PaperEq1 => "paper-eq1",
        }
    }
}

impl fmt::Display for RemovalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RemovalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orthogonal" => Ok(RemovalMode::Orthogonal),
            "paper-eq1" => Ok(RemovalMode::PaperEq1),
            other => Err(Error::Config(format!(
                "unknown removal mode {other:?} (expected orthogonal or paper-eq1)"
            ))),
        }
    }
}

/// Preprocessing applied to the language matrix before the SVD.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FitOptions {
    /// Subtract column means first. Off by default: the uncentered matrix
    /// keeps the language centroid as a principal direction.
    pub center: bool,
    /// Scale rows to unit length first.
    pub normalize: bool,
}

/// Top-`rank` right singular vectors of the raw language matrix.
pub fn fit_components(m: &LanguageMatrix, rank: usize) -> Result<ComponentBasis> {
    fit_components_with(m, rank, FitOptions::default())
}

pub fn fit_components_with(m: &LanguageMatrix, rank: usize, opts: FitOptions) -> Result<ComponentBasis> {
    let max = m.n().min(m.d());
    if rank > max {
        return Err(Error::Rank { requested: rank, max });
    }
    if rank == 0 {
        let source = fingerprint::matrix(m.lang(), m.matrix());
        return ComponentBasis::empty(m.lang(), m.d(), source, m.n());
    }
    fit_with_spectrum(m, rank, opts).map(|(b, _)| b)
}

/// Fits the basis and also returns every singular value of the
/// (preprocessed) language matrix.
pub fn fit_with_spectrum(m: &LanguageMatrix, rank: usize, opts: FitOptions) -> Result<(ComponentBasis, Vec<f64>)> {
    let max = m.n().min(m.d());
    if rank > max {
        return Err(Error::Rank { requested: rank, max });
    }
    let source = fingerprint::matrix(m.lang(), m.matrix());
    let mut data = m.matrix().clone();
    if opts.normalize {
        data = normalize_matrix_rows(&data);
    }
    if opts.center {
        data = linalg::center_columns(&data);
    }
    let (sigma, v) = linalg::svd_right(&data)?;
    let basis = ComponentBasis::new(m.lang(), v.leading_columns(rank), source, m.n())?;
    Ok((basis, sigma))
}

/// Whether `remove` insists the record and basis languages agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LanguageCheck {
    #[default]
    Enforce,
    /// Allow applying another language's basis, e.g. for ablations.
    Skip,
}

pub fn remove(
    e: &EmbeddingRecord,
    basis: &ComponentBasis,
    mode: RemovalMode,
    check: LanguageCheck,
) -> Result<EmbeddingRecord> {
    if check == LanguageCheck::Enforce && e.lang() != basis.lang() {
        return Err(Error::LanguageMismatch {
            record: e.lang().to_string(),
            basis: basis.lang().to_string(),
        });
    }
    let out = match mode {
        RemovalMode::Orthogonal => linalg::project_out(e.vec(), basis.basis())?,
        RemovalMode::PaperEq1 => linalg::project_out_paper(e.vec(), basis.basis())?,
    };
    e.with_vec(out)
}

/// Result of a per-language batch removal.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchRemoval {
    pub records: EmbeddingSet,
    /// Languages without a basis and how many of their records were passed
    /// through unchanged (non-strict mode only).
    pub passed_through: BTreeMap<String, usize>,
}

/// Applies each record's own language basis, preserving order. With
/// `strict`, a language without a basis is an error; otherwise its records
/// pass through untouched and are counted.
pub fn remove_batch(
    records: &EmbeddingSet,
    bases: &BTreeMap<String, ComponentBasis>,
    mode: RemovalMode,
    strict: bool,
) -> Result<BatchRemoval> {
    let mut passed_through = BTreeMap::new();
    for r in records {
        if !bases.contains_key(r.lang()) {
            if strict {
                return Err(Error::MissingBasis(r.lang().to_string()));
            }
            *passed_through.entry(r.lang().to_string()).or_insert(0) += 1;
        }
    }
    let out = records
        .records()
        .par_iter()
        .map(|r| match bases.get(r.lang()) {
            Some(b) => remove(r, b, mode, LanguageCheck::Enforce),
            None => Ok(r.clone()),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchRemoval {
        records: EmbeddingSet::new(out)?,
        passed_through,
    })
}

/// Fits one basis per language present in `records`.
pub fn fit_all(records: &EmbeddingSet, rank: usize, opts: FitOptions) -> Result<BTreeMap<String, ComponentBasis>> {
    records
        .language_matrices()?
        .into_iter()
        .map(|(lang, m)| fit_components_with(&m, rank, opts).map(|b| (lang, b)))
        .collect()
}

/// Scales every vector to unit length; zero vectors are left as they are.
pub fn normalize_records(records: &EmbeddingSet) -> Result<EmbeddingSet> {
    let out = records
        .iter()
        .map(|r| r.with_vec(unit(r.vec())))
        .collect::<Result<Vec<_>>>()?;
    EmbeddingSet::new(out)
}

fn unit(v: &[f64]) -> Vec<f64> {
    let len = linalg::norm(v);
    if len == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / len).collect()
    }
}

fn normalize_matrix_rows(m: &Matrix) -> Matrix {
    let data = m.row_iter().flat_map(unit).collect();
    Matrix::new(m.rows(), m.cols(), data).expect("unit rows stay finite")
}
