//! Domain types shared across the crate. All are immutable once built.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// One embedding vector with its id and language tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    id: String,
    lang: String,
    vec: Vec<f64>,
}

impl EmbeddingRecord {
    /// Language codes are trimmed but otherwise kept verbatim (case-sensitive).
    pub fn new(id: impl Into<String>, lang: impl AsRef<str>, vec: Vec<f64>) -> Result<Self> {
        let id = id.into();
        let lang = lang.as_ref().trim().to_string();
        if lang.is_empty() {
            return Err(Error::InvalidEmbedding(format!(
                "record {id:?} has an empty language code"
            )));
        }
        if vec.is_empty() {
            return Err(Error::InvalidEmbedding(format!("record {id:?} has an empty vector")));
        }
        if let Some(i) = vec.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidEmbedding(format!(
                "record {id:?} has a non-finite value at index {i}"
            )));
        }
        Ok(EmbeddingRecord { id, lang, vec })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn vec(&self) -> &[f64] {
        &self.vec
    }

    pub fn dim(&self) -> usize {
        self.vec.len()
    }

    /// Same id and language with a new vector of equal length.
    pub fn with_vec(&self, vec: Vec<f64>) -> Result<Self> {
        if vec.len() != self.vec.len() {
            return Err(Error::dimension(self.vec.len(), vec.len()));
        }
        EmbeddingRecord::new(self.id.clone(), &self.lang, vec)
    }
}

/// A validated collection: shared dimension, unique ids. May be empty.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingSet {
    records: Vec<EmbeddingRecord>,
    dim: usize,
}

impl EmbeddingSet {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let dim = records.first().map_or(0, EmbeddingRecord::dim);
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.dim() != dim {
                return Err(Error::dimension(dim, r.dim()));
            }
            if !seen.insert(r.id()) {
                return Err(Error::DuplicateId(r.id().to_string()));
            }
        }
        Ok(EmbeddingSet { records, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn iter(&self) -> std::slice::Iter<'_, EmbeddingRecord> {
        self.records.iter()
    }

    pub fn into_records(self) -> Vec<EmbeddingRecord> {
        self.records
    }

    pub fn get(&self, id: &str) -> Option<&EmbeddingRecord> {
        self.records.iter().find(|r| r.id() == id)
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.records.iter().map(EmbeddingRecord::id).collect()
    }

    pub fn languages(&self) -> BTreeSet<&str> {
        self.records.iter().map(EmbeddingRecord::lang).collect()
    }

    /// Merges several sets, re-validating dimensions and id uniqueness.
    pub fn concat<I: IntoIterator<Item = EmbeddingSet>>(sets: I) -> Result<Self> {
        EmbeddingSet::new(sets.into_iter().flat_map(|s| s.records).collect())
    }

    /// Records of one language, in input order.
    pub fn filter_language(&self, lang: &str) -> EmbeddingSet {
        let records: Vec<_> = self.records.iter().filter(|r| r.lang() == lang).cloned().collect();
        let dim = if records.is_empty() { 0 } else { self.dim };
        EmbeddingSet { records, dim }
    }

    /// One language matrix per language tag.
    pub fn language_matrices(&self) -> Result<BTreeMap<String, LanguageMatrix>> {
        self.languages()
            .into_iter()
            .map(|lang| {
                let subset = self.filter_language(lang);
                LanguageMatrix::from_records(subset.records()).map(|m| (lang.to_string(), m))
            })
            .collect()
    }

    /// Row-major matrix of all vectors, in record order.
    pub fn to_matrix(&self) -> Matrix {
        let data = self.records.iter().flat_map(|r| r.vec.iter().copied()).collect();
        Matrix::from_raw(self.records.len(), self.dim, data)
    }
}

impl<'a> IntoIterator for &'a EmbeddingSet {
    type Item = &'a EmbeddingRecord;
    type IntoIter = std::slice::Iter<'a, EmbeddingRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// n×d matrix of embeddings from a single language; row i is phrase i.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageMatrix {
    lang: String,
    ids: Vec<String>,
    rows: Matrix,
}

impl LanguageMatrix {
    pub fn new(lang: impl AsRef<str>, ids: Vec<String>, rows: Matrix) -> Result<Self> {
        let lang = lang.as_ref().trim().to_string();
        if lang.is_empty() {
            return Err(Error::InvalidEmbedding("empty language code".into()));
        }
        if rows.rows() == 0 || rows.cols() == 0 {
            return Err(Error::InvalidMatrix(format!(
                "language matrix must be non-empty, got {}x{}",
                rows.rows(),
                rows.cols()
            )));
        }
        if ids.len() != rows.rows() {
            return Err(Error::dimension(rows.rows(), ids.len()));
        }
        Ok(LanguageMatrix { lang, ids, rows })
    }

    pub fn from_records(records: &[EmbeddingRecord]) -> Result<Self> {
        let first = records
            .first()
            .ok_or_else(|| Error::InvalidMatrix("language matrix needs at least one row".into()))?;
        let d = first.dim();
        let mut data = Vec::with_capacity(records.len() * d);
        let mut ids = Vec::with_capacity(records.len());
        for r in records {
            if r.lang() != first.lang() {
                return Err(Error::Dataset(format!(
                    "language matrix mixes {:?} and {:?}",
                    first.lang(),
                    r.lang()
                )));
            }
            if r.dim() != d {
                return Err(Error::dimension(d, r.dim()));
            }
            data.extend_from_slice(r.vec());
            ids.push(r.id().to_string());
        }
        LanguageMatrix::new(first.lang(), ids, Matrix::from_raw(records.len(), d, data))
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rows
    }

    pub fn n(&self) -> usize {
        self.rows.rows()
    }

    pub fn d(&self) -> usize {
        self.rows.cols()
    }
}

/// Orthonormality slack allowed on a component basis.
pub const BASIS_TOLERANCE: f64 = 1e-6;

/// d×r matrix of orthonormal language-identity directions for one language.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentBasis {
    lang: String,
    basis: Matrix,
    source_fingerprint: String,
    sample_count: usize,
}

impl ComponentBasis {
    pub fn new(
        lang: impl AsRef<str>,
        basis: Matrix,
        source_fingerprint: impl Into<String>,
        sample_count: usize,
    ) -> Result<Self> {
        let lang = lang.as_ref().trim().to_string();
        if lang.is_empty() {
            return Err(Error::InvalidEmbedding("empty language code".into()));
        }
        if basis.rows() == 0 {
            return Err(Error::InvalidMatrix("component basis needs dimension >= 1".into()));
        }
        let deviation = basis.orthonormality_error();
        if deviation > BASIS_TOLERANCE {
            return Err(Error::CorruptBasis { deviation });
        }
        Ok(ComponentBasis {
            lang,
            basis,
            source_fingerprint: source_fingerprint.into(),
            sample_count,
        })
    }

    /// Rank-0 basis: removal with it is the identity.
    pub fn empty(
        lang: impl AsRef<str>,
        dim: usize,
        source_fingerprint: impl Into<String>,
        sample_count: usize,
    ) -> Result<Self> {
        ComponentBasis::new(lang, Matrix::zeros(dim, 0), source_fingerprint, sample_count)
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.rows()
    }

    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.basis.column(j)
    }

    pub fn source_fingerprint(&self) -> &str {
        &self.source_fingerprint
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }
}

/// Queries, candidates and relevance judgments for MAP evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalDataset {
    queries: EmbeddingSet,
    candidates: EmbeddingSet,
    qrels: BTreeMap<String, BTreeSet<String>>,
}

impl RetrievalDataset {
    pub fn new(
        queries: EmbeddingSet,
        candidates: EmbeddingSet,
        qrels: BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Self> {
        if !queries.is_empty() && !candidates.is_empty() && queries.dim() != candidates.dim() {
            return Err(Error::dimension(queries.dim(), candidates.dim()));
        }
        let query_ids = queries.ids();
        let candidate_ids = candidates.ids();
        for (q, relevant) in &qrels {
            if !query_ids.contains(q.as_str()) {
                return Err(Error::UnknownId(q.clone()));
            }
            if let Some(missing) = relevant.iter().find(|id| !candidate_ids.contains(id.as_str())) {
                return Err(Error::UnknownId(missing.clone()));
            }
        }
        for q in &queries {
            if qrels.get(q.id()).is_none_or(BTreeSet::is_empty) {
                return Err(Error::NoRelevant(q.id().to_string()));
            }
        }
        Ok(RetrievalDataset {
            queries,
            candidates,
            qrels,
        })
    }

    pub fn queries(&self) -> &EmbeddingSet {
        &self.queries
    }

    pub fn candidates(&self) -> &EmbeddingSet {
        &self.candidates
    }

    pub fn qrels(&self) -> &BTreeMap<String, BTreeSet<String>> {
        &self.qrels
    }

    pub fn relevant(&self, query_id: &str) -> Option<&BTreeSet<String>> {
        self.qrels.get(query_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, lang: &str, v: &[f64]) -> EmbeddingRecord {
        EmbeddingRecord::new(id, lang, v.to_vec()).unwrap()
    }

    #[test]
    fn record_validation() {
        assert!(EmbeddingRecord::new("a", "en", vec![f64::INFINITY]).is_err());
        assert!(EmbeddingRecord::new("a", "en", vec![]).is_err());
        assert!(EmbeddingRecord::new("a", "  ", vec![1.0]).is_err());
        assert_eq!(rec("a", " zh ", &[1.0]).lang(), "zh");
        assert_eq!(rec("a", "EN", &[1.0]).lang(), "EN");
    }

    #[test]
    fn set_rejects_mixed_dims_and_duplicates() {
        let err = EmbeddingSet::new(vec![rec("a", "en", &[1.0, 2.0]), rec("b", "en", &[1.0])]);
        assert!(matches!(
            err,
            Err(Error::Dimension {
                expected: 2,
                found: 1,
                ..
            })
        ));
        let err = EmbeddingSet::new(vec![rec("a", "en", &[1.0]), rec("a", "zh", &[2.0])]);
        assert!(matches!(err, Err(Error::DuplicateId(id)) if id == "a"));
        assert!(EmbeddingSet::new(vec![]).unwrap().is_empty());
    }

    #[test]
    fn language_matrix_requires_single_language() {
        let rs = [rec("a", "en", &[1.0]), rec("b", "zh", &[1.0])];
        assert!(LanguageMatrix::from_records(&rs).is_err());
        assert!(LanguageMatrix::from_records(&[]).is_err());
        let set = EmbeddingSet::new(rs.to_vec()).unwrap();
        let ms = set.language_matrices().unwrap();
        assert_eq!(ms.keys().collect::<Vec<_>>(), ["en", "zh"]);
    }

    #[test]
    fn basis_must_be_orthonormal() {
        let m = Matrix::from_rows(&[[2.0], [0.0]]).unwrap();
        assert!(matches!(
            ComponentBasis::new("en", m, "", 1),
            Err(Error::CorruptBasis { .. })
        ));
        let b = ComponentBasis::empty("en", 3, "", 0).unwrap();
        assert_eq!((b.dim(), b.rank()), (3, 0));
    }

    #[test]
    fn dataset_checks_qrels() {
        let q = EmbeddingSet::new(vec![rec("q", "en", &[1.0])]).unwrap();
        let c = EmbeddingSet::new(vec![rec("c", "zh", &[1.0])]).unwrap();
        let qrels = |ids: &[&str]| BTreeMap::from([("q".to_string(), ids.iter().map(|s| s.to_string()).collect())]);
        assert!(RetrievalDataset::new(q.clone(), c.clone(), qrels(&["c"])).is_ok());
        assert!(matches!(
            RetrievalDataset::new(q.clone(), c.clone(), qrels(&["nope"])),
            Err(Error::UnknownId(_))
        ));
        assert!(matches!(
            RetrievalDataset::new(q, c, qrels(&[])),
            Err(Error::NoRelevant(_))
        ));
    }
}
