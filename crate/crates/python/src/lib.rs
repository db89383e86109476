//! Python bindings: embedding records, component bases, the removal
//! operations, retrieval evaluation, file I/O and the synthetic generator.
//!
//! Matrices cross the boundary as lists of rows.

use std::collections::{BTreeMap, BTreeSet};

use lir_core::eval;
use lir_core::io;
use lir_core::lir::{self as removal, FitOptions, LanguageCheck};
use lir_core::synth::{self, LabelRule, SynthConfig};
use lir_core::{linalg, Error, Matrix, RemovalMode};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(lir, LirError, PyValueError, "Invalid input, configuration or file.");
create_exception!(lir, NumericalError, PyRuntimeError, "The SVD did not converge.");

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        LirError::new_err(e.to_string())
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for lir_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<Matrix> {
    Matrix::from_rows(&rows).py()
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(<[f64]>::to_vec).collect()
}

fn mode(name: &str) -> PyResult<RemovalMode> {
    name.parse().py()
}

/// One embedding vector with its id and language code.
#[pyclass(name = "EmbeddingRecord", module = "lir", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyRecord(lir_core::EmbeddingRecord);

#[pymethods]
impl PyRecord {
    #[new]
    fn new(id: String, lang: &str, vec: Vec<f64>) -> PyResult<Self> {
        lir_core::EmbeddingRecord::new(id, lang, vec).py().map(PyRecord)
    }

    #[getter]
    fn id(&self) -> &str {
        self.0.id()
    }

    #[getter]
    fn lang(&self) -> &str {
        self.0.lang()
    }

    #[getter]
    fn vec(&self) -> Vec<f64> {
        self.0.vec().to_vec()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddingRecord(id={:?}, lang={:?}, dim={})",
            self.0.id(),
            self.0.lang(),
            self.0.dim()
        )
    }
}

/// Orthonormal identity components for one language (columns of a d×r matrix).
#[pyclass(name = "ComponentBasis", module = "lir", frozen, eq, from_py_object)]
#[derive(Clone, PartialEq)]
struct PyBasis(lir_core::ComponentBasis);

#[pymethods]
impl PyBasis {
    #[new]
    #[pyo3(signature = (lang, basis, source_fingerprint = String::new(), sample_count = 0))]
    fn new(lang: &str, basis: Vec<Vec<f64>>, source_fingerprint: String, sample_count: usize) -> PyResult<Self> {
        lir_core::ComponentBasis::new(lang, matrix(basis)?, source_fingerprint, sample_count)
            .py()
            .map(PyBasis)
    }

    #[getter]
    fn lang(&self) -> &str {
        self.0.lang()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn rank(&self) -> usize {
        self.0.rank()
    }

    #[getter]
    fn source_fingerprint(&self) -> &str {
        self.0.source_fingerprint()
    }

    #[getter]
    fn sample_count(&self) -> usize {
        self.0.sample_count()
    }

    /// The basis as a list of d rows of length r.
    fn matrix(&self) -> Vec<Vec<f64>> {
        rows(self.0.basis())
    }

    fn column(&self, j: usize) -> PyResult<Vec<f64>> {
        if j >= self.0.rank() {
            return Err(LirError::new_err(format!(
                "column {j} out of range for rank {}",
                self.0.rank()
            )));
        }
        Ok(self.0.column(j))
    }

    fn __repr__(&self) -> String {
        format!(
            "ComponentBasis(lang={:?}, dim={}, rank={})",
            self.0.lang(),
            self.0.dim(),
            self.0.rank()
        )
    }
}

fn record_set(records: Vec<PyRecord>) -> PyResult<lir_core::EmbeddingSet> {
    lir_core::EmbeddingSet::new(records.into_iter().map(|r| r.0).collect()).py()
}

fn wrap_records(set: &lir_core::EmbeddingSet) -> Vec<PyRecord> {
    set.iter().cloned().map(PyRecord).collect()
}

fn unwrap_bases(bases: BTreeMap<String, PyBasis>) -> BTreeMap<String, lir_core::ComponentBasis> {
    bases.into_iter().map(|(k, v)| (k, v.0)).collect()
}

type Rows = Vec<Vec<f64>>;

/// Thin SVD: returns (U, sigma, V) with sigma descending.
#[pyfunction]
fn svd(m: Rows) -> PyResult<(Rows, Vec<f64>, Rows)> {
    let f = linalg::svd(&matrix(m)?).py()?;
    Ok((rows(&f.u), f.sigma, rows(&f.v)))
}

/// v - B Bᵀ v.
#[pyfunction]
fn project_out(v: Vec<f64>, basis: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    linalg::project_out(&v, &matrix(basis)?).py()
}

/// v - B Bᵀ v / ‖v‖.
#[pyfunction]
fn project_out_paper(v: Vec<f64>, basis: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    linalg::project_out_paper(&v, &matrix(basis)?).py()
}

/// Centred PCA scores on the top `k` components.
#[pyfunction]
fn pca_project(m: Vec<Vec<f64>>, k: usize) -> PyResult<Vec<Vec<f64>>> {
    linalg::pca_project(&matrix(m)?, k).py().map(|s| rows(&s))
}

/// Fits a rank-`rank` basis from records that all share one language.
#[pyfunction]
#[pyo3(signature = (records, rank, center = false, normalize = false))]
fn fit_components(records: Vec<PyRecord>, rank: usize, center: bool, normalize: bool) -> PyResult<PyBasis> {
    let recs: Vec<_> = records.into_iter().map(|r| r.0).collect();
    let m = lir_core::LanguageMatrix::from_records(&recs).py()?;
    removal::fit_components_with(&m, rank, FitOptions { center, normalize })
        .py()
        .map(PyBasis)
}

/// Fits one basis per language present in `records`.
#[pyfunction]
#[pyo3(signature = (records, rank, center = false, normalize = false))]
fn fit_all(records: Vec<PyRecord>, rank: usize, center: bool, normalize: bool) -> PyResult<BTreeMap<String, PyBasis>> {
    let set = record_set(records)?;
    let bases = removal::fit_all(&set, rank, FitOptions { center, normalize }).py()?;
    Ok(bases.into_iter().map(|(k, v)| (k, PyBasis(v))).collect())
}

#[pyfunction]
#[pyo3(signature = (record, basis, mode = "orthogonal", check_language = true))]
fn remove(record: PyRecord, basis: PyBasis, mode: &str, check_language: bool) -> PyResult<PyRecord> {
    let check = if check_language {
        LanguageCheck::Enforce
    } else {
        LanguageCheck::Skip
    };
    removal::remove(&record.0, &basis.0, self::mode(mode)?, check)
        .py()
        .map(PyRecord)
}

/// Applies each record's language basis; returns (records, passed_through).
#[pyfunction]
#[pyo3(signature = (records, bases, mode = "orthogonal", strict = false))]
fn remove_batch(
    records: Vec<PyRecord>,
    bases: BTreeMap<String, PyBasis>,
    mode: &str,
    strict: bool,
) -> PyResult<(Vec<PyRecord>, BTreeMap<String, usize>)> {
    let set = record_set(records)?;
    let out = removal::remove_batch(&set, &unwrap_bases(bases), self::mode(mode)?, strict).py()?;
    Ok((wrap_records(&out.records), out.passed_through))
}

#[pyfunction]
fn average_precision(ranking: Vec<String>, relevant: BTreeSet<String>) -> PyResult<f64> {
    let ranked = eval::RankedList {
        query_id: String::new(),
        candidate_ids: ranking,
    };
    eval::average_precision(&ranked, &relevant).py()
}

/// Candidate ids ordered by descending cosine similarity to `query`.
#[pyfunction]
fn rank_candidates(query: PyRecord, candidates: Vec<PyRecord>) -> PyResult<Vec<String>> {
    let cands: Vec<_> = candidates.into_iter().map(|r| r.0).collect();
    eval::rank_candidates(&query.0, &cands).py().map(|r| r.candidate_ids)
}

/// Retrieval MAP; returns the report as a JSON string with sorted keys.
#[pyfunction]
#[pyo3(signature = (queries, candidates, qrels, bases = None, mode = "orthogonal"))]
fn evaluate_retrieval(
    queries: Vec<PyRecord>,
    candidates: Vec<PyRecord>,
    qrels: BTreeMap<String, BTreeSet<String>>,
    bases: Option<BTreeMap<String, PyBasis>>,
    mode: &str,
) -> PyResult<String> {
    let ds = lir_core::RetrievalDataset::new(record_set(queries)?, record_set(candidates)?, qrels).py()?;
    let bases = bases.map(unwrap_bases);
    let report = eval::evaluate_retrieval(&ds, bases.as_ref(), self::mode(mode)?).py()?;
    io::to_sorted_json(&report).py()
}

#[pyfunction]
fn read_embeddings(path: &str) -> PyResult<Vec<PyRecord>> {
    io::load_embeddings(path).py().map(|s| wrap_records(&s))
}

/// Writes JSONL for a `.jsonl` path, LIRE otherwise.
#[pyfunction]
fn write_embeddings(path: &str, records: Vec<PyRecord>) -> PyResult<()> {
    io::save_embeddings(path, &record_set(records)?).py()
}

#[pyfunction]
fn read_components(path: &str) -> PyResult<PyBasis> {
    io::read_components(path).py().map(PyBasis)
}

#[pyfunction]
fn write_components(path: &str, basis: PyBasis) -> PyResult<()> {
    io::write_components(path, &basis.0, None).py()
}

/// Seeded synthetic corpus. Returns a dict with `records`, `queries`,
/// `candidates`, `qrels`, `ground_truth` and (with a label margin) `labels`.
#[pyfunction]
#[pyo3(signature = (
    seed, languages = 4, topics = 50, per_topic_per_lang = 25, dim = 64,
    bias = 5.0, semantic = 1.0, noise = 0.1, skew = 0.0, label_margin = None,
))]
#[allow(clippy::too_many_arguments)]
fn generate<'py>(
    py: Python<'py>,
    seed: u64,
    languages: usize,
    topics: usize,
    per_topic_per_lang: usize,
    dim: usize,
    bias: f64,
    semantic: f64,
    noise: f64,
    skew: f64,
    label_margin: Option<f64>,
) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let cfg = SynthConfig {
        languages: synth::language_codes(languages),
        topics,
        per_topic_per_lang,
        dim,
        bias_scale: bias,
        semantic_scale: semantic,
        noise_scale: noise,
        seed,
        label_rule: label_margin.map(|margin| LabelRule { margin }),
        skew,
    };
    let out = synth::generate(&cfg).py()?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("records", wrap_records(&out.records))?;
    d.set_item("queries", wrap_records(&out.queries))?;
    d.set_item("candidates", wrap_records(&out.candidates))?;
    d.set_item("qrels", out.qrels)?;
    d.set_item("ground_truth", out.ground_truth)?;
    if let Some(labels) = out.labels {
        d.set_item("labels", labels)?;
    }
    Ok(d)
}

#[pymodule]
fn lir(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LirError", m.py().get_type::<LirError>())?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyBasis>()?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(project_out, m)?)?;
    m.add_function(wrap_pyfunction!(project_out_paper, m)?)?;
    m.add_function(wrap_pyfunction!(pca_project, m)?)?;
    m.add_function(wrap_pyfunction!(fit_components, m)?)?;
    m.add_function(wrap_pyfunction!(fit_all, m)?)?;
    m.add_function(wrap_pyfunction!(remove, m)?)?;
    m.add_function(wrap_pyfunction!(remove_batch, m)?)?;
    m.add_function(wrap_pyfunction!(average_precision, m)?)?;
    m.add_function(wrap_pyfunction!(rank_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_retrieval, m)?)?;
    m.add_function(wrap_pyfunction!(read_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(write_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(read_components, m)?)?;
    m.add_function(wrap_pyfunction!(write_components, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    Ok(())
}
