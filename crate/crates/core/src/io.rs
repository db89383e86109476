//! File formats.
//!
//! Binary embedding (`LIRE`) and component (`LIRC`) files share a layout:
//!
//! ```text
//! magic      4 bytes   "LIRE" | "LIRC"
//! version    u8        1
//! header_len u32 LE
//! header     UTF-8 JSON, keys in sorted order
//! payload
//! ```
//!
//! The LIRE payload is `count` records of `u16 LE id length, id bytes,
//! dim × f32 LE`. The LIRC payload is `dim × rank` f32 LE values, column
//! major. Values are stored as f32 and widened to f64 on load.
//!
//! JSONL inputs: embeddings `{"id","lang","vec"}`, relevance judgments
//! `{"query_id","relevant":[…]}`, labels `{"id","label"}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::types::{ComponentBasis, EmbeddingRecord, EmbeddingSet};

pub const EMBEDDING_MAGIC: &[u8; 4] = b"LIRE";
pub const COMPONENT_MAGIC: &[u8; 4] = b"LIRC";
pub const FORMAT_VERSION: u8 = 1;
pub const EMBEDDING_EXT: &str = "lire";
pub const COMPONENT_EXT: &str = "lirc";

/// Stored bases must be orthonormal to this after f32 rounding...
pub const STORED_BASIS_TOLERANCE: f64 = 1e-4;
/// ...and are rejected outright beyond this.
pub const CORRUPT_BASIS_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingHeader {
    count: u64,
    dim: u32,
    dtype: String,
    lang: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentHeader {
    dim: u32,
    lang: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mode_hint: Option<String>,
    rank: u32,
    sample_count: u64,
    source_fingerprint: String,
}

fn to_f32(x: f64) -> Result<f32> {
    let y = x as f32;
    if y.is_finite() {
        Ok(y)
    } else {
        Err(Error::InvalidEmbedding(format!("value {x} does not fit in f32")))
    }
}

fn frame(magic: &[u8; 4], header: &impl Serialize) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(9 + json.len());
    out.extend_from_slice(magic);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::TruncatedFile(format!(
                    "needed {n} bytes for {what} at offset {}, {} available",
                    self.pos,
                    self.buf.len() - self.pos
                ))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(4).ok_or_else(|| Error::Format("size overflow".into()))?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect())
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

fn open_frame<'a, H: for<'de> Deserialize<'de>>(buf: &'a [u8], magic: &[u8; 4]) -> Result<(H, Cursor<'a>)> {
    if buf.len() < 4 || &buf[..4] != magic {
        return Err(Error::Format("bad magic".into()));
    }
    let mut cur = Cursor { buf, pos: 4 };
    let version = cur.take(1, "version")?[0];
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let len = cur.u32("header length")? as usize;
    let json = cur.take(len, "header")?;
    let header = serde_json::from_slice(json).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    Ok((header, cur))
}

pub fn encode_embeddings(set: &EmbeddingSet) -> Result<Vec<u8>> {
    let langs = set.languages();
    let lang = match langs.len() {
        1 => langs.into_iter().next().expect("one language"),
        0 => return Err(Error::Dataset("cannot write an empty embedding file".into())),
        _ => return Err(Error::Dataset(format!("one language per file, got {langs:?}"))),
    };
    let header = EmbeddingHeader {
        count: set.len() as u64,
        dim: u32::try_from(set.dim()).map_err(|_| Error::Format("dimension exceeds u32".into()))?,
        dtype: "f32".into(),
        lang: lang.to_string(),
    };
    let mut out = frame(EMBEDDING_MAGIC, &header)?;
    for r in set {
        let id = r.id().as_bytes();
        let len = u16::try_from(id.len()).map_err(|_| Error::Format(format!("id {:?} too long", r.id())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id);
        for &x in r.vec() {
            out.extend_from_slice(&to_f32(x)?.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode_embeddings(buf: &[u8]) -> Result<EmbeddingSet> {
    let (header, mut cur): (EmbeddingHeader, _) = open_frame(buf, EMBEDDING_MAGIC)?;
    if header.dtype != "f32" {
        return Err(Error::Format(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.dim == 0 {
        return Err(Error::Format("dim must be >= 1".into()));
    }
    let dim = header.dim as usize;
    let mut records = Vec::new();
    for i in 0..header.count {
        let what = format!("record {i}");
        let len = cur.u16(&what)? as usize;
        let id = std::str::from_utf8(cur.take(len, &what)?)
            .map_err(|_| Error::Format(format!("record {i} id is not UTF-8")))?;
        let vec = cur.f32s(dim, &what)?;
        records.push(EmbeddingRecord::new(id, &header.lang, vec)?);
    }
    if cur.remaining() != 0 {
        return Err(Error::Format(format!(
            "count mismatch: {} trailing bytes after {} records",
            cur.remaining(),
            header.count
        )));
    }
    EmbeddingSet::new(records)
}

pub fn encode_components(basis: &ComponentBasis, mode_hint: Option<&str>) -> Result<Vec<u8>> {
    let header = ComponentHeader {
        dim: u32::try_from(basis.dim()).map_err(|_| Error::Format("dimension exceeds u32".into()))?,
        lang: basis.lang().to_string(),
        mode_hint: mode_hint.map(str::to_string),
        rank: basis.rank() as u32,
        sample_count: basis.sample_count() as u64,
        source_fingerprint: basis.source_fingerprint().to_string(),
    };
    let mut out = frame(COMPONENT_MAGIC, &header)?;
    for j in 0..basis.rank() {
        for x in basis.column(j) {
            out.extend_from_slice(&to_f32(x)?.to_le_bytes());
        }
    }
    Ok(out)
}

/// A loaded basis plus the optional free-form hint stored with it.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredComponents {
    pub basis: ComponentBasis,
    pub mode_hint: Option<String>,
}

/// Decodes a LIRC payload. Columns off by more than 1e-2 from orthonormal
/// are rejected; anything else is re-orthonormalised by Gram-Schmidt in f64
/// so the loaded basis meets the 1e-6 in-memory tolerance.
pub fn decode_components(buf: &[u8]) -> Result<StoredComponents> {
    let (header, mut cur): (ComponentHeader, _) = open_frame(buf, COMPONENT_MAGIC)?;
    let (d, r) = (header.dim as usize, header.rank as usize);
    if d == 0 {
        return Err(Error::Format("dim must be >= 1".into()));
    }
    if r > d {
        return Err(Error::Format(format!("rank {r} exceeds dim {d}")));
    }
    let values = cur.f32s(d * r, "basis values")?;
    if cur.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after basis", cur.remaining())));
    }
    let mut row_major = vec![0.0; d * r];
    for j in 0..r {
        for i in 0..d {
            row_major[i * r + j] = values[j * d + i];
        }
    }
    let stored = Matrix::new(d, r, row_major)?;
    let deviation = stored.orthonormality_error();
    if deviation > CORRUPT_BASIS_THRESHOLD {
        return Err(Error::CorruptBasis { deviation });
    }
    if deviation > STORED_BASIS_TOLERANCE {
        log::warn!(
            "basis for {:?} deviates from orthonormal by {deviation:.2e}; repairing",
            header.lang
        );
    }
    let repaired = linalg::orthonormalize_columns(&stored).map_err(|_| Error::CorruptBasis { deviation })?;
    let basis = ComponentBasis::new(
        &header.lang,
        repaired,
        header.source_fingerprint,
        header.sample_count as usize,
    )?;
    Ok(StoredComponents {
        basis,
        mode_hint: header.mode_hint,
    })
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_embeddings(path: impl AsRef<Path>, set: &EmbeddingSet) -> Result<()> {
    write_bytes(path.as_ref(), &encode_embeddings(set)?)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    decode_embeddings(&read_bytes(path.as_ref())?)
}

pub fn write_components(path: impl AsRef<Path>, basis: &ComponentBasis, mode_hint: Option<&str>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_components(basis, mode_hint)?)
}

pub fn read_components(path: impl AsRef<Path>) -> Result<ComponentBasis> {
    Ok(decode_components(&read_bytes(path.as_ref())?)?.basis)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEmbedding {
    id: String,
    lang: String,
    vec: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonQrel {
    query_id: String,
    relevant: Vec<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonLabel {
    id: String,
    label: u8,
}

/// Non-blank lines with 1-based line numbers.
fn jsonl_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_line<T: for<'de> Deserialize<'de>>(line_no: usize, line: &str) -> Result<T> {
    serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

pub fn parse_jsonl_embeddings(text: &str) -> Result<EmbeddingSet> {
    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    let mut dim = None;
    for (line_no, line) in jsonl_lines(text) {
        let raw: JsonEmbedding = parse_line(line_no, line)?;
        let expected = *dim.get_or_insert(raw.vec.len());
        if raw.vec.len() != expected {
            return Err(Error::Dimension {
                expected,
                found: raw.vec.len(),
                line: Some(line_no),
            });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::DuplicateKey {
                key: raw.id,
                line: line_no,
            });
        }
        let rec = EmbeddingRecord::new(raw.id, &raw.lang, raw.vec).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    EmbeddingSet::new(records)
}

#[derive(Serialize)]
struct JsonEmbeddingOut<'a> {
    id: &'a str,
    lang: &'a str,
    vec: &'a [f64],
}

/// One `{"id","lang","vec"}` object per line, full f64 precision.
pub fn embeddings_to_jsonl(set: &EmbeddingSet) -> String {
    let mut out = String::new();
    for r in set {
        let line = JsonEmbeddingOut {
            id: r.id(),
            lang: r.lang(),
            vec: r.vec(),
        };
        out.push_str(&serde_json::to_string(&line).expect("finite values serialize"));
        out.push('\n');
    }
    out
}

/// Writes `.jsonl` paths as JSONL and anything else as a LIRE file.
pub fn save_embeddings(path: impl AsRef<Path>, set: &EmbeddingSet) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => write_bytes(path, embeddings_to_jsonl(set).as_bytes()),
        _ => write_embeddings(path, set),
    }
}

pub fn read_jsonl_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    parse_jsonl_embeddings(&read_text(path.as_ref())?)
}

pub fn parse_qrels(text: &str) -> Result<BTreeMap<String, BTreeSet<String>>> {
    let mut out = BTreeMap::new();
    for (line_no, line) in jsonl_lines(text) {
        let q: JsonQrel = parse_line(line_no, line)?;
        if out.contains_key(&q.query_id) {
            return Err(Error::DuplicateKey {
                key: q.query_id,
                line: line_no,
            });
        }
        out.insert(q.query_id, q.relevant.into_iter().collect());
    }
    Ok(out)
}

pub fn read_qrels(path: impl AsRef<Path>) -> Result<BTreeMap<String, BTreeSet<String>>> {
    parse_qrels(&read_text(path.as_ref())?)
}

pub fn qrels_to_jsonl(qrels: &BTreeMap<String, BTreeSet<String>>) -> String {
    let mut out = String::new();
    for (q, rel) in qrels {
        let line = JsonQrel {
            query_id: q.clone(),
            relevant: rel.iter().cloned().collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("plain strings serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_labels(text: &str) -> Result<BTreeMap<String, bool>> {
    let mut out = BTreeMap::new();
    for (line_no, line) in jsonl_lines(text) {
        let l: JsonLabel = parse_line(line_no, line)?;
        let label = match l.label {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("label must be 0 or 1, got {other}"),
                })
            }
        };
        if out.insert(l.id.clone(), label).is_some() {
            return Err(Error::DuplicateKey {
                key: l.id,
                line: line_no,
            });
        }
    }
    Ok(out)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, bool>> {
    parse_labels(&read_text(path.as_ref())?)
}

pub fn labels_to_jsonl(labels: &BTreeMap<String, bool>) -> String {
    let mut out = String::new();
    for (id, &label) in labels {
        let line = JsonLabel {
            id: id.clone(),
            label: label as u8,
        };
        out.push_str(&serde_json::to_string(&line).expect("plain values serialize"));
        out.push('\n');
    }
    out
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Format(format!("{}: not UTF-8: {e}", path.display())))
}

/// Pretty-printed JSON with object keys sorted at every level.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json's Map is a BTreeMap unless `preserve_order` is enabled
    let v = serde_json::to_value(value).map_err(|e| Error::Format(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| Error::Format(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    write_bytes(path.as_ref(), to_sorted_json(value)?.as_bytes())
}

/// Embedding input by path: a `.lire` or `.jsonl` file, or a directory of
/// them (read in file-name order and concatenated).
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let path = path.as_ref();
    if path.is_dir() {
        let files = list_files(path, &[EMBEDDING_EXT, "jsonl"])?;
        if files.is_empty() {
            return Err(Error::Dataset(format!(
                "{} contains no embedding files",
                path.display()
            )));
        }
        let sets = files
            .iter()
            .map(|f| load_embedding_file(f))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingSet::concat(sets)
    } else {
        load_embedding_file(path)
    }
}

fn load_embedding_file(path: &Path) -> Result<EmbeddingSet> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => read_jsonl_embeddings(path),
        _ => read_embeddings(path),
    }
}

/// Every `.lirc` file in a directory, keyed by language.
pub fn load_component_dir(dir: impl AsRef<Path>) -> Result<BTreeMap<String, ComponentBasis>> {
    let dir = dir.as_ref();
    let mut out = BTreeMap::new();
    for f in list_files(dir, &[COMPONENT_EXT])? {
        let b = read_components(&f)?;
        if out.contains_key(b.lang()) {
            return Err(Error::Dataset(format!(
                "{} holds more than one basis for {:?}",
                dir.display(),
                b.lang()
            )));
        }
        out.insert(b.lang().to_string(), b);
    }
    Ok(out)
}

/// Files with one of the given extensions, sorted by name.
pub fn list_files(dir: &Path, exts: &[&str]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file()
            && p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| exts.contains(&e))
        {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}
