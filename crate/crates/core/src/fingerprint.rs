//! SHA-256 content fingerprints recorded in bases and reports.

use sha2::{Digest, Sha256};

use crate::linalg::Matrix;
use crate::types::EmbeddingSet;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn put_str(h: &mut Sha256, s: &str) {
    h.update((s.len() as u64).to_le_bytes());
    h.update(s.as_bytes());
}

pub fn matrix(lang: &str, m: &Matrix) -> String {
    let mut h = Sha256::new();
    put_str(&mut h, lang);
    h.update((m.rows() as u64).to_le_bytes());
    h.update((m.cols() as u64).to_le_bytes());
    for x in m.as_slice() {
        h.update(x.to_le_bytes());
    }
    hex(&h.finalize())
}

pub fn records(set: &EmbeddingSet) -> String {
    let mut h = Sha256::new();
    h.update((set.len() as u64).to_le_bytes());
    for r in set {
        put_str(&mut h, r.id());
        put_str(&mut h, r.lang());
        for x in r.vec() {
            h.update(x.to_le_bytes());
        }
    }
    hex(&h.finalize())
}

pub fn bytes(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}
