//! Synthetic multilingual embeddings with a controllable language offset.
//!
//! Each record is `offset[lang] + topic[t] + noise`. Offsets are mutually
//! orthogonal and orthogonal to every topic vector, so the shared
//! per-language component is exactly one direction per language.
//!
//! Randomness comes from ChaCha8 (`rand_chacha`), a counter-based stream
//! cipher generator with a fixed, platform-independent output sequence. The
//! seed feeds four independent streams:
//!
//! | stream | draws |
//! |--------|-------|
//! | 0 | random orthonormal frame of R^d |
//! | 1 | topic vectors |
//! | 2 | per-record noise |
//! | 3 | skew directions |
//!
//! so changing `bias_scale` or `skew` leaves topics and noise untouched.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::types::{EmbeddingRecord, EmbeddingSet, RetrievalDataset};

const FRAME_STREAM: u64 = 0;
const TOPIC_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const SKEW_STREAM: u64 = 3;

/// Codes used when languages are requested by count.
pub const DEFAULT_LANGUAGES: [&str; 11] = ["en", "zh", "ar", "de", "el", "es", "hi", "ru", "th", "tr", "vi"];

/// Language codes for `n` languages: the defaults first, then `x11`, `x12`, …
pub fn language_codes(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            DEFAULT_LANGUAGES
                .get(i)
                .map_or_else(|| format!("x{i}"), |s| s.to_string())
        })
        .collect()
}

/// Topic-parity labels: odd topics are positive and get `margin` added along
/// a dedicated semantic label axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRule {
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub languages: Vec<String>,
    pub topics: usize,
    pub per_topic_per_lang: usize,
    pub dim: usize,
    pub bias_scale: f64,
    pub semantic_scale: f64,
    /// Per-coordinate standard deviation of the Gaussian noise.
    pub noise_scale: f64,
    pub seed: u64,
    pub label_rule: Option<LabelRule>,
    /// Mixes a random direction into each offset; 0 keeps offsets exactly
    /// orthogonal.
    pub skew: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            languages: language_codes(4),
            topics: 50,
            per_topic_per_lang: 25,
            dim: 64,
            bias_scale: 5.0,
            semantic_scale: 1.0,
            noise_scale: 0.1,
            seed: 42,
            label_rule: None,
            skew: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let langs: BTreeSet<&str> = self.languages.iter().map(|l| l.trim()).collect();
        if self.languages.is_empty() {
            return bad("at least one language is required".into());
        }
        if langs.len() != self.languages.len() || langs.contains("") {
            return bad("language codes must be unique and non-empty".into());
        }
        if self.topics < 2 {
            return bad(format!("need at least 2 topics, got {}", self.topics));
        }
        if self.per_topic_per_lang < 2 {
            return bad(format!(
                "need at least 2 records per topic and language (one query plus candidates), got {}",
                self.per_topic_per_lang
            ));
        }
        if self.dim < self.languages.len() + 2 {
            return bad(format!(
                "dim {} too small for {} languages (need languages + 2)",
                self.dim,
                self.languages.len()
            ));
        }
        if !(self.bias_scale.is_finite() && self.bias_scale >= 0.0) {
            return bad(format!("bias scale must be >= 0, got {}", self.bias_scale));
        }
        if !(self.semantic_scale.is_finite() && self.semantic_scale > 0.0) {
            return bad(format!("semantic scale must be > 0, got {}", self.semantic_scale));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return bad(format!("noise scale must be >= 0, got {}", self.noise_scale));
        }
        if !(self.skew.is_finite() && self.skew >= 0.0) {
            return bad(format!("skew must be >= 0, got {}", self.skew));
        }
        if let Some(rule) = self.label_rule {
            if !rule.margin.is_finite() {
                return bad("label margin must be finite".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    /// Ordered by language (config order), topic, then index.
    pub records: EmbeddingSet,
    /// Index-0 record of every (topic, language) pair.
    pub queries: EmbeddingSet,
    /// All other records.
    pub candidates: EmbeddingSet,
    /// Query id → every same-topic candidate, across all languages.
    pub qrels: BTreeMap<String, BTreeSet<String>>,
    pub labels: Option<BTreeMap<String, bool>>,
    /// The offset vector added to each language.
    pub ground_truth: BTreeMap<String, Vec<f64>>,
}

impl SynthOutput {
    pub fn retrieval_dataset(&self) -> Result<RetrievalDataset> {
        RetrievalDataset::new(self.queries.clone(), self.candidates.clone(), self.qrels.clone())
    }
}

pub fn record_id(lang: &str, topic: usize, index: usize) -> String {
    format!("{lang}-t{topic:04}-{index:04}")
}

/// Recovers `(lang, topic, index)` from an id built by [`record_id`].
pub fn parse_record_id(id: &str) -> Option<(&str, usize, usize)> {
    let mut parts = id.rsplitn(3, '-');
    let index = parts.next()?.parse().ok()?;
    let topic = parts.next()?.strip_prefix('t')?.parse().ok()?;
    let lang = parts.next()?;
    Some((lang, topic, index))
}

/// Topic key of a generated id, for grouping.
pub fn topic_of(id: &str) -> Option<String> {
    parse_record_id(id).map(|(_, t, _)| t.to_string())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// Orthonormal frame of R^d by Gram-Schmidt on Gaussian draws.
fn random_frame(rng: &mut ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d);
    while frame.len() < d {
        let mut v = gaussian(rng, d);
        for _ in 0..2 {
            for f in &frame {
                let c = dot(f, &v);
                v.iter_mut().zip(f).for_each(|(x, y)| *x -= c * y);
            }
        }
        let len = norm(&v);
        if len > 1e-6 {
            v.iter_mut().for_each(|x| *x /= len);
            frame.push(v);
        }
    }
    frame
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let d = cfg.dim;
    let n_lang = cfg.languages.len();

    let frame = random_frame(&mut stream(cfg.seed, FRAME_STREAM), d);
    let (offset_dirs, semantic) = frame.split_at(n_lang);
    let label_axis = &semantic[0];

    let mut topic_rng = stream(cfg.seed, TOPIC_STREAM);
    let topics: Vec<Vec<f64>> = (0..cfg.topics)
        .map(|t| {
            let coords = gaussian(&mut topic_rng, semantic.len());
            let len = norm(&coords);
            let mut v = vec![0.0; d];
            for (c, axis) in coords.iter().zip(semantic) {
                v.iter_mut().zip(axis).for_each(|(x, a)| *x += c * a);
            }
            let scale = if len > 0.0 { cfg.semantic_scale / len } else { 0.0 };
            v.iter_mut().for_each(|x| *x *= scale);
            if let Some(rule) = cfg.label_rule {
                if t % 2 == 1 {
                    v.iter_mut().zip(label_axis).for_each(|(x, a)| *x += rule.margin * a);
                }
            }
            v
        })
        .collect();

    let mut skew_rng = stream(cfg.seed, SKEW_STREAM);
    let mut ground_truth = BTreeMap::new();
    let offsets: Vec<Vec<f64>> = offset_dirs
        .iter()
        .zip(&cfg.languages)
        .map(|(dir, lang)| {
            let skew = gaussian(&mut skew_rng, d);
            let mut v = dir.clone();
            if cfg.skew > 0.0 {
                let sl = norm(&skew);
                v.iter_mut().zip(&skew).for_each(|(x, s)| *x += cfg.skew * s / sl);
                let len = norm(&v);
                v.iter_mut().for_each(|x| *x /= len);
            }
            v.iter_mut().for_each(|x| *x *= cfg.bias_scale);
            ground_truth.insert(lang.trim().to_string(), v.clone());
            v
        })
        .collect();

    let mut noise_rng = stream(cfg.seed, NOISE_STREAM);
    let mut records = Vec::with_capacity(n_lang * cfg.topics * cfg.per_topic_per_lang);
    let mut queries = Vec::with_capacity(n_lang * cfg.topics);
    let mut candidates = Vec::with_capacity(records.capacity());
    let mut by_topic: Vec<Vec<String>> = vec![Vec::new(); cfg.topics];
    let mut labels = cfg.label_rule.map(|_| BTreeMap::new());

    for (lang, offset) in cfg.languages.iter().zip(&offsets) {
        let lang = lang.trim();
        for (t, topic) in topics.iter().enumerate() {
            for i in 0..cfg.per_topic_per_lang {
                let noise = gaussian(&mut noise_rng, d);
                let vec: Vec<f64> = offset
                    .iter()
                    .zip(topic)
                    .zip(&noise)
                    .map(|((o, s), e)| o + s + cfg.noise_scale * e)
                    .collect();
                let id = record_id(lang, t, i);
                let rec = EmbeddingRecord::new(id.clone(), lang, vec)?;
                if let Some(l) = labels.as_mut() {
                    l.insert(id.clone(), t % 2 == 1);
                }
                if i == 0 {
                    queries.push(rec.clone());
                } else {
                    by_topic[t].push(id);
                    candidates.push(rec.clone());
                }
                records.push(rec);
            }
        }
    }

    let qrels = queries
        .iter()
        .map(|q| {
            let (_, t, _) = parse_record_id(q.id()).expect("generated id");
            (q.id().to_string(), by_topic[t].iter().cloned().collect())
        })
        .collect();

    Ok(SynthOutput {
        records: EmbeddingSet::new(records)?,
        queries: EmbeddingSet::new(queries)?,
        candidates: EmbeddingSet::new(candidates)?,
        qrels,
        labels,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            languages: vec!["en".into(), "zh".into()],
            topics: 4,
            per_topic_per_lang: 3,
            dim: 8,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn ids_round_trip() {
        let id = record_id("zh-Hant", 12, 3);
        assert_eq!(parse_record_id(&id), Some(("zh-Hant", 12, 3)));
        assert_eq!(parse_record_id("garbage"), None);
    }

    #[test]
    fn layout() {
        let out = generate(&small()).unwrap();
        assert_eq!(out.records.len(), 2 * 4 * 3);
        assert_eq!(out.queries.len(), 8);
        assert_eq!(out.candidates.len(), 16);
        // every query: 2 same-topic candidates per language
        assert!(out.qrels.values().all(|r| r.len() == 4));
        assert!(out.labels.is_none());
        out.retrieval_dataset().unwrap();
    }

    #[test]
    fn config_errors() {
        let cases = [
            SynthConfig { topics: 1, ..small() },
            SynthConfig { dim: 3, ..small() },
            SynthConfig {
                per_topic_per_lang: 1,
                ..small()
            },
            SynthConfig {
                bias_scale: -1.0,
                ..small()
            },
            SynthConfig {
                semantic_scale: 0.0,
                ..small()
            },
            SynthConfig {
                languages: vec!["en".into(), "en".into()],
                ..small()
            },
            SynthConfig {
                languages: vec![],
                ..small()
            },
        ];
        for cfg in cases {
            assert!(matches!(generate(&cfg), Err(Error::Config(_))), "{cfg:?}");
        }
    }

    #[test]
    fn labels_follow_topic_parity() {
        let cfg = SynthConfig {
            label_rule: Some(LabelRule { margin: 1.0 }),
            ..small()
        };
        let out = generate(&cfg).unwrap();
        let labels = out.labels.unwrap();
        assert!(labels[&record_id("en", 1, 0)]);
        assert!(!labels[&record_id("zh", 2, 2)]);
    }

    #[test]
    fn skew_breaks_orthogonality() {
        let out = generate(&SynthConfig { skew: 1.0, ..small() }).unwrap();
        let c = dot(&out.ground_truth["en"], &out.ground_truth["zh"]);
        assert!(c.abs() > 1e-6);
        let len = norm(&out.ground_truth["en"]);
        assert!((len - 5.0).abs() < 1e-12);
    }

    #[test]
    fn language_codes_extend() {
        assert_eq!(language_codes(2), ["en", "zh"]);
        assert_eq!(language_codes(12)[11], "x11");
    }
}
