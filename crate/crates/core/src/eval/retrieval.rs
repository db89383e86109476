use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint;
use crate::linalg::{dot, norm};
use crate::lir::{self, RemovalMode};
use crate::types::{ComponentBasis, EmbeddingRecord, EmbeddingSet, RetrievalDataset};

pub const SIMILARITY: &str = "cosine";

/// Candidates ordered by descending cosine similarity, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub candidate_ids: Vec<String>,
}

/// Cosine similarity, defined as 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, norm(a), b, norm(b))
}

fn cosine_with_norms(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        // `+ 0.0` turns -0.0 into 0.0 so orthogonal pairs tie with zero
        // vectors under `total_cmp`.
        dot(a, b) / (na * nb) + 0.0
    }
}

struct Scored<'a> {
    id: &'a str,
    score: f64,
}

fn order(a: &Scored, b: &Scored) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.id.cmp(b.id))
}

pub fn rank_candidates(query: &EmbeddingRecord, candidates: &[EmbeddingRecord]) -> Result<RankedList> {
    let mut seen = BTreeSet::new();
    for c in candidates {
        if c.dim() != query.dim() {
            return Err(Error::dimension(query.dim(), c.dim()));
        }
        if !seen.insert(c.id()) {
            return Err(Error::DuplicateId(c.id().to_string()));
        }
    }
    let norms: Vec<f64> = candidates.iter().map(|c| norm(c.vec())).collect();
    Ok(rank_prepared(query, candidates, &norms))
}

fn rank_prepared(query: &EmbeddingRecord, candidates: &[EmbeddingRecord], norms: &[f64]) -> RankedList {
    let qn = norm(query.vec());
    let mut scored: Vec<Scored> = candidates
        .iter()
        .zip(norms)
        .map(|(c, &cn)| Scored {
            id: c.id(),
            score: cosine_with_norms(query.vec(), qn, c.vec(), cn),
        })
        .collect();
    scored.sort_by(order);
    RankedList {
        query_id: query.id().to_string(),
        candidate_ids: scored.into_iter().map(|s| s.id.to_string()).collect(),
    }
}

/// Mean of precision@rank over the ranks where relevant items appear.
pub fn average_precision(ranking: &RankedList, relevant: &BTreeSet<String>) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::NoRelevant(ranking.query_id.clone()));
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranking.candidate_ids.iter().enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    if hits != relevant.len() {
        let missing = relevant
            .iter()
            .find(|id| !ranking.candidate_ids.contains(id))
            .cloned()
            .unwrap_or_default();
        return Err(Error::UnknownId(missing));
    }
    Ok(sum / relevant.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Largest component rank among the bases applied; 0 without removal.
    pub rank: usize,
    pub mode: Option<RemovalMode>,
    pub similarity: String,
    pub fingerprints: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean of per-query AP over all queries.
    pub overall_map: f64,
    /// Mean AP grouped by the query's language.
    pub per_language_map: BTreeMap<String, f64>,
    pub query_count: usize,
    pub config: EvalConfig,
}

/// Ranks every candidate for every query and reports MAP. When `bases` is
/// given, queries and candidates are each cleaned with their own
/// language's basis first; every language must be covered.
pub fn evaluate_retrieval(
    ds: &RetrievalDataset,
    bases: Option<&BTreeMap<String, ComponentBasis>>,
    mode: RemovalMode,
) -> Result<EvalReport> {
    let mut fingerprints = BTreeMap::from([
        ("queries".to_string(), fingerprint::records(ds.queries())),
        ("candidates".to_string(), fingerprint::records(ds.candidates())),
    ]);
    let (queries, candidates, rank) = match bases {
        Some(bases) => {
            let q = lir::remove_batch(ds.queries(), bases, mode, true)?.records;
            let c = lir::remove_batch(ds.candidates(), bases, mode, true)?.records;
            for (lang, b) in bases {
                fingerprints.insert(format!("components.{lang}"), b.source_fingerprint().to_string());
            }
            (q, c, bases.values().map(ComponentBasis::rank).max().unwrap_or(0))
        }
        None => (ds.queries().clone(), ds.candidates().clone(), 0),
    };

    let aps = query_average_precisions(ds, &queries, &candidates)?;

    let overall_map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().map(|(_, ap)| ap).sum::<f64>() / aps.len() as f64
    };
    let mut grouped: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (lang, ap) in &aps {
        grouped.entry(lang.clone()).or_default().push(*ap);
    }
    let per_language_map = grouped
        .into_iter()
        .map(|(lang, v)| (lang, v.iter().sum::<f64>() / v.len() as f64))
        .collect();

    Ok(EvalReport {
        overall_map,
        per_language_map,
        query_count: aps.len(),
        config: EvalConfig {
            rank,
            mode: bases.map(|_| mode),
            similarity: SIMILARITY.to_string(),
            fingerprints,
        },
    })
}

/// (query language, AP) for every query, in query order.
fn query_average_precisions(
    ds: &RetrievalDataset,
    queries: &EmbeddingSet,
    candidates: &EmbeddingSet,
) -> Result<Vec<(String, f64)>> {
    if !queries.is_empty() && queries.dim() != candidates.dim() {
        return Err(Error::dimension(queries.dim(), candidates.dim()));
    }
    let cands = candidates.records();
    let norms: Vec<f64> = cands.iter().map(|c| norm(c.vec())).collect();
    queries
        .records()
        .par_iter()
        .map(|q| {
            let ranking = rank_prepared(q, cands, &norms);
            let relevant = ds
                .relevant(q.id())
                .ok_or_else(|| Error::NoRelevant(q.id().to_string()))?;
            average_precision(&ranking, relevant).map(|ap| (q.lang().to_string(), ap))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, lang: &str, v: &[f64]) -> EmbeddingRecord {
        EmbeddingRecord::new(id, lang, v.to_vec()).unwrap()
    }

    fn ranked(ids: &[&str]) -> RankedList {
        RankedList {
            query_id: "q".into(),
            candidate_ids: ids.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn set(ids: &[&str]) -> BTreeSet<String> {
        ids.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn ranks_by_cosine() {
        let q = rec("q", "en", &[1.0, 0.0]);
        let cs = [
            rec("c", "en", &[-1.0, 0.0]),
            rec("b", "en", &[0.0, 1.0]),
            rec("a", "en", &[1.0, 0.0]),
        ];
        assert_eq!(rank_candidates(&q, &cs).unwrap().candidate_ids, ["a", "b", "c"]);
    }

    #[test]
    fn ties_break_by_id() {
        let q = rec("q", "en", &[1.0, 1.0]);
        let cs = [
            rec("z", "en", &[2.0, 0.0]),
            rec("m", "en", &[1.0, 0.0]),
            rec("zero", "en", &[0.0, 0.0]),
        ];
        let r = rank_candidates(&q, &cs).unwrap();
        assert_eq!(r.candidate_ids, ["m", "z", "zero"]);
    }

    #[test]
    fn orthogonal_ties_with_zero_vector() {
        // the dot product here is -0.0, which must not sort below 0.0
        let q = rec("q", "en", &[-1.0, 0.0]);
        let cs = [rec("b", "en", &[0.0, -1.0]), rec("a", "en", &[0.0, 0.0])];
        assert_eq!(rank_candidates(&q, &cs).unwrap().candidate_ids, ["a", "b"]);
    }

    #[test]
    fn rank_rejects_bad_input() {
        let q = rec("q", "en", &[1.0, 0.0]);
        assert!(matches!(
            rank_candidates(&q, &[rec("a", "en", &[1.0])]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            rank_candidates(&q, &[rec("a", "en", &[1.0, 0.0]), rec("a", "zh", &[0.0, 1.0])]),
            Err(Error::DuplicateId(_))
        ));
    }

    #[test]
    fn ap_examples() {
        let ap = average_precision(&ranked(&["r1", "x", "r2"]), &set(&["r1", "r2"])).unwrap();
        assert!((ap - 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(
            average_precision(&ranked(&["a", "b", "c"]), &set(&["a", "b"])).unwrap(),
            1.0
        );
        let ap = average_precision(&ranked(&["a", "b", "c", "d"]), &set(&["d"])).unwrap();
        assert_eq!(ap, 0.25);
        assert!(matches!(
            average_precision(&ranked(&["a"]), &set(&[])),
            Err(Error::NoRelevant(_))
        ));
        assert!(matches!(
            average_precision(&ranked(&["a"]), &set(&["b"])),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn single_query_perfect() {
        let ds = RetrievalDataset::new(
            EmbeddingSet::new(vec![rec("q", "en", &[1.0, 0.0])]).unwrap(),
            EmbeddingSet::new(vec![rec("a", "zh", &[1.0, 0.1]), rec("b", "zh", &[0.0, 1.0])]).unwrap(),
            BTreeMap::from([("q".to_string(), set(&["a"]))]),
        )
        .unwrap();
        let r = evaluate_retrieval(&ds, None, RemovalMode::Orthogonal).unwrap();
        assert_eq!(r.overall_map, 1.0);
        assert_eq!(r.per_language_map["en"], 1.0);
        assert_eq!(r.query_count, 1);
        assert_eq!(r.config.rank, 0);
        assert_eq!(r.config.mode, None);
    }

    #[test]
    fn overall_is_mean_over_queries_not_languages() {
        // en: two queries (AP 1 and 1/2), zh: one query (AP 1/2)
        let q = EmbeddingSet::new(vec![
            rec("q1", "en", &[1.0, 0.0]),
            rec("q2", "en", &[0.0, 1.0]),
            rec("q3", "zh", &[0.0, 1.0]),
        ])
        .unwrap();
        let c = EmbeddingSet::new(vec![rec("a", "en", &[1.0, 0.0]), rec("b", "en", &[0.0, 1.0])]).unwrap();
        let qrels = BTreeMap::from([
            ("q1".to_string(), set(&["a"])),
            ("q2".to_string(), set(&["a"])),
            ("q3".to_string(), set(&["a"])),
        ]);
        let ds = RetrievalDataset::new(q, c, qrels).unwrap();
        let r = evaluate_retrieval(&ds, None, RemovalMode::Orthogonal).unwrap();
        assert!((r.overall_map - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_language_map["en"], 0.75);
        assert_eq!(r.per_language_map["zh"], 0.5);
    }
}
