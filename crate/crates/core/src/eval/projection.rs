use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::{self, norm};
use crate::types::EmbeddingSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionRow {
    pub id: String,
    pub lang: String,
    pub scores: Vec<f64>,
}

/// Joint PCA over all records (every language stacked together), one row of
/// `k` principal scores per record.
pub fn export_projection(records: &EmbeddingSet, k: usize) -> Result<Vec<ProjectionRow>> {
    let scores = linalg::pca_project(&records.to_matrix(), k)?;
    Ok(records
        .iter()
        .zip(scores.row_iter())
        .map(|(r, s)| ProjectionRow {
            id: r.id().to_string(),
            lang: r.lang().to_string(),
            scores: s.to_vec(),
        })
        .collect())
}

/// CSV with header `id,lang,score_1,…,score_k`, LF line endings. Floats use
/// the shortest representation that parses back to the same value.
pub fn projection_csv(rows: &[ProjectionRow]) -> Result<String> {
    let k = rows.first().map_or(0, |r| r.scores.len());
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "lang".to_string()];
    header.extend((1..=k).map(|i| format!("score_{i}")));
    let to_err = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(&header).map_err(to_err)?;
    for row in rows {
        if row.scores.len() != k {
            return Err(Error::dimension(k, row.scores.len()));
        }
        let mut fields = vec![row.id.clone(), row.lang.clone()];
        fields.extend(row.scores.iter().map(|x| format!("{x:?}")));
        w.write_record(&fields).map_err(to_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn centroid<'a>(points: impl Iterator<Item = &'a [f64]>, k: usize) -> Vec<f64> {
    let mut acc = vec![0.0; k];
    let mut n = 0usize;
    for p in points {
        for (a, x) in acc.iter_mut().zip(p) {
            *a += x;
        }
        n += 1;
    }
    acc.iter_mut().for_each(|a| *a /= n.max(1) as f64);
    acc
}

fn mean_pairwise_distance(points: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let diff: Vec<f64> = points[i].iter().zip(&points[j]).map(|(a, b)| a - b).collect();
            total += norm(&diff);
            pairs += 1;
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// How strongly languages separate in projection space, relative to
/// semantic spread: the mean pairwise distance between language centroids
/// divided by the mean pairwise distance between topic centroids (topics
/// pooled across languages). Rows whose `topic_of` is `None` are ignored
/// for the denominator.
pub fn language_separation<F>(rows: &[ProjectionRow], topic_of: F) -> Result<f64>
where
    F: Fn(&str) -> Option<String>,
{
    let k = rows.first().map_or(0, |r| r.scores.len());
    let mut by_lang: BTreeMap<&str, Vec<&[f64]>> = BTreeMap::new();
    let mut by_topic: BTreeMap<String, Vec<&[f64]>> = BTreeMap::new();
    for r in rows {
        by_lang.entry(&r.lang).or_default().push(&r.scores);
        if let Some(t) = topic_of(&r.id) {
            by_topic.entry(t).or_default().push(&r.scores);
        }
    }
    if by_lang.len() < 2 || by_topic.len() < 2 {
        return Err(Error::Dataset(
            "separation needs at least two languages and two topics".into(),
        ));
    }
    let lang_centroids: Vec<_> = by_lang.values().map(|p| centroid(p.iter().copied(), k)).collect();
    let topic_centroids: Vec<_> = by_topic.values().map(|p| centroid(p.iter().copied(), k)).collect();
    let between = mean_pairwise_distance(&lang_centroids);
    let spread = mean_pairwise_distance(&topic_centroids);
    if spread == 0.0 {
        return Err(Error::Dataset("topic centroids coincide".into()));
    }
    Ok(between / spread)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::EmbeddingRecord;

    fn rec(id: &str, lang: &str, v: &[f64]) -> EmbeddingRecord {
        EmbeddingRecord::new(id, lang, v.to_vec()).unwrap()
    }

    #[test]
    fn csv_layout() {
        let rows = vec![
            ProjectionRow {
                id: "a".into(),
                lang: "en".into(),
                scores: vec![0.1, -2.0],
            },
            ProjectionRow {
                id: "b,c".into(),
                lang: "zh".into(),
                scores: vec![1e-20, 3.0],
            },
        ];
        let out = projection_csv(&rows).unwrap();
        assert_eq!(out, "id,lang,score_1,score_2\na,en,0.1,-2.0\n\"b,c\",zh,1e-20,3.0\n");
        let parsed: f64 = "1e-20".parse().unwrap();
        assert_eq!(parsed, 1e-20);
    }

    #[test]
    fn duplicated_point_set_scores_zero() {
        let set = EmbeddingSet::new(vec![rec("a", "en", &[1.0, 2.0]), rec("b", "zh", &[1.0, 2.0])]).unwrap();
        let rows = export_projection(&set, 1).unwrap();
        assert!(rows.iter().all(|r| r.scores == vec![0.0]));
    }

    #[test]
    fn too_many_dims() {
        let set = EmbeddingSet::new(vec![rec("a", "en", &[1.0, 2.0]), rec("b", "zh", &[3.0, 2.0])]).unwrap();
        assert!(matches!(export_projection(&set, 3), Err(Error::Rank { .. })));
    }

    #[test]
    fn offset_languages_separate_on_first_axis() {
        // en centred at +3 on axis 0, zh at -3, small spread on axis 1
        let mut recs = Vec::new();
        for i in 0..5 {
            let y = i as f64 * 0.2 - 0.4;
            recs.push(rec(&format!("en{i}"), "en", &[3.0 + 0.1 * y, y]));
            recs.push(rec(&format!("zh{i}"), "zh", &[-3.0 - 0.1 * y, y]));
        }
        let rows = export_projection(&EmbeddingSet::new(recs).unwrap(), 1).unwrap();
        let range = |lang: &str| {
            let s: Vec<f64> = rows.iter().filter(|r| r.lang == lang).map(|r| r.scores[0]).collect();
            (
                s.iter().cloned().fold(f64::INFINITY, f64::min),
                s.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        let (en, zh) = (range("en"), range("zh"));
        assert!(en.1 < zh.0 || zh.1 < en.0, "{en:?} {zh:?}");
    }
}
