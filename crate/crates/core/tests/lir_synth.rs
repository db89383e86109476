use std::collections::BTreeMap;

use lir_core::eval::{cosine, evaluate_retrieval};
use lir_core::linalg::{dot, norm, svd};
use lir_core::lir::{fit_all, fit_components, remove_batch, FitOptions};
use lir_core::synth::{self, generate, SynthConfig};
use lir_core::{EmbeddingSet, RemovalMode};
use lir_oracles::nearest_neighbor;

fn cfg(bias: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        languages: synth::language_codes(4),
        topics: 20,
        per_topic_per_lang: 8,
        dim: 32,
        bias_scale: bias,
        semantic_scale: 1.0,
        noise_scale: 0.1,
        seed,
        label_rule: None,
        skew: 0.0,
    }
}

fn centroid(set: &EmbeddingSet) -> Vec<f64> {
    let mut c = vec![0.0; set.dim()];
    for r in set {
        c.iter_mut().zip(r.vec()).for_each(|(a, x)| *a += x);
    }
    c.iter_mut().for_each(|a| *a /= set.len() as f64);
    c
}

fn max_centroid_distance(set: &EmbeddingSet) -> f64 {
    let cs: Vec<Vec<f64>> = set
        .languages()
        .iter()
        .map(|l| centroid(&set.filter_language(l)))
        .collect();
    let mut worst: f64 = 0.0;
    for i in 0..cs.len() {
        for j in i + 1..cs.len() {
            let d: Vec<f64> = cs[i].iter().zip(&cs[j]).map(|(a, b)| a - b).collect();
            worst = worst.max(norm(&d));
        }
    }
    worst
}

#[test]
fn same_seed_is_bitwise_identical() {
    let a = generate(&cfg(5.0, 3)).unwrap();
    let b = generate(&cfg(5.0, 3)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.records, generate(&cfg(5.0, 4)).unwrap().records);
}

#[test]
fn bias_only_changes_offsets() {
    let a = generate(&cfg(0.0, 11)).unwrap();
    let b = generate(&cfg(5.0, 11)).unwrap();
    for (ra, rb) in a.records.iter().zip(&b.records) {
        let off = &b.ground_truth[ra.lang()];
        for ((x, y), o) in ra.vec().iter().zip(rb.vec()).zip(off) {
            assert!((y - x - o).abs() < 1e-12);
        }
    }
}

#[test]
fn ground_truth_offsets_orthogonal() {
    let out = generate(&cfg(5.0, 1)).unwrap();
    let langs: Vec<_> = out.ground_truth.keys().cloned().collect();
    for i in 0..langs.len() {
        assert!((norm(&out.ground_truth[&langs[i]]) - 5.0).abs() < 1e-9);
        for j in i + 1..langs.len() {
            assert!(dot(&out.ground_truth[&langs[i]], &out.ground_truth[&langs[j]]).abs() < 1e-9);
        }
    }
    // records minus offset and noise lie in the topic span; with zero noise
    // the record is exactly offset + topic, so offset ⟂ (record - offset)
    let quiet = generate(&SynthConfig {
        noise_scale: 0.0,
        ..cfg(5.0, 1)
    })
    .unwrap();
    for r in &quiet.records {
        let off = &quiet.ground_truth[r.lang()];
        let topic: Vec<f64> = r.vec().iter().zip(off).map(|(x, o)| x - o).collect();
        assert!(dot(&topic, off).abs() < 1e-9);
    }
}

#[test]
fn zero_bias_centroids_concentrate() {
    for seed in 0..10 {
        let c = cfg(0.0, seed);
        let out = generate(&c).unwrap();
        let bound = 3.0 * c.noise_scale * (2.0 * c.dim as f64 / c.per_topic_per_lang as f64).sqrt();
        assert!(max_centroid_distance(&out.records) <= bound, "seed {seed}");
    }
}

#[test]
fn top_singular_vector_recovers_offset() {
    let out = generate(&cfg(5.0, 8)).unwrap();
    for (lang, m) in out.records.language_matrices().unwrap() {
        let f = svd(m.matrix()).unwrap();
        let truth = &out.ground_truth[&lang];
        assert!(cosine(&f.v.column(0), truth).abs() >= 0.95, "{lang}");
    }
}

#[test]
fn fit_matches_svd_columns_bitwise() {
    let out = generate(&cfg(5.0, 2)).unwrap();
    let m = out.records.language_matrices().unwrap().remove("en").unwrap();
    let full = svd(m.matrix()).unwrap().v;
    for r in 0..=4 {
        let b = fit_components(&m, r).unwrap();
        assert_eq!(b.basis(), &full.leading_columns(r));
    }
}

#[test]
fn mean_plus_noise_gives_mean_direction() {
    // one topic-free language: rows are μ + noise with noise 0.01·‖μ‖
    let c = SynthConfig {
        languages: vec!["en".into()],
        topics: 2,
        per_topic_per_lang: 200,
        dim: 16,
        bias_scale: 10.0,
        semantic_scale: 1e-9,
        noise_scale: 0.1 / 4.0, // per-coordinate; ‖noise‖ ≈ 0.1 = 0.01·‖μ‖
        seed: 5,
        ..SynthConfig::default()
    };
    let out = generate(&c).unwrap();
    let m = out.records.language_matrices().unwrap().remove("en").unwrap();
    let b = fit_components(&m, 1).unwrap();
    assert!(cosine(&b.column(0), &out.ground_truth["en"]).abs() >= 0.99);
}

#[test]
fn removal_collapses_centroids() {
    let out = generate(&cfg(5.0, 9)).unwrap();
    let bases = fit_all(&out.records, 1, FitOptions::default()).unwrap();
    let cleaned = remove_batch(&out.records, &bases, RemovalMode::Orthogonal, true)
        .unwrap()
        .records;
    let before = max_centroid_distance(&out.records);
    let after = max_centroid_distance(&cleaned);
    assert!(after * 10.0 <= before, "{before} -> {after}");
}

#[test]
fn orthogonal_removal_idempotent_and_contracting() {
    let out = generate(&cfg(5.0, 10)).unwrap();
    let bases = fit_all(&out.records, 2, FitOptions::default()).unwrap();
    let once = remove_batch(&out.records, &bases, RemovalMode::Orthogonal, true)
        .unwrap()
        .records;
    let twice = remove_batch(&once, &bases, RemovalMode::Orthogonal, true)
        .unwrap()
        .records;
    for ((a, b), orig) in once.iter().zip(&twice).zip(&out.records) {
        for (x, y) in a.vec().iter().zip(b.vec()) {
            assert!((x - y).abs() <= 1e-9);
        }
        assert!(norm(a.vec()) <= norm(orig.vec()) + 1e-12);
    }
}

#[test]
fn batch_is_thread_count_independent() {
    let out = generate(&cfg(5.0, 12)).unwrap();
    let bases = fit_all(&out.records, 1, FitOptions::default()).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| remove_batch(&out.records, &bases, RemovalMode::PaperEq1, true).unwrap())
    };
    assert_eq!(run(1), run(6));
}

/// Fraction of queries whose top-1 cosine neighbour shares their topic, when
/// the only same-topic items in the pool are in other languages. Same-language
/// items of other topics stay in the pool as distractors.
fn cross_language_top1(set: &EmbeddingSet) -> f64 {
    let mut hits = 0;
    let mut total = 0;
    for q in set.iter().filter(|r| synth::parse_record_id(r.id()).unwrap().2 == 0) {
        let qt = synth::topic_of(q.id());
        let pool: Vec<_> = set
            .iter()
            .filter(|r| !(r.lang() == q.lang() && synth::topic_of(r.id()) == qt))
            .collect();
        let vecs: Vec<Vec<f64>> = pool.iter().map(|r| r.vec().to_vec()).collect();
        let nn = pool[nearest_neighbor(q.vec(), &vecs)];
        hits += (synth::topic_of(nn.id()) == qt) as usize;
        total += 1;
    }
    hits as f64 / total as f64
}

#[test]
fn removal_makes_nearest_neighbours_cross_lingual() {
    let out = generate(&cfg(5.0, 13)).unwrap();
    let before = cross_language_top1(&out.records);
    let bases = fit_all(&out.records, 1, FitOptions::default()).unwrap();
    let cleaned = remove_batch(&out.records, &bases, RemovalMode::Orthogonal, true)
        .unwrap()
        .records;
    let after = cross_language_top1(&cleaned);
    assert!(before < 0.2, "before {before}");
    assert!(after > 0.9, "after {after}");
}

#[test]
fn disjoint_samples_give_stable_components() {
    let big = SynthConfig {
        languages: vec!["en".into()],
        topics: 40,
        per_topic_per_lang: 100,
        dim: 32,
        ..cfg(5.0, 21)
    };
    let out = generate(&big).unwrap();
    let recs = out.records.records();
    let first = EmbeddingSet::new(recs.iter().step_by(2).take(2000).cloned().collect()).unwrap();
    let second = EmbeddingSet::new(recs.iter().skip(1).step_by(2).take(2000).cloned().collect()).unwrap();
    assert_eq!((first.len(), second.len()), (2000, 2000));
    let a = fit_all(&first, 1, FitOptions::default()).unwrap();
    let b = fit_all(&second, 1, FitOptions::default()).unwrap();
    assert!(cosine(&a["en"].column(0), &b["en"].column(0)).abs() >= 0.99);
}

#[test]
fn retrieval_oracle_noise_free_unbiased_is_perfect() {
    let c = SynthConfig {
        noise_scale: 0.0,
        bias_scale: 0.0,
        ..cfg(0.0, 30)
    };
    let out = generate(&c).unwrap();
    let report = evaluate_retrieval(&out.retrieval_dataset().unwrap(), None, RemovalMode::Orthogonal).unwrap();
    assert_eq!(report.overall_map, 1.0);
}

#[test]
fn zero_rank_bases_match_no_bases_bitwise() {
    let out = generate(&cfg(5.0, 31)).unwrap();
    let ds = out.retrieval_dataset().unwrap();
    let zero: BTreeMap<_, _> = fit_all(&out.records, 0, FitOptions::default()).unwrap();
    let a = evaluate_retrieval(&ds, None, RemovalMode::Orthogonal).unwrap();
    let b = evaluate_retrieval(&ds, Some(&zero), RemovalMode::Orthogonal).unwrap();
    assert_eq!(a.overall_map.to_bits(), b.overall_map.to_bits());
    assert_eq!(a.per_language_map, b.per_language_map);
    assert_eq!(b.config.rank, 0);
}
