use lir_core::io::{
    decode_components, decode_embeddings, encode_components, encode_embeddings, load_component_dir, load_embeddings,
    read_components, read_embeddings, write_components, write_embeddings,
};
use lir_core::linalg::svd;
use lir_core::{ComponentBasis, EmbeddingRecord, EmbeddingSet, Error, Matrix};
use proptest::prelude::*;

fn set_strategy() -> impl Strategy<Value = EmbeddingSet> {
    (1usize..6, 1usize..10).prop_flat_map(|(d, n)| {
        prop::collection::vec(prop::collection::vec(-1e3f64..1e3, d), n).prop_map(|vs| {
            let recs = vs
                .into_iter()
                .enumerate()
                .map(|(i, v)| EmbeddingRecord::new(format!("id-{i}"), "de", v).unwrap())
                .collect();
            EmbeddingSet::new(recs).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn embeddings_round_trip_and_encode_deterministically(set in set_strategy()) {
        let bytes = encode_embeddings(&set).unwrap();
        prop_assert_eq!(&bytes, &encode_embeddings(&set).unwrap());
        let back = decode_embeddings(&bytes).unwrap();
        for (a, b) in set.iter().zip(&back) {
            let rounded: Vec<f64> = a.vec().iter().map(|&x| x as f32 as f64).collect();
            prop_assert_eq!(b.vec(), rounded.as_slice());
        }
        // once rounded, a second round trip is exact
        prop_assert_eq!(encode_embeddings(&back).unwrap(), bytes);
    }

    #[test]
    fn every_truncation_is_a_structured_error(set in set_strategy(), cut in 0usize..1000) {
        let bytes = encode_embeddings(&set).unwrap();
        let cut = cut % bytes.len();
        let err = decode_embeddings(&bytes[..cut]).unwrap_err();
        prop_assert!(matches!(err, Error::Format(_) | Error::TruncatedFile(_)), "{err:?}");
    }

    #[test]
    fn random_bytes_never_panic(mut bytes in prop::collection::vec(any::<u8>(), 0..200), lirc in any::<bool>()) {
        if bytes.len() >= 5 {
            bytes[..4].copy_from_slice(if lirc { b"LIRC" } else { b"LIRE" });
            bytes[4] = 1;
        }
        let _ = decode_embeddings(&bytes);
        let _ = decode_components(&bytes);
    }
}

#[test]
fn f32_round_trip_of_random_basis_is_repaired() {
    let mut s = 17u64;
    let data: Vec<f64> = (0..12 * 12)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 33) as f64 / (1u64 << 31) as f64 - 0.5
        })
        .collect();
    let v = svd(&Matrix::new(12, 12, data).unwrap()).unwrap().v.leading_columns(5);
    let b = ComponentBasis::new("ja", v, "fp", 12).unwrap();
    let loaded = decode_components(&encode_components(&b, None).unwrap()).unwrap().basis;
    assert!(loaded.basis().orthonormality_error() <= 1e-6);
    // the f32-rounded payload alone is off by more than f64 tolerance
    for j in 0..5 {
        let c: f64 = loaded.column(j).iter().zip(b.column(j)).map(|(x, y)| x * y).sum();
        assert!((c - 1.0).abs() < 1e-6);
    }
    assert_eq!(loaded.sample_count(), 12);
    assert_eq!(loaded.source_fingerprint(), "fp");
}

#[test]
fn files_and_directories() {
    let dir = tempfile::tempdir().unwrap();
    let en = EmbeddingSet::new(vec![EmbeddingRecord::new("a", "en", vec![1.0, 0.0]).unwrap()]).unwrap();
    let zh = EmbeddingSet::new(vec![EmbeddingRecord::new("b", "zh", vec![0.0, 1.0]).unwrap()]).unwrap();
    write_embeddings(dir.path().join("en.lire"), &en).unwrap();
    write_embeddings(dir.path().join("zh.lire"), &zh).unwrap();
    std::fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
    assert_eq!(read_embeddings(dir.path().join("zh.lire")).unwrap(), zh);
    let all = load_embeddings(dir.path()).unwrap();
    assert_eq!(all.len(), 2);
    assert_eq!(all.records()[0].id(), "a");

    let cdir = dir.path().join("components");
    std::fs::create_dir(&cdir).unwrap();
    let basis = ComponentBasis::new("en", Matrix::from_rows(&[[1.0], [0.0]]).unwrap(), "x", 1).unwrap();
    write_components(cdir.join("en.lirc"), &basis, None).unwrap();
    assert_eq!(read_components(cdir.join("en.lirc")).unwrap(), basis);
    let loaded = load_component_dir(&cdir).unwrap();
    assert_eq!(loaded.keys().collect::<Vec<_>>(), ["en"]);

    assert!(matches!(
        read_embeddings(dir.path().join("missing.lire")),
        Err(Error::Io { .. })
    ));
}
