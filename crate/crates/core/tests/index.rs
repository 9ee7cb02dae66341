use std::cmp::Ordering;
use std::time::Instant;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use provsearch_core::embedding::{l2_normalize, EmbeddingVector};
use provsearch_core::index::{self, FlatIndex, IndexError};

fn random_unit(rng: &mut impl Rng, dim: usize) -> EmbeddingVector {
    loop {
        let raw: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0f32..1.0)).collect();
        if let Ok(v) = l2_normalize(&raw) {
            return v;
        }
    }
}

/// Random corpus where every tenth entry repeats an earlier vector, so the
/// tie rule is exercised.
fn random_corpus(seed: u64, n: usize, dim: usize) -> Vec<(String, EmbeddingVector)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<(String, EmbeddingVector)> = Vec::with_capacity(n);
    for i in 0..n {
        let v = if i % 10 == 9 { out[rng.gen_range(0..i)].1.clone() } else { random_unit(&mut rng, dim) };
        out.push((format!("r{:05}", rng.gen_range(0..1_000_000)) + &format!("-{i}"), v));
    }
    out
}

/// Brute-force scan: score everything, full sort, truncate.
fn oracle(corpus: &[(String, EmbeddingVector)], q: &[f32], k: usize) -> Vec<(String, f32)> {
    let mut scored: Vec<(String, f32)> = corpus
        .iter()
        .map(|(id, v)| {
            let mut s = 0.0f32;
            for i in 0..q.len() {
                s += v.as_slice()[i] * q[i];
            }
            (id.clone(), s)
        })
        .collect();
    scored.sort_by(|a, b| match b.1.partial_cmp(&a.1).unwrap() {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    scored.truncate(k);
    scored
}

fn build(corpus: &[(String, EmbeddingVector)], dim: usize) -> FlatIndex {
    let mut idx = FlatIndex::new(dim).unwrap();
    for (id, v) in corpus {
        idx.add(id.clone(), v).unwrap();
    }
    idx
}

fn hits(idx: &FlatIndex, q: &EmbeddingVector, k: usize) -> Vec<(String, f32)> {
    idx.search(q, k).unwrap().into_iter().map(|h| (h.record_id, h.score)).collect()
}

#[test]
fn matches_linear_scan_oracle() {
    let start = Instant::now();
    for seed in 0..50 {
        let corpus = random_corpus(seed, 1000, 64);
        let idx = build(&corpus, 64);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        for probe in 0..5 {
            let q = if probe == 0 { corpus[rng.gen_range(0..1000)].1.clone() } else { random_unit(&mut rng, 64) };
            assert_eq!(hits(&idx, &q, 10), oracle(&corpus, q.as_slice(), 10), "seed {seed}");
        }
    }
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn parallel_scan_matches_oracle() {
    let corpus = random_corpus(99, 9000, 32);
    let idx = build(&corpus, 32);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let q = random_unit(&mut rng, 32);
        assert_eq!(hits(&idx, &q, 25), oracle(&corpus, q.as_slice(), 25));
    }
}

#[test]
fn orthogonal_basis() {
    let mut idx = FlatIndex::new(8).unwrap();
    idx.add("B", &EmbeddingVector::basis(8, 1)).unwrap();
    idx.add("A", &EmbeddingVector::basis(8, 0)).unwrap();
    let r = idx.search(&EmbeddingVector::basis(8, 0), 2).unwrap();
    assert_eq!((r[0].record_id.as_str(), r[0].score, r[0].rank), ("A", 1.0, 1));
    assert_eq!((r[1].record_id.as_str(), r[1].score, r[1].rank), ("B", 0.0, 2));
    assert!(matches!(idx.search(&EmbeddingVector::basis(8, 0), 0), Err(IndexError::ZeroK)));
    assert!(matches!(idx.add("A", &EmbeddingVector::basis(8, 2)), Err(IndexError::DuplicateId(_))));
    assert!(matches!(idx.add("C", &EmbeddingVector::basis(4, 0)), Err(IndexError::DimensionMismatch { .. })));
    assert!(FlatIndex::new(8).unwrap().search(&EmbeddingVector::basis(8, 0), 3).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn insertion_order_does_not_matter(seed in any::<u64>(), n in 1usize..120, k in 1usize..20) {
        let corpus = random_corpus(seed, n, 16);
        let mut shuffled = corpus.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0xabcd));
        let a = build(&corpus, 16);
        let b = build(&shuffled, 16);
        let q = random_unit(&mut ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)), 16);
        prop_assert_eq!(hits(&a, &q, k), hits(&b, &q, k));
    }

    #[test]
    fn self_retrieval_and_ordering(seed in any::<u64>(), n in 1usize..80) {
        let corpus = random_corpus(seed, n, 24);
        let idx = build(&corpus, 24);
        for (_, v) in &corpus {
            let r = idx.search(v, 5).unwrap();
            prop_assert!(r[0].score >= 1.0 - 1e-5);
            for w in r.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
                prop_assert_eq!(w[0].rank + 1, w[1].rank);
            }
            for h in &r {
                prop_assert!(h.score.abs() <= 1.0 + 1e-5);
            }
        }
    }
}

#[test]
fn persistence_round_trip_is_bit_identical() {
    let corpus = random_corpus(3, 500, 48);
    let idx = build(&corpus, 48);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.pvix");
    index::save(&idx, &path).unwrap();
    let loaded = index::load(&path).unwrap();
    assert_eq!(loaded.ids(), idx.ids());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let q = random_unit(&mut rng, 48);
        let a = idx.search(&q, 10).unwrap();
        let b = loaded.search(&q, 10).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.record_id, y.record_id);
            assert_eq!(x.score.to_bits(), y.score.to_bits());
        }
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let corpus = random_corpus(4, 3, 8);
    let idx = build(&corpus, 8);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.pvix");
    index::save(&idx, &path).unwrap();
    let good = std::fs::read(&path).unwrap();

    let mut bad = good.clone();
    bad[0] = b'X';
    std::fs::write(&path, &bad).unwrap();
    assert!(matches!(index::load(&path), Err(IndexError::BadMagic)));

    std::fs::write(&path, &good[..good.len() - 4]).unwrap();
    assert!(matches!(index::load(&path), Err(IndexError::TruncatedFile | IndexError::ChecksumMismatch { .. })));

    let mut flipped = good.clone();
    flipped[30] ^= 0x40;
    std::fs::write(&path, &flipped).unwrap();
    assert!(matches!(index::load(&path), Err(IndexError::ChecksumMismatch { .. })));

    for cut in 0..good.len() {
        assert!(index::from_bytes(&good[..cut]).is_err());
    }
    assert!(matches!(index::load(dir.path().join("missing.pvix")), Err(IndexError::Io(_))));
}

#[test]
fn holds_ten_thousand_full_size_vectors() {
    let dim = 3072;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut idx = FlatIndex::with_capacity(dim, 10_000).unwrap();
    let mut probe = None;
    for i in 0..10_000 {
        let v = random_unit(&mut rng, dim);
        if i == 7777 {
            probe = Some(v.clone());
        }
        idx.add(format!("rec-{i:05}"), &v).unwrap();
    }
    assert_eq!(idx.len(), 10_000);
    let idx = idx.freeze();
    let probe = probe.unwrap();
    let start = Instant::now();
    let r = idx.search(&probe, 10).unwrap();
    eprintln!("10K x {dim} scan: {:.1} ms", start.elapsed().as_secs_f64() * 1e3);
    assert_eq!(r[0].record_id, "rec-07777");
}
