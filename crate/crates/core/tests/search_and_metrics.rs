//! Vector search and classification metrics against naive references.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use scholarchat_core::classify::evaluate;
use scholarchat_core::reference::{brute_force_top_k, naive_evaluate};
use scholarchat_core::EmbeddingIndex;

#[test]
fn top_k_matches_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let vectors: Vec<(String, Vec<f64>)> = (0..1000)
        .map(|i| {
            let v = (0..64).map(|_| rng.sample(StandardNormal)).collect();
            (format!("v{i:04}"), v)
        })
        .collect();
    let mut index = EmbeddingIndex::new(64);
    for (id, v) in &vectors {
        index.insert(id, v).unwrap();
    }
    for _ in 0..20 {
        let q: Vec<f64> = (0..64).map(|_| rng.sample(StandardNormal)).collect();
        let hits = index.top_k(&q, 100).unwrap();
        let oracle = brute_force_top_k(&vectors, &q, 100);
        assert_eq!(hits.len(), 100);
        for (h, (id, score)) in hits.iter().zip(&oracle) {
            assert_eq!(&h.id, id);
            assert!((h.score - score).abs() <= 1e-9);
        }
    }
}

#[test]
fn evaluate_matches_confusion_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let labels = ["A", "B", "C", "D", "None"];
    for _ in 0..100 {
        let n = rng.gen_range(1..40);
        let pairs: Vec<(String, String)> = (0..n)
            .map(|_| {
                let g = labels[rng.gen_range(0..labels.len())];
                let p = labels[rng.gen_range(0..labels.len())];
                (g.to_string(), p.to_string())
            })
            .collect();
        assert_eq!(evaluate(&pairs).unwrap(), naive_evaluate(&pairs));
    }
}
