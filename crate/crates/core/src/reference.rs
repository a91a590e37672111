//! Slow, definition-level implementations used as test oracles for the
//! optimized paths. They share only the conventions (labels, tie order) with
//! the code they check, never the arithmetic.

use std::collections::{BTreeMap, BTreeSet};

use crate::classify::{ClassMetrics, MetricsReport};
use crate::cluster::{Linkage, Merge};

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn centroid(points: &[&[f64]]) -> Vec<f64> {
    let mut c = vec![0.0; points[0].len()];
    for p in points {
        for (ci, x) in c.iter_mut().zip(p.iter()) {
            *ci += x;
        }
    }
    c.iter().map(|x| x / points.len() as f64).collect()
}

/// Linkage distance between two clusters computed from their members.
pub fn linkage_distance(a: &[&[f64]], b: &[&[f64]], linkage: Linkage) -> f64 {
    match linkage {
        Linkage::Ward => {
            let (na, nb) = (a.len() as f64, b.len() as f64);
            (2.0 * na * nb / (na + nb)).sqrt() * euclid(&centroid(a), &centroid(b))
        }
        Linkage::Complete => a
            .iter()
            .flat_map(|x| b.iter().map(move |y| euclid(x, y)))
            .fold(0.0, f64::max),
        Linkage::Average => {
            let total: f64 = a
                .iter()
                .flat_map(|x| b.iter().map(move |y| euclid(x, y)))
                .sum();
            total / (a.len() * b.len()) as f64
        }
    }
}

/// Agglomeration that recomputes every pairwise cluster distance from the
/// members at each step. `points` must already be in label order.
///
/// Ties: pairs within `tol·max(1, d_min)` of the minimum are tied and the
/// smallest `(min label, max label)` wins.
pub fn naive_agglomerate(points: &[Vec<f64>], linkage: Linkage, tol: f64) -> Vec<Merge<f64>> {
    let n = points.len();
    let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
    let mut merges = Vec::new();
    for step in 0..n.saturating_sub(1) {
        let mut pairs = Vec::new();
        for x in 0..clusters.len() {
            for y in x + 1..clusters.len() {
                let a: Vec<&[f64]> = clusters[x]
                    .1
                    .iter()
                    .map(|&i| points[i].as_slice())
                    .collect();
                let b: Vec<&[f64]> = clusters[y]
                    .1
                    .iter()
                    .map(|&i| points[i].as_slice())
                    .collect();
                pairs.push((x, y, linkage_distance(&a, &b, linkage)));
            }
        }
        let d_min = pairs.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
        let bound = d_min + tol * d_min.abs().max(1.0);
        let &(x, y, d) = pairs
            .iter()
            .filter(|p| p.2 <= bound)
            .min_by_key(|p| {
                let (la, lb) = (clusters[p.0].0, clusters[p.1].0);
                (la.min(lb), la.max(lb))
            })
            .expect("two clusters remain");
        let (la, lb) = (clusters[x].0, clusters[y].0);
        let mut members = clusters[x].1.clone();
        members.extend(&clusters[y].1);
        merges.push(Merge {
            a: la.min(lb),
            b: la.max(lb),
            distance: d,
            size: members.len(),
        });
        clusters.remove(y);
        clusters[x] = (n + step, members);
    }
    merges
}

/// Scores every vector and fully sorts: score descending, id ascending.
pub fn brute_force_top_k(
    vectors: &[(String, Vec<f64>)],
    query: &[f64],
    k: usize,
) -> Vec<(String, f64)> {
    let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = vectors
        .iter()
        .map(|(id, v)| {
            let d: f64 = v.iter().zip(query).map(|(a, b)| a * b).sum();
            let vn = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            (id.clone(), d / (qn * vn))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Metrics read off an explicit confusion matrix.
pub fn naive_evaluate(pairs: &[(String, String)]) -> MetricsReport {
    let mut matrix: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    let mut labels = BTreeSet::new();
    for (g, p) in pairs {
        *matrix.entry((g.as_str(), p.as_str())).or_default() += 1;
        labels.insert(g.as_str());
        labels.insert(p.as_str());
    }
    let cell = |g: &str, p: &str| matrix.get(&(g, p)).copied().unwrap_or(0);
    let div = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut per_class = BTreeMap::new();
    for &c in &labels {
        let tp = cell(c, c);
        let row: usize = labels.iter().map(|&p| cell(c, p)).sum();
        let col: usize = labels.iter().map(|&g| cell(g, c)).sum();
        let (precision, recall) = (div(tp, col), div(tp, row));
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.insert(
            c.to_string(),
            ClassMetrics {
                precision,
                recall,
                f1,
                support: row,
            },
        );
    }
    let diagonal: usize = labels.iter().map(|&c| cell(c, c)).sum();
    let macro_f1 = per_class.values().map(|m| m.f1).sum::<f64>() / per_class.len() as f64;
    MetricsReport {
        accuracy: div(diagonal, pairs.len()),
        per_class,
        macro_f1,
    }
}
