//! Hard-assignment K-means over document vectors, kept as the comparison
//! baseline for topic mixtures: every document lands in exactly one cluster.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::index::SparseVector;

/// Lloyd iterations with seeded k-means++ initialization. Vectors are
/// L2-normalized first; ties go to the lower cluster id.
pub fn kmeans_baseline(
    vectors: &[(String, SparseVector)],
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<BTreeMap<String, usize>> {
    if vectors.is_empty() {
        return Err(Error::InvalidInput("no vectors to cluster".into()));
    }
    if k == 0 || k > vectors.len() {
        return Err(Error::InvalidInput(format!(
            "k = {k} must be in 1..={}",
            vectors.len()
        )));
    }
    let dim = vectors
        .iter()
        .flat_map(|(_, v)| v.iter().map(|(t, _)| t as usize + 1))
        .max()
        .unwrap_or(0);
    let points: Vec<Vec<f64>> = vectors
        .iter()
        .map(|(_, v)| {
            let mut dense = vec![0.0; dim];
            let norm = v.norm_squared().sqrt();
            if norm > 0.0 {
                for (t, w) in v.iter() {
                    dense[t as usize] = w / norm;
                }
            }
            dense
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = init_plus_plus(&points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for (i, p) in points.iter().enumerate() {
            let best = nearest(p, &centroids);
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut sizes = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            sizes[c] += 1;
            sums[c].iter_mut().zip(p).for_each(|(s, x)| *s += x);
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if sizes[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / sizes[c] as f64).collect();
            }
        }
    }
    Ok(vectors
        .iter()
        .zip(assignment)
        .map(|((id, _), c)| (id.clone(), c))
        .collect())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(p, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best.0
}

fn init_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut chosen = vec![rng.random_range(0..points.len())];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && u < d {
                    pick = Some(i);
                    break;
                }
                u -= d;
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap_or(0))
        } else {
            // all remaining points coincide with a centroid
            (0..points.len()).find(|i| !chosen.contains(i)).unwrap_or(0)
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, &points[next]));
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(entries: &[(u32, f64)]) -> SparseVector {
        SparseVector::from_entries(entries.iter().copied())
    }

    #[test]
    fn separates_two_groups() {
        let mut data = Vec::new();
        for i in 0..10 {
            let jitter = i as f64 * 0.05;
            data.push((format!("a{i}"), v(&[(0, 1.0), (1, 1.0 + jitter)])));
            data.push((format!("b{i}"), v(&[(5, 1.0 + jitter), (6, 1.0)])));
        }
        let out = kmeans_baseline(&data, 2, 3, 50).unwrap();
        let ca = out["a0"];
        let cb = out["b0"];
        assert_ne!(ca, cb);
        for i in 0..10 {
            assert_eq!(out[&format!("a{i}")], ca);
            assert_eq!(out[&format!("b{i}")], cb);
        }
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let data: Vec<_> = (0..6)
            .map(|i| (format!("d{i}"), v(&[(i, 1.0), (10, 0.1 * i as f64)])))
            .collect();
        let out = kmeans_baseline(&data, 6, 11, 20).unwrap();
        let mut clusters: Vec<usize> = out.values().copied().collect();
        clusters.sort_unstable();
        assert_eq!(clusters, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn bad_arguments() {
        assert!(kmeans_baseline(&[], 1, 0, 10).is_err());
        let one = vec![("x".to_string(), v(&[(0, 1.0)]))];
        assert!(kmeans_baseline(&one, 2, 0, 10).is_err());
        assert_eq!(kmeans_baseline(&one, 1, 0, 10).unwrap()["x"], 0);
    }
}
