//! Exact k-nearest-neighbor search in the latent space.
//!
//! Brute force over all candidate pairs, ordered by squared Euclidean
//! distance with ties broken by smaller node id; a node is never its own
//! neighbor. `knn_blocked` is a cache-friendlier exact variant that
//! scans candidates in blocks — results are identical.

use rayon::prelude::*;
use std::cmp::Ordering;

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

fn better(a: (f64, u32), b: (f64, u32)) -> Ordering {
    a.0.partial_cmp(&b.0)
        .unwrap_or(Ordering::Equal)
        .then(a.1.cmp(&b.1))
}

/// `k` nearest neighbors of every node; lists are shorter only when
/// fewer than `k` other nodes exist.
pub fn knn(embeddings: &[Vec<f64>], k: usize) -> Vec<Vec<u32>> {
    let n = embeddings.len();
    (0..n)
        .into_par_iter()
        .map(|q| {
            let mut cands: Vec<(f64, u32)> = (0..n)
                .filter(|&c| c != q)
                .map(|c| (dist_sq(&embeddings[q], &embeddings[c]), c as u32))
                .collect();
            let take = k.min(cands.len());
            cands.sort_unstable_by(|&a, &b| better(a, b));
            cands.truncate(take);
            cands.into_iter().map(|(_, c)| c).collect()
        })
        .collect()
}

/// Exact blocked scan: candidates are processed in `block`-sized chunks
/// with a running top-`k`, trading full sorts for bounded merges.
pub fn knn_blocked(embeddings: &[Vec<f64>], k: usize, block: usize) -> Vec<Vec<u32>> {
    assert!(block > 0);
    let n = embeddings.len();
    (0..n)
        .into_par_iter()
        .map(|q| {
            let mut top: Vec<(f64, u32)> = Vec::with_capacity(2 * k);
            let mut start = 0;
            while start < n {
                let end = (start + block).min(n);
                for c in start..end {
                    if c != q {
                        top.push((dist_sq(&embeddings[q], &embeddings[c]), c as u32));
                    }
                }
                top.sort_unstable_by(|&a, &b| better(a, b));
                top.truncate(k);
                start = end;
            }
            top.into_iter().map(|(_, c)| c).collect()
        })
        .collect()
}
