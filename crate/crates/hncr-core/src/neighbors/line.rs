//! First-order proximity embedding of a weighted graph.
//!
//! Edges are drawn proportionally to weight through an alias table; each
//! draw attracts the endpoint vectors under `σ(z_a·z_b)` and repels a
//! handful of uniformly sampled negatives. Training is sequential and
//! fully determined by the seed.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::graph::RelationalGraph;
use crate::rng;

#[derive(Debug, Clone)]
pub struct LineConfig {
    pub dim: usize,
    /// Edge samples per epoch equal the edge count.
    pub epochs: usize,
    pub negatives: usize,
    pub lr0: f64,
    pub seed: u64,
}

impl Default for LineConfig {
    fn default() -> Self {
        LineConfig {
            dim: 64,
            epochs: 30,
            negatives: 5,
            lr0: 0.025,
            seed: 42,
        }
    }
}

/// Weighted discrete sampler (Vose alias method).
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> AliasTable {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        assert!(n > 0 && total > 0.0, "alias table needs positive weights");
        let scale = n as f64 / total;
        let mut prob: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias = vec![0u32; n];
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s as usize] = l;
            prob[l as usize] -= 1.0 - prob[s as usize];
            if prob[l as usize] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &i in small.iter().chain(large.iter()) {
            prob[i as usize] = 1.0;
        }
        AliasTable { prob, alias }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Embeds graph nodes into `dim`-dimensional vectors. An edgeless graph
/// keeps the random initialization (logged as a warning).
pub fn embed_graph(graph: &RelationalGraph, cfg: &LineConfig) -> Vec<Vec<f64>> {
    let n = graph.n_nodes;
    let mut rng = rng::chacha(cfg.seed, 0x11e);
    let mut emb: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..cfg.dim)
                .map(|_| (rng.random::<f64>() - 0.5) / cfg.dim as f64)
                .collect()
        })
        .collect();
    if graph.edges.is_empty() {
        log::warn!("relational graph has no edges; embeddings stay at initialization");
        return emb;
    }
    let weights: Vec<f64> = graph.edges.iter().map(|&(_, _, w)| w).collect();
    let table = AliasTable::new(&weights);
    let total = cfg.epochs * graph.edges.len();
    let lr_floor = 1e-4;
    for t in 0..total {
        let lr = (cfg.lr0 * (1.0 - t as f64 / total as f64)).max(lr_floor);
        let (mut a, mut b, _) = graph.edges[table.sample(&mut rng)];
        if rng.random::<bool>() {
            std::mem::swap(&mut a, &mut b);
        }
        let (a, b) = (a as usize, b as usize);
        // Positive pull on both endpoints.
        let za: Vec<f64> = emb[a].clone();
        {
            let g = (1.0 - sigmoid(dot(&za, &emb[b]))) * lr;
            for d in 0..cfg.dim {
                let zb_d = emb[b][d];
                emb[a][d] += g * zb_d;
                emb[b][d] += g * za[d];
            }
        }
        // Uniform negatives, excluding the endpoints; push only the center.
        for _ in 0..cfg.negatives {
            let mut v = rng.random_range(0..n);
            let mut tries = 0;
            while (v == a || v == b) && tries < 8 {
                v = rng.random_range(0..n);
                tries += 1;
            }
            if v == a || v == b {
                continue;
            }
            let g = -sigmoid(dot(&emb[a], &emb[v])) * lr;
            for d in 0..cfg.dim {
                let zv_d = emb[v][d];
                let za_d = emb[a][d];
                emb[a][d] += g * zv_d;
                emb[v][d] += g * za_d;
            }
        }
    }
    emb
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
