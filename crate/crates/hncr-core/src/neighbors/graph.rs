//! Relational graphs over users (and symmetrically items).
//!
//! Two users are connected iff they engaged at least one common item.
//! The default edge weight multiplies a heat kernel on the squared
//! distance of the binary interaction rows — which for 0/1 rows is
//! `deg(a) + deg(b) − 2·|common|` — by a popularity factor
//! `(2/|common|)·Σ 1/popularity(shared counterpart)`, so ties through
//! niche counterparts weigh more than ties through blockbusters.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::InteractionMatrix;

/// Heat-kernel temperature for the row-distance term.
pub const HEAT_TIME: f64 = 100.0;

/// Edge weighting scheme; the config tokens are `paper`, `common`, `none`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightMode {
    /// Heat kernel × inverse-popularity factor (the default).
    HeatPopularity,
    /// Raw common-counterpart count.
    CommonCount,
    /// Every co-engagement edge weighs 1.
    Unweighted,
}

impl WeightMode {
    pub fn token(self) -> &'static str {
        match self {
            WeightMode::HeatPopularity => "paper",
            WeightMode::CommonCount => "common",
            WeightMode::Unweighted => "none",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "paper" => Some(WeightMode::HeatPopularity),
            "common" => Some(WeightMode::CommonCount),
            "none" => Some(WeightMode::Unweighted),
            _ => None,
        }
    }
}

/// Undirected weighted graph; each edge stored once with `a < b` and
/// positive weight, no self-loops.
#[derive(Debug, Clone)]
pub struct RelationalGraph {
    pub n_nodes: usize,
    pub edges: Vec<(u32, u32, f64)>,
}

impl RelationalGraph {
    pub fn adjacency(&self) -> Vec<Vec<(u32, f64)>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(a, b, w) in &self.edges {
            adj[a as usize].push((b, w));
            adj[b as usize].push((a, w));
        }
        for l in &mut adj {
            l.sort_unstable_by_key(|&(n, _)| n);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n_nodes];
        for &(a, b, _) in &self.edges {
            deg[a as usize] += 1;
            deg[b as usize] += 1;
        }
        deg
    }
}

pub fn build_user_graph(matrix: &InteractionMatrix, mode: WeightMode) -> RelationalGraph {
    build_graph(&matrix.user_items, &matrix.item_users, mode)
}

pub fn build_item_graph(matrix: &InteractionMatrix, mode: WeightMode) -> RelationalGraph {
    build_graph(&matrix.item_users, &matrix.user_items, mode)
}

/// `rows[a]` lists the counterparts each anchor engaged; `cols[i]` the
/// anchors engaging counterpart `i`. Anchors sharing a counterpart get an
/// edge.
fn build_graph(rows: &[Vec<u32>], cols: &[Vec<u32>], mode: WeightMode) -> RelationalGraph {
    let n = rows.len();
    let per_anchor: Vec<Vec<(u32, u32, f64)>> = (0..n)
        .into_par_iter()
        .map(|a| {
            // For every co-anchor b > a: common count and Σ 1/popularity.
            let mut acc: std::collections::HashMap<u32, (u32, f64)> = std::collections::HashMap::new();
            for &i in &rows[a] {
                let pop = cols[i as usize].len() as f64;
                for &b in &cols[i as usize] {
                    if (b as usize) > a {
                        let e = acc.entry(b).or_insert((0, 0.0));
                        e.0 += 1;
                        e.1 += 1.0 / pop;
                    }
                }
            }
            let deg_a = rows[a].len() as f64;
            let mut edges: Vec<(u32, u32, f64)> = acc
                .into_iter()
                .map(|(b, (cnt, inv_pop))| {
                    let w = match mode {
                        WeightMode::HeatPopularity => {
                            let deg_b = rows[b as usize].len() as f64;
                            let row_dist_sq = deg_a + deg_b - 2.0 * cnt as f64;
                            let heat = (-row_dist_sq / HEAT_TIME).exp();
                            let popularity = 2.0 * inv_pop / cnt as f64;
                            heat * popularity
                        }
                        WeightMode::CommonCount => cnt as f64,
                        WeightMode::Unweighted => 1.0,
                    };
                    (a as u32, b, w)
                })
                .collect();
            edges.sort_unstable_by_key(|&(_, b, _)| b);
            edges
        })
        .collect();
    RelationalGraph {
        n_nodes: n,
        edges: per_anchor.into_iter().flatten().collect(),
    }
}
