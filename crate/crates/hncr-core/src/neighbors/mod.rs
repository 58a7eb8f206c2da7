//! Semantic-neighbor construction.
//!
//! Pipeline: co-engagement relational graph → first-order latent
//! embedding → exact k-NN in the latent space. The resulting neighbor
//! sets feed the recommender towers. A co-occurrence variant skips the
//! embedding and ranks direct graph neighbors by edge weight.

pub mod graph;
pub mod knn;
pub mod line;

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use graph::{build_item_graph, build_user_graph, RelationalGraph, WeightMode, HEAT_TIME};
pub use knn::{knn, knn_blocked};
pub use line::{embed_graph, AliasTable, LineConfig};

#[derive(Debug, Error)]
pub enum NeighborError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt neighbor file {path}: {reason}")]
    Corrupt { path: String, reason: String },
    #[error("neighbor sets cover {have} nodes but the dataset has {want}")]
    NodeCountMismatch { have: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    User,
    Item,
}

impl Side {
    pub fn token(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "user" => Some(Side::User),
            "item" => Some(Side::Item),
            _ => None,
        }
    }
}

/// Per-node neighbor id lists plus the provenance needed to reproduce
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborSets {
    pub side: Side,
    pub k: usize,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub lists: Vec<Vec<u32>>,
}

impl NeighborSets {
    pub fn validate(&self, n_nodes: usize) -> Result<(), NeighborError> {
        if self.lists.len() != n_nodes {
            return Err(NeighborError::NodeCountMismatch {
                have: self.lists.len(),
                want: n_nodes,
            });
        }
        Ok(())
    }
}

/// Embedding plus the neighbor sets derived from it.
#[derive(Debug, Clone)]
pub struct SemanticArtifacts {
    pub sets: NeighborSets,
    pub latents: Vec<Vec<f64>>,
}

/// Full semantic path: embed the relational graph, then take each
/// node's `k` nearest latents.
pub fn semantic_neighbors(
    graph: &RelationalGraph,
    side: Side,
    weight_mode: WeightMode,
    line_cfg: &LineConfig,
    k: usize,
) -> SemanticArtifacts {
    let latents = embed_graph(graph, line_cfg);
    let lists = knn(&latents, k);
    SemanticArtifacts {
        sets: NeighborSets {
            side,
            k,
            seed: line_cfg.seed,
            weight_mode,
            lists,
        },
        latents,
    }
}

/// Direct graph neighbors ranked by descending edge weight (ties by
/// smaller id); nodes with fewer than `k` co-engagers get shorter lists.
pub fn cooccurrence_neighbors(
    graph: &RelationalGraph,
    side: Side,
    weight_mode: WeightMode,
    seed: u64,
    k: usize,
) -> NeighborSets {
    let adj = graph.adjacency();
    let lists = adj
        .into_iter()
        .map(|mut l| {
            l.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            l.truncate(k);
            l.into_iter().map(|(n, _)| n).collect()
        })
        .collect();
    NeighborSets {
        side,
        k,
        seed,
        weight_mode,
        lists,
    }
}

/// Writes the `side K seed weight_mode` header followed by one
/// `node_id: n₁ n₂ …` line per node.
pub fn save_neighbor_sets(path: &Path, sets: &NeighborSets) -> Result<(), NeighborError> {
    let io_err = |source| NeighborError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    (|| {
        writeln!(
            f,
            "{} {} {} {}",
            sets.side.token(),
            sets.k,
            sets.seed,
            sets.weight_mode.token()
        )?;
        for (node, l) in sets.lists.iter().enumerate() {
            write!(f, "{node}:")?;
            for n in l {
                write!(f, " {n}")?;
            }
            writeln!(f)?;
        }
        f.flush()
    })()
    .map_err(io_err)
}

pub fn load_neighbor_sets(path: &Path) -> Result<NeighborSets, NeighborError> {
    let corrupt = |reason: String| NeighborError::Corrupt {
        path: path.display().to_string(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|source| NeighborError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| corrupt("empty file".into()))?
        .map_err(|e| corrupt(e.to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 4 {
        return Err(corrupt(format!("header `{header}` is not `side K seed weight_mode`")));
    }
    let side = Side::from_token(fields[0])
        .ok_or_else(|| corrupt(format!("unknown side `{}`", fields[0])))?;
    let k: usize = fields[1]
        .parse()
        .map_err(|_| corrupt(format!("bad K `{}`", fields[1])))?;
    let seed: u64 = fields[2]
        .parse()
        .map_err(|_| corrupt(format!("bad seed `{}`", fields[2])))?;
    let weight_mode = WeightMode::from_token(fields[3])
        .ok_or_else(|| corrupt(format!("unknown weight mode `{}`", fields[3])))?;
    let mut lists = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| corrupt(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let (id_part, rest) = line
            .split_once(':')
            .ok_or_else(|| corrupt(format!("line {}: missing `:`", lineno + 2)))?;
        let id: usize = id_part
            .trim()
            .parse()
            .map_err(|_| corrupt(format!("line {}: bad node id `{id_part}`", lineno + 2)))?;
        if id != lists.len() {
            return Err(corrupt(format!(
                "line {}: expected node {} but found {}",
                lineno + 2,
                lists.len(),
                id
            )));
        }
        let l: Result<Vec<u32>, _> = rest.split_whitespace().map(str::parse).collect();
        lists.push(l.map_err(|_| corrupt(format!("line {}: bad neighbor id", lineno + 2)))?);
    }
    Ok(NeighborSets {
        side,
        k,
        seed,
        weight_mode,
        lists,
    })
}

/// Latent dump: one `id v₁ v₂ … v_l` line per node, full precision.
pub fn save_latents(path: &Path, latents: &[Vec<f64>]) -> Result<(), NeighborError> {
    let io_err = |source| NeighborError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    (|| {
        for (id, v) in latents.iter().enumerate() {
            write!(f, "{id}")?;
            for x in v {
                write!(f, " {x}")?;
            }
            writeln!(f)?;
        }
        f.flush()
    })()
    .map_err(io_err)
}

pub fn load_latents(path: &Path) -> Result<Vec<Vec<f64>>, NeighborError> {
    let corrupt = |reason: String| NeighborError::Corrupt {
        path: path.display().to_string(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|source| NeighborError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut latents = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| corrupt(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id: usize = fields
            .next()
            .unwrap()
            .parse()
            .map_err(|_| corrupt(format!("line {}: bad id", lineno + 1)))?;
        if id != latents.len() {
            return Err(corrupt(format!(
                "line {}: expected node {} but found {}",
                lineno + 1,
                latents.len(),
                id
            )));
        }
        let v: Result<Vec<f64>, _> = fields.map(str::parse).collect();
        latents.push(v.map_err(|_| corrupt(format!("line {}: bad float", lineno + 1)))?);
    }
    Ok(latents)
}
