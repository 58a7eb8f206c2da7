//! Model parameters, hyperparameters, initialization, and checkpoints.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::ParamId;
use crate::model::geometry::{Backend, Geometry};
use crate::num::Real;
use crate::rng;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("corrupt checkpoint {path}: {reason}")]
    CorruptCheckpoint { path: String, reason: String },
    #[error("checkpoint {path} has version {found}, expected {expected}")]
    CheckpointVersion {
        path: String,
        found: u32,
        expected: u32,
    },
    #[error("invalid hyperparameters: {0}")]
    BadHyper(String),
}

/// Which of the six parameter families a [`ParamId`] refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamKind {
    UserEmb = 0,
    ItemEmb = 1,
    UserMat = 2,
    ItemMat = 3,
    UserBias = 4,
    ItemBias = 5,
}

/// Stable tape identity of parameter `idx` within family `kind`.
pub fn param_id(kind: ParamKind, idx: usize) -> ParamId {
    ParamId(((kind as u64) << 32) | idx as u64)
}

/// Inverse of [`param_id`].
pub fn decode_param_id(id: ParamId) -> (ParamKind, usize) {
    let kind = match id.0 >> 32 {
        0 => ParamKind::UserEmb,
        1 => ParamKind::ItemEmb,
        2 => ParamKind::UserMat,
        3 => ParamKind::ItemMat,
        4 => ParamKind::UserBias,
        _ => ParamKind::ItemBias,
    };
    (kind, (id.0 & 0xffff_ffff) as usize)
}

/// Aggregator ablation switches.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Drop the semantic-neighbor sum from aggregation.
    pub no_semantic: bool,
    /// Drop the interaction-history sum from aggregation.
    pub no_history: bool,
    /// Replace attention with uniform 1/n weights.
    pub uniform_attention: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub backend: Backend,
    /// Embedding size d.
    pub dim: usize,
    /// Hidden layers L.
    pub layers: usize,
    /// Attention temperature τ.
    pub temperature: f64,
    /// Ball curvature c (hyperbolic backend only).
    pub curvature: f64,
    /// Fermi-Dirac decoder radius r.
    pub radius: f64,
    /// Fermi-Dirac decoder temperature t.
    pub decoder_t: f64,
    /// Semantic neighbors per user.
    pub k_users: usize,
    /// Semantic neighbors per item.
    pub k_items: usize,
    /// Learning rate η.
    pub lr: f64,
    /// Triplets per optimizer step.
    pub batch: usize,
    pub epochs: usize,
    /// Early-stopping patience in epochs without validation improvement.
    pub patience: usize,
    pub seed: u64,
    pub ablation: Ablation,
}

impl HyperParams {
    /// Published defaults; the layer count is the per-backend best
    /// (one hyperbolic layer, two Euclidean).
    pub fn defaults(backend: Backend) -> Self {
        HyperParams {
            backend,
            dim: 64,
            layers: match backend {
                Backend::Hyperbolic => 1,
                Backend::Euclidean => 2,
            },
            temperature: 0.1,
            curvature: 1.0,
            radius: 2.0,
            decoder_t: 1.0,
            k_users: 15,
            k_items: 15,
            lr: 1e-3,
            batch: 1024,
            epochs: 100,
            patience: 10,
            seed: 42,
            ablation: Ablation::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim < 1 {
            return Err(ModelError::BadHyper("dim must be ≥ 1".into()));
        }
        if !(self.temperature > 0.0) {
            return Err(ModelError::BadHyper("temperature must be > 0".into()));
        }
        if !(self.decoder_t > 0.0) {
            return Err(ModelError::BadHyper("decoder_t must be > 0".into()));
        }
        if self.backend == Backend::Hyperbolic && !(self.curvature > 0.0) {
            return Err(ModelError::BadHyper(
                "curvature must be > 0 on the hyperbolic backend".into(),
            ));
        }
        if self.batch < 1 {
            return Err(ModelError::BadHyper("batch must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn geometry<S: Real>(&self) -> Geometry<S> {
        Geometry::new(self.backend, S::real(self.curvature))
    }
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams::defaults(Backend::Hyperbolic)
    }
}

/// All learned state: per-id point embeddings, per-layer linear maps
/// (row-major d×d), and per-layer point biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct ModelParams<S: Real> {
    pub dim: usize,
    pub layers: usize,
    pub user_emb: Vec<Vec<S>>,
    pub item_emb: Vec<Vec<S>>,
    pub user_mats: Vec<Vec<S>>,
    pub item_mats: Vec<Vec<S>>,
    pub user_biases: Vec<Vec<S>>,
    pub item_biases: Vec<Vec<S>>,
}

impl<S: Real> ModelParams<S> {
    pub fn n_users(&self) -> usize {
        self.user_emb.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_emb.len()
    }

    pub fn get(&self, kind: ParamKind, idx: usize) -> &[S] {
        match kind {
            ParamKind::UserEmb => &self.user_emb[idx],
            ParamKind::ItemEmb => &self.item_emb[idx],
            ParamKind::UserMat => &self.user_mats[idx],
            ParamKind::ItemMat => &self.item_mats[idx],
            ParamKind::UserBias => &self.user_biases[idx],
            ParamKind::ItemBias => &self.item_biases[idx],
        }
    }

    pub fn get_mut(&mut self, kind: ParamKind, idx: usize) -> &mut Vec<S> {
        match kind {
            ParamKind::UserEmb => &mut self.user_emb[idx],
            ParamKind::ItemEmb => &mut self.item_emb[idx],
            ParamKind::UserMat => &mut self.user_mats[idx],
            ParamKind::ItemMat => &mut self.item_mats[idx],
            ParamKind::UserBias => &mut self.user_biases[idx],
            ParamKind::ItemBias => &mut self.item_biases[idx],
        }
    }

    pub fn param_count(&self) -> usize {
        let point = |v: &Vec<Vec<S>>| v.iter().map(Vec::len).sum::<usize>();
        point(&self.user_emb)
            + point(&self.item_emb)
            + point(&self.user_mats)
            + point(&self.item_mats)
            + point(&self.user_biases)
            + point(&self.item_biases)
    }

    /// Concatenates every family in declaration order; inverse of
    /// [`ModelParams::unflatten_into`].
    pub fn flatten(&self) -> Vec<S> {
        let mut out = Vec::with_capacity(self.param_count());
        for family in [
            &self.user_emb,
            &self.item_emb,
            &self.user_mats,
            &self.item_mats,
            &self.user_biases,
            &self.item_biases,
        ] {
            for v in family {
                out.extend_from_slice(v);
            }
        }
        out
    }

    /// Writes a flat vector produced by [`ModelParams::flatten`] back
    /// into the same shapes.
    pub fn unflatten_into(&mut self, flat: &[S]) {
        assert_eq!(flat.len(), self.param_count());
        let mut off = 0;
        for family in [
            &mut self.user_emb,
            &mut self.item_emb,
            &mut self.user_mats,
            &mut self.item_mats,
            &mut self.user_biases,
            &mut self.item_biases,
        ] {
            for v in family.iter_mut() {
                let len = v.len();
                v.copy_from_slice(&flat[off..off + len]);
                off += len;
            }
        }
    }
}

/// Draws initial parameters: point-valued families uniform per
/// coordinate in ±10⁻³ (near the origin, inside any reasonable ball),
/// linear maps uniform in ±1/√d. Deterministic per seed.
pub fn init_params<S: Real>(
    geo: Geometry<S>,
    n_users: usize,
    n_items: usize,
    dim: usize,
    layers: usize,
    seed: u64,
) -> ModelParams<S> {
    let mut r = rng::chacha(seed, rng::tag::INIT);
    let mut draw = |n: usize, scale: f64, constrain: bool| -> Vec<Vec<S>> {
        (0..n)
            .map(|_| {
                let v: Vec<S> = (0..if constrain { dim } else { dim * dim })
                    .map(|_| S::real((r.random::<f64>() * 2.0 - 1.0) * scale))
                    .collect();
                if constrain {
                    geo.constrain(&v)
                } else {
                    v
                }
            })
            .collect()
    };
    let mat_scale = 1.0 / (dim as f64).sqrt();
    ModelParams {
        dim,
        layers,
        user_emb: draw(n_users, 1e-3, true),
        item_emb: draw(n_items, 1e-3, true),
        user_mats: draw(layers, mat_scale, false),
        item_mats: draw(layers, mat_scale, false),
        user_biases: draw(layers, 1e-3, true),
        item_biases: draw(layers, 1e-3, true),
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk training state: everything needed to score pairs again.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub hyper: HyperParams,
    pub params: ModelParams<f64>,
}

pub fn save_checkpoint(
    path: &Path,
    hyper: &HyperParams,
    params: &ModelParams<f64>,
) -> Result<(), ModelError> {
    let io_err = |source| ModelError::Io {
        path: path.display().to_string(),
        source,
    };
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        hyper: hyper.clone(),
        params: params.clone(),
    };
    let f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    serde_json::to_writer(f, &ckpt).map_err(|e| ModelError::CorruptCheckpoint {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, ModelError> {
    let f = std::fs::File::open(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let ckpt: Checkpoint = serde_json::from_reader(std::io::BufReader::new(f)).map_err(|e| {
        ModelError::CorruptCheckpoint {
            path: path.display().to_string(),
            reason: e.to_string(),
        }
    })?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(ModelError::CheckpointVersion {
            path: path.display().to_string(),
            found: ckpt.version,
            expected: CHECKPOINT_VERSION,
        });
    }
    Ok(ckpt)
}
