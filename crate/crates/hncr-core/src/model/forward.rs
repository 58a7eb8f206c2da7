//! Forward pass of the recommender: distance-softmax attention,
//! tangent-space neighborhood aggregation, the layered tower, the
//! Fermi-Dirac decoder, and the triplet cross-entropy loss.
//!
//! Everything is generic over [`Value`], so one body serves both the
//! plain evaluation path (scoring, finite differences) and the tape
//! path (training gradients). Parameter access goes through
//! [`ParamFetch`] so the same code reads `ModelParams`, registers tape
//! leaves, or slices a flat vector during gradient checks.

use std::collections::HashMap;

use crate::autodiff::{Tape, Var};
use crate::data::InteractionMatrix;
use crate::model::geometry::Geometry;
use crate::model::params::{Ablation, HyperParams, ModelParams, ParamKind};
use crate::neighbors::{NeighborError, NeighborSets, Side};
use crate::num::{Real, Value};

/// Probability floor/ceiling applied before the loss logarithms.
pub const PROB_EPS: f64 = 1e-12;

/// Scalar-typed copy of the hyperparameters the forward pass needs.
#[derive(Debug, Clone, Copy)]
pub struct ForwardCfg<S: Real> {
    pub geo: Geometry<S>,
    pub tau: S,
    pub radius: S,
    pub decoder_t: S,
    pub layers: usize,
    pub ablation: Ablation,
}

impl<S: Real> ForwardCfg<S> {
    pub fn from_hyper(h: &HyperParams) -> Self {
        ForwardCfg {
            geo: h.geometry(),
            tau: S::real(h.temperature),
            radius: S::real(h.radius),
            decoder_t: S::real(h.decoder_t),
            layers: h.layers,
            ablation: h.ablation,
        }
    }
}

/// Static structure the towers read: semantic neighbor ids per node and
/// train-split interaction lists per node.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub user_neighbors: Vec<Vec<u32>>,
    pub item_neighbors: Vec<Vec<u32>>,
    pub user_history: Vec<Vec<u32>>,
    pub item_history: Vec<Vec<u32>>,
}

impl ModelContext {
    pub fn new(
        train: &InteractionMatrix,
        users: &NeighborSets,
        items: &NeighborSets,
    ) -> Result<Self, NeighborError> {
        users.validate(train.user_items.len())?;
        items.validate(train.item_users.len())?;
        Ok(ModelContext {
            user_neighbors: users.lists.clone(),
            item_neighbors: items.lists.clone(),
            user_history: train.user_items.clone(),
            item_history: train.item_users.clone(),
        })
    }

    /// Context with empty semantic neighbor lists (history only).
    pub fn without_semantic(train: &InteractionMatrix) -> Self {
        ModelContext {
            user_neighbors: vec![Vec::new(); train.user_items.len()],
            item_neighbors: vec![Vec::new(); train.item_users.len()],
            user_history: train.user_items.clone(),
            item_history: train.item_users.clone(),
        }
    }

    pub fn n_users(&self) -> usize {
        self.user_history.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_history.len()
    }
}

/// Source of parameter values for one forward evaluation.
pub trait ParamFetch<S: Real> {
    type V: Value<S>;

    fn fetch(&mut self, kind: ParamKind, idx: usize) -> Vec<Self::V>;
}

/// Reads values straight out of `ModelParams`.
pub struct PlainFetch<'p, S: Real> {
    pub params: &'p ModelParams<S>,
}

impl<S: Real> ParamFetch<S> for PlainFetch<'_, S> {
    type V = S;

    fn fetch(&mut self, kind: ParamKind, idx: usize) -> Vec<S> {
        self.params.get(kind, idx).to_vec()
    }
}

/// Registers each touched parameter once as a tape leaf group and hands
/// out the cached variables on repeat access, so gradients for repeated
/// appearances accumulate on one group.
pub struct TapeFetch<'p, 't, S: Real> {
    params: &'p ModelParams<S>,
    tape: &'t Tape<S>,
    cache: HashMap<(ParamKind, usize), Vec<Var<'t, S>>>,
}

impl<'p, 't, S: Real> TapeFetch<'p, 't, S> {
    pub fn new(params: &'p ModelParams<S>, tape: &'t Tape<S>) -> Self {
        TapeFetch {
            params,
            tape,
            cache: HashMap::new(),
        }
    }
}

impl<'t, S: Real> ParamFetch<S> for TapeFetch<'_, 't, S> {
    type V = Var<'t, S>;

    fn fetch(&mut self, kind: ParamKind, idx: usize) -> Vec<Var<'t, S>> {
        self.cache
            .entry((kind, idx))
            .or_insert_with(|| {
                self.tape
                    .leaf_vec(super::params::param_id(kind, idx), self.params.get(kind, idx))
            })
            .clone()
    }
}

/// Offsets of each parameter family inside the flat vector produced by
/// [`ModelParams::flatten`].
#[derive(Debug, Clone, Copy)]
pub struct FlatLayout {
    pub n_users: usize,
    pub n_items: usize,
    pub dim: usize,
    pub layers: usize,
}

impl FlatLayout {
    pub fn of<S: Real>(p: &ModelParams<S>) -> Self {
        FlatLayout {
            n_users: p.n_users(),
            n_items: p.n_items(),
            dim: p.dim,
            layers: p.layers,
        }
    }

    fn range(&self, kind: ParamKind, idx: usize) -> std::ops::Range<usize> {
        let (m, n, d, l) = (self.n_users, self.n_items, self.dim, self.layers);
        let (base, stride) = match kind {
            ParamKind::UserEmb => (0, d),
            ParamKind::ItemEmb => (m * d, d),
            ParamKind::UserMat => ((m + n) * d, d * d),
            ParamKind::ItemMat => ((m + n) * d + l * d * d, d * d),
            ParamKind::UserBias => ((m + n) * d + 2 * l * d * d, d),
            ParamKind::ItemBias => ((m + n) * d + 2 * l * d * d + l * d, d),
        };
        let start = base + idx * stride;
        start..start + stride
    }
}

/// Slices a flattened parameter vector; used by the whole-model
/// gradient check, whose probe owns the flat layout.
pub struct FlatFetch<'a, V> {
    pub flat: &'a [V],
    pub layout: FlatLayout,
}

impl<S: Real, V: Value<S>> ParamFetch<S> for FlatFetch<'_, V> {
    type V = V;

    fn fetch(&mut self, kind: ParamKind, idx: usize) -> Vec<V> {
        self.flat[self.layout.range(kind, idx)].to_vec()
    }
}

/// Distance-softmax attention over candidate points: softmax of
/// `−d(anchor, candidate)/τ`. The max-score shift is a constant, so it
/// changes neither the value nor the derivative. `uniform` replaces the
/// whole distribution by 1/n.
pub fn attention_weights<S: Real, V: Value<S>>(
    geo: Geometry<S>,
    anchor: &[V],
    candidates: &[Vec<V>],
    tau: S,
    uniform: bool,
) -> Vec<V> {
    if candidates.is_empty() {
        return Vec::new();
    }
    if uniform {
        let w = S::one() / S::real(candidates.len() as f64);
        return candidates.iter().map(|_| anchor[0].lit(w)).collect();
    }
    let scores: Vec<V> = candidates
        .iter()
        .map(|c| -(geo.distance(anchor, c) / tau))
        .collect();
    let max = scores
        .iter()
        .map(|s| s.value())
        .fold(S::neg_infinity(), S::max);
    let exps: Vec<V> = scores.iter().map(|&s| (s - max).exp()).collect();
    let mut total = exps[0];
    for &e in &exps[1..] {
        total = total + e;
    }
    exps.into_iter().map(|e| e / total).collect()
}

/// Tangent-space aggregation: the anchor's log-map plus the weighted
/// log-maps of both neighbor groups, mapped back through `exp₀`.
pub fn aggregate<S: Real, V: Value<S>>(
    geo: Geometry<S>,
    anchor: &[V],
    semantic: &[Vec<V>],
    semantic_w: &[V],
    history: &[Vec<V>],
    history_w: &[V],
) -> Vec<V> {
    let mut tangent = geo.log0(anchor);
    for (group, weights) in [(semantic, semantic_w), (history, history_w)] {
        for (x, &w) in group.iter().zip(weights) {
            for (t, &l) in tangent.iter_mut().zip(&geo.log0(x)) {
                *t = *t + w * l;
            }
        }
    }
    geo.exp0(&tangent)
}

/// One tower layer: `σ_M(M ⊗ (x ⊕ b))` with the pointwise LeakyReLU
/// activation conjugated through the origin maps.
pub fn layer_forward<S: Real, V: Value<S>>(
    geo: Geometry<S>,
    x: &[V],
    mat: &[V],
    bias: &[V],
) -> Vec<V> {
    let shifted = geo.add(x, bias);
    let mapped = geo.matvec(mat, x.len(), &shifted);
    geo.activation(&mapped)
}

fn side_kinds(side: Side) -> (ParamKind, ParamKind, ParamKind, ParamKind) {
    match side {
        Side::User => (
            ParamKind::UserEmb,
            ParamKind::ItemEmb,
            ParamKind::UserMat,
            ParamKind::UserBias,
        ),
        Side::Item => (
            ParamKind::ItemEmb,
            ParamKind::UserEmb,
            ParamKind::ItemMat,
            ParamKind::ItemBias,
        ),
    }
}

/// Full tower for one node: aggregate semantic neighbors (same side)
/// and interaction history (opposite side) around the anchor embedding,
/// then apply the layer stack.
pub fn tower<S: Real, F: ParamFetch<S>>(
    cfg: &ForwardCfg<S>,
    f: &mut F,
    ctx: &ModelContext,
    side: Side,
    id: u32,
) -> Vec<F::V> {
    let (anchor_kind, opposite_kind, mat_kind, bias_kind) = side_kinds(side);
    let (neighbors, history) = match side {
        Side::User => (&ctx.user_neighbors[id as usize], &ctx.user_history[id as usize]),
        Side::Item => (&ctx.item_neighbors[id as usize], &ctx.item_history[id as usize]),
    };
    let anchor = f.fetch(anchor_kind, id as usize);

    let semantic: Vec<Vec<F::V>> = if cfg.ablation.no_semantic {
        Vec::new()
    } else {
        neighbors
            .iter()
            .map(|&n| f.fetch(anchor_kind, n as usize))
            .collect()
    };
    let history: Vec<Vec<F::V>> = if cfg.ablation.no_history {
        Vec::new()
    } else {
        history
            .iter()
            .map(|&n| f.fetch(opposite_kind, n as usize))
            .collect()
    };
    let uniform = cfg.ablation.uniform_attention;
    let sem_w = attention_weights(cfg.geo, &anchor, &semantic, cfg.tau, uniform);
    let hist_w = attention_weights(cfg.geo, &anchor, &history, cfg.tau, uniform);

    let mut x = aggregate(cfg.geo, &anchor, &semantic, &sem_w, &history, &hist_w);
    for l in 0..cfg.layers {
        let mat = f.fetch(mat_kind, l);
        let bias = f.fetch(bias_kind, l);
        x = layer_forward(cfg.geo, &x, &mat, &bias);
    }
    x
}

/// Fermi-Dirac decoder `1/(exp((d − r)/t) + 1)`, evaluated through the
/// overflow-free sigmoid branches.
pub fn predict_score<S: Real, V: Value<S>>(geo: Geometry<S>, u: &[V], v: &[V], r: S, t: S) -> V {
    let z = (geo.distance(u, v) - r) / t;
    if z.value() >= S::zero() {
        let w = (-z).exp();
        w / (w + S::one())
    } else {
        let w = z.exp();
        w.lit(S::one()) / (w + S::one())
    }
}

/// Cross-entropy of one triplet: `−[ln ŷ⁺ + ln(1 − ŷ⁻)]`, with both
/// probabilities clamped away from {0, 1} first.
pub fn triplet_loss_term<S: Real, V: Value<S>>(y_pos: V, y_neg: V) -> V {
    let lo = S::real(PROB_EPS);
    let hi = S::one() - S::real(PROB_EPS);
    let p = y_pos.clamp_box(lo, hi);
    let q = y_neg.clamp_box(lo, hi);
    -(p.ln() + (-q + S::one()).ln())
}

/// Loss contribution of one `(user, positive, negative)` triplet.
pub fn triplet_objective<S: Real, F: ParamFetch<S>>(
    cfg: &ForwardCfg<S>,
    f: &mut F,
    ctx: &ModelContext,
    user: u32,
    pos: u32,
    neg: u32,
) -> F::V {
    let ut = tower(cfg, f, ctx, Side::User, user);
    let pt = tower(cfg, f, ctx, Side::Item, pos);
    let nt = tower(cfg, f, ctx, Side::Item, neg);
    let y_pos = predict_score(cfg.geo, &ut, &pt, cfg.radius, cfg.decoder_t);
    let y_neg = predict_score(cfg.geo, &ut, &nt, cfg.radius, cfg.decoder_t);
    triplet_loss_term(y_pos, y_neg)
}

/// Sum of triplet losses over a batch.
pub fn batch_loss<S: Real, F: ParamFetch<S>>(
    cfg: &ForwardCfg<S>,
    f: &mut F,
    ctx: &ModelContext,
    triplets: &[(u32, u32, u32)],
) -> F::V {
    assert!(!triplets.is_empty());
    let mut total: Option<F::V> = None;
    for &(u, p, n) in triplets {
        let term = triplet_objective(cfg, f, ctx, u, p, n);
        total = Some(match total {
            Some(t) => t + term,
            None => term,
        });
    }
    total.unwrap()
}

/// Plain-value tower of one user.
pub fn user_tower_values<S: Real>(
    cfg: &ForwardCfg<S>,
    params: &ModelParams<S>,
    ctx: &ModelContext,
    user: u32,
) -> Vec<S> {
    tower(cfg, &mut PlainFetch { params }, ctx, Side::User, user)
}

/// Plain-value tower of one item.
pub fn item_tower_values<S: Real>(
    cfg: &ForwardCfg<S>,
    params: &ModelParams<S>,
    ctx: &ModelContext,
    item: u32,
) -> Vec<S> {
    tower(cfg, &mut PlainFetch { params }, ctx, Side::Item, item)
}

/// All towers of one side, parallel over nodes (outputs are indexed, so
/// thread count cannot affect the result).
pub fn all_towers<S: Real>(
    cfg: &ForwardCfg<S>,
    params: &ModelParams<S>,
    ctx: &ModelContext,
    side: Side,
) -> Vec<Vec<S>> {
    use rayon::prelude::*;
    let n = match side {
        Side::User => ctx.n_users(),
        Side::Item => ctx.n_items(),
    };
    (0..n as u32)
        .into_par_iter()
        .map(|id| tower(cfg, &mut PlainFetch { params }, ctx, side, id))
        .collect()
}

/// Decoder probability for two precomputed towers.
pub fn score_from_towers<S: Real>(cfg: &ForwardCfg<S>, ut: &[S], vt: &[S]) -> S {
    predict_score(cfg.geo, ut, vt, cfg.radius, cfg.decoder_t)
}

/// Whole-model loss over a fixed triplet set as a function of the
/// flattened parameter vector; the probe used by the gradient check.
pub struct FlatModelLoss<'a> {
    pub cfg: ForwardCfg<f64>,
    pub ctx: &'a ModelContext,
    pub layout: FlatLayout,
    pub triplets: Vec<(u32, u32, u32)>,
}

impl FlatModelLoss<'_> {
    fn eval_generic<V: Value<f64>>(&self, flat: &[V]) -> V {
        let mut f = FlatFetch {
            flat,
            layout: self.layout,
        };
        batch_loss(&self.cfg, &mut f, self.ctx, &self.triplets)
    }
}

impl crate::autodiff::LossFn<f64> for FlatModelLoss<'_> {
    fn eval_plain(&self, theta: &[f64]) -> f64 {
        self.eval_generic(theta)
    }

    fn eval_tape<'t>(&self, _tape: &'t Tape<f64>, theta: &[Var<'t, f64>]) -> Var<'t, f64> {
        self.eval_generic(theta)
    }
}
