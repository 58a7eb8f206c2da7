//! Riemannian training: deterministic triplet sampling, per-triplet
//! tape gradients reduced in triplet order (so the thread count never
//! changes the result), RSGD updates with ball projection, and
//! validation-based early stopping.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use crate::autodiff::{ParamId, Tape};
use crate::data::LabeledPairs;
use crate::eval;
use crate::model::forward::{triplet_objective, ForwardCfg, ModelContext, TapeFetch};
use crate::model::geometry::Geometry;
use crate::model::params::{decode_param_id, HyperParams, ModelParams, ParamKind};
use crate::num::{Real, Value, EPS_BALL};
use crate::rng;

/// Triplets gradient-reduced per parallel slice; fixed so the reduction
/// order is a function of the batch alone.
const GRAD_CHUNK: usize = 64;

/// Per-epoch trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Mean triplet loss over the epoch.
    pub loss: f64,
    /// NaN when no validation split was given.
    pub val_auc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    CompletedAllEpochs,
    /// No validation improvement for `patience` epochs.
    EarlyStopped { at_epoch: usize },
    /// Loss became non-finite; the returned parameters are the last
    /// good ones (best validation if available, else the previous
    /// epoch's end state).
    Diverged { at_epoch: usize },
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<S: Real> {
    pub params: ModelParams<S>,
    pub trace: Vec<EpochMetrics>,
    /// Epoch whose validation AUC the returned parameters come from.
    pub best_epoch: Option<usize>,
    pub stop: StopReason,
}

/// Draws `batch` training triplets `(u, v⁺, ṽ)`: a uniform observed
/// pair plus a uniform unobserved item for that user. Deterministic per
/// `(seed, epoch, step)`; users who rated every item are resampled.
pub fn sample_triplets(
    pairs: &[(u32, u32)],
    train_user_items: &[Vec<u32>],
    n_items: usize,
    batch: usize,
    seed: u64,
    epoch: u64,
    step: u64,
) -> Vec<(u32, u32, u32)> {
    assert!(!pairs.is_empty(), "cannot sample from an empty train split");
    if pairs
        .iter()
        .all(|&(u, _)| train_user_items[u as usize].len() == n_items)
    {
        log::warn!("every train user rated every item; no negatives exist");
        return Vec::new();
    }
    let mut r = rng::chacha(rng::mix(seed, rng::tag::TRIPLETS), rng::mix(epoch, step));
    let mut out = Vec::with_capacity(batch);
    while out.len() < batch {
        let (u, v) = pairs[r.random_range(0..pairs.len())];
        let seen = &train_user_items[u as usize];
        if seen.len() == n_items {
            continue;
        }
        let neg = loop {
            let cand = r.random_range(0..n_items as u32);
            if seen.binary_search(&cand).is_err() {
                break cand;
            }
        };
        out.push((u, v, neg));
    }
    out
}

type GradMap<S> = BTreeMap<u64, Vec<S>>;

/// Loss sum and accumulated gradients of one batch. Triplets whose tape
/// holds a non-finite value are skipped and counted.
fn batch_gradients<S: Real>(
    cfg: &ForwardCfg<S>,
    params: &ModelParams<S>,
    ctx: &ModelContext,
    triplets: &[(u32, u32, u32)],
) -> (f64, GradMap<S>, usize) {
    let mut loss_sum = 0.0f64;
    let mut accum: GradMap<S> = BTreeMap::new();
    let mut skipped = 0usize;
    for chunk in triplets.chunks(GRAD_CHUNK) {
        let results: Vec<Result<(f64, Vec<(u64, Vec<S>)>), crate::autodiff::DiffError>> = chunk
            .par_iter()
            .map_init(Tape::new, |tape, &(u, p, n)| {
                tape.clear();
                let tape: &Tape<S> = tape;
                let mut fetch = TapeFetch::new(params, tape);
                let out = triplet_objective(cfg, &mut fetch, ctx, u, p, n);
                let grads = tape.gradient(out)?;
                let loss = out.value().to_f64_lossy();
                let gvec: Vec<(u64, Vec<S>)> = grads
                    .params()
                    .map(|(id, g)| (id.0, g.to_vec()))
                    .collect();
                Ok((loss, gvec))
            })
            .collect();
        for res in results {
            match res {
                Ok((loss, gvec)) => {
                    loss_sum += loss;
                    for (id, g) in gvec {
                        let slot = accum.entry(id).or_insert_with(|| vec![S::zero(); g.len()]);
                        for (a, b) in slot.iter_mut().zip(&g) {
                            *a += *b;
                        }
                    }
                }
                Err(e) => {
                    skipped += 1;
                    log::warn!("skipping triplet with non-finite forward value: {e}");
                }
            }
        }
    }
    (loss_sum, accum, skipped)
}

/// One optimizer step. Point-valued parameters take a Riemannian step
/// (metric rescale, retract by projection); layer matrices take plain
/// SGD. `grad_scale` multiplies every gradient before the step; the
/// training loop passes 1 so a batch applies its summed per-triplet
/// gradients — an embedding touched by one triplet takes one full-lr
/// step no matter the batch size. Non-finite gradients skip their
/// parameter with a warning.
pub fn apply_updates<S: Real>(
    geo: Geometry<S>,
    params: &mut ModelParams<S>,
    grads: &GradMap<S>,
    lr: S,
    grad_scale: S,
) {
    for (&key, g) in grads {
        if g.iter().any(|x| !x.is_finite()) {
            log::warn!("skipping non-finite gradient for parameter {key:#x}");
            continue;
        }
        let (kind, idx) = decode_param_id(ParamId(key));
        let theta = params.get_mut(kind, idx);
        match kind {
            ParamKind::UserMat | ParamKind::ItemMat => {
                for (t, &gi) in theta.iter_mut().zip(g) {
                    *t = *t - lr * grad_scale * gi;
                }
            }
            _ => {
                let scaled: Vec<S> = g.iter().map(|&x| x * grad_scale).collect();
                let riem = geo.rescale_grad(theta, &scaled);
                let stepped: Vec<S> =
                    theta.iter().zip(&riem).map(|(&t, &r)| t - lr * r).collect();
                *theta = geo.constrain(&stepped);
            }
        }
    }
}

fn debug_check_ball<S: Real>(geo: Geometry<S>, params: &ModelParams<S>) {
    if !cfg!(debug_assertions) {
        return;
    }
    if let Geometry::Hyperbolic { c } = geo {
        let lim = (S::one() - S::real(EPS_BALL)) * (S::one() - S::real(EPS_BALL))
            + S::real(1e-12);
        for family in [
            &params.user_emb,
            &params.item_emb,
            &params.user_biases,
            &params.item_biases,
        ] {
            for v in family {
                let nsq: S = v.iter().map(|&x| x * x).sum();
                debug_assert!(c * nsq <= lim, "ball invariant violated: c‖θ‖² = {}", c * nsq);
            }
        }
    }
}

/// Runs the full training loop and returns the selected parameters
/// (best validation AUC when a validation set is given, else the final
/// state) with the per-epoch metric trace.
pub fn train<S: Real>(
    hyper: &HyperParams,
    ctx: &ModelContext,
    train_pairs: &[(u32, u32)],
    val: Option<&LabeledPairs>,
    init: ModelParams<S>,
) -> TrainOutcome<S> {
    hyper
        .validate()
        .expect("hyperparameters must be validated before training");
    let cfg = ForwardCfg::from_hyper(hyper);
    let geo: Geometry<S> = hyper.geometry();
    let lr = S::real(hyper.lr);
    let n_items = ctx.n_items();
    let steps_per_epoch = train_pairs.len().div_ceil(hyper.batch).max(1);

    let mut params = init;
    let mut last_good = params.clone();
    let mut best: Option<(f64, usize, ModelParams<S>)> = None;
    let mut trace: Vec<EpochMetrics> = Vec::with_capacity(hyper.epochs);
    let mut stall = 0usize;
    let mut stop = StopReason::CompletedAllEpochs;

    'epochs: for epoch in 1..=hyper.epochs {
        let mut loss_sum = 0.0f64;
        let mut n_triplets = 0usize;
        for step in 0..steps_per_epoch {
            let batch = sample_triplets(
                train_pairs,
                &ctx.user_history,
                n_items,
                hyper.batch,
                hyper.seed,
                epoch as u64,
                step as u64,
            );
            if batch.is_empty() {
                break;
            }
            let (l, grads, skipped) = batch_gradients(&cfg, &params, ctx, &batch);
            if skipped == batch.len() || !l.is_finite() {
                log::error!("loss diverged at epoch {epoch} step {step}; keeping last good parameters");
                params = match best.take() {
                    Some((_, _, p)) => p,
                    None => last_good,
                };
                stop = StopReason::Diverged { at_epoch: epoch };
                return TrainOutcome {
                    params,
                    trace,
                    best_epoch: None,
                    stop,
                };
            }
            if skipped > 0 {
                log::warn!("epoch {epoch} step {step}: skipped {skipped} non-finite triplets");
            }
            apply_updates(geo, &mut params, &grads, lr, S::one());
            loss_sum += l;
            n_triplets += batch.len() - skipped;
        }
        debug_check_ball(geo, &params);

        let mean_loss = loss_sum / n_triplets.max(1) as f64;
        let (val_auc, val_acc) = match val {
            Some(labeled) if !labeled.pairs.is_empty() => {
                let (ut, it) = eval::compute_towers(&cfg, &params, ctx);
                let scored = eval::score_pairs(&cfg, &ut, &it, &labeled.pairs);
                match eval::ctr_metrics(&scored) {
                    Ok((a, c)) => (a, c),
                    Err(e) => {
                        log::warn!("validation metrics unavailable: {e}");
                        (f64::NAN, f64::NAN)
                    }
                }
            }
            _ => (f64::NAN, f64::NAN),
        };
        trace.push(EpochMetrics {
            epoch,
            loss: mean_loss,
            val_auc,
            val_acc,
        });
        log::info!(
            "epoch {epoch}/{}: loss {mean_loss:.5} val_auc {val_auc:.4} val_acc {val_acc:.4}",
            hyper.epochs
        );

        if val_auc.is_finite() {
            let improved = best.as_ref().map_or(true, |(b, _, _)| val_auc > *b);
            if improved {
                best = Some((val_auc, epoch, params.clone()));
                stall = 0;
            } else {
                stall += 1;
                if stall >= hyper.patience {
                    log::info!("early stop at epoch {epoch}: no improvement in {stall} epochs");
                    stop = StopReason::EarlyStopped { at_epoch: epoch };
                    break 'epochs;
                }
            }
        }
        last_good = params.clone();
    }

    let (params, best_epoch) = match best {
        Some((_, e, p)) => (p, Some(e)),
        None => (params, None),
    };
    TrainOutcome {
        params,
        trace,
        best_epoch,
        stop,
    }
}

/// Writes the metric trace as `epoch,loss,val_auc,val_acc`.
pub fn write_trace_csv(path: &std::path::Path, trace: &[EpochMetrics]) -> std::io::Result<()> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "epoch,loss,val_auc,val_acc")?;
    for row in trace {
        writeln!(f, "{},{},{},{}", row.epoch, row.loss, row.val_auc, row.val_acc)?;
    }
    f.flush()
}
