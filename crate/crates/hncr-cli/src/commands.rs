//! The five pipeline commands. Each one rebuilds its inputs
//! deterministically from the effective config, so reruns with the same
//! config produce identical artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use hncr_core::data::{
    build_interaction_matrix, degree_histogram, load_ratings, split_interactions, to_implicit,
    write_degree_histogram_csv, DatasetSplit, ImplicitDataset, InteractionMatrix,
};
use hncr_core::eval::{
    compute_towers, ctr_metrics, embedding_scatter, hierarchy_bins, ranking_eval, score_pairs,
    sparsity_bins, write_hierarchy_csv, write_scatter_csv, write_sparsity_csv, RankingConfig,
};
use hncr_core::model::{
    init_params, load_checkpoint, save_checkpoint, train, Checkpoint, ForwardCfg, ModelContext,
    StopReason,
};
use hncr_core::neighbors::{
    build_item_graph, build_user_graph, cooccurrence_neighbors, load_neighbor_sets,
    save_latents, save_neighbor_sets, semantic_neighbors, LineConfig, NeighborSets, Side,
};
use hncr_core::{rng, Scalar};

use crate::config::{NeighborMode, RunConfig};
use crate::CliError;

pub const USER_NEIGHBORS: &str = "user_neighbors.txt";
pub const ITEM_NEIGHBORS: &str = "item_neighbors.txt";
pub const USER_LATENTS: &str = "user_latents.txt";
pub const ITEM_LATENTS: &str = "item_latents.txt";
pub const CHECKPOINT: &str = "checkpoint.json";

/// Dataset, split, and train-side adjacency shared by every command.
pub struct Pipeline {
    pub ds: ImplicitDataset,
    pub split: DatasetSplit,
    pub train_matrix: InteractionMatrix,
    /// Per-user sorted items over *all* splits (negative-pool exclusion).
    pub interacted: Vec<Vec<u32>>,
}

pub fn load_pipeline(cfg: &RunConfig) -> Result<Pipeline, CliError> {
    if cfg.dataset.is_empty() {
        return Err(CliError::Input(
            "no dataset configured; set `dataset` in the config file".into(),
        ));
    }
    let path = Path::new(&cfg.dataset);
    if !path.exists() {
        return Err(CliError::Input(format!(
            "dataset {} does not exist",
            path.display()
        )));
    }
    let report = load_ratings(path)?;
    if report.malformed > 0 {
        log::warn!("ignored {} malformed rows", report.malformed);
    }
    let ds = to_implicit(&report.records, cfg.positive_rule())?;
    let split = split_interactions(&ds, cfg.split, cfg.seed)?;
    let train_matrix = build_interaction_matrix(ds.n_users(), ds.n_items(), &split.train);
    let interacted = ds.user_interacted();
    log::info!(
        "dataset: {} users, {} items, {} interactions (train {}, val {}, test {})",
        ds.n_users(),
        ds.n_items(),
        ds.pairs.len(),
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(Pipeline {
        ds,
        split,
        train_matrix,
        interacted,
    })
}

/// Loads prepare's neighbor files (semantic mode) or rebuilds direct
/// graph neighbors on the fly (cooccurrence mode).
fn obtain_neighbor_sets(
    cfg: &RunConfig,
    tm: &InteractionMatrix,
) -> Result<(NeighborSets, NeighborSets), CliError> {
    match cfg.neighbor()? {
        NeighborMode::Semantic => {
            let up = cfg.out_dir().join(USER_NEIGHBORS);
            let ip = cfg.out_dir().join(ITEM_NEIGHBORS);
            for p in [&up, &ip] {
                if !p.exists() {
                    return Err(CliError::Input(format!(
                        "{} not found; run `hncr prepare` first",
                        p.display()
                    )));
                }
            }
            let users = load_neighbor_sets(&up)?;
            let items = load_neighbor_sets(&ip)?;
            for (sets, k) in [(&users, cfg.k_users), (&items, cfg.k_items)] {
                if sets.k != k {
                    log::warn!(
                        "neighbor file {} built with K={}, config says {}; using the file",
                        sets.side.token(),
                        sets.k,
                        k
                    );
                }
            }
            Ok((users, items))
        }
        NeighborMode::Cooccurrence => {
            let wm = cfg.weight()?;
            let ug = build_user_graph(tm, wm);
            let ig = build_item_graph(tm, wm);
            Ok((
                cooccurrence_neighbors(&ug, Side::User, wm, cfg.seed, cfg.k_users),
                cooccurrence_neighbors(&ig, Side::Item, wm, cfg.seed, cfg.k_items),
            ))
        }
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("cannot serialize {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n")
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn split_manifest(cfg: &RunConfig, pipe: &Pipeline) -> serde_json::Value {
    serde_json::json!({
        "dataset": cfg.dataset,
        "positive_rule": match cfg.positive_threshold {
            Some(t) => format!("rating >= {t}"),
            None => "all observed".to_string(),
        },
        "split": cfg.split,
        "seed": cfg.seed,
        "n_users": pipe.ds.n_users(),
        "n_items": pipe.ds.n_items(),
        "interactions": pipe.ds.pairs.len(),
        "train_interactions": pipe.split.train.len(),
        "val_interactions": pipe.split.val.len(),
        "test_interactions": pipe.split.test.len(),
    })
}

fn ensure_out(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.out_dir();
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", out.display())))?;
    cfg.echo(&out)?;
    Ok(out)
}

pub fn cmd_prepare(cfg: &RunConfig) -> Result<(), CliError> {
    let pipe = load_pipeline(cfg)?;
    let out = ensure_out(cfg)?;
    write_json(&out.join("split-manifest.json"), &split_manifest(cfg, &pipe))?;

    let wm = cfg.weight()?;
    let mode = cfg.neighbor()?;
    let ug = build_user_graph(&pipe.train_matrix, wm);
    let ig = build_item_graph(&pipe.train_matrix, wm);
    log::info!(
        "relational graphs: {} user edges, {} item edges",
        ug.edges.len(),
        ig.edges.len()
    );

    let user_seed = rng::mix(cfg.seed, rng::tag::LINE_USER);
    let item_seed = rng::mix(cfg.seed, rng::tag::LINE_ITEM);
    let mut files = vec![USER_NEIGHBORS.to_string(), ITEM_NEIGHBORS.to_string()];
    match mode {
        NeighborMode::Semantic => {
            let lc_u = LineConfig {
                dim: cfg.latent_users,
                epochs: cfg.line_epochs,
                negatives: cfg.line_negatives,
                lr0: cfg.line_lr,
                seed: user_seed,
            };
            let lc_i = LineConfig {
                dim: cfg.latent_items,
                seed: item_seed,
                ..lc_u
            };
            let mut users = semantic_neighbors(&ug, Side::User, wm, &lc_u, cfg.k_users);
            let mut items = semantic_neighbors(&ig, Side::Item, wm, &lc_i, cfg.k_items);
            // Headers carry the root seed on both neighbor paths; the
            // derived embedding seeds live in the manifest.
            users.sets.seed = cfg.seed;
            items.sets.seed = cfg.seed;
            save_neighbor_sets(&out.join(USER_NEIGHBORS), &users.sets)?;
            save_neighbor_sets(&out.join(ITEM_NEIGHBORS), &items.sets)?;
            save_latents(&out.join(USER_LATENTS), &users.latents)?;
            save_latents(&out.join(ITEM_LATENTS), &items.latents)?;
            files.push(USER_LATENTS.to_string());
            files.push(ITEM_LATENTS.to_string());
        }
        NeighborMode::Cooccurrence => {
            let users = cooccurrence_neighbors(&ug, Side::User, wm, cfg.seed, cfg.k_users);
            let items = cooccurrence_neighbors(&ig, Side::Item, wm, cfg.seed, cfg.k_items);
            save_neighbor_sets(&out.join(USER_NEIGHBORS), &users)?;
            save_neighbor_sets(&out.join(ITEM_NEIGHBORS), &items)?;
        }
    }
    write_json(
        &out.join("manifest.json"),
        &serde_json::json!({
            "seed": cfg.seed,
            "weight_mode": cfg.weight_mode,
            "neighbor_mode": cfg.neighbor_mode,
            "k_users": cfg.k_users,
            "k_items": cfg.k_items,
            "latent_users": cfg.latent_users,
            "latent_items": cfg.latent_items,
            "line_seed_users": user_seed,
            "line_seed_items": item_seed,
            "files": files,
        }),
    )?;
    println!(
        "prepared {} neighbor sets in {}",
        cfg.neighbor_mode,
        out.display()
    );
    Ok(())
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let pipe = load_pipeline(cfg)?;
    let (users, items) = obtain_neighbor_sets(cfg, &pipe.train_matrix)?;
    let ctx = ModelContext::new(&pipe.train_matrix, &users, &items)?;
    let hyper = cfg.hyper()?;
    let out = ensure_out(cfg)?;
    write_json(&out.join("split-manifest.json"), &split_manifest(cfg, &pipe))?;

    let val = hncr_core::data::sample_eval_negatives(
        &pipe.split.val,
        &pipe.interacted,
        pipe.ds.n_items(),
        cfg.seed,
        rng::tag::NEG_VAL,
    );
    let init = init_params::<Scalar>(
        hyper.geometry(),
        pipe.ds.n_users(),
        pipe.ds.n_items(),
        hyper.dim,
        hyper.layers,
        hyper.seed,
    );
    log::info!(
        "training {} ({} parameters)",
        cfg.variant_name()?,
        init.param_count()
    );
    let outcome = train(&hyper, &ctx, &pipe.split.train, Some(&val), init);

    save_checkpoint(&out.join(CHECKPOINT), &hyper, &outcome.params)?;
    hncr_core::model::train::write_trace_csv(&out.join("trace.csv"), &outcome.trace)
        .map_err(|e| CliError::Input(format!("cannot write trace: {e}")))?;
    let stop = match outcome.stop {
        StopReason::CompletedAllEpochs => "completed".to_string(),
        StopReason::EarlyStopped { at_epoch } => format!("early-stopped at epoch {at_epoch}"),
        StopReason::Diverged { at_epoch } => format!("diverged at epoch {at_epoch}"),
    };
    write_json(
        &out.join("run-metadata.json"),
        &serde_json::json!({
            "variant": cfg.variant_name()?,
            "backend": cfg.backend,
            "ablate": cfg.ablate,
            "weight_mode": cfg.weight_mode,
            "neighbor_mode": cfg.neighbor_mode,
            "seed": cfg.seed,
            "dim": hyper.dim,
            "layers": hyper.layers,
            "epochs_run": outcome.trace.len(),
            "best_epoch": outcome.best_epoch,
            "stop": stop,
        }),
    )?;
    if let StopReason::Diverged { at_epoch } = outcome.stop {
        return Err(CliError::Training(format!(
            "loss diverged at epoch {at_epoch}; last good checkpoint kept at {}",
            out.join(CHECKPOINT).display()
        )));
    }
    let last = outcome.trace.last();
    println!(
        "trained {} for {} epochs ({stop}); val_auc {:.4}; checkpoint {}",
        cfg.variant_name()?,
        outcome.trace.len(),
        outcome
            .best_epoch
            .and_then(|e| outcome.trace.get(e - 1))
            .or(last)
            .map_or(f64::NAN, |m| m.val_auc),
        out.join(CHECKPOINT).display()
    );
    Ok(())
}

fn resolve_checkpoint(cfg: &RunConfig, flag: Option<&Path>) -> (PathBuf, bool) {
    match flag {
        Some(p) => (p.to_path_buf(), true),
        None => (cfg.out_dir().join(CHECKPOINT), false),
    }
}

fn load_compatible_checkpoint(
    path: &Path,
    ds: &ImplicitDataset,
) -> Result<Checkpoint, CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!(
            "checkpoint {} not found; run `hncr train` first",
            path.display()
        )));
    }
    let ckpt = load_checkpoint(path)?;
    if ckpt.params.n_users() != ds.n_users() || ckpt.params.n_items() != ds.n_items() {
        return Err(CliError::Incompatible(format!(
            "checkpoint indexes {} users x {} items but the dataset has {} x {}",
            ckpt.params.n_users(),
            ckpt.params.n_items(),
            ds.n_users(),
            ds.n_items()
        )));
    }
    Ok(ckpt)
}

/// Per-repeat seed: the root seed itself for repeat 0, derived streams
/// after that, all recorded in the report.
fn repeat_seed(seed: u64, r: usize) -> u64 {
    if r == 0 {
        seed
    } else {
        rng::mix(seed, r as u64)
    }
}

pub fn cmd_evaluate(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let pipe = load_pipeline(cfg)?;
    let (users, items) = obtain_neighbor_sets(cfg, &pipe.train_matrix)?;
    let ctx = ModelContext::new(&pipe.train_matrix, &users, &items)?;
    let (ckpt_path, _) = resolve_checkpoint(cfg, checkpoint);
    let ckpt = load_compatible_checkpoint(&ckpt_path, &pipe.ds)?;
    if ckpt.hyper.backend.token() != cfg.backend {
        log::warn!(
            "checkpoint was trained with the {} backend; scoring with it",
            ckpt.hyper.backend.token()
        );
    }
    let out = ensure_out(cfg)?;
    let fcfg: ForwardCfg<Scalar> = ForwardCfg::from_hyper(&ckpt.hyper);
    let (ut, it) = compute_towers(&fcfg, &ckpt.params, &ctx);

    let repeats = cfg.repeats.max(1);
    let mut aucs = Vec::with_capacity(repeats);
    let mut accs = Vec::with_capacity(repeats);
    let mut precisions: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut recalls: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut seeds = Vec::with_capacity(repeats);
    let mut n_rank_users = 0;
    let mut rows: Vec<String> = Vec::new();

    for r in 0..repeats {
        let seed_r = repeat_seed(cfg.seed, r);
        seeds.push(seed_r);
        let test = hncr_core::data::sample_eval_negatives(
            &pipe.split.test,
            &pipe.interacted,
            pipe.ds.n_items(),
            seed_r,
            rng::tag::NEG_TEST,
        );
        if test.shortfall_users > 0 {
            log::warn!(
                "{} users had fewer unrated items than positives",
                test.shortfall_users
            );
        }
        let scored = score_pairs(&fcfg, &ut, &it, &test.pairs);
        let (auc, acc) = ctr_metrics(&scored)?;
        let report = ranking_eval(
            &fcfg,
            &ut,
            &it,
            &pipe.split.test,
            &pipe.interacted,
            &RankingConfig {
                n_negatives: cfg.eval_negatives,
                ks: cfg.eval_ks.clone(),
                seed: seed_r,
            },
        );
        n_rank_users = report.n_users;
        rows.push(format!("auc,,{r},{seed_r},{auc}"));
        rows.push(format!("acc,,{r},{seed_r},{acc}"));
        for (&k, &p) in &report.precision {
            rows.push(format!("precision,{k},{r},{seed_r},{p}"));
            precisions.entry(k).or_default().push(p);
        }
        for (&k, &v) in &report.recall {
            rows.push(format!("recall,{k},{r},{seed_r},{v}"));
            recalls.entry(k).or_default().push(v);
        }
        aucs.push(auc);
        accs.push(acc);
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    rows.push(format!("auc,,mean,,{}", mean(&aucs)));
    rows.push(format!("acc,,mean,,{}", mean(&accs)));
    for (k, v) in &precisions {
        rows.push(format!("precision,{k},mean,,{}", mean(v)));
    }
    for (k, v) in &recalls {
        rows.push(format!("recall,{k},mean,,{}", mean(v)));
    }
    let csv = format!("metric,k,repeat,seed,value\n{}\n", rows.join("\n"));
    std::fs::write(out.join("metrics.csv"), csv)
        .map_err(|e| CliError::Input(format!("cannot write metrics: {e}")))?;

    let mut summary = String::new();
    summary.push_str(&format!("variant = {}\n", cfg.variant_name()?));
    summary.push_str(&format!("seed = {}\n", cfg.seed));
    summary.push_str(&format!("repeats = {repeats}\n"));
    summary.push_str(&format!(
        "repeat_seeds = {}\n",
        seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
    ));
    summary.push_str(&format!("test_users = {n_rank_users}\n"));
    summary.push_str(&format!("auc = {}\n", mean(&aucs)));
    summary.push_str(&format!("acc = {}\n", mean(&accs)));
    for (k, v) in &precisions {
        summary.push_str(&format!("precision@{k} = {}\n", mean(v)));
    }
    for (k, v) in &recalls {
        summary.push_str(&format!("recall@{k} = {}\n", mean(v)));
    }
    std::fs::write(out.join("summary.txt"), &summary)
        .map_err(|e| CliError::Input(format!("cannot write summary: {e}")))?;
    print!("{summary}");
    Ok(())
}

pub fn cmd_rank(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<(), CliError> {
    use rayon::prelude::*;

    let pipe = load_pipeline(cfg)?;
    let (users, items) = obtain_neighbor_sets(cfg, &pipe.train_matrix)?;
    let ctx = ModelContext::new(&pipe.train_matrix, &users, &items)?;
    let (ckpt_path, _) = resolve_checkpoint(cfg, checkpoint);
    let ckpt = load_compatible_checkpoint(&ckpt_path, &pipe.ds)?;
    let out = ensure_out(cfg)?;
    let fcfg: ForwardCfg<Scalar> = ForwardCfg::from_hyper(&ckpt.hyper);
    let (ut, it) = compute_towers(&fcfg, &ckpt.params, &ctx);

    let n_items = pipe.ds.n_items() as u32;
    let lists: Vec<Vec<(u32, f64)>> = (0..pipe.ds.n_users())
        .into_par_iter()
        .map(|u| {
            let seen = &pipe.interacted[u];
            let mut scored: Vec<(u32, f64)> = (0..n_items)
                .filter(|i| seen.binary_search(i).is_err())
                .map(|i| {
                    let s = hncr_core::model::forward::score_from_towers(
                        &fcfg,
                        &ut[u],
                        &it[i as usize],
                    );
                    (i, s)
                })
                .collect();
            scored.sort_by(|a, b| {
                b.1.partial_cmp(&a.1)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.0.cmp(&b.0))
            });
            scored.truncate(cfg.top_n);
            scored
        })
        .collect();

    let mut text = String::from("user,rank,item,score\n");
    for (u, list) in lists.iter().enumerate() {
        for (pos, (i, s)) in list.iter().enumerate() {
            text.push_str(&format!("{u},{},{i},{s}\n", pos + 1));
        }
    }
    let path = out.join("rankings.csv");
    std::fs::write(&path, text)
        .map_err(|e| CliError::Input(format!("cannot write rankings: {e}")))?;
    println!(
        "wrote top-{} lists for {} users to {}",
        cfg.top_n,
        pipe.ds.n_users(),
        path.display()
    );
    Ok(())
}

pub fn cmd_analyze(cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<(), CliError> {
    let pipe = load_pipeline(cfg)?;
    let out = ensure_out(cfg)?;

    // Degree histograms describe the dataset itself (all splits).
    let full = build_interaction_matrix(pipe.ds.n_users(), pipe.ds.n_items(), &pipe.ds.pairs);
    let io_err = |e| CliError::Input(format!("cannot write histogram: {e}"));
    write_degree_histogram_csv(
        &out.join("degree_hist_users.csv"),
        &degree_histogram(&full.user_items),
    )
    .map_err(io_err)?;
    write_degree_histogram_csv(
        &out.join("degree_hist_items.csv"),
        &degree_histogram(&full.item_users),
    )
    .map_err(io_err)?;

    let (ckpt_path, explicit) = resolve_checkpoint(cfg, checkpoint);
    if !ckpt_path.exists() && !explicit {
        println!(
            "wrote degree histograms to {}; no checkpoint at {}, skipping embedding analyses",
            out.display(),
            ckpt_path.display()
        );
        return Ok(());
    }
    let ckpt = load_compatible_checkpoint(&ckpt_path, &pipe.ds)?;
    let (users, items) = obtain_neighbor_sets(cfg, &pipe.train_matrix)?;
    let ctx = ModelContext::new(&pipe.train_matrix, &users, &items)?;
    let fcfg: ForwardCfg<Scalar> = ForwardCfg::from_hyper(&ckpt.hyper);
    let geo = fcfg.geo;

    let test = hncr_core::data::sample_eval_negatives(
        &pipe.split.test,
        &pipe.interacted,
        pipe.ds.n_items(),
        cfg.seed,
        rng::tag::NEG_TEST,
    );
    let (ut, it) = compute_towers(&fcfg, &ckpt.params, &ctx);
    let scored = score_pairs(&fcfg, &ut, &it, &test.pairs);
    let degrees: Vec<usize> = pipe.train_matrix.user_items.iter().map(Vec::len).collect();
    let bins = sparsity_bins(&scored, &degrees, cfg.sparsity_bins);
    write_sparsity_csv(&out.join("sparsity.csv"), &bins)?;

    let groups = hierarchy_bins(geo, &ckpt.params, &pipe.train_matrix, cfg.hierarchy_groups);
    write_hierarchy_csv(&out.join("hierarchy.csv"), &groups)?;

    let scatter = embedding_scatter(geo, &ckpt.params, cfg.scatter_sample, cfg.seed);
    write_scatter_csv(&out.join("scatter.csv"), &scatter)?;

    println!(
        "wrote degree histograms, {} sparsity bins, {} hierarchy groups, {} scatter rows to {}",
        bins.len(),
        groups.len(),
        scatter.len(),
        out.display()
    );
    Ok(())
}

impl From<hncr_core::data::DataError> for CliError {
    fn from(e: hncr_core::data::DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<hncr_core::neighbors::NeighborError> for CliError {
    fn from(e: hncr_core::neighbors::NeighborError) -> Self {
        match e {
            hncr_core::neighbors::NeighborError::NodeCountMismatch { .. } => {
                CliError::Incompatible(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<hncr_core::model::ModelError> for CliError {
    fn from(e: hncr_core::model::ModelError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<hncr_core::eval::EvalError> for CliError {
    fn from(e: hncr_core::eval::EvalError) -> Self {
        CliError::Input(e.to_string())
    }
}
