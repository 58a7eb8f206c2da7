//! Classification and ranking metrics, plus the dataset-level analyses:
//! sparsity bins, hierarchy bins, and the embedding scatter dump.
//!
//! Metric functions are pure over immutable inputs. AUC is computed by
//! rank sum with midranks for ties, which agrees exactly with the
//! brute-force pairwise definition (kept here as a test oracle).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{self, InteractionMatrix};
use crate::model::forward::{self, ForwardCfg, ModelContext};
use crate::model::geometry::Geometry;
use crate::model::params::ModelParams;
use crate::neighbors::Side;
use crate::num::Real;
use crate::rng;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metric undefined: input contains only one class")]
    SingleClass,
    #[error("metric undefined on empty input")]
    Empty,
    #[error("failed to write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One model prediction with its ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredPair {
    pub user: u32,
    pub item: u32,
    pub score: f64,
    pub label: bool,
}

/// Rank-sum AUC with midranks: the probability that a random positive
/// outranks a random negative, ties counting one half.
pub fn auc(scored: &[ScoredPair]) -> Result<f64, EvalError> {
    let n_pos = scored.iter().filter(|p| p.label).count();
    let n_neg = scored.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        scored[a]
            .score
            .partial_cmp(&scored[b].score)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    // Midranks keep every term a half-integer, so the sum is exact in
    // f64 and matches the pairwise count bit for bit.
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scored[order[j]].score == scored[order[i]].score {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            if scored[k].label {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let np = n_pos as f64;
    Ok((rank_sum_pos - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

/// Brute-force pairwise AUC; quadratic, retained as the oracle the
/// rank-sum form is checked against.
pub fn auc_pairwise(scored: &[ScoredPair]) -> Result<f64, EvalError> {
    let pos: Vec<f64> = scored.iter().filter(|p| p.label).map(|p| p.score).collect();
    let neg: Vec<f64> = scored
        .iter()
        .filter(|p| !p.label)
        .map(|p| p.score)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(EvalError::SingleClass);
    }
    let mut wins = 0.0f64;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    Ok(wins / (pos.len() as f64 * neg.len() as f64))
}

/// Fraction of pairs whose thresholded score matches the label.
pub fn accuracy(scored: &[ScoredPair], threshold: f64) -> Result<f64, EvalError> {
    if scored.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct = scored
        .iter()
        .filter(|p| (p.score >= threshold) == p.label)
        .count();
    Ok(correct as f64 / scored.len() as f64)
}

/// Precision and recall at `k` for one user's candidate list
/// `(item, score, is_positive)`. Candidates are ranked by descending
/// score with ties broken by ascending item id; `P@K` divides by the
/// requested `k` even when the list is shorter.
pub fn precision_recall_at_k(candidates: &[(u32, f64, bool)], k: usize) -> (f64, f64) {
    let n_pos = candidates.iter().filter(|c| c.2).count();
    if n_pos == 0 || k == 0 {
        return (0.0, 0.0);
    }
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let hits = ranked.iter().take(k).filter(|c| c.2).count();
    (hits as f64 / k as f64, hits as f64 / n_pos as f64)
}

/// Scores labeled pairs through precomputed towers.
pub fn score_pairs<S: Real>(
    cfg: &ForwardCfg<S>,
    user_towers: &[Vec<S>],
    item_towers: &[Vec<S>],
    pairs: &[(u32, u32, bool)],
) -> Vec<ScoredPair> {
    pairs
        .iter()
        .map(|&(u, i, label)| ScoredPair {
            user: u,
            item: i,
            score: forward::score_from_towers(cfg, &user_towers[u as usize], &item_towers[i as usize])
                .to_f64_lossy(),
            label,
        })
        .collect()
}

/// Computes every tower once; the expensive step of an evaluation pass.
pub fn compute_towers<S: Real>(
    cfg: &ForwardCfg<S>,
    params: &ModelParams<S>,
    ctx: &ModelContext,
) -> (Vec<Vec<S>>, Vec<Vec<S>>) {
    (
        forward::all_towers(cfg, params, ctx, Side::User),
        forward::all_towers(cfg, params, ctx, Side::Item),
    )
}

/// CTR-style summary over labeled pairs.
pub fn ctr_metrics(scored: &[ScoredPair]) -> Result<(f64, f64), EvalError> {
    Ok((auc(scored)?, accuracy(scored, 0.5)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingConfig {
    /// Unrated items sampled per user.
    pub n_negatives: usize,
    /// Cutoffs to report.
    pub ks: Vec<usize>,
    pub seed: u64,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            n_negatives: 1000,
            ks: vec![2, 5, 10, 20, 50, 100],
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RankingReport {
    pub precision: BTreeMap<usize, f64>,
    pub recall: BTreeMap<usize, f64>,
    /// Users with at least one test positive (the averaging base).
    pub n_users: usize,
}

/// Top-K protocol: for each user with test positives, rank those
/// positives against `n_negatives` items the user never interacted with
/// anywhere, then average P@K/R@K over users.
pub fn ranking_eval<S: Real>(
    cfg: &ForwardCfg<S>,
    user_towers: &[Vec<S>],
    item_towers: &[Vec<S>],
    test: &[(u32, u32)],
    interacted: &[Vec<u32>],
    rcfg: &RankingConfig,
) -> RankingReport {
    let n_items = item_towers.len();
    let mut per_user: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &(u, i) in test {
        per_user.entry(u).or_default().push(i);
    }
    let users: Vec<(u32, Vec<u32>)> = per_user.into_iter().collect();

    let per_user_pr: Vec<Vec<(f64, f64)>> = users
        .par_iter()
        .map(|(u, positives)| {
            let seen = &interacted[*u as usize];
            let pool = n_items - seen.len();
            let take = rcfg.n_negatives.min(pool);
            let negs = data::sample_absent(
                seen,
                n_items,
                take,
                rng::mix(rcfg.seed, rng::mix(rng::tag::RANK_NEG, *u as u64)),
            );
            let mut cands: Vec<(u32, f64, bool)> = Vec::with_capacity(positives.len() + take);
            let ut = &user_towers[*u as usize];
            for (&i, label) in positives
                .iter()
                .map(|i| (i, true))
                .chain(negs.iter().map(|i| (i, false)))
            {
                let score =
                    forward::score_from_towers(cfg, ut, &item_towers[i as usize]).to_f64_lossy();
                cands.push((i, score, label));
            }
            rcfg.ks
                .iter()
                .map(|&k| precision_recall_at_k(&cands, k))
                .collect()
        })
        .collect();

    let n_users = users.len();
    let mut precision = BTreeMap::new();
    let mut recall = BTreeMap::new();
    for (ki, &k) in rcfg.ks.iter().enumerate() {
        let (mut ps, mut rs) = (0.0, 0.0);
        for pr in &per_user_pr {
            ps += pr[ki].0;
            rs += pr[ki].1;
        }
        let denom = n_users.max(1) as f64;
        precision.insert(k, ps / denom);
        recall.insert(k, rs / denom);
    }
    RankingReport {
        precision,
        recall,
        n_users,
    }
}

/// One user-sparsity bin: users whose train degree lies in `[lo, hi)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparsityBin {
    pub lo: usize,
    /// Exclusive upper bound.
    pub hi: usize,
    pub users: usize,
    /// Total train interactions of the bin's users.
    pub interactions: usize,
    pub auc: Option<f64>,
    pub accuracy: Option<f64>,
}

/// Bins the test users by train degree so each bin carries roughly the
/// same number of train interactions, then reports AUC/Accuracy per
/// bin. Users sharing a degree always share a bin, so fewer than
/// `n_bins` bins can come back on degenerate inputs.
pub fn sparsity_bins(
    scored: &[ScoredPair],
    train_user_degrees: &[usize],
    n_bins: usize,
) -> Vec<SparsityBin> {
    let mut users: Vec<u32> = scored.iter().map(|p| p.user).collect();
    users.sort_unstable();
    users.dedup();
    if users.is_empty() || n_bins == 0 {
        return Vec::new();
    }

    // degree → (user count, interaction total), ascending.
    let mut by_degree: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &u in &users {
        let d = train_user_degrees[u as usize];
        let e = by_degree.entry(d).or_insert((0, 0));
        e.0 += 1;
        e.1 += d;
    }
    let total: usize = by_degree.values().map(|v| v.1).sum();

    // Greedy boundary placement: close a bin once it holds its fair
    // share of the remaining interactions.
    let mut cuts: Vec<(usize, usize, usize, usize)> = Vec::new(); // lo, hi, users, inter
    let degrees: Vec<usize> = by_degree.keys().copied().collect();
    let mut idx = 0;
    let mut remaining = total;
    for bin in 0..n_bins {
        if idx >= degrees.len() {
            break;
        }
        let bins_left = n_bins - bin;
        let target = remaining.div_ceil(bins_left);
        let lo = degrees[idx];
        let (mut bin_users, mut bin_inter) = (0usize, 0usize);
        while idx < degrees.len() {
            let (u, it) = by_degree[&degrees[idx]];
            bin_users += u;
            bin_inter += it;
            idx += 1;
            if bin_inter >= target && bins_left > 1 {
                break;
            }
        }
        let hi = if idx < degrees.len() {
            degrees[idx]
        } else {
            degrees[degrees.len() - 1] + 1
        };
        remaining -= bin_inter;
        cuts.push((lo, hi, bin_users, bin_inter));
    }

    cuts.into_iter()
        .map(|(lo, hi, users, interactions)| {
            let subset: Vec<ScoredPair> = scored
                .iter()
                .filter(|p| {
                    let d = train_user_degrees[p.user as usize];
                    d >= lo && d < hi
                })
                .copied()
                .collect();
            SparsityBin {
                lo,
                hi,
                users,
                interactions,
                auc: auc(&subset).ok(),
                accuracy: accuracy(&subset, 0.5).ok(),
            }
        })
        .collect()
}

/// One hierarchy group: nodes ranked by distance to the origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyGroup {
    pub nodes: usize,
    pub avg_degree: f64,
    pub avg_dist_to_origin: f64,
}

/// Sorts all users and items by the distance of their base embedding to
/// the origin, splits them into `n_groups` of near-equal size (first
/// groups take the remainder), and reports the average train degree per
/// group. Group 1 holds the nodes nearest the origin.
pub fn hierarchy_bins<S: Real>(
    geo: Geometry<S>,
    params: &ModelParams<S>,
    train: &InteractionMatrix,
    n_groups: usize,
) -> Vec<HierarchyGroup> {
    let mut nodes: Vec<(f64, usize)> = Vec::with_capacity(params.n_users() + params.n_items());
    for (u, e) in params.user_emb.iter().enumerate() {
        nodes.push((
            geo.distance_to_origin(e).to_f64_lossy(),
            train.user_items[u].len(),
        ));
    }
    for (i, e) in params.item_emb.iter().enumerate() {
        nodes.push((
            geo.distance_to_origin(e).to_f64_lossy(),
            train.item_users[i].len(),
        ));
    }
    // Stable on distance ties: users before items, ascending index.
    nodes.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));

    let n = nodes.len();
    let base = n / n_groups;
    let extra = n % n_groups;
    let mut out = Vec::with_capacity(n_groups);
    let mut off = 0;
    for g in 0..n_groups {
        let size = base + usize::from(g < extra);
        if size == 0 {
            break;
        }
        let chunk = &nodes[off..off + size];
        off += size;
        out.push(HierarchyGroup {
            nodes: size,
            avg_degree: chunk.iter().map(|x| x.1 as f64).sum::<f64>() / size as f64,
            avg_dist_to_origin: chunk.iter().map(|x| x.0).sum::<f64>() / size as f64,
        });
    }
    out
}

/// One scatter row: a node's distance to the origin and its exact
/// average distance to the other sampled nodes (`None` when the sample
/// has a single node).
#[derive(Debug, Clone)]
pub struct ScatterRow {
    pub node: String,
    pub dist_to_origin: f64,
    pub avg_dist_to_others: Option<f64>,
}

/// Samples `sample_n` distinct nodes (users and items pooled,
/// deterministic per seed) and computes the exact pairwise averages
/// over the sample.
pub fn embedding_scatter<S: Real>(
    geo: Geometry<S>,
    params: &ModelParams<S>,
    sample_n: usize,
    seed: u64,
) -> Vec<ScatterRow> {
    use rand::Rng;
    let total = params.n_users() + params.n_items();
    let take = sample_n.min(total);
    let mut pool: Vec<usize> = (0..total).collect();
    let mut r = rng::chacha(seed, rng::tag::SCATTER);
    for i in 0..take {
        let j = r.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut picked = pool[..take].to_vec();
    picked.sort_unstable();

    let emb = |n: usize| -> &[S] {
        if n < params.n_users() {
            &params.user_emb[n]
        } else {
            &params.item_emb[n - params.n_users()]
        }
    };
    let label = |n: usize| -> String {
        if n < params.n_users() {
            format!("u{n}")
        } else {
            format!("i{}", n - params.n_users())
        }
    };

    picked
        .iter()
        .map(|&a| {
            let avg = if take > 1 {
                let sum: f64 = picked
                    .iter()
                    .filter(|&&b| b != a)
                    .map(|&b| geo.distance(emb(a), emb(b)).to_f64_lossy())
                    .sum();
                Some(sum / (take - 1) as f64)
            } else {
                None
            };
            ScatterRow {
                node: label(a),
                dist_to_origin: geo.distance_to_origin(emb(a)).to_f64_lossy(),
                avg_dist_to_others: avg,
            }
        })
        .collect()
}

pub fn write_scatter_csv(path: &Path, rows: &[ScatterRow]) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    (|| {
        writeln!(f, "node,dist_to_origin,avg_dist_to_others")?;
        for r in rows {
            match r.avg_dist_to_others {
                Some(a) => writeln!(f, "{},{},{}", r.node, r.dist_to_origin, a)?,
                None => writeln!(f, "{},{},", r.node, r.dist_to_origin)?,
            }
        }
        f.flush()
    })()
    .map_err(io_err)
}

pub fn write_sparsity_csv(path: &Path, bins: &[SparsityBin]) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    (|| {
        writeln!(f, "bin,lo,hi,users,interactions,auc,accuracy")?;
        for (b, row) in bins.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{},{},{},{}",
                b + 1,
                row.lo,
                row.hi,
                row.users,
                row.interactions,
                fmt_opt(row.auc),
                fmt_opt(row.accuracy)
            )?;
        }
        f.flush()
    })()
    .map_err(io_err)
}

pub fn write_hierarchy_csv(path: &Path, groups: &[HierarchyGroup]) -> Result<(), EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err)?);
    (|| {
        writeln!(f, "group,nodes,avg_degree,avg_dist_to_origin")?;
        for (g, row) in groups.iter().enumerate() {
            writeln!(
                f,
                "{},{},{},{}",
                g + 1,
                row.nodes,
                row.avg_degree,
                row.avg_dist_to_origin
            )?;
        }
        f.flush()
    })()
    .map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(score: f64, label: bool) -> ScoredPair {
        ScoredPair {
            user: 0,
            item: 0,
            score,
            label,
        }
    }

    #[test]
    fn auc_corner_cases() {
        let separated = vec![sp(0.9, true), sp(0.8, true), sp(0.2, false)];
        assert_eq!(auc(&separated).unwrap(), 1.0);
        let identical = vec![sp(0.5, true), sp(0.5, false), sp(0.5, true), sp(0.5, false)];
        assert_eq!(auc(&identical).unwrap(), 0.5);
        // 3 wins, 1 loss out of 4 pos-neg pairs.
        let mixed = vec![sp(0.9, true), sp(0.4, true), sp(0.6, false), sp(0.1, false)];
        assert_eq!(auc(&mixed).unwrap(), 0.75);
        assert!(matches!(
            auc(&[sp(1.0, true)]),
            Err(EvalError::SingleClass)
        ));
    }

    #[test]
    fn accuracy_corner_cases() {
        let all = vec![sp(0.9, true), sp(0.1, false)];
        assert_eq!(accuracy(&all, 0.5).unwrap(), 1.0);
        let half = vec![sp(0.6, true), sp(0.6, false)];
        assert_eq!(accuracy(&half, 0.5).unwrap(), 0.5);
        assert!(matches!(accuracy(&[], 0.5), Err(EvalError::Empty)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn rank_sum_equals_pairwise_exactly(
            scores in proptest::collection::vec((0u8..12, any::<bool>()), 2..120),
        ) {
            // Coarse score grid forces plenty of ties.
            let scored: Vec<ScoredPair> = scores
                .iter()
                .map(|&(s, l)| sp(s as f64 / 11.0, l))
                .collect();
            match (auc(&scored), auc_pairwise(&scored)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "disagreement: {:?} vs {:?}", a, b),
            }
        }
    }

    #[test]
    fn precision_recall_examples() {
        // Single positive ranked first.
        let mut cands = vec![(0u32, 0.9, true)];
        for i in 1..30u32 {
            cands.push((i, 0.1, false));
        }
        let (p, r) = precision_recall_at_k(&cands, 10);
        assert_eq!((p, r), (0.1, 1.0));

        // No positive in the top K.
        let mut cands = vec![(99u32, 0.0, true)];
        for i in 0..20u32 {
            cands.push((i, 0.5, false));
        }
        let (p, r) = precision_recall_at_k(&cands, 5);
        assert_eq!((p, r), (0.0, 0.0));

        // K beyond the list still divides precision by K.
        let cands = vec![(0u32, 0.9, true), (1, 0.8, true), (2, 0.1, false)];
        let (p, r) = precision_recall_at_k(&cands, 10);
        assert_eq!((p, r), (0.2, 1.0));
    }

    #[test]
    fn ranking_ties_break_by_ascending_item_id() {
        // All scores equal: top-2 must be items 0 and 1.
        let cands = vec![
            (3u32, 0.5, true),
            (0, 0.5, false),
            (1, 0.5, true),
            (2, 0.5, false),
        ];
        let (p, r) = precision_recall_at_k(&cands, 2);
        assert_eq!((p, r), (0.5, 0.5)); // item 1 is the only positive in top-2
    }

    #[test]
    fn sparsity_bins_partition_and_balance() {
        // 12 test users, degrees 1..=12: total 78 interactions.
        let degrees: Vec<usize> = (0..13).collect();
        let scored: Vec<ScoredPair> = (1..13u32)
            .flat_map(|u| {
                [
                    ScoredPair {
                        user: u,
                        item: 0,
                        score: 0.9,
                        label: true,
                    },
                    ScoredPair {
                        user: u,
                        item: 1,
                        score: 0.1,
                        label: false,
                    },
                ]
            })
            .collect();
        let bins = sparsity_bins(&scored, &degrees, 4);
        assert_eq!(bins.iter().map(|b| b.users).sum::<usize>(), 12);
        assert_eq!(bins.iter().map(|b| b.interactions).sum::<usize>(), 78);
        for w in bins.windows(2) {
            assert_eq!(w[0].hi, w[1].lo, "bins must tile [lo,hi) contiguously");
        }
        // Equal-interaction target is 19.5; every bin should be within
        // one degree group of it.
        for b in &bins {
            assert!(b.interactions >= 10 && b.interactions <= 30, "{b:?}");
            assert_eq!(b.auc, Some(1.0));
            assert_eq!(b.accuracy, Some(1.0));
        }
    }

    #[test]
    fn hierarchy_groups_partition_with_near_equal_sizes() {
        use crate::data::build_interaction_matrix;
        use crate::model::params::init_params;
        let geo = Geometry::Hyperbolic { c: 1.0 };
        let params = init_params(geo, 6, 7, 4, 0, 3);
        let pairs: Vec<(u32, u32)> = (0..6u32).map(|u| (u, u)).collect();
        let m = build_interaction_matrix(6, 7, &pairs);
        let groups = hierarchy_bins(geo, &params, &m, 4);
        assert_eq!(groups.iter().map(|g| g.nodes).sum::<usize>(), 13);
        let sizes: Vec<usize> = groups.iter().map(|g| g.nodes).collect();
        assert_eq!(sizes, vec![4, 3, 3, 3]);
        // Groups are ordered by distance to the origin.
        for w in groups.windows(2) {
            assert!(w[0].avg_dist_to_origin <= w[1].avg_dist_to_origin);
        }
    }

    #[test]
    fn scatter_rows_and_degenerate_sample() {
        use crate::model::params::init_params;
        let geo = Geometry::Hyperbolic { c: 1.0 };
        let params = init_params(geo, 5, 5, 4, 0, 11);
        let rows = embedding_scatter(geo, &params, 4, 9);
        assert_eq!(rows.len(), 4);
        let again = embedding_scatter(geo, &params, 4, 9);
        assert_eq!(rows.len(), again.len());
        for (a, b) in rows.iter().zip(&again) {
            assert_eq!(a.node, b.node);
            assert_eq!(a.dist_to_origin, b.dist_to_origin);
            assert_eq!(a.avg_dist_to_others, b.avg_dist_to_others);
        }
        let one = embedding_scatter(geo, &params, 1, 9);
        assert_eq!(one.len(), 1);
        assert!(one[0].avg_dist_to_others.is_none());

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("scatter.csv");
        write_scatter_csv(&p, &one).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("node,dist_to_origin,avg_dist_to_others\n"));
        assert!(text.trim_end().ends_with(','), "empty avg field expected");
    }
}
