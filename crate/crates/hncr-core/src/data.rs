//! Implicit-feedback data pipeline.
//!
//! Ratings files (TSV/CSV, optional header) are parsed into records,
//! converted to implicit positives, split train/validation/test with
//! deterministic seeded shuffling, and complemented with per-user
//! evaluation negatives drawn from never-interacted items. The train
//! split alone feeds the interaction matrix used by neighbor
//! construction and the towers — evaluation parts never leak into it.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{bad} of {total} rows malformed (more than 1%)")]
    TooManyMalformed { bad: usize, total: usize },
    #[error("no usable interactions in input")]
    Empty,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 3]),
}

/// One parsed ratings row.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingRecord {
    pub user: String,
    pub item: String,
    pub rating: f64,
}

#[derive(Debug)]
pub struct LoadReport {
    pub records: Vec<RatingRecord>,
    pub malformed: usize,
    pub total_rows: usize,
}

/// Parses `user<sep>item[<sep>rating[, extras ignored]]` rows; the
/// separator (tab, comma, or whitespace) and an optional header row are
/// detected from the content. Rows missing a rating column count as
/// rating 1. More than 1% malformed rows is an error.
pub fn load_ratings(path: &Path) -> Result<LoadReport, DataError> {
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    parse_ratings(reader).map_err(|e| match e {
        DataError::Io { source, .. } => DataError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

pub fn parse_ratings<R: BufRead>(reader: R) -> Result<LoadReport, DataError> {
    let mut records = Vec::new();
    let mut malformed = 0usize;
    let mut total = 0usize;
    let mut first_data_row = true;
    for line in reader.lines() {
        let line = line.map_err(|source| DataError::Io {
            path: String::new(),
            source,
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        total += 1;
        match parse_row(line) {
            Some(rec) => {
                records.push(rec);
                first_data_row = false;
            }
            None if first_data_row => {
                // A single leading unparsable row is a header.
                first_data_row = false;
                total -= 1;
            }
            None => malformed += 1,
        }
    }
    if total > 0 && malformed * 100 > total {
        return Err(DataError::TooManyMalformed {
            bad: malformed,
            total,
        });
    }
    Ok(LoadReport {
        records,
        malformed,
        total_rows: total,
    })
}

fn parse_row(line: &str) -> Option<RatingRecord> {
    let fields: Vec<&str> = if line.contains('\t') {
        line.split('\t').map(str::trim).collect()
    } else if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    };
    if fields.len() < 2 || fields[0].is_empty() || fields[1].is_empty() {
        return None;
    }
    let rating = if fields.len() >= 3 {
        fields[2].parse::<f64>().ok()?
    } else {
        1.0
    };
    Some(RatingRecord {
        user: fields[0].to_string(),
        item: fields[1].to_string(),
        rating,
    })
}

/// Which observed ratings count as implicit positives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PositiveRule {
    /// Every observed rating is a positive (the default).
    AllObserved,
    /// Only ratings at or above the threshold.
    MinRating(f64),
}

impl Default for PositiveRule {
    fn default() -> Self {
        PositiveRule::AllObserved
    }
}

/// Deduplicated implicit positives with dense ids in first-appearance
/// order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImplicitDataset {
    pub user_labels: Vec<String>,
    pub item_labels: Vec<String>,
    pub pairs: Vec<(u32, u32)>,
}

impl ImplicitDataset {
    pub fn n_users(&self) -> usize {
        self.user_labels.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_labels.len()
    }

    /// Sorted interacted-item lists per user over *all* pairs.
    pub fn user_interacted(&self) -> Vec<Vec<u32>> {
        let mut sets = vec![Vec::new(); self.n_users()];
        for &(u, i) in &self.pairs {
            sets[u as usize].push(i);
        }
        for s in &mut sets {
            s.sort_unstable();
        }
        sets
    }
}

pub fn to_implicit(records: &[RatingRecord], rule: PositiveRule) -> Result<ImplicitDataset, DataError> {
    let mut user_index: HashMap<&str, u32> = HashMap::new();
    let mut item_index: HashMap<&str, u32> = HashMap::new();
    let mut user_labels = Vec::new();
    let mut item_labels = Vec::new();
    let mut pairs = Vec::new();
    let mut seen: HashMap<(u32, u32), ()> = HashMap::new();
    for rec in records {
        let positive = match rule {
            PositiveRule::AllObserved => true,
            PositiveRule::MinRating(t) => rec.rating >= t,
        };
        if !positive {
            continue;
        }
        let u = *user_index.entry(rec.user.as_str()).or_insert_with(|| {
            user_labels.push(rec.user.clone());
            (user_labels.len() - 1) as u32
        });
        let i = *item_index.entry(rec.item.as_str()).or_insert_with(|| {
            item_labels.push(rec.item.clone());
            (item_labels.len() - 1) as u32
        });
        if seen.insert((u, i), ()).is_none() {
            pairs.push((u, i));
        }
    }
    if pairs.is_empty() {
        return Err(DataError::Empty);
    }
    Ok(ImplicitDataset {
        user_labels,
        item_labels,
        pairs,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<(u32, u32)>,
    pub val: Vec<(u32, u32)>,
    pub test: Vec<(u32, u32)>,
}

/// Seeded shuffle split; part sizes land within ±1 of the exact ratios.
pub fn split_interactions(
    ds: &ImplicitDataset,
    ratios: [f64; 3],
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (sum - 1.0).abs() > 1e-9 {
        return Err(DataError::BadRatios(ratios));
    }
    if ds.pairs.is_empty() {
        return Err(DataError::Empty);
    }
    let mut pairs = ds.pairs.clone();
    let mut rng = rng::chacha(seed, rng::tag::SPLIT);
    // Fisher-Yates, explicit for a stable shuffle across rand versions.
    for i in (1..pairs.len()).rev() {
        let j = rng.random_range(0..=i);
        pairs.swap(i, j);
    }
    let n = pairs.len();
    let n_train = (ratios[0] * n as f64).round() as usize;
    let n_val = (((ratios[0] + ratios[1]) * n as f64).round() as usize).saturating_sub(n_train);
    let n_train = n_train.min(n);
    let n_val = n_val.min(n - n_train);
    let val_end = n_train + n_val;
    Ok(DatasetSplit {
        train: pairs[..n_train].to_vec(),
        val: pairs[n_train..val_end].to_vec(),
        test: pairs[val_end..].to_vec(),
    })
}

/// Positives of one evaluation part plus per-user sampled negatives.
#[derive(Debug, Clone)]
pub struct LabeledPairs {
    /// `(user, item, is_positive)`.
    pub pairs: Vec<(u32, u32, bool)>,
    /// Users whose negative pool ran short of their positive count.
    pub shortfall_users: usize,
}

/// For each user with `k` positives in `part`, draws `k` distinct
/// negatives uniformly from items the user never interacted with in any
/// split. Deterministic per `(seed, tag, user)`.
pub fn sample_eval_negatives(
    part: &[(u32, u32)],
    interacted: &[Vec<u32>],
    n_items: usize,
    seed: u64,
    tag: u64,
) -> LabeledPairs {
    let mut per_user: HashMap<u32, Vec<u32>> = HashMap::new();
    for &(u, i) in part {
        per_user.entry(u).or_default().push(i);
    }
    let mut users: Vec<u32> = per_user.keys().copied().collect();
    users.sort_unstable();
    let mut pairs = Vec::with_capacity(part.len() * 2);
    let mut shortfall_users = 0usize;
    for u in users {
        let positives = &per_user[&u];
        for &i in positives {
            pairs.push((u, i, true));
        }
        let seen = &interacted[u as usize];
        let pool = n_items - seen.len();
        let want = positives.len();
        let take = want.min(pool);
        if take < want {
            shortfall_users += 1;
            log::warn!(
                "user {u}: negative pool has only {pool} items for {want} positives"
            );
        }
        let negs = sample_absent(seen, n_items, take, rng::mix(seed, rng::mix(tag, u as u64)));
        for i in negs {
            pairs.push((u, i, false));
        }
    }
    LabeledPairs {
        pairs,
        shortfall_users,
    }
}

/// Draws `take` distinct items from `0..n_items` excluding the sorted
/// list `seen`.
pub(crate) fn sample_absent(seen: &[u32], n_items: usize, take: usize, seed: u64) -> Vec<u32> {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let pool = n_items - seen.len();
    debug_assert!(take <= pool);
    if take == 0 {
        return Vec::new();
    }
    if take * 4 >= pool {
        // Dense draw: materialize the complement and partially shuffle.
        let mut items: Vec<u32> = (0..n_items as u32)
            .filter(|i| seen.binary_search(i).is_err())
            .collect();
        for k in 0..take {
            let j = rng.random_range(k..items.len());
            items.swap(k, j);
        }
        items.truncate(take);
        items
    } else {
        let mut picked = std::collections::HashSet::with_capacity(take);
        let mut out = Vec::with_capacity(take);
        while out.len() < take {
            let i = rng.random_range(0..n_items as u32);
            if seen.binary_search(&i).is_ok() || !picked.insert(i) {
                continue;
            }
            out.push(i);
        }
        out
    }
}

/// Train-split adjacency in both directions; lists sorted ascending.
#[derive(Debug, Clone)]
pub struct InteractionMatrix {
    pub user_items: Vec<Vec<u32>>,
    pub item_users: Vec<Vec<u32>>,
}

impl InteractionMatrix {
    pub fn n_users(&self) -> usize {
        self.user_items.len()
    }

    pub fn n_items(&self) -> usize {
        self.item_users.len()
    }

    pub fn interactions(&self) -> usize {
        self.user_items.iter().map(Vec::len).sum()
    }
}

pub fn build_interaction_matrix(
    n_users: usize,
    n_items: usize,
    train: &[(u32, u32)],
) -> InteractionMatrix {
    let mut user_items = vec![Vec::new(); n_users];
    let mut item_users = vec![Vec::new(); n_items];
    for &(u, i) in train {
        user_items[u as usize].push(i);
        item_users[i as usize].push(u);
    }
    for l in user_items.iter_mut().chain(item_users.iter_mut()) {
        l.sort_unstable();
        l.dedup();
    }
    InteractionMatrix {
        user_items,
        item_users,
    }
}

/// Exact `(degree, count)` pairs sorted by degree; zero-degree nodes are
/// omitted, so an empty adjacency yields an empty histogram.
pub fn degree_histogram(adjacency: &[Vec<u32>]) -> Vec<(usize, usize)> {
    let mut hist = std::collections::BTreeMap::new();
    for l in adjacency {
        if !l.is_empty() {
            *hist.entry(l.len()).or_insert(0usize) += 1;
        }
    }
    hist.into_iter().collect()
}

pub fn write_degree_histogram_csv(
    path: &Path,
    hist: &[(usize, usize)],
) -> Result<(), std::io::Error> {
    use std::io::Write;
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "degree,count")?;
    for (d, c) in hist {
        writeln!(f, "{d},{c}")?;
    }
    Ok(())
}

/// Synthetic two-block interaction generator used by tests and examples:
/// users and items are split into two halves, and each user mixes draws
/// from a global popularity head with draws from a taste window inside
/// the matching item block.
pub mod synth {
    use super::*;

    #[derive(Debug, Clone)]
    pub struct TwoBlockConfig {
        pub n_users: usize,
        pub n_items: usize,
        /// Interactions per user drawn uniformly from this range; a wide
        /// range yields the degree spread the hierarchy analyses expect.
        pub degree_range: (usize, usize),
        /// Probability that a taste-window draw crosses into the other
        /// block's mirrored window.
        pub cross_prob: f64,
        /// Probability that a draw follows the global popularity head
        /// instead of the user's taste window.
        pub head_prob: f64,
        pub seed: u64,
    }

    impl Default for TwoBlockConfig {
        fn default() -> Self {
            TwoBlockConfig {
                n_users: 200,
                n_items: 300,
                degree_range: (8, 18),
                cross_prob: 0.03,
                head_prob: 0.3,
                seed: 7,
            }
        }
    }

    /// Head draws pick rank `(r^HEAD_EXP * n_items)` for uniform `r`: the
    /// exponent sets how sharply popularity concentrates on low ranks.
    pub const HEAD_EXP: i32 = 6;

    pub fn user_block(cfg: &TwoBlockConfig, u: u32) -> usize {
        usize::from(u as usize >= cfg.n_users / 2)
    }

    pub fn item_block(cfg: &TwoBlockConfig, i: u32) -> usize {
        usize::from(i as usize >= cfg.n_items / 2)
    }

    /// Two-block dataset with a global popularity head and per-user taste
    /// windows; deterministic per seed. Head draws follow a quartic rank
    /// skew shared by every user, with ranks interleaved across the halves
    /// so both blocks host popular items (degree hierarchy, uninformative
    /// about block membership). The remaining draws fall near the user's
    /// own position in block-local item space (collaborative structure
    /// beyond popularity).
    pub fn two_block(cfg: &TwoBlockConfig) -> ImplicitDataset {
        let half_items = cfg.n_items / 2;
        let width_of = |block: usize| {
            if block == 1 {
                cfg.n_items - half_items
            } else {
                half_items
            }
        };
        let mut pairs = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for u in 0..cfg.n_users as u32 {
            let mut rng = rng::chacha(cfg.seed, rng::mix(0xb10c, u as u64));
            let degree = rng.random_range(cfg.degree_range.0..=cfg.degree_range.1);
            let own = user_block(cfg, u);
            // Per-user taste center: a position in block-local item space.
            // Cross draws target an independent center in the other block,
            // so they tie the user to unrelated users there without being
            // usefully predictive of the rest of the user's draws.
            let center: f64 = rng.random();
            let cross_center: f64 = rng.random();
            let mut placed = 0;
            let mut guard = 0;
            while placed < degree && guard < degree * 50 {
                guard += 1;
                let cross = rng.random_bool(cfg.cross_prob);
                let r: f64 = rng.random::<f64>();
                let i = if rng.random_bool(cfg.head_prob) {
                    // Global popularity head: rank 2k+b maps to offset k
                    // of block b.
                    let rank = (r.powi(HEAD_EXP) * cfg.n_items as f64) as usize;
                    let block = rank % 2;
                    let offset = (rank / 2).min(width_of(block) - 1);
                    (block * half_items + offset) as u32
                } else {
                    // Items near a taste center: the user's own window,
                    // or their cross window in the other block.
                    let block = if cross { 1 - own } else { own };
                    let width = width_of(block);
                    let window = (width / 8).max(4);
                    let c = if cross { cross_center } else { center };
                    let lo = (c * width as f64) as usize;
                    let offset = (lo + (r * window as f64) as usize) % width;
                    (block * half_items + offset) as u32
                };
                if seen.insert((u, i)) {
                    pairs.push((u, i));
                    placed += 1;
                }
            }
        }
        let user_labels = (0..cfg.n_users).map(|u| format!("u{u}")).collect();
        let item_labels = (0..cfg.n_items).map(|i| format!("i{i}")).collect();
        ImplicitDataset {
            user_labels,
            item_labels,
            pairs,
        }
    }
}
