//! Acceptance suite: one test per shipping criterion, each printing a
//! single `ACCEPTANCE <n> <name>: PASS|FAIL|SKIP (<detail>)` line.
//! Tolerances are pinned next to each criterion. Run with
//! `cargo test --test acceptance -- --nocapture` to see the lines.

use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use hncr_core::autodiff::check_gradient;
use hncr_core::ball;
use hncr_core::data::{
    build_interaction_matrix, load_ratings, sample_eval_negatives, split_interactions, synth,
    to_implicit, PositiveRule,
};
use hncr_core::eval::{self, ScoredPair};
use hncr_core::model::forward::{score_from_towers, FlatLayout, FlatModelLoss};
use hncr_core::model::{
    init_params, train, Ablation, Backend, ForwardCfg, Geometry, HyperParams, ModelContext,
    ModelParams,
};
use hncr_core::neighbors::{
    build_item_graph, build_user_graph, cooccurrence_neighbors, semantic_neighbors, LineConfig,
    NeighborSets, Side, WeightMode,
};
use hncr_core::rng;

fn verdict(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion} {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn skip(criterion: u32, name: &str, detail: &str) {
    println!("ACCEPTANCE {criterion} {name}: SKIP ({detail})");
}

/// Random point with ‖x‖ ≤ max_frac/√c, radius spread over [0, max].
fn ball_point(r: &mut ChaCha8Rng, dim: usize, c: f64, max_frac: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n <= 1.0 && n > 1e-3 {
            let scale = max_frac * r.random::<f64>() / (n * c.sqrt());
            return v.iter().map(|x| x * scale).collect();
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------
// 1. Gyrovector identity suite: 10⁴ random cases per identity,
//    algebraic identities ≤ 1e−9, analytic compositions ≤ 1e−8, < 10 s.
// ---------------------------------------------------------------------
#[test]
fn criterion_1_gyrovector_identities() {
    const CASES: usize = 10_000;
    const TOL_ALGEBRAIC: f64 = 1e-9;
    const TOL_ANALYTIC: f64 = 1e-8;
    const DIM: usize = 4;

    let start = Instant::now();
    let mut r = rng::chacha(0xacce97, 1);
    let mut worst_alg = 0.0f64;
    let mut worst_ana = 0.0f64;

    for _ in 0..CASES {
        let c = [0.25, 0.5, 1.0, 2.0][r.random_range(0..4)];
        let x = ball_point(&mut r, DIM, c, 0.8);
        let y = ball_point(&mut r, DIM, c, 0.8);
        let z = ball_point(&mut r, DIM, c, 0.8);
        let zero = vec![0.0; DIM];

        // Left identity: 0 ⊕ x = x.
        worst_alg = worst_alg.max(max_abs_diff(&ball::mobius_add(c, &zero, &x), &x));

        // Left inverse: (−x) ⊕ x = 0.
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        worst_alg = worst_alg.max(max_abs_diff(&ball::mobius_add(c, &neg, &x), &zero));

        // Distance symmetry.
        worst_alg = worst_alg
            .max((ball::distance(c, &x, &y) - ball::distance(c, &y, &x)).abs());

        // Scalar associativity: r₁ ⊗ (r₂ ⊗ x) = (r₁r₂) ⊗ x.
        let (r1, r2) = (r.random::<f64>() * 4.0 - 2.0, r.random::<f64>() * 4.0 - 2.0);
        let lhs = ball::mobius_scalar_mul(c, r1, &ball::mobius_scalar_mul(c, r2, &x));
        let rhs = ball::mobius_scalar_mul(c, r1 * r2, &x);
        worst_ana = worst_ana.max(max_abs_diff(&lhs, &rhs));

        // Matvec associativity: M′ ⊗ (M ⊗ x) = (M′M) ⊗ x.
        let m: Vec<f64> = (0..DIM * DIM).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let m2: Vec<f64> = (0..DIM * DIM).map(|_| r.random::<f64>() * 2.0 - 1.0).collect();
        let lhs = ball::mobius_matvec(c, &m2, DIM, &ball::mobius_matvec(c, &m, DIM, &x));
        let mut prod = vec![0.0; DIM * DIM];
        for i in 0..DIM {
            for j in 0..DIM {
                for k in 0..DIM {
                    prod[i * DIM + j] += m2[i * DIM + k] * m[k * DIM + j];
                }
            }
        }
        let rhs = ball::mobius_matvec(c, &prod, DIM, &x);
        worst_ana = worst_ana.max(max_abs_diff(&lhs, &rhs));

        // Exp/log inversion at a random base point.
        let back = ball::exp_map(c, &x, &ball::log_map(c, &x, &y));
        worst_ana = worst_ana.max(max_abs_diff(&back, &y));

        // Triangle inequality (sampled).
        let dxz = ball::distance(c, &x, &z);
        let dxy = ball::distance(c, &x, &y);
        let dyz = ball::distance(c, &y, &z);
        worst_ana = worst_ana.max(dxz - (dxy + dyz));
    }

    let elapsed = start.elapsed().as_secs_f64();
    verdict(
        1,
        "gyrovector-identities",
        worst_alg <= TOL_ALGEBRAIC && worst_ana <= TOL_ANALYTIC && elapsed < 10.0,
        &format!(
            "10k cases/identity, c in {{0.25,0.5,1,2}}; worst algebraic {worst_alg:.2e} \
             (tol 1e-9), worst analytic {worst_ana:.2e} (tol 1e-8), {elapsed:.1}s"
        ),
    );
}

// ---------------------------------------------------------------------
// 2. Euclidean limit: c = 1e−6 Möbius addition within 1e−4 of vector
//    addition for ‖x‖, ‖y‖ ≤ 1.
// ---------------------------------------------------------------------
#[test]
fn criterion_2_euclidean_limit() {
    const CASES: usize = 10_000;
    const C: f64 = 1e-6;
    const TOL: f64 = 1e-4;

    let mut r = rng::chacha(0xacce97, 2);
    let mut worst = 0.0f64;
    for _ in 0..CASES {
        let x = ball_point(&mut r, 4, 1.0, 1.0);
        let y = ball_point(&mut r, 4, 1.0, 1.0);
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        worst = worst.max(max_abs_diff(&ball::mobius_add(C, &x, &y), &sum));
    }
    verdict(
        2,
        "euclidean-limit",
        worst <= TOL,
        &format!("10k pairs with norms <= 1 at c = 1e-6; worst deviation {worst:.2e} (tol 1e-4)"),
    );
}

// ---------------------------------------------------------------------
// 3. Gradient acceptance: full model loss on a 5-user/5-item instance
//    (d = 8, L = 1), both backends, analytic vs central differences,
//    max relative error ≤ 1e−4, < 30 s.
// ---------------------------------------------------------------------
#[test]
fn criterion_3_full_model_gradients() {
    const TOL: f64 = 1e-4;
    const H: f64 = 1e-6;

    let start = Instant::now();
    // 5 users x 5 items, two blocks, K = 2 semantic neighbors.
    let pairs: Vec<(u32, u32)> = vec![
        (0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 2),
        (3, 3), (3, 4), (4, 3), (4, 4), (0, 3),
    ];
    let matrix = build_interaction_matrix(5, 5, &pairs);
    let nb = |side| NeighborSets {
        side,
        k: 2,
        seed: 0,
        weight_mode: WeightMode::HeatPopularity,
        lists: vec![vec![1, 2], vec![0, 2], vec![0, 1], vec![4], vec![3]],
    };
    let ctx = ModelContext::new(&matrix, &nb(Side::User), &nb(Side::Item)).unwrap();
    let triplets = vec![(0u32, 0u32, 4u32), (1, 2, 3), (3, 4, 0), (2, 1, 4)];

    let mut detail = String::new();
    let mut pass = true;
    for backend in [Backend::Hyperbolic, Backend::Euclidean] {
        let geo = Geometry::new(backend, 1.0);
        let mut params = init_params::<f64>(geo, 5, 5, 8, 1, 17);
        // Points at a generic magnitude: the training init (±1e−3)
        // leaves matrix gradients near 1e−8, where central differences
        // drown in f64 cancellation noise.
        let mut r = rng::chacha(0xacce97, 3);
        for family in [
            &mut params.user_emb,
            &mut params.item_emb,
            &mut params.user_biases,
            &mut params.item_biases,
        ] {
            for v in family.iter_mut() {
                let raw: Vec<f64> =
                    v.iter().map(|_| (r.random::<f64>() * 2.0 - 1.0) * 0.3).collect();
                *v = geo.constrain(&raw);
            }
        }
        let mut hyper = HyperParams::defaults(backend);
        hyper.dim = 8;
        hyper.layers = 1;
        let loss = FlatModelLoss {
            cfg: ForwardCfg::from_hyper(&hyper),
            ctx: &ctx,
            layout: FlatLayout::of(&params),
            triplets: triplets.clone(),
        };
        let report = check_gradient(&loss, &params.flatten(), H, TOL).unwrap();
        pass &= report.passed();
        detail.push_str(&format!(
            "{}: {} params, max rel err {:.2e}; ",
            backend.token(),
            params.param_count(),
            report.max_rel_err
        ));
    }
    let elapsed = start.elapsed().as_secs_f64();
    pass &= elapsed < 30.0;
    detail.push_str(&format!("tol 1e-4, {elapsed:.1}s"));
    verdict(3, "full-model-gradients", pass, &detail);
}

// ---------------------------------------------------------------------
// 4. Decoder: ŷ = 0.5 exactly at d = r, and strictly decreasing over a
//    sampled distance grid.
// ---------------------------------------------------------------------
#[test]
fn criterion_4_decoder() {
    let radius = 2.0;
    let t = 1.0;

    // Euclidean towers at distance exactly r give exp(0) = 1 exactly.
    let geo_e: Geometry<f64> = Geometry::Euclidean;
    let u = vec![0.0, 0.0, 0.0];
    let v = vec![radius, 0.0, 0.0];
    let at_r = score_from_towers(
        &cfg_for(geo_e, radius, t),
        &u,
        &v,
    );
    let exact = at_r == 0.5;

    // Strict monotonicity across both backends' distance ranges.
    let mut monotone = true;
    let mut prev = f64::INFINITY;
    for k in 0..=600 {
        let d = 0.01 * k as f64;
        let p = score_from_towers(&cfg_for(geo_e, radius, t), &vec![0.0, 0.0, 0.0], &vec![d, 0.0, 0.0]);
        monotone &= p < prev;
        prev = p;
    }
    let geo_h: Geometry<f64> = Geometry::Hyperbolic { c: 1.0 };
    let mut prev_h = f64::INFINITY;
    for k in 0..=90 {
        // Points marching toward the boundary: distance grows monotonically.
        let x = 0.01 * k as f64;
        let p = score_from_towers(&cfg_for(geo_h, radius, t), &vec![0.0, 0.0, 0.0], &vec![x, 0.0, 0.0]);
        monotone &= p < prev_h;
        prev_h = p;
    }

    verdict(
        4,
        "fermi-dirac-decoder",
        exact && monotone,
        &format!(
            "score at d = r is {at_r} (exact half: {exact}); strictly decreasing on 600-step \
             euclidean grid and 90-step ball grid: {monotone}"
        ),
    );
}

fn cfg_for(geo: Geometry<f64>, radius: f64, t: f64) -> ForwardCfg<f64> {
    ForwardCfg {
        geo,
        tau: 0.1,
        radius,
        decoder_t: t,
        layers: 0,
        ablation: Ablation::default(),
    }
}

// ---------------------------------------------------------------------
// Shared synthetic-pipeline helpers for criteria 5, 7, 8.
// ---------------------------------------------------------------------

struct SynthRun {
    ctx: ModelContext,
    train_pairs: Vec<(u32, u32)>,
    test_scored_input: Vec<(u32, u32, bool)>,
}

/// Builds context + fixed test negatives for one neighbor choice.
fn synth_run(
    ds: &hncr_core::data::ImplicitDataset,
    split: &hncr_core::data::DatasetSplit,
    users: &NeighborSets,
    items: &NeighborSets,
    seed: u64,
) -> SynthRun {
    let matrix = build_interaction_matrix(ds.n_users(), ds.n_items(), &split.train);
    let ctx = ModelContext::new(&matrix, users, items).unwrap();
    let interacted = ds.user_interacted();
    let test = sample_eval_negatives(
        &split.test,
        &interacted,
        ds.n_items(),
        seed,
        rng::tag::NEG_TEST,
    );
    SynthRun {
        ctx,
        train_pairs: split.train.clone(),
        test_scored_input: test.pairs,
    }
}

fn train_and_test_auc(hyper: &HyperParams, run: &SynthRun) -> f64 {
    let geo: Geometry<f64> = hyper.geometry();
    let init = init_params(
        geo,
        run.ctx.n_users(),
        run.ctx.n_items(),
        hyper.dim,
        hyper.layers,
        hyper.seed,
    );
    let outcome = train(hyper, &run.ctx, &run.train_pairs, None, init);
    params_test_auc(hyper, &outcome.params, run)
}

fn params_test_auc(hyper: &HyperParams, params: &ModelParams<f64>, run: &SynthRun) -> f64 {
    let fcfg: ForwardCfg<f64> = ForwardCfg::from_hyper(hyper);
    let (ut, it) = eval::compute_towers(&fcfg, params, &run.ctx);
    let scored = eval::score_pairs(&fcfg, &ut, &it, &run.test_scored_input);
    eval::auc(&scored).unwrap()
}

fn same_block_fraction(
    lists: &[Vec<u32>],
    block_of: impl Fn(u32) -> usize,
) -> f64 {
    let (mut same, mut total) = (0usize, 0usize);
    for (node, l) in lists.iter().enumerate() {
        for &n in l {
            total += 1;
            same += usize::from(block_of(n) == block_of(node as u32));
        }
    }
    same as f64 / total.max(1) as f64
}

// ---------------------------------------------------------------------
// 5. Synthetic end-to-end: 200-user/300-item two-block dataset, 80/20
//    split — test AUC ≥ 0.85 within 100 epochs on one core in < 5 min,
//    and semantic neighbors ≥ 90% same-block at K = 5.
// 8. Hierarchy: group-1 average degree ≥ group-4 average degree on the
//    model trained here.
// ---------------------------------------------------------------------
#[test]
fn criterion_5_and_8_synthetic_end_to_end() {
    const AUC_MIN: f64 = 0.85;
    const SAME_BLOCK_MIN: f64 = 0.90;
    const TIME_LIMIT_S: f64 = 300.0;
    const K: usize = 5;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();

    let scfg = synth::TwoBlockConfig::default(); // 200 x 300 two-block
    let ds = synth::two_block(&scfg);
    let split = split_interactions(&ds, [0.8, 0.0, 0.2], 42).unwrap();

    // Shallow towers: aggregation, attention, and the hyperbolic decoder
    // carry the synthetic structure; the layer-stack gradients are
    // covered by criterion 3.
    let mut hyper = HyperParams::defaults(Backend::Hyperbolic);
    hyper.dim = 16;
    hyper.layers = 0;
    hyper.k_users = K;
    hyper.k_items = K;
    hyper.lr = 0.01;
    hyper.batch = 512;
    hyper.epochs = 100;
    hyper.temperature = 0.3;
    hyper.seed = 42;

    let start = Instant::now();
    let (auc, frac_u, frac_i, groups) = pool.install(|| {
        let matrix = build_interaction_matrix(ds.n_users(), ds.n_items(), &split.train);
        let wm = WeightMode::HeatPopularity;
        let lc = LineConfig {
            dim: 16,
            epochs: 80,
            negatives: 5,
            lr0: 0.05,
            seed: rng::mix(42, rng::tag::LINE_USER),
        };
        let users = semantic_neighbors(&build_user_graph(&matrix, wm), Side::User, wm, &lc, K);
        let items = semantic_neighbors(
            &build_item_graph(&matrix, wm),
            Side::Item,
            wm,
            &LineConfig { seed: rng::mix(42, rng::tag::LINE_ITEM), ..lc },
            K,
        );
        let frac_u = same_block_fraction(&users.sets.lists, |u| synth::user_block(&scfg, u));
        let frac_i = same_block_fraction(&items.sets.lists, |i| synth::item_block(&scfg, i));

        let run = synth_run(&ds, &split, &users.sets, &items.sets, 42);
        let geo: Geometry<f64> = hyper.geometry();
        let init = init_params(geo, ds.n_users(), ds.n_items(), hyper.dim, hyper.layers, 42);
        let outcome = train(&hyper, &run.ctx, &run.train_pairs, None, init);
        let auc = params_test_auc(&hyper, &outcome.params, &run);
        let groups = eval::hierarchy_bins(geo, &outcome.params, &matrix, 4);
        (auc, frac_u, frac_i, groups)
    });
    let elapsed = start.elapsed().as_secs_f64();

    verdict(
        5,
        "synthetic-end-to-end",
        auc >= AUC_MIN && frac_u >= SAME_BLOCK_MIN && frac_i >= SAME_BLOCK_MIN
            && elapsed < TIME_LIMIT_S,
        &format!(
            "test AUC {auc:.4} (min 0.85) after {} epochs; same-block neighbors at K=5: \
             users {frac_u:.3}, items {frac_i:.3} (min 0.90); single-core {elapsed:.0}s (limit 300s)",
            hyper.epochs
        ),
    );

    let g1 = groups.first().unwrap();
    let g4 = groups.last().unwrap();
    verdict(
        8,
        "hierarchy-degree-ordering",
        groups.len() == 4 && g1.avg_degree >= g4.avg_degree,
        &format!(
            "group-1 avg degree {:.2} vs group-4 {:.2}; origin distances {:.3} -> {:.3}",
            g1.avg_degree, g4.avg_degree, g1.avg_dist_to_origin, g4.avg_dist_to_origin
        ),
    );
}

// ---------------------------------------------------------------------
// 6. Paper-scale replication on Ciao (147,995 interactions): HNCR AUC
//    within ±0.03 of 0.8002, ENCR within ±0.03 of 0.7763, and
//    HNCR > ENCR. Runs only when HNCR_CIAO points at the ratings file;
//    the dataset is not redistributable with this repository.
// ---------------------------------------------------------------------
#[test]
fn criterion_6_ciao_replication() {
    const HNCR_BAND: (f64, f64) = (0.8002 - 0.03, 0.8002 + 0.03);
    const ENCR_BAND: (f64, f64) = (0.7763 - 0.03, 0.7763 + 0.03);

    let Some(path) = std::env::var_os("HNCR_CIAO") else {
        skip(
            6,
            "ciao-replication",
            "Ciao dataset not available in the build environment; \
             set HNCR_CIAO=/path/to/ratings.txt (user item rating rows) to run",
        );
        return;
    };
    let path = std::path::PathBuf::from(path);
    let report = load_ratings(&path).expect("HNCR_CIAO must point at a readable ratings file");
    let ds = to_implicit(&report.records, PositiveRule::AllObserved).unwrap();
    let split = split_interactions(&ds, [0.8, 0.1, 0.1], 42).unwrap();
    let matrix = build_interaction_matrix(ds.n_users(), ds.n_items(), &split.train);
    let interacted = ds.user_interacted();
    let val = sample_eval_negatives(&split.val, &interacted, ds.n_items(), 42, rng::tag::NEG_VAL);

    let wm = WeightMode::HeatPopularity;
    let lc = LineConfig {
        seed: rng::mix(42, rng::tag::LINE_USER),
        ..LineConfig::default()
    };
    let users = semantic_neighbors(&build_user_graph(&matrix, wm), Side::User, wm, &lc, 15);
    let items = semantic_neighbors(
        &build_item_graph(&matrix, wm),
        Side::Item,
        wm,
        &LineConfig { seed: rng::mix(42, rng::tag::LINE_ITEM), ..lc },
        15,
    );
    let run = synth_run(&ds, &split, &users.sets, &items.sets, 42);

    let mut aucs = Vec::new();
    for backend in [Backend::Hyperbolic, Backend::Euclidean] {
        let hyper = HyperParams::defaults(backend);
        let geo: Geometry<f64> = hyper.geometry();
        let init = init_params(geo, ds.n_users(), ds.n_items(), hyper.dim, hyper.layers, 42);
        let outcome = train(&hyper, &run.ctx, &run.train_pairs, Some(&val), init);
        aucs.push(params_test_auc(&hyper, &outcome.params, &run));
    }
    let (hncr, encr) = (aucs[0], aucs[1]);
    verdict(
        6,
        "ciao-replication",
        (HNCR_BAND.0..=HNCR_BAND.1).contains(&hncr)
            && (ENCR_BAND.0..=ENCR_BAND.1).contains(&encr)
            && hncr > encr,
        &format!(
            "HNCR AUC {hncr:.4} (band {:.4}..{:.4}), ENCR AUC {encr:.4} (band {:.4}..{:.4})",
            HNCR_BAND.0, HNCR_BAND.1, ENCR_BAND.0, ENCR_BAND.1
        ),
    );
}

// ---------------------------------------------------------------------
// 7. Ablation ordering on the synthetic dataset: full model ≥ each of
//    -S (no semantic), -H (no history), -A (uniform attention),
//    -C (co-occurrence neighbors), -N (common-count weights),
//    -0 (unweighted) in test AUC averaged over 3 seeds.
// ---------------------------------------------------------------------
#[test]
fn criterion_7_ablation_ordering() {
    const SEEDS: [u64; 3] = [1, 2, 3];
    const K: usize = 5;

    // Noisier blocks than criterion 5: cross-window ties pollute the
    // neighbor lists, so the attention and weighting components only
    // separate once the structure is no longer trivially learnable.
    let scfg = synth::TwoBlockConfig {
        cross_prob: 0.10,
        ..synth::TwoBlockConfig::default()
    };
    let ds = synth::two_block(&scfg);
    let split = split_interactions(&ds, [0.8, 0.0, 0.2], 42).unwrap();
    let matrix = build_interaction_matrix(ds.n_users(), ds.n_items(), &split.train);

    let semantic_sets = |wm: WeightMode| {
        let lc = LineConfig {
            dim: 16,
            epochs: 80,
            negatives: 5,
            lr0: 0.05,
            seed: rng::mix(42, rng::tag::LINE_USER),
        };
        (
            semantic_neighbors(&build_user_graph(&matrix, wm), Side::User, wm, &lc, K).sets,
            semantic_neighbors(
                &build_item_graph(&matrix, wm),
                Side::Item,
                wm,
                &LineConfig { seed: rng::mix(42, rng::tag::LINE_ITEM), ..lc },
                K,
            )
            .sets,
        )
    };
    let paper_sets = semantic_sets(WeightMode::HeatPopularity);
    let common_sets = semantic_sets(WeightMode::CommonCount);
    let none_sets = semantic_sets(WeightMode::Unweighted);
    let cooc_sets = (
        cooccurrence_neighbors(
            &build_user_graph(&matrix, WeightMode::HeatPopularity),
            Side::User,
            WeightMode::HeatPopularity,
            42,
            K,
        ),
        cooccurrence_neighbors(
            &build_item_graph(&matrix, WeightMode::HeatPopularity),
            Side::Item,
            WeightMode::HeatPopularity,
            42,
            K,
        ),
    );

    let base_hyper = |seed: u64| {
        let mut h = HyperParams::defaults(Backend::Hyperbolic);
        h.dim = 16;
        h.layers = 0;
        h.k_users = K;
        h.k_items = K;
        h.lr = 0.01;
        h.batch = 512;
        h.epochs = 100;
        h.temperature = 0.3;
        h.seed = seed;
        h
    };

    let variants: Vec<(&str, Ablation, &(NeighborSets, NeighborSets))> = vec![
        ("full", Ablation::default(), &paper_sets),
        ("-S", Ablation { no_semantic: true, ..Default::default() }, &paper_sets),
        ("-H", Ablation { no_history: true, ..Default::default() }, &paper_sets),
        ("-A", Ablation { uniform_attention: true, ..Default::default() }, &paper_sets),
        ("-C", Ablation::default(), &cooc_sets),
        ("-N", Ablation::default(), &common_sets),
        ("-0", Ablation::default(), &none_sets),
    ];

    let mut means = Vec::new();
    for (name, ablation, sets) in &variants {
        let run = synth_run(&ds, &split, &sets.0, &sets.1, 42);
        let mut sum = 0.0;
        for &seed in &SEEDS {
            let mut h = base_hyper(seed);
            h.ablation = *ablation;
            sum += train_and_test_auc(&h, &run);
        }
        means.push((*name, sum / SEEDS.len() as f64));
    }

    let full = means[0].1;
    let pass = means[1..].iter().all(|(_, m)| full >= *m);
    let detail = means
        .iter()
        .map(|(n, m)| format!("{n} {m:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    verdict(
        7,
        "ablation-ordering",
        pass,
        &format!("mean test AUC over seeds {SEEDS:?}: {detail}"),
    );
}

// ---------------------------------------------------------------------
// 9. Evaluator oracle equivalence: rank-sum AUC equals brute-force
//    pairwise AUC on 200-pair inputs exactly, ties counted 0.5.
// ---------------------------------------------------------------------
#[test]
fn criterion_9_auc_oracle_equivalence() {
    const DATASETS: usize = 100;

    let mut r = rng::chacha(0xacce97, 9);
    let mut checked = 0;
    for case in 0..DATASETS {
        // Coarse score grid forces heavy ties.
        let scored: Vec<ScoredPair> = (0..200u32)
            .map(|i| ScoredPair {
                user: 0,
                item: i,
                score: r.random_range(0..12) as f64 / 11.0,
                label: r.random::<f64>() < 0.3,
            })
            .collect();
        if !scored.iter().any(|p| p.label) || !scored.iter().any(|p| !p.label) {
            continue;
        }
        let fast = eval::auc(&scored).unwrap();
        let slow = eval::auc_pairwise(&scored).unwrap();
        assert!(
            fast == slow,
            "case {case}: rank-sum {fast} != pairwise {slow}"
        );
        checked += 1;
    }
    // All scores identical: AUC must be exactly one half.
    let tied: Vec<ScoredPair> = (0..200)
        .map(|i| ScoredPair { user: 0, item: i, score: 0.25, label: i % 3 == 0 })
        .collect();
    let tied_auc = eval::auc(&tied).unwrap();
    verdict(
        9,
        "auc-oracle-equivalence",
        checked > 90 && tied_auc == 0.5 && eval::auc_pairwise(&tied).unwrap() == 0.5,
        &format!(
            "{checked} random 200-pair datasets bitwise-equal; all-tied input gives exactly {tied_auc}"
        ),
    );
}
