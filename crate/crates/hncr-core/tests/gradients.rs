//! Finite-difference validation of every composite gyrovector
//! operation at random in-ball points away from the boundary
//! (‖x‖ ≤ 0.8), plus the decoder score. Central differences, h = 1e−5,
//! relative tolerance 1e−4.

use rand::Rng;

use hncr_core::autodiff::{check_gradient, LossFn, Tape, Var};
use hncr_core::ball;
use hncr_core::num::Value;
use hncr_core::rng;

const DIM: usize = 3;
const CURV: f64 = 1.0;
const POINTS: usize = 100;
const H: f64 = 1e-5;
const TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
enum GyroOp {
    MobiusAdd,
    ScalarMul,
    Matvec,
    ExpMap,
    LogMap,
    DistanceSquared,
    Conformal,
    FermiDirac,
}

impl GyroOp {
    /// Parameter count: one or two ball points, plus a matrix for
    /// matvec (appended after the point).
    fn arity(self) -> usize {
        match self {
            GyroOp::ScalarMul | GyroOp::Conformal => DIM,
            GyroOp::Matvec => DIM + DIM * DIM,
            _ => 2 * DIM,
        }
    }
}

struct GyroLoss(GyroOp);

fn eval_op<V: Value<f64>>(op: GyroOp, theta: &[V]) -> V {
    let c = CURV;
    let sq_norm = |v: Vec<V>| -> V {
        let mut acc = v[0] * v[0];
        for t in &v[1..] {
            acc = acc + *t * *t;
        }
        acc
    };
    match op {
        GyroOp::MobiusAdd => sq_norm(ball::mobius_add(c, &theta[..DIM], &theta[DIM..])),
        GyroOp::ScalarMul => sq_norm(ball::mobius_scalar_mul(c, 0.7, theta)),
        GyroOp::Matvec => sq_norm(ball::mobius_matvec(c, &theta[DIM..], DIM, &theta[..DIM])),
        GyroOp::ExpMap => sq_norm(ball::exp_map(c, &theta[..DIM], &theta[DIM..])),
        GyroOp::LogMap => sq_norm(ball::log_map(c, &theta[..DIM], &theta[DIM..])),
        GyroOp::DistanceSquared => {
            let d = ball::distance(c, &theta[..DIM], &theta[DIM..]);
            d * d
        }
        GyroOp::Conformal => ball::conformal_factor(c, theta),
        GyroOp::FermiDirac => {
            // Decoder probability 1/(e^{(d−r)/t}+1) via the stable
            // sigmoid branch used by the model.
            let d = ball::distance(c, &theta[..DIM], &theta[DIM..]);
            let z = d - d.lit(2.0);
            let w = (-z).exp();
            w / (w + d.lit(1.0))
        }
    }
}

impl LossFn<f64> for GyroLoss {
    fn eval_plain(&self, theta: &[f64]) -> f64 {
        eval_op(self.0, theta)
    }

    fn eval_tape<'t>(&self, tape: &'t Tape<f64>, theta: &[Var<'t, f64>]) -> Var<'t, f64> {
        let _ = tape;
        eval_op(self.0, theta)
    }
}

/// Coordinates uniform in ±0.46 keep every 3-vector inside ‖x‖ ≤ 0.8.
fn draw_point(r: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| (r.random::<f64>() * 2.0 - 1.0) * 0.46).collect()
}

#[test]
fn composite_ops_match_finite_differences_at_random_points() {
    for (tag, op) in [
        (1u64, GyroOp::MobiusAdd),
        (2, GyroOp::ScalarMul),
        (3, GyroOp::Matvec),
        (4, GyroOp::ExpMap),
        (5, GyroOp::LogMap),
        (6, GyroOp::DistanceSquared),
        (7, GyroOp::Conformal),
        (8, GyroOp::FermiDirac),
    ] {
        let mut r = rng::chacha(0x9fad, tag);
        let loss = GyroLoss(op);
        for case in 0..POINTS {
            let mut theta = match op {
                GyroOp::ScalarMul | GyroOp::Conformal | GyroOp::Matvec => draw_point(&mut r, DIM),
                _ => draw_point(&mut r, 2 * DIM),
            };
            if matches!(op, GyroOp::Matvec) {
                // Matrix entries need no ball constraint.
                theta.extend((0..DIM * DIM).map(|_| r.random::<f64>() * 2.0 - 1.0));
            }
            debug_assert_eq!(theta.len(), op.arity());
            if matches!(op, GyroOp::DistanceSquared | GyroOp::FermiDirac | GyroOp::LogMap) {
                // Coincident endpoints make the distance kernel
                // non-differentiable; the draws above never collide.
                let (x, y) = theta.split_at(DIM);
                assert!(x.iter().zip(y).any(|(a, b)| (a - b).abs() > 1e-6));
            }
            let report = check_gradient(&loss, &theta, H, TOL).unwrap();
            assert!(
                report.passed(),
                "{op:?} case {case}: {} failures, worst rel err {:e} at {}",
                report.failures,
                report.max_rel_err,
                report.worst_index
            );
        }
    }
}

/// The distance-squared loss at two fixed nearby points: the example
/// pins h = 1e−5 and relative 1e−4 explicitly.
#[test]
fn distance_squared_at_fixed_points() {
    let theta = vec![0.1, -0.2, 0.3, 0.15, -0.25, 0.05];
    let report = check_gradient(&GyroLoss(GyroOp::DistanceSquared), &theta, H, TOL).unwrap();
    assert!(report.passed(), "worst rel err {:e}", report.max_rel_err);
}

#[test]
fn decoder_score_of_fixed_pair() {
    let theta = vec![0.3, 0.1, -0.2, -0.4, 0.2, 0.25];
    let report = check_gradient(&GyroLoss(GyroOp::FermiDirac), &theta, H, TOL).unwrap();
    assert!(report.passed(), "worst rel err {:e}", report.max_rel_err);
}
