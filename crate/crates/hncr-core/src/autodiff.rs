//! Reverse-mode automatic differentiation on a flat tape.
//!
//! A [`Tape`] records every scalar operation as it is evaluated; a
//! [`Var`] is a copyable handle into the tape and implements [`Value`],
//! so any function written against that trait can be differentiated by
//! running it on tape variables. [`Tape::gradient`] replays the tape in
//! reverse, accumulating adjoints.
//!
//! Model parameters are registered through [`Tape::leaf_vec`] under a
//! caller-chosen [`ParamId`]; a parameter registered several times on one
//! tape contributes the sum of its occurrences' adjoints, which is the
//! correct total derivative.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use crate::num::{atanh_arg_limit, Real, Value};

/// Identifies a registered parameter vector; the encoding of the payload
/// is up to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub u64);

#[derive(Debug, Error, PartialEq)]
pub enum DiffError {
    #[error("non-finite value produced by `{op}` at tape index {index}")]
    NonFinite { op: &'static str, index: usize },
}

#[derive(Clone, Copy)]
enum Op<S> {
    Leaf,
    Const,
    Add(u32, u32),
    Sub(u32, u32),
    Mul(u32, u32),
    Div(u32, u32),
    AddC(u32, S),
    MulC(u32, S),
    Neg(u32),
    Tanh(u32),
    Atanh(u32),
    Exp(u32),
    Ln(u32),
    Sqrt(u32),
    LeakyRelu(u32, S),
    ClampBox(u32, S, S),
    MaxLit(u32, S),
}

impl<S> Op<S> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Const => "const",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddC(..) => "add_const",
            Op::MulC(..) => "mul_const",
            Op::Neg(..) => "neg",
            Op::Tanh(..) => "tanh",
            Op::Atanh(..) => "atanh",
            Op::Exp(..) => "exp",
            Op::Ln(..) => "ln",
            Op::Sqrt(..) => "sqrt",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::ClampBox(..) => "clamp",
            Op::MaxLit(..) => "max",
        }
    }
}

struct TapeInner<S> {
    vals: Vec<S>,
    ops: Vec<Op<S>>,
    // Registered parameter groups: (id, first slot, length).
    groups: Vec<(ParamId, u32, u32)>,
}

/// Recording tape; cleared and reused between independent evaluations.
pub struct Tape<S: Real> {
    inner: RefCell<TapeInner<S>>,
}

impl<S: Real> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Real> Tape<S> {
    pub fn new() -> Self {
        Tape {
            inner: RefCell::new(TapeInner {
                vals: Vec::new(),
                ops: Vec::new(),
                groups: Vec::new(),
            }),
        }
    }

    /// Drops all recorded nodes but keeps allocated capacity.
    pub fn clear(&mut self) {
        let inner = self.inner.get_mut();
        inner.vals.clear();
        inner.ops.clear();
        inner.groups.clear();
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, op: Op<S>, val: S) -> Var<'_, S> {
        let mut inner = self.inner.borrow_mut();
        let idx = inner.vals.len() as u32;
        inner.vals.push(val);
        inner.ops.push(op);
        Var { tape: self, idx }
    }

    pub fn constant(&self, v: S) -> Var<'_, S> {
        self.push(Op::Const, v)
    }

    /// An input variable not tied to any parameter.
    pub fn leaf(&self, v: S) -> Var<'_, S> {
        self.push(Op::Leaf, v)
    }

    /// Registers a parameter vector and returns one variable per entry.
    pub fn leaf_vec(&self, id: ParamId, vals: &[S]) -> Vec<Var<'_, S>> {
        let start = self.len() as u32;
        let out: Vec<Var<'_, S>> = vals.iter().map(|&v| self.leaf(v)).collect();
        self.inner
            .borrow_mut()
            .groups
            .push((id, start, vals.len() as u32));
        out
    }

    pub fn value_of(&self, v: Var<'_, S>) -> S {
        self.inner.borrow().vals[v.idx as usize]
    }

    /// Reverse pass from `output`; fails on any non-finite intermediate,
    /// naming the primitive that produced it.
    pub fn gradient(&self, output: Var<'_, S>) -> Result<Gradients<S>, DiffError> {
        let inner = self.inner.borrow();
        debug_assert!(std::ptr::eq(output.tape, self));
        for (i, v) in inner.vals.iter().enumerate() {
            if !v.is_finite() {
                return Err(DiffError::NonFinite {
                    op: inner.ops[i].name(),
                    index: i,
                });
            }
        }
        let n = inner.vals.len();
        let mut adj = vec![S::zero(); n];
        adj[output.idx as usize] = S::one();
        let vals = &inner.vals;
        let one = S::one();
        let two = S::real(2.0);
        let lim = atanh_arg_limit::<S>();
        for i in (0..=output.idx as usize).rev() {
            let g = adj[i];
            if g == S::zero() {
                continue;
            }
            match inner.ops[i] {
                Op::Leaf | Op::Const => {}
                Op::Add(a, b) => {
                    adj[a as usize] += g;
                    adj[b as usize] += g;
                }
                Op::Sub(a, b) => {
                    adj[a as usize] += g;
                    adj[b as usize] -= g;
                }
                Op::Mul(a, b) => {
                    adj[a as usize] += g * vals[b as usize];
                    adj[b as usize] += g * vals[a as usize];
                }
                Op::Div(a, b) => {
                    let vb = vals[b as usize];
                    adj[a as usize] += g / vb;
                    adj[b as usize] -= g * vals[i] / vb;
                }
                Op::AddC(a, _) => adj[a as usize] += g,
                Op::MulC(a, c) => adj[a as usize] += g * c,
                Op::Neg(a) => adj[a as usize] -= g,
                Op::Tanh(a) => {
                    let y = vals[i];
                    adj[a as usize] += g * (one - y * y);
                }
                Op::Atanh(a) => {
                    let x = vals[a as usize];
                    if x.abs() <= lim {
                        adj[a as usize] += g / (one - x * x);
                    }
                }
                Op::Exp(a) => adj[a as usize] += g * vals[i],
                Op::Ln(a) => adj[a as usize] += g / vals[a as usize],
                Op::Sqrt(a) => adj[a as usize] += g / (two * vals[i]),
                Op::LeakyRelu(a, slope) => {
                    let d = if vals[a as usize] >= S::zero() { one } else { slope };
                    adj[a as usize] += g * d;
                }
                Op::ClampBox(a, lo, hi) => {
                    let x = vals[a as usize];
                    if x >= lo && x <= hi {
                        adj[a as usize] += g;
                    }
                }
                Op::MaxLit(a, lo) => {
                    if vals[a as usize] >= lo {
                        adj[a as usize] += g;
                    }
                }
            }
        }
        Ok(Gradients {
            adjoints: adj,
            groups: inner.groups.clone(),
        })
    }
}

/// Adjoints of one reverse pass.
#[derive(Debug)]
pub struct Gradients<S> {
    adjoints: Vec<S>,
    groups: Vec<(ParamId, u32, u32)>,
}

impl<S: Real> Gradients<S> {
    pub fn wrt(&self, v: Var<'_, S>) -> S {
        self.adjoints[v.idx as usize]
    }

    /// Adjoint slices of every registered parameter group, in
    /// registration order; ids repeat if a parameter was registered
    /// more than once.
    pub fn params(&self) -> impl Iterator<Item = (ParamId, &[S])> {
        self.groups.iter().map(move |&(id, start, len)| {
            (id, &self.adjoints[start as usize..(start + len) as usize])
        })
    }
}

/// Handle to a tape slot.
#[derive(Clone, Copy)]
pub struct Var<'t, S: Real> {
    tape: &'t Tape<S>,
    idx: u32,
}

impl<S: Real> fmt::Debug for Var<'_, S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var[{}]={:?}", self.idx, self.value())
    }
}

impl<'t, S: Real> Var<'t, S> {
    fn same_tape(self, other: Var<'t, S>) -> &'t Tape<S> {
        debug_assert!(std::ptr::eq(self.tape, other.tape), "vars from different tapes");
        self.tape
    }
}

impl<'t, S: Real> Add for Var<'t, S> {
    type Output = Var<'t, S>;
    fn add(self, rhs: Self) -> Self::Output {
        let v = self.value() + rhs.value();
        self.same_tape(rhs).push(Op::Add(self.idx, rhs.idx), v)
    }
}

impl<'t, S: Real> Sub for Var<'t, S> {
    type Output = Var<'t, S>;
    fn sub(self, rhs: Self) -> Self::Output {
        let v = self.value() - rhs.value();
        self.same_tape(rhs).push(Op::Sub(self.idx, rhs.idx), v)
    }
}

impl<'t, S: Real> Mul for Var<'t, S> {
    type Output = Var<'t, S>;
    fn mul(self, rhs: Self) -> Self::Output {
        let v = self.value() * rhs.value();
        self.same_tape(rhs).push(Op::Mul(self.idx, rhs.idx), v)
    }
}

impl<'t, S: Real> Div for Var<'t, S> {
    type Output = Var<'t, S>;
    fn div(self, rhs: Self) -> Self::Output {
        let v = self.value() / rhs.value();
        self.same_tape(rhs).push(Op::Div(self.idx, rhs.idx), v)
    }
}

impl<'t, S: Real> Neg for Var<'t, S> {
    type Output = Var<'t, S>;
    fn neg(self) -> Self::Output {
        let v = -self.value();
        self.tape.push(Op::Neg(self.idx), v)
    }
}

impl<'t, S: Real> Add<S> for Var<'t, S> {
    type Output = Var<'t, S>;
    fn add(self, c: S) -> Self::Output {
        let v = self.value() + c;
        self.tape.push(Op::AddC(self.idx, c), v)
    }
}

impl<'t, S: Real> Sub<S> for Var<'t, S> {
    type Output = Var<'t, S>;
    fn sub(self, c: S) -> Self::Output {
        self + (-c)
    }
}

impl<'t, S: Real> Mul<S> for Var<'t, S> {
    type Output = Var<'t, S>;
    fn mul(self, c: S) -> Self::Output {
        let v = self.value() * c;
        self.tape.push(Op::MulC(self.idx, c), v)
    }
}

impl<'t, S: Real> Div<S> for Var<'t, S> {
    type Output = Var<'t, S>;
    fn div(self, c: S) -> Self::Output {
        self * (S::one() / c)
    }
}

impl<'t, S: Real> Value<S> for Var<'t, S> {
    fn value(&self) -> S {
        self.tape.value_of(*self)
    }

    fn lit(&self, c: S) -> Self {
        self.tape.constant(c)
    }

    fn tanh(self) -> Self {
        let v = num_traits::Float::tanh(self.value());
        self.tape.push(Op::Tanh(self.idx), v)
    }

    fn atanh(self) -> Self {
        let lim = atanh_arg_limit::<S>();
        let v = num_traits::Float::atanh(num_traits::clamp(self.value(), -lim, lim));
        self.tape.push(Op::Atanh(self.idx), v)
    }

    fn exp(self) -> Self {
        let v = num_traits::Float::exp(self.value());
        self.tape.push(Op::Exp(self.idx), v)
    }

    fn ln(self) -> Self {
        let v = num_traits::Float::ln(self.value());
        self.tape.push(Op::Ln(self.idx), v)
    }

    fn sqrt(self) -> Self {
        let v = num_traits::Float::sqrt(self.value());
        self.tape.push(Op::Sqrt(self.idx), v)
    }

    fn leaky_relu(self, slope: S) -> Self {
        let x = self.value();
        let v = if x >= S::zero() { x } else { slope * x };
        self.tape.push(Op::LeakyRelu(self.idx, slope), v)
    }

    fn clamp_box(self, lo: S, hi: S) -> Self {
        let v = num_traits::clamp(self.value(), lo, hi);
        self.tape.push(Op::ClampBox(self.idx, lo, hi), v)
    }

    fn max_lit(self, lo: S) -> Self {
        let x = self.value();
        let v = if x < lo { lo } else { x };
        self.tape.push(Op::MaxLit(self.idx, lo), v)
    }
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.
// ---------------------------------------------------------------------------

/// A scalar loss evaluable both on plain scalars and on a tape. The two
/// paths must compute the same function; implementors typically forward
/// both methods to one generic body.
pub trait LossFn<S: Real> {
    fn eval_plain(&self, theta: &[S]) -> S;
    fn eval_tape<'t>(&self, tape: &'t Tape<S>, theta: &[Var<'t, S>]) -> Var<'t, S>;
}

#[derive(Debug, Clone)]
pub struct GradCheckReport<S> {
    pub analytic: Vec<S>,
    pub numeric: Vec<S>,
    pub max_rel_err: S,
    pub worst_index: usize,
    pub failures: usize,
    pub tol: S,
}

impl<S: Real> GradCheckReport<S> {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// Relative disagreement `|a − b| / max(1e−8, |a| + |b|)`.
pub fn rel_err<S: Real>(a: S, b: S) -> S {
    (a - b).abs() / S::real(1e-8).max(a.abs() + b.abs())
}

/// Compares the tape gradient of `f` against central finite differences
/// with step `h`, coordinate by coordinate.
pub fn check_gradient<S: Real, F: LossFn<S>>(
    f: &F,
    theta: &[S],
    h: S,
    tol: S,
) -> Result<GradCheckReport<S>, DiffError> {
    let tape = Tape::new();
    let vars = tape.leaf_vec(ParamId(0), theta);
    let out = f.eval_tape(&tape, &vars);
    let grads = tape.gradient(out)?;
    let analytic: Vec<S> = vars.iter().map(|&v| grads.wrt(v)).collect();

    let mut work = theta.to_vec();
    let mut numeric = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = work[i];
        work[i] = orig + h;
        let up = f.eval_plain(&work);
        work[i] = orig - h;
        let down = f.eval_plain(&work);
        work[i] = orig;
        numeric.push((up - down) / (h + h));
    }

    let mut max_rel = S::zero();
    let mut worst = 0;
    let mut failures = 0;
    for (i, (&a, &n)) in analytic.iter().zip(&numeric).enumerate() {
        let e = rel_err(a, n);
        if e > max_rel {
            max_rel = e;
            worst = i;
        }
        if e > tol {
            failures += 1;
        }
    }
    Ok(GradCheckReport {
        analytic,
        numeric,
        max_rel_err: max_rel,
        worst_index: worst,
        failures,
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(3.0);
        let y = t.leaf(4.0);
        let z = x * y + x;
        assert_eq!(z.value(), 15.0);
        let g = t.gradient(z).unwrap();
        assert_eq!(g.wrt(x), 5.0);
        assert_eq!(g.wrt(y), 3.0);
    }

    #[test]
    fn chain_of_unary_ops() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(0.3);
        let y = Value::<f64>::tanh(Value::<f64>::exp(x));
        let g = t.gradient(y).unwrap();
        // d/dx tanh(e^x) = (1 − tanh²(e^x))·e^x
        let ex = 0.3f64.exp();
        let expect = (1.0 - ex.tanh().powi(2)) * ex;
        assert!((g.wrt(x) - expect).abs() < 1e-14);
    }

    #[test]
    fn division_and_sqrt() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(2.0);
        let y = t.leaf(5.0);
        let z = Value::<f64>::sqrt(y / x);
        let g = t.gradient(z).unwrap();
        let s = (5.0f64 / 2.0).sqrt();
        assert!((g.wrt(y) - 1.0 / (2.0 * s * 2.0)).abs() < 1e-14);
        assert!((g.wrt(x) + 5.0 / (2.0 * s * 4.0)).abs() < 1e-14);
    }

    #[test]
    fn constants_are_transparent() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(1.5);
        let z = x * 2.0 + 7.0;
        assert_eq!(z.value(), 10.0);
        let g = t.gradient(z).unwrap();
        assert_eq!(g.wrt(x), 2.0);
    }

    #[test]
    fn leaky_relu_kink() {
        let t: Tape<f64> = Tape::new();
        let a = t.leaf(2.0);
        let b = t.leaf(-2.0);
        let s = Value::<f64>::leaky_relu(a, 0.01) + Value::<f64>::leaky_relu(b, 0.01);
        let g = t.gradient(s).unwrap();
        assert_eq!(g.wrt(a), 1.0);
        assert_eq!(g.wrt(b), 0.01);
    }

    #[test]
    fn clamp_kills_gradient_outside() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(2.0);
        let y = Value::<f64>::clamp_box(x, 0.0, 1.0);
        assert_eq!(y.value(), 1.0);
        let g = t.gradient(y).unwrap();
        assert_eq!(g.wrt(x), 0.0);
    }

    #[test]
    fn atanh_clamp_matches_plain_path() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(1.0);
        let y = Value::<f64>::atanh(x);
        assert_eq!(y.value(), Value::<f64>::atanh(1.0f64));
        // Clamped region: derivative zero.
        let g = t.gradient(y).unwrap();
        assert_eq!(g.wrt(x), 0.0);
    }

    #[test]
    fn param_groups_accumulate_duplicates() {
        let t: Tape<f64> = Tape::new();
        let id = ParamId(7);
        let a = t.leaf_vec(id, &[2.0, 3.0]);
        let b = t.leaf_vec(id, &[2.0, 3.0]);
        let z = a[0] * a[1] + b[0];
        let g = t.gradient(z).unwrap();
        let total: Vec<f64> = g.params().fold(vec![0.0, 0.0], |mut acc, (pid, gs)| {
            assert_eq!(pid, id);
            for (s, v) in acc.iter_mut().zip(gs) {
                *s += v;
            }
            acc
        });
        assert_eq!(total, vec![4.0, 2.0]);
    }

    #[test]
    fn replay_is_deterministic() {
        let build = || {
            let t: Tape<f64> = Tape::new();
            let x = t.leaf(0.7);
            let y = Value::<f64>::ln(Value::<f64>::exp(x) + 1.0) * 3.0;
            let g = t.gradient(y).unwrap();
            (y.value(), g.wrt(x))
        };
        let (v1, g1) = build();
        let (v2, g2) = build();
        assert_eq!(v1.to_bits(), v2.to_bits());
        assert_eq!(g1.to_bits(), g2.to_bits());
    }

    #[test]
    fn non_finite_intermediate_is_reported() {
        let t: Tape<f64> = Tape::new();
        let x = t.leaf(-1.0);
        let y = Value::<f64>::ln(x);
        match t.gradient(y) {
            Err(DiffError::NonFinite { op, .. }) => assert_eq!(op, "ln"),
            other => panic!("expected non-finite error, got {other:?}"),
        }
    }

    #[test]
    fn clear_reuses_tape() {
        let mut t: Tape<f64> = Tape::new();
        {
            let x = t.leaf(1.0);
            let _ = x * 2.0;
        }
        assert_eq!(t.len(), 2);
        t.clear();
        assert!(t.is_empty());
        let x = t.leaf(5.0);
        let y = x * x;
        assert_eq!(t.gradient(y).unwrap().wrt(x), 10.0);
    }

    struct Quadratic;

    impl LossFn<f64> for Quadratic {
        fn eval_plain(&self, theta: &[f64]) -> f64 {
            self.eval(theta)
        }
        fn eval_tape<'t>(&self, _tape: &'t Tape<f64>, theta: &[Var<'t, f64>]) -> Var<'t, f64> {
            self.eval(theta)
        }
    }

    impl Quadratic {
        fn eval<S, V: Value<S>>(&self, theta: &[V]) -> V
        where
            S: Real,
        {
            // x² + 3xy + tanh(y)
            let x = theta[0];
            let y = theta[1];
            x * x + x * y * S::real(3.0) + y.tanh()
        }
    }

    #[test]
    fn gradient_check_passes_on_smooth_function() {
        let report = check_gradient(&Quadratic, &[0.4, -0.2], 1e-5, 1e-6).unwrap();
        assert!(report.passed(), "max rel err {}", report.max_rel_err);
        assert!(report.max_rel_err < 1e-6);
    }

    #[test]
    fn gradients_flow_through_ball_kernel() {
        use crate::ball;
        let t: Tape<f64> = Tape::new();
        let x = t.leaf_vec(ParamId(1), &[0.3, -0.2]);
        let y = t.leaf_vec(ParamId(2), &[0.1, 0.4]);
        let d = ball::distance(1.0, &x, &y);
        let g = t.gradient(d).unwrap();
        let gx: Vec<f64> = x.iter().map(|&v| g.wrt(v)).collect();
        // Central differences on the plain path.
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = [0.3, -0.2];
            let mut xm = xp;
            xp[i] += h;
            xm[i] -= h;
            let fd = (ball::distance(1.0, &xp, &[0.1, 0.4])
                - ball::distance(1.0, &xm, &[0.1, 0.4]))
                / (2.0 * h);
            assert!(rel_err(gx[i], fd) < 1e-6, "coord {i}: {} vs {fd}", gx[i]);
        }
    }
}
