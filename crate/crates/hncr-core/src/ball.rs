//! Poincaré-ball gyrovector kernel.
//!
//! Points live in the ball of radius `1/sqrt(c)` for curvature magnitude
//! `c > 0`; `c = 0` degrades every operation to its Euclidean limit. The
//! slice-level functions are generic over [`Value`], so the identical
//! formulas run on plain scalars and on autodiff tape variables. The
//! [`BallPoint`] wrapper adds curvature/dimension checking and keeps its
//! coordinates inside the ball (`sqrt(c)·‖x‖ ≤ 1 − EPS_BALL`) after every
//! operation.
//!
//! Degenerate inputs take explicit branches — `r ⊗ 0 = 0`, `M ⊗ x = 0`
//! when `Mx = 0`, `exp_x(0) = x`, `log_x(x) = 0` — rather than epsilon
//! guards, so no operation produces NaN on valid points.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{Real, Value};

pub use crate::num::EPS_BALL;

#[derive(Debug, Error, PartialEq)]
pub enum BallError {
    #[error("curvature must be finite and ≥ 0, got {0}")]
    InvalidCurvature(f64),
    #[error("curvature mismatch: {left} vs {right}")]
    CurvatureMismatch { left: f64, right: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite {what}")]
    NonFinite { what: &'static str },
    #[error("tangent vector is based at a different point")]
    BaseMismatch,
    #[error("matrix of {len} entries is not a multiple of input dimension {dim}")]
    BadMatrixShape { len: usize, dim: usize },
}

// ---------------------------------------------------------------------------
// Slice-level kernel, generic over plain scalars and tape variables.
// ---------------------------------------------------------------------------

pub fn dot<S: Real, V: Value<S>>(x: &[V], y: &[V]) -> V {
    debug_assert_eq!(x.len(), y.len());
    let mut acc = x[0] * y[0];
    for i in 1..x.len() {
        acc = acc + x[i] * y[i];
    }
    acc
}

pub fn norm_sq<S: Real, V: Value<S>>(x: &[V]) -> V {
    dot(x, x)
}

pub fn norm<S: Real, V: Value<S>>(x: &[V]) -> V {
    norm_sq(x).sqrt()
}

/// Clips into the ball: rescales iff `sqrt(c)·‖x‖ > 1 − EPS_BALL`.
///
/// The rescale factor is treated as a constant under differentiation; the
/// clip only binds on points that numerically escaped the ball.
pub fn project<S: Real, V: Value<S>>(c: S, x: &[V]) -> Vec<V> {
    if c <= S::zero() || x.is_empty() {
        return x.to_vec();
    }
    let sqrt_c = c.sqrt();
    let max_norm = (S::one() - S::real(EPS_BALL)) / sqrt_c;
    let n = norm(x).value();
    if n <= max_norm || !n.is_finite() {
        x.to_vec()
    } else {
        // Undershoot by 1e-12 relative so the clipped norm stays below the
        // margin after rounding, making projection exactly idempotent.
        let scale = max_norm / n * (S::one() - S::real(1e-12));
        x.iter().map(|&v| v * scale).collect()
    }
}

/// Möbius addition `x ⊕_c y`; at `c = 0` this is plain vector addition.
pub fn mobius_add<S: Real, V: Value<S>>(c: S, x: &[V], y: &[V]) -> Vec<V> {
    debug_assert_eq!(x.len(), y.len());
    if x.is_empty() {
        return Vec::new();
    }
    if c == S::zero() {
        return x.iter().zip(y).map(|(&a, &b)| a + b).collect();
    }
    let xy = dot(x, y);
    let nx2 = norm_sq(x);
    let ny2 = norm_sq(y);
    let two_c = c + c;
    // a·x + b·y over 1 + 2c⟨x,y⟩ + c²‖x‖²‖y‖²
    let a = xy * two_c + ny2 * c + S::one();
    let b = -(nx2 * c) + S::one();
    let den = (xy * two_c + nx2 * ny2 * (c * c) + S::one()).max_lit(S::real(f64::MIN_POSITIVE));
    x.iter()
        .zip(y)
        .map(|(&xi, &yi)| (xi * a + yi * b) / den)
        .collect()
}

/// Möbius scalar multiplication `r ⊗_c x`; `r ⊗ 0 = 0`, and at `c = 0`
/// it is plain scaling.
pub fn mobius_scalar_mul<S: Real, V: Value<S>>(c: S, r: S, x: &[V]) -> Vec<V> {
    if x.is_empty() {
        return Vec::new();
    }
    if c == S::zero() {
        return x.iter().map(|&v| v * r).collect();
    }
    let nx2 = norm_sq(x);
    if nx2.value() == S::zero() {
        return x.iter().map(|v| v.lit(S::zero())).collect();
    }
    let sqrt_c = c.sqrt();
    let nx = nx2.sqrt();
    let scaled = ((nx * sqrt_c).atanh() * r).tanh();
    let factor = scaled / (nx * sqrt_c);
    x.iter().map(|&v| v * factor).collect()
}

/// Möbius matrix-vector product `M ⊗_c x` for a row-major `rows × dim`
/// matrix; zero input or zero image maps to the origin.
pub fn mobius_matvec<S: Real, V: Value<S>>(c: S, m: &[V], rows: usize, x: &[V]) -> Vec<V> {
    let dim = x.len();
    debug_assert_eq!(m.len(), rows * dim);
    if rows == 0 {
        return Vec::new();
    }
    let mx: Vec<V> = (0..rows)
        .map(|r| dot(&m[r * dim..(r + 1) * dim], x))
        .collect();
    if c == S::zero() {
        return mx;
    }
    let nx2 = norm_sq(x);
    let nmx2 = norm_sq(&mx);
    if nx2.value() == S::zero() || nmx2.value() == S::zero() {
        return mx.iter().map(|v| v.lit(S::zero())).collect();
    }
    let sqrt_c = c.sqrt();
    let nx = nx2.sqrt();
    let nmx = nmx2.sqrt();
    let scaled = ((nx * sqrt_c).atanh() * (nmx / nx)).tanh();
    let factor = scaled / (nmx * sqrt_c);
    mx.iter().map(|&v| v * factor).collect()
}

/// Conformal factor `λ_x = 2 / (1 − c‖x‖²)`.
pub fn conformal_factor<S: Real, V: Value<S>>(c: S, x: &[V]) -> V {
    let two = S::real(2.0);
    if x.is_empty() {
        unreachable!("conformal factor of a zero-dimensional point");
    }
    if c == S::zero() {
        return x[0].lit(two);
    }
    let nx2 = norm_sq(x);
    let den = (-(nx2 * c) + S::one()).max_lit(S::real(EPS_BALL));
    den.lit(two) / den
}

/// Exponential map at `x`; `exp_x(0) = x`, and at `c = 0` it is `x + v`.
pub fn exp_map<S: Real, V: Value<S>>(c: S, x: &[V], v: &[V]) -> Vec<V> {
    debug_assert_eq!(x.len(), v.len());
    if x.is_empty() {
        return Vec::new();
    }
    if c == S::zero() {
        return x.iter().zip(v).map(|(&a, &b)| a + b).collect();
    }
    let nv2 = norm_sq(v);
    if nv2.value() == S::zero() {
        return x.to_vec();
    }
    let sqrt_c = c.sqrt();
    let nv = nv2.sqrt();
    let lambda = conformal_factor(c, x);
    let t = (lambda * nv * (sqrt_c * S::real(0.5))).tanh();
    let factor = t / (nv * sqrt_c);
    let step: Vec<V> = v.iter().map(|&vi| vi * factor).collect();
    mobius_add(c, x, &step)
}

/// Logarithm map at `x`; `log_x(x) = 0`, and at `c = 0` it is `y − x`.
pub fn log_map<S: Real, V: Value<S>>(c: S, x: &[V], y: &[V]) -> Vec<V> {
    debug_assert_eq!(x.len(), y.len());
    if x.is_empty() {
        return Vec::new();
    }
    if c == S::zero() {
        return y.iter().zip(x).map(|(&b, &a)| b - a).collect();
    }
    if coords_equal(x, y) {
        return x.iter().map(|v| v.lit(S::zero())).collect();
    }
    let neg_x: Vec<V> = x.iter().map(|&v| -v).collect();
    let w = mobius_add(c, &neg_x, y);
    let nw2 = norm_sq(&w);
    if nw2.value() == S::zero() {
        return x.iter().map(|v| v.lit(S::zero())).collect();
    }
    let sqrt_c = c.sqrt();
    let nw = nw2.sqrt();
    let lambda = conformal_factor(c, x);
    let factor = (nw * sqrt_c).atanh() * (x[0].lit(S::real(2.0) / sqrt_c) / lambda) / nw;
    w.iter().map(|&wi| wi * factor).collect()
}

/// Exponential map at the origin: `tanh(sqrt(c)‖v‖)·v/(sqrt(c)‖v‖)`.
pub fn exp0<S: Real, V: Value<S>>(c: S, v: &[V]) -> Vec<V> {
    if v.is_empty() {
        return Vec::new();
    }
    if c == S::zero() {
        return v.to_vec();
    }
    let nv2 = norm_sq(v);
    if nv2.value() == S::zero() {
        return v.to_vec();
    }
    let sqrt_c = c.sqrt();
    let nv = nv2.sqrt();
    let factor = (nv * sqrt_c).tanh() / (nv * sqrt_c);
    v.iter().map(|&vi| vi * factor).collect()
}

/// Logarithm map at the origin: `atanh(sqrt(c)‖x‖)·x/(sqrt(c)‖x‖)`.
pub fn log0<S: Real, V: Value<S>>(c: S, x: &[V]) -> Vec<V> {
    if x.is_empty() {
        return Vec::new();
    }
    if c == S::zero() {
        return x.to_vec();
    }
    let nx2 = norm_sq(x);
    if nx2.value() == S::zero() {
        return x.to_vec();
    }
    let sqrt_c = c.sqrt();
    let nx = nx2.sqrt();
    let factor = (nx * sqrt_c).atanh() / (nx * sqrt_c);
    x.iter().map(|&xi| xi * factor).collect()
}

/// Geodesic distance `(2/sqrt(c))·atanh(sqrt(c)·‖(−x) ⊕ y‖)`; at `c = 0`
/// the limit `2‖y − x‖`.
pub fn distance<S: Real, V: Value<S>>(c: S, x: &[V], y: &[V]) -> V {
    debug_assert_eq!(x.len(), y.len());
    assert!(!x.is_empty(), "distance between zero-dimensional points");
    if coords_equal(x, y) {
        return x[0].lit(S::zero());
    }
    if c == S::zero() {
        let diff: Vec<V> = y.iter().zip(x).map(|(&b, &a)| b - a).collect();
        return norm(&diff) * S::real(2.0);
    }
    let neg_x: Vec<V> = x.iter().map(|&v| -v).collect();
    let w = mobius_add(c, &neg_x, y);
    let sqrt_c = c.sqrt();
    (norm(&w) * sqrt_c).atanh() * (S::real(2.0) / sqrt_c)
}

/// Distance to the origin, `(2/sqrt(c))·atanh(sqrt(c)·‖x‖)`.
pub fn distance_to_origin<S: Real, V: Value<S>>(c: S, x: &[V]) -> V {
    assert!(!x.is_empty(), "distance of a zero-dimensional point");
    if c == S::zero() {
        return norm(x) * S::real(2.0);
    }
    let nx2 = norm_sq(x);
    if nx2.value() == S::zero() {
        return x[0].lit(S::zero());
    }
    let sqrt_c = c.sqrt();
    (nx2.sqrt() * sqrt_c).atanh() * (S::real(2.0) / sqrt_c)
}

fn coords_equal<S: Real, V: Value<S>>(x: &[V], y: &[V]) -> bool {
    x.iter().zip(y).all(|(a, b)| a.value() == b.value())
}

// ---------------------------------------------------------------------------
// Checked wrapper types.
// ---------------------------------------------------------------------------

/// Curvature magnitude `c ≥ 0` of a Poincaré ball; `0` selects the
/// Euclidean limit of every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct Curvature<S: Real>(S);

impl<S: Real> Curvature<S> {
    pub fn new(c: S) -> Result<Self, BallError> {
        if !c.is_finite() || c < S::zero() {
            return Err(BallError::InvalidCurvature(c.to_f64_lossy()));
        }
        Ok(Curvature(c))
    }

    pub fn get(self) -> S {
        self.0
    }
}

/// A point of the Poincaré ball with its curvature; construction and all
/// operations keep `sqrt(c)·‖coords‖ ≤ 1 − EPS_BALL`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "", deserialize = ""))]
pub struct BallPoint<S: Real> {
    curvature: Curvature<S>,
    coords: Vec<S>,
}

impl<S: Real> BallPoint<S> {
    pub fn new(curvature: Curvature<S>, coords: Vec<S>) -> Result<Self, BallError> {
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(BallError::NonFinite { what: "coordinates" });
        }
        let coords = project(curvature.get(), &coords);
        Ok(BallPoint { curvature, coords })
    }

    pub fn origin(curvature: Curvature<S>, dim: usize) -> Self {
        BallPoint {
            curvature,
            coords: vec![S::zero(); dim],
        }
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }

    pub fn curvature(&self) -> Curvature<S> {
        self.curvature
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    fn check_compatible(&self, other: &Self) -> Result<(), BallError> {
        if self.curvature != other.curvature {
            return Err(BallError::CurvatureMismatch {
                left: self.curvature.get().to_f64_lossy(),
                right: other.curvature.get().to_f64_lossy(),
            });
        }
        if self.dim() != other.dim() {
            return Err(BallError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            });
        }
        Ok(())
    }

    fn wrap(&self, coords: Vec<S>) -> BallPoint<S> {
        BallPoint {
            curvature: self.curvature,
            coords: project(self.curvature.get(), &coords),
        }
    }

    pub fn mobius_add(&self, other: &Self) -> Result<Self, BallError> {
        self.check_compatible(other)?;
        Ok(self.wrap(mobius_add(self.curvature.get(), &self.coords, &other.coords)))
    }

    pub fn scalar_mul(&self, r: S) -> Result<Self, BallError> {
        if !r.is_finite() {
            return Err(BallError::NonFinite { what: "scalar" });
        }
        Ok(self.wrap(mobius_scalar_mul(self.curvature.get(), r, &self.coords)))
    }

    /// Applies a row-major matrix with `m.len() / dim` rows.
    pub fn matvec(&self, m: &[S]) -> Result<Self, BallError> {
        if self.dim() == 0 || m.len() % self.dim() != 0 {
            return Err(BallError::BadMatrixShape {
                len: m.len(),
                dim: self.dim(),
            });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(BallError::NonFinite { what: "matrix" });
        }
        let rows = m.len() / self.dim();
        Ok(self.wrap(mobius_matvec(self.curvature.get(), m, rows, &self.coords)))
    }

    pub fn conformal_factor(&self) -> S {
        conformal_factor(self.curvature.get(), &self.coords)
    }

    pub fn exp_map(&self, v: &TangentVector<S>) -> Result<Self, BallError> {
        if v.base != *self {
            return Err(BallError::BaseMismatch);
        }
        Ok(self.wrap(exp_map(self.curvature.get(), &self.coords, &v.coords)))
    }

    pub fn log_map(&self, y: &Self) -> Result<TangentVector<S>, BallError> {
        self.check_compatible(y)?;
        Ok(TangentVector {
            coords: log_map(self.curvature.get(), &self.coords, &y.coords),
            base: self.clone(),
        })
    }

    pub fn distance(&self, other: &Self) -> Result<S, BallError> {
        self.check_compatible(other)?;
        Ok(distance(self.curvature.get(), &self.coords, &other.coords))
    }

    pub fn distance_to_origin(&self) -> S {
        distance_to_origin(self.curvature.get(), &self.coords)
    }
}

/// Tangent vector attached to its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector<S: Real> {
    base: BallPoint<S>,
    coords: Vec<S>,
}

impl<S: Real> TangentVector<S> {
    pub fn at(base: BallPoint<S>, coords: Vec<S>) -> Result<Self, BallError> {
        if coords.len() != base.dim() {
            return Err(BallError::DimensionMismatch {
                left: base.dim(),
                right: coords.len(),
            });
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(BallError::NonFinite { what: "coordinates" });
        }
        Ok(TangentVector { base, coords })
    }

    pub fn base(&self) -> &BallPoint<S> {
        &self.base
    }

    pub fn coords(&self) -> &[S] {
        &self.coords
    }
}
