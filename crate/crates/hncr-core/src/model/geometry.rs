//! Geometry backend: one dispatch point for the vector operations the
//! recommender uses, either on the Poincaré ball or in plain Euclidean
//! space. The Euclidean side keeps `exp`/`log` as identities and uses
//! the ordinary norm distance.

use serde::{Deserialize, Serialize};

use crate::ball;
use crate::num::{Real, Value};

/// Negative-slope of the pointwise activation.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Serializable backend tag; pair with a curvature to get a [`Geometry`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    Hyperbolic,
    Euclidean,
}

impl Backend {
    pub fn token(self) -> &'static str {
        match self {
            Backend::Hyperbolic => "hyperbolic",
            Backend::Euclidean => "euclidean",
        }
    }

    pub fn from_token(s: &str) -> Option<Self> {
        match s {
            "hyperbolic" => Some(Backend::Hyperbolic),
            "euclidean" => Some(Backend::Euclidean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry<S: Real> {
    Hyperbolic { c: S },
    Euclidean,
}

impl<S: Real> Geometry<S> {
    pub fn new(backend: Backend, curvature: S) -> Self {
        match backend {
            Backend::Hyperbolic => Geometry::Hyperbolic { c: curvature },
            Backend::Euclidean => Geometry::Euclidean,
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Geometry::Hyperbolic { .. } => Backend::Hyperbolic,
            Geometry::Euclidean => Backend::Euclidean,
        }
    }

    /// Möbius addition, or plain vector addition.
    pub fn add<V: Value<S>>(&self, x: &[V], y: &[V]) -> Vec<V> {
        match *self {
            Geometry::Hyperbolic { c } => ball::mobius_add(c, x, y),
            Geometry::Euclidean => x.iter().zip(y).map(|(&a, &b)| a + b).collect(),
        }
    }

    /// Möbius matrix-vector product, or the plain one. `m` is row-major
    /// with `rows` rows.
    pub fn matvec<V: Value<S>>(&self, m: &[V], rows: usize, x: &[V]) -> Vec<V> {
        match *self {
            Geometry::Hyperbolic { c } => ball::mobius_matvec(c, m, rows, x),
            Geometry::Euclidean => {
                let cols = x.len();
                (0..rows)
                    .map(|r| ball::dot(&m[r * cols..(r + 1) * cols], x))
                    .collect()
            }
        }
    }

    /// Exponential map at the origin; identity on the Euclidean side.
    pub fn exp0<V: Value<S>>(&self, v: &[V]) -> Vec<V> {
        match *self {
            Geometry::Hyperbolic { c } => ball::exp0(c, v),
            Geometry::Euclidean => v.to_vec(),
        }
    }

    /// Logarithmic map at the origin; identity on the Euclidean side.
    pub fn log0<V: Value<S>>(&self, x: &[V]) -> Vec<V> {
        match *self {
            Geometry::Hyperbolic { c } => ball::log0(c, x),
            Geometry::Euclidean => x.to_vec(),
        }
    }

    /// Geodesic distance, or the Euclidean norm of the difference.
    pub fn distance<V: Value<S>>(&self, x: &[V], y: &[V]) -> V {
        match *self {
            Geometry::Hyperbolic { c } => ball::distance(c, x, y),
            Geometry::Euclidean => {
                let diff: Vec<V> = x.iter().zip(y).map(|(&a, &b)| a - b).collect();
                ball::norm(&diff)
            }
        }
    }

    pub fn distance_to_origin<V: Value<S>>(&self, x: &[V]) -> V {
        match *self {
            Geometry::Hyperbolic { c } => ball::distance_to_origin(c, x),
            Geometry::Euclidean => ball::norm(x),
        }
    }

    /// Pointwise LeakyReLU, conjugated through the origin maps on the
    /// ball so the output stays a ball point.
    pub fn activation<V: Value<S>>(&self, x: &[V]) -> Vec<V> {
        let slope = S::real(LEAKY_SLOPE);
        let lrelu = |v: &[V]| -> Vec<V> { v.iter().map(|t| t.leaky_relu(slope)).collect() };
        match *self {
            Geometry::Hyperbolic { c } => ball::exp0(c, &lrelu(&ball::log0(c, x))),
            Geometry::Euclidean => lrelu(x),
        }
    }

    /// Clips a parameter vector back inside the model domain; the
    /// Euclidean side is unconstrained.
    pub fn constrain(&self, x: &[S]) -> Vec<S> {
        match *self {
            Geometry::Hyperbolic { c } => ball::project(c, x),
            Geometry::Euclidean => x.to_vec(),
        }
    }

    /// Rescales a Euclidean gradient of a point-valued parameter into
    /// the Riemannian gradient: `((1 − c‖θ‖²)² / 4)·∇`. Identity on the
    /// Euclidean side.
    pub fn rescale_grad(&self, theta: &[S], grad: &[S]) -> Vec<S> {
        match *self {
            Geometry::Hyperbolic { c } => {
                let nsq = ball::norm_sq(theta);
                let f = (S::one() - c * nsq).powi(2) / S::real(4.0);
                grad.iter().map(|&g| g * f).collect()
            }
            Geometry::Euclidean => grad.to_vec(),
        }
    }
}
