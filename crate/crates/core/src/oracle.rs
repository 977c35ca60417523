//! First-order oracles and bounded-noise wrappers.
//!
//! An oracle returns a (possibly perturbed) function value and subgradient
//! in a single call. [`NoisyOracle`] wraps any oracle and injects errors
//! whose magnitude is bounded according to a [`NoiseKind`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dist_sq, norm};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct OracleResponse<T> {
    pub f: T,
    pub xi: Vec<T>,
}

pub trait Oracle<T: Scalar> {
    fn dim(&self) -> usize;

    /// Value and one (generalized) gradient at `y`.
    fn evaluate(&mut self, y: &[T]) -> Result<OracleResponse<T>>;
}

impl<T: Scalar, O: Oracle<T> + ?Sized> Oracle<T> for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&mut self, y: &[T]) -> Result<OracleResponse<T>> {
        (**self).evaluate(y)
    }
}

impl<T: Scalar, O: Oracle<T> + ?Sized> Oracle<T> for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn evaluate(&mut self, y: &[T]) -> Result<OracleResponse<T>> {
        (**self).evaluate(y)
    }
}

/// Adapts a closure `y -> (f, ξ)` into an [`Oracle`].
pub struct FnOracle<F> {
    dim: usize,
    f: F,
}

impl<F> FnOracle<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F> Oracle<T> for FnOracle<F>
where
    T: Scalar,
    F: FnMut(&[T]) -> (T, Vec<T>),
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&mut self, y: &[T]) -> Result<OracleResponse<T>> {
        check_dim(self.dim, y.len())?;
        let (f, xi) = (self.f)(y);
        check_dim(self.dim, xi.len())?;
        Ok(OracleResponse { f, xi })
    }
}

/// Noise regimes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NoiseKind {
    /// Exact values and subgradients.
    N0,
    /// Constant bound on both.
    N1,
    /// Bounds on both vanish near `x*`.
    N2,
    /// Exact values, constant subgradient bound.
    N3,
    /// Exact values, subgradient bound vanishes near `x*`.
    N4,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 5] = [Self::N0, Self::N1, Self::N2, Self::N3, Self::N4];

    pub fn needs_reference(self) -> bool {
        matches!(self, Self::N2 | Self::N4)
    }

    /// `(b_f, b_ξ)` for a query at squared distance `dist_sq` from `x*`.
    pub fn bounds(self, q_bar: f64, dist_sq: f64) -> (f64, f64) {
        let lin = || q_bar.min(dist_sq.sqrt() / 100.0);
        let quad = || q_bar.min(dist_sq / 100.0);
        match self {
            Self::N0 => (0.0, 0.0),
            Self::N1 => (q_bar, q_bar),
            Self::N2 => (lin(), quad()),
            Self::N3 => (0.0, q_bar),
            Self::N4 => (0.0, quad()),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::N0 => "N0",
            Self::N1 => "N1",
            Self::N2 => "N2",
            Self::N3 => "N3",
            Self::N4 => "N4",
        };
        f.write_str(s)
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "N0" => Ok(Self::N0),
            "N1" => Ok(Self::N1),
            "N2" => Ok(Self::N2),
            "N3" => Ok(Self::N3),
            "N4" => Ok(Self::N4),
            other => Err(Error::InvalidConfig(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// How a perturbation is drawn once its bounds are known.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NoiseDistribution {
    /// `q ~ U(-b_f, b_f)`; subgradient error uniform in the ball of radius
    /// `r ~ U(0, b_ξ)`.
    #[default]
    Uniform,
    /// Largest admissible error with a random sign/direction.
    Extreme,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSpec<T> {
    pub kind: NoiseKind,
    pub q_bar: T,
    pub seed: u64,
    pub x_star: Option<Vec<T>>,
    pub distribution: NoiseDistribution,
}

impl<T: Scalar> NoiseSpec<T> {
    pub fn new(kind: NoiseKind, q_bar: T, seed: u64) -> Self {
        Self {
            kind,
            q_bar,
            seed,
            x_star: None,
            distribution: NoiseDistribution::default(),
        }
    }

    pub fn exact() -> Self {
        Self::new(NoiseKind::N0, T::zero(), 0)
    }

    pub fn with_reference(mut self, x_star: Vec<T>) -> Self {
        self.x_star = Some(x_star);
        self
    }

    /// Noise bound that matters for stopping (0 for `N0`).
    pub fn effective_bound(&self) -> T {
        if self.kind == NoiseKind::N0 {
            T::zero()
        } else {
            self.q_bar
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.q_bar >= T::zero()) || !self.q_bar.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "noise bound must be finite and nonnegative, got {}",
                self.q_bar
            )));
        }
        if self.kind.needs_reference() {
            match &self.x_star {
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "noise kind {} needs a reference minimizer",
                        self.kind
                    )))
                }
                Some(x) => check_dim(dim, x.len())?,
            }
        }
        Ok(())
    }
}

/// Perturbation applied at one evaluation, exposed for inspection.
#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation<T> {
    pub bound_f: T,
    pub bound_xi: T,
    /// Subtracted from the true value.
    pub q: T,
    /// Added to the true subgradient.
    pub e: Vec<T>,
}

/// Oracle wrapper injecting bounded noise. Realizations depend only on the
/// seed and the evaluation counter.
pub struct NoisyOracle<O, T> {
    inner: O,
    spec: NoiseSpec<T>,
    calls: u64,
    last: Option<Perturbation<T>>,
}

impl<O: Oracle<T>, T: Scalar> NoisyOracle<O, T> {
    pub fn new(inner: O, spec: NoiseSpec<T>) -> Result<Self> {
        spec.validate(inner.dim())?;
        Ok(Self {
            inner,
            spec,
            calls: 0,
            last: None,
        })
    }

    pub fn spec(&self) -> &NoiseSpec<T> {
        &self.spec
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    pub fn last_perturbation(&self) -> Option<&Perturbation<T>> {
        self.last.as_ref()
    }

    pub fn into_inner(self) -> O {
        self.inner
    }

    fn draw(&self, y: &[T], call: u64) -> Perturbation<T> {
        let n = y.len();
        let d2 = self.spec.x_star.as_deref().map_or(0.0, |xs| dist_sq(y, xs).as_f64());
        let (bf, bx) = self.spec.kind.bounds(self.spec.q_bar.as_f64(), d2);
        let mut e = vec![T::zero(); n];
        if bf == 0.0 && bx == 0.0 {
            return Perturbation {
                bound_f: T::zero(),
                bound_xi: T::zero(),
                q: T::zero(),
                e,
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(call);
        let (q, radius) = match self.spec.distribution {
            NoiseDistribution::Uniform => {
                let q = if bf > 0.0 { rng.gen_range(-bf..=bf) } else { 0.0 };
                let r = if bx > 0.0 {
                    let outer: f64 = rng.gen_range(0.0..=bx);
                    let u: f64 = rng.gen();
                    outer * u.powf(1.0 / n as f64)
                } else {
                    0.0
                };
                (q, r)
            }
            NoiseDistribution::Extreme => {
                let q = if rng.gen::<bool>() { bf } else { -bf };
                (q, bx)
            }
        };
        if radius > 0.0 {
            let mut dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let len = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len > 0.0 {
                for v in dir.iter_mut() {
                    *v *= radius / len;
                }
            }
            for (ei, di) in e.iter_mut().zip(&dir) {
                *ei = T::of(*di);
            }
            // rounding in the cast must not push the error outside the ball
            let actual = norm(&e).as_f64();
            if actual > bx {
                let shrink = T::of(bx / actual);
                e.iter_mut().for_each(|v| *v *= shrink);
            }
        }
        let mut qt = T::of(q);
        if qt.abs().as_f64() > bf {
            qt = T::of(bf.copysign(q));
        }
        Perturbation {
            bound_f: T::of(bf),
            bound_xi: T::of(bx),
            q: qt,
            e,
        }
    }
}

impl<O: Oracle<T>, T: Scalar> Oracle<T> for NoisyOracle<O, T> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&mut self, y: &[T]) -> Result<OracleResponse<T>> {
        let mut resp = self.inner.evaluate(y)?;
        let call = self.calls;
        self.calls += 1;
        let p = self.draw(y, call);
        resp.f -= p.q;
        for (g, &e) in resp.xi.iter_mut().zip(&p.e) {
            *g += e;
        }
        self.last = Some(p);
        Ok(resp)
    }
}

/// Wraps `oracle` according to `spec`.
pub fn wrap_noise<O: Oracle<T>, T: Scalar>(oracle: O, spec: NoiseSpec<T>) -> Result<NoisyOracle<O, T>> {
    NoisyOracle::new(oracle, spec)
}
