//! Nonsmooth nonconvex test problems.
//!
//! `f1`–`f5` are the classical large-scale academic problems, `f6`–`f10` are
//! built from the Ferrier polynomials `h_i(x) = i x_i² - 2 x_i + Σ_j x_j`.
//! Each oracle returns one valid Clarke subgradient; at kinks `sign(0) = 0`
//! and the lowest index wins among tied maximizers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::oracle::{Oracle, OracleResponse};
use crate::scalar::{sign0, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProblemId {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
    F10,
}

impl ProblemId {
    pub const ALL: [ProblemId; 10] = [
        Self::F1,
        Self::F2,
        Self::F3,
        Self::F4,
        Self::F5,
        Self::F6,
        Self::F7,
        Self::F8,
        Self::F9,
        Self::F10,
    ];

    pub fn index(self) -> usize {
        self as usize + 1
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i.checked_sub(1)?).copied()
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.index())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        t.strip_prefix(['f', 'F'])
            .and_then(|d| d.parse::<usize>().ok())
            .and_then(Self::from_index)
            .ok_or_else(|| Error::UnknownProblem(t.to_string()))
    }
}

/// How `|x|` in the last Ferrier variant is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum NormReading {
    /// Euclidean norm of the whole vector.
    #[default]
    Euclidean,
    /// Sum of componentwise absolute values.
    Componentwise,
}

/// Best known values of `f3` for the dimensions where they are tabulated.
pub const F3_BEST_KNOWN: [(usize, f64); 10] = [
    (2, -1.0),
    (5, -2.98),
    (10, -6.51),
    (20, -13.58),
    (50, -34.80),
    (100, -70.15),
    (200, -140.86),
    (500, -352.99),
    (1000, -706.54),
    (2000, -1413.65),
];

/// A problem with its standard starting point and known optimum.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance<T> {
    pub id: ProblemId,
    pub n: usize,
    pub x_start: Vec<T>,
    /// `None` for `f3` at dimensions without a tabulated value.
    pub f_best: Option<T>,
    /// `None` for `f3`, whose minimizer must be obtained numerically.
    pub x_star: Option<Vec<T>>,
}

/// Exact oracle for one of the test problems.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Problem {
    pub id: ProblemId,
    pub n: usize,
    pub norm_reading: NormReading,
}

pub fn instantiate<T: Scalar>(id: ProblemId, n: usize) -> Result<(ProblemInstance<T>, Problem)> {
    if n < 2 {
        return Err(Error::InvalidConfig(format!(
            "problem dimension must be at least 2, got {n}"
        )));
    }
    let x_start: Vec<T> = (1..=n)
        .map(|i| {
            let odd = i % 2 == 1;
            T::of(match id {
                ProblemId::F1 => 1.0,
                ProblemId::F2 => {
                    if odd {
                        -1.0
                    } else {
                        1.0
                    }
                }
                ProblemId::F3 => -1.0,
                ProblemId::F4 | ProblemId::F5 => {
                    if odd {
                        -1.5
                    } else {
                        2.0
                    }
                }
                _ => 1.0 / (i * i) as f64,
            })
        })
        .collect();
    let (f_best, x_star) = if id == ProblemId::F3 {
        let best = F3_BEST_KNOWN.iter().find(|(m, _)| *m == n).map(|&(_, v)| T::of(v));
        (best, None)
    } else {
        (Some(T::zero()), Some(vec![T::zero(); n]))
    };
    let instance = ProblemInstance {
        id,
        n,
        x_start,
        f_best,
        x_star,
    };
    Ok((
        instance,
        Problem {
            id,
            n,
            norm_reading: NormReading::default(),
        },
    ))
}

/// Parses `"f3"` and builds the instance.
pub fn instantiate_by_name<T: Scalar>(name: &str, n: usize) -> Result<(ProblemInstance<T>, Problem)> {
    instantiate(name.parse()?, n)
}

impl Problem {
    pub fn with_norm_reading(mut self, reading: NormReading) -> Self {
        self.norm_reading = reading;
        self
    }

    pub fn value<T: Scalar>(&self, x: &[T]) -> T {
        let mut g = vec![T::zero(); x.len()];
        self.value_and_subgradient(x, &mut g)
    }

    /// Writes one subgradient into `g` and returns `f(x)`.
    pub fn value_and_subgradient<T: Scalar>(&self, x: &[T], g: &mut [T]) -> T {
        debug_assert_eq!(x.len(), self.n);
        g.iter_mut().for_each(|v| *v = T::zero());
        match self.id {
            ProblemId::F1 => f1(x, g),
            ProblemId::F2 => f2(x, g),
            ProblemId::F3 => f3(x, g),
            ProblemId::F4 => f4(x, g),
            ProblemId::F5 => f5(x, g),
            ProblemId::F6 => ferrier_abs_sum(x, g),
            ProblemId::F7 => ferrier_square_sum(x, g),
            ProblemId::F8 => ferrier_abs_max(x, g),
            ProblemId::F9 => {
                let mut v = ferrier_abs_sum(x, g);
                for (gi, &xi) in g.iter_mut().zip(x) {
                    v += T::half() * xi * xi;
                    *gi += xi;
                }
                v
            }
            ProblemId::F10 => {
                let mut v = ferrier_abs_sum(x, g);
                match self.norm_reading {
                    NormReading::Euclidean => {
                        let nrm = crate::linalg::norm(x);
                        v += T::half() * nrm;
                        if nrm > T::zero() {
                            for (gi, &xi) in g.iter_mut().zip(x) {
                                *gi += T::half() * xi / nrm;
                            }
                        }
                    }
                    NormReading::Componentwise => {
                        for (gi, &xi) in g.iter_mut().zip(x) {
                            v += T::half() * xi.abs();
                            *gi += T::half() * sign0(xi);
                        }
                    }
                }
                v
            }
        }
    }

    /// Identifies which smooth piece `x` lies on. Points with equal patterns
    /// share one differentiable branch of the objective.
    pub fn active_pattern<T: Scalar>(&self, x: &[T]) -> Vec<i64> {
        let s = |v: T| sign0(v).as_f64() as i64;
        let n = x.len();
        match self.id {
            ProblemId::F1 => {
                let sum: T = x.iter().copied().sum();
                let g = |v: T| (v.abs() + T::one()).ln();
                let (mut best, mut idx, mut arg) = (g(-sum), 0usize, -sum);
                for (i, &xi) in x.iter().enumerate() {
                    if g(xi) > best {
                        best = g(xi);
                        idx = i + 1;
                        arg = xi;
                    }
                }
                vec![idx as i64, s(arg)]
            }
            ProblemId::F2 => x.iter().map(|&v| s(v)).collect(),
            ProblemId::F3 => (0..n - 1)
                .map(|i| s(x[i] * x[i] + x[i + 1] * x[i + 1] - T::one()))
                .collect(),
            ProblemId::F4 => {
                let (a, b) = f4_branches(x);
                vec![s(a - b)]
            }
            ProblemId::F5 => (0..n - 1)
                .map(|i| {
                    let (a, b) = f5_pieces(x[i], x[i + 1]);
                    s(a - b)
                })
                .collect(),
            ProblemId::F6 | ProblemId::F9 => ferrier_h(x).into_iter().map(s).collect(),
            ProblemId::F7 => Vec::new(),
            ProblemId::F8 => {
                let h = ferrier_h(x);
                let (idx, _) = argmax_abs(&h);
                // ties between the two largest |h_i| are kinks too
                let top = h[idx].abs();
                let second = h
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != idx)
                    .map(|(_, v)| v.abs())
                    .fold(T::zero(), T::max);
                vec![idx as i64, s(h[idx]), s(top - second)]
            }
            ProblemId::F10 => {
                let mut p: Vec<i64> = ferrier_h(x).into_iter().map(s).collect();
                match self.norm_reading {
                    NormReading::Euclidean => p.push(x.iter().any(|v| *v != T::zero()) as i64),
                    NormReading::Componentwise => p.extend(x.iter().map(|&v| s(v))),
                }
                p
            }
        }
    }
}

impl<T: Scalar> Oracle<T> for Problem {
    fn dim(&self) -> usize {
        self.n
    }

    fn evaluate(&mut self, y: &[T]) -> Result<OracleResponse<T>> {
        check_dim(self.n, y.len())?;
        let mut xi = vec![T::zero(); self.n];
        // Far from the region of interest some problems overflow; the value is
        // passed through and left for the caller to handle.
        let f = self.value_and_subgradient(y, &mut xi);
        Ok(OracleResponse { f, xi })
    }
}

fn f1<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let gf = |v: T| (v.abs() + T::one()).ln();
    let gd = |v: T| sign0(v) / (v.abs() + T::one());
    let sum: T = x.iter().copied().sum();
    let mut best = gf(-sum);
    let mut idx = None;
    for (i, &xi) in x.iter().enumerate() {
        let v = gf(xi);
        if v > best {
            best = v;
            idx = Some(i);
        }
    }
    match idx {
        None => {
            let d = -gd(-sum);
            g.iter_mut().for_each(|v| *v = d);
        }
        Some(i) => g[i] = gd(x[i]),
    }
    best
}

fn f2<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let mut val = T::zero();
    let ln_abs = |v: T| if v == T::zero() { T::zero() } else { v.abs().ln() };
    for i in 0..x.len() - 1 {
        let (a, b) = (x[i], x[i + 1]);
        let (pa, pb) = (b * b + T::one(), a * a + T::one());
        let t1 = a.abs().powf(pa);
        let t2 = b.abs().powf(pb);
        val += t1 + t2;
        g[i] += pa * a.abs().powf(b * b) * sign0(a) + t2 * ln_abs(b) * T::two() * a;
        g[i + 1] += pb * b.abs().powf(a * a) * sign0(b) + t1 * ln_abs(a) * T::two() * b;
    }
    val
}

fn f3<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let mut val = T::zero();
    let c = T::of(1.75);
    let four = T::of(4.0);
    let slope = T::of(3.5);
    for i in 0..x.len() - 1 {
        let (a, b) = (x[i], x[i + 1]);
        let q = a * a + b * b - T::one();
        let sg = sign0(q);
        val += -a + T::two() * q + c * q.abs();
        g[i] += -T::one() + four * a + slope * sg * a;
        g[i + 1] += four * b + slope * sg * b;
    }
    val
}

fn f5_pieces<T: Scalar>(a: T, b: T) -> (T, T) {
    let bm = b - T::one();
    (a * a + bm * bm + b - T::one(), -a * a - bm * bm + b + T::one())
}

fn f4_branches<T: Scalar>(x: &[T]) -> (T, T) {
    (0..x.len() - 1).fold((T::zero(), T::zero()), |(sa, sb), i| {
        let (a, b) = f5_pieces(x[i], x[i + 1]);
        (sa + a, sb + b)
    })
}

fn f4<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let (sa, sb) = f4_branches(x);
    let first = sa >= sb;
    let sgn = if first { T::one() } else { -T::one() };
    for i in 0..x.len() - 1 {
        g[i] += sgn * T::two() * x[i];
        g[i + 1] += sgn * T::two() * (x[i + 1] - T::one()) + T::one();
    }
    if first {
        sa
    } else {
        sb
    }
}

fn f5<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let mut val = T::zero();
    for i in 0..x.len() - 1 {
        let (a, b) = f5_pieces(x[i], x[i + 1]);
        let sgn = if a >= b { T::one() } else { -T::one() };
        val += a.max(b);
        g[i] += sgn * T::two() * x[i];
        g[i + 1] += sgn * T::two() * (x[i + 1] - T::one()) + T::one();
    }
    val
}

fn ferrier_h<T: Scalar>(x: &[T]) -> Vec<T> {
    let sum: T = x.iter().copied().sum();
    x.iter()
        .enumerate()
        .map(|(i, &xi)| T::of((i + 1) as f64) * xi * xi - T::two() * xi + sum)
        .collect()
}

/// `∂h_i/∂x_i - 1 = 2 i x_i - 2`
#[inline]
fn ferrier_diag<T: Scalar>(i: usize, xi: T) -> T {
    T::two() * T::of((i + 1) as f64) * xi - T::two()
}

fn ferrier_abs_sum<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let h = ferrier_h(x);
    let sigma_sum: T = h.iter().map(|&v| sign0(v)).sum();
    for (k, gk) in g.iter_mut().enumerate() {
        *gk += sign0(h[k]) * ferrier_diag(k, x[k]) + sigma_sum;
    }
    h.iter().map(|v| v.abs()).sum()
}

fn ferrier_square_sum<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let h = ferrier_h(x);
    let h_sum: T = h.iter().copied().sum();
    for (k, gk) in g.iter_mut().enumerate() {
        *gk += T::two() * h[k] * ferrier_diag(k, x[k]) + T::two() * h_sum;
    }
    h.iter().map(|&v| v * v).sum()
}

fn argmax_abs<T: Scalar>(h: &[T]) -> (usize, T) {
    h.iter().enumerate().fold((0, T::neg_infinity()), |(bi, bv), (i, v)| {
        if v.abs() > bv {
            (i, v.abs())
        } else {
            (bi, bv)
        }
    })
}

fn ferrier_abs_max<T: Scalar>(x: &[T], g: &mut [T]) -> T {
    let h = ferrier_h(x);
    let (i, val) = argmax_abs(&h);
    let sg = sign0(h[i]);
    g.iter_mut().for_each(|v| *v = sg);
    g[i] += sg * ferrier_diag(i, x[i]);
    val
}

/// Outcome of comparing oracle subgradients with finite differences.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubgradientCheck {
    /// Largest `|ξ_i - fd_i| / (1 + |fd_i|)` over accepted points.
    pub max_violation: f64,
    pub accepted: usize,
    /// Points whose finite-difference stencil crossed a kink.
    pub skipped: usize,
}

/// Compares the subgradient with central differences at `trials` random
/// points of `[-1.5, 1.5]ⁿ`, skipping points where the stencil leaves the
/// smooth piece containing the point.
pub fn subgradient_check(problem: &Problem, trials: usize, seed: u64) -> SubgradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SubgradientCheck {
        max_violation: 0.0,
        accepted: 0,
        skipped: 0,
    };
    for _ in 0..trials {
        let x: Vec<f64> = (0..problem.n).map(|_| rng.gen_range(-1.5..1.5)).collect();
        match check_point(problem, &x) {
            Some(v) => {
                out.accepted += 1;
                out.max_violation = out.max_violation.max(v);
            }
            None => out.skipped += 1,
        }
    }
    out
}

/// Finite-difference deviation at one point, or `None` if the stencil
/// crosses a kink.
pub fn check_point(problem: &Problem, x: &[f64]) -> Option<f64> {
    let base = problem.active_pattern(x);
    let mut g = vec![0.0; x.len()];
    problem.value_and_subgradient(x, &mut g);
    let mut worst: f64 = 0.0;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        if problem.active_pattern(&probe) != base {
            return None;
        }
        let fp = problem.value(&probe);
        probe[i] = x[i] - h;
        if problem.active_pattern(&probe) != base {
            return None;
        }
        let fm = problem.value(&probe);
        probe[i] = x[i];
        let fd = (fp - fm) / (2.0 * h);
        worst = worst.max((g[i] - fd).abs() / (1.0 + fd.abs()));
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(id: ProblemId, x: &[f64]) -> (f64, Vec<f64>) {
        let (_, mut p) = instantiate::<f64>(id, x.len()).unwrap();
        let r = p.evaluate(x).unwrap();
        (r.f, r.xi)
    }

    #[test]
    fn f1_at_start() {
        let (inst, p) = instantiate::<f64>(ProblemId::F1, 2).unwrap();
        assert_eq!(inst.x_start, vec![1.0, 1.0]);
        assert!((p.value(&inst.x_start) - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn starting_points() {
        let (i2, _) = instantiate::<f64>(ProblemId::F2, 4).unwrap();
        assert_eq!(i2.x_start, vec![-1.0, 1.0, -1.0, 1.0]);
        let (i3, _) = instantiate::<f64>(ProblemId::F3, 3).unwrap();
        assert_eq!(i3.x_start, vec![-1.0; 3]);
        let (i4, _) = instantiate::<f64>(ProblemId::F5, 3).unwrap();
        assert_eq!(i4.x_start, vec![-1.5, 2.0, -1.5]);
        let (i8, _) = instantiate::<f64>(ProblemId::F8, 3).unwrap();
        assert_eq!(i8.x_start, vec![1.0, 0.25, 1.0 / 9.0]);
    }

    #[test]
    fn f3_best_known_values() {
        for (n, v) in [(2, -1.0), (5, -2.98), (10, -6.51), (50, -34.80), (1000, -706.54)] {
            let (inst, _) = instantiate::<f64>(ProblemId::F3, n).unwrap();
            assert_eq!(inst.f_best, Some(v));
            assert!(inst.x_star.is_none());
        }
        let (inst, _) = instantiate::<f64>(ProblemId::F3, 7).unwrap();
        assert_eq!(inst.f_best, None);
    }

    #[test]
    fn ferrier_at_origin() {
        for id in [
            ProblemId::F6,
            ProblemId::F7,
            ProblemId::F8,
            ProblemId::F9,
            ProblemId::F10,
        ] {
            let (f, g) = eval(id, &[0.0; 4]);
            assert_eq!(f, 0.0, "{id}");
            assert!(g.iter().all(|v| v.is_finite()));
        }
        let (_, g6) = eval(ProblemId::F6, &[0.0; 4]);
        assert_eq!(g6, vec![0.0; 4]);
    }

    #[test]
    fn minimizers_at_origin() {
        for id in ProblemId::ALL.into_iter().filter(|&id| id != ProblemId::F3) {
            for n in [2, 5, 10] {
                let (inst, p) = instantiate::<f64>(id, n).unwrap();
                let f0 = p.value(inst.x_star.as_ref().unwrap());
                assert!(f0.abs() < 1e-15, "{id} n={n}: {f0}");
            }
        }
    }

    #[test]
    fn start_is_finite_and_above_best() {
        for id in ProblemId::ALL {
            for n in [2, 5, 10, 50] {
                let (inst, p) = instantiate::<f64>(id, n).unwrap();
                let f = p.value(&inst.x_start);
                assert!(f.is_finite());
                if let Some(best) = inst.f_best {
                    assert!(f >= best, "{id} n={n}");
                }
            }
        }
    }

    #[test]
    fn subgradients_match_finite_differences() {
        for id in ProblemId::ALL {
            for n in [2, 5, 10, 50] {
                let (_, p) = instantiate::<f64>(id, n).unwrap();
                let r = subgradient_check(&p, 40, 11 + n as u64);
                assert!(r.accepted > 0, "{id} n={n}: no smooth points");
                assert!(r.max_violation <= 1e-4, "{id} n={n}: {}", r.max_violation);
            }
        }
        let (_, p2) = instantiate::<f64>(ProblemId::F2, 5).unwrap();
        let r = subgradient_check(&p2, 100, 3);
        assert!(r.max_violation <= 1e-4);
        let (_, p7) = instantiate::<f64>(ProblemId::F7, 4).unwrap();
        let r = subgradient_check(&p7, 50, 5);
        assert_eq!(r.skipped, 0);
        assert!(r.max_violation <= 1e-6);
    }

    #[test]
    fn kink_points_are_filtered() {
        // both branches of f4 equal at the origin
        let (_, p) = instantiate::<f64>(ProblemId::F4, 3).unwrap();
        let (a, b) = f4_branches(&[0.0, 0.0, 0.0]);
        assert_eq!(a, b);
        assert_eq!(check_point(&p, &[0.0, 0.0, 0.0]), None);
    }

    #[test]
    fn ferrier_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (f6, _) = eval(ProblemId::F6, &x);
            let (f9, _) = eval(ProblemId::F9, &x);
            let (f10, _) = eval(ProblemId::F10, &x);
            let nsq: f64 = x.iter().map(|v| v * v).sum();
            assert!((f9 - (f6 + 0.5 * nsq)).abs() < 1e-12 * (1.0 + f9.abs()));
            assert!((f10 - (f6 + 0.5 * nsq.sqrt())).abs() < 1e-12 * (1.0 + f10.abs()));
            let (_, p) = instantiate::<f64>(ProblemId::F10, 6).unwrap();
            let comp = p.with_norm_reading(NormReading::Componentwise).value(&x);
            let l1: f64 = x.iter().map(|v| v.abs()).sum();
            assert!((comp - (f6 + 0.5 * l1)).abs() < 1e-12 * (1.0 + comp.abs()));
        }
    }

    #[test]
    fn ids_parse_and_print() {
        assert_eq!("f10".parse::<ProblemId>().unwrap(), ProblemId::F10);
        assert_eq!("F3".parse::<ProblemId>().unwrap(), ProblemId::F3);
        assert!(matches!("f11".parse::<ProblemId>(), Err(Error::UnknownProblem(_))));
        assert!(instantiate_by_name::<f64>("g1", 3).is_err());
        assert_eq!(ProblemId::F7.to_string(), "f7");
    }

    #[test]
    fn single_precision_oracle() {
        let (inst, mut p) = instantiate::<f32>(ProblemId::F6, 5).unwrap();
        let r = p.evaluate(&inst.x_start).unwrap();
        assert!(r.f.is_finite() && r.f > 0.0);
    }
}
