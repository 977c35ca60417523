//! Limited-memory quasi-Newton matrices in compact form.
//!
//! A [`CorrectionStore`] keeps the most recent correction pairs `(s, u)` and
//! the small Gram blocks `SᵀU`, `UᵀU`, `SᵀS`. The inverse-Hessian
//! approximation `D` is never formed; [`CorrectionStore::apply_bfgs`] and
//! [`CorrectionStore::apply_sr1`] return `D v` in `O(n m + m²)` (plus an
//! `O(m³)` factorization that is refreshed once per mutation).

use std::collections::VecDeque;

use crate::error::{check_dim, Result};
use crate::linalg::{axpy, dot, solve_upper, solve_upper_transposed, SmallMat, SymEigen};
use crate::scalar::Scalar;

pub const INITIAL_CAPACITY: usize = 7;
pub const MAX_CAPACITY: usize = 15;

/// Relative pivot threshold for the triangular and middle-matrix solves.
const PIVOT_TOL: f64 = 1e-14;
/// Relative threshold on the smallest eigenvalue of the L-SR1 middle matrix;
/// the compact-form counterpart of the usual SR1 skipping rule.
const SR1_PIVOT_TOL: f64 = 1e-8;
/// The L-SR1 matrix is accepted only if its smallest eigenvalue is at least this.
const SR1_MIN_EIGENVALUE: f64 = 1e-10;

/// Which compact update defines `D`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdateForm {
    Bfgs,
    Sr1,
}

#[derive(Clone, Debug)]
struct Sr1Factor<T> {
    /// Index of the oldest pair taking part in the L-SR1 matrix.
    first: usize,
    middle: Option<SymEigen<T>>,
}

/// Correction pair history with cached Gram data.
#[derive(Clone, Debug)]
pub struct CorrectionStore<T> {
    dim: usize,
    capacity: usize,
    s: VecDeque<Vec<T>>,
    u: VecDeque<Vec<T>>,
    /// `(i, j) = s_i · u_j`; its upper triangle is `R`, its diagonal `C`.
    su: SmallMat<T>,
    uu: SmallMat<T>,
    ss: SmallMat<T>,
    theta: T,
    bfgs_first: usize,
    /// Scale `ϑ` of the L-SR1 base matrix `ϑ I`.
    sr1_theta: T,
    sr1: Sr1Factor<T>,
}

impl<T: Scalar> CorrectionStore<T> {
    pub fn new(dim: usize, capacity: usize) -> Self {
        Self {
            dim,
            capacity: capacity.max(1),
            s: VecDeque::with_capacity(capacity),
            u: VecDeque::with_capacity(capacity),
            su: SmallMat::zeros(0),
            uu: SmallMat::zeros(0),
            ss: SmallMat::zeros(0),
            theta: T::one(),
            bfgs_first: 0,
            sr1_theta: T::one(),
            sr1: Sr1Factor { first: 0, middle: None },
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// BFGS scaling `uᵀs / uᵀu` of the newest pair (1 when empty).
    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&[T], &[T])> {
        self.s.iter().zip(&self.u).map(|(s, u)| (s.as_slice(), u.as_slice()))
    }

    /// Number of newest pairs taking part in the L-BFGS matrix.
    pub fn bfgs_active(&self) -> usize {
        self.len() - self.bfgs_first
    }

    pub fn sr1_theta(&self) -> T {
        self.sr1_theta
    }

    /// Sets the L-SR1 base scale `ϑ > 0` and refactors.
    pub fn set_sr1_theta(&mut self, theta: T) {
        if theta > T::zero() && theta.is_finite() && theta != self.sr1_theta {
            self.sr1_theta = theta;
            self.refresh();
        }
    }

    /// Number of newest pairs taking part in the L-SR1 matrix.
    pub fn sr1_active(&self) -> usize {
        self.len() - self.sr1.first
    }

    /// Changes the capacity, evicting the oldest pairs if needed.
    pub fn set_capacity(&mut self, capacity: usize) {
        self.capacity = capacity.max(1);
        let mut changed = false;
        while self.len() > self.capacity {
            self.evict_oldest();
            changed = true;
        }
        if changed {
            self.refresh();
        }
    }

    pub fn clear(&mut self) {
        let sr1_theta = self.sr1_theta;
        *self = Self::new(self.dim, self.capacity);
        self.sr1_theta = sr1_theta;
    }

    /// Gate `-dᵀu - ξ̃ᵀs < 0`; on success the pair is appended (evicting the
    /// oldest one at capacity). Degenerate pairs (`uᵀu = 0` or `sᵀu ≤ 0`) are
    /// rejected even when the gate holds. Returns whether the pair was stored.
    pub fn try_push_pair(&mut self, s: &[T], u: &[T], d: &[T], xi_tilde: &[T]) -> Result<bool> {
        check_dim(self.dim, d.len())?;
        check_dim(self.dim, xi_tilde.len())?;
        check_dim(self.dim, s.len())?;
        check_dim(self.dim, u.len())?;
        let gate = -dot(d, u) - dot(xi_tilde, s);
        if !(gate < T::zero()) {
            return Ok(false);
        }
        self.push_pair(s, u)
    }

    /// Appends a pair subject only to the curvature condition `sᵀu > 0`.
    pub fn push_pair(&mut self, s: &[T], u: &[T]) -> Result<bool> {
        check_dim(self.dim, s.len())?;
        check_dim(self.dim, u.len())?;
        let uu = dot(u, u);
        let su = dot(s, u);
        if !(uu > T::zero()) || !(su > T::zero()) || !uu.is_finite() || !su.is_finite() {
            return Ok(false);
        }
        if self.len() == self.capacity {
            self.evict_oldest();
        }
        let k = self.len();
        self.su.grow();
        self.uu.grow();
        self.ss.grow();
        for j in 0..k {
            self.su[(k, j)] = dot(s, &self.u[j]);
            self.su[(j, k)] = dot(&self.s[j], u);
            let uuj = dot(u, &self.u[j]);
            self.uu[(k, j)] = uuj;
            self.uu[(j, k)] = uuj;
            let ssj = dot(s, &self.s[j]);
            self.ss[(k, j)] = ssj;
            self.ss[(j, k)] = ssj;
        }
        self.su[(k, k)] = su;
        self.uu[(k, k)] = uu;
        self.ss[(k, k)] = dot(s, s);
        self.s.push_back(s.to_vec());
        self.u.push_back(u.to_vec());
        self.refresh();
        Ok(true)
    }

    fn evict_oldest(&mut self) {
        self.s.pop_front();
        self.u.pop_front();
        let m = self.len();
        for g in [&mut self.su, &mut self.uu, &mut self.ss] {
            g.shift_out_first();
            g.truncate(m);
        }
    }

    fn refresh(&mut self) {
        let m = self.len();
        if m == 0 {
            self.theta = T::one();
            self.bfgs_first = 0;
            self.sr1 = Sr1Factor { first: 0, middle: None };
            return;
        }
        self.theta = self.su[(m - 1, m - 1)] / self.uu[(m - 1, m - 1)];

        let max_pivot = (0..m).map(|i| self.su[(i, i)].abs()).fold(T::zero(), T::max);
        let tol = T::of(PIVOT_TOL) * max_pivot;
        self.bfgs_first = (0..m)
            .rev()
            .find(|&i| !(self.su[(i, i)].abs() > tol))
            .map_or(0, |i| i + 1);

        self.sr1 = (0..m)
            .find_map(|first| {
                self.sr1_factor(first).map(|eig| Sr1Factor {
                    first,
                    middle: Some(eig),
                })
            })
            .unwrap_or(Sr1Factor { first: m, middle: None });
    }

    /// Factor the L-SR1 middle matrix over pairs `first..`, or `None` if it is
    /// numerically singular or the resulting `D` is not positive definite.
    fn sr1_factor(&self, first: usize) -> Option<SymEigen<T>> {
        let su = self.su.trailing(first);
        let uu = self.uu.trailing(first);
        let ss = self.ss.trailing(first);
        let k = su.dim();
        let th = self.sr1_theta;
        // M = ϑUᵀU - R - Rᵀ + C
        let middle = SmallMat::from_fn(k, |i, j| {
            let r = match i.cmp(&j) {
                std::cmp::Ordering::Less => su[(i, j)],
                std::cmp::Ordering::Greater => su[(j, i)],
                std::cmp::Ordering::Equal => su[(i, i)],
            };
            th * uu[(i, j)] - r
        });
        let eig = SymEigen::new(&middle);
        let scale = middle.norm_inf();
        if !(eig.min_abs() > T::of(SR1_PIVOT_TOL) * scale) {
            return None;
        }
        // D = ϑI - W M⁻¹ Wᵀ with W = ϑU - S; its smallest eigenvalue is
        // ϑ - λmax(G½ M⁻¹ G½) where G = WᵀW.
        let gram_w = SmallMat::from_fn(k, |i, j| {
            th * th * uu[(i, j)] - th * (su[(j, i)] + su[(i, j)]) + ss[(i, j)]
        });
        let root = SymEigen::new(&gram_w).map(|v| v.max(T::zero()).sqrt());
        let inv_middle = eig.map(|v| T::one() / v);
        let tmp = SmallMat::from_fn(k, |i, j| {
            (0..k).fold(T::zero(), |a, l| a + root[(i, l)] * inv_middle[(l, j)])
        });
        let sandwich = SmallMat::from_fn(k, |i, j| (0..k).fold(T::zero(), |a, l| a + tmp[(i, l)] * root[(l, j)]));
        let sym = SmallMat::from_fn(k, |i, j| T::half() * (sandwich[(i, j)] + sandwich[(j, i)]));
        let top = SymEigen::new(&sym).max();
        if th - top >= T::of(SR1_MIN_EIGENVALUE) * th {
            Some(eig)
        } else {
            None
        }
    }

    pub fn apply(&self, form: UpdateForm, v: &[T]) -> Vec<T> {
        match form {
            UpdateForm::Bfgs => self.apply_bfgs(v),
            UpdateForm::Sr1 => self.apply_sr1(v),
        }
    }

    /// `D v` for the compact L-BFGS matrix with `D₀ = θ I`.
    pub fn apply_bfgs(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.dim);
        let m = self.len();
        if m == 0 {
            return v.to_vec();
        }
        let theta = self.theta;
        let mut out: Vec<T> = v.iter().map(|&x| theta * x).collect();
        let first = self.bfgs_first;
        let k = m - first;
        if k == 0 {
            return out;
        }
        let r = self.su.trailing(first);
        let a: Vec<T> = (first..m).map(|i| dot(&self.s[i], v)).collect();
        let b: Vec<T> = (first..m).map(|i| dot(&self.u[i], v)).collect();
        let q = solve_upper(&r, &a);
        // (C + θ UᵀU) q - θ b
        let rhs: Vec<T> = (0..k)
            .map(|i| {
                let uuq = (0..k).fold(T::zero(), |acc, j| acc + self.uu[(i + first, j + first)] * q[j]);
                r[(i, i)] * q[i] + theta * uuq - theta * b[i]
            })
            .collect();
        let top = solve_upper_transposed(&r, &rhs);
        for j in 0..k {
            axpy(top[j], &self.s[j + first], &mut out);
            axpy(-theta * q[j], &self.u[j + first], &mut out);
        }
        out
    }

    /// `D v` for the compact L-SR1 matrix with `D₀ = ϑ I`.
    pub fn apply_sr1(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.dim);
        let th = self.sr1_theta;
        let mut out: Vec<T> = v.iter().map(|&x| th * x).collect();
        let Some(eig) = &self.sr1.middle else {
            return out;
        };
        let first = self.sr1.first;
        let m = self.len();
        let a: Vec<T> = (first..m)
            .map(|i| th * dot(&self.u[i], v) - dot(&self.s[i], v))
            .collect();
        let z = eig.solve(&a);
        for (j, &zj) in z.iter().enumerate() {
            axpy(-th * zj, &self.u[j + first], &mut out);
            axpy(zj, &self.s[j + first], &mut out);
        }
        out
    }

    /// Largest relative deviation of the cached Gram blocks from values
    /// recomputed from the stored pairs.
    pub fn gram_consistency_error(&self) -> T {
        let m = self.len();
        let mut worst = T::zero();
        for i in 0..m {
            for j in 0..m {
                for (cached, fresh) in [
                    (self.su[(i, j)], dot(&self.s[i], &self.u[j])),
                    (self.uu[(i, j)], dot(&self.u[i], &self.u[j])),
                    (self.ss[(i, j)], dot(&self.s[i], &self.s[j])),
                ] {
                    let scale = T::one().max(fresh.abs());
                    worst = worst.max((cached - fresh).abs() / scale);
                }
            }
        }
        worst
    }
}
