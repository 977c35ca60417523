//! Three-point aggregation.
//!
//! At a null step the subgradient at the basic point, the newest modified
//! subgradient and the current aggregate are merged into a new aggregate by
//! minimizing a convex quadratic over the unit simplex in `R³`.

use crate::error::{check_dim, Result};
use crate::linalg::dot;
use crate::lmqn::{CorrectionStore, UpdateForm};
use crate::scalar::Scalar;

/// Aggregate subgradient and locality measure.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateState<T> {
    pub xi_tilde: Vec<T>,
    pub beta_tilde: T,
}

/// `φ(λ) = λᵀGλ + 2 bᵀλ` restricted to the unit simplex.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimplexQp<T> {
    pub g: [[T; 3]; 3],
    pub b: [T; 3],
}

/// Preference among candidates whose objective values tie.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    /// Larger `λ₃` first, then larger `λ₂` (keeps aggregate history).
    #[default]
    KeepHistory,
    /// First candidate found in enumeration order.
    FirstFound,
}

impl<T: Scalar> SimplexQp<T> {
    pub fn objective(&self, lambda: &[T; 3]) -> T {
        let mut val = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                val += lambda[i] * self.g[i][j] * lambda[j];
            }
            val += T::two() * self.b[i] * lambda[i];
        }
        val
    }
}

/// Assembles the QP from the triple `(ξ_m, ξ_mod, ξ̃)`.
///
/// With `correction` set the metric is `D + ρI`.
#[allow(clippy::too_many_arguments)]
pub fn build_qp<T: Scalar>(
    store: &CorrectionStore<T>,
    form: UpdateForm,
    correction: bool,
    rho: T,
    xi_m: &[T],
    xi_mod: &[T],
    xi_tilde: &[T],
    beta_new: T,
    beta_tilde: T,
) -> Result<SimplexQp<T>> {
    let n = store.dim();
    check_dim(n, xi_m.len())?;
    check_dim(n, xi_mod.len())?;
    check_dim(n, xi_tilde.len())?;
    let vs = [xi_m, xi_mod, xi_tilde];
    let dv: Vec<Vec<T>> = vs.iter().map(|v| store.apply(form, v)).collect();
    let mut g = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in i..3 {
            // average both orders so G is symmetric to machine precision
            let mut gij = T::half() * (dot(vs[i], &dv[j]) + dot(vs[j], &dv[i]));
            if correction {
                gij += rho * dot(vs[i], vs[j]);
            }
            g[i][j] = gij;
            g[j][i] = gij;
        }
    }
    Ok(SimplexQp {
        g,
        b: [T::zero(), beta_new, beta_tilde],
    })
}

/// Exact minimizer over the simplex by enumerating every KKT support.
pub fn solve_simplex_qp<T: Scalar>(qp: &SimplexQp<T>) -> [T; 3] {
    solve_simplex_qp_with(qp, TieBreak::KeepHistory)
}

pub fn solve_simplex_qp_with<T: Scalar>(qp: &SimplexQp<T>, tie: TieBreak) -> [T; 3] {
    let zero = T::zero();
    let one = T::one();
    let mut candidates: Vec<[T; 3]> = vec![[one, zero, zero], [zero, one, zero], [zero, zero, one]];
    let g = &qp.g;
    let b = &qp.b;
    let scale = (0..3)
        .map(|i| g[i][i].abs())
        .fold(T::zero(), T::max)
        .max(T::min_positive_value());
    let tiny = T::epsilon() * T::of(16.0) * scale;

    // edges: λ_i = μ, λ_j = 1 - μ
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let den = g[i][i] - T::two() * g[i][j] + g[j][j];
        if den > tiny {
            let mu = (g[j][j] - g[i][j] - b[i] + b[j]) / den;
            if mu > zero && mu < one {
                let mut lam = [zero; 3];
                lam[i] = mu;
                lam[j] = one - mu;
                candidates.push(lam);
            }
        }
        // a flat edge attains its minimum at an endpoint, already listed
    }

    // interior: G λ + b = ν 1, Σλ = 1
    if let Some(lam) = interior_kkt(g, b, tiny) {
        if lam.iter().all(|&l| l > zero) {
            candidates.push(lam);
        }
    }

    let mut best = candidates[0];
    let mut best_val = qp.objective(&best);
    for cand in candidates.into_iter().skip(1) {
        let val = qp.objective(&cand);
        let tol = T::of(1e-14) * (T::one() + best_val.abs());
        let better = if val < best_val - tol {
            true
        } else if val <= best_val + tol {
            match tie {
                TieBreak::KeepHistory => (cand[2], cand[1]) > (best[2], best[1]),
                TieBreak::FirstFound => false,
            }
        } else {
            false
        };
        if better {
            best = cand;
            best_val = val;
        }
    }
    best
}

/// Solves the 4×4 KKT system by Gaussian elimination with partial pivoting.
fn interior_kkt<T: Scalar>(g: &[[T; 3]; 3], b: &[T; 3], tiny: T) -> Option<[T; 3]> {
    let mut a = [[T::zero(); 5]; 4];
    for i in 0..3 {
        for j in 0..3 {
            a[i][j] = g[i][j];
        }
        a[i][3] = -T::one();
        a[i][4] = -b[i];
    }
    for j in 0..3 {
        a[3][j] = T::one();
    }
    a[3][4] = T::one();
    for col in 0..4 {
        let piv = (col..4).max_by(|&p, &q| a[p][col].abs().partial_cmp(&a[q][col].abs()).unwrap())?;
        if !(a[piv][col].abs() > tiny) {
            return None;
        }
        a.swap(col, piv);
        for row in col + 1..4 {
            let f = a[row][col] / a[col][col];
            for k in col..5 {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
        }
    }
    let mut x = [T::zero(); 4];
    for i in (0..4).rev() {
        let mut acc = a[i][4];
        for k in i + 1..4 {
            acc -= a[i][k] * x[k];
        }
        x[i] = acc / a[i][i];
    }
    let lam = [x[0], x[1], x[2]];
    if lam.iter().all(|v| v.is_finite()) {
        Some(lam)
    } else {
        None
    }
}

/// Convex combination `(λ₁ξ_m + λ₂ξ_mod + λ₃ξ̃, λ₂β_new + λ₃β̃)`.
pub fn aggregate<T: Scalar>(
    lambda: &[T; 3],
    xi_m: &[T],
    xi_mod: &[T],
    xi_tilde: &[T],
    beta_new: T,
    beta_tilde: T,
) -> Result<AggregateState<T>> {
    check_dim(xi_m.len(), xi_mod.len())?;
    check_dim(xi_m.len(), xi_tilde.len())?;
    let [l1, l2, l3] = *lambda;
    let xi = xi_m
        .iter()
        .zip(xi_mod)
        .zip(xi_tilde)
        .map(|((&a, &b), &c)| l1 * a + l2 * b + l3 * c)
        .collect();
    let beta = (l2 * beta_new + l3 * beta_tilde).max(T::zero());
    Ok(AggregateState {
        xi_tilde: xi,
        beta_tilde: beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid_min(qp: &SimplexQp<f64>, steps: usize) -> f64 {
        let h = 1.0 / steps as f64;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let l1 = i as f64 * h;
                let l2 = j as f64 * h;
                let l3 = (1.0 - l1 - l2).max(0.0);
                best = best.min(qp.objective(&[l1, l2, l3]));
            }
        }
        best
    }

    fn identity_qp(b: [f64; 3]) -> SimplexQp<f64> {
        SimplexQp {
            g: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            b,
        }
    }

    #[test]
    fn symmetric_interior_minimum() {
        let lam = solve_simplex_qp(&identity_qp([0.0; 3]));
        for l in lam {
            assert!((l - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn heavy_locality_measures_push_to_first_vertex() {
        let lam = solve_simplex_qp(&identity_qp([0.0, 10.0, 10.0]));
        assert_eq!(lam, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn ties_prefer_history() {
        // φ constant on the simplex
        let qp = SimplexQp {
            g: [[1.0; 3]; 3],
            b: [0.0; 3],
        };
        assert_eq!(solve_simplex_qp(&qp), [0.0, 0.0, 1.0]);
        assert_eq!(solve_simplex_qp_with(&qp, TieBreak::FirstFound), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn qp_from_identity_metric() {
        let store = CorrectionStore::<f64>::new(2, 7);
        let e1 = [1.0, 0.0];
        let e2 = [0.0, 1.0];
        let e12 = [1.0, 1.0];
        let qp = build_qp(&store, UpdateForm::Bfgs, false, 0.5, &e1, &e2, &e12, 0.55, 0.1).unwrap();
        assert_eq!(qp.g, [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0], [1.0, 1.0, 2.0]]);
        assert_eq!(qp.b, [0.0, 0.55, 0.1]);
        let corrected = build_qp(&store, UpdateForm::Sr1, true, 0.5, &e1, &e2, &e12, 0.55, 0.1).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((corrected.g[i][j] - 1.5 * qp.g[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn aggregate_examples() {
        let xm = [1.0f64, 2.0];
        let xmod = [3.0, -1.0];
        let xt = [0.5, 0.5];
        let same = aggregate(&[0.0, 0.0, 1.0], &xm, &xmod, &xt, 0.7, 0.2).unwrap();
        assert_eq!(same.xi_tilde, xt.to_vec());
        assert_eq!(same.beta_tilde, 0.2);
        let reset = aggregate(&[1.0, 0.0, 0.0], &xm, &xmod, &xt, 0.7, 0.2).unwrap();
        assert_eq!(reset.xi_tilde, xm.to_vec());
        assert_eq!(reset.beta_tilde, 0.0);
        let mix = aggregate(&[0.0, 0.5, 0.5], &xm, &xmod, &xt, 0.4, 0.2).unwrap();
        assert!((mix.beta_tilde - 0.3).abs() < 1e-15);
    }

    #[test]
    fn degenerate_gram_still_solves() {
        // rank one G: all three vectors parallel
        let v = [1.0, 2.0, -1.0];
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = v[i] * v[j];
            }
        }
        let qp = SimplexQp { g, b: [0.0, 0.3, 0.1] };
        let lam = solve_simplex_qp(&qp);
        assert!((lam.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(qp.objective(&lam) <= grid_min(&qp, 300) + 1e-12);
    }

    fn psd_qp() -> impl Strategy<Value = SimplexQp<f64>> {
        (prop::array::uniform9(-1.0f64..1.0), prop::array::uniform3(0.0f64..1.0)).prop_map(|(a, b)| {
            let mut g = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    g[i][j] = (0..3).map(|k| a[3 * k + i] * a[3 * k + j]).sum();
                }
            }
            SimplexQp { g, b }
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn matches_grid_and_beats_vertices(qp in psd_qp()) {
            let lam = solve_simplex_qp(&qp);
            prop_assert!(lam.iter().all(|&l| l >= 0.0));
            prop_assert!((lam.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            let val = qp.objective(&lam);
            let grid = grid_min(&qp, 200);
            prop_assert!(val <= grid + 1e-10);
            prop_assert!(grid - val <= 1e-3);
            for e in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] {
                prop_assert!(val <= qp.objective(&e) + 1e-12);
            }
        }
    }
}
