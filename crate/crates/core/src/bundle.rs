//! Bundle elements built from oracle information at trial points.
//!
//! Every element is expressed relative to the current basic point `x`:
//! its subgradient is tilted by the convexification parameter and its
//! locality measure is shifted so that it is never negative, even when the
//! plain linearization error is (nonconvexity or noise).

use crate::error::{check_dim, Result};
use crate::linalg::{dist_sq, dot};
use crate::scalar::Scalar;

/// Squared distances below this are treated as `y == x`.
pub const COINCIDENT_DIST_SQ: f64 = 1e-300;

/// A trial point together with its modified subgradient and locality measure.
#[derive(Clone, Debug, PartialEq)]
pub struct BundleElement<T> {
    pub y: Vec<T>,
    pub xi_mod: Vec<T>,
    pub beta: T,
    /// Noisy objective value at `y`; kept for the stepsize heuristic.
    pub f_y: T,
}

/// Intermediate quantities from which a [`BundleElement`] is assembled.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearizationData<T> {
    pub alpha: T,
    pub eta: T,
    pub gamma: T,
}

/// `f_hat - f_y - xi_y·(x - y)`. May be negative.
pub fn linearization_error<T: Scalar>(f_hat: T, f_y: T, xi_y: &[T], x: &[T], y: &[T]) -> Result<T> {
    check_dim(x.len(), y.len())?;
    check_dim(x.len(), xi_y.len())?;
    let inner = xi_y
        .iter()
        .zip(x.iter().zip(y))
        .fold(T::zero(), |acc, (&g, (&xi, &yi))| acc + g * (xi - yi));
    Ok(f_hat - f_y - inner)
}

fn coincident<T: Scalar>(dist_sq: T) -> bool {
    // For f32 the threshold underflows to zero and only exact coincidence counts.
    dist_sq <= T::of(COINCIDENT_DIST_SQ)
}

fn eta_from_dist<T: Scalar>(alpha: T, dist_sq: T, gamma: T) -> T {
    if coincident(dist_sq) {
        gamma
    } else {
        (-T::two() * alpha / dist_sq).max(T::zero()) + gamma
    }
}

/// Convexification parameter: `γ` when `x = y` or `α ≥ 0`, otherwise
/// `-2α/‖y-x‖² + γ`. Always at least `γ`.
pub fn convexification_parameter<T: Scalar>(alpha: T, x: &[T], y: &[T], gamma: T) -> Result<T> {
    check_dim(x.len(), y.len())?;
    Ok(eta_from_dist(alpha, dist_sq(x, y), gamma))
}

/// Linearization error and convexification parameter for a trial point.
pub fn linearize<T: Scalar>(x: &[T], y: &[T], xi_y: &[T], f_y: T, f_hat: T, gamma: T) -> Result<LinearizationData<T>> {
    let alpha = linearization_error(f_hat, f_y, xi_y, x, y)?;
    let eta = convexification_parameter(alpha, x, y, gamma)?;
    Ok(LinearizationData { alpha, eta, gamma })
}

/// Builds the element `(y, ξ + η(y-x), α + η/2 ‖y-x‖²)` against basic point `x`.
pub fn make_bundle_element<T: Scalar>(
    x: &[T],
    y: &[T],
    xi_y: &[T],
    f_y: T,
    f_hat: T,
    gamma: T,
) -> Result<BundleElement<T>> {
    let lin = linearize(x, y, xi_y, f_y, f_hat, gamma)?;
    Ok(assemble(x, y, xi_y, f_y, lin))
}

pub(crate) fn assemble<T: Scalar>(x: &[T], y: &[T], xi_y: &[T], f_y: T, lin: LinearizationData<T>) -> BundleElement<T> {
    let d2 = dist_sq(x, y);
    if coincident(d2) {
        return BundleElement {
            y: y.to_vec(),
            xi_mod: xi_y.to_vec(),
            beta: T::zero(),
            f_y,
        };
    }
    let xi_mod = xi_y
        .iter()
        .zip(x.iter().zip(y))
        .map(|(&g, (&xi, &yi))| g + lin.eta * (yi - xi))
        .collect();
    // For α < 0 the sum collapses to γ/2 ‖y-x‖² exactly; evaluating it would cancel.
    let beta = if lin.alpha < T::zero() {
        lin.gamma * T::half() * d2
    } else {
        lin.alpha + lin.eta * T::half() * d2
    };
    debug_assert!(
        beta_bound_slack(beta, d2, lin.gamma) >= T::zero(),
        "locality measure below gamma/2 ||y-x||^2"
    );
    BundleElement {
        y: y.to_vec(),
        xi_mod,
        beta,
        f_y,
    }
}

/// `β - (γ/2)‖y-x‖² + 1e-12 (1 + |β|)`; nonnegative whenever the lower bound
/// on the locality measure holds up to rounding.
pub fn beta_bound_slack<T: Scalar>(beta: T, dist_sq: T, gamma: T) -> T {
    beta - gamma * T::half() * dist_sq + T::of(1e-12) * (T::one() + beta.abs())
}

/// Slack of the null-step inequality `-β + t dᵀξ_mod ≥ f_y - f_hat` for an
/// element built at `y = x + t d`, with a tolerance relative to the
/// magnitudes of the cancelling terms.
pub fn null_step_slack<T: Scalar>(element: &BundleElement<T>, t: T, d: &[T], f_hat: T) -> T {
    let slope = t * dot(d, &element.xi_mod);
    let lhs = -element.beta + slope;
    let scale = T::one() + f_hat.abs() + element.f_y.abs() + element.beta.abs() + slope.abs();
    lhs - (element.f_y - f_hat) + T::of(1e-10) * scale
}
