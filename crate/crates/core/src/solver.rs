//! The inexact limited-memory bundle method.
//!
//! Each iteration computes `d = -D ξ̃` with an L-BFGS matrix right after a
//! serious step and an L-SR1 matrix during null-step sequences, evaluates
//! the oracle once at `x + t d`, and either moves the basic point (serious
//! step) or enriches the aggregate through a three-point QP (null step).
//! There is no line search: modified subgradients and locality measures make
//! any stepsize in `[t_min, 1]` admissible.

use std::collections::VecDeque;

use crate::aggregation::{aggregate, build_qp, solve_simplex_qp, AggregateState};
use crate::bundle::{beta_bound_slack, linearize, null_step_slack, COINCIDENT_DIST_SQ};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, axpy, dist_sq, dot, norm, norm_sq, scale};
use crate::lmqn::{CorrectionStore, UpdateForm, INITIAL_CAPACITY, MAX_CAPACITY};
use crate::oracle::Oracle;
use crate::scalar::Scalar;

/// How `t_k ∈ [t_min, 1]` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepsizeRule {
    /// Always `t = 1`.
    Unit,
    /// First point where the line `f̂ + t ξ̃ᵀd` meets the cutting-plane model
    /// built from the stored bundle.
    #[default]
    Interpolated,
}

impl std::str::FromStr for StepsizeRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unit" => Ok(Self::Unit),
            "interpolated" => Ok(Self::Interpolated),
            other => Err(Error::InvalidConfig(format!("unknown stepsize rule `{other}`"))),
        }
    }
}

impl std::fmt::Display for StepsizeRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Unit => "unit",
            Self::Interpolated => "interpolated",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig<T> {
    /// Final accuracy tolerance on `w`.
    pub eps: T,
    /// Descent parameter in `(0, 1/2)`.
    pub eps_l: T,
    /// Lower bound on the convexification parameter.
    pub gamma: T,
    pub t_min: T,
    /// Cap on the length of the search direction.
    pub c_dir: T,
    /// Correction parameter in `(0, 1/2)`.
    pub rho: T,
    /// Noise bound; the run stops once `w < max(eps, q_bar)`.
    pub q_bar: T,
    /// Budget of oracle evaluations, including the initial one.
    pub max_evals: usize,
    /// Elements kept for the stepsize heuristic; `None` means `min(n + 3, 100)`.
    pub bundle_capacity: Option<usize>,
    pub stepsize_rule: StepsizeRule,
    /// Consecutive iterations without change in `f̂` and `‖ξ̃‖` before giving up.
    pub stagnation_window: usize,
    pub initial_pairs: usize,
    pub max_pairs: usize,
    /// Pairs a run of consecutive null steps may append beyond the current
    /// capacity; they are trimmed again at the next serious step.
    pub null_step_pairs: usize,
    /// Abort once the convexification parameter exceeds this.
    pub eta_limit: T,
    /// Interpolated steps shorter than this are replaced by a unit trial
    /// step, which probes the far side of a kink instead of crawling along it.
    pub short_step: T,
    /// Before stopping on a small `w`, drop the stored pairs once per basic
    /// point if `‖ξ̃‖² + 2β̃` is not small as well.
    pub restart_before_stop: bool,
    /// Evaluate the per-iteration invariants and count violations.
    pub check_invariants: bool,
    /// Keep a per-iteration record in the report.
    pub trace: bool,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            eps: T::of(1e-5),
            eps_l: T::of(0.01),
            gamma: T::of(0.5),
            t_min: T::of(1e-12),
            c_dir: T::of(1e20),
            rho: T::of(1e-12),
            q_bar: T::zero(),
            max_evals: 10_000,
            bundle_capacity: None,
            stepsize_rule: StepsizeRule::default(),
            stagnation_window: 50,
            initial_pairs: INITIAL_CAPACITY,
            max_pairs: MAX_CAPACITY,
            null_step_pairs: MAX_CAPACITY,
            eta_limit: T::of(1e12),
            short_step: T::of(1e-3),
            restart_before_stop: true,
            check_invariants: false,
            trace: false,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        let half = T::half();
        if !(self.eps > T::zero()) {
            return bad("eps must be positive");
        }
        if !(self.eps_l > T::zero() && self.eps_l < half) {
            return bad("eps_l must lie in (0, 1/2)");
        }
        if !(self.gamma > T::zero()) {
            return bad("gamma must be positive");
        }
        if !(self.t_min > T::zero() && self.t_min <= T::one()) {
            return bad("t_min must lie in (0, 1]");
        }
        if !(self.c_dir > T::zero()) {
            return bad("direction cap must be positive");
        }
        if !(self.rho > T::zero() && self.rho < half) {
            return bad("rho must lie in (0, 1/2)");
        }
        if !(self.q_bar >= T::zero()) || !self.q_bar.is_finite() {
            return bad("q_bar must be finite and nonnegative");
        }
        if self.max_evals == 0 {
            return bad("max_evals must be at least 1");
        }
        if self.initial_pairs < 3 || self.max_pairs < self.initial_pairs {
            return bad("correction pair capacity must satisfy 3 <= initial <= max");
        }
        if self.stagnation_window == 0 {
            return bad("stagnation window must be at least 1");
        }
        if !(self.eta_limit > self.gamma) {
            return bad("eta_limit must exceed gamma");
        }
        if !(self.short_step >= T::zero() && self.short_step <= T::one()) {
            return bad("short_step must lie in [0, 1]");
        }
        Ok(())
    }

    /// Threshold on `w` below which the run stops.
    pub fn stop_threshold(&self) -> T {
        self.eps.max(self.q_bar)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepKind {
    Serious,
    Null,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FailureReason {
    Oracle(String),
    NonFiniteDirection,
    /// The convexification parameter left the configured bound.
    UnboundedConvexification,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Termination {
    /// `w < max(eps, q_bar)`.
    Tolerance,
    MaxEvaluations,
    Stagnation,
    Failed(FailureReason),
}

impl Termination {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Tolerance => "tolerance",
            Self::MaxEvaluations => "max_evals",
            Self::Stagnation => "stagnation",
            Self::Failed(_) => "error",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub w: T,
    pub f_hat: T,
    pub t: T,
    pub step: StepKind,
    pub form: UpdateForm,
    pub corrected: bool,
}

/// Violation counters for the per-iteration invariants.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InvariantReport {
    pub checks: usize,
    /// `β ≥ (γ/2)‖y - x‖²` for every new element.
    pub beta_bound: usize,
    /// `-β + t dᵀξ_mod ≥ f⁺ - f̂ > -ε_L t w` at null steps.
    pub null_step: usize,
    /// `w ≥ 2β̃` and `w ≥ ρ‖ξ̃‖²`.
    pub stopping_value: usize,
    /// `uᵀ(D u - s) > 0` for null-step pairs that pass the update gate.
    pub sr1_curvature: usize,
    pub aggregate_beta: usize,
    /// `φ(λ*) ≤ φ(0, 0, 1) = w`.
    pub aggregation_monotone: usize,
    /// `f̂` strictly decreasing across serious steps.
    pub descent: usize,
    /// Effective step `t‖d‖` within the direction cap.
    pub step_length: usize,
}

impl InvariantReport {
    pub fn violations(&self) -> usize {
        self.beta_bound
            + self.null_step
            + self.stopping_value
            + self.sr1_curvature
            + self.aggregate_beta
            + self.aggregation_monotone
            + self.descent
            + self.step_length
    }

    pub fn merge(&mut self, other: &InvariantReport) {
        self.checks += other.checks;
        self.beta_bound += other.beta_bound;
        self.null_step += other.null_step;
        self.stopping_value += other.stopping_value;
        self.sr1_curvature += other.sr1_curvature;
        self.aggregate_beta += other.aggregate_beta;
        self.aggregation_monotone += other.aggregation_monotone;
        self.descent += other.descent;
        self.step_length += other.step_length;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport<T> {
    pub x_final: Vec<T>,
    /// Oracle value at `x_final` as seen by the solver (noisy).
    pub f_final: T,
    pub w_final: T,
    pub evaluations: usize,
    pub serious_steps: usize,
    pub null_steps: usize,
    /// Times the stored pairs were dropped because the scaled stopping value
    /// was small but the unscaled one was not.
    pub restarts: usize,
    pub termination: Termination,
    pub trace: Vec<IterationRecord<T>>,
    pub invariants: InvariantReport,
}

/// `-ξ̃ᵀd + 2β̃`.
pub fn stopping_value<T: Scalar>(xi_tilde: &[T], d: &[T], beta_tilde: T) -> T {
    -dot(xi_tilde, d) + T::two() * beta_tilde
}

/// Serious iff `f_new - f_hat ≤ -ε_L t w`.
pub fn descent_test<T: Scalar>(f_new: T, f_hat: T, t: T, w: T, eps_l: T) -> StepKind {
    if f_new - f_hat <= -eps_l * t * w {
        StepKind::Serious
    } else {
        StepKind::Null
    }
}

/// Largest `t ∈ [t_min, 1]` up to which the predicted decrease `f̂ + t ξ̃ᵀd`
/// stays below every cutting plane `f̂ - β_j + t ξ_modⱼᵀd` of the bundle.
/// Each entry of `planes` is `(β_j, ξ_modⱼᵀd)`; planes with `β_j ≤ 0` carry
/// no information about the step length and are ignored.
pub fn crossing_stepsize<T: Scalar>(slope: T, planes: &[(T, T)], t_min: T) -> T {
    let t = planes
        .iter()
        .filter(|&&(beta, g)| beta > T::zero() && g > slope)
        .map(|&(beta, g)| beta / (g - slope))
        .fold(T::one(), T::min);
    if t.is_nan() {
        T::one()
    } else {
        t.max(t_min)
    }
}

/// A past evaluation kept for the stepsize rule.
#[derive(Clone, Debug)]
struct BundlePoint<T> {
    y: Vec<T>,
    f: T,
    xi: Vec<T>,
}

/// `(β, ξ_modᵀd)` of a stored evaluation re-expressed at the basic point `x`.
fn plane_at<T: Scalar>(p: &BundlePoint<T>, x: &[T], f_hat: T, d: &[T], gamma: T) -> (T, T) {
    let mut diff = p.y.clone();
    axpy(-T::one(), x, &mut diff);
    let d2 = norm_sq(&diff);
    let xi_d = dot(&p.xi, d);
    if d2 <= T::of(COINCIDENT_DIST_SQ) {
        return (T::zero(), xi_d);
    }
    let alpha = f_hat - p.f + dot(&p.xi, &diff);
    let eta = (-T::two() * alpha / d2).max(T::zero()) + gamma;
    (alpha + eta * T::half() * d2, xi_d + eta * dot(&diff, d))
}

/// Per-run mutable state between iterations.
struct State<T> {
    x: Vec<T>,
    f_hat: T,
    xi_m: Vec<T>,
    agg: AggregateState<T>,
    store: CorrectionStore<T>,
    /// `m == k`: the previous step was serious (or this is the first iteration).
    after_serious: bool,
    correction_in_null_run: bool,
    bundle: PointBundle<T>,
    /// Capacity of the correction store outside null-step runs.
    base_pairs: usize,
    /// The stored pairs were already dropped once at this basic point.
    restarted_here: bool,
}

/// The most recent evaluations, oldest first.
struct PointBundle<T> {
    points: VecDeque<BundlePoint<T>>,
    cap: usize,
}

impl<T: Scalar> PointBundle<T> {
    fn remember(&mut self, y: &[T], f: T, xi: &[T]) {
        if self.cap == 0 {
            return;
        }
        if self.points.len() == self.cap {
            self.points.pop_front();
        }
        self.points.push_back(BundlePoint {
            y: y.to_vec(),
            f,
            xi: xi.to_vec(),
        });
    }
}

/// Factor applied to `t` when a trial point returns a non-finite value.
const TRIAL_SHRINK: f64 = 0.1;

pub fn minimize<T, O>(oracle: &mut O, x1: &[T], config: &SolverConfig<T>) -> Result<SolveReport<T>>
where
    T: Scalar,
    O: Oracle<T> + ?Sized,
{
    minimize_with_callback(oracle, x1, config, |_| {})
}

/// [`minimize`] with a hook called once per completed iteration.
pub fn minimize_with_callback<T, O, F>(
    oracle: &mut O,
    x1: &[T],
    config: &SolverConfig<T>,
    mut on_iteration: F,
) -> Result<SolveReport<T>>
where
    T: Scalar,
    O: Oracle<T> + ?Sized,
    F: FnMut(&IterationRecord<T>),
{
    config.validate()?;
    let n = oracle.dim();
    check_dim(n, x1.len())?;
    if !all_finite(x1) {
        return Err(Error::InvalidConfig("starting point must be finite".into()));
    }

    let mut report = SolveReport {
        x_final: x1.to_vec(),
        f_final: T::nan(),
        w_final: T::infinity(),
        evaluations: 0,
        serious_steps: 0,
        null_steps: 0,
        restarts: 0,
        termination: Termination::MaxEvaluations,
        trace: Vec::new(),
        invariants: InvariantReport::default(),
    };

    let first = match oracle.evaluate(x1) {
        Ok(r) => r,
        Err(e) => {
            report.termination = Termination::Failed(FailureReason::Oracle(e.to_string()));
            return Ok(report);
        }
    };
    report.evaluations = 1;
    report.f_final = first.f;
    if !first.f.is_finite() || !all_finite(&first.xi) {
        report.termination = Termination::Failed(FailureReason::Oracle("non-finite response".into()));
        return Ok(report);
    }

    let bundle_cap = match config.stepsize_rule {
        StepsizeRule::Unit => 0,
        StepsizeRule::Interpolated => config.bundle_capacity.unwrap_or_else(|| (n + 3).min(100)),
    };
    let mut st = State {
        x: x1.to_vec(),
        f_hat: first.f,
        xi_m: first.xi.clone(),
        agg: AggregateState {
            xi_tilde: first.xi,
            beta_tilde: T::zero(),
        },
        store: CorrectionStore::new(n, config.initial_pairs),
        after_serious: true,
        correction_in_null_run: false,
        bundle: PointBundle {
            points: VecDeque::with_capacity(bundle_cap),
            cap: bundle_cap,
        },
        base_pairs: config.initial_pairs,
        restarted_here: false,
    };
    st.bundle.remember(x1, st.f_hat, &st.xi_m);

    let check = config.check_invariants;
    let inv = &mut report.invariants;
    let threshold = config.stop_threshold();
    let stagnation_tol = |f: T| T::of(1e-12) * (T::one() + f.abs());
    let mut last_progress = (st.f_hat, norm(&st.agg.xi_tilde));
    let mut stagnant = 0usize;
    let mut iteration = 0usize;

    let termination = 'run: loop {
        iteration += 1;

        // direction
        let form = if st.after_serious {
            UpdateForm::Bfgs
        } else {
            UpdateForm::Sr1
        };
        let (mut d, corrected, w) = loop {
            let xi_tilde = &st.agg.xi_tilde;
            let mut d = st.store.apply(form, xi_tilde);
            scale(-T::one(), &mut d);

            // correction
            let corrected = -dot(xi_tilde, &d) < config.rho * norm_sq(xi_tilde) || st.correction_in_null_run;
            if corrected {
                axpy(-config.rho, xi_tilde, &mut d);
                if !st.after_serious {
                    st.correction_in_null_run = true;
                }
            }

            // A metric that collapsed across kinks (tiny uᵀs/uᵀu) makes w small
            // while the aggregate subgradient is not; restart from D = I
            // before accepting the stop.
            let w = stopping_value(xi_tilde, &d, st.agg.beta_tilde);
            let w_plain = norm_sq(xi_tilde) + T::two() * st.agg.beta_tilde;
            if config.restart_before_stop
                && !st.restarted_here
                && w < threshold
                && w_plain >= threshold
                && !st.store.is_empty()
            {
                st.restarted_here = true;
                st.store.clear();
                report.restarts += 1;
                continue;
            }
            break (d, corrected, w);
        };
        let xi_tilde = &st.agg.xi_tilde;
        let xi_sq = norm_sq(xi_tilde);

        // stopping value
        if !w.is_finite() || !all_finite(&d) {
            break Termination::Failed(FailureReason::NonFiniteDirection);
        }
        report.w_final = w;
        if check {
            inv.checks += 1;
            let slack = T::of(64.0) * T::epsilon() * (norm(xi_tilde) * norm(&d) + T::two() * st.agg.beta_tilde);
            if w < T::two() * st.agg.beta_tilde - slack || w < config.rho * xi_sq - slack {
                inv.stopping_value += 1;
            }
            if st.agg.beta_tilde < T::zero() {
                inv.aggregate_beta += 1;
            }
        }
        if w < threshold {
            break Termination::Tolerance;
        }

        let progress = (st.f_hat, norm(&st.agg.xi_tilde));
        let tol = stagnation_tol(st.f_hat);
        if (progress.0 - last_progress.0).abs() < tol && (progress.1 - last_progress.1).abs() < tol {
            stagnant += 1;
            if stagnant >= config.stagnation_window {
                break Termination::Stagnation;
            }
        } else {
            stagnant = 0;
        }
        last_progress = progress;

        if report.evaluations >= config.max_evals {
            break Termination::MaxEvaluations;
        }

        // auxiliary point
        let mut t = match config.stepsize_rule {
            StepsizeRule::Unit => T::one(),
            StepsizeRule::Interpolated => {
                let planes: Vec<(T, T)> = st
                    .bundle
                    .points
                    .iter()
                    .map(|p| plane_at(p, &st.x, st.f_hat, &d, config.gamma))
                    .collect();
                let t = crossing_stepsize(dot(xi_tilde, &d), &planes, config.t_min);
                if t < config.short_step {
                    T::one()
                } else {
                    t
                }
            }
        };
        let d_norm = norm(&d);
        if d_norm > config.c_dir {
            scale(config.c_dir / d_norm, &mut d);
        }
        // A non-finite value means the trial point left the region where the
        // objective is representable; retry closer to x within [t_min, 1].
        let (y, resp) = loop {
            let mut y = st.x.clone();
            axpy(t, &d, &mut y);
            let resp = match oracle.evaluate(&y) {
                Ok(r) => r,
                Err(e) => break 'run Termination::Failed(FailureReason::Oracle(e.to_string())),
            };
            report.evaluations += 1;
            if resp.f.is_finite() && all_finite(&resp.xi) {
                break (y, resp);
            }
            let shorter = t * T::of(TRIAL_SHRINK);
            if shorter < config.t_min || report.evaluations >= config.max_evals {
                break 'run Termination::Failed(FailureReason::Oracle("non-finite value at trial point".into()));
            }
            t = shorter;
        };
        let mut s = d.clone();
        scale(t, &mut s);
        if check {
            inv.checks += 1;
            if norm(&s) > config.c_dir * (T::one() + T::of(1e-12)) {
                inv.step_length += 1;
            }
        }
        st.bundle.remember(&y, resp.f, &resp.xi);

        let step = descent_test(resp.f, st.f_hat, t, w, config.eps_l);
        match step {
            StepKind::Serious => {
                report.serious_steps += 1;
                st.store.set_capacity(st.base_pairs);
                let u: Vec<T> = resp.xi.iter().zip(&st.xi_m).map(|(&a, &b)| a - b).collect();
                st.store.push_pair(&s, &u)?;
                if check {
                    inv.checks += 1;
                    if !(resp.f < st.f_hat) {
                        inv.descent += 1;
                    }
                }
                if st.store.len() == st.store.capacity() && st.base_pairs < config.max_pairs {
                    st.base_pairs += 1;
                    st.store.set_capacity(st.base_pairs);
                }
                st.x = y;
                st.f_hat = resp.f;
                st.xi_m = resp.xi.clone();
                st.agg = AggregateState {
                    xi_tilde: resp.xi,
                    beta_tilde: T::zero(),
                };
                st.correction_in_null_run = false;
                st.after_serious = true;
                st.restarted_here = false;
            }
            StepKind::Null => {
                report.null_steps += 1;
                let lin = linearize(&st.x, &y, &resp.xi, resp.f, st.f_hat, config.gamma)?;
                if !(lin.eta <= config.eta_limit) {
                    break Termination::Failed(FailureReason::UnboundedConvexification);
                }
                let element = crate::bundle::assemble(&st.x, &y, &resp.xi, resp.f, lin);
                let u: Vec<T> = element.xi_mod.iter().zip(&st.xi_m).map(|(&a, &b)| a - b).collect();

                let qp = build_qp(
                    &st.store,
                    form,
                    corrected,
                    config.rho,
                    &st.xi_m,
                    &element.xi_mod,
                    xi_tilde,
                    element.beta,
                    st.agg.beta_tilde,
                )?;
                let lambda = solve_simplex_qp(&qp);

                if check {
                    inv.checks += 1;
                    if beta_bound_slack(element.beta, dist_sq(&st.x, &y), config.gamma) < T::zero() {
                        inv.beta_bound += 1;
                    }
                    let lower = resp.f - st.f_hat;
                    if null_step_slack(&element, t, &d, st.f_hat) < T::zero() || !(lower > -config.eps_l * t * w) {
                        inv.null_step += 1;
                    }
                    let phi = qp.objective(&lambda);
                    let phi_keep = qp.objective(&[T::zero(), T::zero(), T::one()]);
                    if phi > phi_keep + T::of(1e-10) * (T::one() + phi_keep.abs()) {
                        inv.aggregation_monotone += 1;
                    }
                    let gate = -dot(&d, &u) - dot(xi_tilde, &s) < T::zero();
                    if gate {
                        let du = st.store.apply(form, &u);
                        let curv = dot(&u, &du) - dot(&u, &s);
                        let slack = T::of(1e-12) * (norm(&u) * (norm(&du) + norm(&s)));
                        if !(curv > -slack) {
                            inv.sr1_curvature += 1;
                        }
                    }
                }

                let new_agg = aggregate(
                    &lambda,
                    &st.xi_m,
                    &element.xi_mod,
                    xi_tilde,
                    element.beta,
                    st.agg.beta_tilde,
                )?;
                // Within a null-step run pairs are only ever appended: each
                // gated SR1 update can only shrink D, which keeps w decreasing.
                if st.store.len() == st.store.capacity() && st.store.capacity() < st.base_pairs + config.null_step_pairs
                {
                    let grown = st.store.capacity() + 1;
                    st.store.set_capacity(grown);
                }
                if st.store.len() < st.store.capacity() {
                    st.store.try_push_pair(&s, &u, &d, xi_tilde)?;
                }
                st.agg = new_agg;
                st.after_serious = false;
            }
        }

        let record = IterationRecord {
            iteration,
            w,
            f_hat: st.f_hat,
            t,
            step,
            form,
            corrected,
        };
        on_iteration(&record);
        if config.trace {
            report.trace.push(record);
        }
    };

    report.x_final = st.x;
    report.f_final = st.f_hat;
    report.termination = termination;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::FnOracle;
    use crate::problems::{instantiate, ProblemId};

    fn sphere(n: usize) -> FnOracle<impl FnMut(&[f64]) -> (f64, Vec<f64>)> {
        FnOracle::new(n, |y: &[f64]| {
            (y.iter().map(|v| v * v).sum(), y.iter().map(|v| 2.0 * v).collect())
        })
    }

    #[test]
    fn stopping_value_examples() {
        assert_eq!(stopping_value(&[0.0, 0.0], &[0.0, 0.0], 0.0), 0.0);
        // D = I: d = -ξ̃
        assert_eq!(stopping_value(&[3.0, 4.0], &[-3.0, -4.0], 0.5), 26.0);
    }

    #[test]
    fn descent_test_examples() {
        assert_eq!(descent_test(1.0, 1.0, 0.5, 2.0, 0.01), StepKind::Null);
        // f_new - f_hat = -ε_L t w exactly
        assert_eq!(descent_test(-0.25, 0.0, 0.5, 50.0, 0.01), StepKind::Serious);
        assert_eq!(descent_test(-0.05, 0.0, 1.0, 10.0, 0.01), StepKind::Null);
        assert_eq!(descent_test(-0.2, 0.0, 1.0, 10.0, 0.01), StepKind::Serious);
    }

    #[test]
    fn crossing_stepsize_examples() {
        // no bundle information: unit step
        assert_eq!(crossing_stepsize(-1.0, &[], 1e-12), 1.0);
        // plane with β = 0.3 and slope 0.4 meets the line of slope -0.6 at t = 0.3
        let t: f64 = crossing_stepsize(-0.6, &[(0.3, 0.4)], 1e-12);
        assert!((t - 0.3).abs() < 1e-15);
        // the earliest crossing wins; planes at least as steep downhill never cross
        let t: f64 = crossing_stepsize(-0.6, &[(0.3, 0.4), (0.1, 0.4), (0.01, -0.7)], 1e-12);
        assert!((t - 0.1).abs() < 1e-15);
        // far-away crossings are capped at 1, tiny ones clamped at t_min
        assert_eq!(crossing_stepsize(-1.0, &[(5.0, 0.0)], 1e-12), 1.0);
        assert_eq!(crossing_stepsize(-1.0, &[(1e-20, 1.0)], 1e-12), 1e-12);
        // planes through the basic point are ignored
        assert_eq!(crossing_stepsize(-1.0, &[(0.0, 3.0)], 1e-12), 1.0);
    }

    #[test]
    fn plane_matches_bundle_element() {
        let p = BundlePoint {
            y: vec![1.0f64, -2.0],
            f: 0.7,
            xi: vec![0.5, 1.5],
        };
        let x = [0.2, 0.1];
        let d = [-1.0f64, 0.25];
        let e = crate::bundle::make_bundle_element(&x, &p.y, &p.xi, p.f, 1.3, 0.5).unwrap();
        let (beta, g) = plane_at(&p, &x, 1.3, &d, 0.5);
        assert!((beta - e.beta).abs() < 1e-14);
        assert!((g - dot(&e.xi_mod, &d)).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let ok = SolverConfig::<f64>::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.stop_threshold(), 1e-5);
        let bad = SolverConfig {
            eps_l: 0.5,
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let bad = SolverConfig { rho: 0.0, ..ok.clone() };
        assert!(bad.validate().is_err());
        let bad = SolverConfig {
            t_min: 1.5,
            ..ok.clone()
        };
        assert!(bad.validate().is_err());
        let noisy = SolverConfig { q_bar: 0.01, ..ok };
        assert_eq!(noisy.stop_threshold(), 0.01);
    }

    #[test]
    fn smooth_convex_sanity() {
        let mut oracle = sphere(2);
        let config = SolverConfig {
            eps: 1e-8,
            check_invariants: true,
            ..SolverConfig::default()
        };
        let r = minimize(&mut oracle, &[1.0, 1.0], &config).unwrap();
        assert_eq!(r.termination, Termination::Tolerance);
        assert!(norm(&r.x_final) <= 1e-3);
        assert!(r.w_final < 1e-8);
        assert_eq!(r.invariants.violations(), 0);
    }

    #[test]
    fn stationary_start_stops_immediately() {
        let mut oracle = sphere(3);
        let r = minimize(&mut oracle, &[0.0; 3], &SolverConfig::default()).unwrap();
        assert_eq!(r.termination, Termination::Tolerance);
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.x_final, vec![0.0; 3]);
        assert_eq!(r.w_final, 0.0);
    }

    #[test]
    fn f1_exact_small() {
        let (inst, mut p) = instantiate::<f64>(ProblemId::F1, 2).unwrap();
        let r = minimize(&mut p, &inst.x_start, &SolverConfig::default()).unwrap();
        assert!(r.evaluations <= 10_000);
        assert!(r.f_final <= 1e-4, "{r:?}");
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let (inst, mut p) = instantiate::<f64>(ProblemId::F2, 10).unwrap();
        let config = SolverConfig {
            max_evals: 7,
            ..SolverConfig::default()
        };
        let r = minimize(&mut p, &inst.x_start, &config).unwrap();
        assert_eq!(r.termination, Termination::MaxEvaluations);
        assert_eq!(r.evaluations, 7);
    }

    #[test]
    fn oracle_error_aborts_with_partial_report() {
        struct Flaky(usize);
        impl Oracle<f64> for Flaky {
            fn dim(&self) -> usize {
                1
            }
            fn evaluate(&mut self, y: &[f64]) -> Result<crate::oracle::OracleResponse<f64>> {
                self.0 += 1;
                if self.0 > 3 {
                    return Err(Error::Oracle("device unavailable".into()));
                }
                Ok(crate::oracle::OracleResponse {
                    f: y[0].abs(),
                    xi: vec![y[0].signum()],
                })
            }
        }
        let r = minimize(&mut Flaky(0), &[5.0], &SolverConfig::default()).unwrap();
        assert!(matches!(r.termination, Termination::Failed(FailureReason::Oracle(_))));
        assert_eq!(r.evaluations, 3);
        assert!(r.f_final.is_finite());
    }

    #[test]
    fn non_finite_trial_values_shorten_the_step() {
        // finite only on |y| < 2: the unit step from 1 lands at -7 and must be
        // retried closer to x
        let mut oracle = FnOracle::new(1, |y: &[f64]| {
            if y[0].abs() < 2.0 {
                (4.0 * y[0] * y[0], vec![8.0 * y[0]])
            } else {
                (f64::INFINITY, vec![f64::NAN])
            }
        });
        let config = SolverConfig {
            stepsize_rule: StepsizeRule::Unit,
            trace: true,
            ..SolverConfig::default()
        };
        let r = minimize(&mut oracle, &[1.0], &config).unwrap();
        assert_eq!(r.termination, Termination::Tolerance);
        assert!(r.trace[0].t < 1.0);
        assert!(r.x_final[0].abs() < 1e-2);
    }

    #[test]
    fn persistent_non_finite_values_fail() {
        let mut calls = 0;
        let mut oracle = FnOracle::new(1, move |y: &[f64]| {
            calls += 1;
            if calls > 3 {
                (f64::NAN, vec![0.0])
            } else {
                (y[0].abs(), vec![y[0].signum()])
            }
        });
        let r = minimize(&mut oracle, &[5.0], &SolverConfig::default()).unwrap();
        assert!(matches!(r.termination, Termination::Failed(FailureReason::Oracle(_))));
        // t = 1, 0.1, ..., 1e-12 are all tried once
        assert_eq!(r.evaluations, 3 + 13);
        assert!(r.f_final.is_finite());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut oracle = sphere(2);
        assert!(minimize(&mut oracle, &[1.0], &SolverConfig::default()).is_err());
    }

    #[test]
    fn trace_and_callback_agree() {
        let (inst, mut p) = instantiate::<f64>(ProblemId::F6, 5).unwrap();
        let config = SolverConfig {
            trace: true,
            ..SolverConfig::default()
        };
        let mut seen = Vec::new();
        let r = minimize_with_callback(&mut p, &inst.x_start, &config, |rec| seen.push(rec.clone())).unwrap();
        assert_eq!(seen, r.trace);
        assert_eq!(r.trace.len(), r.serious_steps + r.null_steps);
        assert_eq!(r.evaluations, 1 + r.serious_steps + r.null_steps);
        let mut prev = f64::INFINITY;
        for rec in &r.trace {
            assert!(rec.f_hat <= prev);
            prev = rec.f_hat;
        }
    }

    #[test]
    fn single_precision_run() {
        let (inst, mut p) = instantiate::<f32>(ProblemId::F1, 3).unwrap();
        let config = SolverConfig::<f32> {
            eps: 1e-4,
            ..SolverConfig::default()
        };
        let r = minimize(&mut p, &inst.x_start, &config).unwrap();
        assert!(r.f_final < 0.1, "{r:?}");
    }
}
