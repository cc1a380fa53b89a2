//! Sampled Lyapunov decrease checks for true and surrogate dynamics.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::control::ControlSystem;
use crate::error::Error;
use crate::geometry::PointCloud;
use crate::linalg::{distance, Matrix};

pub type StateFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Default split `s` for inflated decrease checks.
pub const DEFAULT_SPLIT: f64 = 0.5;

/// Lyapunov function `V` with decrease rate `α_V` around `x*`.
#[derive(Clone)]
pub struct LyapunovSpec {
    v: StateFn,
    alpha_v: ScalarFn,
    alpha1: Option<ScalarFn>,
    alpha2: Option<ScalarFn>,
    omega_v: Option<ScalarFn>,
    x_star: Vec<f64>,
    power_p: Option<u32>,
}

impl fmt::Debug for LyapunovSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovSpec")
            .field("x_star", &self.x_star)
            .field("power_p", &self.power_p)
            .finish_non_exhaustive()
    }
}

impl LyapunovSpec {
    pub fn new(x_star: Vec<f64>, v: StateFn, alpha_v: ScalarFn) -> Self {
        LyapunovSpec { v, alpha_v, alpha1: None, alpha2: None, omega_v: None, x_star, power_p: None }
    }

    /// `V(x) = ‖x − x*‖^p` with `α_V(r) = c·r^q`.
    pub fn power_norm(x_star: Vec<f64>, p: u32, c: f64, q: f64) -> Result<Self, Error> {
        if p == 0 {
            return Err(Error::InvalidParameter("power p must be at least 1"));
        }
        if !(c > 0.0) || !(q >= 1.0) {
            return Err(Error::InvalidParameter("decrease rate needs c > 0 and q >= 1"));
        }
        let center = x_star.clone();
        let v: StateFn = Arc::new(move |x: &[f64]| powi(distance(x, &center), p));
        let alpha: ScalarFn = Arc::new(move |r: f64| c * libm::pow(r, q));
        let mut spec = LyapunovSpec::new(x_star, v, alpha);
        spec.power_p = Some(p);
        Ok(spec)
    }

    /// `K∞` sandwich bounds `α₁(‖x − x*‖) ≤ V(x) ≤ α₂(‖x − x*‖)`.
    pub fn with_bounds(mut self, alpha1: ScalarFn, alpha2: ScalarFn) -> Self {
        self.alpha1 = Some(alpha1);
        self.alpha2 = Some(alpha2);
        self
    }

    /// Declared modulus of continuity `ω_V`; used for reporting only.
    pub fn with_modulus(mut self, omega_v: ScalarFn) -> Self {
        self.omega_v = Some(omega_v);
        self
    }

    pub fn v(&self, x: &[f64]) -> f64 {
        (self.v)(x)
    }

    pub fn alpha_v(&self, r: f64) -> f64 {
        (self.alpha_v)(r)
    }

    pub fn omega_v(&self) -> Option<&ScalarFn> {
        self.omega_v.as_ref()
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn power_p(&self) -> Option<u32> {
        self.power_p
    }

    /// `V(x) − α_V(‖x − x*‖) − V(y)` with `y` the successor of `x`.
    pub fn margin(&self, x: &[f64], y: &[f64]) -> f64 {
        self.v(x) - self.alpha_v(distance(x, &self.x_star)) - self.v(y)
    }

    /// Sampled class checks: `V(x*) = 0`, `V > 0` away from `x*`, `α_V(0) = 0`,
    /// `α_V` strictly increasing on the sampled distances, and the optional
    /// sandwich bounds.
    pub fn validate(&self, samples: &PointCloud) -> Result<(), Error> {
        if samples.dim() != self.x_star.len() {
            return Err(Error::DimensionMismatch { expected: self.x_star.len(), found: samples.dim() });
        }
        if self.v(&self.x_star).abs() > 1e-14 {
            return Err(Error::InvalidParameter("V(x*) must vanish"));
        }
        if self.alpha_v(0.0).abs() > 1e-14 {
            return Err(Error::InvalidParameter("alpha_V(0) must vanish"));
        }
        let mut radii = Vec::with_capacity(samples.len());
        for x in samples.iter() {
            let r = distance(x, &self.x_star);
            if r == 0.0 {
                continue;
            }
            let v = self.v(x);
            if !(v > 0.0) {
                return Err(Error::InvalidParameter("V must be positive away from x*"));
            }
            if let (Some(a1), Some(a2)) = (&self.alpha1, &self.alpha2) {
                if a1(r) > v * (1.0 + 1e-12) || v > a2(r) * (1.0 + 1e-12) {
                    return Err(Error::InvalidParameter("V violates its comparison bounds"));
                }
            }
            radii.push(r);
        }
        radii.sort_by(|a, b| a.total_cmp(b));
        radii.dedup();
        let mut prev = 0.0;
        for r in radii {
            let a = self.alpha_v(r);
            if !(a > prev) {
                return Err(Error::InvalidParameter("alpha_V must be strictly increasing"));
            }
            prev = a;
        }
        Ok(())
    }
}

fn powi(base: f64, p: u32) -> f64 {
    (0..p).fold(1.0, |acc, _| acc * base)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// Margin per validation point, in validation order.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// Indices with negative margin.
    pub failures: Vec<usize>,
    /// Largest `‖x − x*‖` over failures (0 if none).
    pub max_failure_distance: f64,
    /// Largest `V(x)` over failures (0 if none).
    pub max_failure_value: f64,
}

impl MarginReport {
    fn from_margins(spec: &LyapunovSpec, validation: &PointCloud, margins: Vec<f64>) -> Self {
        let min_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
        let failures: Vec<usize> = (0..margins.len()).filter(|&i| margins[i] < 0.0).collect();
        let mut max_failure_distance = 0.0f64;
        let mut max_failure_value = 0.0f64;
        for &i in &failures {
            let x = validation.point(i);
            max_failure_distance = max_failure_distance.max(distance(x, spec.x_star()));
            max_failure_value = max_failure_value.max(spec.v(x));
        }
        MarginReport { margins, min_margin, failures, max_failure_distance, max_failure_value }
    }

    pub fn certified(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Margins `V(x) − α_V(‖x − x*‖) − V(G(x))` of a step map `G`.
pub fn check_decrease<G>(step: G, spec: &LyapunovSpec, validation: &PointCloud) -> MarginReport
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let margins = validation.iter().map(|x| spec.margin(x, &step(x))).collect();
    MarginReport::from_margins(spec, validation, margins)
}

/// Validation points with `V(x) ≤ c`.
pub fn sublevel_filter(spec: &LyapunovSpec, validation: &PointCloud, c: f64) -> Result<PointCloud, Error> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter("sublevel value must be positive"));
    }
    let keep: Vec<usize> = (0..validation.len()).filter(|&i| spec.v(validation.point(i)) <= c).collect();
    Ok(validation.subset(&keep))
}

/// `(c_fail, radius)`: the largest `V` and the largest distance to `x*` among
/// points where decrease fails; `{V ≤ c_fail}` is the empirical practical region.
pub fn practical_region_estimate<G>(step: G, spec: &LyapunovSpec, validation: &PointCloud) -> (f64, f64)
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let r = check_decrease(step, spec, validation);
    (r.max_failure_value, r.max_failure_distance)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub split: f64,
    /// `V(x) − (1 − s)α_V(‖x − x*‖) − V(F̂(x))`.
    pub inflated_margins: Vec<f64>,
    pub violations: Vec<usize>,
    /// Margins of the true map with the full rate.
    pub true_report: MarginReport,
}

/// Checks the relaxed decrease `V(F̂(x)) ≤ V(x) − (1 − s)α_V(‖x − x*‖)` for a
/// power-form `V`.
pub fn check_powerform_transfer<F, G>(
    truth: F,
    surrogate: G,
    spec: &LyapunovSpec,
    validation: &PointCloud,
    split: f64,
) -> Result<TransferReport, Error>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if spec.power_p().is_none() {
        return Err(Error::InvalidParameter("transfer check needs a power-form Lyapunov function"));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidParameter("split s must lie in (0, 1)"));
    }
    let inflated_margins: Vec<f64> = validation
        .iter()
        .map(|x| spec.v(x) - (1.0 - split) * spec.alpha_v(distance(x, spec.x_star())) - spec.v(&surrogate(x)))
        .collect();
    let violations = (0..inflated_margins.len()).filter(|&i| inflated_margins[i] < 0.0).collect();
    Ok(TransferReport { split, inflated_margins, violations, true_report: check_decrease(truth, spec, validation) })
}

/// Empirical form of the transfer argument: at points where the true margin
/// dominates `ω_V(‖F(x) − F̂(x)‖)`, the surrogate margin must be nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferImplication {
    /// `min_x m_F(x)`.
    pub theta: f64,
    /// Uniform premise: `θ > 0` and `ω_V(err) ≤ θ` everywhere.
    pub uniform_premise: bool,
    /// Points where `m_F(x) ≥ ω_V(err(x))`.
    pub premise_points: usize,
    /// Premise points with a negative surrogate margin; nonzero means `ω_V` is
    /// not a valid modulus on this data.
    pub counterexamples: Vec<usize>,
    pub surrogate_min_margin: f64,
}

pub fn transfer_implication<W>(
    true_report: &MarginReport,
    surrogate_report: &MarginReport,
    errors: &[f64],
    omega_v: W,
) -> TransferImplication
where
    W: Fn(f64) -> f64,
{
    let theta = true_report.min_margin;
    let mut uniform_premise = theta > 0.0;
    let mut premise_points = 0;
    let mut counterexamples = Vec::new();
    for (i, &e) in errors.iter().enumerate() {
        let w = omega_v(e);
        uniform_premise &= w <= theta;
        if true_report.margins[i] >= w {
            premise_points += 1;
            if surrogate_report.margins[i] < 0.0 {
                counterexamples.push(i);
            }
        }
    }
    TransferImplication {
        theta,
        uniform_premise,
        premise_points,
        counterexamples,
        surrogate_min_margin: surrogate_report.min_margin,
    }
}

/// What to do with feedback values outside `𝕌`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClampPolicy {
    #[default]
    Clamp,
    /// Use the raw value; it is still counted.
    Keep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopReport {
    pub surrogate: MarginReport,
    pub truth: Option<MarginReport>,
    /// Validation points where the feedback left `𝕌`.
    pub clamp_count: usize,
    /// `max ‖κ(x)‖₁` before clamping.
    pub max_feedback_l1: f64,
}

/// Margins of `x ↦ f̂(x, κ(x))` and optionally of `x ↦ f(x, κ(x))`.
pub fn closed_loop_check<S, T, K>(
    surrogate: &S,
    feedback: K,
    spec: &LyapunovSpec,
    validation: &PointCloud,
    truth: Option<&T>,
    policy: ClampPolicy,
) -> ClosedLoopReport
where
    S: ControlSystem + ?Sized,
    T: ControlSystem + ?Sized,
    K: Fn(&[f64]) -> Vec<f64>,
{
    let bound = surrogate.control_bound();
    let mut clamp_count = 0;
    let mut max_feedback_l1 = 0.0f64;
    let mut controls = Matrix::zeros(validation.len(), surrogate.control_dim());
    for (i, x) in validation.iter().enumerate() {
        let mut u = feedback(x);
        max_feedback_l1 = max_feedback_l1.max(u.iter().map(|v| v.abs()).sum());
        if u.iter().any(|v| v.abs() > bound) {
            clamp_count += 1;
            if policy == ClampPolicy::Clamp {
                u.iter_mut().for_each(|v| *v = v.clamp(-bound, bound));
            }
        }
        controls.row_mut(i).copy_from_slice(&u);
    }
    let margins_for = |sys: &dyn Fn(&[f64], &[f64]) -> Vec<f64>| {
        let m = validation.iter().enumerate().map(|(i, x)| spec.margin(x, &sys(x, controls.row(i)))).collect();
        MarginReport::from_margins(spec, validation, m)
    };
    let surrogate_report = margins_for(&|x, u| surrogate.step(x, u));
    let truth_report = truth.map(|t| margins_for(&|x, u| t.step(x, u)));
    ClosedLoopReport { surrogate: surrogate_report, truth: truth_report, clamp_count, max_feedback_l1 }
}
