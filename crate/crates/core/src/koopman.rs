//! Autonomous kEDMD surrogates `F̂_λ = Υ ∘ (Ψ_{F(X)}ᵀ (K_X + λI)⁻¹ k_X)` and
//! the two-solve variant `F̃_λ`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::geometry::{dist_to_cloud, AxisBox, PointCloud};
use crate::linalg::{distance, Matrix};
use crate::rkhs::{cross_kernel_matrix, RkhsModel};
use crate::wendland::WendlandKernel;

/// One-step map `x⁺ = F(x)` on a box domain.
pub trait DynamicalSystem {
    fn dim(&self) -> usize;
    fn domain(&self) -> &AxisBox;
    fn step(&self, x: &[f64]) -> Vec<f64>;
}

impl<T: DynamicalSystem + ?Sized> DynamicalSystem for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn domain(&self) -> &AxisBox {
        (**self).domain()
    }
    fn step(&self, x: &[f64]) -> Vec<f64> {
        (**self).step(x)
    }
}

/// Observable dictionary `Ψ: ℝⁿ → ℝᴹ` with a left inverse `Υ` and its
/// declared modulus of continuity `ω_Υ`.
pub trait Observables {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    fn lift(&self, x: &[f64]) -> Vec<f64>;
    fn project(&self, psi: &[f64]) -> Vec<f64>;
    fn modulus(&self, r: f64) -> f64;
}

/// The `n` coordinate maps; `Υ` is the identity and `ω_Υ(r) = r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordinateObservables {
    pub dim: usize,
}

impl Observables for CoordinateObservables {
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn output_dim(&self) -> usize {
        self.dim
    }
    fn lift(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
    fn project(&self, psi: &[f64]) -> Vec<f64> {
        psi[..self.dim].to_vec()
    }
    fn modulus(&self, r: f64) -> f64 {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `Ψ_{F(X)}ᵀ (K+λI)⁻¹ k_X(x)`.
    #[default]
    Standard,
    /// `Ψ_Xᵀ (K+λI)⁻¹ K_{X,F(X)} (K+λI)⁻¹ k_X(x)`.
    Alternative,
}

#[derive(Debug, Clone)]
pub struct AutonomousSurrogate<O = CoordinateObservables> {
    model: RkhsModel,
    observables: O,
    variant: Variant,
    domain: AxisBox,
    // Data sites whose successor left the domain.
    invariance_violations: Vec<usize>,
}

/// Fits with coordinate observables. Successors are computed from `system`.
pub fn fit_autonomous<S: DynamicalSystem + ?Sized>(
    system: &S,
    data: &PointCloud,
    kernel: &WendlandKernel,
    lambda: f64,
    variant: Variant,
) -> Result<AutonomousSurrogate, Error> {
    let obs = CoordinateObservables { dim: system.dim() };
    fit_autonomous_with(system, data, kernel, lambda, variant, obs)
}

pub fn fit_autonomous_with<S: DynamicalSystem + ?Sized, O: Observables>(
    system: &S,
    data: &PointCloud,
    kernel: &WendlandKernel,
    lambda: f64,
    variant: Variant,
    observables: O,
) -> Result<AutonomousSurrogate<O>, Error> {
    if data.dim() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: data.dim() });
    }
    if data.iter().any(|x| !system.domain().contains(x)) {
        return Err(Error::InvalidParameter("data sites must lie in the system domain"));
    }
    let mut successors = PointCloud::empty(data.dim());
    for x in data.iter() {
        successors.push(&system.step(x))?;
    }
    fit_from_pairs(data, &successors, system.domain(), kernel, lambda, variant, observables)
}

/// Fits from data pairs `(x_i, F(x_i))` without access to `F` itself.
pub fn fit_from_pairs<O: Observables>(
    data: &PointCloud,
    successors: &PointCloud,
    domain: &AxisBox,
    kernel: &WendlandKernel,
    lambda: f64,
    variant: Variant,
    observables: O,
) -> Result<AutonomousSurrogate<O>, Error> {
    if successors.len() != data.len() {
        return Err(Error::DimensionMismatch { expected: data.len(), found: successors.len() });
    }
    if observables.input_dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: observables.input_dim() });
    }
    if successors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("successor values must be finite"));
    }
    let invariance_violations = successors
        .iter()
        .enumerate()
        .filter(|(_, y)| !domain.contains(y))
        .map(|(i, _)| i)
        .collect();
    let m = observables.output_dim();
    let lifted = |cloud: &PointCloud| {
        let mut t = Matrix::zeros(cloud.len(), m);
        for (i, x) in cloud.iter().enumerate() {
            t.row_mut(i).copy_from_slice(&observables.lift(x));
        }
        t
    };
    let model = match variant {
        Variant::Standard => RkhsModel::fit(kernel, data, &lifted(successors), lambda)?,
        Variant::Alternative => {
            // Coefficients A·K_{X,F(X)}ᵀ·A·Ψ_X with A = (K+λI)⁻¹; (K_{X,F(X)})ᵀ_{ij} = k(F(x_i), x_j).
            let first = RkhsModel::fit(kernel, data, &lifted(data), lambda)?;
            let cross_t = cross_kernel_matrix(kernel, successors, data);
            let inner = cross_t.matmul(first.coefficients());
            let factor = first.factor().expect("fresh fit carries its factor").clone();
            let coefficients = factor.solve(&inner);
            RkhsModel::from_factor(kernel, data, lambda, factor, coefficients)?
        }
    };
    Ok(AutonomousSurrogate { model, observables, variant, domain: domain.clone(), invariance_violations })
}

/// What [`AutonomousSurrogate::rollout`] does once the surrogate state leaves the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExitPolicy {
    /// Stop after recording the first state outside the domain.
    #[default]
    Halt,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Surrogate states `x̂(0), …`.
    pub states: Vec<Vec<f64>>,
    /// True states `x(0), …` when the true map was supplied.
    pub truth: Option<Vec<Vec<f64>>>,
    /// `‖F̂(x(k)) − F(x(k))‖` along the true trajectory.
    pub one_step_errors: Vec<f64>,
    /// `‖x̂(k) − x(k)‖`.
    pub accumulated_errors: Vec<f64>,
    /// First step index whose surrogate state is outside the domain.
    pub exited_at: Option<usize>,
    pub halted: bool,
}

/// Iterates `surrogate` from `x0`, pairing it with `truth` when given. Both
/// maps receive the step index so control schedules can be threaded through.
pub fn rollout_maps<S, T>(
    x0: &[f64],
    steps: usize,
    domain: &AxisBox,
    policy: ExitPolicy,
    mut surrogate: S,
    mut truth: Option<T>,
) -> Trajectory
where
    S: FnMut(usize, &[f64]) -> Vec<f64>,
    T: FnMut(usize, &[f64]) -> Vec<f64>,
{
    let mut states = vec![x0.to_vec()];
    let mut true_states = truth.as_ref().map(|_| vec![x0.to_vec()]);
    let mut one_step_errors = Vec::new();
    let mut accumulated_errors = Vec::new();
    if true_states.is_some() {
        accumulated_errors.push(0.0);
    }
    let mut exited_at = if domain.contains(x0) { None } else { Some(0) };
    let mut halted = exited_at.is_some() && policy == ExitPolicy::Halt;
    let mut k = 0;
    while k < steps && !halted {
        let current = states.last().expect("non-empty").clone();
        let next = surrogate(k, &current);
        if let (Some(f), Some(ts)) = (truth.as_mut(), true_states.as_mut()) {
            let xk = ts.last().expect("non-empty").clone();
            let true_next = f(k, &xk);
            let along_truth = surrogate(k, &xk);
            one_step_errors.push(distance(&along_truth, &true_next));
            accumulated_errors.push(distance(&next, &true_next));
            ts.push(true_next);
        }
        let outside = !domain.contains(&next) || next.iter().any(|v| !v.is_finite());
        states.push(next);
        k += 1;
        if outside && exited_at.is_none() {
            exited_at = Some(k);
        }
        if outside && policy == ExitPolicy::Halt {
            halted = true;
        }
    }
    Trajectory { states, truth: true_states, one_step_errors, accumulated_errors, exited_at, halted }
}

impl<O: Observables> AutonomousSurrogate<O> {
    pub fn model(&self) -> &RkhsModel {
        &self.model
    }

    pub fn observables(&self) -> &O {
        &self.observables
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn centers(&self) -> &PointCloud {
        self.model.centers()
    }

    /// Data sites `x_i` with `F(x_i)` outside the domain.
    pub fn invariance_violations(&self) -> &[usize] {
        &self.invariance_violations
    }

    /// Reassembles a surrogate from a persisted model.
    pub fn from_model(model: RkhsModel, observables: O, variant: Variant, domain: AxisBox) -> Result<Self, Error> {
        if model.output_dim() != observables.output_dim() {
            return Err(Error::DimensionMismatch { expected: observables.output_dim(), found: model.output_dim() });
        }
        Ok(AutonomousSurrogate { model, observables, variant, domain, invariance_violations: Vec::new() })
    }

    /// `Υ(model(x))`. Points outside the domain are extrapolated.
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.observables.project(&self.model.evaluate(x))
    }

    /// Like [`Self::predict`] but also reports whether `x` was in the domain.
    pub fn predict_checked(&self, x: &[f64]) -> Result<(Vec<f64>, bool), Error> {
        let psi = self.model.try_evaluate(x)?;
        Ok((self.observables.project(&psi), self.domain.contains(x)))
    }

    pub fn rollout<S: DynamicalSystem + ?Sized>(
        &self,
        x0: &[f64],
        steps: usize,
        truth: Option<&S>,
        policy: ExitPolicy,
    ) -> Trajectory {
        rollout_maps(
            x0,
            steps,
            &self.domain,
            policy,
            |_, x: &[f64]| self.predict(x),
            truth.map(|s| move |_: usize, x: &[f64]| s.step(x)),
        )
    }
}

impl<O: Observables> DynamicalSystem for AutonomousSurrogate<O> {
    fn dim(&self) -> usize {
        self.observables.input_dim()
    }
    fn domain(&self) -> &AxisBox {
        &self.domain
    }
    fn step(&self, x: &[f64]) -> Vec<f64> {
        self.predict(x)
    }
}

/// `(‖F(x*) − x*‖, ‖F̂(x*) − x*‖)` for a data site `x*`.
pub fn check_equilibrium_preservation<S: DynamicalSystem + ?Sized, O: Observables>(
    system: &S,
    surrogate: &AutonomousSurrogate<O>,
    x_star: &[f64],
) -> Result<(f64, f64), Error> {
    if x_star.len() != system.dim() {
        return Err(Error::DimensionMismatch { expected: system.dim(), found: x_star.len() });
    }
    if surrogate.centers().position(x_star).is_none() {
        return Err(Error::NotADataSite);
    }
    Ok((distance(&system.step(x_star), x_star), distance(&surrogate.predict(x_star), x_star)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub error: f64,
    pub dist_to_data: f64,
    pub dist_to_equilibrium: f64,
    /// `error / dist(x, X)`, with `0/0` reported as 0.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionalityProfile {
    pub rows: Vec<ProfileRow>,
    pub max_error: f64,
    pub max_ratio: f64,
    /// Max error over validation points inside each requested box.
    pub box_maxima: Vec<f64>,
}

/// Pointwise errors `‖F(x) − F̂(x)‖` over the validation set.
pub fn validation_errors<S: DynamicalSystem + ?Sized, O: Observables>(
    system: &S,
    surrogate: &AutonomousSurrogate<O>,
    validation: &PointCloud,
) -> Vec<f64> {
    validation.iter().map(|x| distance(&system.step(x), &surrogate.predict(x))).collect()
}

/// Max of `values[i]` over validation points inside `region` (0 if none).
pub fn max_over_box(validation: &PointCloud, values: &[f64], region: &AxisBox) -> f64 {
    validation
        .iter()
        .zip(values)
        .filter(|(x, _)| region.contains(x))
        .fold(0.0, |acc, (_, &v)| acc.max(v))
}

pub fn proportionality_profile<S: DynamicalSystem + ?Sized, O: Observables>(
    system: &S,
    surrogate: &AutonomousSurrogate<O>,
    validation: &PointCloud,
    x_star: &[f64],
    boxes: &[AxisBox],
) -> ProportionalityProfile {
    let errors = validation_errors(system, surrogate, validation);
    let rows: Vec<ProfileRow> = validation
        .iter()
        .zip(&errors)
        .map(|(x, &error)| {
            let dist_to_data = dist_to_cloud(x, surrogate.centers());
            let ratio = if dist_to_data > 0.0 { error / dist_to_data } else { 0.0 };
            ProfileRow { error, dist_to_data, dist_to_equilibrium: distance(x, x_star), ratio }
        })
        .collect();
    let max_error = errors.iter().fold(0.0f64, |a, &b| a.max(b));
    let max_ratio = rows.iter().fold(0.0f64, |a, r| a.max(r.ratio));
    let box_maxima = boxes.iter().map(|b| max_over_box(validation, &errors, b)).collect();
    ProportionalityProfile { rows, max_error, max_ratio, box_maxima }
}
