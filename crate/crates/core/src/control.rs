//! Control-affine surrogates `f̂(x, u) = ĝ₀(x) + Ĝ(x)u` from clustered
//! state/control samples (macro centers, micro data), and the diagnostics
//! attached to them.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::geometry::{build_clusters, dist_to_cloud, AxisBox, ClusterAssignment, PointCloud};
use crate::koopman::{rollout_maps, DynamicalSystem, ExitPolicy, Trajectory};
use crate::linalg::{distance, least_squares, smallest_eigenvalue_spd, symmetric_eigenvalues, Cholesky, Matrix};
use crate::rkhs::{kernel_matrix, RkhsModel};
use crate::wendland::WendlandKernel;

/// Cluster rejection gate on `λ_min(U Uᵀ)`.
pub const REJECTION_THRESHOLD: f64 = 1e-10;
/// Largest admissible fraction of rejected clusters.
pub const MAX_REJECTED_FRACTION: f64 = 0.1;
/// Up to this many centers the `𝟙`-term is computed by enumeration.
pub const DEFAULT_ONES_CROSSOVER: usize = 16;

/// Discrete-time control-affine system `x⁺ = g₀(x) + G(x)u`.
pub trait ControlSystem {
    fn dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn domain(&self) -> &AxisBox;
    /// `R` with `𝕌 = [−R, R]^m`.
    fn control_bound(&self) -> f64;
    fn drift(&self, x: &[f64]) -> Vec<f64>;
    /// `G(x)` as an `n × m` matrix.
    fn input_matrix(&self, x: &[f64]) -> Matrix;

    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.drift(x);
        let g = self.input_matrix(x);
        for (p, o) in out.iter_mut().enumerate() {
            for (q, uq) in u.iter().enumerate() {
                *o += g[(p, q)] * uq;
            }
        }
        out
    }
}

impl<T: ControlSystem + ?Sized> ControlSystem for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn control_dim(&self) -> usize {
        (**self).control_dim()
    }
    fn domain(&self) -> &AxisBox {
        (**self).domain()
    }
    fn control_bound(&self) -> f64 {
        (**self).control_bound()
    }
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        (**self).drift(x)
    }
    fn input_matrix(&self, x: &[f64]) -> Matrix {
        (**self).input_matrix(x)
    }
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (**self).step(x, u)
    }
}

/// A control system with its input frozen to `u`.
#[derive(Debug, Clone)]
pub struct FixedControl<S> {
    pub system: S,
    pub control: Vec<f64>,
}

impl<S: ControlSystem> DynamicalSystem for FixedControl<S> {
    fn dim(&self) -> usize {
        self.system.dim()
    }
    fn domain(&self) -> &AxisBox {
        self.system.domain()
    }
    fn step(&self, x: &[f64]) -> Vec<f64> {
        self.system.step(x, &self.control)
    }
}

/// Triples `(x̄_i, ū_i, x̄_i⁺)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlDataset {
    states: PointCloud,
    controls: Vec<f64>,
    control_dim: usize,
    successors: PointCloud,
    bound: f64,
}

impl ControlDataset {
    /// `controls` holds one length-`control_dim` vector per state, concatenated.
    /// Controls outside `[−bound, bound]^m` are rejected.
    pub fn new(
        states: PointCloud,
        controls: Vec<f64>,
        control_dim: usize,
        successors: PointCloud,
        bound: f64,
    ) -> Result<Self, Error> {
        if control_dim == 0 {
            return Err(Error::InvalidParameter("control dimension must be at least 1"));
        }
        if !(bound >= 0.0) {
            return Err(Error::InvalidParameter("control bound must be nonnegative"));
        }
        if controls.len() != states.len() * control_dim {
            return Err(Error::DimensionMismatch { expected: states.len() * control_dim, found: controls.len() });
        }
        if successors.len() != states.len() {
            return Err(Error::DimensionMismatch { expected: states.len(), found: successors.len() });
        }
        if successors.dim() != states.dim() {
            return Err(Error::DimensionMismatch { expected: states.dim(), found: successors.dim() });
        }
        if let Some((i, &v)) = controls.iter().enumerate().find(|(_, v)| !(v.abs() <= bound)) {
            return Err(Error::ControlOutOfBounds { index: i / control_dim, value: v, bound });
        }
        if successors.as_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("successor states must be finite"));
        }
        Ok(ControlDataset { states, controls, control_dim, successors, bound })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.dim()
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn states(&self) -> &PointCloud {
        &self.states
    }

    pub fn successors(&self) -> &PointCloud {
        &self.successors
    }

    pub fn controls_flat(&self) -> &[f64] {
        &self.controls
    }

    pub fn control(&self, i: usize) -> &[f64] {
        &self.controls[i * self.control_dim..(i + 1) * self.control_dim]
    }
}

/// Where micro samples are drawn relative to their macro center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MicroSampling {
    /// All samples sit exactly on the center (`ε = 0`).
    ExactCenter,
    /// Uniform in the closed ball of radius `ε` around the center.
    Ball { radius: f64 },
}

/// Draws `per_center` micro samples around every center with controls
/// uniform in `𝕌` and successors from the true system.
pub fn sample_micro_data<S: ControlSystem + ?Sized, R: Rng + ?Sized>(
    system: &S,
    centers: &PointCloud,
    per_center: usize,
    sampling: MicroSampling,
    rng: &mut R,
) -> Result<ControlDataset, Error> {
    let (n, m, bound) = (system.dim(), system.control_dim(), system.control_bound());
    if centers.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: centers.dim() });
    }
    if let MicroSampling::Ball { radius } = sampling {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidParameter("sampling radius must be nonnegative and finite"));
        }
    }
    let total = centers.len() * per_center;
    let mut states = Vec::with_capacity(total * n);
    let mut controls = Vec::with_capacity(total * m);
    let mut successors = Vec::with_capacity(total * n);
    let mut x = vec![0.0; n];
    let mut u = vec![0.0; m];
    for c in centers.iter() {
        for _ in 0..per_center {
            match sampling {
                MicroSampling::ExactCenter => x.copy_from_slice(c),
                MicroSampling::Ball { radius } => sample_ball(c, radius, rng, &mut x),
            }
            for v in u.iter_mut() {
                *v = if bound > 0.0 { rng.gen_range(-bound..=bound) } else { 0.0 };
            }
            states.extend_from_slice(&x);
            controls.extend_from_slice(&u);
            successors.extend(system.step(&x, &u));
        }
    }
    ControlDataset::new(PointCloud::new(n, states)?, controls, m, PointCloud::new(n, successors)?, bound)
}

fn sample_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R, out: &mut [f64]) {
    // Rejection from the enclosing cube; acceptance ≥ π/4 in 2-D.
    loop {
        let mut r2 = 0.0;
        for (o, c) in out.iter_mut().zip(center) {
            let t: f64 = rng.gen_range(-1.0..=1.0);
            r2 += t * t;
            *o = c + radius * t;
        }
        if r2 <= 1.0 {
            return;
        }
    }
}

/// `λ_min(U Uᵀ)` and `√N ‖U^†‖ = √(N / λ_min)` for a cluster with `N` controls
/// of dimension `m` (concatenated).
pub fn cluster_conditioning(controls: &[f64], control_dim: usize) -> (f64, f64) {
    let u = regressor_matrix(controls, control_dim);
    let s = u.matmul(&u.transpose());
    let lambda_min = symmetric_eigenvalues(&s)[0].max(0.0);
    let scaled = libm::sqrt(u.cols() as f64 / lambda_min);
    (lambda_min, scaled)
}

/// `U = [1 … 1; u_1 … u_N]`, `(m+1) × N`.
pub fn regressor_matrix(controls: &[f64], control_dim: usize) -> Matrix {
    let count = controls.len() / control_dim;
    Matrix::from_fn(control_dim + 1, count, |r, c| if r == 0 { 1.0 } else { controls[c * control_dim + r - 1] })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    /// Index into the original center cloud.
    pub center_index: usize,
    pub u: Matrix,
    /// Successors `X_ℓ⁺`, `n × N`.
    pub x_plus: Matrix,
    /// `H*_ℓ = X_ℓ⁺ U_ℓ^†`, `n × (m+1)`.
    pub h: Matrix,
    pub lambda_min: f64,
    pub pinv_norm: f64,
    pub scaled_pinv_norm: f64,
}

impl ClusterFit {
    /// Frobenius objective `‖H U − X⁺‖_F²` at an arbitrary `H`.
    pub fn objective(&self, h: &Matrix) -> f64 {
        let r = h.matmul(&self.u).sub(&self.x_plus);
        let f = r.frobenius_norm();
        f * f
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedCluster {
    pub center_index: usize,
    pub lambda_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterRegression {
    pub clusters: Vec<ClusterFit>,
    pub rejected: Vec<RejectedCluster>,
    pub assignment: ClusterAssignment,
    pub neighbors: usize,
}

impl ClusterRegression {
    /// Realized cluster radius `ε`.
    pub fn eps(&self) -> f64 {
        self.assignment.max_radius_eps
    }

    pub fn max_pinv_norm(&self) -> f64 {
        self.clusters.iter().fold(0.0, |a, c| a.max(c.pinv_norm))
    }
}

/// Affine surrogate with `n(m+1)` interpolated columns; column `q·n + p`
/// carries entry `(p, q)` of `H = [g₀ G]`.
#[derive(Debug, Clone)]
pub struct ControlSurrogate {
    model: RkhsModel,
    dim: usize,
    control_dim: usize,
    bound: f64,
    domain: AxisBox,
}

/// Runs the two steps: local least squares per cluster, then kernel
/// interpolation (or regression for `λ > 0`) of the entries of `H*_ℓ`.
pub fn run_algorithm1(
    data: &ControlDataset,
    centers: &PointCloud,
    neighbors: usize,
    kernel: &WendlandKernel,
    lambda: f64,
) -> Result<(ControlSurrogate, ClusterRegression), Error> {
    let (n, m) = (data.dim(), data.control_dim());
    if neighbors < m + 1 {
        return Err(Error::InvalidParameter("cluster size N must be at least m + 1"));
    }
    if centers.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let assignment = build_clusters(data.states(), data.controls_flat(), m, centers, neighbors)?;
    let mut clusters = Vec::with_capacity(centers.len());
    let mut rejected = Vec::new();
    for (l, idx) in assignment.neighbor_indices.iter().enumerate() {
        let u = regressor_matrix(&assignment.controls[l], m);
        let s = u.matmul(&u.transpose());
        let lambda_min = symmetric_eigenvalues(&s)[0];
        let x_plus = Matrix::from_fn(n, neighbors, |p, j| data.successors().point(idx[j])[p]);
        let solved = if lambda_min < REJECTION_THRESHOLD {
            None
        } else {
            least_squares(&u.transpose(), &x_plus.transpose())
        };
        match solved {
            Some(ht) => {
                let pinv_norm = 1.0 / libm::sqrt(lambda_min);
                clusters.push(ClusterFit {
                    center_index: l,
                    h: ht.transpose(),
                    u,
                    x_plus,
                    lambda_min,
                    pinv_norm,
                    scaled_pinv_norm: libm::sqrt(neighbors as f64) * pinv_norm,
                });
            }
            None => rejected.push(RejectedCluster { center_index: l, lambda_min }),
        }
    }
    if rejected.len() as f64 > MAX_REJECTED_FRACTION * centers.len() as f64 {
        return Err(Error::TooManyRejectedClusters { rejected: rejected.len(), total: centers.len() });
    }
    let kept: Vec<usize> = clusters.iter().map(|c| c.center_index).collect();
    let kept_centers = centers.subset(&kept);
    let mut targets = Matrix::zeros(kept.len(), n * (m + 1));
    for (i, c) in clusters.iter().enumerate() {
        for q in 0..=m {
            for p in 0..n {
                targets[(i, q * n + p)] = c.h[(p, q)];
            }
        }
    }
    let model = RkhsModel::fit(kernel, &kept_centers, &targets, lambda)?;
    let surrogate = ControlSurrogate::from_model(model, n, m, data.bound())?;
    Ok((surrogate, ClusterRegression { clusters, rejected, assignment, neighbors }))
}

fn bounding_box(cloud: &PointCloud) -> Result<AxisBox, Error> {
    let n = cloud.dim();
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    for x in cloud.iter() {
        for i in 0..n {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
    }
    AxisBox::new(lo, hi)
}

impl ControlSurrogate {
    /// Wraps a fitted model; the domain is the bounding box of its centers.
    pub fn from_model(model: RkhsModel, dim: usize, control_dim: usize, bound: f64) -> Result<Self, Error> {
        if model.output_dim() != dim * (control_dim + 1) {
            return Err(Error::DimensionMismatch { expected: dim * (control_dim + 1), found: model.output_dim() });
        }
        let domain = bounding_box(model.centers())?;
        Ok(ControlSurrogate { model, dim, control_dim, bound, domain })
    }

    pub fn model(&self) -> &RkhsModel {
        &self.model
    }

    pub fn centers(&self) -> &PointCloud {
        self.model.centers()
    }

    /// `Ĥ(x)` as an `n × (m+1)` matrix.
    pub fn h_matrix(&self, x: &[f64]) -> Matrix {
        let h = self.model.evaluate(x);
        Matrix::from_fn(self.dim, self.control_dim + 1, |p, q| h[q * self.dim + p])
    }

    /// `ĝ₀(x) + Ĝ(x)u`. Panics on dimension mismatch.
    pub fn predict(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.control_dim, "control has wrong dimension");
        let h = self.model.evaluate(x);
        self.combine(&h, u)
    }

    pub fn try_predict(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>, Error> {
        if u.len() != self.control_dim {
            return Err(Error::DimensionMismatch { expected: self.control_dim, found: u.len() });
        }
        let h = self.model.try_evaluate(x)?;
        Ok(self.combine(&h, u))
    }

    /// Whether `u` lies in `𝕌`; prediction outside is allowed but unsupported by data.
    pub fn control_admissible(&self, u: &[f64]) -> bool {
        u.iter().all(|v| v.abs() <= self.bound)
    }

    fn combine(&self, h: &[f64], u: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut out = h[..n].to_vec();
        for (q, uq) in u.iter().enumerate() {
            for (p, o) in out.iter_mut().enumerate() {
                *o += h[(q + 1) * n + p] * uq;
            }
        }
        out
    }

    /// Max over `controls` of `‖f(x, u_j) − f̂(x, u_j)‖` at each validation point.
    pub fn error_map<S: ControlSystem + ?Sized>(
        &self,
        truth: &S,
        validation: &PointCloud,
        controls: &[Vec<f64>],
    ) -> Vec<f64> {
        validation
            .iter()
            .map(|x| {
                let h = self.model.evaluate(x);
                controls
                    .iter()
                    .map(|u| distance(&truth.step(x, u), &self.combine(&h, u)))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// Surrogate and true trajectories under a control schedule (one control per step).
    pub fn rollout<S: ControlSystem + ?Sized>(
        &self,
        x0: &[f64],
        schedule: &[Vec<f64>],
        truth: Option<&S>,
        domain: &AxisBox,
        policy: ExitPolicy,
    ) -> Trajectory {
        rollout_maps(
            x0,
            schedule.len(),
            domain,
            policy,
            |k, x: &[f64]| self.predict(x, &schedule[k]),
            truth.map(|s| move |k: usize, x: &[f64]| s.step(x, &schedule[k])),
        )
    }
}

impl ControlSystem for ControlSurrogate {
    fn dim(&self) -> usize {
        self.dim
    }
    fn control_dim(&self) -> usize {
        self.control_dim
    }
    fn domain(&self) -> &AxisBox {
        &self.domain
    }
    fn control_bound(&self) -> f64 {
        self.bound
    }
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        self.model.evaluate(x)[..self.dim].to_vec()
    }
    fn input_matrix(&self, x: &[f64]) -> Matrix {
        let h = self.model.evaluate(x);
        Matrix::from_fn(self.dim, self.control_dim, |p, q| h[(q + 1) * self.dim + p])
    }
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.predict(x, u)
    }
}

/// Repeats each control `hold` times.
pub fn piecewise_constant_schedule(values: &[Vec<f64>], hold: usize) -> Vec<Vec<f64>> {
    values.iter().flat_map(|u| core::iter::repeat(u.clone()).take(hold)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningStats {
    /// `(λ_min(U Uᵀ), √N ‖U^†‖)` per retained cluster.
    pub rows: Vec<(f64, f64)>,
    pub max_scaled: f64,
    pub median_scaled: f64,
    pub min_lambda: f64,
    pub rejected: usize,
}

pub fn conditioning_stats(regression: &ClusterRegression) -> ConditioningStats {
    let rows: Vec<(f64, f64)> = regression.clusters.iter().map(|c| (c.lambda_min, c.scaled_pinv_norm)).collect();
    let mut scaled: Vec<f64> = rows.iter().map(|r| r.1).collect();
    scaled.sort_by(|a, b| a.total_cmp(b));
    let median_scaled = match scaled.len() {
        0 => f64::NAN,
        k if k % 2 == 1 => scaled[k / 2],
        k => 0.5 * (scaled[k / 2 - 1] + scaled[k / 2]),
    };
    ConditioningStats {
        max_scaled: scaled.last().copied().unwrap_or(f64::NAN),
        median_scaled,
        min_lambda: rows.iter().map(|r| r.0).fold(f64::INFINITY, f64::min),
        rows,
        rejected: regression.rejected.len(),
    }
}

/// `max_{v ∈ {±1}^d} vᵀ M v` by Gray-code enumeration; `v` and `−v` give the
/// same value so the first sign is fixed.
pub fn ones_term_exhaustive(m: &Matrix) -> f64 {
    let d = m.rows();
    assert_eq!(d, m.cols());
    assert!(d <= 30, "enumeration is exponential in d");
    if d == 0 {
        return 0.0;
    }
    let mut v = vec![1.0; d];
    let mut mv: Vec<f64> = (0..d).map(|i| m.row(i).iter().sum()).collect();
    let mut q: f64 = mv.iter().sum();
    let mut best = q;
    for step in 1u64..(1u64 << (d - 1)) {
        // Flip the bit that changes in the Gray code, offset past the fixed sign.
        let j = step.trailing_zeros() as usize + 1;
        let vj = v[j];
        q -= 4.0 * vj * (mv[j] - m[(j, j)] * vj);
        for (i, mvi) in mv.iter_mut().enumerate() {
            *mvi -= 2.0 * vj * m[(i, j)];
        }
        v[j] = -vj;
        best = best.max(q);
    }
    best
}

/// `d / λ_min(K)`, an upper bound on the `𝟙`-term since `‖v‖² = d`.
pub fn ones_term_bound(factor: &Cholesky) -> f64 {
    factor.dim() as f64 / smallest_eigenvalue_eigen(factor)
}

fn smallest_eigenvalue_eigen(factor: &Cholesky) -> f64 {
    if factor.dim() <= 200 {
        let l = factor.lower();
        symmetric_eigenvalues(&l.matmul(&l.transpose()))[0]
    } else {
        smallest_eigenvalue_spd(factor, 10_000, 1e-10)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnesTermMethod {
    Exhaustive,
    EigenvalueBound,
}

/// User-declared inputs of the error diagnostic; none of them can be
/// recovered from data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeclaredConstants {
    /// `L_g` for the drift.
    pub lipschitz_drift: f64,
    /// `L_G` for the input matrix.
    pub lipschitz_input: f64,
    /// Bound on `max ‖H_pq‖_H`; when absent the native norm of the fitted
    /// columns is used as a stand-in.
    pub native_norm_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDiagnostic {
    centers: PointCloud,
    fill_distance: f64,
    smoothness: u32,
    pub native_norm: f64,
    pub native_norm_declared: bool,
    pub neighbors: usize,
    pub max_pinv_norm: f64,
    pub eps: f64,
    pub bound: f64,
    pub phi0: f64,
    pub ones_term: f64,
    pub ones_method: OnesTermMethod,
    pub declared: DeclaredConstants,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticBreakdown {
    pub dist: f64,
    /// `h^{k−1/2} dist(x, X) max ‖H_pq‖`.
    pub term1: f64,
    /// `√(2N) max‖U^†‖ (L_g + L_G R) Φ(0)^{1/2} (𝟙-term)^{1/2} ε`.
    pub term2: f64,
}

impl DiagnosticBreakdown {
    pub fn total(&self) -> f64 {
        self.term1 + self.term2
    }
}

impl ErrorDiagnostic {
    /// Precomputes the `x`-independent parts. `ones_crossover` is the largest
    /// center count for exhaustive `𝟙`-term enumeration.
    pub fn prepare(
        surrogate: &ControlSurrogate,
        regression: &ClusterRegression,
        declared: DeclaredConstants,
        fill_distance: f64,
        ones_crossover: usize,
    ) -> Result<Self, Error> {
        let model = surrogate.model();
        let kernel = model.kernel();
        let centers = model.centers();
        let factor = if model.lambda() == 0.0 && model.factor().is_some() {
            model.factor().expect("checked").clone()
        } else {
            Cholesky::factor(&kernel_matrix(kernel, centers)?)?
        };
        let (ones_term, ones_method) = if centers.len() <= ones_crossover {
            (ones_term_exhaustive(&factor.inverse()), OnesTermMethod::Exhaustive)
        } else {
            (ones_term_bound(&factor), OnesTermMethod::EigenvalueBound)
        };
        let (native_norm, native_norm_declared) = match declared.native_norm_bound {
            Some(b) => (b, true),
            None => ((0..model.output_dim()).map(|j| model.column_native_norm(j)).fold(0.0, f64::max), false),
        };
        Ok(ErrorDiagnostic {
            centers: centers.clone(),
            fill_distance,
            smoothness: kernel.smoothness(),
            native_norm,
            native_norm_declared,
            neighbors: regression.neighbors,
            max_pinv_norm: regression.max_pinv_norm(),
            eps: regression.eps(),
            bound: surrogate.control_bound(),
            phi0: kernel.eval_squared_distance(0.0),
            ones_term,
            ones_method,
            declared,
        })
    }

    /// The `x`-independent second term.
    pub fn term2(&self) -> f64 {
        let lip = self.declared.lipschitz_drift + self.declared.lipschitz_input * self.bound;
        libm::sqrt(2.0 * self.neighbors as f64)
            * self.max_pinv_norm
            * lip
            * libm::sqrt(self.phi0)
            * libm::sqrt(self.ones_term)
            * self.eps
    }

    pub fn evaluate(&self, x: &[f64]) -> DiagnosticBreakdown {
        let dist = dist_to_cloud(x, &self.centers);
        let h_pow = libm::pow(self.fill_distance, self.smoothness as f64 - 0.5);
        DiagnosticBreakdown { dist, term1: h_pow * dist * self.native_norm, term2: self.term2() }
    }
}
