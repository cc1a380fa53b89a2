//! Reference systems: the planar Kellett map, the discretized Duffing
//! oscillator, explicit-Euler discretization of control-affine fields and
//! expression-defined custom systems.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::control::ControlSystem;
use crate::error::Error;
use crate::expr::{Expr, Scope};
use crate::geometry::AxisBox;
use crate::koopman::DynamicalSystem;
use crate::linalg::Matrix;
use crate::stability::LyapunovSpec;

/// `F(x) = (1/8)[‖x‖² − 1, −1; 1, ‖x‖² − 1] x`.
pub fn kellett_step(x: &[f64]) -> Vec<f64> {
    let s = x[0] * x[0] + x[1] * x[1] - 1.0;
    vec![(s * x[0] - x[1]) / 8.0, (x[0] + s * x[1]) / 8.0]
}

/// `V(x) = ‖x‖²`, `α_V(r) = 7r²/32`.
pub fn kellett_lyapunov() -> LyapunovSpec {
    LyapunovSpec::power_norm(vec![0.0, 0.0], 2, 7.0 / 32.0, 2.0).expect("constants are valid")
}

/// Default Duffing step size.
pub const DUFFING_DT: f64 = 0.05;

/// `x⁺ = x + Δt (x₂, x₁ − 3x₁³u)`.
pub fn duffing_step(x: &[f64], u: f64, dt: f64) -> Vec<f64> {
    vec![x[0] + dt * x[1], x[1] + dt * x[0] - 3.0 * dt * x[0] * x[0] * x[0] * u]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kellett {
    domain: AxisBox,
}

impl Default for Kellett {
    fn default() -> Self {
        Kellett { domain: AxisBox::cube(2, -2.0, 2.0).expect("valid box") }
    }
}

impl DynamicalSystem for Kellett {
    fn dim(&self) -> usize {
        2
    }
    fn domain(&self) -> &AxisBox {
        &self.domain
    }
    fn step(&self, x: &[f64]) -> Vec<f64> {
        kellett_step(x)
    }
}

impl ControlSystem for Kellett {
    fn dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        0
    }
    fn domain(&self) -> &AxisBox {
        &self.domain
    }
    fn control_bound(&self) -> f64 {
        0.0
    }
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        kellett_step(x)
    }
    fn input_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::zeros(2, 0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Duffing {
    dt: f64,
    domain: AxisBox,
    bound: f64,
}

impl Duffing {
    pub fn new(dt: f64) -> Result<Self, Error> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParameter("step size must be positive"));
        }
        Ok(Duffing { dt, domain: AxisBox::cube(2, -2.0, 2.0)?, bound: 2.0 })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }
}

impl Default for Duffing {
    fn default() -> Self {
        Duffing::new(DUFFING_DT).expect("default step size is valid")
    }
}

impl ControlSystem for Duffing {
    fn dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn domain(&self) -> &AxisBox {
        &self.domain
    }
    fn control_bound(&self) -> f64 {
        self.bound
    }
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0] + self.dt * x[1], x[1] + self.dt * x[0]]
    }
    fn input_matrix(&self, x: &[f64]) -> Matrix {
        Matrix::from_row_major(2, 1, vec![0.0, -3.0 * self.dt * x[0] * x[0] * x[0]])
    }
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        duffing_step(x, u[0], self.dt)
    }
}

pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> Matrix + Send + Sync>;

/// Control-affine system from closures, either as a one-step map directly or
/// as the explicit-Euler step `x + Δt(g̃₀(x) + G̃(x)u)` of continuous fields.
#[derive(Clone)]
pub struct FieldSystem {
    dim: usize,
    control_dim: usize,
    drift: VectorField,
    input: MatrixField,
    dt: Option<f64>,
    domain: AxisBox,
    bound: f64,
}

impl fmt::Debug for FieldSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldSystem")
            .field("dim", &self.dim)
            .field("control_dim", &self.control_dim)
            .field("dt", &self.dt)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl FieldSystem {
    /// Discrete-time `x⁺ = g₀(x) + G(x)u`.
    pub fn discrete(
        dim: usize,
        control_dim: usize,
        drift: VectorField,
        input: MatrixField,
        domain: AxisBox,
        bound: f64,
    ) -> Result<Self, Error> {
        if domain.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: domain.dim() });
        }
        if !(bound >= 0.0) {
            return Err(Error::InvalidParameter("control bound must be nonnegative"));
        }
        Ok(FieldSystem { dim, control_dim, drift, input, dt: None, domain, bound })
    }

    pub fn dt(&self) -> Option<f64> {
        self.dt
    }
}

/// Explicit Euler step of `ẋ = g̃₀(x) + G̃(x)u`.
pub fn euler_discretize(
    dim: usize,
    control_dim: usize,
    drift: VectorField,
    input: MatrixField,
    dt: f64,
    domain: AxisBox,
    bound: f64,
) -> Result<FieldSystem, Error> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter("step size must be positive"));
    }
    let mut s = FieldSystem::discrete(dim, control_dim, drift, input, domain, bound)?;
    s.dt = Some(dt);
    Ok(s)
}

impl ControlSystem for FieldSystem {
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
        let g = (self.drift)(x);
        match self.dt {
            None => g,
            Some(dt) => x.iter().zip(&g).map(|(xi, gi)| xi + dt * gi).collect(),
        }
    }
    fn input_matrix(&self, x: &[f64]) -> Matrix {
        let mut g = (self.input)(x);
        if let Some(dt) = self.dt {
            g.scale(dt);
        }
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemId {
    Kellett,
    Duffing,
    Custom,
}

/// A system with its metadata: known equilibria and, when available, a
/// Lyapunov function.
#[derive(Clone)]
pub struct NamedSystem {
    pub id: SystemId,
    pub name: String,
    dynamics: Arc<dyn ControlSystem + Send + Sync>,
    pub equilibria: Vec<Vec<f64>>,
    pub lyapunov: Option<LyapunovSpec>,
}

impl fmt::Debug for NamedSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NamedSystem")
            .field("id", &self.id)
            .field("name", &self.name)
            .field("equilibria", &self.equilibria)
            .field("lyapunov", &self.lyapunov)
            .finish_non_exhaustive()
    }
}

impl NamedSystem {
    pub fn kellett() -> Self {
        NamedSystem {
            id: SystemId::Kellett,
            name: "kellett".to_string(),
            dynamics: Arc::new(Kellett::default()),
            equilibria: vec![vec![0.0, 0.0]],
            lyapunov: Some(kellett_lyapunov()),
        }
    }

    pub fn duffing(dt: f64) -> Result<Self, Error> {
        Ok(NamedSystem {
            id: SystemId::Duffing,
            name: "duffing".to_string(),
            dynamics: Arc::new(Duffing::new(dt)?),
            equilibria: vec![vec![0.0, 0.0]],
            lyapunov: None,
        })
    }

    /// Wraps arbitrary dynamics. Each equilibrium must satisfy `x⁺ = x` under
    /// zero control to `1e-12`.
    pub fn custom(
        name: &str,
        dynamics: Arc<dyn ControlSystem + Send + Sync>,
        equilibria: Vec<Vec<f64>>,
        lyapunov: Option<LyapunovSpec>,
    ) -> Result<Self, Error> {
        let sys = NamedSystem { id: SystemId::Custom, name: name.to_string(), dynamics, equilibria, lyapunov };
        for e in &sys.equilibria {
            if e.len() != sys.dynamics.dim() {
                return Err(Error::DimensionMismatch { expected: sys.dynamics.dim(), found: e.len() });
            }
            let y = DynamicalSystem::step(&sys, e);
            let dev = y.iter().zip(e).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if !(dev <= 1e-12 * (1.0 + crate::linalg::norm(e))) {
                return Err(Error::InvalidParameter("declared equilibrium is not a fixed point"));
            }
        }
        Ok(sys)
    }

    /// `"kellett"` or `"duffing"` (with the default step size).
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "kellett" => Some(Self::kellett()),
            "duffing" => Self::duffing(DUFFING_DT).ok(),
            _ => None,
        }
    }

    pub fn dynamics(&self) -> &(dyn ControlSystem + Send + Sync) {
        &*self.dynamics
    }

    pub fn is_autonomous(&self) -> bool {
        self.dynamics.control_dim() == 0
    }
}

impl ControlSystem for NamedSystem {
    fn dim(&self) -> usize {
        self.dynamics.dim()
    }
    fn control_dim(&self) -> usize {
        self.dynamics.control_dim()
    }
    fn domain(&self) -> &AxisBox {
        self.dynamics.domain()
    }
    fn control_bound(&self) -> f64 {
        self.dynamics.control_bound()
    }
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        self.dynamics.drift(x)
    }
    fn input_matrix(&self, x: &[f64]) -> Matrix {
        self.dynamics.input_matrix(x)
    }
    fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        self.dynamics.step(x, u)
    }
}

/// Zero-control dynamics.
impl DynamicalSystem for NamedSystem {
    fn dim(&self) -> usize {
        self.dynamics.dim()
    }
    fn domain(&self) -> &AxisBox {
        self.dynamics.domain()
    }
    fn step(&self, x: &[f64]) -> Vec<f64> {
        self.dynamics.drift(x)
    }
}

/// Declarative description of an expression-defined system.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomSystemSpec {
    pub name: String,
    pub dim: usize,
    /// `n` expressions for `g₀` in `x1..xn`.
    pub drift: Vec<String>,
    /// `n` rows of `m` expressions for `G`; empty for autonomous systems.
    pub input: Vec<Vec<String>>,
    /// When set, `drift`/`input` are continuous-time fields discretized by Euler.
    pub dt: Option<f64>,
    pub domain: AxisBox,
    pub control_bound: f64,
    pub equilibria: Vec<Vec<f64>>,
    /// `V` in `x1..xn`.
    pub lyapunov_v: Option<String>,
    /// `α_V` in `r`.
    pub lyapunov_alpha: Option<String>,
}

impl CustomSystemSpec {
    pub fn control_dim(&self) -> usize {
        self.input.first().map_or(0, Vec::len)
    }

    pub fn build(&self) -> Result<NamedSystem, Error> {
        let n = self.dim;
        if self.drift.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.drift.len() });
        }
        let m = self.control_dim();
        if !self.input.is_empty() && self.input.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.input.len() });
        }
        if let Some(row) = self.input.iter().find(|r| r.len() != m) {
            return Err(Error::DimensionMismatch { expected: m, found: row.len() });
        }
        let scope = Scope::state(n);
        let drift: Vec<Expr> = self.drift.iter().map(|s| Expr::parse(s, scope)).collect::<Result<_, _>>()?;
        let input: Vec<Expr> =
            self.input.iter().flatten().map(|s| Expr::parse(s, scope)).collect::<Result<_, _>>()?;
        let drift_fn: VectorField = Arc::new(move |x: &[f64]| drift.iter().map(|e| e.eval_state(x)).collect());
        let input_fn: MatrixField =
            Arc::new(move |x: &[f64]| Matrix::from_fn(n, m, |p, q| input[p * m + q].eval_state(x)));
        let dynamics = match self.dt {
            Some(dt) => euler_discretize(n, m, drift_fn, input_fn, dt, self.domain.clone(), self.control_bound)?,
            None => FieldSystem::discrete(n, m, drift_fn, input_fn, self.domain.clone(), self.control_bound)?,
        };
        let lyapunov = match (&self.lyapunov_v, &self.lyapunov_alpha) {
            (Some(v), Some(a)) => {
                let v = Expr::parse(v, scope)?;
                let a = Expr::parse(a, Scope::radius())?;
                let x_star = self.equilibria.first().cloned().unwrap_or_else(|| vec![0.0; n]);
                Some(LyapunovSpec::new(
                    x_star,
                    Arc::new(move |x: &[f64]| v.eval_state(x)),
                    Arc::new(move |r: f64| a.eval_radius(r)),
                ))
            }
            (None, None) => None,
            _ => return Err(Error::InvalidParameter("Lyapunov data needs both V and alpha_V")),
        };
        NamedSystem::custom(&self.name, Arc::new(dynamics), self.equilibria.clone(), lyapunov)
    }
}
