//! Experiment and system configuration (JSON or TOML).

use std::path::{Path, PathBuf};

use kedmd_core::geometry::AxisBox;
use kedmd_core::koopman::{ExitPolicy, Variant};
use kedmd_core::systems::{CustomSystemSpec, NamedSystem};
use serde::{Deserialize, Serialize};

use crate::error::{Failure, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemRef,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub kernel: KernelSpec,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub variant: VariantName,
    #[serde(default)]
    pub validation: ValidationSpec,
    #[serde(default)]
    pub control: Option<ControlSpec>,
    #[serde(default)]
    pub rollout: Option<RolloutSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

/// A built-in system name, a path to a system file, or an inline system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Named(String),
    File { path: PathBuf },
    Inline(Box<SystemFile>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum GridSpec {
    /// `δℤⁿ ∩ Ω`.
    Uniform { delta: f64 },
    /// Chebyshev–Gauss–Lobatto tensor grid.
    Chebyshev { points_per_axis: usize },
    /// CSV with header `x1..xn`.
    File { path: PathBuf },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Uniform { delta: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default = "one")]
    pub smoothness: u32,
    /// Defaults to the diameter of the system domain.
    #[serde(default)]
    pub support_radius: Option<f64>,
}

fn one() -> u32 {
    1
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec { smoothness: 1, support_radius: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantName {
    #[default]
    Standard,
    Alternative,
}

impl From<VariantName> for Variant {
    fn from(v: VariantName) -> Self {
        match v {
            VariantName::Standard => Variant::Standard,
            VariantName::Alternative => Variant::Alternative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationSpec {
    /// Spacing of the staggered grid `(δℤ + δ/2)ⁿ`.
    #[serde(default = "default_val_delta")]
    pub delta: f64,
    /// Cube `[lo, hi]ⁿ` holding the validation grid; defaults to the system domain.
    #[serde(default)]
    pub region: Option<[f64; 2]>,
    /// Half-widths of centered sub-boxes for nested maxima.
    #[serde(default = "default_nested")]
    pub nested: Vec<f64>,
}

fn default_val_delta() -> f64 {
    0.025
}

fn default_nested() -> Vec<f64> {
    vec![1.0, 0.5]
}

impl Default for ValidationSpec {
    fn default() -> Self {
        ValidationSpec { delta: default_val_delta(), region: None, nested: default_nested() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsRule {
    /// `ε = 1/d` for `d` centers.
    #[default]
    InverseCenters,
    /// All micro samples on the centers.
    Exact,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    /// Micro samples drawn per center; defaults to `neighbors`.
    #[serde(default)]
    pub samples_per_center: Option<usize>,
    #[serde(default)]
    pub eps: EpsRule,
    /// Controls for the one-step error map; defaults to `−R + 0.2(j−1)`, `j = 1..=20`.
    #[serde(default)]
    pub heatmap_controls: Option<Vec<f64>>,
    #[serde(default)]
    pub lipschitz_drift: f64,
    #[serde(default)]
    pub lipschitz_input: f64,
    #[serde(default)]
    pub native_norm_bound: Option<f64>,
    #[serde(default = "default_crossover")]
    pub ones_crossover: usize,
}

fn default_neighbors() -> usize {
    25
}

fn default_crossover() -> usize {
    kedmd_core::control::DEFAULT_ONES_CROSSOVER
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            neighbors: default_neighbors(),
            samples_per_center: None,
            eps: EpsRule::default(),
            heatmap_controls: None,
            lipschitz_drift: 0.0,
            lipschitz_input: 0.0,
            native_norm_bound: None,
            ones_crossover: default_crossover(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitPolicyName {
    #[default]
    Halt,
    Continue,
}

impl From<ExitPolicyName> for ExitPolicy {
    fn from(p: ExitPolicyName) -> Self {
        match p {
            ExitPolicyName::Halt => ExitPolicy::Halt,
            ExitPolicyName::Continue => ExitPolicy::Continue,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutSpec {
    pub initial: Vec<Vec<f64>>,
    pub steps: usize,
    /// Explicit control values, each held for `hold` steps.
    #[serde(default)]
    pub controls: Option<Vec<Vec<f64>>>,
    /// Number of random control values (uniform in `𝕌`) when `controls` is absent.
    #[serde(default)]
    pub random_controls: Option<usize>,
    #[serde(default = "default_hold")]
    pub hold: usize,
    #[serde(default)]
    pub exit_policy: ExitPolicyName,
}

fn default_hold() -> usize {
    5
}

/// Declarative custom system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    pub dim: usize,
    pub drift: Vec<String>,
    #[serde(default)]
    pub input: Vec<Vec<String>>,
    /// When present the fields are continuous-time and discretized by explicit Euler.
    #[serde(default)]
    pub dt: Option<f64>,
    pub domain: BoxSpec,
    #[serde(default)]
    pub control_bound: f64,
    #[serde(default)]
    pub equilibria: Vec<Vec<f64>>,
    #[serde(default)]
    pub lyapunov: Option<LyapunovFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovFile {
    /// `V` in `x1..xn`.
    pub v: String,
    /// `α_V` in `r`.
    pub alpha: String,
}

impl SystemFile {
    pub fn build(&self) -> Result<NamedSystem> {
        let spec = CustomSystemSpec {
            name: self.name.clone(),
            dim: self.dim,
            drift: self.drift.clone(),
            input: self.input.clone(),
            dt: self.dt,
            domain: AxisBox::new(self.domain.lower.clone(), self.domain.upper.clone())?,
            control_bound: self.control_bound,
            equilibria: self.equilibria.clone(),
            lyapunov_v: self.lyapunov.as_ref().map(|l| l.v.clone()),
            lyapunov_alpha: self.lyapunov.as_ref().map(|l| l.alpha.clone()),
        };
        Ok(spec.build()?)
    }
}

/// Parses by extension: `.json` as JSON, anything else as TOML.
fn parse_structured<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T> {
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = parse_structured(&read_text(path)?, path)?;
        // System files are resolved relative to the config file.
        if let SystemRef::File { path: p } = &mut cfg.system {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        if let GridSpec::File { path: p } = &mut cfg.grid {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Failure::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pretty JSON with every default filled in.
    pub fn canonical(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Precondition checks that need no sampling.
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Failure::config("lambda must be nonnegative and finite"));
        }
        match &self.grid {
            GridSpec::Uniform { delta } if !(*delta > 0.0) => return Err(Failure::config("grid delta must be positive")),
            GridSpec::Chebyshev { points_per_axis } if *points_per_axis < 2 => {
                return Err(Failure::config("chebyshev grid needs at least 2 points per axis"))
            }
            _ => {}
        }
        if !(self.validation.delta > 0.0) {
            return Err(Failure::config("validation delta must be positive"));
        }
        if let Some(r) = self.kernel.support_radius {
            if !(r > 0.0) {
                return Err(Failure::config("support radius must be positive"));
            }
        }
        if let Some(c) = &self.control {
            if c.samples_per_center.is_some_and(|s| s == 0) {
                return Err(Failure::config("samples_per_center must be positive"));
            }
            if let EpsRule::Fixed(e) = c.eps {
                if !(e >= 0.0) {
                    return Err(Failure::config("eps must be nonnegative"));
                }
            }
        }
        Ok(())
    }

    pub fn system(&self) -> Result<NamedSystem> {
        match &self.system {
            SystemRef::Named(name) => {
                NamedSystem::by_name(name).ok_or_else(|| Failure::config(format!("unknown system `{name}`")))
            }
            SystemRef::File { path } => parse_structured::<SystemFile>(&read_text(path)?, path)?.build(),
            SystemRef::Inline(file) => file.build(),
        }
    }
}
