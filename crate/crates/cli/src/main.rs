use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kedmd::config::{ExperimentConfig, VariantName};
use kedmd::error::{Failure, Result};
use kedmd::experiments::{self as ex, Model};
use kedmd::io::{self, BundleKind, BundleMeta};

#[derive(Parser)]
#[command(name = "kedmd", version, about = "Kernel EDMD surrogates with Wendland kernels")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment config (TOML, or JSON by extension).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the regularization parameter.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true, value_enum)]
    variant: Option<VariantName>,
}

#[derive(Args)]
struct ModelArg {
    /// Model bundle directory; defaults to the one written by the fit command.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an autonomous surrogate and report validation errors.
    FitAutonomous,
    /// Pointwise one-step errors of a fitted autonomous surrogate.
    Heatmap(ModelArg),
    /// Lyapunov decrease margins of a fitted autonomous surrogate.
    Lyapunov(ModelArg),
    /// Sample micro data and fit a control-affine surrogate.
    FitControl,
    /// Worst-case errors over a control sweep.
    ControlHeatmap(ModelArg),
    /// Multi-step rollouts of any fitted surrogate against the true system.
    Rollout(ModelArg),
    /// Quick invariant checks; exits with code 4 if any fails.
    Verify,
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let path = g.config.as_deref().ok_or_else(|| Failure::config("--config is required"))?;
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.output = o.clone();
    }
    if let Some(l) = g.lambda {
        cfg.lambda = l;
    }
    if let Some(v) = g.variant {
        cfg.variant = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn model_dir(arg: &ModelArg, out: &Path, default: &str) -> PathBuf {
    arg.model.clone().unwrap_or_else(|| out.join(default))
}

fn load_any(dir: &Path) -> Result<Model> {
    let text = std::fs::read_to_string(dir.join("meta.json"))
        .map_err(|e| Failure::config(format!("{}: {e}", dir.join("meta.json").display())))?;
    let meta: BundleMeta = serde_json::from_str(&text)?;
    Ok(match meta.kind {
        BundleKind::Autonomous => Model::Autonomous(io::load_autonomous(dir)?.0),
        BundleKind::Control => Model::Control(io::load_control(dir)?.0),
    })
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.global)?;
    let out = cfg.output.clone();
    std::fs::create_dir_all(&out)?;
    std::fs::write(out.join("config.json"), cfg.canonical() + "\n")?;
    match cli.command {
        Command::FitAutonomous => {
            let r = ex::run_fit_autonomous(&cfg)?;
            ex::write_fit_autonomous(&out, &r)?;
            println!(
                "fitted {} centers; max validation error {:e}",
                r.metrics.centers, r.metrics.validation.max_error
            );
        }
        Command::Heatmap(m) => {
            let (s, _) = io::load_autonomous(&model_dir(&m, &out, "model"))?;
            let h = ex::run_heatmap(&cfg, &s)?;
            ex::write_heatmap(&out, &cfg, &h)?;
            println!("max error {:e} over {} points", h.summary.max_error, h.summary.points);
        }
        Command::Lyapunov(m) => {
            let (s, _) = io::load_autonomous(&model_dir(&m, &out, "model"))?;
            let r = ex::run_lyapunov(&cfg, &s)?;
            ex::write_lyapunov(&out, &cfg, &r)?;
            println!(
                "min margin {:e}; {} failures within radius {:e}",
                r.summary.min_margin, r.summary.failure_count, r.summary.ball_radius
            );
        }
        Command::FitControl => {
            let r = ex::run_fit_control(&cfg)?;
            ex::write_fit_control(&out, &r)?;
            println!(
                "fitted {} clusters ({} rejected); eps {:e}",
                r.regression.clusters.len(),
                r.regression.rejected.len(),
                r.metrics.eps
            );
        }
        Command::ControlHeatmap(m) => {
            let (s, _) = io::load_control(&model_dir(&m, &out, "control_model"))?;
            let r = ex::run_control_heatmap(&cfg, &s)?;
            ex::write_control_heatmap(&out, &cfg, &r)?;
            println!("max error {:e} over {} points", r.summary.max_error, r.summary.points);
        }
        Command::Rollout(m) => {
            let default = if cfg.control.is_some() { "control_model" } else { "model" };
            let model = load_any(&model_dir(&m, &out, default))?;
            let r = ex::run_rollout(&cfg, &model)?;
            ex::write_rollout(&out, &r)?;
            if let Some(last) = r.envelope.last() {
                println!("{} trajectories; final accumulated error max {:e}", r.trajectories.len(), last.max);
            }
        }
        Command::Verify => {
            let checks = ex::run_verify(&cfg)?;
            io::write_json(&out.join("verify.json"), &checks)?;
            for c in &checks {
                let tag = if c.passed { "ok" } else { "FAIL" };
                println!("{tag:4} {}: {:e} (tolerance {:e})", c.name, c.value, c.tolerance);
            }
            if let Some(c) = checks.iter().find(|c| !c.passed) {
                return Err(Failure::Property(c.name.clone()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
