//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line with
//! its measured value and runtime; the test fails at the end if any did.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use kedmd::config::ExperimentConfig;
use kedmd::experiments::{self, AutonomousRun};
use kedmd::io;
use kedmd_core::control::{
    cluster_conditioning, ones_term_bound, ones_term_exhaustive, run_algorithm1, sample_micro_data, DeclaredConstants,
    ErrorDiagnostic, MicroSampling, OnesTermMethod, REJECTION_THRESHOLD,
};
use kedmd_core::geometry::{fill_distance, default_probe_resolution, uniform_grid, AxisBox, PointCloud};
use kedmd_core::koopman::{check_equilibrium_preservation, fit_autonomous, Variant};
use kedmd_core::linalg::Cholesky;
use kedmd_core::rkhs::{kernel_matrix, residual_identity_deviation, verify_regularizer_identities};
use kedmd_core::systems::{Duffing, Kellett};
use kedmd_core::wendland::WendlandKernel;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

struct Suite {
    failures: Vec<usize>,
}

impl Suite {
    fn run(&mut self, id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let passed = outcome.passed && in_time;
        let tag = if passed { "PASS" } else { "FAIL" };
        let late = if in_time { "" } else { " [over time limit]" };
        println!(
            "{tag} {id:>2} {name}: {} ({:.2}s, limit {}s){late}",
            outcome.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !passed {
            self.failures.push(id);
        }
    }
}

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(text).expect("valid config")
}

fn kellett_config(grid: &str, lambda: f64) -> ExperimentConfig {
    config(&format!(
        "system = \"kellett\"\nlambda = {lambda:?}\n{grid}\n[validation]\ndelta = 0.025\nnested = [1.0, 0.5]\n"
    ))
}

fn uniform(delta: f64) -> String {
    format!("[grid]\nkind = \"uniform\"\ndelta = {delta:?}")
}

fn chebyshev(points: usize) -> String {
    format!("[grid]\nkind = \"chebyshev\"\npoints_per_axis = {points}")
}

fn nested(run: &AutonomousRun, half_width: f64) -> f64 {
    let v = &run.metrics.validation.nested;
    v.iter().find(|n| n.half_width == half_width).expect("configured box").max_error
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

fn kellett_grid(delta: f64) -> PointCloud {
    uniform_grid(&AxisBox::cube(2, -2.0, 2.0).unwrap(), delta).unwrap()
}

fn kernel_for(domain: &AxisBox) -> WendlandKernel {
    WendlandKernel::new(2, 1, domain.diameter()).unwrap()
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && !p.file_name().unwrap().to_string_lossy().contains("timing"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn main() {
    let mut suite = Suite { failures: Vec::new() };
    let secs = Duration::from_secs;
    let domain = AxisBox::cube(2, -2.0, 2.0).unwrap();

    suite.run(1, "interpolation exactness", secs(5), || {
        let run = experiments::run_fit_autonomous(&kellett_config(&uniform(0.2), 0.0)).unwrap();
        let r = run.metrics.site_residual;
        Outcome { passed: r <= 1e-8, detail: format!("max site residual {r:.3e} <= 1e-8, d = {}", run.metrics.centers) }
    });

    suite.run(2, "equilibrium preservation", secs(5), || {
        let data = kellett_grid(0.2);
        let k = kernel_for(&domain);
        let mut worst = 0.0f64;
        for v in [Variant::Standard, Variant::Alternative] {
            let s = fit_autonomous(&Kellett::default(), &data, &k, 0.0, v).unwrap();
            worst = worst.max(check_equilibrium_preservation(&Kellett::default(), &s, &[0.0, 0.0]).unwrap().1);
        }
        Outcome { passed: worst <= 1e-10, detail: format!("max ||F_hat(0)|| over both variants {worst:.3e} <= 1e-10") }
    });

    suite.run(3, "regularizer identities", secs(10), || {
        let data = kellett_grid(0.2);
        let k = kernel_for(&domain);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut detail = Vec::new();
        let mut passed = true;
        for lambda in [1e-4, 1e-2, 1.0] {
            match verify_regularizer_identities(&k, &data, lambda, 20, 1e-9, &mut rng) {
                Ok(r) => detail.push(format!(
                    "lambda {lambda:e}: sa {:.1e} comm {:.1e} contraction {:.3}",
                    r.self_adjoint, r.commutation, r.contraction_ratio
                )),
                Err(e) => {
                    passed = false;
                    detail.push(format!("lambda {lambda:e}: {e}"));
                }
            }
        }
        Outcome { passed, detail: detail.join("; ") }
    });

    suite.run(4, "residual identity", secs(5), || {
        let data = kellett_grid(0.2);
        let k = kernel_for(&domain);
        let gram = kernel_matrix(&k, &data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut worst = 0.0f64;
        for lambda in [1e-4, 1e-2, 1.0] {
            let mut reg = gram.clone();
            reg.add_diagonal(lambda);
            let factor = Cholesky::factor(&reg).unwrap();
            for _ in 0..5 {
                let beta: Vec<f64> = (0..data.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                worst = worst.max(residual_identity_deviation(&gram, &factor, lambda, &gram.matvec(&beta)));
            }
        }
        Outcome { passed: worst <= 1e-10, detail: format!("max relative deviation {worst:.3e} <= 1e-10") }
    });

    let mut uniform_runs = Vec::new();
    suite.run(5, "convergence trend", secs(180), || {
        let mut cheb = Vec::new();
        for delta in [0.2, 0.1, 0.05] {
            uniform_runs.push(experiments::run_fit_autonomous(&kellett_config(&uniform(delta), 0.0)).unwrap());
        }
        for points in [21, 41, 81] {
            cheb.push(experiments::run_fit_autonomous(&kellett_config(&chebyshev(points), 0.0)).unwrap().metrics);
        }
        let u: Vec<f64> = uniform_runs.iter().map(|r| r.metrics.validation.max_error).collect();
        let c: Vec<f64> = cheb.iter().map(|m| m.validation.max_error).collect();
        let inner: Vec<f64> = uniform_runs.iter().map(|r| nested(r, 1.0)).collect();
        let orders: Vec<f64> = inner.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let passed = strictly_decreasing(&u) && strictly_decreasing(&c) && orders.iter().all(|&p| p >= 1.0);
        Outcome {
            passed,
            detail: format!(
                "uniform {:.4e} > {:.4e} > {:.4e}; chebyshev {:.4e} > {:.4e} > {:.4e}; orders on [-1,1]^2 {:.2}, {:.2} >= 1",
                u[0], u[1], u[2], c[0], c[1], c[2], orders[0], orders[1]
            ),
        }
    });

    suite.run(6, "proportionality", secs(1), || {
        let run = &uniform_runs[1];
        let (outer, inner) = (run.metrics.validation.max_error, nested(run, 0.5));
        let ratio = outer / inner;
        Outcome {
            passed: run.metrics.centers == 1681 && ratio >= 10.0,
            detail: format!("d = 1681: {outer:.4e} on [-2,2]^2 vs {inner:.4e} on [-0.5,0.5]^2, ratio {ratio:.1} >= 10"),
        }
    });

    suite.run(7, "regularization penalty", secs(60), || {
        let mut detail = Vec::new();
        let mut passed = true;
        for points in [21, 41] {
            let plain = experiments::run_fit_autonomous(&kellett_config(&chebyshev(points), 0.0)).unwrap();
            let damped = experiments::run_fit_autonomous(&kellett_config(&chebyshev(points), 0.01)).unwrap();
            let ratio = nested(&damped, 0.5) / nested(&plain, 0.5);
            passed &= ratio >= 10.0;
            detail.push(format!("d = {}: ratio {ratio:.1}", plain.metrics.centers));
        }
        Outcome { passed, detail: format!("[-0.5,0.5]^2 error ratio lambda=0.01 / lambda=0: {} (>= 10)", detail.join(", ")) }
    });

    suite.run(8, "Lyapunov decrease transfer", secs(120), || {
        let cfg = kellett_config(&uniform(0.05), 0.0);
        let run = experiments::run_fit_autonomous(&cfg).unwrap();
        let r = experiments::run_lyapunov(&cfg, &run.surrogate).unwrap();
        let s = &r.summary;
        Outcome {
            passed: s.min_margin >= 0.0,
            detail: format!("min margin {:.4e} >= 0 over {} points ({} failures)", s.min_margin, s.points, s.failure_count),
        }
    });

    suite.run(9, "cluster regression exact recovery", secs(30), || {
        let cfg = config(
            "system = \"duffing\"\nseed = 9\n[grid]\nkind = \"uniform\"\ndelta = 0.2\n[control]\nneighbors = 25\neps = \"exact\"\n",
        );
        let run = experiments::run_fit_control(&cfg).unwrap();
        let r = run.metrics.recovery_residual;
        Outcome {
            passed: r <= 1e-8 && run.metrics.eps == 0.0,
            detail: format!("max ||H* - [g0 G]||_F {r:.3e} <= 1e-8 over {} centers", run.metrics.centers),
        }
    });

    suite.run(10, "control error decay", secs(180), || {
        let mut errs = Vec::new();
        for points in [11, 21, 41] {
            let cfg = config(&format!(
                "system = \"duffing\"\nseed = 10\n{}\n[validation]\ndelta = 0.025\nregion = [-1.0, 1.0]\n[control]\nneighbors = 25\neps = \"inverse-centers\"\n",
                chebyshev(points)
            ));
            let run = experiments::run_fit_control(&cfg).unwrap();
            errs.push(experiments::run_control_heatmap(&cfg, &run.surrogate).unwrap().summary.max_error);
        }
        Outcome {
            passed: errs.windows(2).all(|w| w[1] <= w[0]),
            detail: format!("d = 121/441/1681: {:.4e} >= {:.4e} >= {:.4e}", errs[0], errs[1], errs[2]),
        }
    });

    suite.run(11, "conditioning statistic", secs(10), || {
        let (_, scaled) = cluster_conditioning(&[-1.0, 0.0, 1.0], 1);
        let exact = (scaled - 1.5f64.sqrt()).abs();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut worst, mut rejected) = (0.0f64, 0);
        for _ in 0..100 {
            let u: Vec<f64> = (0..25).map(|_| rng.gen_range(-2.0..=2.0)).collect();
            let (lmin, s) = cluster_conditioning(&u, 1);
            rejected += usize::from(lmin < REJECTION_THRESHOLD);
            worst = worst.max(s);
        }
        Outcome {
            passed: exact <= 1e-12 && worst.is_finite() && rejected == 0,
            detail: format!("|{scaled} - sqrt(1.5)| = {exact:.1e}; 100 clusters: max {worst:.4}, {rejected} rejected"),
        }
    });

    suite.run(12, "diagnostic structure", secs(30), || {
        let sys = Duffing::default();
        let b = AxisBox::cube(2, -2.0, 2.0).unwrap();
        // 4 x 3 tensor grid, d = 12.
        let pts: Vec<[f64; 2]> =
            (0..4).flat_map(|i| (0..3).map(move |j| [-1.5 + i as f64, -1.5 + 1.5 * j as f64])).collect();
        let centers = PointCloud::from_points(&pts).unwrap();
        let k = kernel_for(&b);
        let declared = DeclaredConstants { lipschitz_drift: 1.2, lipschitz_input: 0.6, native_norm_bound: None };
        let fill = fill_distance(&centers, &b, default_probe_resolution(&b)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);

        let exact = sample_micro_data(&sys, &centers, 25, MicroSampling::ExactCenter, &mut rng).unwrap();
        let (s0, reg0) = run_algorithm1(&exact, &centers, 25, &k, 0.0).unwrap();
        let d0 = ErrorDiagnostic::prepare(&s0, &reg0, declared, fill, 16).unwrap();
        let term1_on_centers = centers.iter().map(|x| d0.evaluate(x).term1).fold(0.0, f64::max);
        let term1_off = d0.evaluate(&[0.1, 0.2]).term1;

        let ball = sample_micro_data(&sys, &centers, 25, MicroSampling::Ball { radius: 0.05 }, &mut rng).unwrap();
        let (s1, reg1) = run_algorithm1(&ball, &centers, 25, &k, 0.0).unwrap();
        let d1 = ErrorDiagnostic::prepare(&s1, &reg1, declared, fill, 16).unwrap();

        let factor = Cholesky::factor(&kernel_matrix(&k, &centers).unwrap()).unwrap();
        let enumerated = ones_term_exhaustive(&factor.inverse());
        let bound = ones_term_bound(&factor);
        let passed = term1_on_centers == 0.0
            && term1_off > 0.0
            && d0.term2() == 0.0
            && d1.term2() > 0.0
            && d0.ones_method == OnesTermMethod::Exhaustive
            && (d0.ones_term - enumerated).abs() <= 1e-9 * enumerated
            && enumerated <= bound;
        Outcome {
            passed,
            detail: format!(
                "term1 on centers {term1_on_centers:e}; term2 eps=0 {:e} (eps>0 {:.3e}); ones-term {enumerated:.6e} reported {:.6e} <= bound {bound:.6e}",
                d0.term2(),
                d1.term2(),
                d0.ones_term
            ),
        }
    });

    suite.run(13, "determinism and persistence", secs(30), || {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = config(
            "system = \"duffing\"\nseed = 13\n[grid]\nkind = \"chebyshev\"\npoints_per_axis = 11\n[control]\nneighbors = 25\n",
        );
        for name in ["a", "b"] {
            let run = experiments::run_fit_control(&cfg).unwrap();
            experiments::write_fit_control(&tmp.path().join(name), &run).unwrap();
        }
        let identical = files_in(&tmp.path().join("a")) == files_in(&tmp.path().join("b"))
            && files_in(&tmp.path().join("a/control_model")) == files_in(&tmp.path().join("b/control_model"));

        let auto = experiments::run_fit_autonomous(&kellett_config(&uniform(0.2), 0.0)).unwrap();
        io::save_autonomous(&tmp.path().join("auto"), "kellett", &auto.surrogate).unwrap();
        let (back, _) = io::load_autonomous(&tmp.path().join("auto")).unwrap();
        let (ctrl, _) = io::load_control(&tmp.path().join("a/control_model")).unwrap();
        let fresh = experiments::run_fit_control(&cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let x = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
            let u = [rng.gen_range(-2.0..=2.0)];
            let pairs = [
                (auto.surrogate.predict(&x), back.predict(&x)),
                (fresh.surrogate.predict(&x, &u), ctrl.predict(&x, &u)),
            ];
            for (a, b) in pairs {
                worst = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(worst, f64::max);
            }
        }
        Outcome {
            passed: identical && worst <= 1e-14,
            detail: format!("outputs byte-identical: {identical}; max round-trip difference {worst:.1e} <= 1e-14"),
        }
    });

    if !suite.failures.is_empty() {
        eprintln!("failed criteria: {:?}", suite.failures);
        std::process::exit(1);
    }
    println!("all 13 criteria passed");
}
