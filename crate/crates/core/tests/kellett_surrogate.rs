use std::f64::consts::SQRT_2;

use kedmd_core::geometry::{chebyshev_grid, staggered_grid, uniform_grid, AxisBox};
use kedmd_core::koopman::{
    check_equilibrium_preservation, fit_autonomous, proportionality_profile, validation_errors, ExitPolicy, Variant,
};
use kedmd_core::koopman::DynamicalSystem;
use kedmd_core::linalg::distance;
use kedmd_core::systems::Kellett;
use kedmd_core::wendland::WendlandKernel;

fn kernel() -> WendlandKernel {
    WendlandKernel::new(2, 1, 4.0 * SQRT_2).unwrap()
}

fn omega() -> AxisBox {
    AxisBox::cube(2, -2.0, 2.0).unwrap()
}

#[test]
fn data_sites_reproduced_and_origin_preserved() {
    let sys = Kellett::default();
    let data = uniform_grid(&omega(), 0.2).unwrap();
    for variant in [Variant::Standard, Variant::Alternative] {
        let s = fit_autonomous(&sys, &data, &kernel(), 0.0, variant).unwrap();
        let (a, b) = check_equilibrium_preservation(&sys, &s, &[0.0, 0.0]).unwrap();
        assert_eq!(a, 0.0);
        assert!(b <= 1e-10, "{variant:?}: {b}");
        if variant == Variant::Standard {
            let worst = data.iter().map(|x| distance(&s.predict(x), &sys.step(x))).fold(0.0, f64::max);
            assert!(worst <= 1e-8, "{worst}");
        }
    }
}

#[test]
fn error_grows_with_regularization() {
    let sys = Kellett::default();
    let data = chebyshev_grid(&omega(), 11).unwrap();
    let val = staggered_grid(&omega(), 0.1).unwrap();
    let sup = |lambda| {
        let s = fit_autonomous(&sys, &data, &kernel(), lambda, Variant::Standard).unwrap();
        validation_errors(&sys, &s, &val).into_iter().fold(0.0, f64::max)
    };
    let (e0, e1, e2) = (sup(0.0), sup(1e-4), sup(1e-2));
    assert!(e0 <= e1 && e1 <= e2, "{e0} {e1} {e2}");
}

#[test]
fn refinement_reduces_error_with_bounded_ratio() {
    let sys = Kellett::default();
    let val = staggered_grid(&omega(), 0.05).unwrap();
    let inner = AxisBox::cube(2, -1.0, 1.0).unwrap();
    let run = |delta| {
        let s = fit_autonomous(&sys, &uniform_grid(&omega(), delta).unwrap(), &kernel(), 0.0, Variant::Standard).unwrap();
        proportionality_profile(&sys, &s, &val, &[0.0, 0.0], std::slice::from_ref(&inner))
    };
    let coarse = run(0.2);
    let fine = run(0.1);
    assert!(fine.max_error < coarse.max_error);
    let order = (coarse.box_maxima[0] / fine.box_maxima[0]).log2();
    assert!(order >= 1.0, "order {order}");
    assert!(fine.max_ratio <= 4.0 * coarse.max_ratio && coarse.max_ratio <= 4.0 * fine.max_ratio);
    assert!(fine.rows.iter().all(|r| r.ratio.is_finite()));
}

#[test]
fn one_step_error_decays_along_stable_trajectory() {
    let sys = Kellett::default();
    let s = fit_autonomous(&sys, &uniform_grid(&omega(), 0.2).unwrap(), &kernel(), 0.0, Variant::Standard).unwrap();
    let t = s.rollout(&[1.9, 0.0], 20, Some(&sys), ExitPolicy::Halt);
    assert_eq!(t.states.len(), 21);
    let e = &t.one_step_errors;
    assert!(e[e.len() - 1] < e[0] * 1e-2, "{e:?}");
}
