mod common;

use kedmd_core::linalg::{Cholesky, Matrix};
use kedmd_core::rkhs::kernel_matrix;
use kedmd_core::wendland::WendlandKernel;
use proptest::prelude::*;

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn kernel_is_symmetric_bounded_and_compactly_supported(
        k in 0u32..=3,
        sigma in 0.1..4.0f64,
        (x, y) in (1usize..=4).prop_flat_map(|d| (point(d), point(d))),
    ) {
        let kern = WendlandKernel::new(x.len(), k, sigma).unwrap();
        let a = kern.eval(&x, &y);
        prop_assert_eq!(a, kern.eval(&y, &x));
        prop_assert!((0.0..=1.0).contains(&a));
        let r = kedmd_core::linalg::distance(&x, &y);
        if r >= sigma {
            prop_assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn gradient_matches_central_differences(
        k in 1u32..=3,
        sigma in 0.5..3.0f64,
        x in point(2),
        y in point(2),
    ) {
        let kern = WendlandKernel::new(2, k, sigma).unwrap();
        let g = kern.gradient(&x, &y).unwrap();
        let h = 1e-6;
        for i in 0..2 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (kern.eval(&xp, &y) - kern.eval(&xm, &y)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() < 1e-6, "fd {} vs analytic {}", fd, g[i]);
        }
    }
}

#[test]
fn kernel_matrices_are_positive_definite_on_random_sets() {
    let mut rng = common::rng(11);
    for trial in 0..50 {
        let dim = 1 + trial % 3;
        let smooth = (trial % 4) as u32;
        let count = 5 + trial % 40;
        let cloud = common::random_cloud(&mut rng, dim, count, -1.0, 1.0, 1e-2);
        let kern = WendlandKernel::new(dim, smooth, 0.8).unwrap();
        let k = kernel_matrix(&kern, &cloud).unwrap();
        assert!(k.is_symmetric());
        let c = Cholesky::factor_with_ladder(&k, &[0.0])
            .unwrap_or_else(|e| panic!("trial {trial}: {e}"));
        assert_eq!(c.jitter(), 0.0);
        // Independent check: every pivot of the factor is positive.
        let l: Matrix = c.lower();
        assert!((0..count).all(|i| l[(i, i)] > 0.0));
    }
}
