#![allow(dead_code)]

use kedmd_core::geometry::PointCloud;
use kedmd_core::linalg::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
/// Independent of the Cholesky path used by the library.
pub fn gauss_jordan_inverse(a: &Matrix) -> Matrix {
    let n = a.rows();
    let mut aug = vec![vec![0.0; 2 * n]; n];
    for i in 0..n {
        for j in 0..n {
            aug[i][j] = a[(i, j)];
        }
        aug[i][n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs())).unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    let pivot = aug[col].clone();
                    for (a, p) in aug[r].iter_mut().zip(&pivot) {
                        *a -= f * p;
                    }
                }
            }
        }
    }
    Matrix::from_fn(n, n, |i, j| aug[i][n + j])
}

/// `count` distinct points uniform in `[lo, hi]^dim`, at least `min_sep` apart.
pub fn random_cloud(rng: &mut ChaCha8Rng, dim: usize, count: usize, lo: f64, hi: f64, min_sep: f64) -> PointCloud {
    let mut cloud = PointCloud::empty(dim);
    while cloud.len() < count {
        let p: Vec<f64> = (0..dim).map(|_| rng.gen_range(lo..hi)).collect();
        if cloud.iter().all(|q| kedmd_core::linalg::distance(&p, q) >= min_sep) {
            cloud.push(&p).unwrap();
        }
    }
    cloud
}
