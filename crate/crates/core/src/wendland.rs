//! Compactly supported Wendland radial basis functions.
//!
//! The profile `φ_{n,k}` is stored in factored form `(1 − r)₊^e · q(r)` with
//! `q(0) = 1`, so `φ(0) = 1` and the kernel diagonal is identically one.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::linalg::squared_distance;

/// Radial kernel `k(x, y) = φ_{n,k}(‖x − y‖ / σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WendlandKernel {
    dim: usize,
    smoothness: u32,
    support_radius: f64,
    exponent: i32,
    // Ascending coefficients of q, normalized so that q(0) = 1.
    q: Vec<f64>,
}

impl WendlandKernel {
    /// Builds `Φ_{n,k}` scaled to support radius `σ`. Only `k ≤ 3` is tabulated.
    pub fn new(dim: usize, smoothness: u32, support_radius: f64) -> Result<Self, Error> {
        if dim == 0 {
            return Err(Error::InvalidParameter("kernel dimension must be at least 1"));
        }
        if smoothness > 3 {
            return Err(Error::InvalidParameter("Wendland smoothness must be in 0..=3"));
        }
        if !(support_radius > 0.0) || !support_radius.is_finite() {
            return Err(Error::InvalidParameter("support radius must be positive and finite"));
        }
        let l = (dim / 2) as f64 + smoothness as f64 + 1.0;
        let q = match smoothness {
            0 => vec![1.0],
            1 => vec![1.0, l + 1.0],
            2 => vec![1.0, l + 2.0, (l * l + 4.0 * l + 3.0) / 3.0],
            _ => vec![
                1.0,
                l + 3.0,
                (6.0 * l * l + 36.0 * l + 45.0) / 15.0,
                (l * l * l + 9.0 * l * l + 23.0 * l + 15.0) / 15.0,
            ],
        };
        Ok(WendlandKernel {
            dim,
            smoothness,
            support_radius,
            exponent: l as i32 + smoothness as i32,
            q,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn smoothness(&self) -> u32 {
        self.smoothness
    }

    #[inline]
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    /// Sobolev order `(n + 1)/2 + k` of the native space.
    pub fn sobolev_order(&self) -> f64 {
        (self.dim as f64 + 1.0) / 2.0 + self.smoothness as f64
    }

    /// Exponent of the `(1 − r)` factor.
    pub fn exponent(&self) -> i32 {
        self.exponent
    }

    /// Polynomial degree of the profile on `[0, 1]`.
    pub fn degree(&self) -> usize {
        self.exponent as usize + self.q.len() - 1
    }

    #[inline]
    fn q_at(&self, r: f64) -> f64 {
        self.q.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    #[inline]
    fn dq_at(&self, r: f64) -> f64 {
        self.q
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * r + i as f64 * c)
    }

    /// Unit-argument profile `φ(r)`; zero for `r ≥ 1`.
    #[inline]
    pub fn profile(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let r = r.max(0.0);
        powi(1.0 - r, self.exponent) * self.q_at(r)
    }

    /// `φ'(r)`; zero for `r ≥ 1`.
    pub fn profile_derivative(&self, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let r = r.max(0.0);
        let e = self.exponent as f64;
        powi(1.0 - r, self.exponent - 1) * (-e * self.q_at(r) + (1.0 - r) * self.dq_at(r))
    }

    /// Ascending monomial coefficients of the profile on `[0, 1]`.
    pub fn expanded_profile(&self) -> Vec<f64> {
        // (1 − r)^e by repeated multiplication, then times q.
        let mut base = vec![1.0];
        for _ in 0..self.exponent {
            let mut next = vec![0.0; base.len() + 1];
            for (i, c) in base.iter().enumerate() {
                next[i] += c;
                next[i + 1] -= c;
            }
            base = next;
        }
        let mut out = vec![0.0; base.len() + self.q.len() - 1];
        for (i, a) in base.iter().enumerate() {
            for (j, b) in self.q.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        out
    }

    /// `j`-th derivative of the profile from the expanded polynomial. Loses
    /// accuracy near `r = 1`; meant for smoothness diagnostics.
    pub fn profile_derivative_of_order(&self, order: usize, r: f64) -> f64 {
        if r >= 1.0 {
            return 0.0;
        }
        let mut coeffs = self.expanded_profile();
        for _ in 0..order {
            if coeffs.len() <= 1 {
                return 0.0;
            }
            coeffs = coeffs.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect();
        }
        coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
    }

    /// Kernel value from a precomputed Euclidean distance.
    #[inline]
    pub fn eval_distance(&self, dist: f64) -> f64 {
        self.profile(dist / self.support_radius)
    }

    /// Kernel value from a squared distance; skips the square root outside the support.
    #[inline]
    pub fn eval_squared_distance(&self, dist2: f64) -> f64 {
        if dist2 >= self.support_radius * self.support_radius {
            return 0.0;
        }
        self.profile(libm::sqrt(dist2) / self.support_radius)
    }

    /// `k(x, y)`. Panics on length mismatch; see [`Self::try_eval`].
    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(x.len(), y.len(), "kernel arguments differ in length");
        self.eval_squared_distance(squared_distance(x, y))
    }

    pub fn try_eval(&self, x: &[f64], y: &[f64]) -> Result<f64, Error> {
        self.check_dims(x, y)?;
        Ok(self.eval(x, y))
    }

    /// Gradient of `k(·, y)` at `x`. Requires `k ≥ 1`.
    pub fn gradient(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>, Error> {
        if self.smoothness == 0 {
            return Err(Error::InvalidParameter("gradient needs smoothness k >= 1"));
        }
        self.check_dims(x, y)?;
        let dist2 = squared_distance(x, y);
        let mut g = vec![0.0; x.len()];
        if dist2 == 0.0 || dist2 >= self.support_radius * self.support_radius {
            return Ok(g);
        }
        let dist = libm::sqrt(dist2);
        let scale = self.profile_derivative(dist / self.support_radius) / (self.support_radius * dist);
        for ((gi, xi), yi) in g.iter_mut().zip(x).zip(y) {
            *gi = scale * (xi - yi);
        }
        Ok(g)
    }

    fn check_dims(&self, x: &[f64], y: &[f64]) -> Result<(), Error> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: x.len() });
        }
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: y.len() });
        }
        Ok(())
    }
}

#[inline]
fn powi(base: f64, exp: i32) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    let mut e = exp.max(0) as u32;
    while e > 0 {
        if e & 1 == 1 {
            result *= b;
        }
        b *= b;
        e >>= 1;
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k21(sigma: f64) -> WendlandKernel {
        WendlandKernel::new(2, 1, sigma).unwrap()
    }

    #[test]
    fn n2_k1_profile_is_one_minus_r_to_fourth_times_four_r_plus_one() {
        let k = k21(1.0);
        assert_eq!(k.exponent(), 4);
        for i in 0..=20 {
            let r = i as f64 / 20.0;
            let direct = libm::pow(1.0 - r, 4.0) * (4.0 * r + 1.0);
            assert!((k.profile(r) - direct).abs() < 1e-15);
        }
        assert_eq!(k.profile(0.0), 1.0);
        assert!((k.profile(0.5) - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn kernel_eval_examples() {
        let k = k21(2.0);
        assert!((k.eval(&[0.0, 0.0], &[1.0, 0.0]) - 0.1875).abs() < 1e-15);
        assert_eq!(k.eval(&[0.3, -0.2], &[0.3, -0.2]), 1.0);
        assert_eq!(k.eval(&[0.0, 0.0], &[2.0, 0.0]), 0.0);
        assert_eq!(k.eval(&[0.0, 0.0], &[3.0, 1.0]), 0.0);
    }

    #[test]
    fn constructor_rejects_bad_parameters() {
        assert!(WendlandKernel::new(2, 4, 1.0).is_err());
        assert!(WendlandKernel::new(2, 1, 0.0).is_err());
        assert!(WendlandKernel::new(2, 1, -1.0).is_err());
        assert!(WendlandKernel::new(0, 1, 1.0).is_err());
        assert!(WendlandKernel::new(2, 1, f64::NAN).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let k = k21(1.0);
        assert_eq!(
            k.try_eval(&[0.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        );
        assert!(k.gradient(&[0.0, 0.0, 0.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_zero_at_coincidence_and_outside_support() {
        let k = k21(1.0);
        assert_eq!(k.gradient(&[0.2, 0.1], &[0.2, 0.1]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(k.gradient(&[0.0, 0.0], &[1.5, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_refused_for_k0() {
        let k = WendlandKernel::new(3, 0, 1.0).unwrap();
        assert!(k.gradient(&[0.0; 3], &[0.1; 3]).is_err());
    }

    #[test]
    fn all_profiles_normalized_and_non_increasing() {
        for n in 1..=5 {
            for s in 0..=3 {
                let k = WendlandKernel::new(n, s, 1.0).unwrap();
                assert_eq!(k.profile(0.0), 1.0);
                assert_eq!(k.profile(1.0), 0.0);
                assert_eq!(k.profile(1.7), 0.0);
                let mut prev = 1.0;
                for i in 1..=200 {
                    let v = k.profile(i as f64 / 200.0);
                    assert!(v <= prev + 1e-15, "n={n} k={s}");
                    prev = v;
                }
                // Degree floor(n/2) + 3k + 1.
                assert_eq!(k.degree(), n / 2 + 3 * s as usize + 1);
            }
        }
    }

    #[test]
    fn derivatives_vanish_where_smoothness_requires() {
        // C^{2k}: derivatives of order ≤ 2k vanish at r = 1 and odd ones below 2k vanish at 0.
        for n in 1..=4 {
            for s in 1..=3u32 {
                let k = WendlandKernel::new(n, s, 1.0).unwrap();
                for order in 0..=(2 * s as usize) {
                    let at_one = k.profile_derivative_of_order(order, 1.0 - 1e-12);
                    assert!(at_one.abs() < 1e-6, "n={n} k={s} order={order}: {at_one}");
                    if order % 2 == 1 {
                        let at_zero = k.profile_derivative_of_order(order, 0.0);
                        assert!(at_zero.abs() < 1e-9, "n={n} k={s} order={order}: {at_zero}");
                    }
                }
                let d1 = k.profile_derivative_of_order(1, 0.3);
                assert!((d1 - k.profile_derivative(0.3)).abs() < 1e-10);
            }
        }
    }
}
