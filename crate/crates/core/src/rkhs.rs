//! Kernel matrices, interpolation `P_X`, regularized regression `R_X^λ` and
//! native-space quantities for functions in `V_X = span{k(x_i, ·)}`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::Error;
use crate::geometry::PointCloud;
use crate::linalg::{dot, squared_distance, Cholesky, Matrix};
use crate::wendland::WendlandKernel;

fn check_dim(kernel: &WendlandKernel, cloud: &PointCloud) -> Result<(), Error> {
    if cloud.dim() != kernel.dim() {
        return Err(Error::DimensionMismatch { expected: kernel.dim(), found: cloud.dim() });
    }
    Ok(())
}

/// `K_X = (k(x_i, x_j))`. Rejects coinciding centers.
pub fn kernel_matrix(kernel: &WendlandKernel, centers: &PointCloud) -> Result<Matrix, Error> {
    check_dim(kernel, centers)?;
    if let Some((first, second)) = centers.first_duplicate() {
        return Err(Error::DuplicatePoints { first, second });
    }
    let d = centers.len();
    let mut k = Matrix::zeros(d, d);
    for i in 0..d {
        k[(i, i)] = kernel.eval_squared_distance(0.0);
        let xi = centers.point(i);
        for j in 0..i {
            let v = kernel.eval_squared_distance(squared_distance(xi, centers.point(j)));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// `(k(a_i, b_j))` for two clouds.
pub fn cross_kernel_matrix(kernel: &WendlandKernel, rows: &PointCloud, cols: &PointCloud) -> Matrix {
    Matrix::from_fn(rows.len(), cols.len(), |i, j| kernel.eval(rows.point(i), cols.point(j)))
}

/// Canonical feature vector `k_X(x) = (k(x_1, x), …, k(x_d, x))`.
pub fn feature_vector(kernel: &WendlandKernel, centers: &PointCloud, x: &[f64]) -> Vec<f64> {
    centers.iter().map(|c| kernel.eval(c, x)).collect()
}

/// Fitted kernel interpolant (`λ = 0`) or Tikhonov regressor (`λ > 0`) with
/// `M` output columns sharing one factorization of `K_X + λI`.
#[derive(Debug, Clone)]
pub struct RkhsModel {
    kernel: WendlandKernel,
    centers: PointCloud,
    lambda: f64,
    jitter: f64,
    factor: Option<Cholesky>,
    coefficients: Matrix,
}

impl RkhsModel {
    /// Solves `(K_X + λI) α = targets` for the `d × M` coefficient matrix.
    pub fn fit(kernel: &WendlandKernel, centers: &PointCloud, targets: &Matrix, lambda: f64) -> Result<Self, Error> {
        if targets.rows() != centers.len() {
            return Err(Error::DimensionMismatch { expected: centers.len(), found: targets.rows() });
        }
        let factor = factor_regularized(kernel, centers, lambda)?;
        let coefficients = factor.solve(targets);
        Ok(RkhsModel {
            kernel: kernel.clone(),
            centers: centers.clone(),
            lambda,
            jitter: factor.jitter(),
            factor: Some(factor),
            coefficients,
        })
    }

    /// Assembles a model from an existing factorization and coefficients.
    pub fn from_factor(
        kernel: &WendlandKernel,
        centers: &PointCloud,
        lambda: f64,
        factor: Cholesky,
        coefficients: Matrix,
    ) -> Result<Self, Error> {
        if factor.dim() != centers.len() || coefficients.rows() != centers.len() {
            return Err(Error::DimensionMismatch { expected: centers.len(), found: coefficients.rows() });
        }
        Ok(RkhsModel {
            kernel: kernel.clone(),
            centers: centers.clone(),
            lambda,
            jitter: factor.jitter(),
            factor: Some(factor),
            coefficients,
        })
    }

    /// Rebuilds a persisted model. The factorization is recomputed lazily by
    /// [`Self::ensure_factor`] when a solve is needed; evaluation never needs it.
    pub fn from_parts(
        kernel: WendlandKernel,
        centers: PointCloud,
        lambda: f64,
        jitter: f64,
        coefficients: Matrix,
    ) -> Result<Self, Error> {
        check_dim(&kernel, &centers)?;
        if coefficients.rows() != centers.len() {
            return Err(Error::DimensionMismatch { expected: centers.len(), found: coefficients.rows() });
        }
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter("regularization must be nonnegative"));
        }
        Ok(RkhsModel { kernel, centers, lambda, jitter, factor: None, coefficients })
    }

    pub fn ensure_factor(&mut self) -> Result<&Cholesky, Error> {
        if self.factor.is_none() {
            self.factor = Some(factor_regularized(&self.kernel, &self.centers, self.lambda)?);
        }
        Ok(self.factor.as_ref().expect("factor just computed"))
    }

    pub fn factor(&self) -> Option<&Cholesky> {
        self.factor.as_ref()
    }

    pub fn kernel(&self) -> &WendlandKernel {
        &self.kernel
    }

    pub fn centers(&self) -> &PointCloud {
        &self.centers
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Diagonal jitter added on top of `λ` during factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn coefficients(&self) -> &Matrix {
        &self.coefficients
    }

    pub fn output_dim(&self) -> usize {
        self.coefficients.cols()
    }

    /// `coefficientsᵀ k_X(x)`; zero when `x` is outside every center's support.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_dim()];
        self.evaluate_into(x, &mut out);
        out
    }

    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.kernel.dim(), "evaluation point has wrong dimension");
        assert_eq!(out.len(), self.output_dim());
        out.iter_mut().for_each(|v| *v = 0.0);
        for (j, c) in self.centers.iter().enumerate() {
            let kv = self.kernel.eval_squared_distance(squared_distance(c, x));
            if kv != 0.0 {
                for (o, a) in out.iter_mut().zip(self.coefficients.row(j)) {
                    *o += kv * a;
                }
            }
        }
    }

    pub fn try_evaluate(&self, x: &[f64]) -> Result<Vec<f64>, Error> {
        if x.len() != self.kernel.dim() {
            return Err(Error::DimensionMismatch { expected: self.kernel.dim(), found: x.len() });
        }
        Ok(self.evaluate(x))
    }

    /// Evaluates at every point; row `i` holds the outputs at point `i`.
    pub fn evaluate_many(&self, points: &PointCloud) -> Matrix {
        let mut out = Matrix::zeros(points.len(), self.output_dim());
        for (i, x) in points.iter().enumerate() {
            self.evaluate_into(x, out.row_mut(i));
        }
        out
    }

    /// Native-space norm of output column `j`, which lies in `V_X`.
    pub fn column_native_norm(&self, j: usize) -> f64 {
        let alpha = self.coefficients.col(j);
        NativeVector::new(alpha).norm_with(&self.kernel, &self.centers)
    }
}

fn factor_regularized(kernel: &WendlandKernel, centers: &PointCloud, lambda: f64) -> Result<Cholesky, Error> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter("regularization must be nonnegative and finite"));
    }
    if centers.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let mut k = kernel_matrix(kernel, centers)?;
    k.add_diagonal(lambda);
    Cholesky::factor(&k)
}

/// `f = αᵀ k_X`, an element of `V_X` in coefficient form.
#[derive(Debug, Clone, PartialEq)]
pub struct NativeVector {
    pub coefficients: Vec<f64>,
}

impl NativeVector {
    pub fn new(coefficients: Vec<f64>) -> Self {
        NativeVector { coefficients }
    }

    /// `‖f‖²_H = αᵀ K_X α`, clamped at zero against round-off.
    pub fn norm_squared(&self, gram: &Matrix) -> f64 {
        dot(&self.coefficients, &gram.matvec(&self.coefficients)).max(0.0)
    }

    pub fn norm(&self, gram: &Matrix) -> f64 {
        libm::sqrt(self.norm_squared(gram))
    }

    /// Norm without materializing `K_X`.
    pub fn norm_with(&self, kernel: &WendlandKernel, centers: &PointCloud) -> f64 {
        let a = &self.coefficients;
        let mut q = 0.0;
        for i in 0..centers.len() {
            if a[i] == 0.0 {
                continue;
            }
            q += a[i] * a[i] * kernel.eval_squared_distance(0.0);
            for j in 0..i {
                q += 2.0 * a[i] * a[j] * kernel.eval(centers.point(i), centers.point(j));
            }
        }
        libm::sqrt(q.max(0.0))
    }

    pub fn eval(&self, kernel: &WendlandKernel, centers: &PointCloud, x: &[f64]) -> f64 {
        centers.iter().zip(&self.coefficients).map(|(c, a)| a * kernel.eval(c, x)).sum()
    }

    /// Values at the centers, `f_X = K_X α`.
    pub fn values(&self, gram: &Matrix) -> Vec<f64> {
        gram.matvec(&self.coefficients)
    }
}

/// Both sides of `|f(x)|² ≤ k(x,x) · αᵀK_Xα`.
pub fn pointwise_bound_check(
    kernel: &WendlandKernel,
    centers: &PointCloud,
    gram: &Matrix,
    f: &NativeVector,
    x: &[f64],
) -> (f64, f64) {
    let fx = f.eval(kernel, centers, x);
    (fx * fx, kernel.eval(x, x) * f.norm_squared(gram))
}

/// `‖(f_X − (R_λ f)_X) − λ(K+λI)⁻¹f_X‖ / ‖f_X‖` for values `f_X` at the centers.
pub fn residual_identity_deviation(gram: &Matrix, regularized: &Cholesky, lambda: f64, values: &[f64]) -> f64 {
    let alpha = regularized.solve_vec(values);
    let fitted = gram.matvec(&alpha);
    let num: f64 = values
        .iter()
        .zip(&fitted)
        .zip(&alpha)
        .map(|((f, r), a)| {
            let e = (f - r) - lambda * a;
            e * e
        })
        .sum();
    libm::sqrt(num) / libm::sqrt(dot(values, values)).max(f64::MIN_POSITIVE)
}

/// Worst deviations observed while checking the regularizer identities.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub trials: usize,
    pub lambda: f64,
    /// `|⟨R f, g⟩ − ⟨f, R g⟩|` and `|⟨R f, g⟩ − f_Xᵀ(K+λI)⁻¹g_X|`, relative to `‖f‖‖g‖`.
    pub self_adjoint: f64,
    /// Most negative `⟨R f, f⟩ / ‖f‖²`, zero if none.
    pub positivity: f64,
    /// `‖P_X R f − R f‖` and `‖R P_X f − R f‖`, relative to `‖f‖`.
    pub commutation: f64,
    /// Largest `‖R f‖ / ‖P_X f‖`.
    pub contraction_ratio: f64,
    /// `|‖P_X f‖ − ‖f‖| / ‖f‖` on `V_X`.
    pub projection_norm: f64,
}

/// Checks on random `f, g ∈ V_X`:
/// self-adjointness and positivity of `R_λ`, `P_X R_λ = R_λ P_X = R_λ`, and
/// `‖R_λ f‖ ≤ ‖P_X f‖ = ‖f‖`. Fails with the name of the first identity whose
/// relative deviation exceeds `tolerance`.
pub fn verify_regularizer_identities<R: Rng + ?Sized>(
    kernel: &WendlandKernel,
    centers: &PointCloud,
    lambda: f64,
    trials: usize,
    tolerance: f64,
    rng: &mut R,
) -> Result<IdentityReport, Error> {
    let gram = kernel_matrix(kernel, centers)?;
    let plain = Cholesky::factor(&gram)?;
    let regularized = factor_regularized(kernel, centers, lambda)?;
    let d = centers.len();
    let mut report = IdentityReport {
        trials,
        lambda,
        self_adjoint: 0.0,
        positivity: 0.0,
        commutation: 0.0,
        contraction_ratio: 0.0,
        projection_norm: 0.0,
    };
    let h_norm = |a: &[f64]| NativeVector::new(a.to_vec()).norm(&gram);
    for _ in 0..trials {
        let beta: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gamma: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f_vals = gram.matvec(&beta);
        let g_vals = gram.matvec(&gamma);
        let f_norm = h_norm(&beta);
        let g_norm = h_norm(&gamma);
        let alpha_f = regularized.solve_vec(&f_vals);
        let alpha_g = regularized.solve_vec(&g_vals);

        // ⟨Rf, g⟩_H = α_fᵀ K γ, ⟨f, Rg⟩_H = βᵀ K α_g.
        let rf_g = dot(&alpha_f, &g_vals);
        let f_rg = dot(&f_vals, &alpha_g);
        let matrix_form = dot(&f_vals, &regularized.solve_vec(&g_vals));
        let scale = (f_norm * g_norm).max(f64::MIN_POSITIVE);
        let sa = ((rf_g - f_rg).abs()).max((rf_g - matrix_form).abs()) / scale;
        report.self_adjoint = report.self_adjoint.max(sa);
        let rf_f = dot(&alpha_f, &f_vals) / (f_norm * f_norm).max(f64::MIN_POSITIVE);
        report.positivity = report.positivity.min(rf_f);

        // P_X(R f): interpolate the values of R f at the centers.
        let rf_vals = gram.matvec(&alpha_f);
        let p_rf = plain.solve_vec(&rf_vals);
        // R(P_X f): P_X f has coefficients K⁻¹f_X and the same center values.
        let pf = plain.solve_vec(&f_vals);
        let r_pf = regularized.solve_vec(&gram.matvec(&pf));
        let diff1: Vec<f64> = p_rf.iter().zip(&alpha_f).map(|(a, b)| a - b).collect();
        let diff2: Vec<f64> = r_pf.iter().zip(&alpha_f).map(|(a, b)| a - b).collect();
        let comm = h_norm(&diff1).max(h_norm(&diff2)) / f_norm.max(f64::MIN_POSITIVE);
        report.commutation = report.commutation.max(comm);

        let rf_norm = h_norm(&alpha_f);
        let pf_norm = libm::sqrt(plain.inverse_quadratic_form(&f_vals));
        report.contraction_ratio = report.contraction_ratio.max(rf_norm / pf_norm.max(f64::MIN_POSITIVE));
        report.projection_norm =
            report.projection_norm.max((pf_norm - f_norm).abs() / f_norm.max(f64::MIN_POSITIVE));
    }
    let checks = [
        ("self-adjointness", report.self_adjoint),
        ("positivity", -report.positivity),
        ("projection commutation", report.commutation),
        ("norm contraction", report.contraction_ratio - 1.0),
        ("projection isometry on V_X", report.projection_norm),
    ];
    for (identity, deviation) in checks {
        if deviation > tolerance {
            return Err(Error::IdentityViolated { identity, deviation, tolerance });
        }
    }
    Ok(report)
}
