//! Stationary kernels, Gram matrices and their spectra.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `R(x) = exp(-γ‖x‖²)`
    Gaussian,
    /// `R(x) = exp(-γ‖x‖)`
    Exponential,
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelFamily::Gaussian => f.write_str("gaussian"),
            KernelFamily::Exponential => f.write_str("exponential"),
        }
    }
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "rbf" => Ok(KernelFamily::Gaussian),
            "exponential" | "laplace" => Ok(KernelFamily::Exponential),
            other => Err(Error::InvalidArgument(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Local behaviour of a kernel at the origin: `R(0) - R(x) ~ d_θ ‖x‖^θ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smoothness {
    pub theta: f64,
    pub d_theta: f64,
}

/// A stationary kernel `κ(x, y) = R(x - y)` with `R(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    gamma: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel bandwidth gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self { family, gamma })
    }

    pub fn gaussian(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian, gamma)
    }

    pub fn exponential(gamma: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential, gamma)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `R(x)` at a displacement `x`.
    pub fn eval(&self, displacement: &[f64]) -> f64 {
        self.eval_sq_norm(linalg::dot(displacement, displacement))
    }

    /// `R(x - y)` without allocating the displacement.
    #[inline]
    pub fn eval_between(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval_sq_norm(linalg::sq_dist(x, y))
    }

    /// `R` as a function of the squared norm of the displacement.
    #[inline]
    pub fn eval_sq_norm(&self, sq: f64) -> f64 {
        match self.family {
            KernelFamily::Gaussian => (-self.gamma * sq).exp(),
            KernelFamily::Exponential => (-self.gamma * sq.sqrt()).exp(),
        }
    }

    /// `R(x + step) - R(x)`, accurate to relative precision even when the
    /// two values agree in most digits.
    pub fn eval_increment(&self, x: &[f64], step: &[f64]) -> f64 {
        let sq = linalg::dot(x, x);
        // ‖x + step‖² - ‖x‖² without forming either norm
        let dsq: f64 = step.iter().zip(x).map(|(s, xi)| s * (2.0 * xi + s)).sum();
        let exponent = match self.family {
            KernelFamily::Gaussian => -self.gamma * dsq,
            KernelFamily::Exponential => {
                let r_old = sq.sqrt();
                let r_new = (sq + dsq).max(0.0).sqrt();
                if r_old + r_new == 0.0 {
                    return 0.0;
                }
                -self.gamma * dsq / (r_old + r_new)
            }
        };
        self.eval_sq_norm(sq) * exponent.exp_m1()
    }

    /// `∇R(x)`. For the exponential kernel the gradient is taken as zero at the
    /// origin, where `R` is not differentiable.
    pub fn gradient(&self, displacement: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; displacement.len()];
        self.accumulate_gradient(displacement, 1.0, &mut out);
        out
    }

    /// `out += weight * ∇R(x)`.
    #[inline]
    pub(crate) fn accumulate_gradient(&self, displacement: &[f64], weight: f64, out: &mut [f64]) {
        let sq = linalg::dot(displacement, displacement);
        let factor = match self.family {
            KernelFamily::Gaussian => -2.0 * self.gamma * (-self.gamma * sq).exp(),
            KernelFamily::Exponential => {
                if sq == 0.0 {
                    return;
                }
                let r = sq.sqrt();
                -self.gamma * (-self.gamma * r).exp() / r
            }
        };
        let f = weight * factor;
        for (o, x) in out.iter_mut().zip(displacement) {
            *o += f * x;
        }
    }

    pub fn smoothness_constants(&self) -> Smoothness {
        match self.family {
            KernelFamily::Gaussian => Smoothness { theta: 2.0, d_theta: self.gamma },
            KernelFamily::Exponential => Smoothness { theta: 1.0, d_theta: self.gamma },
        }
    }
}

/// Free-function form of [`KernelSpec::eval`].
pub fn eval_kernel(spec: &KernelSpec, displacement: &[f64]) -> f64 {
    spec.eval(displacement)
}

/// Free-function form of [`KernelSpec::smoothness_constants`].
pub fn smoothness_constants(spec: &KernelSpec) -> Smoothness {
    spec.smoothness_constants()
}

/// The normalized Gram matrix `C_n = {κ(x_i, x_j) / n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    values: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }
}

/// Builds `C_n`. Each off-diagonal pair is evaluated once and mirrored, so the
/// result is exactly symmetric; rows are filled in parallel.
pub fn build_kernel_matrix(spec: &KernelSpec, points: &[Vec<f64>]) -> Result<KernelMatrix> {
    let n = points.len();
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let d = points[0].len();
    if let Some(bad) = points.iter().position(|p| p.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "point {bad} has dimension {} but point 0 has dimension {d}",
            points[bad].len()
        )));
    }
    let inv_n = 1.0 / n as f64;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| spec.eval_between(&points[i], &points[j]) * inv_n)
                .collect()
        })
        .collect();
    let mut values = DMatrix::zeros(n, n);
    for (i, row) in rows.into_iter().enumerate() {
        for (offset, v) in row.into_iter().enumerate() {
            let j = i + offset;
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
    Ok(KernelMatrix { values })
}

/// Eigenvalues in descending order with matching orthonormal eigenvector
/// columns. Each eigenvector is signed so that its entry of largest magnitude
/// is positive (first such entry on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
}

impl EigenPairs {
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `n × m` matrix of the leading `m` eigenvectors.
    pub fn leading_vectors(&self, m: usize) -> DMatrix<f64> {
        self.vectors.columns(0, m.min(self.len())).into_owned()
    }

    /// Replaces the eigenvector basis; used to check rotation invariance of
    /// quantities that only depend on an eigenspace.
    pub fn with_eigenvectors(&self, vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.shape() != self.vectors.shape() {
            return Err(Error::DimensionMismatch(format!(
                "eigenvector matrix {:?} does not match {:?}",
                vectors.shape(),
                self.vectors.shape()
            )));
        }
        Ok(Self { values: self.values.clone(), vectors })
    }

    /// Copy with eigenvector column `j` negated.
    pub fn with_flipped_sign(&self, j: usize) -> Self {
        let mut out = self.clone();
        out.vectors.column_mut(j).neg_mut();
        out
    }
}

pub fn eigendecompose(matrix: &KernelMatrix) -> Result<EigenPairs> {
    symmetric_eigen(&matrix.values)
}

/// Eigendecomposition of an arbitrary real symmetric matrix with the same
/// ordering and sign conventions as [`eigendecompose`].
pub fn symmetric_eigen(matrix: &DMatrix<f64>) -> Result<EigenPairs> {
    let n = matrix.nrows();
    symmetric_eigen_with_limit(matrix, 1000 * n.max(1))
}

pub(crate) fn symmetric_eigen_with_limit(matrix: &DMatrix<f64>, max_iter: usize) -> Result<EigenPairs> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::DimensionMismatch(format!("matrix is {rows}x{cols}, not square")));
    }
    if rows == 0 {
        return Err(Error::EmptySample);
    }
    let eig = nalgebra::SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, max_iter)
        .ok_or(Error::EigenNonConvergence { rows, cols })?;

    let mut order: Vec<usize> = (0..rows).collect();
    // stable: equal eigenvalues keep solver column order
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let values = DVector::from_iterator(rows, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(rows, rows);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..rows {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.column_mut(dst).copy_from(&(col * sign));
    }
    Ok(EigenPairs { values, vectors })
}

/// Optimal orthogonal alignment of two orthonormal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Procrustes {
    pub rotation: DMatrix<f64>,
    pub residual: f64,
}

/// Finds the orthogonal `O` minimizing `‖V O - V0‖_F`, i.e. the polar factor
/// `U Wᵀ` of `Vᵀ V0 = U Σ Wᵀ`.
pub fn procrustes_align(v: &DMatrix<f64>, v0: &DMatrix<f64>) -> Result<Procrustes> {
    if v.shape() != v0.shape() {
        return Err(Error::DimensionMismatch(format!(
            "frames have shapes {:?} and {:?}",
            v.shape(),
            v0.shape()
        )));
    }
    let cross = v.transpose() * v0;
    let svd = cross.svd(true, true);
    let u = svd.u.ok_or(Error::EigenNonConvergence { rows: v.ncols(), cols: v.ncols() })?;
    let w_t = svd.v_t.ok_or(Error::EigenNonConvergence { rows: v.ncols(), cols: v.ncols() })?;
    let rotation = u * w_t;
    let residual = linalg::frobenius(&(v * &rotation - v0));
    Ok(Procrustes { rotation, residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const E_INV: f64 = 0.367_879_441_171_442_33;

    #[test]
    fn increments_match_direct_differences() {
        for spec in [KernelSpec::gaussian(0.7).unwrap(), KernelSpec::exponential(1.3).unwrap()] {
            let x = [0.3, -0.4, 0.1];
            let step = [0.05, 0.02, -0.01];
            let moved: Vec<f64> = x.iter().zip(&step).map(|(a, b)| a + b).collect();
            let direct = spec.eval(&moved) - spec.eval(&x);
            assert_abs_diff_eq!(spec.eval_increment(&x, &step), direct, epsilon = 1e-15);
            // tiny steps keep their relative accuracy
            let tiny = [1e-12, 0.0, 0.0];
            let inc = spec.eval_increment(&x, &tiny);
            let slope = linalg::dot(&spec.gradient(&x), &tiny);
            assert!((inc - slope).abs() <= 1e-9 * slope.abs());
        }
        let e = KernelSpec::exponential(1.0).unwrap();
        assert_eq!(e.eval_increment(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn eval_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(g.eval(&[0.0, 0.0]), 1.0);
        assert_abs_diff_eq!(g.eval(&[0.6, 0.8]), E_INV, epsilon = 1e-15);
        let e = KernelSpec::exponential(2.0).unwrap();
        assert_abs_diff_eq!(e.eval(&[0.3, 0.4]), E_INV, epsilon = 1e-15);
        assert_eq!(e.eval(&[0.0; 3]), 1.0);
    }

    #[test]
    fn gamma_must_be_positive() {
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::exponential(-1.0).is_err());
        assert!(KernelSpec::gaussian(f64::NAN).is_err());
    }

    #[test]
    fn smoothness_examples() {
        let s = KernelSpec::gaussian(1.0).unwrap().smoothness_constants();
        assert_eq!((s.theta, s.d_theta), (2.0, 1.0));
        let s = KernelSpec::exponential(1.0).unwrap().smoothness_constants();
        assert_eq!((s.theta, s.d_theta), (1.0, 1.0));
    }

    #[test]
    fn smoothness_matches_local_behaviour() {
        for spec in [
            KernelSpec::gaussian(1.0).unwrap(),
            KernelSpec::gaussian(3.5).unwrap(),
            KernelSpec::exponential(1.0).unwrap(),
            KernelSpec::exponential(0.25).unwrap(),
        ] {
            let s = spec.smoothness_constants();
            let x = [1e-4 / 2f64.sqrt(), 1e-4 / 2f64.sqrt()];
            let r = (1.0 - spec.eval(&x)) / (s.d_theta * 1e-4f64.powf(s.theta));
            assert!((r - 1.0).abs() <= 1e-4, "{spec:?}: ratio {r}");
        }
        // the sharper check stated for the unit Gaussian
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert!(((1.0 - g.eval(&[1e-4])) / 1e-8 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_formula() {
        let g = KernelSpec::gaussian(0.7).unwrap();
        let x = [0.3, -0.2];
        let grad = g.gradient(&x);
        let r = g.eval(&x);
        assert_abs_diff_eq!(grad[0], -2.0 * 0.7 * 0.3 * r, epsilon = 1e-15);
        let e = KernelSpec::exponential(1.0).unwrap();
        assert_eq!(e.gradient(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn kernel_matrix_examples() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let m = build_kernel_matrix(&g, &[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(m.values(), &DMatrix::from_element(2, 2, 0.5));

        let m = build_kernel_matrix(&g, &[vec![0.0, 0.0], vec![0.6, 0.8]]).unwrap();
        assert_eq!(m.values()[(0, 0)], 0.5);
        assert_abs_diff_eq!(m.values()[(0, 1)], E_INV / 2.0, epsilon = 1e-15);
        assert_eq!(m.values()[(0, 1)], m.values()[(1, 0)]);

        assert_eq!(build_kernel_matrix(&g, &[]), Err(Error::EmptySample));
        assert!(matches!(
            build_kernel_matrix(&g, &[vec![0.0], vec![0.0, 1.0]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn two_by_two_spectrum() {
        let g = KernelSpec::gaussian(1.0).unwrap();
        let m = build_kernel_matrix(&g, &[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let e = eigendecompose(&m).unwrap();
        let rho = E_INV;
        assert_abs_diff_eq!(e.eigenvalues()[0], (1.0 + rho) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues()[1], (1.0 - rho) / 2.0, epsilon = 1e-14);
        let h = 0.5f64.sqrt();
        assert_abs_diff_eq!(e.eigenvectors()[(0, 0)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvectors()[(1, 0)], h, epsilon = 1e-12);
        // largest-magnitude entry positive; tie goes to the first row
        assert_abs_diff_eq!(e.eigenvectors()[(0, 1)], h, epsilon = 1e-12);
        assert_abs_diff_eq!(e.eigenvectors()[(1, 1)], -h, epsilon = 1e-12);
    }

    #[test]
    fn half_identity() {
        let m = DMatrix::identity(2, 2) * 0.5;
        let e = symmetric_eigen(&m).unwrap();
        assert_eq!(e.eigenvalues().as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn nonconvergence_reports_dimensions() {
        let m = DMatrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        let err = symmetric_eigen_with_limit(&m, 1).unwrap_err();
        assert_eq!(err, Error::EigenNonConvergence { rows: 6, cols: 6 });
    }

    #[test]
    fn procrustes_identity_and_sign_flip() {
        let v = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let p = procrustes_align(&v, &v).unwrap();
        assert_abs_diff_eq!(p.residual, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.rotation, DMatrix::identity(2, 2), epsilon = 1e-12);

        let mut flipped = v.clone();
        flipped.column_mut(1).neg_mut();
        let p = procrustes_align(&flipped, &v).unwrap();
        assert_abs_diff_eq!(p.residual, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.rotation, DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0])), epsilon = 1e-12);

        assert!(procrustes_align(&v, &DMatrix::zeros(2, 2)).is_err());
    }
}
