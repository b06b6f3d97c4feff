//! Kernel PCA on a training set of angles and the preimage objective.
//!
//! With `v_k` the unit eigenvectors of `C_n` and `t_j` the training points,
//! the preimage of a query `w` maximizes over the sphere
//!
//! ```text
//! f(v) = Σ_{k≤m} β_k Σ_j v_kj R(v - t_j),   β_k = Σ_j v_kj R(w - t_j).
//! ```
//!
//! Collapsing the sum over `k` gives `f(v) = Σ_j c_j R(v - t_j)` with
//! `c = Σ_k β_k v_k`, which costs `O(n d)` per evaluation.
//!
//! The kernel matrix carries the `1/n` factor. Eigenvectors do not depend on
//! it and the objective only uses eigenvectors, so preimages are the same
//! with or without it.

use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::kernels::{build_kernel_matrix, eigendecompose, EigenPairs, KernelSpec};
use crate::linalg;

/// How the retained components are weighted in the projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionWeighting {
    /// `Σ_k β_k v_k`: the objective exactly as the projection is written for
    /// preimages.
    #[default]
    Unweighted,
    /// `Σ_k λ_k β_k v_k`: the operator projection that carries eigenvalues.
    EigenvalueWeighted,
}

#[derive(Debug, Clone)]
pub struct KpcaModel {
    spec: KernelSpec,
    training_points: Vec<Vec<f64>>,
    eigenpairs: EigenPairs,
    m: usize,
    weighting: ProjectionWeighting,
    fingerprint: u64,
}

fn fingerprint(spec: &KernelSpec, points: &[Vec<f64>]) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    spec.family().hash(&mut h);
    spec.gamma().to_bits().hash(&mut h);
    points.len().hash(&mut h);
    for p in points {
        for v in p {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// Builds the kernel matrix of `angles`, eigendecomposes it and keeps every
/// eigenpair; `m` only sets the projection rank.
pub fn fit_kpca(spec: &KernelSpec, angles: &[Vec<f64>], m: usize) -> Result<KpcaModel> {
    if angles.is_empty() {
        return Err(Error::EmptySample);
    }
    if m == 0 || m > angles.len() {
        return Err(Error::InvalidArgument(format!(
            "retained components m={m} must lie in 1..={}",
            angles.len()
        )));
    }
    let matrix = build_kernel_matrix(spec, angles)?;
    let eigenpairs = eigendecompose(&matrix)?;
    Ok(KpcaModel {
        spec: *spec,
        training_points: angles.to_vec(),
        eigenpairs,
        m,
        weighting: ProjectionWeighting::Unweighted,
        fingerprint: fingerprint(spec, angles),
    })
}

impl KpcaModel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn training_points(&self) -> &[Vec<f64>] {
        &self.training_points
    }

    pub fn eigenpairs(&self) -> &EigenPairs {
        &self.eigenpairs
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.training_points.len()
    }

    pub fn dim(&self) -> usize {
        self.training_points[0].len()
    }

    pub fn weighting(&self) -> ProjectionWeighting {
        self.weighting
    }

    pub fn with_weighting(mut self, weighting: ProjectionWeighting) -> Self {
        self.weighting = weighting;
        self
    }

    /// Same eigenpairs, different projection rank.
    pub fn with_rank(mut self, m: usize) -> Result<Self> {
        if m == 0 || m > self.n() {
            return Err(Error::InvalidArgument(format!("m={m} must lie in 1..={}", self.n())));
        }
        self.m = m;
        Ok(self)
    }

    /// Swaps in another eigenbasis for the same training set. The fingerprint
    /// is kept, so this is only meant for bases of the same eigenspaces
    /// (sign flips, rotations inside a degenerate eigenspace).
    pub fn with_eigenpairs(mut self, eigenpairs: EigenPairs) -> Result<Self> {
        if eigenpairs.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenpairs for {} training points",
                eigenpairs.len(),
                self.n()
            )));
        }
        self.eigenpairs = eigenpairs;
        Ok(self)
    }

    /// Checks that the stored eigenpairs were built from these points and kernel.
    pub fn verify(&self) -> Result<()> {
        if fingerprint(&self.spec, &self.training_points) != self.fingerprint {
            return Err(Error::InvalidArgument("model fingerprint mismatch".into()));
        }
        Ok(())
    }

    pub fn objective(&self, w: &[f64]) -> Result<PreimageObjective<'_>> {
        objective_coefficients(self, w)
    }
}

#[derive(Debug, Clone)]
pub struct PreimageObjective<'a> {
    model: &'a KpcaModel,
    query: Vec<f64>,
    scores: Vec<f64>,
    coefficients: Vec<f64>,
}

pub fn objective_coefficients<'a>(model: &'a KpcaModel, w: &[f64]) -> Result<PreimageObjective<'a>> {
    if w.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "query has dimension {} but the model has {}",
            w.len(),
            model.dim()
        )));
    }
    let norm = linalg::norm(w);
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("query must be a unit vector, norm is {norm}")));
    }
    let kernel_row: Vec<f64> = model
        .training_points
        .iter()
        .map(|t| model.spec.eval_between(w, t))
        .collect();
    let vectors = model.eigenpairs.eigenvectors();
    let values = model.eigenpairs.eigenvalues();
    let n = model.n();
    let scores: Vec<f64> = (0..model.m)
        .map(|k| (0..n).map(|j| vectors[(j, k)] * kernel_row[j]).sum())
        .collect();
    let mut coefficients = vec![0.0; n];
    for (k, beta) in scores.iter().enumerate() {
        let weight = match model.weighting {
            ProjectionWeighting::Unweighted => *beta,
            ProjectionWeighting::EigenvalueWeighted => values[k] * beta,
        };
        for (j, c) in coefficients.iter_mut().enumerate() {
            *c += weight * vectors[(j, k)];
        }
    }
    Ok(PreimageObjective { model, query: w.to_vec(), scores, coefficients })
}

impl<'a> PreimageObjective<'a> {
    pub fn model(&self) -> &'a KpcaModel {
        self.model
    }

    pub fn query(&self) -> &[f64] {
        &self.query
    }

    /// The component scores `β_k`, `k = 1..m`.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// The combined coefficients `c_j`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Same model and query with the coefficient vector replaced.
    pub fn with_coefficients(mut self, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != self.model.n() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for {} training points",
                coefficients.len(),
                self.model.n()
            )));
        }
        self.coefficients = coefficients;
        Ok(self)
    }

    /// `f(v) = Σ_j c_j R(v - t_j)`.
    pub fn value(&self, v: &[f64]) -> f64 {
        let spec = self.model.spec;
        self.coefficients
            .iter()
            .zip(&self.model.training_points)
            .map(|(c, t)| c * spec.eval_between(v, t))
            .sum()
    }

    /// `f(v_new) - f(v)`, computed from the displacement so that it stays
    /// accurate after `f(v_new)` and `f(v)` agree to machine precision.
    pub fn increment(&self, v: &[f64], v_new: &[f64]) -> f64 {
        let step: Vec<f64> = v_new.iter().zip(v).map(|(a, b)| a - b).collect();
        self.increment_along(v, &step)
    }

    /// `f(v + step) - f(v)`.
    pub fn increment_along(&self, v: &[f64], step: &[f64]) -> f64 {
        let spec = self.model.spec;
        let mut x = vec![0.0; v.len()];
        let mut total = 0.0;
        for (c, t) in self.coefficients.iter().zip(&self.model.training_points) {
            for ((xi, a), b) in x.iter_mut().zip(v).zip(t) {
                *xi = a - b;
            }
            total += c * spec.eval_increment(&x, step);
        }
        total
    }

    /// Euclidean gradient of `f`, defined on all of `ℝ^d`.
    pub fn gradient(&self, v: &[f64]) -> Vec<f64> {
        let spec = self.model.spec;
        let mut out = vec![0.0; v.len()];
        let mut diff = vec![0.0; v.len()];
        for (c, t) in self.coefficients.iter().zip(&self.model.training_points) {
            for ((d, a), b) in diff.iter_mut().zip(v).zip(t) {
                *d = a - b;
            }
            spec.accumulate_gradient(&diff, *c, &mut out);
        }
        out
    }
}

/// Free-function form of [`PreimageObjective::value`].
pub fn objective_value(obj: &PreimageObjective<'_>, v: &[f64]) -> f64 {
    obj.value(v)
}

/// Free-function form of [`PreimageObjective::gradient`].
pub fn objective_gradient(obj: &PreimageObjective<'_>, v: &[f64]) -> Vec<f64> {
    obj.gradient(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    use crate::generators::seeded_rng;

    fn random_unit(d: usize, rng: &mut impl Rng) -> Vec<f64> {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        let r = linalg::norm(&x);
        x.into_iter().map(|v| v / r).collect()
    }

    /// The objective written as the double sum over components and points.
    fn double_sum(model: &KpcaModel, w: &[f64], v: &[f64]) -> f64 {
        let vecs = model.eigenpairs().eigenvectors();
        let pts = model.training_points();
        let spec = model.spec();
        (0..model.m())
            .map(|k| {
                let a: f64 = pts.iter().enumerate().map(|(j, t)| vecs[(j, k)] * spec.eval_between(w, t)).sum();
                let b: f64 = pts.iter().enumerate().map(|(j, t)| vecs[(j, k)] * spec.eval_between(v, t)).sum();
                a * b
            })
            .sum()
    }

    #[test]
    fn identical_points() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let model = fit_kpca(&spec, &[vec![1.0, 0.0], vec![1.0, 0.0]], 1).unwrap();
        let ev = model.eigenpairs().eigenvalues();
        assert_abs_diff_eq!(ev[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(ev[1], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn two_atoms_leading_eigenvalue() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let s1 = vec![1.0, 0.0];
        let s2 = vec![0.0, 1.0];
        let rho = spec.eval_between(&s1, &s2);
        let model = fit_kpca(&spec, &[s1, s2], 2).unwrap();
        assert_abs_diff_eq!(model.eigenpairs().eigenvalues()[0], (1.0 + rho) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn fit_errors() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(fit_kpca(&spec, &[], 1).unwrap_err(), Error::EmptySample);
        assert!(fit_kpca(&spec, &[vec![1.0]], 2).is_err());
        assert!(fit_kpca(&spec, &[vec![1.0]], 0).is_err());
    }

    #[test]
    fn fingerprint_checks() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let mut model = fit_kpca(&spec, &[vec![1.0, 0.0], vec![0.0, 1.0]], 1).unwrap();
        assert!(model.verify().is_ok());
        model.training_points[0][0] = 0.5;
        assert!(model.verify().is_err());
    }

    #[test]
    fn single_point_objective() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let t = vec![0.6, 0.8];
        let model = fit_kpca(&spec, &[t.clone()], 1).unwrap();
        let w = vec![1.0, 0.0];
        let obj = model.objective(&w).unwrap();
        let r = spec.eval_between(&w, &t);
        assert_abs_diff_eq!(obj.coefficients()[0], r, epsilon = 1e-15);
        assert_abs_diff_eq!(obj.value(&t), r, epsilon = 1e-15);
        assert_eq!(obj.gradient(&t), vec![0.0, 0.0]);

        let unit = obj.clone().with_coefficients(vec![1.0]).unwrap();
        assert_eq!(unit.value(&t), 1.0);
        let zero = obj.with_coefficients(vec![0.0]).unwrap();
        assert_eq!(zero.value(&w), 0.0);
    }

    #[test]
    fn query_must_be_unit() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let model = fit_kpca(&spec, &[vec![1.0, 0.0]], 1).unwrap();
        assert!(model.objective(&[2.0, 0.0]).is_err());
        assert!(model.objective(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn collapsed_form_matches_double_sum() {
        let mut rng = seeded_rng(11);
        for family in [crate::kernels::KernelFamily::Gaussian, crate::kernels::KernelFamily::Exponential] {
            let spec = KernelSpec::new(family, 1.3).unwrap();
            let pts: Vec<Vec<f64>> = (0..30).map(|_| random_unit(3, &mut rng)).collect();
            let model = fit_kpca(&spec, &pts, 4).unwrap();
            let w = random_unit(3, &mut rng);
            let obj = model.objective(&w).unwrap();
            for _ in 0..50 {
                let v = random_unit(3, &mut rng);
                assert_abs_diff_eq!(obj.value(&v), double_sum(&model, &w, &v), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = seeded_rng(12);
        for family in [crate::kernels::KernelFamily::Gaussian, crate::kernels::KernelFamily::Exponential] {
            let spec = KernelSpec::new(family, 1.0).unwrap();
            let pts: Vec<Vec<f64>> = (0..25).map(|_| random_unit(4, &mut rng)).collect();
            let model = fit_kpca(&spec, &pts, 3).unwrap();
            let obj = model.objective(&random_unit(4, &mut rng)).unwrap();
            let v = random_unit(4, &mut rng);
            let g = obj.gradient(&v);
            let h = 1e-6;
            let fd: Vec<f64> = (0..4)
                .map(|i| {
                    let mut a = v.clone();
                    let mut b = v.clone();
                    a[i] += h;
                    b[i] -= h;
                    (obj.value(&a) - obj.value(&b)) / (2.0 * h)
                })
                .collect();
            let err = linalg::dist(&g, &fd) / linalg::norm(&fd);
            assert!(err < 1e-5, "{family:?}: relative error {err}");
        }
    }

    #[test]
    fn increment_matches_value_difference() {
        let mut rng = seeded_rng(15);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..15).map(|_| random_unit(3, &mut rng)).collect();
        let model = fit_kpca(&spec, &pts, 2).unwrap();
        let obj = model.objective(&pts[1]).unwrap();
        let a = random_unit(3, &mut rng);
        let b = random_unit(3, &mut rng);
        assert_abs_diff_eq!(obj.increment(&a, &b), obj.value(&b) - obj.value(&a), epsilon = 1e-12);
    }

    #[test]
    fn gradient_is_linear_in_coefficients() {
        let mut rng = seeded_rng(13);
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..10).map(|_| random_unit(3, &mut rng)).collect();
        let model = fit_kpca(&spec, &pts, 2).unwrap();
        let obj = model.objective(&pts[0]).unwrap();
        let doubled: Vec<f64> = obj.coefficients().iter().map(|c| 2.0 * c).collect();
        let obj2 = obj.clone().with_coefficients(doubled).unwrap();
        let v = random_unit(3, &mut rng);
        for (a, b) in obj.gradient(&v).iter().zip(obj2.gradient(&v)) {
            assert_abs_diff_eq!(2.0 * a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn objective_bounded_by_l1_norm() {
        let mut rng = seeded_rng(14);
        let spec = KernelSpec::gaussian(2.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..20).map(|_| random_unit(3, &mut rng)).collect();
        let model = fit_kpca(&spec, &pts, 5).unwrap();
        let obj = model.objective(&pts[3]).unwrap();
        let l1: f64 = obj.coefficients().iter().map(|c| c.abs()).sum();
        for _ in 0..100 {
            assert!(obj.value(&random_unit(3, &mut rng)).abs() <= l1);
        }
    }

    #[test]
    fn eigenvalue_weighting_scales_components() {
        let spec = KernelSpec::gaussian(1.0).unwrap();
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.6, 0.8]];
        let model = fit_kpca(&spec, &pts, 1).unwrap();
        let w = vec![1.0, 0.0];
        let plain = model.objective(&w).unwrap().value(&w);
        let lambda = model.eigenpairs().eigenvalues()[0];
        let weighted = model.with_weighting(ProjectionWeighting::EigenvalueWeighted);
        let v = weighted.objective(&w).unwrap().value(&w);
        assert_abs_diff_eq!(v, lambda * plain, epsilon = 1e-14);
    }
}
