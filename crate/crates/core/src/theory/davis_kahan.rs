use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::extremes::{extract_extremes, ExtremeRule};
use crate::generators::{gen_contaminated_lfm, FactorModelSpec};
use crate::kernels::{procrustes_align, symmetric_eigen, KernelSpec};

use super::atoms::spectral_atoms;
use super::clusters::assign_clusters;
use super::perturbation::{davis_kahan_bound, perturbation_matrices};

/// The bound next to the realized distance `‖V O - V0‖_F` between the
/// leading eigenvectors `V` of `C0 + Δ` and `V0` of `C0`, with `O` the
/// Procrustes rotation. `bound` and `satisfied` are `None` when the
/// reference spectrum has no gap after the `m`-th eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct DavisKahanOutcome {
    pub bound: Option<f64>,
    pub residual: f64,
    pub gap: f64,
    pub satisfied: Option<bool>,
}

impl DavisKahanOutcome {
    /// Compares the eigenspaces of `c0` and `c0 + delta`.
    pub fn from_matrices(c0: &DMatrix<f64>, delta: &DMatrix<f64>, m: usize) -> Result<Self> {
        if c0.shape() != delta.shape() {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", c0.shape(), delta.shape())));
        }
        let reference = symmetric_eigen(c0)?;
        let perturbed = symmetric_eigen(&(c0 + delta))?;
        let lambda0: Vec<f64> = reference.eigenvalues().iter().copied().collect();
        let v = perturbed.leading_vectors(m);
        let v0 = reference.leading_vectors(m);
        let residual = procrustes_align(&v, &v0)?.residual;
        let gap = if m < lambda0.len() { lambda0[m - 1] - lambda0[m] } else { f64::NAN };
        match davis_kahan_bound(&lambda0, delta, m) {
            Ok(bound) => Ok(Self { bound: Some(bound), residual, gap, satisfied: Some(residual <= bound) }),
            Err(Error::ZeroGap) => Ok(Self { bound: None, residual, gap, satisfied: None }),
            Err(e) => Err(e),
        }
    }
}

/// Simulates `n` draws of the factor model, keeps the `top_k` largest, and
/// checks the bound with `C0` built from the factor clusters.
pub fn davis_kahan_replicate<R: Rng + ?Sized>(
    spec: &FactorModelSpec,
    kernel: &KernelSpec,
    n: usize,
    top_k: usize,
    m: usize,
    rng: &mut R,
) -> Result<DavisKahanOutcome> {
    let data = gen_contaminated_lfm(spec, n, rng);
    let sample = extract_extremes(&data.points, ExtremeRule::TopK(top_k))?;
    let factors = data.factors.as_deref().unwrap_or_default();
    let clusters = assign_clusters(&sample, factors, spec)?;
    let atoms = spectral_atoms(spec)?;
    let decomp = perturbation_matrices(kernel, &atoms, &sample, &clusters)?;
    DavisKahanOutcome::from_matrices(&decomp.c0, &decomp.delta, m)
}
