use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extremes::ExtremalSample;
use crate::kernels::{build_kernel_matrix, KernelSpec};
use crate::linalg;

use super::atoms::SpectralAtoms;
use super::clusters::ClusterAssignment;

/// `C_n`, the block reference `C0` and `Δ = C_n - C0` over the extremes,
/// rows ordered cluster by cluster with the unassigned extremes last.
///
/// On assigned × assigned positions of blocks `(k1, k2)` the reference is
/// `R(s_k1 - s_k2) / N_n` with `N_n` the total number of extremes, so that the
/// entries of `Δ_B` are `δ_ij = [R(Y_i - Y_j) - R(s_k1 - s_k2)] / N_n`. All
/// other entries of `C0` are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationDecomposition {
    pub c_n: DMatrix<f64>,
    pub c0: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub delta_b: DMatrix<f64>,
    /// Row range of each cluster in block order.
    pub block_layout: Vec<Range<usize>>,
    /// Sample positions in block order.
    pub order: Vec<usize>,
}

impl PerturbationDecomposition {
    pub fn n_assigned(&self) -> usize {
        self.delta_b.nrows()
    }

    pub fn n_total(&self) -> usize {
        self.c_n.nrows()
    }
}

fn check_consistent(sample: &ExtremalSample, atoms: &SpectralAtoms, clusters: &ClusterAssignment) -> Result<()> {
    if clusters.members.len() != atoms.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} clusters for {} atoms",
            clusters.members.len(),
            atoms.len()
        )));
    }
    if clusters.total() != sample.len() {
        return Err(Error::DimensionMismatch(format!(
            "assignment covers {} extremes, sample has {}",
            clusters.total(),
            sample.len()
        )));
    }
    if clusters.n_assigned() == 0 {
        return Err(Error::NoClusteredExtremes);
    }
    Ok(())
}

pub fn perturbation_matrices(
    spec: &KernelSpec,
    atoms: &SpectralAtoms,
    sample: &ExtremalSample,
    clusters: &ClusterAssignment,
) -> Result<PerturbationDecomposition> {
    check_consistent(sample, atoms, clusters)?;
    let mut order = Vec::with_capacity(sample.len());
    let mut block_layout = Vec::with_capacity(atoms.len());
    for m in &clusters.members {
        let start = order.len();
        order.extend_from_slice(m);
        block_layout.push(start..order.len());
    }
    let n_assigned = order.len();
    order.extend_from_slice(&clusters.unassigned);

    let angles: Vec<Vec<f64>> = order.iter().map(|&i| sample.angles[i].clone()).collect();
    let c_n = build_kernel_matrix(spec, &angles)?.into_inner();
    let n = order.len();
    let nf = n as f64;

    let mut c0 = DMatrix::zeros(n, n);
    for (k1, r1) in block_layout.iter().enumerate() {
        for (k2, r2) in block_layout.iter().enumerate() {
            let v = spec.eval_between(&atoms.atoms[k1], &atoms.atoms[k2]) / nf;
            c0.view_mut((r1.start, r2.start), (r1.len(), r2.len())).fill(v);
        }
    }
    let delta = &c_n - &c0;
    let delta_b = delta.view((0, 0), (n_assigned, n_assigned)).into_owned();
    Ok(PerturbationDecomposition { c_n, c0, delta, delta_b, block_layout, order })
}

/// Blockwise pieces of `‖Δ_B‖_F²` and the norms of `Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrobeniusStats {
    /// `F_{k1,k2} = Σ_{i∈I_k1, j∈I_k2} δ_ij²`.
    pub f: DMatrix<f64>,
    /// `G_{k1,k2} = N² F_{k1,k2} / (N_k1 N_k2)`, zero for an empty cluster.
    pub g: DMatrix<f64>,
    pub delta_b_frobenius: f64,
    pub delta_frobenius: f64,
    pub delta_opnorm: f64,
}

pub fn frobenius_stats(decomp: &PerturbationDecomposition) -> FrobeniusStats {
    let p = decomp.block_layout.len();
    let n = decomp.n_total() as f64;
    let mut f = DMatrix::zeros(p, p);
    let mut g = DMatrix::zeros(p, p);
    for (k1, r1) in decomp.block_layout.iter().enumerate() {
        for (k2, r2) in decomp.block_layout.iter().enumerate() {
            let block = decomp.delta.view((r1.start, r2.start), (r1.len(), r2.len()));
            let s: f64 = block.iter().map(|x| x * x).sum();
            f[(k1, k2)] = s;
            if !r1.is_empty() && !r2.is_empty() {
                g[(k1, k2)] = s * n * n / (r1.len() as f64 * r2.len() as f64);
            }
        }
    }
    FrobeniusStats {
        f,
        g,
        delta_b_frobenius: linalg::frobenius(&decomp.delta_b),
        delta_frobenius: linalg::frobenius(&decomp.delta),
        delta_opnorm: operator_norm(&decomp.delta),
    }
}

/// Largest singular value.
pub fn operator_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `‖Δ_B‖_F` summed pair by pair, without materializing any matrix.
/// Rows are summed in parallel and the row totals added in order, so the
/// result does not depend on the thread count.
pub fn delta_b_frobenius_direct(
    spec: &KernelSpec,
    atoms: &SpectralAtoms,
    sample: &ExtremalSample,
    clusters: &ClusterAssignment,
) -> Result<f64> {
    check_consistent(sample, atoms, clusters)?;
    let labelled: Vec<(usize, usize)> = clusters
        .members
        .iter()
        .enumerate()
        .flat_map(|(k, m)| m.iter().map(move |&i| (i, k)))
        .collect();
    let p = atoms.len();
    let reference: Vec<f64> = (0..p * p)
        .map(|idx| spec.eval_between(&atoms.atoms[idx / p], &atoms.atoms[idx % p]))
        .collect();
    let rows: Vec<f64> = labelled
        .par_iter()
        .map(|&(i, ki)| {
            let yi = &sample.angles[i];
            labelled
                .iter()
                .map(|&(j, kj)| {
                    let d = spec.eval_between(yi, &sample.angles[j]) - reference[ki * p + kj];
                    d * d
                })
                .sum::<f64>()
        })
        .collect();
    let n = sample.len() as f64;
    Ok(rows.iter().sum::<f64>().sqrt() / n)
}

/// `2 min(√m ‖Δ‖_op, ‖Δ‖_F) / (λ⁰_m - λ⁰_{m+1})`, bounding the distance
/// between the leading `m`-dimensional eigenspaces of `C0` and `C0 + Δ`
/// after orthogonal alignment. `lambda0` must be sorted in descending order.
pub fn davis_kahan_bound(lambda0: &[f64], delta: &DMatrix<f64>, m: usize) -> Result<f64> {
    if m == 0 || m >= lambda0.len() {
        return Err(Error::InvalidArgument(format!(
            "m={m} needs 1 <= m < {} eigenvalues",
            lambda0.len()
        )));
    }
    let gap = lambda0[m - 1] - lambda0[m];
    let scale = lambda0.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(gap > 1e-12 * scale) {
        return Err(Error::ZeroGap);
    }
    let op = operator_norm(delta);
    let fro = linalg::frobenius(delta);
    Ok(2.0 * ((m as f64).sqrt() * op).min(fro) / gap)
}
