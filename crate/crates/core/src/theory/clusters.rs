use crate::error::{Error, Result};
use crate::extremes::ExtremalSample;
use crate::generators::FactorModelSpec;

use super::atoms::spectral_atoms;

/// Extremes grouped by the factor that caused them.
///
/// Member lists hold positions within the [`ExtremalSample`], not rows of the
/// original data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub members: Vec<Vec<usize>>,
    pub unassigned: Vec<usize>,
    pub threshold: f64,
    pub overlap_detected: bool,
    /// Number of extremes that met the factor condition for more than one `k`.
    pub overlap_count: usize,
}

impl ClusterAssignment {
    pub fn counts(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }

    pub fn n_assigned(&self) -> usize {
        self.members.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> usize {
        self.n_assigned() + self.unassigned.len()
    }

    /// Cluster of each sample position, `None` when unassigned.
    pub fn labels(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.total()];
        for (k, m) in self.members.iter().enumerate() {
            for &i in m {
                out[i] = Some(k);
            }
        }
        out
    }
}

/// The qualifying factor with the largest `‖a_k‖ Z_k` among those with
/// `Z_k > level`, and the number of qualifying factors.
pub(crate) fn best_factor(z: &[f64], column_norms: &[f64], level: f64) -> (Option<usize>, usize) {
    let mut hits = 0;
    let mut best: Option<(usize, f64)> = None;
    for (k, (&zk, &wk)) in z.iter().zip(column_norms).enumerate() {
        if zk > level {
            hits += 1;
            let score = wk * zk;
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((k, score));
            }
        }
    }
    (best.map(|(k, _)| k), hits)
}

/// Extreme `i` joins cluster `k` when `Z_ik > u_n / w^{1/α}`, with `u_n` the
/// sample threshold. An extreme that qualifies for several factors goes to
/// the one with the largest `‖a_k‖ Z_ik` and raises `overlap_detected`.
///
/// `factors` holds the factor draws for every row of the data the sample was
/// extracted from and is indexed through `sample.source_indices`.
pub fn assign_clusters(sample: &ExtremalSample, factors: &[Vec<f64>], spec: &FactorModelSpec) -> Result<ClusterAssignment> {
    let atoms = spectral_atoms(spec)?;
    let p = atoms.len();
    let level = sample.threshold / atoms.total_weight.powf(1.0 / spec.alpha());
    let mut members = vec![Vec::new(); p];
    let mut unassigned = Vec::new();
    let mut overlap_count = 0;
    for (pos, &src) in sample.source_indices.iter().enumerate() {
        let z = factors.get(src).ok_or_else(|| {
            Error::DimensionMismatch(format!("no factor draw for row {src} ({} available)", factors.len()))
        })?;
        if z.len() != p {
            return Err(Error::DimensionMismatch(format!("factor draw has length {}, expected {p}", z.len())));
        }
        let (best, hits) = best_factor(z, &atoms.column_norms, level);
        if hits > 1 {
            overlap_count += 1;
        }
        match best {
            Some(k) => members[k].push(pos),
            None => unassigned.push(pos),
        }
    }
    Ok(ClusterAssignment {
        members,
        unassigned,
        threshold: sample.threshold,
        overlap_detected: overlap_count > 0,
        overlap_count,
    })
}
