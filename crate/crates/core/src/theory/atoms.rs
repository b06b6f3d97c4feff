use crate::error::{Error, Result};
use crate::generators::FactorModelSpec;
use crate::linalg;

/// The discrete angular measure of a linear factor model: atoms
/// `s_k = a_k / ‖a_k‖` with masses `‖a_k‖^α / w`, `w = Σ_k ‖a_k‖^α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralAtoms {
    pub atoms: Vec<Vec<f64>>,
    pub column_norms: Vec<f64>,
    pub total_weight: f64,
    pub masses: Vec<f64>,
    pub alpha: f64,
}

impl SpectralAtoms {
    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Index and distance of the atom closest to `x`.
    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        self.atoms
            .iter()
            .enumerate()
            .map(|(k, s)| (k, linalg::dist(s, x)))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }
}

pub fn spectral_atoms(spec: &FactorModelSpec) -> Result<SpectralAtoms> {
    let a = spec.loadings();
    let alpha = spec.alpha();
    let mut atoms = Vec::with_capacity(a.ncols());
    let mut column_norms = Vec::with_capacity(a.ncols());
    for (k, col) in a.column_iter().enumerate() {
        let w = col.norm();
        if w == 0.0 {
            return Err(Error::ZeroColumn(k));
        }
        atoms.push(col.iter().map(|v| v / w).collect());
        column_norms.push(w);
    }
    let powered: Vec<f64> = column_norms.iter().map(|w| w.powf(alpha)).collect();
    let total_weight: f64 = powered.iter().sum();
    let masses = powered.iter().map(|p| p / total_weight).collect();
    Ok(SpectralAtoms { atoms, column_norms, total_weight, masses, alpha })
}
