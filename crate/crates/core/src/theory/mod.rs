//! Computable objects of the perturbation analysis for the linear factor
//! model `X = A Z`: spectral atoms, cluster index sets, the block
//! perturbation `Δ = C_n - C0`, Davis-Kahan bounds, samplers for the limit
//! laws, point-process diagnostics and rate regressions.

mod atoms;
mod clusters;
mod davis_kahan;
mod limit;
mod perturbation;
mod point_process;
mod rates;

pub use atoms::{spectral_atoms, SpectralAtoms};
pub use clusters::{assign_clusters, ClusterAssignment};
pub use davis_kahan::{davis_kahan_replicate, DavisKahanOutcome};
pub use limit::{ray_vectors, sample_limit_law, LimitLawSpec, MeanMeasureConstants, RayVector};
pub use perturbation::{
    davis_kahan_bound, delta_b_frobenius_direct, frobenius_stats, operator_norm, perturbation_matrices,
    FrobeniusStats, PerturbationDecomposition,
};
pub use point_process::{
    angle_to_line, point_process_diagnostic, ClusterPointReport, PointProcessReport, PointProcessSettings,
};
pub use rates::{frobenius_along_grid, level_for_exceedances, rate_check, RateCheck, Regime};
