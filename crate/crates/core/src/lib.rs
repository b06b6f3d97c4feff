//! Kernel PCA on the angular parts of multivariate extremes.
//!
//! The crate covers the whole pipeline: heavy-tailed samplers with ground-truth
//! labels ([`generators`]), extraction of the extremal angular subsample
//! ([`extremes`]), kernel matrices and their spectra ([`kernels`]), the kernel
//! PCA preimage objective ([`kpca`]) and its maximization on the unit sphere by
//! projected gradient ascent ([`preimage`]). The [`theory`] module turns the
//! perturbation analysis for the linear factor model into computable
//! statistics (spectral atoms, cluster index sets, the block perturbation
//! `Δ_B`, Davis-Kahan bounds, limit-law samplers and rate regressions), and
//! [`stats`] holds the descriptive statistics used to check them.

pub mod error;
pub mod extremes;
pub mod generators;
pub mod kernels;
pub mod kpca;
pub mod linalg;
pub mod preimage;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
pub use extremes::{extract_extremes, polar_decompose, ExtremalSample, ExtremeRule};
pub use generators::{
    gen_arch_pairs, gen_circle_model, gen_contaminated_lfm, gen_spiked_angular_gaussian,
    sample_frechet, sample_pareto, seeded_rng, ArchSpec, FactorLaw, FactorModelSpec, Label,
    LabeledSample, SimRng, SpikedModelSpec,
};
pub use kernels::{
    build_kernel_matrix, eigendecompose, procrustes_align, EigenPairs, KernelFamily,
    KernelMatrix, KernelSpec, Smoothness,
};
pub use kpca::{fit_kpca, KpcaModel, PreimageObjective, ProjectionWeighting};
pub use preimage::{
    batch_preimages, paper_step_size, project_to_sphere, solve_preimage, BatchPreimages,
    PgdSettings, PreimageResult, StepRule, StepSize,
};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
