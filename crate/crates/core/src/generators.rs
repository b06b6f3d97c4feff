//! Seeded samplers for the heavy-tailed models: the contaminated linear factor
//! model, the spiked angular Gaussian model, the regularly varying circle and
//! the squared integrated ARCH(1) process.
//!
//! Every sampler takes an explicit RNG. [`SimRng`] is ChaCha20, so a fixed
//! seed gives the same stream on every platform.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Open01, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

pub type SimRng = ChaCha20Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Stream for replicate `index` of a run seeded with `base_seed`.
pub fn replicate_rng(base_seed: u64, index: u64) -> SimRng {
    seeded_rng(base_seed.wrapping_add(index))
}

/// Inverse CDF of `F(x) = exp(-x^{-α})`.
pub fn frechet_quantile(alpha: f64, u: f64) -> f64 {
    (-u.ln()).powf(-1.0 / alpha)
}

/// Inverse survival function of `P(W > x) = x^{-α}`, `x >= 1`.
pub fn pareto_quantile(alpha: f64, u: f64) -> f64 {
    u.powf(-1.0 / alpha)
}

pub fn sample_frechet<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    frechet_quantile(alpha, u)
}

pub fn sample_pareto<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u: f64 = Open01.sample(rng);
    pareto_quantile(alpha, u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FactorLaw {
    Frechet,
    Pareto,
}

impl FactorLaw {
    pub fn sample<R: Rng + ?Sized>(&self, alpha: f64, rng: &mut R) -> f64 {
        match self {
            FactorLaw::Frechet => sample_frechet(alpha, rng),
            FactorLaw::Pareto => sample_pareto(alpha, rng),
        }
    }
}

/// Which component of a contaminated observation dominates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Signal,
    Noise,
}

impl Label {
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Signal => "signal",
            Label::Noise => "noise",
        }
    }

    fn by_dominance(signal_norm: f64, noise_norm: f64) -> Self {
        if signal_norm >= noise_norm {
            Label::Signal
        } else {
            Label::Noise
        }
    }
}

/// `X = A Z + σ ε` with iid nonnegative heavy-tailed factors `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModelSpec {
    loadings: DMatrix<f64>,
    alpha: f64,
    c_alpha: f64,
    factor_law: FactorLaw,
    sigma: f64,
}

impl FactorModelSpec {
    pub fn new(loadings: DMatrix<f64>, alpha: f64, factor_law: FactorLaw, sigma: f64) -> Result<Self> {
        if loadings.nrows() == 0 || loadings.ncols() == 0 {
            return Err(Error::InvalidArgument("loading matrix is empty".into()));
        }
        if loadings.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::InvalidArgument("loadings must be finite and nonnegative".into()));
        }
        if let Some(k) = (0..loadings.ncols()).find(|&k| loadings.column(k).iter().all(|a| *a == 0.0)) {
            return Err(Error::ZeroColumn(k));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("tail index must be positive, got {alpha}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("contamination must be nonnegative, got {sigma}")));
        }
        Ok(Self { loadings, alpha, c_alpha: 1.0, factor_law, sigma })
    }

    /// The `4 × 2` loading matrix used in the contaminated factor-model study.
    pub fn two_factor_loadings() -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.1, 0.9, 0.2, 0.8, 0.3, 0.7, 0.4, 0.6])
    }

    pub fn with_c_alpha(mut self, c_alpha: f64) -> Result<Self> {
        if !(c_alpha > 0.0) {
            return Err(Error::InvalidArgument("c_alpha must be positive".into()));
        }
        self.c_alpha = c_alpha;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("contamination must be nonnegative, got {sigma}")));
        }
        self.sigma = sigma;
        Ok(self)
    }

    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }
    pub fn factor_law(&self) -> FactorLaw {
        self.factor_law
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn dim(&self) -> usize {
        self.loadings.nrows()
    }
    pub fn factors(&self) -> usize {
        self.loadings.ncols()
    }
}

/// `X = u N + σ ε` with `u` standard Fréchet and `N ~ Normal(0, B Bᵀ + σ₀² I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikedModelSpec {
    b: DMatrix<f64>,
    sigma0: f64,
    sigma: f64,
}

impl SpikedModelSpec {
    pub fn new(b: DMatrix<f64>, sigma0: f64, sigma: f64) -> Result<Self> {
        if b.is_empty() || b.iter().all(|v| *v == 0.0) {
            return Err(Error::InvalidArgument("spike matrix B must be nonzero".into()));
        }
        if !(sigma0 >= 0.0) || !(sigma >= 0.0) {
            return Err(Error::InvalidArgument("sigma0 and sigma must be nonnegative".into()));
        }
        Ok(Self { b, sigma0, sigma })
    }

    /// `B` with rows `(0.1, 0.9), (0.2, 0.8), (0.3, 0.7), (0.4, 0.6)`.
    pub fn reference_spikes() -> DMatrix<f64> {
        FactorModelSpec::two_factor_loadings()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub length: usize,
    pub burn_in: usize,
    pub y0: f64,
}

impl ArchSpec {
    pub fn new(length: usize) -> Result<Self> {
        if length < 2 {
            return Err(Error::InvalidArgument("ARCH length must be at least 2".into()));
        }
        Ok(Self { length, burn_in: 1_000, y0: 0.0 })
    }
}

/// Generated observations with ground truth.
///
/// `factors` holds the latent factor vector of every row when the model has
/// one (the factor model); `cluster_hint` the index of the dominant factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub points: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub cluster_hint: Option<Vec<usize>>,
    pub factors: Option<Vec<Vec<f64>>>,
}

impl LabeledSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `σ |g| F` with `g` standard normal in `d` dimensions and `F` standard Fréchet.
fn contamination<R: Rng + ?Sized>(d: usize, sigma: f64, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect::<Vec<f64>>();
    let f = sample_frechet(1.0, rng);
    g.into_iter().map(|x| sigma * x.abs() * f).collect()
}

struct LfmRow {
    z: Vec<f64>,
    signal: Vec<f64>,
    noise: Vec<f64>,
}

/// One observation of the contaminated factor model: `p` factor draws, then
/// (when `σ > 0`) the contamination.
fn lfm_row<R: Rng + ?Sized>(spec: &FactorModelSpec, rng: &mut R) -> LfmRow {
    let (d, p) = spec.loadings.shape();
    let a = &spec.loadings;
    let z: Vec<f64> = (0..p).map(|_| spec.factor_law.sample(spec.alpha, rng)).collect();
    let signal: Vec<f64> = (0..d).map(|l| (0..p).map(|k| a[(l, k)] * z[k]).sum()).collect();
    let noise = if spec.sigma > 0.0 {
        contamination(d, spec.sigma, rng)
    } else {
        vec![0.0; d]
    };
    LfmRow { z, signal, noise }
}

pub fn gen_contaminated_lfm<R: Rng + ?Sized>(spec: &FactorModelSpec, n: usize, rng: &mut R) -> LabeledSample {
    let p = spec.factors();
    let col_norms: Vec<f64> = spec.loadings.column_iter().map(|c| c.norm()).collect();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut hints = Vec::with_capacity(n);
    let mut factors = Vec::with_capacity(n);
    for _ in 0..n {
        let LfmRow { z, signal, noise } = lfm_row(spec, rng);
        labels.push(Label::by_dominance(linalg::norm(&signal), linalg::norm(&noise)));
        let mut best = 0;
        for k in 1..p {
            if col_norms[k] * z[k] > col_norms[best] * z[best] {
                best = k;
            }
        }
        hints.push(best);
        points.push(signal.iter().zip(&noise).map(|(s, e)| s + e).collect());
        factors.push(z);
    }
    LabeledSample { points, labels, cluster_hint: Some(hints), factors: Some(factors) }
}

/// Rows of a factor-model sample whose radius exceeds a level.
#[derive(Debug, Clone, PartialEq)]
pub struct LfmExceedances {
    pub points: Vec<Vec<f64>>,
    pub factors: Vec<Vec<f64>>,
    pub source_indices: Vec<usize>,
}

/// Draws `n` observations exactly as [`gen_contaminated_lfm`] does with the
/// same generator state, but keeps only rows with `‖X‖ > level`. Memory is
/// proportional to the number of exceedances rather than to `n`.
pub fn lfm_exceedances<R: Rng + ?Sized>(spec: &FactorModelSpec, n: usize, level: f64, rng: &mut R) -> LfmExceedances {
    let mut out = LfmExceedances { points: Vec::new(), factors: Vec::new(), source_indices: Vec::new() };
    for i in 0..n {
        let LfmRow { z, signal, noise } = lfm_row(spec, rng);
        let x: Vec<f64> = signal.iter().zip(&noise).map(|(s, e)| s + e).collect();
        if linalg::norm(&x) > level {
            out.points.push(x);
            out.factors.push(z);
            out.source_indices.push(i);
        }
    }
    out
}

pub fn gen_spiked_angular_gaussian<R: Rng + ?Sized>(
    spec: &SpikedModelSpec,
    n: usize,
    rng: &mut R,
) -> LabeledSample {
    let (d, p) = spec.b.shape();
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let u = sample_frechet(1.0, rng);
        let g: Vec<f64> = (0..p).map(|_| StandardNormal.sample(rng)).collect();
        let h: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let signal: Vec<f64> = (0..d)
            .map(|l| u * ((0..p).map(|k| spec.b[(l, k)] * g[k]).sum::<f64>() + spec.sigma0 * h[l]))
            .collect();
        let noise = if spec.sigma > 0.0 {
            contamination(d, spec.sigma, rng)
        } else {
            vec![0.0; d]
        };
        labels.push(Label::by_dominance(linalg::norm(&signal), linalg::norm(&noise)));
        points.push(signal.iter().zip(&noise).map(|(s, e)| s + e).collect());
    }
    LabeledSample { points, labels, cluster_hint: None, factors: None }
}

/// Ambient dimension 5; the signal `(Y G₁, Y G₂, Y‖G‖, 0, 0)` has its
/// angular measure uniform on `{z₁² + z₂² = 1/2, z₃ = 1/√2}`.
pub fn gen_circle_model<R: Rng + ?Sized>(sigma: f64, n: usize, rng: &mut R) -> LabeledSample {
    const D: usize = 5;
    let mut points = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = sample_frechet(1.0, rng);
        let g1: f64 = StandardNormal.sample(rng);
        let g2: f64 = StandardNormal.sample(rng);
        let signal = [y * g1, y * g2, y * g1.hypot(g2), 0.0, 0.0];
        let noise = if sigma > 0.0 { contamination(D, sigma, rng) } else { vec![0.0; D] };
        labels.push(Label::by_dominance(linalg::norm(&signal), linalg::norm(&noise)));
        points.push(signal.iter().zip(&noise).map(|(s, e)| s + e).collect());
    }
    LabeledSample { points, labels, cluster_hint: None, factors: None }
}

/// One step of `Y_t = (1 + Y_{t-1}) Z_t²`.
#[inline]
pub fn arch_step(prev: f64, z: f64) -> f64 {
    (1.0 + prev) * z * z
}

/// Pairs `(Y_{t-1}, Y_t)` of the squared integrated ARCH(1) process after
/// discarding `burn_in` steps.
pub fn gen_arch_pairs<R: Rng + ?Sized>(spec: &ArchSpec, rng: &mut R) -> Vec<Vec<f64>> {
    let mut y = spec.y0;
    for _ in 0..spec.burn_in {
        let z: f64 = StandardNormal.sample(rng);
        y = arch_step(y, z);
    }
    let mut out = Vec::with_capacity(spec.length);
    for _ in 0..spec.length {
        let z: f64 = StandardNormal.sample(rng);
        let next = arch_step(y, z);
        out.push(vec![y, next]);
        y = next;
    }
    out
}
