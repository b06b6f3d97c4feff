//! Descriptive statistics: Gaussian KDE, mode counting, scree data,
//! Kolmogorov-Smirnov distances and the Hill estimator.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::EigenPairs;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, PartialEq)]
pub struct KdeEstimate {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl KdeEstimate {
    /// Trapezoid rule over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(g, d)| 0.5 * (g[1] - g[0]) * (d[0] + d[1]))
            .sum()
    }
}

/// Quantile of sorted data by linear interpolation between order statistics
/// (the default rule of most statistics packages).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile of a weighted sample; `pairs` sorted by value, weights sum to 1.
fn weighted_quantile(pairs: &[(f64, f64)], p: f64) -> f64 {
    let mut acc = 0.0;
    for &(x, w) in pairs {
        acc += w;
        if acc >= p {
            return x;
        }
    }
    pairs[pairs.len() - 1].0
}

/// `0.9 · min(sd, IQR/1.34) · n^{-1/5}`; falls back to `sd` when the IQR
/// vanishes but the data are not constant.
fn silverman(sd: f64, iqr: f64, n_eff: f64) -> Result<f64> {
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    let h = 0.9 * spread * n_eff.powf(-0.2);
    if h > 0.0 && h.is_finite() {
        Ok(h)
    } else {
        Err(Error::ZeroBandwidth)
    }
}

pub fn silverman_bandwidth(data: &[f64]) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument("bandwidth needs at least two points".into()));
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    let sd = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    silverman(sd, iqr, n)
}

fn evaluate(points: &[f64], weights: Option<&[f64]>, grid: &[f64], h: f64) -> Vec<f64> {
    let n = points.len() as f64;
    grid.par_iter()
        .map(|&g| {
            let s: f64 = match weights {
                Some(w) => points
                    .iter()
                    .zip(w)
                    .map(|(x, wi)| wi * (-0.5 * ((g - x) / h).powi(2)).exp())
                    .sum(),
                None => points.iter().map(|x| (-0.5 * ((g - x) / h).powi(2)).exp()).sum::<f64>() / n,
            };
            s * INV_SQRT_2PI / h
        })
        .collect()
}

/// Gaussian KDE with Silverman's bandwidth, evaluated on `grid`.
pub fn kde_gaussian(data: &[f64], grid: &[f64]) -> Result<KdeEstimate> {
    let h = silverman_bandwidth(data)?;
    Ok(KdeEstimate { grid: grid.to_vec(), density: evaluate(data, None, grid, h), bandwidth: h })
}

/// Gaussian KDE of a weighted sample. Weights are self-normalized; the
/// bandwidth uses weighted moments and the effective size `(Σw)²/Σw²`.
pub fn kde_weighted(data: &[f64], weights: &[f64], grid: &[f64]) -> Result<KdeEstimate> {
    if data.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} points but {} weights",
            data.len(),
            weights.len()
        )));
    }
    if data.len() < 2 {
        return Err(Error::InvalidArgument("weighted KDE needs at least two points".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument("weights must be finite and nonnegative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("weights sum to zero".into()));
    }
    let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
    let mean: f64 = data.iter().zip(&w).map(|(x, wi)| x * wi).sum();
    let var: f64 = data.iter().zip(&w).map(|(x, wi)| wi * (x - mean).powi(2)).sum();
    let n_eff = 1.0 / w.iter().map(|x| x * x).sum::<f64>();
    let mut pairs: Vec<(f64, f64)> = data.iter().copied().zip(w.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let iqr = weighted_quantile(&pairs, 0.75) - weighted_quantile(&pairs, 0.25);
    let h = silverman(var.sqrt(), iqr, n_eff)?;
    Ok(KdeEstimate { grid: grid.to_vec(), density: evaluate(data, Some(&w), grid, h), bandwidth: h })
}

/// Indices of strict interior local maxima. A flat top counts once, at its
/// leftmost index, provided both neighbours of the plateau are lower.
pub fn local_maxima(estimate: &KdeEstimate) -> Vec<usize> {
    local_maxima_of(&estimate.density)
}

pub fn local_maxima_of(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// The leading `top` eigenvalues with 1-based indices; `top` is clipped to
/// the number of eigenvalues.
pub fn scree_data(eigenpairs: &EigenPairs, top: usize) -> Vec<(usize, f64)> {
    eigenpairs.eigenvalues().iter().take(top).enumerate().map(|(i, v)| (i + 1, *v)).collect()
}

pub const AUTO_SCREE_CAP: usize = 10;

/// Smallest `m` with `λ_m / λ_{m+1} > 2`, capped at 10. This is a heuristic
/// stand-in for reading the elbow off a scree plot; when no ratio exceeds 2
/// the cap (or the number of eigenvalues, if smaller) is returned.
pub fn auto_scree_m(eigenvalues: &[f64]) -> usize {
    let cap = AUTO_SCREE_CAP.min(eigenvalues.len()).max(1);
    for m in 1..cap.min(eigenvalues.len()) {
        let (a, b) = (eigenvalues[m - 1], eigenvalues[m]);
        if a > 0.0 && (b <= 0.0 || a / b > 2.0) {
            return m;
        }
    }
    cap
}

/// `sup_x |F_n(x) - F(x)|` against a continuous reference CDF.
pub fn ks_one_sample<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(d.clamp(0.0, 1.0))
}

/// `sup_x |F_n(x) - G_m(x)|` between two empirical CDFs.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = if x[i] <= y[j] { x[i] } else { y[j] };
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Hill's estimator of the tail index from the `k_top` largest values:
/// `1 / ((1/k) Σ_{i≤k} ln(X_(i) / X_(k+1)))`.
pub fn hill_estimator(sample: &[f64], k_top: usize) -> Result<f64> {
    if sample.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument("Hill estimator needs positive finite values".into()));
    }
    if k_top == 0 || k_top >= sample.len() {
        return Err(Error::InvalidArgument(format!(
            "k_top={k_top} must lie in 1..{}",
            sample.len()
        )));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let base = sorted[k_top].ln();
    let mean_excess = sorted[..k_top].iter().map(|x| x.ln() - base).sum::<f64>() / k_top as f64;
    if mean_excess <= 0.0 {
        return Err(Error::InvalidArgument("top order statistics are all tied".into()));
    }
    Ok(1.0 / mean_excess)
}

/// Monte Carlo density of the angular spectral measure of the integrated
/// ARCH(1) process: angles `atan(Z²)` with importance weights `√(1 + Z⁴)`,
/// `Z` standard normal.
pub fn arch_spectral_density<R: Rng + ?Sized>(n_mc: usize, grid: &[f64], rng: &mut R) -> Result<KdeEstimate> {
    if n_mc < 1000 {
        return Err(Error::InvalidArgument(format!("n_mc={n_mc} must be at least 1000")));
    }
    let mut angles = Vec::with_capacity(n_mc);
    let mut weights = Vec::with_capacity(n_mc);
    for _ in 0..n_mc {
        let z: f64 = rng.sample(StandardNormal);
        let z2 = z * z;
        angles.push(z2.atan());
        weights.push((1.0 + z2 * z2).sqrt());
    }
    kde_weighted(&angles, &weights, grid)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}
