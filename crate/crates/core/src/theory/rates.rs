use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extremes::polar_decompose;
use crate::generators::{lfm_exceedances, replicate_rng, FactorModelSpec};
use crate::kernels::KernelSpec;
use crate::linalg;

use super::atoms::{spectral_atoms, SpectralAtoms};
use super::clusters::best_factor;

/// Asymptotic regime of `‖Δ_B‖_F` as the level grows, set by the tail index
/// `α` and the kernel smoothness `θ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// `α > 2θ`: `u² ‖Δ_B‖_F` converges in probability.
    LightTail,
    /// `2 < α < 2θ`: `u ‖Δ_B‖_F` converges in probability.
    Intermediate,
    /// `α < 2`: `u^{2-α/2} n^{-1/α+1/2} ‖Δ_B‖_F` converges in law.
    HeavyTail,
}

impl Regime {
    /// `None` on the boundaries `α = 2` and `α = 2θ`.
    pub fn infer(alpha: f64, theta: f64) -> Option<Self> {
        if alpha > 2.0 * theta {
            Some(Self::LightTail)
        } else if alpha > 2.0 && alpha < 2.0 * theta {
            Some(Self::Intermediate)
        } else if alpha < 2.0 {
            Some(Self::HeavyTail)
        } else {
            None
        }
    }

    /// Log-log slope of `‖Δ_B‖_F` against `u` at fixed `n`.
    pub fn expected_slope(&self, alpha: f64) -> f64 {
        match self {
            Self::LightTail => -2.0,
            Self::Intermediate => -1.0,
            Self::HeavyTail => -(2.0 - alpha / 2.0),
        }
    }

    /// Normalizing factor that makes `‖Δ_B‖_F` converge in this regime.
    pub fn scaling(&self, u: f64, n: usize, alpha: f64) -> f64 {
        match self {
            Self::LightTail => u * u,
            Self::Intermediate => u,
            Self::HeavyTail => u.powf(2.0 - alpha / 2.0) * (n as f64).powf(0.5 - 1.0 / alpha),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LightTail => "light_tail",
            Self::Intermediate => "intermediate",
            Self::HeavyTail => "heavy_tail",
        }
    }
}

/// Level `u` at which `n` draws are expected to give `exceedances` points
/// with `‖X‖ > u`, from the tail `P(‖X‖ > u) ≈ c_α w u^{-α}`.
pub fn level_for_exceedances(spec: &FactorModelSpec, n: usize, exceedances: f64) -> Result<f64> {
    if !(exceedances > 0.0) {
        return Err(Error::InvalidArgument("expected exceedances must be positive".into()));
    }
    let atoms = spectral_atoms(spec)?;
    Ok((n as f64 * spec.c_alpha() * atoms.total_weight / exceedances).powf(1.0 / spec.alpha()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateCheck {
    pub regime: Option<Regime>,
    pub alpha: f64,
    pub n: usize,
    pub replicates: usize,
    /// Levels kept for the fit, strictly increasing.
    pub u_grid: Vec<f64>,
    /// Replicate mean of `‖Δ_B‖_F` per level.
    pub statistic_per_u: Vec<f64>,
    /// `per_replicate[i][r]`: `‖Δ_B‖_F` at level `i` in replicate `r`.
    pub per_replicate: Vec<Vec<f64>>,
    pub fitted_slope: f64,
    pub expected_slope: f64,
    /// Levels removed because some replicate had an empty cluster there.
    pub dropped_levels: Vec<f64>,
    pub warnings: Vec<String>,
}

impl RateCheck {
    pub fn with_expected_slope(mut self, slope: f64) -> Self {
        self.expected_slope = slope;
        self
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        (self.fitted_slope - self.expected_slope).abs() <= tolerance
    }

    /// Normalized statistic; without a regime it falls back to `u^{-slope}`.
    pub fn scaled(&self, u: f64, value: f64) -> f64 {
        match self.regime {
            Some(r) => r.scaling(u, self.n, self.alpha) * value,
            None => u.powf(-self.expected_slope) * value,
        }
    }

    /// Median over replicates of the scaled statistic at each level.
    pub fn scaled_medians(&self) -> Vec<f64> {
        self.u_grid
            .iter()
            .zip(&self.per_replicate)
            .map(|(&u, reps)| {
                let mut s: Vec<f64> = reps.iter().map(|v| self.scaled(u, *v)).collect();
                s.sort_by(f64::total_cmp);
                let m = s.len();
                if m % 2 == 1 { s[m / 2] } else { 0.5 * (s[m / 2 - 1] + s[m / 2]) }
            })
            .collect()
    }
}

/// `‖Δ_B‖_F` at every level of an increasing grid for one simulated sample;
/// `None` where some cluster is empty or nothing exceeds the level.
///
/// The extremes at higher levels are subsets of those at the lowest one, so
/// each pair of points is visited once: its kernel value is computed once and
/// its squared deviation is added to every level at which both points are
/// clustered. Cluster labels are recomputed per level with the factor rule of
/// [`assign_clusters`](super::assign_clusters).
pub fn frobenius_along_grid<R: Rng + ?Sized>(
    spec: &FactorModelSpec,
    kernel: &KernelSpec,
    atoms: &SpectralAtoms,
    n: usize,
    u_grid: &[f64],
    rng: &mut R,
) -> Result<Vec<Option<f64>>> {
    let levels = u_grid.len();
    let ex = lfm_exceedances(spec, n, u_grid[0], rng);
    let p = atoms.len();
    let root = atoms.total_weight.powf(1.0 / spec.alpha());

    let mut radii = Vec::with_capacity(ex.points.len());
    let mut angles = Vec::with_capacity(ex.points.len());
    for x in &ex.points {
        let (r, a) = polar_decompose(x)?;
        radii.push(r);
        angles.push(a);
    }
    // labels[i * levels + l]: cluster of point i at level l, -1 if absent or unassigned
    let mut labels = vec![-1i32; radii.len() * levels];
    let mut totals = vec![0usize; levels];
    let mut counts = vec![0usize; levels * p];
    for (i, z) in ex.factors.iter().enumerate() {
        for (l, &u) in u_grid.iter().enumerate() {
            if radii[i] <= u {
                break;
            }
            totals[l] += 1;
            if let (Some(k), _) = best_factor(z, &atoms.column_norms, u / root) {
                labels[i * levels + l] = k as i32;
                counts[l * p + k] += 1;
            }
        }
    }
    let reference: Vec<f64> = (0..p * p)
        .map(|idx| kernel.eval_between(&atoms.atoms[idx / p], &atoms.atoms[idx % p]))
        .collect();

    // raising the level only tightens the factor condition, so a point
    // without a cluster at the lowest level never gets one
    let clustered: Vec<usize> = (0..radii.len()).filter(|&i| labels[i * levels] >= 0).collect();
    let rows: Vec<Vec<f64>> = (0..clustered.len())
        .into_par_iter()
        .map(|a| {
            let i = clustered[a];
            let mut acc = vec![0.0; levels];
            for &j in &clustered[a + 1..] {
                let top = radii[i].min(radii[j]);
                let mut value = None;
                for l in 0..levels {
                    if u_grid[l] >= top {
                        break;
                    }
                    let (ki, kj) = (labels[i * levels + l], labels[j * levels + l]);
                    if ki < 0 || kj < 0 {
                        continue;
                    }
                    let r = *value.get_or_insert_with(|| kernel.eval_between(&angles[i], &angles[j]));
                    let d = r - reference[ki as usize * p + kj as usize];
                    acc[l] += 2.0 * d * d;
                }
            }
            acc
        })
        .collect();
    let mut sums = vec![0.0; levels];
    for row in &rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok((0..levels)
        .map(|l| {
            let empty = counts[l * p..(l + 1) * p].iter().any(|&c| c == 0);
            (!empty).then(|| sums[l].sqrt() / totals[l] as f64)
        })
        .collect())
}

/// Simulates `replicates` samples of size `n`, records `‖Δ_B‖_F` at each
/// level and fits the log-log slope of the replicate means against `u`.
///
/// One sample per replicate serves every level. Replicate `r` draws from
/// the stream `base + r`, where `base` is taken from `rng`, so results do not
/// depend on how replicates are scheduled across threads.
pub fn rate_check<R: Rng + ?Sized>(
    spec: &FactorModelSpec,
    kernel: &KernelSpec,
    n: usize,
    u_grid: &[f64],
    replicates: usize,
    rng: &mut R,
) -> Result<RateCheck> {
    if u_grid.len() < 4 {
        return Err(Error::InvalidArgument(format!("u grid needs at least 4 levels, got {}", u_grid.len())));
    }
    if u_grid.iter().any(|u| !(*u > 0.0) || !u.is_finite()) || u_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("u grid must be positive and strictly increasing".into()));
    }
    if replicates == 0 || n == 0 {
        return Err(Error::InvalidArgument("n and replicates must be positive".into()));
    }
    let atoms = spectral_atoms(spec)?;
    let alpha = spec.alpha();
    let regime = Regime::infer(alpha, kernel.smoothness_constants().theta);
    let base = rng.next_u64();

    let runs: Vec<Vec<Option<f64>>> = (0..replicates)
        .into_par_iter()
        .map(|r| frobenius_along_grid(spec, kernel, &atoms, n, u_grid, &mut replicate_rng(base, r as u64)))
        .collect::<Result<_>>()?;

    let mut kept = Vec::new();
    let mut per_replicate = Vec::new();
    let mut dropped = Vec::new();
    let mut warnings = Vec::new();
    for (i, &u) in u_grid.iter().enumerate() {
        let vals: Option<Vec<f64>> = runs.iter().map(|run| run[i]).collect();
        match vals {
            Some(v) => {
                kept.push(u);
                per_replicate.push(v);
            }
            None => {
                dropped.push(u);
                warnings.push(format!("level {u} dropped: empty cluster in at least one replicate"));
            }
        }
    }
    if kept.len() < 4 {
        return Err(Error::InvalidArgument(format!(
            "only {} levels left after dropping empty clusters",
            kept.len()
        )));
    }
    let statistic_per_u: Vec<f64> = per_replicate.iter().map(|v| v.iter().sum::<f64>() / v.len() as f64).collect();
    let lx: Vec<f64> = kept.iter().map(|u| u.ln()).collect();
    let ly: Vec<f64> = statistic_per_u.iter().map(|s| s.ln()).collect();
    let (fitted_slope, _) =
        linalg::ols_slope(&lx, &ly).ok_or_else(|| Error::InvalidArgument("degenerate level grid".into()))?;
    let expected_slope = match regime {
        Some(r) => r.expected_slope(alpha),
        None => {
            warnings.push("alpha sits on a regime boundary; expected slope set to NaN".into());
            f64::NAN
        }
    };
    Ok(RateCheck {
        regime,
        alpha,
        n,
        replicates,
        u_grid: kept,
        statistic_per_u,
        per_replicate,
        fitted_slope,
        expected_slope,
        dropped_levels: dropped,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{seeded_rng, FactorLaw};

    #[test]
    fn regime_inference() {
        assert_eq!(Regime::infer(5.0, 1.0), Some(Regime::LightTail));
        assert_eq!(Regime::infer(3.0, 2.0), Some(Regime::Intermediate));
        assert_eq!(Regime::infer(1.0, 2.0), Some(Regime::HeavyTail));
        assert_eq!(Regime::infer(4.0, 2.0), None);
        assert_eq!(Regime::infer(2.0, 2.0), None);
        assert_eq!(Regime::HeavyTail.expected_slope(1.0), -1.5);
        assert_eq!(Regime::HeavyTail.scaling(4.0, 100, 1.0), 8.0 / 10.0);
    }

    #[test]
    fn level_matches_tail_count() {
        let spec = FactorModelSpec::new(FactorModelSpec::two_factor_loadings(), 1.0, FactorLaw::Frechet, 0.0).unwrap();
        let u = level_for_exceedances(&spec, 1_000_000, 1000.0).unwrap();
        let w = 0.30f64.sqrt() + 2.30f64.sqrt();
        assert!((u - 1000.0 * w).abs() < 1e-9);
    }

    #[test]
    fn grid_validation() {
        let spec = FactorModelSpec::new(FactorModelSpec::two_factor_loadings(), 3.0, FactorLaw::Frechet, 0.0).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        let mut rng = seeded_rng(1);
        assert!(rate_check(&spec, &k, 1000, &[1.0, 2.0], 2, &mut rng).is_err());
        assert!(rate_check(&spec, &k, 1000, &[1.0, 3.0, 2.0, 4.0], 2, &mut rng).is_err());
        assert!(rate_check(&spec, &k, 1000, &[1.0, 2.0, 3.0, 4.0], 0, &mut rng).is_err());
    }

    #[test]
    fn small_run_is_reproducible_and_drops_empty_levels() {
        let spec = FactorModelSpec::new(FactorModelSpec::two_factor_loadings(), 3.0, FactorLaw::Frechet, 0.0).unwrap();
        let k = KernelSpec::gaussian(1.0).unwrap();
        let grid: Vec<f64> = [400.0, 200.0, 100.0, 50.0, 0.01]
            .iter()
            .map(|c| level_for_exceedances(&spec, 20_000, *c).unwrap())
            .collect();
        let a = rate_check(&spec, &k, 20_000, &grid, 3, &mut seeded_rng(2)).unwrap();
        let b = rate_check(&spec, &k, 20_000, &grid, 3, &mut seeded_rng(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dropped_levels, vec![grid[4]]);
        assert_eq!(a.u_grid.len(), 4);
        assert!(a.fitted_slope < 0.0);
    }

    #[test]
    fn grid_pass_matches_single_level_statistic() {
        use crate::extremes::{extract_extremes, ExtremeRule};
        use crate::generators::gen_contaminated_lfm;
        use crate::theory::{assign_clusters, delta_b_frobenius_direct};

        for (alpha, kernel) in [(1.0, KernelSpec::gaussian(1.0).unwrap()), (3.0, KernelSpec::exponential(0.7).unwrap())] {
            let spec = FactorModelSpec::new(FactorModelSpec::two_factor_loadings(), alpha, FactorLaw::Frechet, 0.0).unwrap();
            let atoms = spectral_atoms(&spec).unwrap();
            let grid: Vec<f64> = [300.0, 150.0, 80.0, 40.0]
                .iter()
                .map(|c| level_for_exceedances(&spec, 30_000, *c).unwrap())
                .collect();
            let fast = frobenius_along_grid(&spec, &kernel, &atoms, 30_000, &grid, &mut seeded_rng(5)).unwrap();
            let data = gen_contaminated_lfm(&spec, 30_000, &mut seeded_rng(5));
            for (l, &u) in grid.iter().enumerate() {
                let sample = extract_extremes(&data.points, ExtremeRule::Threshold(u)).unwrap();
                let clusters = assign_clusters(&sample, data.factors.as_ref().unwrap(), &spec).unwrap();
                if clusters.members.iter().any(Vec::is_empty) {
                    assert_eq!(fast[l], None);
                    continue;
                }
                let slow = delta_b_frobenius_direct(&kernel, &atoms, &sample, &clusters).unwrap();
                let f = fast[l].unwrap();
                assert!((f - slow).abs() <= 1e-12 * slow.max(1e-300), "level {l}: {f} vs {slow}");
            }
        }
    }
}
