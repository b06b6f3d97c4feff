//! Plain `key = value` configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a comment.
//! Command-line flags are merged on top of the file, so a flag always wins.
//! Typed configs are then read from the merged map, and every validation
//! error names the offending key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use extremal_kpca::{FactorLaw, FactorModelSpec, KernelFamily, KernelSpec, PgdSettings, SpikedModelSpec, StepRule};
use nalgebra::DMatrix;

use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "EXTREMAL_KPCA_OUTPUT_DIR";
const DEFAULT_OUTPUT_DIR: &str = "extremal-kpca-output";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(normalize_key(key), value.into());
    }

    /// Parses `key=value` and stores it.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), CliError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got '{pair}'")))?;
        self.set(k, v.trim());
        Ok(())
    }

    /// Entries of `other` replace those of `self`.
    pub fn merge(&mut self, other: RawConfig) {
        self.entries.extend(other.entries);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.entries
    }

    fn parse_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| invalid(key, v)),
        }
    }

    fn reject_unknown(&self, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::Config(format!("unknown key '{key}'; expected one of {}", allowed.join(", "))));
            }
        }
        Ok(())
    }
}

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('-', "_")
}

fn invalid(key: &str, value: &str) -> CliError {
    CliError::Config(format!("{key}: cannot parse '{value}'"))
}

fn positive_count(raw: &RawConfig, key: &str, default: usize) -> Result<usize, CliError> {
    let v = raw.parse_or(key, default)?;
    if v == 0 {
        return Err(CliError::Config(format!("{key}: must be positive")));
    }
    Ok(v)
}

fn positive_real(raw: &RawConfig, key: &str, default: f64) -> Result<f64, CliError> {
    let v: f64 = raw.parse_or(key, default)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::Config(format!("{key}: must be positive, got {v}")));
    }
    Ok(v)
}

fn nonnegative_real(raw: &RawConfig, key: &str, default: f64) -> Result<f64, CliError> {
    let v: f64 = raw.parse_or(key, default)?;
    if !(v >= 0.0) || !v.is_finite() {
        return Err(CliError::Config(format!("{key}: must be nonnegative, got {v}")));
    }
    Ok(v)
}

fn real_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| invalid(key, value)))
        .collect()
}

/// Rows separated by `;`, entries by `,`.
fn parse_matrix(key: &str, value: &str) -> Result<DMatrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = value.split(';').map(|r| real_list(key, r)).collect::<Result<_, _>>()?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(CliError::Config(format!("{key}: rows must be nonempty and of equal length")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn kernel(raw: &RawConfig, default_family: KernelFamily) -> Result<KernelSpec, CliError> {
    let family = match raw.get("kernel") {
        None => default_family,
        Some(v) => match v.to_ascii_lowercase().as_str() {
            "gaussian" => KernelFamily::Gaussian,
            "exponential" => KernelFamily::Exponential,
            _ => return Err(CliError::Config(format!("kernel: expected gaussian or exponential, got '{v}'"))),
        },
    };
    let gamma = positive_real(raw, "gamma", 1.0)?;
    KernelSpec::new(family, gamma).map_err(|e| CliError::Config(format!("gamma: {e}")))
}

fn factor_law(raw: &RawConfig) -> Result<FactorLaw, CliError> {
    match raw.get("law").map(str::to_ascii_lowercase).as_deref() {
        None | Some("frechet") => Ok(FactorLaw::Frechet),
        Some("pareto") => Ok(FactorLaw::Pareto),
        Some(v) => Err(CliError::Config(format!("law: expected frechet or pareto, got '{v}'"))),
    }
}

fn factor_model(raw: &RawConfig, default_alpha: f64, default_sigma: f64) -> Result<FactorModelSpec, CliError> {
    let loadings = match raw.get("loadings") {
        Some(v) => parse_matrix("loadings", v)?,
        None => FactorModelSpec::two_factor_loadings(),
    };
    let alpha = positive_real(raw, "alpha", default_alpha)?;
    let sigma = nonnegative_real(raw, "sigma", default_sigma)?;
    FactorModelSpec::new(loadings, alpha, factor_law(raw)?, sigma).map_err(|e| CliError::Config(format!("loadings: {e}")))
}

fn output_dir(raw: &RawConfig) -> PathBuf {
    match raw.get("output_dir") {
        Some(v) => PathBuf::from(v),
        None => std::env::var_os(OUTPUT_DIR_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR), PathBuf::from),
    }
}

fn seed(raw: &RawConfig) -> Result<u64, CliError> {
    raw.parse_or("seed", 1u64)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelConfig {
    Lfm(FactorModelSpec),
    Spiked(SpikedModelSpec),
    Circle { sigma: f64 },
    Arch,
}

impl ModelConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Lfm(_) => "lfm",
            ModelConfig::Spiked(_) => "spiked",
            ModelConfig::Circle { .. } => "circle",
            ModelConfig::Arch => "arch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankChoice {
    Fixed(usize),
    /// Smallest `m` with `λ_m / λ_{m+1} > 2`, capped at 10.
    AutoScree,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub n: usize,
    pub extremes: usize,
    pub kernel: KernelSpec,
    pub m: RankChoice,
    pub eigenvalue_weighted: bool,
    pub pgd: PgdSettings,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Grid points for angle densities (arch only).
    pub grid_points: usize,
    /// Monte Carlo draws behind the theoretical arch density.
    pub mc_draws: usize,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "model", "n", "extremes", "kernel", "gamma", "m", "weighting", "seed", "output_dir", "alpha", "law", "sigma",
    "loadings", "spikes", "sigma0", "max_iterations", "tolerance", "step", "grid_points", "mc_draws",
];

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        raw.reject_unknown(EXPERIMENT_KEYS)?;
        let model_name = raw.get("model").unwrap_or("lfm").to_ascii_lowercase();
        let model = match model_name.as_str() {
            "lfm" => ModelConfig::Lfm(factor_model(raw, 1.0, 1.0)?),
            "spiked" => {
                let b = match raw.get("spikes") {
                    Some(v) => parse_matrix("spikes", v)?,
                    None => SpikedModelSpec::reference_spikes(),
                };
                let sigma0 = nonnegative_real(raw, "sigma0", 1.0)?;
                let sigma = nonnegative_real(raw, "sigma", 0.1)?;
                ModelConfig::Spiked(SpikedModelSpec::new(b, sigma0, sigma).map_err(|e| CliError::Config(format!("spikes: {e}")))?)
            }
            "circle" => ModelConfig::Circle { sigma: nonnegative_real(raw, "sigma", 2.0)? },
            "arch" => ModelConfig::Arch,
            other => return Err(CliError::Config(format!("model: expected lfm, spiked, circle or arch, got '{other}'"))),
        };
        let n = positive_count(raw, "n", 10_000)?;
        let extremes = positive_count(raw, "extremes", 200)?;
        if extremes > n {
            return Err(CliError::Config(format!("extremes: {extremes} exceeds n = {n}")));
        }
        let m = match raw.get("m") {
            None => RankChoice::Fixed(2),
            Some(v) if v.eq_ignore_ascii_case("auto-scree") || v.eq_ignore_ascii_case("auto") => RankChoice::AutoScree,
            Some(_) => {
                let m = positive_count(raw, "m", 2)?;
                if m > extremes {
                    return Err(CliError::Config(format!("m: {m} exceeds the number of extremes {extremes}")));
                }
                RankChoice::Fixed(m)
            }
        };
        let eigenvalue_weighted = match raw.get("weighting").map(str::to_ascii_lowercase).as_deref() {
            None | Some("unweighted") => false,
            Some("eigenvalue") => true,
            Some(v) => return Err(CliError::Config(format!("weighting: expected unweighted or eigenvalue, got '{v}'"))),
        };
        let step_rule = match raw.get("step") {
            None => StepRule::PaperLipschitz,
            Some(v) if v.eq_ignore_ascii_case("lipschitz") => StepRule::PaperLipschitz,
            Some(v) => StepRule::Fixed(v.parse::<f64>().ok().filter(|x| *x > 0.0).ok_or_else(|| invalid("step", v))?),
        };
        let pgd = PgdSettings {
            max_iterations: positive_count(raw, "max_iterations", 500)?,
            stationarity_tol: positive_real(raw, "tolerance", 1e-8)?,
            step_rule,
            record_trace: false,
        };
        Ok(Self {
            model,
            n,
            extremes,
            kernel: kernel(raw, KernelFamily::Gaussian)?,
            m,
            eigenvalue_weighted,
            pgd,
            seed: seed(raw)?,
            output_dir: output_dir(raw),
            grid_points: positive_count(raw, "grid_points", 512)?,
            mc_draws: positive_count(raw, "mc_draws", 1_000_000)?,
        })
    }
}

/// Levels of a rate check, either given directly or as target numbers of
/// extremes `N` (converted with `u = (n c_α w / N)^{1/α}`).
#[derive(Debug, Clone, PartialEq)]
pub enum LevelGrid {
    Levels(Vec<f64>),
    Exceedances(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatesConfig {
    pub model: FactorModelSpec,
    pub kernel: KernelSpec,
    pub n: usize,
    pub grid: LevelGrid,
    pub replicates: usize,
    /// Allowed distance between fitted and expected slope.
    pub tolerance: f64,
    /// Bound on the cross-grid ratio of scaled medians (heavy-tail regime).
    pub median_ratio_bound: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

const RATES_KEYS: &[&str] = &[
    "alpha", "law", "loadings", "kernel", "gamma", "n", "levels", "exceedances", "replicates", "tolerance",
    "median_ratio_bound", "seed", "output_dir",
];

impl RatesConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        raw.reject_unknown(RATES_KEYS)?;
        let model = factor_model(raw, 3.0, 0.0)?;
        let grid = match (raw.get("levels"), raw.get("exceedances")) {
            (Some(_), Some(_)) => return Err(CliError::Config("levels: give either levels or exceedances, not both".into())),
            (Some(v), None) => LevelGrid::Levels(validated_grid("levels", v, true)?),
            (None, Some(v)) => LevelGrid::Exceedances(validated_grid("exceedances", v, false)?),
            (None, None) => LevelGrid::Exceedances(vec![8000.0, 4000.0, 2000.0, 1000.0, 500.0]),
        };
        Ok(Self {
            model,
            kernel: kernel(raw, KernelFamily::Gaussian)?,
            n: positive_count(raw, "n", 1_000_000)?,
            grid,
            replicates: positive_count(raw, "replicates", 20)?,
            tolerance: positive_real(raw, "tolerance", 0.3)?,
            median_ratio_bound: positive_real(raw, "median_ratio_bound", 3.0)?,
            seed: seed(raw)?,
            output_dir: output_dir(raw),
        })
    }
}

/// At least four positive values, strictly increasing levels or strictly
/// decreasing exceedance counts.
fn validated_grid(key: &str, value: &str, increasing: bool) -> Result<Vec<f64>, CliError> {
    let v = real_list(key, value)?;
    if v.len() < 4 {
        return Err(CliError::Config(format!("{key}: need at least 4 values, got {}", v.len())));
    }
    if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(CliError::Config(format!("{key}: values must be positive")));
    }
    let ordered = if increasing { v.windows(2).all(|w| w[1] > w[0]) } else { v.windows(2).all(|w| w[1] < w[0]) };
    if !ordered {
        let dir = if increasing { "increasing" } else { "decreasing" };
        return Err(CliError::Config(format!("{key}: values must be strictly {dir}")));
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DavisKahanConfig {
    pub model: FactorModelSpec,
    pub kernel: KernelSpec,
    pub n: usize,
    pub top_k: usize,
    pub m: usize,
    pub replicates: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

const DK_KEYS: &[&str] =
    &["alpha", "law", "loadings", "sigma", "kernel", "gamma", "n", "extremes", "m", "replicates", "seed", "output_dir"];

impl DavisKahanConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        raw.reject_unknown(DK_KEYS)?;
        let n = positive_count(raw, "n", 100_000)?;
        let top_k = positive_count(raw, "extremes", 500)?;
        if top_k > n {
            return Err(CliError::Config(format!("extremes: {top_k} exceeds n = {n}")));
        }
        let m = positive_count(raw, "m", 2)?;
        if m > top_k {
            return Err(CliError::Config(format!("m: {m} exceeds the number of extremes {top_k}")));
        }
        Ok(Self {
            model: factor_model(raw, 1.0, 0.0)?,
            kernel: kernel(raw, KernelFamily::Gaussian)?,
            n,
            top_k,
            m,
            replicates: positive_count(raw, "replicates", 200)?,
            seed: seed(raw)?,
            output_dir: output_dir(raw),
        })
    }
}
