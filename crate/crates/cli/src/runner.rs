//! The experiment families behind the subcommands.

use std::f64::consts::FRAC_PI_2;

use extremal_kpca::generators::replicate_rng;
use extremal_kpca::stats::{arch_spectral_density, auto_scree_m, kde_gaussian, linspace, scree_data, AUTO_SCREE_CAP};
use extremal_kpca::theory::{davis_kahan_replicate, level_for_exceedances, rate_check, DavisKahanOutcome, RateCheck, Regime};
use extremal_kpca::{
    batch_preimages, extract_extremes, fit_kpca, gen_arch_pairs, gen_circle_model, gen_contaminated_lfm,
    gen_spiked_angular_gaussian, seeded_rng, ArchSpec, ExtremalSample, ExtremeRule, KpcaModel, Label, PreimageResult,
    ProjectionWeighting,
};
use rayon::prelude::*;

use crate::config::{DavisKahanConfig, ExperimentConfig, LevelGrid, ModelConfig, RankChoice, RatesConfig};
use crate::output::{component_names, header, num, OutputDir};
use crate::svg::{scatter_matrix, scree_plot, ScatterBlock};
use crate::CliError;

/// How far an experiment run goes; each stage includes the previous ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Kpca,
    Preimage,
    Experiment,
}

impl Stage {
    pub fn command(&self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Kpca => "kpca",
            Stage::Preimage => "preimage",
            Stage::Experiment => "experiment",
        }
    }
}

fn runtime(e: extremal_kpca::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AngleDensity {
    pub grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub theoretical: Vec<f64>,
}

#[derive(Debug)]
pub struct ExperimentReport {
    pub sample: ExtremalSample,
    pub model: Option<KpcaModel>,
    pub preimages: Vec<PreimageResult>,
    pub angle_density: Option<AngleDensity>,
    pub files: Vec<String>,
}

impl ExperimentReport {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.model.as_ref().map_or_else(Vec::new, |m| m.eigenpairs().eigenvalues().iter().copied().collect())
    }
}

struct Simulated {
    points: Vec<Vec<f64>>,
    labels: Option<Vec<Label>>,
}

fn simulate(cfg: &ExperimentConfig) -> Result<Simulated, CliError> {
    let mut rng = seeded_rng(cfg.seed);
    let labeled = match &cfg.model {
        ModelConfig::Lfm(spec) => gen_contaminated_lfm(spec, cfg.n, &mut rng),
        ModelConfig::Spiked(spec) => gen_spiked_angular_gaussian(spec, cfg.n, &mut rng),
        ModelConfig::Circle { sigma } => gen_circle_model(*sigma, cfg.n, &mut rng),
        ModelConfig::Arch => {
            let spec = ArchSpec::new(cfg.n).map_err(|e| CliError::Config(format!("n: {e}")))?;
            return Ok(Simulated { points: gen_arch_pairs(&spec, &mut rng), labels: None });
        }
    };
    Ok(Simulated { points: labeled.points, labels: Some(labeled.labels) })
}

fn label_str(sample: &ExtremalSample, i: usize) -> &'static str {
    sample.labels.as_ref().map_or("none", |l| l[i].as_str())
}

fn label_color(sample: &ExtremalSample, i: usize) -> &'static str {
    match sample.labels.as_ref().map(|l| l[i]) {
        Some(Label::Signal) => "#d62728",
        Some(Label::Noise) => "black",
        None => "#1f77b4",
    }
}

/// Angle in `[0, π/2]` of a planar point with nonnegative coordinates.
fn planar_angle(y: &[f64]) -> f64 {
    y[1].atan2(y[0])
}

pub fn run_experiment(cfg: &ExperimentConfig, stage: Stage, raw: &crate::config::RawConfig) -> Result<ExperimentReport, CliError> {
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let data = simulate(cfg)?;
    let d = data.points.first().map_or(0, Vec::len);
    let mut sample = extract_extremes(&data.points, ExtremeRule::TopK(cfg.extremes)).map_err(runtime)?;
    if let Some(labels) = &data.labels {
        sample = sample.with_labels(labels).map_err(runtime)?;
    }

    if stage == Stage::Generate {
        let mut h = header(&["source_index", "label"]);
        h.extend(component_names("x", d));
        let rows: Vec<Vec<String>> = data
            .points
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let label = data.labels.as_ref().map_or("none", |l| l[i].as_str());
                let mut row = vec![i.to_string(), label.to_string()];
                row.extend(x.iter().map(|v| num(*v)));
                row
            })
            .collect();
        out.write_csv("samples.csv", &h, &rows)?;
    }
    let mut h = header(&["source_index", "label", "radius"]);
    h.extend(component_names("y", d));
    let rows: Vec<Vec<String>> = (0..sample.len())
        .map(|i| {
            let mut row = vec![sample.source_indices[i].to_string(), label_str(&sample, i).to_string(), num(sample.radii[i])];
            row.extend(sample.angles[i].iter().map(|v| num(*v)));
            row
        })
        .collect();
    out.write_csv("extremes.csv", &h, &rows)?;

    let mut report = ExperimentReport { sample, model: None, preimages: Vec::new(), angle_density: None, files: Vec::new() };
    if stage >= Stage::Kpca {
        let model = fit_model(cfg, &report.sample)?;
        let scree = scree_data(model.eigenpairs(), report.sample.len());
        let rows: Vec<Vec<String>> = scree.iter().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
        out.write_csv("scree.csv", &header(&["index", "eigenvalue"]), &rows)?;
        let top: Vec<(usize, f64)> = scree.into_iter().take(20).collect();
        out.write_text("scree.svg", &scree_plot(&top, &format!("Largest eigenvalues (m = {})", model.m())))?;
        report.model = Some(model);
    }
    if stage >= Stage::Preimage {
        let model = report.model.as_ref().expect("fitted above");
        let batch = batch_preimages(model, &report.sample.angles, &cfg.pgd);
        if let Some((i, e)) = batch.errors.first() {
            return Err(CliError::Runtime(format!("preimage of extreme {i} failed: {e}")));
        }
        report.preimages = batch.results.into_iter().map(|r| r.expect("no errors reported")).collect();
        let mut h = header(&["source_index"]);
        h.extend(component_names("p", d));
        h.extend(header(&["iterations", "converged", "objective"]));
        let rows: Vec<Vec<String>> = report
            .preimages
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let mut row = vec![report.sample.source_indices[i].to_string()];
                row.extend(r.preimage.iter().map(|v| num(*v)));
                row.extend([r.iterations.to_string(), r.converged.to_string(), num(r.final_objective)]);
                row
            })
            .collect();
        out.write_csv("preimages.csv", &h, &rows)?;

        let colors: Vec<&str> = (0..report.sample.len()).map(|i| label_color(&report.sample, i)).collect();
        let preimage_points: Vec<Vec<f64>> = report.preimages.iter().map(|r| r.preimage.clone()).collect();
        let blocks = [
            ScatterBlock { title: "Extremal angles", points: &report.sample.angles, colors: &colors },
            ScatterBlock { title: "Preimages", points: &preimage_points, colors: &colors },
        ];
        if let Some(svg) = scatter_matrix(&blocks, &component_names("y", d)) {
            out.write_text("scatter.svg", &svg)?;
        }
    }
    if stage >= Stage::Experiment && matches!(cfg.model, ModelConfig::Arch) {
        let density = arch_angle_density(cfg, &report.sample)?;
        let rows: Vec<Vec<String>> = (0..density.grid.len())
            .map(|i| vec![num(density.grid[i]), num(density.empirical[i]), num(density.theoretical[i])])
            .collect();
        out.write_csv("angle_density.csv", &header(&["grid", "empirical_density", "theoretical_density"]), &rows)?;
        report.angle_density = Some(density);
    }
    out.write_manifest(stage.command(), cfg.seed, raw.entries(), &format!("{cfg:?}"))?;
    report.files = out.written().to_vec();
    Ok(report)
}

fn fit_model(cfg: &ExperimentConfig, sample: &ExtremalSample) -> Result<KpcaModel, CliError> {
    let m0 = match cfg.m {
        RankChoice::Fixed(m) => m,
        RankChoice::AutoScree => 1,
    };
    let mut model = fit_kpca(&cfg.kernel, &sample.angles, m0.min(sample.len())).map_err(runtime)?;
    if cfg.m == RankChoice::AutoScree {
        let ev: Vec<f64> = model.eigenpairs().eigenvalues().iter().copied().collect();
        let m = auto_scree_m(&ev).clamp(1, AUTO_SCREE_CAP.min(sample.len()));
        model = model.with_rank(m).map_err(runtime)?;
    }
    if cfg.eigenvalue_weighted {
        model = model.with_weighting(ProjectionWeighting::EigenvalueWeighted);
    }
    Ok(model)
}

fn arch_angle_density(cfg: &ExperimentConfig, sample: &ExtremalSample) -> Result<AngleDensity, CliError> {
    let grid = linspace(0.0, FRAC_PI_2, cfg.grid_points);
    let angles: Vec<f64> = sample.angles.iter().map(|y| planar_angle(y)).collect();
    let empirical = kde_gaussian(&angles, &grid).map_err(runtime)?;
    // the Monte Carlo density draws from its own stream
    let theoretical = arch_spectral_density(cfg.mc_draws, &grid, &mut replicate_rng(cfg.seed, 1)).map_err(runtime)?;
    Ok(AngleDensity { grid, empirical: empirical.density, theoretical: theoretical.density })
}

#[derive(Debug)]
pub struct RateReport {
    pub check: RateCheck,
    pub median_ratio: f64,
    pub pass: bool,
    pub files: Vec<String>,
}

pub fn run_rate_validation(cfg: &RatesConfig, raw: &crate::config::RawConfig) -> Result<RateReport, CliError> {
    let u_grid = match &cfg.grid {
        LevelGrid::Levels(v) => v.clone(),
        LevelGrid::Exceedances(counts) => counts
            .iter()
            .map(|&c| level_for_exceedances(&cfg.model, cfg.n, c))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("exceedances: {e}")))?,
    };
    let check = rate_check(&cfg.model, &cfg.kernel, cfg.n, &u_grid, cfg.replicates, &mut seeded_rng(cfg.seed)).map_err(runtime)?;
    let medians = check.scaled_medians();
    let hi = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
    let median_ratio = hi / lo;
    let pass = match check.regime {
        Some(Regime::HeavyTail) => median_ratio < cfg.median_ratio_bound,
        Some(_) => check.passes(cfg.tolerance),
        None => false,
    };

    let mut out = OutputDir::create(&cfg.output_dir)?;
    let mut rows = Vec::new();
    for (i, &u) in check.u_grid.iter().enumerate() {
        for (r, &v) in check.per_replicate[i].iter().enumerate() {
            rows.push(vec![num(u), r.to_string(), num(v), num(check.scaled(u, v))]);
        }
    }
    out.write_csv("rates.csv", &header(&["u", "replicate", "frobenius", "scaled_statistic"]), &rows)?;
    let regime = check.regime.map_or("boundary", |r| r.as_str());
    let summary = vec![vec![
        regime.to_string(),
        num(check.expected_slope),
        num(check.fitted_slope),
        pass.to_string(),
        num(check.alpha),
        check.n.to_string(),
        check.replicates.to_string(),
        num(median_ratio),
        check.dropped_levels.len().to_string(),
    ]];
    out.write_csv(
        "summary.csv",
        &header(&[
            "regime",
            "expected_slope",
            "fitted_slope",
            "pass",
            "alpha",
            "n",
            "replicates",
            "scaled_median_ratio",
            "dropped_levels",
        ]),
        &summary,
    )?;
    out.write_manifest("rates", cfg.seed, raw.entries(), &format!("{cfg:?}"))?;
    Ok(RateReport { check, median_ratio, pass, files: out.written().to_vec() })
}

#[derive(Debug)]
pub struct DavisKahanReport {
    pub outcomes: Vec<DavisKahanOutcome>,
    pub files: Vec<String>,
}

impl DavisKahanReport {
    /// `(satisfied, non-degenerate)` replicate counts.
    pub fn tally(&self) -> (usize, usize) {
        let checked: Vec<bool> = self.outcomes.iter().filter_map(|o| o.satisfied).collect();
        (checked.iter().filter(|&&s| s).count(), checked.len())
    }
}

pub fn run_davis_kahan(cfg: &DavisKahanConfig, raw: &crate::config::RawConfig) -> Result<DavisKahanReport, CliError> {
    let outcomes: Vec<DavisKahanOutcome> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(cfg.seed, r as u64);
            davis_kahan_replicate(&cfg.model, &cfg.kernel, cfg.n, cfg.top_k, cfg.m, &mut rng)
        })
        .collect::<Result<_, _>>()
        .map_err(runtime)?;
    let mut out = OutputDir::create(&cfg.output_dir)?;
    let rows: Vec<Vec<String>> = outcomes
        .iter()
        .enumerate()
        .map(|(r, o)| {
            vec![
                r.to_string(),
                o.bound.map_or_else(|| "n/a".to_string(), num),
                num(o.residual),
                num(o.gap),
                o.satisfied.map_or_else(|| "n/a".to_string(), |s| s.to_string()),
            ]
        })
        .collect();
    out.write_csv("dk.csv", &header(&["replicate", "bound", "aligned_residual", "gap", "satisfied"]), &rows)?;
    out.write_manifest("davis-kahan", cfg.seed, raw.entries(), &format!("{cfg:?}"))?;
    Ok(DavisKahanReport { outcomes, files: out.written().to_vec() })
}
