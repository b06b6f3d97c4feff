use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use extremal_kpca_cli::config::{DavisKahanConfig, ExperimentConfig, RatesConfig, RawConfig};
use extremal_kpca_cli::{run_davis_kahan, run_experiment, run_rate_validation, CliError, Stage};

/// Kernel PCA on multivariate extremes: simulation studies and validation runs.
///
/// Settings come from an optional key=value file (`--config`); `--set key=value`
/// and the typed flags override it. The output directory defaults to
/// $EXTREMAL_KPCA_OUTPUT_DIR, or `extremal-kpca-output`.
#[derive(Parser)]
#[command(name = "extremal-kpca", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a model and write samples.csv and extremes.csv.
    Generate(RunArgs),
    /// Also fit kernel PCA and write the scree table and plot.
    Kpca(RunArgs),
    /// Also reconstruct preimages of every extremal angle.
    Preimage(RunArgs),
    /// Full pipeline, including the angle density for the arch model.
    Experiment(RunArgs),
    /// Log-log regression of the block perturbation norm against the level.
    Rates(RunArgs),
    /// Replicated Davis-Kahan bound checks under the factor model.
    DavisKahan(RunArgs),
    /// The ARCH(1) study: length 10^6, top 200 pairs.
    ArchDemo(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key=value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// lfm, spiked, circle or arch.
    #[arg(long)]
    model: Option<String>,
    /// gaussian or exponential.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Number of extremes kept (top-k by norm).
    #[arg(long)]
    extremes: Option<usize>,
    /// Retained components, or `auto-scree`.
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    replicates: Option<usize>,
}

impl RunArgs {
    fn raw(&self, defaults: &[(&str, &str)]) -> Result<RawConfig, CliError> {
        let mut raw = RawConfig::default();
        for (k, v) in defaults {
            raw.set(k, *v);
        }
        if let Some(path) = &self.config {
            raw.merge(RawConfig::from_file(path)?);
        }
        for pair in &self.set {
            raw.set_pair(pair)?;
        }
        let typed: [(&str, Option<String>); 10] = [
            ("seed", self.seed.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("output_dir", self.output_dir.as_ref().map(|p| p.display().to_string())),
            ("model", self.model.clone()),
            ("kernel", self.kernel.clone()),
            ("gamma", self.gamma.map(|v| v.to_string())),
            ("extremes", self.extremes.map(|v| v.to_string())),
            ("m", self.m.clone()),
            ("alpha", self.alpha.map(|v| v.to_string())),
            ("replicates", self.replicates.map(|v| v.to_string())),
        ];
        for (k, v) in typed {
            if let Some(v) = v {
                raw.set(k, v);
            }
        }
        Ok(raw)
    }
}

fn experiment(args: &RunArgs, stage: Stage, defaults: &[(&str, &str)]) -> Result<Vec<String>, CliError> {
    let raw = args.raw(defaults)?;
    let cfg = ExperimentConfig::from_raw(&raw)?;
    Ok(run_experiment(&cfg, stage, &raw)?.files)
}

fn run(cli: Cli) -> Result<Vec<String>, CliError> {
    match &cli.command {
        Command::Generate(a) => experiment(a, Stage::Generate, &[]),
        Command::Kpca(a) => experiment(a, Stage::Kpca, &[]),
        Command::Preimage(a) => experiment(a, Stage::Preimage, &[]),
        Command::Experiment(a) => experiment(a, Stage::Experiment, &[]),
        Command::ArchDemo(a) => {
            let raw = a.raw(&[("model", "arch"), ("n", "1000000")])?;
            if !raw.get("model").is_some_and(|m| m.eq_ignore_ascii_case("arch")) {
                return Err(CliError::Config("model: arch-demo runs the arch model only".into()));
            }
            let cfg = ExperimentConfig::from_raw(&raw)?;
            Ok(run_experiment(&cfg, Stage::Experiment, &raw)?.files)
        }
        Command::Rates(a) => {
            let raw = a.raw(&[])?;
            let report = run_rate_validation(&RatesConfig::from_raw(&raw)?, &raw)?;
            eprintln!(
                "regime {}: fitted slope {:.3}, expected {:.3}, pass {}",
                report.check.regime.map_or("boundary", |r| r.as_str()),
                report.check.fitted_slope,
                report.check.expected_slope,
                report.pass
            );
            Ok(report.files)
        }
        Command::DavisKahan(a) => {
            let raw = a.raw(&[])?;
            let report = run_davis_kahan(&DavisKahanConfig::from_raw(&raw)?, &raw)?;
            let (ok, checked) = report.tally();
            eprintln!("bound satisfied in {ok} of {checked} non-degenerate replicates");
            Ok(report.files)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(files) => {
            for f in files {
                println!("{f}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
