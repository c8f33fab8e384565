//! Command-line front end for the loopcoords pipeline.
//!
//! Verbs: `synth` (generate a benchmark cloud), `coords` (uncorrected
//! coordinate), `coords-corrected` (ensemble coordinate), `eval-mi`
//! (paired mutual-information comparison), `bench` (wall-time table).
//! Exit codes: 0 success, 2 no loop detected, 3 degenerate ensemble,
//! 1 anything else.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use loopcoords::pipeline::{
    self, InputSource, PipelineConfig, PipelineError, RunArtifacts,
};
use loopcoords::prep;

#[derive(Parser)]
#[command(
    name = "loopcoords",
    version,
    about = "Robust circular coordinates for recurrent point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic unbalanced circle or ellipse as CSV.
    Synth(SynthArgs),
    /// Compute the single-shot circular coordinate on the full cloud.
    Coords(RunArgs),
    /// Compute the subsample-ensemble corrected circular coordinate.
    CoordsCorrected(RunArgs),
    /// Compare normalized mutual information of both modes over replicates.
    EvalMi(EvalMiArgs),
    /// Time both modes repeatedly on identical input.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Circle,
    Ellipse,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, default_value = "circle")]
    kind: SynthKind,
    /// Number of points.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// von Mises concentration of the angles (0 = uniform).
    #[arg(long, default_value_t = 1.3)]
    dispersion: f64,
    #[arg(long, default_value_t = 1.0)]
    radius_mean: f64,
    #[arg(long, default_value_t = 0.1)]
    radius_sd: f64,
    /// x-axis dilation (ellipse only).
    #[arg(long, default_value_t = 1.6)]
    dilation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path (includes the true_parameter column).
    #[arg(long)]
    out: PathBuf,
}

/// Config plus per-flag overrides shared by the run verbs.
#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags below override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input cloud CSV (alternative to a config file).
    #[arg(long, conflicts_with = "config")]
    input_csv: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of subsamples (corrected mode).
    #[arg(long)]
    subsamples: Option<usize>,
    /// Expected subsample size (corrected mode).
    #[arg(long)]
    target_size: Option<usize>,
    /// Density bandwidth override (default: Scott's rule).
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Dimension fed to Scott's rule (default: ambient).
    #[arg(long)]
    intrinsic_dim: Option<usize>,
    /// Cap on the Rips build ceiling.
    #[arg(long)]
    max_scale: Option<f64>,
    /// Position of the working scale inside the bar, in [0, 1].
    #[arg(long)]
    scale_fraction: Option<f64>,
    /// Gaussian extension rate (default: 1 / bandwidth^2).
    #[arg(long)]
    kernel_rate: Option<f64>,
    /// Neighbor count(s) for the MI evaluation.
    #[arg(long = "eval-k")]
    eval_ks: Vec<usize>,
    /// Directory for coordinate CSV, barcode JSON, and report JSON.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct EvalMiArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
}

impl RunArgs {
    fn into_config(self) -> Result<PipelineConfig, PipelineError> {
        let mut config = match (&self.config, &self.input_csv) {
            (Some(path), _) => PipelineConfig::from_toml_path(path)?,
            (None, Some(path)) => PipelineConfig::new(InputSource::Csv {
                path: path.clone(),
            }),
            (None, None) => {
                return Err(PipelineError::Config(
                    "provide --config or --input-csv".into(),
                ))
            }
        };
        if let Some(v) = self.seed {
            config.seed = v;
        }
        if let Some(v) = self.subsamples {
            config.subsample_count = v;
        }
        if let Some(v) = self.target_size {
            config.target_size = v;
        }
        if let Some(v) = self.bandwidth {
            config.bandwidth = Some(v);
        }
        if let Some(v) = self.intrinsic_dim {
            config.intrinsic_dim = Some(v);
        }
        if let Some(v) = self.max_scale {
            config.max_scale = Some(v);
        }
        if let Some(v) = self.scale_fraction {
            config.scale_fraction = v;
        }
        if let Some(v) = self.kernel_rate {
            config.kernel_rate = Some(v);
        }
        if !self.eval_ks.is_empty() {
            config.eval_ks = self.eval_ks;
        }
        if let Some(v) = self.out_dir {
            config.output_dir = Some(v);
        }
        config.validate()?;
        Ok(config)
    }
}

fn run_synth(args: SynthArgs) -> Result<(), PipelineError> {
    let sample = match args.kind {
        SynthKind::Circle => prep::gen_unbalanced_circle(
            args.n,
            args.dispersion,
            args.radius_mean,
            args.radius_sd,
            args.seed,
        )?,
        SynthKind::Ellipse => prep::gen_unbalanced_ellipse(
            args.n,
            args.dispersion,
            args.radius_mean,
            args.radius_sd,
            args.dilation,
            args.seed,
        )?,
    };
    let file = std::fs::File::create(&args.out)?;
    sample.cloud.write_csv(file, Some(&sample.true_parameter))?;
    println!(
        "wrote {} points ({} columns + true_parameter) to {}",
        sample.cloud.len(),
        sample.cloud.dim(),
        args.out.display()
    );
    Ok(())
}

fn print_run(artifacts: &RunArtifacts) {
    let report = &artifacts.report;
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    for eval in &report.evaluations {
        let mut line = format!(
            "{} | n={} k={} MI={:.4} nats (normalized {:.4})",
            report.mode.as_str(),
            eval.n,
            eval.k,
            eval.mi,
            eval.mi_norm
        );
        if let Some(rmse) = eval.rmse_aligned {
            line.push_str(&format!(" | RMSE vs truth {rmse:.4} rad"));
        }
        if let Some(w) = eval.winding {
            line.push_str(&format!(" | winding {w}"));
        }
        println!("{line}");
    }
    println!(
        "{} | wall {:.3}s",
        report.mode.as_str(),
        report.wall_seconds
    );
    if let Some(path) = &report.coordinate_path {
        println!("coordinates: {}", path.display());
    }
    if let Some(path) = &report.barcode_path {
        println!("barcode: {}", path.display());
    }
    if let Some(path) = &artifacts.report_path {
        println!("report: {}", path.display());
    }
}

fn dispatch(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Synth(args) => run_synth(args),
        Command::Coords(args) => {
            let config = args.into_config()?;
            let artifacts = pipeline::run_uncorrected(&config)?;
            print_run(&artifacts);
            Ok(())
        }
        Command::CoordsCorrected(args) => {
            let config = args.into_config()?;
            let artifacts = pipeline::run_corrected(&config)?;
            print_run(&artifacts);
            Ok(())
        }
        Command::EvalMi(args) => {
            let config = args.run.into_config()?;
            let comparison = pipeline::mi_compare(&config, args.replicates)?;
            println!("{}", serde_json::to_string_pretty(&comparison)?);
            Ok(())
        }
        Command::Bench(args) => {
            let config = args.run.into_config()?;
            let report = pipeline::bench(&config, args.repeats)?;
            println!(
                "uncorrected: min {:.3}s median {:.3}s over {} repeats",
                report.uncorrected.min, report.uncorrected.median, report.repeats
            );
            println!(
                "corrected:   min {:.3}s median {:.3}s over {} repeats",
                report.corrected.min, report.corrected.median, report.repeats
            );
            println!("min ratio (corrected / uncorrected): {:.3}", report.min_ratio);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
