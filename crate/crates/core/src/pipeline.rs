//! End-to-end orchestration: declarative config, the single-shot
//! (uncorrected) coordinate, the subsample-ensemble (corrected) coordinate,
//! paired mutual-information comparison, and wall-time benchmarks.
//!
//! Both modes consume the same input and emit schema-identical artifacts:
//! a coordinates CSV (`point_index, angle_radians, flags`), a barcode JSON,
//! and a report JSON carrying the fully resolved configuration for
//! provenance. Runs are deterministic for a fixed master seed regardless
//! of the thread schedule.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::align::{self, AlignError, AlignmentResult, HillClimbParams};
use crate::circular::{self, wrap_angle, CircularCoordinate, CoordFlag};
use crate::cloud::{CloudError, PointCloud};
use crate::density::{self, DensityError, MIN_SUBSAMPLE_POINTS};
use crate::evaluate::{self, EvalError, EvaluationRecord, MetricSample};
use crate::persistence::{self, BarSelectParams, PersistenceError};
use crate::prep::{self, PrepError};
use crate::rips::{self, RipsError};
use crate::stream;

/// Salt separating the subsample draw stream from input synthesis.
const SUBSAMPLE_SALT: u64 = 0x5355_4253_414d_504c;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Persistence(#[from] PersistenceError),
    #[error(
        "degenerate ensemble: only {survivors} of {total} subsamples produced \
         a coordinate (need at least 2); failures: {}",
        format_failures(failures)
    )]
    DegenerateEnsemble {
        survivors: usize,
        total: usize,
        /// (subsample index, diagnostic) for every dropped subsample.
        failures: Vec<(usize, String)>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Rips(#[from] RipsError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Prep(#[from] PrepError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("csv artifact: {0}")]
    CsvArtifact(#[from] csv::Error),
}

fn format_failures(failures: &[(usize, String)]) -> String {
    failures
        .iter()
        .map(|(i, msg)| format!("[{i}] {msg}"))
        .collect::<Vec<_>>()
        .join("; ")
}

impl PipelineError {
    /// Process exit code: 2 no-loop-detected, 3 degenerate ensemble,
    /// 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Persistence(PersistenceError::NoLoopDetected) => 2,
            PipelineError::DegenerateEnsemble { .. } => 3,
            _ => 1,
        }
    }
}

/// Where the points come from. Exactly one variant, enforced by parsing.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    /// Unbalanced synthetic circle: von Mises angles, normal radii.
    Circle {
        n: usize,
        #[serde(default = "default_dispersion")]
        dispersion: f64,
        #[serde(default = "default_radius_mean")]
        radius_mean: f64,
        #[serde(default = "default_radius_sd")]
        radius_sd: f64,
    },
    /// The circle pushed through (x, y) -> (dilation * x, y).
    Ellipse {
        n: usize,
        #[serde(default = "default_dispersion")]
        dispersion: f64,
        #[serde(default = "default_radius_mean")]
        radius_mean: f64,
        #[serde(default = "default_radius_sd")]
        radius_sd: f64,
        dilation: f64,
    },
    /// Headered CSV of coordinates, optional `true_parameter` column.
    Csv { path: PathBuf },
}

fn default_dispersion() -> f64 {
    1.3
}
fn default_radius_mean() -> f64 {
    1.0
}
fn default_radius_sd() -> f64 {
    0.1
}
fn default_subsample_count() -> usize {
    30
}
fn default_target_size() -> usize {
    50
}
fn default_primes() -> Vec<u32> {
    vec![47, 53, 59]
}
fn default_scale_fraction() -> f64 {
    0.5
}
fn default_eval_ks() -> Vec<usize> {
    vec![3]
}

/// Everything a run needs, parseable from TOML. Missing keys take the
/// documented defaults; unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSource,
    /// Density bandwidth; defaults to Scott's rule on the input cloud.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Dimension fed to Scott's rule; defaults to the ambient dimension.
    #[serde(default)]
    pub intrinsic_dim: Option<usize>,
    /// Number of subsamples drawn for the corrected mode.
    #[serde(default = "default_subsample_count")]
    pub subsample_count: usize,
    /// Expected subsample size.
    #[serde(default = "default_target_size")]
    pub target_size: usize,
    /// Cap on the Rips build ceiling; the ceiling is the cloud's enclosing
    /// radius, lowered to this cap when set.
    #[serde(default)]
    pub max_scale: Option<f64>,
    /// Coefficient primes, in retry order for the integer lift.
    #[serde(default = "default_primes")]
    pub primes: Vec<u32>,
    /// Working scale sits at birth + fraction * (death - birth).
    #[serde(default = "default_scale_fraction")]
    pub scale_fraction: f64,
    /// Gaussian weight rate for extending subsample coordinates; defaults
    /// to 1 / bandwidth^2.
    #[serde(default)]
    pub kernel_rate: Option<f64>,
    #[serde(default)]
    pub hill_climb: HillClimbParams,
    /// Neighbor counts for the MI evaluation, one record per entry.
    #[serde(default = "default_eval_ks")]
    pub eval_ks: Vec<usize>,
    /// Master seed: drives input synthesis and the subsample draws.
    #[serde(default)]
    pub seed: u64,
    /// When set, artifacts are written here.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl PipelineConfig {
    /// A config with every knob at its default for the given input.
    pub fn new(input: InputSource) -> Self {
        Self {
            input,
            bandwidth: None,
            intrinsic_dim: None,
            subsample_count: default_subsample_count(),
            target_size: default_target_size(),
            max_scale: None,
            primes: default_primes(),
            scale_fraction: default_scale_fraction(),
            kernel_rate: None,
            hill_climb: HillClimbParams::default(),
            eval_ks: default_eval_ks(),
            seed: 0,
            output_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        let config: PipelineConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_path(path: &Path) -> Result<Self, PipelineError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if self.primes.is_empty() {
            return bad("prime list must not be empty".into());
        }
        if !(0.0..=1.0).contains(&self.scale_fraction) {
            return bad(format!(
                "scale_fraction must lie in [0, 1], got {}",
                self.scale_fraction
            ));
        }
        if self.target_size == 0 {
            return bad("target_size must be positive".into());
        }
        if self.eval_ks.is_empty() || self.eval_ks.contains(&0) {
            return bad("eval_ks must be a non-empty list of positive counts".into());
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0) {
                return bad(format!("bandwidth must be positive, got {b}"));
            }
        }
        if let Some(r) = self.kernel_rate {
            if !(r > 0.0) {
                return bad(format!("kernel_rate must be positive, got {r}"));
            }
        }
        if let Some(s) = self.max_scale {
            if !(s > 0.0) || !s.is_finite() {
                return bad(format!("max_scale must be positive and finite, got {s}"));
            }
        }
        match self.input {
            InputSource::Circle { n, .. } | InputSource::Ellipse { n, .. } if n < 2 => {
                bad(format!("synthetic input needs n >= 2, got {n}"))
            }
            _ => Ok(()),
        }
    }
}

/// The cloud plus the ground-truth parameter when the source provides one.
#[derive(Debug, Clone)]
pub struct LoadedInput {
    pub cloud: PointCloud,
    pub truth: Option<Vec<f64>>,
}

pub fn load_input(source: &InputSource, seed: u64) -> Result<LoadedInput, PipelineError> {
    match source {
        InputSource::Circle {
            n,
            dispersion,
            radius_mean,
            radius_sd,
        } => {
            let s = prep::gen_unbalanced_circle(*n, *dispersion, *radius_mean, *radius_sd, seed)?;
            Ok(LoadedInput {
                cloud: s.cloud,
                truth: Some(s.true_parameter),
            })
        }
        InputSource::Ellipse {
            n,
            dispersion,
            radius_mean,
            radius_sd,
            dilation,
        } => {
            let s = prep::gen_unbalanced_ellipse(
                *n,
                *dispersion,
                *radius_mean,
                *radius_sd,
                *dilation,
                seed,
            )?;
            Ok(LoadedInput {
                cloud: s.cloud,
                truth: Some(s.true_parameter),
            })
        }
        InputSource::Csv { path } => {
            let (cloud, truth) = PointCloud::read_csv_path(path)?;
            Ok(LoadedInput { cloud, truth })
        }
    }
}

/// One bar, JSON-safe (an essential class has `death: null`).
#[derive(Debug, Clone, Serialize)]
pub struct BarSummary {
    pub birth: f64,
    pub death: Option<f64>,
    pub persistence: Option<f64>,
}

impl BarSummary {
    fn from_bar(bar: &persistence::PersistenceBar) -> Self {
        let finite = bar.death.is_finite();
        Self {
            birth: bar.birth,
            death: finite.then_some(bar.death),
            persistence: finite.then_some(bar.persistence()),
        }
    }
}

/// Barcode and scale bookkeeping for one persistence run.
#[derive(Debug, Clone, Serialize)]
pub struct BarcodeRecord {
    /// Sorted by persistence (descending), then birth.
    pub bars: Vec<BarSummary>,
    /// Index of the selected bar in `bars`.
    pub selected: usize,
    /// Working scale the cocycle was lifted and smoothed at.
    pub scale: f64,
    /// Rips build ceiling (enclosing radius, lowered to the config cap).
    pub max_scale: f64,
    /// Coefficient prime that produced the successful lift.
    pub prime: u32,
    pub smallness_warning: bool,
    pub multiplicity_warning: bool,
    /// Median 3rd-nearest-neighbor distance of the processed cloud.
    pub noise_scale: f64,
    pub harmonic_converged: bool,
    pub harmonic_iterations: usize,
}

/// Outcome of one persistence-to-coordinate attempt. The uncorrected mode
/// has exactly one entry (the full cloud); the corrected mode has one per
/// subsample, failures carrying their diagnostic instead of a barcode.
#[derive(Debug, Clone, Serialize)]
pub struct SubsampleRun {
    pub index: usize,
    pub size: usize,
    pub barcode: Option<BarcodeRecord>,
    pub error: Option<String>,
}

/// Alignment facts worth reporting (the full transform list stays in
/// [`RunArtifacts`]).
#[derive(Debug, Clone, Serialize)]
pub struct AlignmentSummary {
    pub survivors: usize,
    pub dropped: usize,
    pub final_loss: f64,
    /// Hill-climb iterations that accepted at least one move.
    pub iterations: usize,
    pub converged: bool,
    pub degenerate_points: usize,
}

/// Parameters that were filled in at run time, echoed for provenance.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedParams {
    /// Rips ceiling used for the full-cloud run (uncorrected mode).
    pub max_scale: Option<f64>,
    /// Density bandwidth (corrected mode).
    pub bandwidth: Option<f64>,
    /// Extension rate (corrected mode).
    pub kernel_rate: Option<f64>,
    /// Dimension fed to Scott's rule (corrected mode).
    pub intrinsic_dim: Option<usize>,
    /// Seed of the subsample draw stream (corrected mode).
    pub subsample_seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Uncorrected,
    Corrected,
}

impl RunMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunMode::Uncorrected => "uncorrected",
            RunMode::Corrected => "corrected",
        }
    }
}

/// The report JSON: everything needed to audit one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub mode: RunMode,
    pub coordinate_path: Option<PathBuf>,
    pub barcode_path: Option<PathBuf>,
    /// One record per entry of `eval_ks`.
    pub evaluations: Vec<EvaluationRecord>,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
    pub alignment: Option<AlignmentSummary>,
    pub resolved: ResolvedParams,
    pub config: PipelineConfig,
}

/// In-memory results of one run; `report` is what lands on disk.
#[derive(Debug)]
pub struct RunArtifacts {
    pub coordinate: CircularCoordinate,
    pub subsample_runs: Vec<SubsampleRun>,
    pub alignment: Option<AlignmentResult>,
    pub report: RunReport,
    pub report_path: Option<PathBuf>,
}

/// Persistence -> bar -> lift -> harmonic smooth -> circle map, on one
/// cloud. `domain` names the parent index of each vertex; both run modes
/// are built from this step.
pub fn single_coordinate(
    cloud: &PointCloud,
    domain: Vec<u32>,
    config: &PipelineConfig,
) -> Result<(CircularCoordinate, BarcodeRecord), PipelineError> {
    let enclosing = cloud.enclosing_radius();
    let max_scale = config.max_scale.map_or(enclosing, |cap| cap.min(enclosing));
    let filt = rips::build_rips(cloud, max_scale, rips::DEFAULT_TRIANGLE_CAP)?;
    let prime = config.primes[0];
    let bars = persistence::persistent_cohomology_h1(&filt, prime)?;
    let selection = persistence::select_bar(&bars, cloud, &BarSelectParams::default())?;
    let bar = &bars[selection.index];
    let scale = persistence::choose_scale(bar, max_scale, config.scale_fraction);
    let lifted = persistence::lift_cocycle(bar, &filt, scale, &config.primes)?;
    let edges: Vec<(u32, u32)> = filt.edges()[..filt.edges_up_to(scale)]
        .iter()
        .map(|e| (e.u, e.v))
        .collect();
    let rep = circular::harmonic_smooth(&lifted, &edges, cloud.len());
    let coordinate = circular::to_circle(&rep, &domain);
    let barcode = BarcodeRecord {
        bars: bars.iter().map(BarSummary::from_bar).collect(),
        selected: selection.index,
        scale,
        max_scale,
        prime: lifted.prime,
        smallness_warning: selection.smallness_warning,
        multiplicity_warning: selection.multiplicity_warning,
        noise_scale: selection.noise_scale,
        harmonic_converged: rep.converged,
        harmonic_iterations: rep.iterations,
    };
    Ok((coordinate, barcode))
}

fn selection_warnings(tag: &str, barcode: &BarcodeRecord, warnings: &mut Vec<String>) {
    if barcode.smallness_warning {
        warnings.push(format!(
            "{tag}: selected bar dies at {:.4}, below 2x the sampling noise scale {:.4}; \
             the loop may be an artifact",
            barcode.bars[barcode.selected].death.unwrap_or(f64::NAN),
            barcode.noise_scale
        ));
    }
    if barcode.multiplicity_warning {
        warnings.push(format!(
            "{tag}: a runner-up bar has at least half the selected bar's persistence; \
             the data may carry more than one loop"
        ));
    }
    if !barcode.harmonic_converged {
        warnings.push(format!(
            "{tag}: harmonic smoothing hit its iteration cap before reaching tolerance"
        ));
    }
}

/// MI (vs truth when present, else vs the ambient cloud), RMSE and winding
/// vs truth when present; one record per k.
fn evaluate_coordinate(
    coordinate: &CircularCoordinate,
    input: &LoadedInput,
    eval_ks: &[usize],
) -> Result<Vec<EvaluationRecord>, PipelineError> {
    let truth_coord = input.truth.as_ref().map(|t| CircularCoordinate {
        angles: t.iter().map(|&a| wrap_angle(a)).collect(),
        domain: coordinate.domain.clone(),
        flags: vec![CoordFlag::Ok; t.len()],
    });
    let (rmse_aligned, winding) = match &truth_coord {
        Some(truth) => {
            let rmse = evaluate::circular_rmse_aligned(coordinate, truth)?;
            // Winding along the angular ordering of the truth, closed.
            let mut order: Vec<usize> = (0..truth.len()).collect();
            order.sort_by(|&a, &b| {
                truth.angles[a]
                    .partial_cmp(&truth.angles[b])
                    .expect("angles are never NaN")
            });
            order.push(order[0]);
            (Some(rmse), Some(evaluate::winding_number(coordinate, &order)))
        }
        None => (None, None),
    };

    let xs = MetricSample::Circular(&coordinate.angles);
    let mut records = Vec::with_capacity(eval_ks.len());
    for &k in eval_ks {
        let mi = match &truth_coord {
            Some(truth) => evaluate::ksg_mi(&xs, &MetricSample::Circular(&truth.angles), k)?,
            None => evaluate::ksg_mi(&xs, &MetricSample::Euclidean(&input.cloud), k)?,
        };
        records.push(EvaluationRecord {
            mi: mi.value,
            mi_max: evaluate::ksg_max(mi.sample_count, k),
            mi_norm: mi.normalized,
            k,
            n: mi.sample_count,
            rmse_aligned,
            winding,
        });
    }
    Ok(records)
}

pub fn write_coordinate_csv<W: std::io::Write>(
    coordinate: &CircularCoordinate,
    writer: W,
) -> Result<(), PipelineError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["point_index", "angle_radians", "flags"])?;
    for i in 0..coordinate.len() {
        wtr.write_record([
            coordinate.domain[i].to_string(),
            format!("{}", coordinate.angles[i]),
            coordinate.flags[i].as_str().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes coordinate CSV, barcode JSON, and report JSON into
/// `config.output_dir`, updating the report's path fields.
fn emit_artifacts(
    mode: RunMode,
    coordinate: &CircularCoordinate,
    runs: &[SubsampleRun],
    report: &mut RunReport,
) -> Result<Option<PathBuf>, PipelineError> {
    let Some(dir) = report.config.output_dir.clone() else {
        return Ok(None);
    };
    fs::create_dir_all(&dir)?;
    let coord_path = dir.join(format!("{}_coordinates.csv", mode.as_str()));
    write_coordinate_csv(coordinate, fs::File::create(&coord_path)?)?;
    let barcode_path = dir.join(format!("{}_barcode.json", mode.as_str()));
    serde_json::to_writer_pretty(fs::File::create(&barcode_path)?, runs)?;
    report.coordinate_path = Some(coord_path);
    report.barcode_path = Some(barcode_path);
    let report_path = dir.join(format!("{}_report.json", mode.as_str()));
    serde_json::to_writer_pretty(fs::File::create(&report_path)?, report)?;
    Ok(Some(report_path))
}

/// Full-cloud Rips -> PH1 -> bar -> lift -> smooth -> coordinate.
pub fn run_uncorrected(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    config.validate()?;
    let start = Instant::now();
    let input = load_input(&config.input, config.seed)?;
    let n = input.cloud.len();
    let domain: Vec<u32> = (0..n as u32).collect();
    let (coordinate, barcode) = single_coordinate(&input.cloud, domain, config)?;

    let mut warnings = Vec::new();
    selection_warnings("full cloud", &barcode, &mut warnings);
    let evaluations = evaluate_coordinate(&coordinate, &input, &config.eval_ks)?;
    let resolved = ResolvedParams {
        max_scale: Some(barcode.max_scale),
        bandwidth: None,
        kernel_rate: None,
        intrinsic_dim: None,
        subsample_seed: None,
    };
    let subsample_runs = vec![SubsampleRun {
        index: 0,
        size: n,
        barcode: Some(barcode),
        error: None,
    }];
    let mut report = RunReport {
        mode: RunMode::Uncorrected,
        coordinate_path: None,
        barcode_path: None,
        evaluations,
        wall_seconds: start.elapsed().as_secs_f64(),
        warnings,
        alignment: None,
        resolved,
        config: config.clone(),
    };
    let report_path = emit_artifacts(RunMode::Uncorrected, &coordinate, &subsample_runs, &mut report)?;
    Ok(RunArtifacts {
        coordinate,
        subsample_runs,
        alignment: None,
        report,
        report_path,
    })
}

/// Density-equalized subsample ensemble -> per-subsample coordinates ->
/// extension -> alignment -> centroid coordinate.
pub fn run_corrected(config: &PipelineConfig) -> Result<RunArtifacts, PipelineError> {
    config.validate()?;
    if config.subsample_count < 2 {
        return Err(PipelineError::Config(format!(
            "corrected mode needs at least 2 subsamples, got {}",
            config.subsample_count
        )));
    }
    let start = Instant::now();
    let input = load_input(&config.input, config.seed)?;
    let cloud = &input.cloud;

    let bandwidth = match config.bandwidth {
        Some(b) => b,
        None => density::scott_bandwidth(cloud, config.intrinsic_dim.unwrap_or(cloud.dim()))?,
    };
    let kernel_rate = config
        .kernel_rate
        .unwrap_or(1.0 / (bandwidth * bandwidth));
    let field = density::estimate_density(cloud, bandwidth)?;
    let acceptance = density::make_acceptance(&field, config.target_size)?;
    let subsample_seed = stream::mix_key(&[config.seed, SUBSAMPLE_SALT]);
    let set = density::rejection_sample(cloud, &acceptance, config.subsample_count, subsample_seed)?;

    // Pure per-subsample tasks, collected by index: the outcome vector is
    // identical whatever the worker schedule.
    let outcomes: Vec<(SubsampleRun, Option<CircularCoordinate>)> = set
        .subsamples
        .par_iter()
        .enumerate()
        .map(|(index, indices)| {
            let size = indices.len();
            if size < MIN_SUBSAMPLE_POINTS {
                let run = SubsampleRun {
                    index,
                    size,
                    barcode: None,
                    error: Some(format!(
                        "subsample has {size} points, below the minimum {MIN_SUBSAMPLE_POINTS}"
                    )),
                };
                return (run, None);
            }
            let sub = cloud.select(indices);
            let domain: Vec<u32> = indices.iter().map(|&z| z as u32).collect();
            match single_coordinate(&sub, domain, config) {
                Ok((coord, barcode)) => {
                    let extended = circular::extend_coordinate(&coord, cloud, kernel_rate);
                    let run = SubsampleRun {
                        index,
                        size,
                        barcode: Some(barcode),
                        error: None,
                    };
                    (run, Some(extended))
                }
                Err(e) => {
                    let run = SubsampleRun {
                        index,
                        size,
                        barcode: None,
                        error: Some(e.to_string()),
                    };
                    (run, None)
                }
            }
        })
        .collect();

    let mut warnings = Vec::new();
    let mut survivors = Vec::new();
    let mut failures = Vec::new();
    let mut subsample_runs = Vec::with_capacity(outcomes.len());
    for (run, coord) in outcomes {
        match coord {
            Some(c) => {
                if let Some(barcode) = &run.barcode {
                    selection_warnings(&format!("subsample {}", run.index), barcode, &mut warnings);
                }
                let degenerate = c
                    .flags
                    .iter()
                    .filter(|f| **f == CoordFlag::DegenerateExtension)
                    .count();
                if degenerate > 0 {
                    warnings.push(format!(
                        "subsample {}: {degenerate} points fell back to nearest-neighbor extension",
                        run.index
                    ));
                }
                survivors.push(c);
            }
            None => {
                let msg = run.error.clone().unwrap_or_else(|| "unknown".into());
                warnings.push(format!("dropped subsample {}: {msg}", run.index));
                failures.push((run.index, msg));
            }
        }
        subsample_runs.push(run);
    }
    if survivors.len() < 2 {
        return Err(PipelineError::DegenerateEnsemble {
            survivors: survivors.len(),
            total: config.subsample_count,
            failures,
        });
    }

    let (mut coordinate, alignment) = align::align_and_average(&survivors, &config.hill_climb)?;
    for &v in &alignment.degenerate_points {
        coordinate.flags[v as usize] = CoordFlag::DegenerateAlignment;
    }
    if !alignment.converged {
        warnings.push("alignment hill climb hit its iteration cap".into());
    }
    if !alignment.degenerate_points.is_empty() {
        warnings.push(format!(
            "{} points had an ambiguous ensemble centroid and kept the first \
             configuration's angle",
            alignment.degenerate_points.len()
        ));
    }

    let evaluations = evaluate_coordinate(&coordinate, &input, &config.eval_ks)?;
    let alignment_summary = AlignmentSummary {
        survivors: survivors.len(),
        dropped: failures.len(),
        final_loss: alignment.final_loss(),
        iterations: alignment.loss_trace.len() - 1,
        converged: alignment.converged,
        degenerate_points: alignment.degenerate_points.len(),
    };
    let resolved = ResolvedParams {
        max_scale: None,
        bandwidth: Some(bandwidth),
        kernel_rate: Some(kernel_rate),
        intrinsic_dim: Some(config.intrinsic_dim.unwrap_or(cloud.dim())),
        subsample_seed: Some(subsample_seed),
    };
    let mut report = RunReport {
        mode: RunMode::Corrected,
        coordinate_path: None,
        barcode_path: None,
        evaluations,
        wall_seconds: start.elapsed().as_secs_f64(),
        warnings,
        alignment: Some(alignment_summary),
        resolved,
        config: config.clone(),
    };
    let report_path = emit_artifacts(RunMode::Corrected, &coordinate, &subsample_runs, &mut report)?;
    Ok(RunArtifacts {
        coordinate,
        subsample_runs,
        alignment: Some(alignment),
        report,
        report_path,
    })
}

/// Order-insensitive digest of a coordinate's exact bits, for cheap
/// determinism checks across repeats and thread counts.
pub fn coordinate_digest(coordinate: &CircularCoordinate) -> u64 {
    let mut acc = stream::mix_key(&[coordinate.len() as u64]);
    for i in 0..coordinate.len() {
        acc = stream::mix_key(&[
            acc,
            coordinate.domain[i] as u64,
            coordinate.angles[i].to_bits(),
            coordinate.flags[i] as u64,
        ]);
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct TimingSummary {
    pub seconds: Vec<f64>,
    pub min: f64,
    pub median: f64,
    /// Coordinate digest per repeat; the determinism contract makes these
    /// all equal.
    pub digests: Vec<u64>,
}

fn summarize_timing(seconds: Vec<f64>, digests: Vec<u64>) -> TimingSummary {
    let mut sorted = seconds.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("wall times are never NaN"));
    let min = sorted[0];
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    TimingSummary {
        seconds,
        min,
        median,
        digests,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub repeats: usize,
    pub uncorrected: TimingSummary,
    pub corrected: TimingSummary,
    /// corrected min / uncorrected min; below 1 means the ensemble is
    /// faster than the single shot.
    pub min_ratio: f64,
}

/// Times both modes `repeats` times on identical input. Artifact emission
/// is suppressed during the timed runs; the timing table itself lands in
/// `output_dir` when set.
pub fn bench(config: &PipelineConfig, repeats: usize) -> Result<BenchReport, PipelineError> {
    config.validate()?;
    if repeats == 0 {
        return Err(PipelineError::Config("repeats must be at least 1".into()));
    }
    let mut quiet = config.clone();
    quiet.output_dir = None;

    let time_mode = |corrected: bool| -> Result<TimingSummary, PipelineError> {
        let mut seconds = Vec::with_capacity(repeats);
        let mut digests = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let t = Instant::now();
            let artifacts = if corrected {
                run_corrected(&quiet)?
            } else {
                run_uncorrected(&quiet)?
            };
            seconds.push(t.elapsed().as_secs_f64());
            digests.push(coordinate_digest(&artifacts.coordinate));
        }
        Ok(summarize_timing(seconds, digests))
    };
    let uncorrected = time_mode(false)?;
    let corrected = time_mode(true)?;
    let report = BenchReport {
        repeats,
        min_ratio: corrected.min / uncorrected.min,
        uncorrected,
        corrected,
    };

    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        let mut wtr = csv::Writer::from_writer(fs::File::create(dir.join("timing.csv"))?);
        wtr.write_record(["mode", "repeat", "wall_seconds"])?;
        for (mode, summary) in [
            ("uncorrected", &report.uncorrected),
            ("corrected", &report.corrected),
        ] {
            for (i, s) in summary.seconds.iter().enumerate() {
                wtr.write_record([mode.to_string(), i.to_string(), format!("{s}")])?;
            }
        }
        wtr.flush()?;
        serde_json::to_writer_pretty(
            fs::File::create(dir.join("bench_report.json"))?,
            &report,
        )?;
    }
    Ok(report)
}

/// Normalized MI of both modes for one replicate seed.
#[derive(Debug, Clone, Serialize)]
pub struct MiPair {
    pub seed: u64,
    pub uncorrected: f64,
    pub corrected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiComparison {
    pub k: usize,
    pub pairs: Vec<MiPair>,
    pub uncorrected_mean: f64,
    pub corrected_mean: f64,
    /// Paired t statistic of (corrected - uncorrected).
    pub t_statistic: f64,
    /// One-sided p-value for corrected > uncorrected.
    pub p_value: f64,
}

/// Runs both modes over `replicates` seeds (master seed, master seed + 1,
/// ...) and tests whether the corrected coordinate carries more normalized
/// mutual information about the reference.
pub fn mi_compare(
    config: &PipelineConfig,
    replicates: usize,
) -> Result<MiComparison, PipelineError> {
    config.validate()?;
    if replicates < 2 {
        return Err(PipelineError::Config(format!(
            "the paired test needs at least 2 replicates, got {replicates}"
        )));
    }
    let k = config.eval_ks[0];
    let mut quiet = config.clone();
    quiet.output_dir = None;

    let mut pairs = Vec::with_capacity(replicates);
    for r in 0..replicates {
        quiet.seed = config.seed.wrapping_add(r as u64);
        let first_norm = |artifacts: &RunArtifacts| artifacts.report.evaluations[0].mi_norm;
        let uncorrected = first_norm(&run_uncorrected(&quiet)?);
        let corrected = first_norm(&run_corrected(&quiet)?);
        pairs.push(MiPair {
            seed: quiet.seed,
            uncorrected,
            corrected,
        });
    }

    let n = pairs.len() as f64;
    let diffs: Vec<f64> = pairs.iter().map(|p| p.corrected - p.uncorrected).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let (t_statistic, p_value) = if sd == 0.0 {
        // All differences identical: the test degenerates.
        if mean > 0.0 {
            (f64::INFINITY, 0.0)
        } else if mean < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 0.5)
        }
    } else {
        let t = mean / (sd / n.sqrt());
        let dist = StudentsT::new(0.0, 1.0, n - 1.0).expect("n >= 2 gives df >= 1");
        (t, 1.0 - dist.cdf(t))
    };

    let comparison = MiComparison {
        k,
        uncorrected_mean: pairs.iter().map(|p| p.uncorrected).sum::<f64>() / n,
        corrected_mean: pairs.iter().map(|p| p.corrected).sum::<f64>() / n,
        pairs,
        t_statistic,
        p_value,
    };
    if let Some(dir) = &config.output_dir {
        fs::create_dir_all(dir)?;
        serde_json::to_writer_pretty(
            fs::File::create(dir.join("mi_compare.json"))?,
            &comparison,
        )?;
    }
    Ok(comparison)
}
