//! `rsepi`: synthetic data, solving, sweeps, epipolar curves and audits from the command line.

pub mod files;
pub mod json;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rs_epipolar::bench::{run_sweep, Aggregate, ModelSolver, SweepConfig, SweepKind};
use rs_epipolar::linear::{count_in_front, eight_point, solve_20pt, solve_linear};
use rs_epipolar::nonlinear::{fit, minimal_solve, sampson_error, SampsonConfig, SampsonVariant};
use rs_epipolar::robust::{ransac, HypothesisMode, RansacConfig};
use rs_epipolar::synth::{generate, SceneConfig};
use rs_epipolar::{build, hierarchy, CameraModel, Correspondence, GeneralizedEssential, MotionParams, RotationMode};
use serde::Serialize;

use files::{CorrespondenceFile, Intrinsics};
use json::{AuditReport, ErrorReport, MatrixJson, ParamsJson, ResidualStats, SolveReport};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const INSUFFICIENT_POINTS: i32 = 10;
    pub const DEGENERATE: i32 = 11;
    pub const NO_CONSENSUS: i32 = 12;
    pub const SOLVER: i32 = 13;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Solver(#[from] rs_epipolar::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        use rs_epipolar::Error as E;
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Parse(_) => exit::IO,
            CliError::Solver(E::InsufficientPoints { .. }) => exit::INSUFFICIENT_POINTS,
            CliError::Solver(E::DegenerateConfiguration(_)) => exit::DEGENERATE,
            CliError::Solver(E::NoConsensus { .. }) => exit::NO_CONSENSUS,
            // malformed values inside otherwise readable input
            CliError::Solver(E::InvalidInput(_)) => exit::IO,
            CliError::Solver(_) => exit::SOLVER,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            CliError::Parse(_) => "parse",
            CliError::Solver(e) => e.code(),
        }
    }

    pub fn report(&self) -> ErrorReport {
        ErrorReport {
            error: self.code().to_string(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "rsepi", version, about = "Relative pose for rolling-shutter and push-broom cameras")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one synthetic trial: a correspondence file and its ground-truth parameters.
    Synth(SynthArgs),
    /// Estimate motion (or the generalized essential matrix) from a correspondence file.
    Solve(SolveArgs),
    /// Run a noise, focal-length or velocity sweep and write CSV/JSON reports.
    Sweep(SweepArgs),
    /// Sample epipolar curves in the second image for the points of the first image.
    Curves(CurvesArgs),
    /// Check a correspondence file against ground-truth parameters.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RotationArg {
    Exact,
    Small,
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    #[arg(long, default_value = "linear-rs")]
    pub model: CameraModel,
    #[arg(long, default_value_t = 100)]
    pub points: usize,
    /// Gaussian noise on the normalized image plane.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Translational velocity norm per pixel row.
    #[arg(long, default_value_t = 1e-3)]
    pub d_scale: f64,
    /// Angular velocity norm (radians) per pixel row.
    #[arg(long, default_value_t = 1e-4)]
    pub w_scale: f64,
    #[arg(long, default_value_t = 640.0)]
    pub focal: f64,
    #[arg(long, default_value_t = 640)]
    pub width: u32,
    #[arg(long, default_value_t = 480)]
    pub height: u32,
    #[arg(long, default_value_t = 2.0)]
    pub depth_min: f64,
    #[arg(long, default_value_t = 6.0)]
    pub depth_max: f64,
    #[arg(long, value_enum, default_value = "exact")]
    pub rotation: RotationArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SceneArgs {
    fn scene(&self) -> SceneConfig {
        SceneConfig {
            model: self.model,
            focal: self.focal,
            width: self.width,
            height: self.height,
            n_points: self.points,
            depth_min: self.depth_min,
            depth_max: self.depth_max,
            noise_sigma: self.noise,
            d_scale: self.d_scale,
            w_scale: self.w_scale,
            seed: self.seed,
            rotation_mode: match self.rotation {
                RotationArg::Exact => RotationMode::Exact,
                RotationArg::Small => RotationMode::Small,
            },
            ..SceneConfig::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Trial index; with the seed it fixes the generated data.
    #[arg(long, default_value_t = 0)]
    pub trial: usize,
    /// Correspondence file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth parameters JSON to write.
    #[arg(long)]
    pub params: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Chain {
    /// Normalized DLT; motion from the 8-point (perspective) or 20-point (linear-rs) pipeline.
    Linear,
    /// Sampson refinement of all points from the best available initialization.
    Nonlinear,
    /// Multi-start Sampson solve that must reach a near-zero objective.
    Minimal,
    /// RANSAC with global-shutter hypotheses, then model refinement over the inliers.
    Ransac,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Lifted,
    JacobianExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HypothesisArg {
    GlobalShutter,
    RsMinimal,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    /// Correspondence file.
    pub input: PathBuf,
    /// Camera model; defaults to the file's model line.
    #[arg(long)]
    pub model: Option<CameraModel>,
    #[arg(long, value_enum, default_value = "nonlinear")]
    pub chain: Chain,
    /// Parameters JSON used as an extra starting point (needed for push-broom refinement).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Result JSON; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "lifted")]
    pub variant: VariantArg,
    #[arg(long, default_value_t = 200)]
    pub max_iterations: usize,
    /// RANSAC inlier bound on the per-point Sampson term.
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    /// RANSAC bound for the model stage (defaults to --threshold).
    #[arg(long)]
    pub final_threshold: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    pub ransac_iterations: usize,
    #[arg(long, default_value_t = 0.999)]
    pub confidence: f64,
    #[arg(long, value_enum, default_value = "global-shutter")]
    pub hypothesis: HypothesisArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Noise,
    Focal,
    Velocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    /// Comma-separated sweep values.
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub grid: Vec<f64>,
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, value_enum, default_value = "nonlinear")]
    pub solver: SolverArg,
    /// Skip the global-shutter comparison fit.
    #[arg(long)]
    pub no_global_shutter: bool,
    /// Per-trial CSV report.
    #[arg(long)]
    pub csv: PathBuf,
    /// Aggregate JSON report.
    #[arg(long)]
    pub json: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct CurvesArgs {
    /// Parameters JSON.
    #[arg(long, conflicts_with = "matrix", required_unless_present = "matrix")]
    pub params: Option<PathBuf>,
    /// Generalized essential matrix JSON.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Correspondence file; the first-image points and the image bounds are used.
    #[arg(long)]
    pub points: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Curves CSV; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct AuditArgs {
    /// Correspondence file.
    pub input: PathBuf,
    /// Ground-truth parameters JSON.
    #[arg(long)]
    pub params: PathBuf,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Curves(a) => cmd_curves(&a),
        Command::Audit(a) => cmd_audit(&a),
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let scene = a.scene.scene();
    scene.validate()?;
    let trial = generate(&scene, a.trial)?;
    let file = CorrespondenceFile::from_normalized(
        scene.model,
        Intrinsics::centered(scene.focal, scene.width, scene.height),
        &trial.correspondences,
    );
    info!("{}: generated {} correspondences (seed {}, trial {})", scene.model, file.rows.len(), scene.seed, a.trial);
    file.save(&a.out)?;
    write_text(&a.params, &to_json(&ParamsJson::from(&trial.params)))
}

fn residual_stats(f: &GeneralizedEssential, corrs: &[Correspondence]) -> ResidualStats {
    let s = sampson_error(f, corrs);
    let unit = f.canonical();
    let n = corrs.len();
    let sq: f64 = corrs.iter().map(|c| unit.residual(&c.x1, &c.x2).powi(2)).sum();
    let used = n - s.skipped;
    ResidualStats {
        sampson_total: s.value,
        sampson_mean: if used > 0 { s.value / used as f64 } else { 0.0 },
        algebraic_rms: (sq / n.max(1) as f64).sqrt(),
        skipped: s.skipped,
        points: n,
    }
}

fn sampson_config(a: &SolveArgs) -> SampsonConfig {
    SampsonConfig {
        max_iterations: a.max_iterations,
        variant: match a.variant {
            VariantArg::Lifted => SampsonVariant::Lifted,
            VariantArg::JacobianExact => SampsonVariant::JacobianExact,
        },
        seed: a.seed,
        ..SampsonConfig::default()
    }
}

fn algorithm_name(chain: Chain, model: CameraModel) -> String {
    match (chain, model) {
        (Chain::Linear, CameraModel::Perspective) => "normalized 8-point with cheirality".into(),
        (Chain::Linear, CameraModel::LinearRollingShutter) => "linear 20-point with atomic decomposition".into(),
        (Chain::Linear, m) => format!("normalized {}-point DLT (matrix only)", m.linear_point_count()),
        (Chain::Nonlinear, _) => "Sampson refinement".into(),
        (Chain::Minimal, m) => format!("multi-start minimal solve ({} points minimum)", m.minimal_point_count()),
        (Chain::Ransac, _) => "RANSAC + Sampson refinement".into(),
    }
}

pub fn cmd_solve(a: &SolveArgs) -> Result<(), CliError> {
    let file = CorrespondenceFile::load(&a.input)?;
    let model = a.model.unwrap_or(file.model);
    let corrs = file.correspondences();
    let hint = a.init.as_deref().map(read_json::<ParamsJson>).transpose()?.map(|p| p.to_params()).transpose()?;
    let cfg = sampson_config(a);
    let algorithm = algorithm_name(a.chain, model);
    info!("model {model}, {} correspondences, algorithm: {algorithm}", corrs.len());

    let mut inliers = None;
    let mut iterations = None;
    let (params, matrix): (Option<MotionParams>, GeneralizedEssential) = match a.chain {
        Chain::Linear => {
            let est = solve_linear(&corrs, model)?;
            let params = match model {
                CameraModel::Perspective => Some(eight_point(&corrs)?),
                CameraModel::LinearRollingShutter => Some(solve_20pt(&corrs)?),
                _ => None,
            };
            (params, est.essential)
        }
        Chain::Nonlinear => {
            let r = fit(&corrs, model, &cfg, hint.as_ref())?;
            iterations = Some(r.iterations);
            (Some(r.params), build(&r.params)?)
        }
        Chain::Minimal => {
            let r = minimal_solve(&corrs, model, &cfg, hint.as_ref())?;
            iterations = Some(r.iterations);
            (Some(r.params), build(&r.params)?)
        }
        Chain::Ransac => {
            let rcfg = RansacConfig {
                threshold: a.threshold,
                final_threshold: a.final_threshold,
                max_iterations: a.ransac_iterations,
                confidence: a.confidence,
                seed: a.seed,
                hypothesis: match a.hypothesis {
                    HypothesisArg::GlobalShutter => HypothesisMode::GlobalShutter,
                    HypothesisArg::RsMinimal => HypothesisMode::RollingShutterMinimal,
                },
            };
            let r = ransac(&corrs, model, &rcfg, &cfg)?;
            info!("RANSAC kept {} of {} correspondences after {} iterations", r.inlier_count(), corrs.len(), r.iterations);
            iterations = Some(r.iterations);
            inliers = Some(r.inliers);
            (Some(r.params), build(&r.params)?)
        }
    };
    let evaluated: Vec<Correspondence> = match &inliers {
        Some(mask) => corrs.iter().zip(mask).filter(|(_, m)| **m).map(|(c, _)| *c).collect(),
        None => corrs.clone(),
    };
    let report = SolveReport {
        model,
        chain: format!("{:?}", a.chain).to_lowercase(),
        algorithm,
        n_points: corrs.len(),
        params: params.as_ref().map(ParamsJson::from),
        matrix: MatrixJson::from(&matrix.canonical()),
        residuals: residual_stats(&matrix, &evaluated),
        inliers,
        iterations,
    };
    emit(a.out.as_deref(), &to_json(&report))
}

#[derive(Debug, Serialize)]
struct SweepJson<'a> {
    kind: SweepKind,
    data_model: CameraModel,
    solver: ModelSolver,
    grid: &'a [f64],
    trials: usize,
    scene: &'a SceneConfig,
    aggregates: &'a [Aggregate],
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<(), CliError> {
    if a.trials == 0 {
        return Err(CliError::Usage("--trials must be positive".into()));
    }
    let kind = match a.kind {
        KindArg::Noise => SweepKind::Noise,
        KindArg::Focal => SweepKind::Focal,
        KindArg::Velocity => SweepKind::Velocity,
    };
    let scene = SceneConfig {
        trials: a.trials,
        ..a.scene.scene()
    };
    let mut cfg = SweepConfig::new(kind, a.grid.clone(), scene);
    cfg.solver = match a.solver {
        SolverArg::Linear => ModelSolver::Linear,
        SolverArg::Nonlinear => ModelSolver::Nonlinear,
    };
    cfg.global_shutter = !a.no_global_shutter;
    info!(
        "model {}, {} correspondences per trial, {} trials per value, {} sweep over {:?}, solver {:?}",
        cfg.scene.model,
        cfg.scene.n_points,
        a.trials,
        kind.name(),
        a.grid,
        cfg.solver
    );
    let report = run_sweep(&cfg)?;
    write_text(&a.csv, &report.to_csv())?;
    let summary = SweepJson {
        kind,
        data_model: report.data_model,
        solver: report.solver,
        grid: &cfg.grid,
        trials: a.trials,
        scene: &cfg.scene,
        aggregates: &report.aggregates,
    };
    write_text(&a.json, &to_json(&summary))
}

pub fn cmd_curves(a: &CurvesArgs) -> Result<(), CliError> {
    let f = match (&a.params, &a.matrix) {
        (Some(p), None) => build(&read_json::<ParamsJson>(p)?.to_params()?)?,
        (None, Some(m)) => read_json::<MatrixJson>(m)?.to_essential()?,
        _ => return Err(CliError::Usage("give exactly one of --params or --matrix".into())),
    };
    let file = CorrespondenceFile::load(&a.points)?;
    let bounds = file.intrinsics.bounds();
    info!("model {}, {} source points, epipolar curves of degree {}", f.model, file.rows.len(), f.model.curve_degree());
    let curves = file
        .correspondences()
        .iter()
        .map(|c| hierarchy::sample_epipolar_curve(&f, &c.x1, &bounds, a.samples))
        .collect::<Result<Vec<_>, _>>()?;
    if curves.iter().all(|c| c.points.is_empty()) {
        warn!("no epipolar curve intersects the image bounds");
    }
    let text = format!(
        "# model={} degree={} units=normalized\n{}",
        f.model,
        f.model.curve_degree(),
        hierarchy::curves_to_csv(&curves)
    );
    emit(a.out.as_deref(), &text)
}

pub fn cmd_audit(a: &AuditArgs) -> Result<(), CliError> {
    let file = CorrespondenceFile::load(&a.input)?;
    let params = read_json::<ParamsJson>(&a.params)?.to_params()?;
    let corrs = file.correspondences();
    let f = build(&params)?;
    let in_front = count_in_front(&params, &corrs);
    info!("model {}, {} correspondences, algorithm: cheirality and residual audit", params.model, corrs.len());
    let report = AuditReport {
        model: params.model,
        n_points: corrs.len(),
        in_front,
        cheirality_fraction: in_front as f64 / corrs.len() as f64,
        max_abs_residual: corrs.iter().map(|c| f.residual(&c.x1, &c.x2).abs()).fold(0.0, f64::max),
        sampson_total: sampson_error(&f, &corrs).value,
    };
    emit(None, &to_json(&report))
}
