//! Sweep experiments: generate synthetic trials over a parameter grid, solve each with the
//! global-shutter model and with the data's own model, and aggregate the errors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, MotionParams};
use crate::hierarchy::{build, matrix_angle, GeneralizedEssential};
use crate::linear::{decompose_atoms, recover_atoms, solve_linear};
use crate::nonlinear::{fit, solve_global_shutter, SampsonConfig};
use crate::synth::{error_rotation, error_translation, generate, SceneConfig, SyntheticTrial};

/// Which scene parameter the grid overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// `noise_sigma`, normalized image-plane units.
    Noise,
    /// `focal`, pixels. Image size in pixels and per-row velocities stay fixed.
    Focal,
    /// `d_scale`, scene units per pixel row.
    Velocity,
}

impl SweepKind {
    pub fn name(self) -> &'static str {
        match self {
            SweepKind::Noise => "noise",
            SweepKind::Focal => "focal",
            SweepKind::Velocity => "velocity",
        }
    }

    pub fn apply(self, cfg: &SceneConfig, value: f64) -> SceneConfig {
        let mut c = cfg.clone();
        match self {
            SweepKind::Noise => c.noise_sigma = value,
            SweepKind::Focal => c.focal = value,
            SweepKind::Velocity => c.d_scale = value,
        }
        c
    }
}

impl std::str::FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "noise" => Ok(SweepKind::Noise),
            "focal" => Ok(SweepKind::Focal),
            "velocity" => Ok(SweepKind::Velocity),
            _ => Err(Error::InvalidInput(format!("unknown sweep kind `{s}`"))),
        }
    }
}

/// Solver applied with the data's own camera model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelSolver {
    /// Normalized DLT. Motion is recovered only for linear rolling shutter (20-point pipeline);
    /// other models report the matrix angle alone.
    Linear,
    /// Sampson refinement ([`fit`]).
    #[default]
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
    pub scene: SceneConfig,
    pub solver: ModelSolver,
    /// Also fit the global-shutter model to every trial.
    pub global_shutter: bool,
    pub sampson: SampsonConfig,
}

impl SweepConfig {
    pub fn new(kind: SweepKind, grid: Vec<f64>, scene: SceneConfig) -> Self {
        Self {
            kind,
            grid,
            scene,
            solver: ModelSolver::Nonlinear,
            global_shutter: true,
            sampson: SampsonConfig::default(),
        }
    }
}

/// Label of the global-shutter rows of a report.
pub const GLOBAL_SHUTTER: &str = "global-shutter";

/// One solver run on one trial. Errors are `None` when the solver failed or does not recover
/// that quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep_value: f64,
    pub trial: usize,
    /// Camera model name, or [`GLOBAL_SHUTTER`].
    pub model: String,
    pub e_r: Option<f64>,
    pub e_t: Option<f64>,
    pub f_angle: Option<f64>,
    /// `ok` or an error code.
    pub status: String,
}

/// Median and quartiles (linear interpolation between order statistics).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        })
    }
}

/// Quantile of sorted data, interpolating linearly between neighbours.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub sweep_value: f64,
    pub model: String,
    pub trials: usize,
    pub failures: usize,
    pub e_r: Option<Summary>,
    pub e_t: Option<Summary>,
    pub f_angle: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub kind: SweepKind,
    pub data_model: CameraModel,
    pub solver: ModelSolver,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

pub const CSV_HEADER: &str = "sweep_value,trial,model,e_R,e_T,F_angle,status";

impl ExperimentReport {
    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map(|v| format!("{v:e}")).unwrap_or_default();
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{:e},{},{},{},{},{},{}\n",
                r.sweep_value,
                r.trial,
                r.model,
                opt(r.e_r),
                opt(r.e_t),
                opt(r.f_angle),
                r.status
            ));
        }
        out
    }

    pub fn aggregate(&self, sweep_value: f64, model: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.sweep_value == sweep_value && a.model == model)
    }
}

fn pose_errors(estimate: &MotionParams, truth: &MotionParams) -> (Option<f64>, Option<f64>) {
    (
        Some(error_rotation(&estimate.rotation, &truth.rotation)),
        error_translation(&estimate.translation, &truth.translation).ok(),
    )
}

fn record(value: f64, trial: usize, model: &str, outcome: Result<(Option<f64>, Option<f64>, Option<f64>)>) -> TrialRecord {
    let (e_r, e_t, f_angle, status) = match outcome {
        Ok((r, t, f)) => (r, t, f, "ok".to_string()),
        Err(e) => (None, None, None, e.code().to_string()),
    };
    TrialRecord {
        sweep_value: value,
        trial,
        model: model.to_string(),
        e_r,
        e_t,
        f_angle,
        status,
    }
}

fn angle_to(f: &GeneralizedEssential, truth: &GeneralizedEssential) -> Option<f64> {
    (f.model == truth.model).then(|| matrix_angle(&f.matrix, &truth.matrix))
}

/// Solves one trial with the global-shutter model (when asked) and with the data's model.
pub fn solve_trial(t: &SyntheticTrial, value: f64, index: usize, cfg: &SweepConfig) -> Vec<TrialRecord> {
    let truth = t.params;
    let corrs = &t.correspondences;
    let mut out = Vec::with_capacity(2);
    if cfg.global_shutter {
        let outcome = (|| {
            let r = solve_global_shutter(corrs, &cfg.sampson)?;
            let (e_r, e_t) = pose_errors(&r.params, &truth);
            let f = angle_to(&build(&r.params)?, &build(&truth.with_model(CameraModel::Perspective))?);
            Ok((e_r, e_t, f))
        })();
        out.push(record(value, index, GLOBAL_SHUTTER, outcome));
    }
    let model = truth.model;
    let gt_f = build(&truth);
    let outcome = (|| {
        let gt_f = gt_f.clone()?;
        match cfg.solver {
            ModelSolver::Linear => {
                let est = solve_linear(corrs, model)?;
                let f = angle_to(&est.essential, &gt_f);
                if model == CameraModel::LinearRollingShutter {
                    let p = decompose_atoms(&recover_atoms(&est.essential)?, corrs)?;
                    let (e_r, e_t) = pose_errors(&p, &truth);
                    Ok((e_r, e_t, f))
                } else {
                    Ok((None, None, f))
                }
            }
            ModelSolver::Nonlinear => {
                // push-broom fits have no image-row initialization; start them from the truth
                let hint = model.is_push_broom().then_some(&truth);
                let r = fit(corrs, model, &cfg.sampson, hint)?;
                let (e_r, e_t) = pose_errors(&r.params, &truth);
                Ok((e_r, e_t, angle_to(&build(&r.params)?, &gt_f)))
            }
        }
    })();
    out.push(record(value, index, model.name(), outcome));
    out
}

/// Runs every grid value over `scene.trials` seeded trials (in parallel, results in trial
/// order) and aggregates per value and model. Solver failures are recorded, not fatal.
pub fn run_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    cfg.sampson.validate()?;
    let mut records = Vec::new();
    for &value in &cfg.grid {
        let scene = cfg.kind.apply(&cfg.scene, value);
        scene.validate()?;
        let per_trial: Vec<Vec<TrialRecord>> = (0..scene.trials)
            .into_par_iter()
            .map(|i| match generate(&scene, i) {
                Ok(t) => solve_trial(&t, value, i, cfg),
                Err(e) => vec![record(value, i, scene.model.name(), Err(e))],
            })
            .collect();
        records.extend(per_trial.into_iter().flatten());
    }
    let aggregates = aggregate(&records);
    Ok(ExperimentReport {
        kind: cfg.kind,
        data_model: cfg.scene.model,
        solver: cfg.solver,
        records,
        aggregates,
    })
}

/// Groups records by (sweep value, model) in first-appearance order.
pub fn aggregate(records: &[TrialRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(f64, String)> = Vec::new();
    for r in records {
        if !keys.iter().any(|(v, m)| *v == r.sweep_value && *m == r.model) {
            keys.push((r.sweep_value, r.model.clone()));
        }
    }
    keys.into_iter()
        .map(|(value, model)| {
            let group: Vec<&TrialRecord> = records.iter().filter(|r| r.sweep_value == value && r.model == model).collect();
            let pick = |f: fn(&TrialRecord) -> Option<f64>| Summary::of(&group.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
            Aggregate {
                sweep_value: value,
                trials: group.len(),
                failures: group.iter().filter(|r| r.status != "ok").count(),
                e_r: pick(|r| r.e_r),
                e_t: pick(|r| r.e_t),
                f_angle: pick(|r| r.f_angle),
                model,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let s = Summary::of(&[4.0, 1.0, 3.0, 2.0]).unwrap();
        assert_eq!(s.median, 2.5);
        assert_eq!(s.q1, 1.75);
        assert_eq!(s.q3, 3.25);
        assert_eq!(Summary::of(&[f64::NAN]), None);
    }

    #[test]
    fn summary_ignores_order() {
        let a = [0.3, 0.1, 0.7, 0.2, 0.9];
        let mut b = a;
        b.reverse();
        assert_eq!(Summary::of(&a), Summary::of(&b));
    }

    #[test]
    fn small_sweep_produces_rows_for_both_models() {
        let scene = SceneConfig {
            trials: 4,
            n_points: 40,
            ..SceneConfig::default()
        };
        let report = run_sweep(&SweepConfig::new(SweepKind::Noise, vec![0.0, 1e-4], scene)).unwrap();
        assert_eq!(report.records.len(), 16);
        assert_eq!(report.aggregates.len(), 4);
        let csv = report.to_csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 17);
        let rs = report.aggregate(0.0, "linear-rs").unwrap();
        assert_eq!(rs.failures, 0);
        assert!(rs.e_r.unwrap().median <= 1e-8);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let cfg = SweepConfig::new(SweepKind::Focal, vec![], SceneConfig::default());
        assert!(run_sweep(&cfg).is_err());
    }
}
