//! Sampson-error refinement of motion parameters and the multi-start minimal solver.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::{lift, lift_jacobian, rotation_from_angle_axis, rotation_log, CameraModel, Correspondence, MotionParams};
use crate::hierarchy::{expanded_essential, GeneralizedEssential};
use crate::linear::{eight_point_unchecked, orient_by_cheirality, solve_20pt, velocities_for_pose};
use crate::tolerance::Tolerances;

/// Which denominator the Sampson term uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampsonVariant {
    /// `Σⱼ (F l)ⱼ² + (Fᵀl′)ⱼ²` over every lifted component.
    #[default]
    Lifted,
    /// Squared gradient of the residual with respect to the four image coordinates, through
    /// the monomial lifting.
    JacobianExact,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SampsonConfig {
    pub max_iterations: usize,
    /// Stop when the largest gradient component falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the step is below this fraction of the parameter norm.
    pub step_tolerance: f64,
    /// Stop once the objective drops below this absolute value.
    pub objective_floor: f64,
    /// Relative step of the central-difference Jacobian.
    pub diff_step: f64,
    pub variant: SampsonVariant,
    /// `minimal_solve` fails when its best objective is above this.
    pub convergence_threshold: f64,
    /// Random restarts of `minimal_solve` after the global-shutter initialization.
    pub restarts: usize,
    /// Standard deviation of the velocity perturbation of each restart (normalized units).
    pub restart_velocity_scale: f64,
    pub seed: u64,
}

impl Default for SampsonConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-16,
            step_tolerance: 1e-12,
            objective_floor: 1e-28,
            diff_step: 1e-7,
            variant: SampsonVariant::Lifted,
            convergence_threshold: 1e-12,
            restarts: 10,
            restart_velocity_scale: 0.5,
            seed: 0,
        }
    }
}

impl SampsonConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_iterations > 0
            && [self.gradient_tolerance, self.step_tolerance, self.diff_step, self.convergence_threshold]
                .iter()
                .all(|x| *x > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput("Sampson configuration values must be positive".into()))
        }
    }
}

/// Lifted vectors (and their derivatives) of a correspondence set, computed once.
struct Lifted {
    first: Vec<DVector<f64>>,
    second: Vec<DVector<f64>>,
    grads: Option<Vec<[DVector<f64>; 4]>>,
}

impl Lifted {
    fn new(corrs: &[Correspondence], model: CameraModel, variant: SampsonVariant) -> Self {
        let grads = (variant == SampsonVariant::JacobianExact).then(|| {
            corrs
                .iter()
                .map(|c| {
                    let (du1, dv1) = lift_jacobian(&c.x1, model);
                    let (du2, dv2) = lift_jacobian(&c.x2, model);
                    [du1, dv1, du2, dv2]
                })
                .collect()
        });
        Self {
            first: corrs.iter().map(|c| lift(&c.x1, model).0).collect(),
            second: corrs.iter().map(|c| lift(&c.x2, model).0).collect(),
            grads,
        }
    }
}

/// Signed Sampson residual `r/√den` of point `i`, or `None` when the denominator vanishes.
fn sampson_term(f: &DMatrix<f64>, lifted: &Lifted, i: usize, tol: &Tolerances) -> Option<f64> {
    let l1 = &lifted.first[i];
    let l2 = &lifted.second[i];
    let fl1 = f * l1;
    let ftl2 = f.tr_mul(l2);
    let r = l2.dot(&fl1);
    let den = match &lifted.grads {
        None => fl1.norm_squared() + ftl2.norm_squared(),
        Some(g) => {
            let [du1, dv1, du2, dv2] = &g[i];
            ftl2.dot(du1).powi(2) + ftl2.dot(dv1).powi(2) + fl1.dot(du2).powi(2) + fl1.dot(dv2).powi(2)
        }
    };
    (den >= tol.sampson_denominator).then(|| r / den.sqrt())
}

/// One summand of the Sampson error; `None` if its denominator is numerically zero.
pub fn per_point_sampson(f: &GeneralizedEssential, c: &Correspondence, variant: SampsonVariant) -> Option<f64> {
    let lifted = Lifted::new(std::slice::from_ref(c), f.model, variant);
    sampson_term(&f.matrix, &lifted, 0, &Tolerances::default()).map(|r| r * r)
}

/// Total Sampson error and the number of terms skipped because of a vanishing denominator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampsonError {
    pub value: f64,
    pub skipped: usize,
}

/// `Σᵢ (l′ᵢᵀ F lᵢ)² / Σⱼ ((F lᵢ)ⱼ² + (Fᵀl′ᵢ)ⱼ²)` with the lifted denominator.
pub fn sampson_error(f: &GeneralizedEssential, corrs: &[Correspondence]) -> SampsonError {
    sampson_error_with(f, corrs, SampsonVariant::Lifted)
}

pub fn sampson_error_with(f: &GeneralizedEssential, corrs: &[Correspondence], variant: SampsonVariant) -> SampsonError {
    let lifted = Lifted::new(corrs, f.model, variant);
    let tol = Tolerances::default();
    let mut value = 0.0;
    let mut skipped = 0;
    for i in 0..corrs.len() {
        match sampson_term(&f.matrix, &lifted, i, &tol) {
            Some(r) => value += r * r,
            None => skipped += 1,
        }
    }
    SampsonError { value, skipped }
}

/// Flat parameter layout: angle-axis of `R`, `t`, then `w₁, w₂` (uniform models), then
/// `d₁, d₂` (non-perspective models).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    pub model: CameraModel,
    pub values: DVector<f64>,
}

impl ParamVector {
    pub fn dim(model: CameraModel) -> usize {
        6 + if model.has_angular_velocity() { 6 } else { 0 } + if model.has_linear_velocity() { 6 } else { 0 }
    }

    pub fn from_params(p: &MotionParams) -> Self {
        let mut v = Vec::with_capacity(Self::dim(p.model));
        v.extend_from_slice(rotation_log(&p.rotation).as_slice());
        v.extend_from_slice(p.translation.as_slice());
        if p.model.has_angular_velocity() {
            v.extend_from_slice(p.w1.as_slice());
            v.extend_from_slice(p.w2.as_slice());
        }
        if p.model.has_linear_velocity() {
            v.extend_from_slice(p.d1.as_slice());
            v.extend_from_slice(p.d2.as_slice());
        }
        Self {
            model: p.model,
            values: DVector::from_vec(v),
        }
    }

    pub fn to_params(&self) -> MotionParams {
        let v = &self.values;
        let at = |i: usize| Vector3::new(v[i], v[i + 1], v[i + 2]);
        let mut p = MotionParams::perspective(rotation_from_angle_axis(&at(0)), at(3));
        p.model = self.model;
        let mut k = 6;
        if self.model.has_angular_velocity() {
            p.w1 = at(k);
            p.w2 = at(k + 3);
            k += 6;
        }
        if self.model.has_linear_velocity() {
            p.d1 = at(k);
            p.d2 = at(k + 3);
        }
        p
    }
}

fn residuals(x: &DVector<f64>, model: CameraModel, lifted: &Lifted, n: usize) -> DVector<f64> {
    let p = ParamVector {
        model,
        values: x.clone(),
    }
    .to_params();
    let f = match expanded_essential(&p) {
        Ok(f) => f.matrix,
        Err(_) => return DVector::from_element(n, f64::NAN),
    };
    let tol = Tolerances::default();
    DVector::from_fn(n, |i, _| sampson_term(&f, lifted, i, &tol).unwrap_or(0.0))
}

fn jacobian(x: &DVector<f64>, model: CameraModel, lifted: &Lifted, n: usize, step: f64) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(n, x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let h = step * x[k].abs().max(1.0);
        xp[k] = x[k] + h;
        let rp = residuals(&xp, model, lifted, n);
        xp[k] = x[k] - h;
        let rm = residuals(&xp, model, lifted, n);
        xp[k] = x[k];
        j.set_column(k, &((rp - rm) / (2.0 * h)));
    }
    j
}

/// Result of a refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    /// Gauge-fixed (`‖t‖ = 1`) and oriented by cheirality.
    pub params: MotionParams,
    /// Sampson error at `params`.
    pub objective: f64,
    pub iterations: usize,
}

/// Levenberg–Marquardt minimization of the Sampson error over [`ParamVector`], starting from
/// `init` reinterpreted under `model` (velocities the model lacks are dropped, missing ones
/// start at zero), rescaled to `‖t‖ = 1` so the result does not depend on the start's scale.
/// The objective never increases.
pub fn refine(init: &MotionParams, corrs: &[Correspondence], model: CameraModel, cfg: &SampsonConfig) -> Result<Refined> {
    cfg.validate()?;
    let needed = model.minimal_point_count();
    if corrs.len() < needed {
        return Err(Error::InsufficientPoints {
            model,
            needed,
            got: corrs.len(),
        });
    }
    let start = init.with_model(model);
    start.validate()?;
    let start = start.gauge_fixed()?;
    let lifted = Lifted::new(corrs, model, cfg.variant);
    let n = corrs.len();
    let mut x = ParamVector::from_params(&start).values;
    let mut r = residuals(&x, model, &lifted, n);
    let mut cost = r.norm_squared();
    if !cost.is_finite() {
        return Err(Error::NonFinite { iteration: 0 });
    }
    let mut iterations = 0;
    let mut mu = -1.0;
    let mut nu = 2.0;
    while iterations < cfg.max_iterations && cost > cfg.objective_floor {
        iterations += 1;
        let j = jacobian(&x, model, &lifted, n, cfg.diff_step);
        let jtj = j.tr_mul(&j);
        let g = j.tr_mul(&r);
        if g.amax() <= cfg.gradient_tolerance {
            break;
        }
        if mu < 0.0 {
            mu = 1e-3 * jtj.diagonal().max().max(f64::MIN_POSITIVE);
        }
        let mut accepted = false;
        let mut converged = false;
        while !accepted {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += mu;
            }
            let Some(chol) = a.cholesky() else {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() {
                    converged = true;
                    break;
                }
                continue;
            };
            let delta = chol.solve(&(-&g));
            if delta.norm() <= cfg.step_tolerance * (x.norm() + cfg.step_tolerance) {
                converged = true;
                break;
            }
            let x_new = &x + &delta;
            let r_new = residuals(&x_new, model, &lifted, n);
            let cost_new = r_new.norm_squared();
            if cost_new.is_nan() {
                return Err(Error::NonFinite { iteration: iterations });
            }
            // gain ratio with F = ½‖r‖²
            let predicted = 0.5 * delta.dot(&(&delta * mu - &g));
            let rho = 0.5 * (cost - cost_new) / predicted;
            if cost_new < cost && rho > 0.0 {
                x = x_new;
                r = r_new;
                cost = cost_new;
                mu *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                accepted = true;
            } else {
                mu *= nu;
                nu *= 2.0;
                if !mu.is_finite() {
                    converged = true;
                    break;
                }
            }
        }
        if converged {
            break;
        }
    }
    let p = ParamVector { model, values: x }.to_params();
    let p = orient_by_cheirality(&p.gauge_fixed()?, corrs);
    Ok(Refined {
        params: p,
        objective: cost,
        iterations,
    })
}

fn perturb(base: &MotionParams, scale: f64, rng: &mut impl Rng) -> MotionParams {
    let mut gauss = || -> Vector3<f64> {
        Vector3::from_fn(|_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
    };
    let mut p = *base;
    if p.model.has_linear_velocity() {
        p.d1 += gauss();
        p.d2 += gauss();
    }
    if p.model.has_angular_velocity() {
        p.w1 += gauss() * 0.1;
        p.w2 += gauss() * 0.1;
    }
    if !p.model.has_linear_velocity() {
        // perspective restarts perturb the pose instead
        let aa = gauss() * 0.2;
        p.rotation = rotation_from_angle_axis(&aa) * p.rotation;
        p.translation += gauss();
    }
    p
}

/// Initialization ladder shared by [`minimal_solve`] and the robust estimator: refine from the
/// global-shutter 8-point pose (image-row models with at least 8 points) and from `hint`, then
/// from `cfg.restarts` seeded velocity perturbations of the best start while the objective stays
/// above `cfg.convergence_threshold`. Returns the best result whatever its objective.
pub fn multi_start(
    corrs: &[Correspondence],
    model: CameraModel,
    cfg: &SampsonConfig,
    hint: Option<&MotionParams>,
) -> Result<Refined> {
    let needed = model.minimal_point_count();
    if corrs.len() < needed {
        return Err(Error::InsufficientPoints {
            model,
            needed,
            got: corrs.len(),
        });
    }
    let mut starts = Vec::new();
    if corrs.len() >= 8 && !model.is_push_broom() {
        if let Ok(gs) = eight_point_unchecked(corrs) {
            starts.push(gs.with_model(model));
        }
    }
    if let Some(h) = hint {
        starts.push(h.with_model(model));
    }
    if starts.is_empty() {
        starts.push(MotionParams::perspective(nalgebra::Rotation3::identity(), Vector3::z()).with_model(model));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(Refined, MotionParams)> = None;
    let mut last_err = None;
    let mut consider = |start: MotionParams, best: &mut Option<(Refined, MotionParams)>| match refine(&start, corrs, model, cfg) {
        Ok(r) => {
            if best.as_ref().is_none_or(|(b, _)| r.objective < b.objective) {
                *best = Some((r, start));
            }
        }
        Err(e) => last_err = Some(e),
    };
    for s in starts {
        consider(s, &mut best);
    }
    for _ in 0..cfg.restarts {
        let base = match &best {
            Some((b, _)) if b.objective <= cfg.convergence_threshold => break,
            Some((_, s)) => *s,
            None => MotionParams::perspective(nalgebra::Rotation3::identity(), Vector3::z()).with_model(model),
        };
        consider(perturb(&base, cfg.restart_velocity_scale, &mut rng), &mut best);
    }
    match best {
        Some((b, _)) => Ok(b),
        None => Err(last_err.expect("at least one start was tried")),
    }
}

/// [`multi_start`] that fails with `ConvergenceFailed` when the best objective is above
/// `cfg.convergence_threshold`. Meant for noise-free or minimal point sets.
pub fn minimal_solve(
    corrs: &[Correspondence],
    model: CameraModel,
    cfg: &SampsonConfig,
    hint: Option<&MotionParams>,
) -> Result<Refined> {
    let best = multi_start(corrs, model, cfg, hint)?;
    if best.objective > cfg.convergence_threshold {
        return Err(Error::ConvergenceFailed {
            objective: best.objective,
            threshold: cfg.convergence_threshold,
        });
    }
    Ok(best)
}

/// Global-shutter fit: 8-point pose (most points in front, even without a majority) refined
/// under the perspective model.
pub fn solve_global_shutter(corrs: &[Correspondence], cfg: &SampsonConfig) -> Result<Refined> {
    let init = eight_point_unchecked(corrs)?;
    refine(&init, corrs, CameraModel::Perspective, cfg)
}

/// Linear rolling-shutter fit on at least 20 points. Refines from the 8-point pose with zero
/// velocities, from the same pose with least-squares velocities, and from the 20-point linear
/// solution when it exists; keeps the lowest objective.
pub fn solve_linear_rolling_shutter(corrs: &[Correspondence], cfg: &SampsonConfig) -> Result<Refined> {
    let model = CameraModel::LinearRollingShutter;
    let needed = model.linear_point_count();
    if corrs.len() < needed {
        return Err(Error::InsufficientPoints {
            model,
            needed,
            got: corrs.len(),
        });
    }
    let gs = eight_point_unchecked(corrs)?;
    let mut starts = vec![gs];
    starts.extend(velocities_for_pose(&gs, corrs).ok());
    starts.extend(solve_20pt(corrs).ok());
    let mut best: Option<Refined> = None;
    let mut last_err = None;
    for s in &starts {
        match refine(s, corrs, model, cfg) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.objective < b.objective) {
                    best = Some(r);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one start"))
}

/// Best available fit of `model` to `corrs` without a convergence requirement: the
/// global-shutter pipeline for the perspective model, the three-start linear rolling-shutter
/// pipeline when 20 or more points exist, and [`multi_start`] otherwise.
pub fn fit(corrs: &[Correspondence], model: CameraModel, cfg: &SampsonConfig, hint: Option<&MotionParams>) -> Result<Refined> {
    match model {
        CameraModel::Perspective if hint.is_none() && corrs.len() >= 8 => solve_global_shutter(corrs, cfg),
        CameraModel::LinearRollingShutter if hint.is_none() && corrs.len() >= model.linear_point_count() => {
            solve_linear_rolling_shutter(corrs, cfg)
        }
        _ => multi_start(corrs, model, cfg, hint),
    }
}

/// Sampson error of the matrix built from `params` (scale-free, so the build need not be
/// canonical).
pub fn objective(params: &MotionParams, corrs: &[Correspondence], variant: SampsonVariant) -> Result<f64> {
    Ok(sampson_error_with(&expanded_essential(params)?, corrs, variant).value)
}
