//! Geometrically consistent synthetic correspondences and error metrics.
//!
//! A point is drawn in image 1 together with a depth, back-projected through the scanline pose
//! of its own row, and re-projected into image 2 by solving the scalar fixed-point equation
//! "the point is seen on the row whose pose observes it".

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, Correspondence, Frame, ImagePoint, MotionParams, RotationMode};
use crate::hierarchy::{expanded_essential, ImageBounds};

/// Scene and motion distribution for synthetic trials.
///
/// `d_scale` and `w_scale` are given per pixel row. The generated [`MotionParams`] carry
/// velocities per unit of normalized row coordinate, so they are `focal` times larger: a
/// scanline at normalized row `u` is exposed at pose `t₀ + u·d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub model: CameraModel,
    /// Focal length in pixels (same for both axes).
    pub focal: f64,
    pub width: u32,
    pub height: u32,
    pub n_points: usize,
    pub depth_min: f64,
    pub depth_max: f64,
    /// Standard deviation of the Gaussian noise added on the normalized image plane.
    pub noise_sigma: f64,
    /// Norm of each translational velocity `d₁`, `d₂`, in scene units per pixel row.
    pub d_scale: f64,
    /// Norm of each angular velocity `w₁`, `w₂`, in radians per pixel row (uniform models only).
    pub w_scale: f64,
    /// Largest relative rotation angle in radians.
    pub max_rotation: f64,
    /// Push-broom only: sweep speed along the camera x axis, added to the random velocity.
    pub pb_sweep_speed: f64,
    /// Push-broom only: the sweep time `u` ranges over `[-pb_time_range, pb_time_range]`.
    pub pb_time_range: f64,
    pub trials: usize,
    pub seed: u64,
    pub rotation_mode: RotationMode,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            model: CameraModel::LinearRollingShutter,
            focal: 640.0,
            width: 640,
            height: 480,
            n_points: 100,
            depth_min: 2.0,
            depth_max: 6.0,
            noise_sigma: 0.0,
            d_scale: 1e-3,
            w_scale: 1e-4,
            max_rotation: 0.5,
            pb_sweep_speed: 4.0,
            pb_time_range: 1.0,
            trials: 200,
            seed: 0,
            rotation_mode: RotationMode::Exact,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.focal, self.depth_min, self.pb_time_range]
            .iter()
            .all(|x| *x > 0.0 && x.is_finite());
        if !positive || self.width == 0 || self.height == 0 || self.n_points == 0 {
            return Err(Error::InvalidInput("scene sizes must be positive".into()));
        }
        if !(self.depth_max >= self.depth_min) {
            return Err(Error::InvalidInput("depth_max must not be below depth_min".into()));
        }
        let nonneg = [self.noise_sigma, self.d_scale, self.w_scale, self.max_rotation, self.pb_sweep_speed];
        if nonneg.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidInput("noise and velocity scales must be non-negative".into()));
        }
        Ok(())
    }

    /// Normalized image rectangle. For push-broom models `u` is the sweep time.
    pub fn bounds(&self) -> ImageBounds {
        let half_v = 0.5 * self.width as f64 / self.focal;
        let half_u = if self.model.is_push_broom() {
            self.pb_time_range
        } else {
            0.5 * self.height as f64 / self.focal
        };
        ImageBounds {
            u_min: -half_u,
            u_max: half_u,
            v_min: -half_v,
            v_max: half_v,
        }
    }

    /// Random generator of trial `index`; streams are independent of evaluation order.
    pub fn trial_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// One generated two-view problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrial {
    /// Ground truth with `‖t‖ = 1`.
    pub params: MotionParams,
    /// Noisy correspondences (equal to `clean` when the noise level is zero).
    pub correspondences: Vec<Correspondence>,
    pub clean: Vec<Correspondence>,
    /// World points (frame-1 reference coordinates).
    pub points: Vec<Vector3<f64>>,
}

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    let [x, y, z]: [f64; 3] = UnitSphere.sample(rng);
    Vector3::new(x, y, z)
}

/// Draws ground-truth motion for `cfg.model`: uniform rotation axis, angle uniform in
/// `[0, max_rotation]`, unit translation, velocities of the configured norms (converted from
/// per-pixel-row to per-normalized-row units).
pub fn random_params(cfg: &SceneConfig, rng: &mut impl Rng) -> MotionParams {
    let axis = Unit::new_normalize(unit_vector(rng));
    let angle = rng.random_range(0.0..=cfg.max_rotation);
    let rotation = Rotation3::from_axis_angle(&axis, angle);
    let translation = unit_vector(rng);
    let mut p = MotionParams::perspective(rotation, translation);
    p.model = cfg.model;
    if cfg.model.has_linear_velocity() {
        p.d1 = unit_vector(rng) * (cfg.d_scale * cfg.focal);
        p.d2 = unit_vector(rng) * (cfg.d_scale * cfg.focal);
        if cfg.model.is_push_broom() {
            p.d1.x += cfg.pb_sweep_speed;
            p.d2.x += cfg.pb_sweep_speed;
        }
    }
    if cfg.model.has_angular_velocity() {
        p.w1 = unit_vector(rng) * (cfg.w_scale * cfg.focal);
        p.w2 = unit_vector(rng) * (cfg.w_scale * cfg.focal);
    }
    p
}

/// Offset from the fixed-point condition of row `u` in `frame`: zero when the scanline pose
/// at `u` sees `x` on its own row (rolling shutter) or in its view plane (push-broom).
pub fn fixed_point_offset(params: &MotionParams, frame: Frame, x: &Vector3<f64>, u: f64, mode: RotationMode) -> f64 {
    let y = params.scanline_pose(frame, u, mode).transform(x);
    if params.model.is_push_broom() {
        y.x / y.z
    } else {
        y.x / y.z - u
    }
}

/// Image of world point `x` in `frame`, or `None` if it is behind the camera, has no row
/// solution in the search range, or falls outside `bounds`.
pub fn project(
    params: &MotionParams,
    frame: Frame,
    x: &Vector3<f64>,
    mode: RotationMode,
    bounds: &ImageBounds,
) -> Option<ImagePoint> {
    let h = |u: f64| fixed_point_offset(params, frame, x, u, mode);
    let span = bounds.u_max - bounds.u_min;
    let (lo, hi) = (bounds.u_min - span, bounds.u_max + span);
    let mut u = 0.5 * (bounds.u_min + bounds.u_max);
    let mut converged = false;
    for _ in 0..50 {
        let f = h(u);
        if !f.is_finite() {
            break;
        }
        let step = 1e-6 * (1.0 + u.abs());
        let df = (h(u + step) - h(u - step)) / (2.0 * step);
        if df == 0.0 || !df.is_finite() {
            break;
        }
        let next = u - f / df;
        if !(lo..=hi).contains(&next) {
            break;
        }
        let done = (next - u).abs() <= 1e-15 * (1.0 + u.abs());
        u = next;
        if done || h(u) == 0.0 {
            converged = true;
            break;
        }
    }
    if !converged || h(u).abs() > 1e-12 {
        u = bisect_scan(&h, lo, hi)?;
    }
    let y = params.scanline_pose(frame, u, mode).transform(x);
    if !(y.z > 0.0) {
        return None;
    }
    let p = ImagePoint::new(u, y.y / y.z);
    bounds.contains(p.u, p.v).then_some(p)
}

fn bisect_scan(h: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> Option<f64> {
    const CELLS: usize = 64;
    let width = (hi - lo) / CELLS as f64;
    let mut a = lo;
    let mut fa = h(a);
    for k in 1..=CELLS {
        let b = lo + width * k as f64;
        let fb = h(b);
        if fa.is_finite() && fb.is_finite() && fa * fb <= 0.0 {
            let (mut x0, mut x1, mut f0) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (x0 + x1);
                let fm = h(m);
                if fm == 0.0 || (x1 - x0) <= 1e-16 * (1.0 + m.abs()) {
                    return Some(m);
                }
                if f0 * fm < 0.0 {
                    x1 = m;
                } else {
                    x0 = m;
                    f0 = fm;
                }
            }
            return Some(0.5 * (x0 + x1));
        }
        a = b;
        fa = fb;
    }
    None
}

fn add_noise(p: &ImagePoint, sigma: f64, rng: &mut impl Rng) -> ImagePoint {
    if sigma == 0.0 {
        return *p;
    }
    let nu: f64 = StandardNormal.sample(rng);
    let nv: f64 = StandardNormal.sample(rng);
    ImagePoint::new(p.u + sigma * nu, p.v + sigma * nv)
}

/// Scene for given ground-truth motion: points uniform in image 1 and in depth, kept when
/// they project into image 2 in front of the camera.
pub fn generate_with_params(cfg: &SceneConfig, params: &MotionParams, rng: &mut impl Rng) -> Result<SyntheticTrial> {
    cfg.validate()?;
    params.validate()?;
    let bounds = cfg.bounds();
    let budget = 100 * cfg.n_points;
    let mut clean = Vec::with_capacity(cfg.n_points);
    let mut points = Vec::with_capacity(cfg.n_points);
    let mut attempts = 0;
    while clean.len() < cfg.n_points {
        if attempts >= budget {
            return Err(Error::FrustumExhausted {
                attempts,
                placed: clean.len(),
                requested: cfg.n_points,
            });
        }
        attempts += 1;
        let x1 = ImagePoint::new(
            rng.random_range(bounds.u_min..=bounds.u_max),
            rng.random_range(bounds.v_min..=bounds.v_max),
        );
        let depth = rng.random_range(cfg.depth_min..=cfg.depth_max);
        let pose1 = params.scanline_pose(Frame::First, x1.u, cfg.rotation_mode);
        let world = pose1.inverse_transform(&(x1.ray(params.model) * depth));
        if let Some(x2) = project(params, Frame::Second, &world, cfg.rotation_mode, &bounds) {
            clean.push(Correspondence::new(x1, x2));
            points.push(world);
        }
    }
    let correspondences = clean
        .iter()
        .map(|c| {
            let a = add_noise(&c.x1, cfg.noise_sigma, rng);
            let b = add_noise(&c.x2, cfg.noise_sigma, rng);
            Correspondence::new(a, b)
        })
        .collect();
    Ok(SyntheticTrial {
        params: *params,
        correspondences,
        clean,
        points,
    })
}

/// How many fresh motions a trial may draw before giving up on an unlucky, barely overlapping
/// view pair.
pub const MOTION_REDRAWS: usize = 10;

/// Trial `index` of the configured experiment.
pub fn generate(cfg: &SceneConfig, index: usize) -> Result<SyntheticTrial> {
    let mut rng = cfg.trial_rng(index);
    let mut last = None;
    for _ in 0..MOTION_REDRAWS {
        let params = random_params(cfg, &mut rng);
        match generate_with_params(cfg, &params, &mut rng) {
            Err(e @ Error::FrustumExhausted { .. }) => last = Some(e),
            other => return other,
        }
    }
    Err(last.expect("at least one draw"))
}

/// All `cfg.trials` trials, generated in parallel; identical to a serial loop over [`generate`].
pub fn generate_all(cfg: &SceneConfig) -> Vec<Result<SyntheticTrial>> {
    (0..cfg.trials).into_par_iter().map(|i| generate(cfg, i)).collect()
}

/// Correspondences that satisfy the model's bilinear constraint exactly: `x` is uniform in
/// `bounds`, `u′` is uniform in the row range, and `v′` solves the constraint (which is linear
/// in `v′`). Used where the first-order uniform models must hold to machine precision, which
/// no projection of 3D points achieves.
pub fn sample_on_constraint(
    params: &MotionParams,
    n: usize,
    bounds: &ImageBounds,
    rng: &mut impl Rng,
) -> Result<Vec<Correspondence>> {
    let f = expanded_essential(params)?;
    let mono = params.model.monomials();
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        if attempts >= 100 * n {
            return Err(Error::FrustumExhausted {
                attempts,
                placed: out.len(),
                requested: n,
            });
        }
        attempts += 1;
        let x = ImagePoint::new(
            rng.random_range(bounds.u_min..=bounds.u_max),
            rng.random_range(bounds.v_min..=bounds.v_max),
        );
        let u2 = rng.random_range(bounds.u_min..=bounds.u_max);
        let g = &f.matrix * crate::geometry::lift(&x, params.model).0;
        let (mut alpha, mut beta) = (0.0, 0.0);
        for (i, &(a, b)) in mono.iter().enumerate() {
            let c = g[i] * u2.powi(a as i32);
            if b == 1 {
                alpha += c;
            } else {
                beta += c;
            }
        }
        if alpha.abs() <= 1e-12 * g.amax() {
            continue;
        }
        let v2 = -beta / alpha;
        if bounds.contains(u2, v2) {
            out.push(Correspondence::new(x, ImagePoint::new(u2, v2)));
        }
    }
    Ok(out)
}

/// Geodesic angle between two rotations, `arccos((tr(R̂Rᵀ) − 1)/2)`, evaluated through
/// `atan2` for accuracy near zero.
pub fn error_rotation(estimate: &Rotation3<f64>, truth: &Rotation3<f64>) -> f64 {
    let m = estimate.matrix() * truth.matrix().transpose();
    let cos = 0.5 * (m.trace() - 1.0);
    let sin = 0.5 * crate::geometry::vee(&(m - m.transpose())).norm();
    sin.atan2(cos.clamp(-1.0, 1.0))
}

/// Angle between the lines spanned by two translations (sign-invariant).
pub fn error_translation(estimate: &Vector3<f64>, truth: &Vector3<f64>) -> Result<f64> {
    Ok(angle_between(estimate, truth)?.min(std::f64::consts::PI - angle_between(estimate, truth)?))
}

/// Angle between two directions, `arccos(aᵀb / ‖a‖‖b‖)`; sensitive to sign.
pub fn angle_between(a: &Vector3<f64>, b: &Vector3<f64>) -> Result<f64> {
    if a.norm() == 0.0 || b.norm() == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(a.cross(b).norm().atan2(a.dot(b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::build;

    fn cfg(model: CameraModel) -> SceneConfig {
        SceneConfig {
            model,
            n_points: 40,
            d_scale: 1e-4,
            w_scale: 3e-5,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn zero_velocity_data_satisfy_the_essential_matrix() {
        let c = SceneConfig {
            model: CameraModel::Perspective,
            ..cfg(CameraModel::Perspective)
        };
        let trial = generate(&c, 3).unwrap();
        let f = build(&trial.params).unwrap();
        for corr in &trial.correspondences {
            assert!(f.residual(&corr.x1, &corr.x2).abs() <= 1e-10);
        }
    }

    #[test]
    fn linear_models_are_exact_on_generated_data() {
        for model in [CameraModel::LinearRollingShutter, CameraModel::LinearPushBroom] {
            for i in 0..5 {
                let trial = generate(&cfg(model), i).unwrap();
                let f = build(&trial.params).unwrap();
                for corr in &trial.correspondences {
                    assert!(f.residual(&corr.x1, &corr.x2).abs() <= 1e-10, "{model}");
                }
            }
        }
    }

    #[test]
    fn projections_satisfy_the_fixed_point_condition() {
        for model in CameraModel::ALL {
            for mode in [RotationMode::Exact, RotationMode::Small] {
                let c = SceneConfig {
                    rotation_mode: mode,
                    ..cfg(model)
                };
                let trial = generate(&c, 1).unwrap();
                for (corr, x) in trial.clean.iter().zip(&trial.points) {
                    for (frame, img) in [(Frame::First, corr.x1), (Frame::Second, corr.x2)] {
                        let y = trial.params.scanline_pose(frame, img.u, mode).transform(x);
                        assert!(y.z > 0.0);
                        assert!(fixed_point_offset(&trial.params, frame, x, img.u, mode).abs() <= 1e-10);
                        assert!((y.y / y.z - img.v).abs() <= 1e-9, "{model} {mode:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let c = SceneConfig {
            noise_sigma: 1e-3,
            ..cfg(CameraModel::UniformRollingShutter)
        };
        assert_eq!(generate(&c, 7).unwrap(), generate(&c, 7).unwrap());
        assert_ne!(generate(&c, 7).unwrap(), generate(&c, 8).unwrap());
    }

    #[test]
    fn constraint_samples_are_exact() {
        for model in CameraModel::ALL {
            let c = cfg(model);
            let mut rng = c.trial_rng(0);
            let p = random_params(&c, &mut rng);
            let corrs = sample_on_constraint(&p, 50, &c.bounds(), &mut rng).unwrap();
            let f = build(&p).unwrap();
            for corr in &corrs {
                assert!(f.residual(&corr.x1, &corr.x2).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn rotation_error_examples() {
        let r = Rotation3::from_euler_angles(0.3, 0.2, -0.1);
        assert_eq!(error_rotation(&r, &r), 0.0);
        let axis = Unit::new_normalize(Vector3::new(0.2, -0.5, 0.9));
        let further = Rotation3::from_axis_angle(&axis, 0.1) * r;
        assert!((error_rotation(&further, &r) - 0.1).abs() <= 1e-14);
        assert!((error_rotation(&r, &further) - 0.1).abs() <= 1e-14);
    }

    #[test]
    fn translation_error_examples() {
        let t = Vector3::new(0.3, -0.4, 1.2);
        assert!(error_translation(&(t * 2.0), &t).unwrap() <= 1e-15);
        assert!(error_translation(&(-t), &t).unwrap() <= 1e-15);
        let o = Vector3::new(0.4, 0.3, 0.0);
        assert!((error_translation(&o, &Vector3::new(0.0, 0.0, 1.0)).unwrap() - std::f64::consts::FRAC_PI_2).abs() <= 1e-15);
        assert_eq!(error_translation(&Vector3::zeros(), &t), Err(Error::ZeroVector));
    }
}
