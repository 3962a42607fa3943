//! Rotation and pose algebra for cameras whose pose varies from scanline to scanline.
//!
//! Conventions used throughout the crate:
//!
//! * A pose `[R, t]` maps a world point into the camera frame, `X_c = R X + t`.
//! * Frame 1 has reference pose `[I, 0]`, frame 2 has reference pose `[R, t]`.
//! * The scanline (row) coordinate `u` is the first normalized image coordinate, so an image
//!   point is `(u, v)` with homogeneous ray `(u, v, 1)` for rolling-shutter and perspective
//!   cameras and `(0, v, 1)` for push-broom cameras (`u` is then the sweep time).
//! * Velocities `w`, `d` are expressed per unit of normalized `u`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The five camera models of the generalized-essential hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CameraModel {
    #[serde(rename = "perspective")]
    Perspective,
    #[serde(rename = "linear-pb")]
    LinearPushBroom,
    #[serde(rename = "linear-rs")]
    LinearRollingShutter,
    #[serde(rename = "uniform-pb")]
    UniformPushBroom,
    #[serde(rename = "uniform-rs")]
    UniformRollingShutter,
}

impl CameraModel {
    pub const ALL: [CameraModel; 5] = [
        CameraModel::Perspective,
        CameraModel::LinearPushBroom,
        CameraModel::LinearRollingShutter,
        CameraModel::UniformPushBroom,
        CameraModel::UniformRollingShutter,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CameraModel::Perspective => "perspective",
            CameraModel::LinearPushBroom => "linear-pb",
            CameraModel::LinearRollingShutter => "linear-rs",
            CameraModel::UniformPushBroom => "uniform-pb",
            CameraModel::UniformRollingShutter => "uniform-rs",
        }
    }

    /// Monomials of the lifted point as `(power of u, power of v)`, in lifting order.
    pub fn monomials(self) -> &'static [(u32, u32)] {
        match self {
            CameraModel::Perspective => &[(1, 0), (0, 1), (0, 0)],
            CameraModel::LinearPushBroom => &[(1, 1), (1, 0), (0, 1), (0, 0)],
            CameraModel::LinearRollingShutter => &[(2, 0), (1, 1), (1, 0), (0, 1), (0, 0)],
            CameraModel::UniformPushBroom => &[(2, 1), (2, 0), (1, 1), (1, 0), (0, 1), (0, 0)],
            CameraModel::UniformRollingShutter => {
                &[(3, 0), (2, 1), (2, 0), (1, 1), (1, 0), (0, 1), (0, 0)]
            }
        }
    }

    /// Side length of the generalized essential matrix.
    pub fn lifted_dim(self) -> usize {
        self.monomials().len()
    }

    /// Points needed by the linear solver (unknown entries minus one).
    pub fn linear_point_count(self) -> usize {
        self.support().len() - 1
    }

    /// Degrees of freedom of the motion, i.e. the minimal number of correspondences.
    pub fn minimal_point_count(self) -> usize {
        match self {
            CameraModel::Perspective => 5,
            CameraModel::LinearPushBroom | CameraModel::LinearRollingShutter => 11,
            CameraModel::UniformPushBroom | CameraModel::UniformRollingShutter => 17,
        }
    }

    /// Positions `(row, col)` of the generalized essential matrix that may be nonzero.
    pub fn support(self) -> Vec<(usize, usize)> {
        let n = self.lifted_dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                if self == CameraModel::Perspective || i >= 2 || j >= 2 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn is_push_broom(self) -> bool {
        matches!(
            self,
            CameraModel::LinearPushBroom | CameraModel::UniformPushBroom
        )
    }

    pub fn has_linear_velocity(self) -> bool {
        self != CameraModel::Perspective
    }

    pub fn has_angular_velocity(self) -> bool {
        matches!(
            self,
            CameraModel::UniformPushBroom | CameraModel::UniformRollingShutter
        )
    }

    /// Degree of the epipolar curves in the second image.
    pub fn curve_degree(self) -> u32 {
        match self {
            CameraModel::Perspective => 1,
            CameraModel::LinearPushBroom | CameraModel::LinearRollingShutter => 2,
            CameraModel::UniformPushBroom | CameraModel::UniformRollingShutter => 3,
        }
    }

    /// The model obtained by dropping the angular velocities.
    pub fn linear_counterpart(self) -> CameraModel {
        match self {
            CameraModel::UniformPushBroom => CameraModel::LinearPushBroom,
            CameraModel::UniformRollingShutter => CameraModel::LinearRollingShutter,
            other => other,
        }
    }
}

impl fmt::Display for CameraModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CameraModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CameraModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown camera model '{s}'")))
    }
}

/// How the per-scanline rotation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RotationMode {
    /// Rodrigues formula; the scanline rotation is orthonormal.
    #[default]
    Exact,
    /// First-order approximation `I + u[w]ₓ`.
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    First,
    Second,
}

/// A point in normalized (calibrated) image coordinates. `u` is the scanline ordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagePoint {
    pub u: f64,
    pub v: f64,
}

impl ImagePoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Homogeneous viewing ray in the local scanline frame.
    pub fn ray(&self, model: CameraModel) -> Vector3<f64> {
        if model.is_push_broom() {
            Vector3::new(0.0, self.v, 1.0)
        } else {
            Vector3::new(self.u, self.v, 1.0)
        }
    }
}

/// A point pair `x ↔ x′` between image 1 and image 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub x1: ImagePoint,
    pub x2: ImagePoint,
}

impl Correspondence {
    pub fn new(x1: ImagePoint, x2: ImagePoint) -> Self {
        Self { x1, x2 }
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Vector of the antisymmetric part of `m`; the least-squares inverse of [`skew`].
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rotation by angle `u·‖w‖` about `w/‖w‖` (Rodrigues).
pub fn rotation_exact(w: &Vector3<f64>, u: f64) -> Rotation3<f64> {
    let omega = w.norm();
    if omega == 0.0 {
        return Rotation3::identity();
    }
    let n = skew(&(w / omega));
    let angle = u * omega;
    let m = Matrix3::identity() + n * angle.sin() + n * n * (1.0 - angle.cos());
    Rotation3::from_matrix_unchecked(m)
}

/// First-order rotation `I + u[w]ₓ`. Not orthonormal unless `u·w = 0`.
pub fn rotation_small(w: &Vector3<f64>, u: f64) -> Matrix3<f64> {
    Matrix3::identity() + skew(w) * u
}

/// Relative pose between the two views plus the intra-frame velocities of both cameras.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParams {
    pub model: CameraModel,
    pub rotation: Rotation3<f64>,
    pub translation: Vector3<f64>,
    pub w1: Vector3<f64>,
    pub w2: Vector3<f64>,
    pub d1: Vector3<f64>,
    pub d2: Vector3<f64>,
}

impl MotionParams {
    /// Global-shutter relative pose.
    pub fn perspective(rotation: Rotation3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            model: CameraModel::Perspective,
            rotation,
            translation,
            w1: Vector3::zeros(),
            w2: Vector3::zeros(),
            d1: Vector3::zeros(),
            d2: Vector3::zeros(),
        }
    }

    /// Pose with translational velocities only (linear rolling shutter or push-broom).
    pub fn linear(
        model: CameraModel,
        rotation: Rotation3<f64>,
        translation: Vector3<f64>,
        d1: Vector3<f64>,
        d2: Vector3<f64>,
    ) -> Self {
        Self {
            model,
            rotation,
            translation,
            w1: Vector3::zeros(),
            w2: Vector3::zeros(),
            d1,
            d2,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        model: CameraModel,
        rotation: Rotation3<f64>,
        translation: Vector3<f64>,
        w1: Vector3<f64>,
        w2: Vector3<f64>,
        d1: Vector3<f64>,
        d2: Vector3<f64>,
    ) -> Self {
        Self {
            model,
            rotation,
            translation,
            w1,
            w2,
            d1,
            d2,
        }
    }

    /// Checks that velocities unused by the model are exactly zero.
    pub fn validate(&self) -> Result<()> {
        let finite = self.rotation.matrix().iter().all(|x| x.is_finite())
            && [self.translation, self.w1, self.w2, self.d1, self.d2]
                .iter()
                .all(|v| v.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidInput("non-finite motion parameter".into()));
        }
        if !self.model.has_angular_velocity() && (self.w1 != Vector3::zeros() || self.w2 != Vector3::zeros()) {
            return Err(Error::InvalidInput(format!(
                "{} does not admit angular velocities",
                self.model
            )));
        }
        if !self.model.has_linear_velocity() && (self.d1 != Vector3::zeros() || self.d2 != Vector3::zeros()) {
            return Err(Error::InvalidInput(format!(
                "{} does not admit linear velocities",
                self.model
            )));
        }
        Ok(())
    }

    /// Same motion reinterpreted under another model, dropping velocities the model cannot express.
    pub fn with_model(&self, model: CameraModel) -> Self {
        let mut out = *self;
        out.model = model;
        if !model.has_angular_velocity() {
            out.w1 = Vector3::zeros();
            out.w2 = Vector3::zeros();
        }
        if !model.has_linear_velocity() {
            out.d1 = Vector3::zeros();
            out.d2 = Vector3::zeros();
        }
        out
    }

    /// Rescales `t`, `d1`, `d2` so that `‖t‖ = 1`. Angular velocities are scale-free.
    pub fn gauge_fixed(&self) -> Result<Self> {
        let n = self.translation.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::ZeroVector);
        }
        Ok(self.scaled(1.0 / n))
    }

    /// Multiplies the translational quantities by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = *self;
        out.translation *= s;
        out.d1 *= s;
        out.d2 *= s;
        out
    }

    /// Pose of scanline `u` in the chosen frame.
    pub fn scanline_pose(&self, frame: Frame, u: f64, mode: RotationMode) -> ScanlinePose {
        let (r0, t0, w, d) = match frame {
            Frame::First => (Matrix3::identity(), Vector3::zeros(), self.w1, self.d1),
            Frame::Second => (*self.rotation.matrix(), self.translation, self.w2, self.d2),
        };
        let rotation = if !self.model.has_angular_velocity() {
            r0
        } else {
            match mode {
                RotationMode::Exact => rotation_exact(&w, u).matrix() * r0,
                RotationMode::Small => rotation_small(&w, u) * r0,
            }
        };
        ScanlinePose {
            rotation,
            translation: t0 + d * u,
            row: u,
        }
    }

    /// First-order scanline essential matrix `E(u, u′)` relating a ray seen on row `u` of
    /// image 1 to a ray seen on row `u′` of image 2:
    ///
    /// `E = [t + u′d₂]ₓ R_{uu′} − u R_{uu′}[d₁]ₓ`, with `R_{uu′} = (I + u′[w₂]ₓ) R (I − u[w₁]ₓ)`.
    ///
    /// Exact for perspective and linear models; first order in the angular velocities otherwise.
    pub fn scanline_essential(&self, u1: f64, u2: f64) -> Matrix3<f64> {
        let r = self.rotation.matrix();
        let r_rel = rotation_small(&self.w2, u2) * r * rotation_small(&self.w1, -u1);
        skew(&(self.translation + self.d2 * u2)) * r_rel - r_rel * skew(&self.d1) * u1
    }
}

/// Pose `[R_u, t_u]` of a single scanline. `rotation` is only orthonormal in exact mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanlinePose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub row: f64,
}

impl ScanlinePose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            row: 0.0,
        }
    }

    /// World point expressed in this scanline's frame.
    pub fn transform(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * x + self.translation
    }

    /// Exact inverse of [`Self::transform`]; uses a linear solve so it stays exact when the
    /// rotation is the non-orthonormal small-rotation approximation.
    pub fn inverse_transform(&self, x_cam: &Vector3<f64>) -> Vector3<f64> {
        let y = x_cam - self.translation;
        self.rotation
            .lu()
            .solve(&y)
            .unwrap_or_else(|| self.rotation.transpose() * y)
    }
}

/// Essential matrix between two scanline poses, with a flag for zero baseline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseEssential {
    pub matrix: Matrix3<f64>,
    pub degenerate: bool,
}

/// `E = [t_j − R_j R_iᵀ t_i]ₓ R_j R_iᵀ`, so that `x_jᵀ E x_i = 0`.
pub fn pairwise_essential(pose_i: &ScanlinePose, pose_j: &ScanlinePose) -> PairwiseEssential {
    let r_rel = pose_j.rotation * pose_i.rotation.transpose();
    let t_rel = pose_j.translation - r_rel * pose_i.translation;
    let scale = 1.0 + pose_i.translation.norm().max(pose_j.translation.norm());
    PairwiseEssential {
        matrix: skew(&t_rel) * r_rel,
        degenerate: t_rel.norm() <= 1e-14 * scale,
    }
}

/// Monomial lifting of an image point, ordered as in [`CameraModel::monomials`].
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedPoint(pub DVector<f64>);

impl LiftedPoint {
    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

pub fn lift(p: &ImagePoint, model: CameraModel) -> LiftedPoint {
    LiftedPoint(DVector::from_iterator(
        model.lifted_dim(),
        model
            .monomials()
            .iter()
            .map(|&(a, b)| p.u.powi(a as i32) * p.v.powi(b as i32)),
    ))
}

/// Partial derivatives of the lifted vector with respect to `u` and `v`.
pub fn lift_jacobian(p: &ImagePoint, model: CameraModel) -> (DVector<f64>, DVector<f64>) {
    let mono = model.monomials();
    let du = DVector::from_iterator(
        mono.len(),
        mono.iter().map(|&(a, b)| {
            if a == 0 {
                0.0
            } else {
                a as f64 * p.u.powi(a as i32 - 1) * p.v.powi(b as i32)
            }
        }),
    );
    let dv = DVector::from_iterator(
        mono.len(),
        mono.iter().map(|&(a, b)| {
            if b == 0 {
                0.0
            } else {
                b as f64 * p.u.powi(a as i32) * p.v.powi(b as i32 - 1)
            }
        }),
    );
    (du, dv)
}

/// Angle-axis vector of a rotation (inverse Rodrigues).
pub fn rotation_log(r: &Rotation3<f64>) -> Vector3<f64> {
    r.scaled_axis()
}

pub fn rotation_from_angle_axis(v: &Vector3<f64>) -> Rotation3<f64> {
    rotation_exact(v, 1.0)
}
