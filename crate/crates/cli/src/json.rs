//! JSON documents written and read by the commands. Their schemas live in `schemas/`.

use nalgebra::{DMatrix, Matrix3, Rotation3, Vector3};
use rs_epipolar::{CameraModel, GeneralizedEssential, MotionParams};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Motion parameters. `rotation` is row-major; velocities a model lacks are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsJson {
    pub model: CameraModel,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
    pub w1: [f64; 3],
    pub w2: [f64; 3],
    pub d1: [f64; 3],
    pub d2: [f64; 3],
}

fn arr(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn vec3(a: &[f64; 3]) -> Vector3<f64> {
    Vector3::new(a[0], a[1], a[2])
}

impl From<&MotionParams> for ParamsJson {
    fn from(p: &MotionParams) -> Self {
        let r = p.rotation.matrix();
        Self {
            model: p.model,
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: arr(&p.translation),
            w1: arr(&p.w1),
            w2: arr(&p.w2),
            d1: arr(&p.d1),
            d2: arr(&p.d2),
        }
    }
}

impl ParamsJson {
    pub fn to_params(&self) -> Result<MotionParams, CliError> {
        let m = Matrix3::from_fn(|i, j| self.rotation[i][j]);
        let orthonormal = (m.transpose() * m - Matrix3::identity()).amax() <= 1e-9 && (m.determinant() - 1.0).abs() <= 1e-9;
        if !orthonormal {
            return Err(CliError::Parse("rotation is not a proper orthonormal matrix".into()));
        }
        let rotation = Rotation3::from_matrix_eps(&m, 1e-15, 100, Rotation3::identity());
        let mut p = MotionParams::perspective(rotation, vec3(&self.translation));
        p.model = self.model;
        p.w1 = vec3(&self.w1);
        p.w2 = vec3(&self.w2);
        p.d1 = vec3(&self.d1);
        p.d2 = vec3(&self.d2);
        let p = p.with_model(self.model);
        p.validate()?;
        Ok(p)
    }
}

/// A generalized essential matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub model: CameraModel,
    pub matrix: Vec<Vec<f64>>,
}

impl From<&GeneralizedEssential> for MatrixJson {
    fn from(f: &GeneralizedEssential) -> Self {
        Self {
            model: f.model,
            matrix: (0..f.matrix.nrows()).map(|i| f.matrix.row(i).iter().copied().collect()).collect(),
        }
    }
}

impl MatrixJson {
    pub fn to_essential(&self) -> Result<GeneralizedEssential, CliError> {
        let n = self.model.lifted_dim();
        if self.matrix.len() != n || self.matrix.iter().any(|r| r.len() != n) {
            return Err(CliError::Parse(format!("{} matrix must be {n}x{n}", self.model)));
        }
        let m = DMatrix::from_fn(n, n, |i, j| self.matrix[i][j]);
        Ok(GeneralizedEssential::from_matrix(self.model, m)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    /// Sampson error summed over the evaluated points.
    pub sampson_total: f64,
    pub sampson_mean: f64,
    /// Root mean square of the algebraic residual `l′ᵀ F l` with the unit-norm `F`.
    pub algebraic_rms: f64,
    /// Points skipped because their Sampson denominator vanished.
    pub skipped: usize,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub model: CameraModel,
    pub chain: String,
    pub algorithm: String,
    pub n_points: usize,
    /// `null` when the chain estimates only the matrix.
    pub params: Option<ParamsJson>,
    pub matrix: MatrixJson,
    /// Over the inliers when RANSAC ran, otherwise over all points.
    pub residuals: ResidualStats,
    pub inliers: Option<Vec<bool>>,
    pub iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub model: CameraModel,
    pub n_points: usize,
    /// Points triangulating in front of both cameras under the given motion.
    pub in_front: usize,
    pub cheirality_fraction: f64,
    pub max_abs_residual: f64,
    pub sampson_total: f64,
}

/// Written to stderr when a command fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub error: String,
    pub message: String,
    pub exit_code: i32,
}
