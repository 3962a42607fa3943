//! Generalized essential matrices of the camera hierarchy.
//!
//! For every model the epipolar constraint of a correspondence `x ↔ x′` is the bilinear form
//! `lift(x′)ᵀ F lift(x) = 0`. The 5×5 linear rolling-shutter matrix is assembled entry by entry
//! from its three atomic essential matrices; the other sizes are assembled by expanding the
//! scanline essential polynomial `E(u, u′)` and collecting the coefficient of every monomial
//! product.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::error::{Error, Result};
use crate::geometry::{lift, skew, CameraModel, ImagePoint, MotionParams};

/// A model-tagged square matrix `F` with `lift(x′)ᵀ F lift(x) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedEssential {
    pub model: CameraModel,
    pub matrix: DMatrix<f64>,
}

impl GeneralizedEssential {
    /// Wraps `matrix` without rescaling.
    pub fn from_matrix(model: CameraModel, matrix: DMatrix<f64>) -> Result<Self> {
        let n = model.lifted_dim();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "{model} needs a {n}x{n} matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { model, matrix })
    }

    /// Representative with `‖F‖_F = 1` whose first significant entry (row-major) is positive.
    /// Entries below `1e-12·max|F|` are not considered significant for the sign choice.
    pub fn canonical(&self) -> Self {
        let norm = self.matrix.norm();
        if norm == 0.0 {
            return self.clone();
        }
        let cutoff = 1e-12 * self.matrix.amax();
        let n = self.matrix.nrows();
        let mut sign = 1.0;
        'scan: for i in 0..n {
            for j in 0..n {
                let x = self.matrix[(i, j)];
                if x.abs() > cutoff {
                    sign = x.signum();
                    break 'scan;
                }
            }
        }
        Self {
            model: self.model,
            matrix: &self.matrix * (sign / norm),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Entries on the model's support, row-major.
    pub fn support_vector(&self) -> DVector<f64> {
        let support = self.model.support();
        DVector::from_iterator(
            support.len(),
            support.iter().map(|&(i, j)| self.matrix[(i, j)]),
        )
    }

    /// Largest absolute entry of the top-left 2×2 block (zero for non-perspective models).
    pub fn corner_magnitude(&self) -> f64 {
        if self.model == CameraModel::Perspective {
            return 0.0;
        }
        self.matrix.view((0, 0), (2, 2)).amax()
    }

    /// `lift(x′)ᵀ F lift(x)`.
    pub fn residual(&self, x1: &ImagePoint, x2: &ImagePoint) -> f64 {
        let l1 = lift(x1, self.model).0;
        let l2 = lift(x2, self.model).0;
        l2.dot(&(&self.matrix * l1))
    }
}

/// Free-function form of [`GeneralizedEssential::residual`].
pub fn residual(f: &GeneralizedEssential, x1: &ImagePoint, x2: &ImagePoint) -> f64 {
    f.residual(x1, x2)
}

/// Angle between two matrices seen as vectors, insensitive to sign.
pub fn matrix_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return f64::NAN;
    }
    let a = a / na;
    let b = b / nb;
    let (diff, sum) = ((&a - &b).norm(), (&a + &b).norm());
    2.0 * diff.min(sum).atan2(diff.max(sum))
}

/// Matrix polynomial in `(u, u′)`; `coeffs[p][q]` multiplies `u^p u′^q`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MatPoly {
    coeffs: [[Matrix3<f64>; 3]; 3],
}

impl MatPoly {
    fn zero() -> Self {
        Self {
            coeffs: [[Matrix3::zeros(); 3]; 3],
        }
    }

    fn constant(m: Matrix3<f64>) -> Self {
        let mut out = Self::zero();
        out.coeffs[0][0] = m;
        out
    }

    /// `a + u·b`
    fn linear_in_u(a: Matrix3<f64>, b: Matrix3<f64>) -> Self {
        let mut out = Self::constant(a);
        out.coeffs[1][0] = b;
        out
    }

    /// `a + u′·b`
    fn linear_in_u2(a: Matrix3<f64>, b: Matrix3<f64>) -> Self {
        let mut out = Self::constant(a);
        out.coeffs[0][1] = b;
        out
    }

    fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for p in 0..3 {
            for q in 0..3 {
                if self.coeffs[p][q] == Matrix3::zeros() {
                    continue;
                }
                for r in 0..3 {
                    for s in 0..3 {
                        if other.coeffs[r][s] == Matrix3::zeros() {
                            continue;
                        }
                        assert!(p + r < 3 && q + s < 3, "scanline polynomial degree overflow");
                        out.coeffs[p + r][q + s] += self.coeffs[p][q] * other.coeffs[r][s];
                    }
                }
            }
        }
        out
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for p in 0..3 {
            for q in 0..3 {
                out.coeffs[p][q] -= other.coeffs[p][q];
            }
        }
        out
    }

    /// Multiplies by `u`.
    fn shift_u(&self) -> Self {
        let mut out = Self::zero();
        for p in 0..2 {
            out.coeffs[p + 1] = self.coeffs[p];
        }
        assert!(
            self.coeffs[2].iter().all(|m| *m == Matrix3::zeros()),
            "scanline polynomial degree overflow"
        );
        out
    }
}

/// `E(u, u′) = [t + u′d₂]ₓ R_{uu′} − u R_{uu′}[d₁]ₓ` with
/// `R_{uu′} = (I + u′[w₂]ₓ) R (I − u[w₁]ₓ)`, as a polynomial in `(u, u′)`.
fn scanline_polynomial(p: &MotionParams) -> MatPoly {
    let r = *p.rotation.matrix();
    let left = MatPoly::linear_in_u2(Matrix3::identity(), skew(&p.w2));
    let right = MatPoly::linear_in_u(Matrix3::identity(), -skew(&p.w1));
    let r_rel = left.mul(&MatPoly::constant(r)).mul(&right);
    let trans = MatPoly::linear_in_u2(skew(&p.translation), skew(&p.d2));
    trans
        .mul(&r_rel)
        .sub(&r_rel.mul(&MatPoly::constant(skew(&p.d1))).shift_u())
}

fn monomial_index(model: CameraModel, mono: (u32, u32)) -> usize {
    model
        .monomials()
        .iter()
        .position(|&m| m == mono)
        .unwrap_or_else(|| panic!("monomial u^{} v^{} not in {model} lifting", mono.0, mono.1))
}

/// Collects the coefficient of every `lift(x′)_i · lift(x)_j` product of `x′ᵀ E(u,u′) x`.
fn expand(p: &MotionParams, model: CameraModel) -> DMatrix<f64> {
    let poly = scanline_polynomial(p);
    let n = model.lifted_dim();
    let mut f = DMatrix::zeros(n, n);
    // ray component k contributes (extra power of u, power of v); push-broom rays have no u entry
    let ray: [Option<(u32, u32)>; 3] = if model.is_push_broom() {
        [None, Some((0, 1)), Some((0, 0))]
    } else {
        [Some((1, 0)), Some((0, 1)), Some((0, 0))]
    };
    for pu in 0..3u32 {
        for qu in 0..3u32 {
            let c = poly.coeffs[pu as usize][qu as usize];
            if c == Matrix3::zeros() {
                continue;
            }
            for (a, ra) in ray.iter().enumerate() {
                let Some((ea, va)) = ra else { continue };
                for (b, rb) in ray.iter().enumerate() {
                    let Some((eb, vb)) = rb else { continue };
                    let coeff = c[(a, b)];
                    if coeff == 0.0 {
                        continue;
                    }
                    let i = monomial_index(model, (qu + ea, *va));
                    let j = monomial_index(model, (pu + eb, *vb));
                    f[(i, j)] += coeff;
                }
            }
        }
    }
    f
}

/// Unnormalized generalized essential matrix obtained by programmatic expansion.
pub fn expanded_essential(params: &MotionParams) -> Result<GeneralizedEssential> {
    params.validate()?;
    GeneralizedEssential::from_matrix(params.model, expand(params, params.model))
}

/// Atomic essential matrices of the linear rolling-shutter model:
/// `E₀ = [t]ₓR`, `E₁ = [R d₁]ₓR`, `E₂ = [d₂]ₓR`.
pub fn linear_rs_atoms(params: &MotionParams) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let r = *params.rotation.matrix();
    (
        skew(&params.translation) * r,
        skew(&(r * params.d1)) * r,
        skew(&params.d2) * r,
    )
}

/// Places the three atoms into the 5×5 matrix. The scanline constraint is
/// `x′ᵀ(E₀ + u′E₂ − uE₁)x = 0`; with lifts `(u², uv, u, v, 1)` this gives
///
/// ```text
///      0       0     E2_11              E2_12        E2_13
///      0       0     E2_21              E2_22        E2_23
///  -E1_11  -E1_12   E0_11+E2_31-E1_13   E0_12+E2_32  E0_13+E2_33
///  -E1_21  -E1_22   E0_21-E1_23         E0_22        E0_23
///  -E1_31  -E1_32   E0_31-E1_33         E0_32        E0_33
/// ```
pub fn assemble_linear_rs(e0: &Matrix3<f64>, e1: &Matrix3<f64>, e2: &Matrix3<f64>) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(5, 5);
    for b in 0..3 {
        f[(0, 2 + b)] = e2[(0, b)];
        f[(1, 2 + b)] = e2[(1, b)];
    }
    for a in 0..3 {
        f[(2 + a, 0)] = -e1[(a, 0)];
        f[(2 + a, 1)] = -e1[(a, 1)];
    }
    for a in 0..3 {
        for b in 0..3 {
            f[(2 + a, 2 + b)] = e0[(a, b)];
        }
    }
    for b in 0..3 {
        f[(2, 2 + b)] += e2[(2, b)];
    }
    for a in 0..3 {
        f[(2 + a, 2)] -= e1[(a, 2)];
    }
    f
}

fn check_model(params: &MotionParams, model: CameraModel) -> Result<()> {
    if params.model != model {
        return Err(Error::InvalidInput(format!(
            "expected {model} parameters, got {}",
            params.model
        )));
    }
    params.validate()
}

pub fn build_perspective(params: &MotionParams) -> Result<GeneralizedEssential> {
    check_model(params, CameraModel::Perspective)?;
    let e = skew(&params.translation) * params.rotation.matrix();
    let m = DMatrix::from_iterator(3, 3, e.iter().copied());
    Ok(GeneralizedEssential::from_matrix(CameraModel::Perspective, m)?.canonical())
}

/// 5×5 linear rolling-shutter matrix, assembled from the atoms.
pub fn build_linear_rs(params: &MotionParams) -> Result<GeneralizedEssential> {
    check_model(params, CameraModel::LinearRollingShutter)?;
    let (e0, e1, e2) = linear_rs_atoms(params);
    Ok(GeneralizedEssential::from_matrix(
        CameraModel::LinearRollingShutter,
        assemble_linear_rs(&e0, &e1, &e2),
    )?
    .canonical())
}

/// 7×7 uniform rolling-shutter matrix (first order in the angular velocities).
pub fn build_uniform_rs(params: &MotionParams) -> Result<GeneralizedEssential> {
    check_model(params, CameraModel::UniformRollingShutter)?;
    Ok(expanded_essential(params)?.canonical())
}

/// 4×4 linear push-broom matrix.
pub fn build_linear_pb(params: &MotionParams) -> Result<GeneralizedEssential> {
    check_model(params, CameraModel::LinearPushBroom)?;
    Ok(expanded_essential(params)?.canonical())
}

/// 6×6 uniform push-broom matrix (first order in the angular velocities).
pub fn build_uniform_pb(params: &MotionParams) -> Result<GeneralizedEssential> {
    check_model(params, CameraModel::UniformPushBroom)?;
    Ok(expanded_essential(params)?.canonical())
}

/// Canonical generalized essential matrix for `params.model`.
pub fn build(params: &MotionParams) -> Result<GeneralizedEssential> {
    match params.model {
        CameraModel::Perspective => build_perspective(params),
        CameraModel::LinearPushBroom => build_linear_pb(params),
        CameraModel::LinearRollingShutter => build_linear_rs(params),
        CameraModel::UniformPushBroom => build_uniform_pb(params),
        CameraModel::UniformRollingShutter => build_uniform_rs(params),
    }
}

/// Axis-aligned rectangle in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageBounds {
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl ImageBounds {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }
}

/// Sampled locus in image 2 of the points consistent with `source` in image 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EpipolarCurve {
    pub source: ImagePoint,
    pub points: Vec<ImagePoint>,
    pub degree: u32,
}

/// Samples the epipolar curve of `x` on a regular grid of `u′` over `bounds`.
///
/// Every monomial is at most linear in `v′`, so for fixed `u′` the residual is `α v′ + β`.
pub fn sample_epipolar_curve(
    f: &GeneralizedEssential,
    x: &ImagePoint,
    bounds: &ImageBounds,
    n_samples: usize,
) -> Result<EpipolarCurve> {
    if n_samples < 2 {
        return Err(Error::InvalidInput("n_samples must be at least 2".into()));
    }
    let g = &f.matrix * lift(x, f.model).0;
    let mono = f.model.monomials();
    let scale = g.amax();
    let mut points = Vec::new();
    for k in 0..n_samples {
        let u = bounds.u_min + (bounds.u_max - bounds.u_min) * k as f64 / (n_samples - 1) as f64;
        let (mut alpha, mut beta) = (0.0, 0.0);
        for (i, &(a, b)) in mono.iter().enumerate() {
            let c = g[i] * u.powi(a as i32);
            if b == 1 {
                alpha += c;
            } else {
                beta += c;
            }
        }
        if alpha.abs() <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
            continue;
        }
        let v = -beta / alpha;
        if bounds.contains(u, v) {
            points.push(ImagePoint::new(u, v));
        }
    }
    Ok(EpipolarCurve {
        source: *x,
        points,
        degree: f.model.curve_degree(),
    })
}

/// RMS algebraic residual of the best unit-norm implicit polynomial of total degree `degree`
/// through `points` (smallest singular value of the monomial design matrix over `√n`).
pub fn implicit_fit_residual(points: &[ImagePoint], degree: u32) -> f64 {
    let monos: Vec<(i32, i32)> = (0..=degree as i32)
        .flat_map(|total| (0..=total).map(move |a| (a, total - a)))
        .collect();
    let rows = points.len().max(monos.len());
    let mut a = DMatrix::zeros(rows, monos.len());
    for (r, p) in points.iter().enumerate() {
        for (c, &(i, j)) in monos.iter().enumerate() {
            a[(r, c)] = p.u.powi(i) * p.v.powi(j);
        }
    }
    let sv = a.singular_values();
    sv.min() / (points.len().max(1) as f64).sqrt()
}

/// CSV with header `curve_id,u2,v2`, one line per sampled point.
pub fn curves_to_csv(curves: &[EpipolarCurve]) -> String {
    let mut out = String::from("curve_id,u2,v2\n");
    for (id, c) in curves.iter().enumerate() {
        for p in &c.points {
            let _ = writeln!(out, "{id},{:.17e},{:.17e}", p.u, p.v);
        }
    }
    out
}
