//! Linear estimation of generalized essential matrices and closed-form motion recovery.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::geometry::{lift, vee, CameraModel, Correspondence, Frame, MotionParams, RotationMode, ScanlinePose};
use crate::hierarchy::{assemble_linear_rs, GeneralizedEssential};
use crate::tolerance::Tolerances;

/// Affine map on lifted vectors: non-constant coordinates are shifted by `-centroid` and
/// multiplied by `scale`; the trailing constant 1 is left alone.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationTransform {
    pub centroid: DVector<f64>,
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            centroid: DVector::zeros(dim - 1),
            scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.centroid.len() + 1
    }

    /// Homogeneous matrix `T` with `normalized = T · lifted`.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut t = DMatrix::identity(n, n) * self.scale;
        t[(n - 1, n - 1)] = 1.0;
        for i in 0..n - 1 {
            t[(i, n - 1)] = -self.scale * self.centroid[i];
        }
        t
    }

    pub fn apply(&self, l: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = l.clone();
        for i in 0..n - 1 {
            out[i] = self.scale * (l[i] - self.centroid[i] * l[n - 1]);
        }
        out
    }

    pub fn invert(&self, l: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut out = l.clone();
        for i in 0..n - 1 {
            out[i] = l[i] / self.scale + self.centroid[i] * l[n - 1];
        }
        out
    }

    /// Fits the transform to a set of lifted vectors (trailing entry 1).
    pub fn fit(points: &[DVector<f64>], tol: &Tolerances) -> Result<Self> {
        let n = points
            .first()
            .map(|p| p.len())
            .ok_or_else(|| Error::DegenerateConfiguration("no points to normalize".into()))?;
        let m = points.len() as f64;
        let mut centroid = DVector::zeros(n - 1);
        for p in points {
            centroid += p.rows(0, n - 1);
        }
        centroid /= m;
        let mean_sq = points
            .iter()
            .map(|p| (p.rows(0, n - 1) - &centroid).norm_squared())
            .sum::<f64>()
            / m;
        if !(mean_sq.sqrt() > tol.normalization_spread) {
            return Err(Error::DegenerateConfiguration(
                "all lifted points coincide".into(),
            ));
        }
        Ok(Self {
            centroid,
            scale: ((n - 1) as f64 / mean_sq).sqrt(),
        })
    }
}

/// Normalized liftings of both images plus the transforms that produced them.
#[derive(Debug, Clone)]
pub struct NormalizedSet {
    pub model: CameraModel,
    pub first: Vec<DVector<f64>>,
    pub second: Vec<DVector<f64>>,
    pub t1: NormalizationTransform,
    pub t2: NormalizationTransform,
}

impl NormalizedSet {
    /// Maps a matrix estimated on normalized data back: `F = T₂ᵀ F_n T₁`.
    pub fn denormalize(&self, f_normalized: &DMatrix<f64>) -> DMatrix<f64> {
        self.t2.matrix().transpose() * f_normalized * self.t1.matrix()
    }
}

pub fn normalize_lifted(corrs: &[Correspondence], model: CameraModel, tol: &Tolerances) -> Result<NormalizedSet> {
    let raw1: Vec<_> = corrs.iter().map(|c| lift(&c.x1, model).0).collect();
    let raw2: Vec<_> = corrs.iter().map(|c| lift(&c.x2, model).0).collect();
    let t1 = NormalizationTransform::fit(&raw1, tol)?;
    let t2 = NormalizationTransform::fit(&raw2, tol)?;
    Ok(NormalizedSet {
        model,
        first: raw1.iter().map(|l| t1.apply(l)).collect(),
        second: raw2.iter().map(|l| t2.apply(l)).collect(),
        t1,
        t2,
    })
}

/// One row per correspondence; one column per support entry `(i, j)`, holding `l′_i · l_j`.
pub fn design_matrix(first: &[DVector<f64>], second: &[DVector<f64>], model: CameraModel) -> DMatrix<f64> {
    let support = model.support();
    DMatrix::from_fn(first.len(), support.len(), |r, c| {
        let (i, j) = support[c];
        second[r][i] * first[r][j]
    })
}

/// Output of [`solve_linear`].
#[derive(Debug, Clone)]
pub struct LinearEstimate {
    pub essential: GeneralizedEssential,
    /// `σ_last / σ_second-last` of the normalized design matrix.
    pub residual_ratio: f64,
    /// Descending singular values of the normalized design matrix (padded to a square system).
    pub singular_values: Vec<f64>,
}

pub fn solve_linear(corrs: &[Correspondence], model: CameraModel) -> Result<LinearEstimate> {
    solve_linear_with(corrs, model, &Tolerances::default())
}

/// Null vector of the normalized design matrix, denormalized and canonically scaled.
pub fn solve_linear_with(corrs: &[Correspondence], model: CameraModel, tol: &Tolerances) -> Result<LinearEstimate> {
    let needed = model.linear_point_count();
    if corrs.len() < needed {
        return Err(Error::InsufficientPoints {
            model,
            needed,
            got: corrs.len(),
        });
    }
    if corrs.iter().any(|c| !c.x1.is_finite() || !c.x2.is_finite()) {
        return Err(Error::InvalidInput("non-finite image coordinate".into()));
    }
    let set = normalize_lifted(corrs, model, tol)?;
    let a = design_matrix(&set.first, &set.second, model);
    let k = a.ncols();
    let a = if a.nrows() < k {
        let mut padded = DMatrix::zeros(k, k);
        padded.rows_mut(0, a.nrows()).copy_from(&a);
        padded
    } else {
        a
    };
    let svd = a.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if !(sv[k - 2] > tol.rank_deficiency * sv[0]) {
        return Err(Error::DegenerateConfiguration(format!(
            "design matrix has a multi-dimensional null space (sigma ratio {:.3e})",
            sv[k - 2] / sv[0]
        )));
    }
    let null = v_t.row(order[k - 1]);
    let n = model.lifted_dim();
    let mut f_n = DMatrix::zeros(n, n);
    for (c, &(i, j)) in model.support().iter().enumerate() {
        f_n[(i, j)] = null[c];
    }
    let f = set.denormalize(&f_n);
    Ok(LinearEstimate {
        essential: GeneralizedEssential::from_matrix(model, f)?.canonical(),
        residual_ratio: sv[k - 1] / sv[k - 2],
        singular_values: sv,
    })
}

/// `E₀ = [t]ₓR`, `E₁ = [R d₁]ₓR`, `E₂ = [d₂]ₓR` sharing one unknown scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomicTriple {
    pub e0: Matrix3<f64>,
    pub e1: Matrix3<f64>,
    pub e2: Matrix3<f64>,
}

impl AtomicTriple {
    pub fn from_params(params: &MotionParams) -> Self {
        let (e0, e1, e2) = crate::hierarchy::linear_rs_atoms(params);
        Self { e0, e1, e2 }
    }

    pub fn assemble(&self) -> DMatrix<f64> {
        assemble_linear_rs(&self.e0, &self.e1, &self.e2)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            e0: self.e0 * s,
            e1: self.e1 * s,
            e2: self.e2 * s,
        }
    }

    /// Sum of the scale-free essential violations of the three atoms.
    pub fn violation(&self) -> f64 {
        essential_violation(&self.e0) + essential_violation(&self.e1) + essential_violation(&self.e2)
    }
}

/// `(|det E| + ‖2EEᵀE − tr(EEᵀ)E‖_F) / ‖E‖_F³`; zero exactly for essential matrices.
pub fn essential_violation(e: &Matrix3<f64>) -> f64 {
    let n = e.norm();
    if n == 0.0 {
        return 0.0;
    }
    let eet = e * e.transpose();
    let trace = eet * e * 2.0 - e * eet.trace();
    (e.determinant().abs() + trace.norm()) / (n * n * n)
}

/// Third columns `λ₁c₁ + λ₂c₂` that make `[c₁ c₂ ·]` essential.
///
/// Columns 1–2 of `2EEᵀE − tr(EEᵀ)E = 0` give six equations quadratic in `λ` without linear
/// terms, i.e. linear in `(λ₁², λ₁λ₂, λ₂²)`. Two of them (the largest, then the one with the
/// largest component orthogonal to it) leave a one-parameter family, and `q² = ps` fixes it.
fn complete_third_column(c1: &Vector3<f64>, c2: &Vector3<f64>, tol: &Tolerances) -> Result<Vec<Vector3<f64>>> {
    let c = nalgebra::Matrix3x2::from_columns(&[*c1, *c2]);
    let g = c.transpose() * c;
    let cg = c * g;
    let tr = g.trace();
    let mut rows: Vec<[f64; 4]> = Vec::with_capacity(6);
    for r in 0..3 {
        for k in 0..2 {
            rows.push([
                2.0 * c[(r, 0)] * g[(k, 0)] - g[(0, 0)] * c[(r, k)],
                2.0 * (c[(r, 0)] * g[(k, 1)] + c[(r, 1)] * g[(k, 0)]) - 2.0 * g[(0, 1)] * c[(r, k)],
                2.0 * c[(r, 1)] * g[(k, 1)] - g[(1, 1)] * c[(r, k)],
                2.0 * cg[(r, k)] - tr * c[(r, k)],
            ]);
        }
    }
    let as_vec = |r: &[f64; 4]| nalgebra::Vector4::from_row_slice(r);
    let first = rows
        .iter()
        .map(as_vec)
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("six equations");
    let dir = first.normalize();
    let second = rows
        .iter()
        .map(as_vec)
        .max_by(|a, b| {
            let oa = (a - dir * dir.dot(a)).norm();
            let ob = (b - dir * dir.dot(b)).norm();
            oa.total_cmp(&ob)
        })
        .expect("six equations");

    let r0 = Vector3::new(first[0], first[1], first[2]);
    let r1 = Vector3::new(second[0], second[1], second[2]);
    let n = r0.cross(&r1);
    if n.norm() <= 1e-14 * r0.norm() * r1.norm() {
        return Err(Error::NoRealSolution);
    }
    let n = n.normalize();
    // minimum-norm particular solution of the 2×3 system
    let a = nalgebra::Matrix2x3::from_rows(&[r0.transpose(), r1.transpose()]);
    let b = nalgebra::Vector2::new(-first[3], -second[3]);
    let gram = a * a.transpose();
    let x0 = a.transpose() * gram.try_inverse().ok_or(Error::NoRealSolution)? * b;

    // (q0 + τ nq)² = (p0 + τ np)(s0 + τ ns)
    let (p0, q0, s0) = (x0[0], x0[1], x0[2]);
    let (np, nq, ns) = (n[0], n[1], n[2]);
    let qa = nq * nq - np * ns;
    let qb = 2.0 * q0 * nq - (p0 * ns + s0 * np);
    let qc = q0 * q0 - p0 * s0;
    let taus: Vec<f64> = if qa == 0.0 {
        if qb == 0.0 {
            return Err(Error::NoRealSolution);
        }
        vec![-qc / qb]
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        let slack = tol.negative_square_slack * (qb * qb + (4.0 * qa * qc).abs());
        if disc < -slack {
            return Err(Error::NoRealSolution);
        }
        let root = disc.max(0.0).sqrt();
        // stable pair; the large root overflows harmlessly when qa is tiny
        let qq = -0.5 * (qb + if qb >= 0.0 { root } else { -root });
        if qq == 0.0 {
            vec![0.0]
        } else {
            vec![qq / qa, qc / qq]
        }
    };

    let mut out = Vec::new();
    for tau in taus.into_iter().filter(|t| t.is_finite()) {
        let p = p0 + tau * np;
        let q = q0 + tau * nq;
        let s = s0 + tau * ns;
        let scale = p.abs().max(s.abs()).max(q.abs());
        let slack = tol.negative_square_slack * scale;
        if p < -slack || s < -slack {
            continue;
        }
        let (l1, l2) = if p >= s {
            let l1 = p.max(0.0).sqrt();
            (l1, if l1 > 0.0 { q / l1 } else { 0.0 })
        } else {
            let l2 = s.max(0.0).sqrt();
            (if l2 > 0.0 { q / l2 } else { 0.0 }, l2)
        };
        let col = c1 * l1 + c2 * l2;
        out.push(col);
        out.push(-col);
    }
    if out.is_empty() {
        return Err(Error::NoRealSolution);
    }
    Ok(out)
}

/// All completions of the three atoms, best first (ranked by [`AtomicTriple::violation`]).
pub fn recover_atom_candidates(f: &GeneralizedEssential, tol: &Tolerances) -> Result<Vec<AtomicTriple>> {
    if f.model != CameraModel::LinearRollingShutter {
        return Err(Error::InvalidInput(format!(
            "atomic recovery needs a linear-rs matrix, got {}",
            f.model
        )));
    }
    let m = &f.matrix;
    let norm = m.norm();
    let c1 = -Vector3::new(m[(2, 0)], m[(3, 0)], m[(4, 0)]);
    let c2 = -Vector3::new(m[(2, 1)], m[(3, 1)], m[(4, 1)]);
    let r1 = Vector3::new(m[(0, 2)], m[(0, 3)], m[(0, 4)]);
    let r2 = Vector3::new(m[(1, 2)], m[(1, 3)], m[(1, 4)]);
    let threshold = tol.near_zero_velocity * norm;
    if (c1.norm_squared() + c2.norm_squared()).sqrt() < threshold
        || (r1.norm_squared() + r2.norm_squared()).sqrt() < threshold
    {
        return Err(Error::NearZeroVelocity);
    }
    let e1_cols = complete_third_column(&c1, &c2, tol)?;
    let e2_rows = complete_third_column(&r1, &r2, tol)?;

    let mut out = Vec::with_capacity(e1_cols.len() * e2_rows.len());
    for c3 in &e1_cols {
        let e1 = Matrix3::from_columns(&[c1, c2, *c3]);
        for r3 in &e2_rows {
            let e2 = Matrix3::from_rows(&[r1.transpose(), r2.transpose(), r3.transpose()]);
            let mut e0 = Matrix3::zeros();
            e0[(1, 1)] = m[(3, 3)];
            e0[(1, 2)] = m[(3, 4)];
            e0[(2, 1)] = m[(4, 3)];
            e0[(2, 2)] = m[(4, 4)];
            e0[(0, 0)] = m[(2, 2)] - e2[(2, 0)] + e1[(0, 2)];
            e0[(1, 0)] = m[(3, 2)] + e1[(1, 2)];
            e0[(2, 0)] = m[(4, 2)] + e1[(2, 2)];
            e0[(0, 1)] = m[(2, 3)] - e2[(2, 1)];
            e0[(0, 2)] = m[(2, 4)] - e2[(2, 2)];
            out.push(AtomicTriple { e0, e1, e2 });
        }
    }
    out.sort_by(|a, b| a.violation().total_cmp(&b.violation()));
    Ok(out)
}

/// Best-ranked atom completion of a linear rolling-shutter matrix.
pub fn recover_atoms(f: &GeneralizedEssential) -> Result<AtomicTriple> {
    recover_atoms_with(f, &Tolerances::default())
}

pub fn recover_atoms_with(f: &GeneralizedEssential, tol: &Tolerances) -> Result<AtomicTriple> {
    Ok(recover_atom_candidates(f, tol)?[0])
}

/// Midpoint triangulation of two rays given in their scanline frames.
/// Returns the world point and its depths in both frames.
pub fn triangulate(
    pose1: &ScanlinePose,
    ray1: &Vector3<f64>,
    pose2: &ScanlinePose,
    ray2: &Vector3<f64>,
) -> Option<(Vector3<f64>, f64, f64)> {
    let c1 = -pose1.rotation.transpose() * pose1.translation;
    let c2 = -pose2.rotation.transpose() * pose2.translation;
    let d1 = pose1.rotation.transpose() * ray1;
    let d2 = pose2.rotation.transpose() * ray2;
    // minimize ‖c1 + a d1 − c2 − b d2‖
    let b_vec = c2 - c1;
    let m = nalgebra::Matrix2::new(d1.dot(&d1), -d1.dot(&d2), d1.dot(&d2), -d2.dot(&d2));
    let rhs = nalgebra::Vector2::new(d1.dot(&b_vec), d2.dot(&b_vec));
    let det = m.determinant();
    if det.abs() <= 1e-14 * d1.norm_squared() * d2.norm_squared() {
        return None;
    }
    let ab = m.try_inverse()? * rhs;
    let x = (c1 + d1 * ab[0] + c2 + d2 * ab[1]) * 0.5;
    Some((x, pose1.transform(&x).z, pose2.transform(&x).z))
}

/// Number of correspondences whose triangulation lies in front of both scanline cameras.
pub fn count_in_front(params: &MotionParams, corrs: &[Correspondence]) -> usize {
    corrs
        .iter()
        .filter(|c| {
            let p1 = params.scanline_pose(Frame::First, c.x1.u, RotationMode::Exact);
            let p2 = params.scanline_pose(Frame::Second, c.x2.u, RotationMode::Exact);
            matches!(
                triangulate(&p1, &c.x1.ray(params.model), &p2, &c.x2.ray(params.model)),
                Some((_, z1, z2)) if z1 > 0.0 && z2 > 0.0
            )
        })
        .count()
}

/// Flips the sign of `(t, d₁, d₂)` if that puts more points in front of both cameras.
pub fn orient_by_cheirality(params: &MotionParams, corrs: &[Correspondence]) -> MotionParams {
    let flipped = params.scaled(-1.0);
    if count_in_front(&flipped, corrs) > count_in_front(params, corrs) {
        flipped
    } else {
        *params
    }
}

/// Twisted-pair rotations of an essential matrix (the matrix is projected to the nearest
/// essential matrix implicitly through its SVD).
pub fn essential_rotations(e: &Matrix3<f64>) -> [Matrix3<f64>; 2] {
    let svd = e.svd(true, true);
    let mut u = svd.u.expect("left singular vectors");
    let mut v_t = svd.v_t.expect("right singular vectors");
    // order by singular value so the null direction is last
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    u = Matrix3::from_fn(|i, j| u[(i, idx[j])]);
    v_t = Matrix3::from_fn(|i, j| v_t[(idx[i], j)]);
    if u.determinant() < 0.0 {
        u = -u;
    }
    if v_t.determinant() < 0.0 {
        v_t = -v_t;
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    [u * w * v_t, u * w.transpose() * v_t]
}

fn to_rotation(m: &Matrix3<f64>) -> nalgebra::Rotation3<f64> {
    // re-orthonormalize to remove rounding drift
    nalgebra::Rotation3::from_matrix_eps(m, 1e-15, 100, nalgebra::Rotation3::identity())
}

/// Motion from linear rolling-shutter atoms: SVD twisted pair for `R`, `t = vee(E₀Rᵀ)`,
/// `d₂ = vee(E₂Rᵀ)`, `d₁ = Rᵀ vee(E₁Rᵀ)`, with the common sign and the twisted pair chosen by
/// cheirality. The result is gauge-fixed to `‖t‖ = 1`.
pub fn decompose_atoms(atoms: &AtomicTriple, corrs: &[Correspondence]) -> Result<MotionParams> {
    decompose(atoms, corrs, CameraModel::LinearRollingShutter)
}

/// Relative pose from an essential matrix, disambiguated by cheirality.
pub fn decompose_essential(e: &Matrix3<f64>, corrs: &[Correspondence]) -> Result<MotionParams> {
    let atoms = AtomicTriple {
        e0: *e,
        e1: Matrix3::zeros(),
        e2: Matrix3::zeros(),
    };
    decompose(&atoms, corrs, CameraModel::Perspective)
}

fn decompose(atoms: &AtomicTriple, corrs: &[Correspondence], model: CameraModel) -> Result<MotionParams> {
    let (count, params) = most_in_front(atoms, corrs, model)?;
    if 2 * count <= corrs.len() {
        return Err(Error::CheiralityAmbiguous {
            in_front: count,
            total: corrs.len(),
        });
    }
    params.gauge_fixed()
}

fn most_in_front(atoms: &AtomicTriple, corrs: &[Correspondence], model: CameraModel) -> Result<(usize, MotionParams)> {
    if atoms.e0.norm() == 0.0 || !atoms.e0.iter().all(|x| x.is_finite()) {
        return Err(Error::DegenerateConfiguration("zero essential matrix".into()));
    }
    let mut best: Option<(usize, MotionParams)> = None;
    for r in essential_rotations(&atoms.e0) {
        let rotation = to_rotation(&r);
        let rm = *rotation.matrix();
        let t = vee(&(atoms.e0 * rm.transpose()));
        let d2 = vee(&(atoms.e2 * rm.transpose()));
        let d1 = rm.transpose() * vee(&(atoms.e1 * rm.transpose()));
        for s in [1.0, -1.0] {
            let p = if model == CameraModel::Perspective {
                MotionParams::perspective(rotation, t * s)
            } else {
                MotionParams::linear(model, rotation, t * s, d1 * s, d2 * s)
            };
            let count = count_in_front(&p, corrs);
            if best.as_ref().is_none_or(|(c, _)| count > *c) {
                best = Some((count, p));
            }
        }
    }
    let (count, params) = best.expect("four candidates");
    Ok((count, params.gauge_fixed()?))
}

/// Normalized 8-point estimate of the global-shutter relative pose.
pub fn eight_point(corrs: &[Correspondence]) -> Result<MotionParams> {
    let est = solve_linear(corrs, CameraModel::Perspective)?;
    let m = &est.essential.matrix;
    let e = Matrix3::from_fn(|i, j| m[(i, j)]);
    decompose_essential(&e, corrs)
}

/// Like [`eight_point`], but returns the candidate with the most points in front even when
/// that is not a majority. Useful as a starting point for refinement on data the
/// global-shutter model explains poorly.
pub fn eight_point_unchecked(corrs: &[Correspondence]) -> Result<MotionParams> {
    let est = solve_linear(corrs, CameraModel::Perspective)?;
    let m = &est.essential.matrix;
    let e = Matrix3::from_fn(|i, j| m[(i, j)]);
    let atoms = AtomicTriple {
        e0: e,
        e1: Matrix3::zeros(),
        e2: Matrix3::zeros(),
    };
    Ok(most_in_front(&atoms, corrs, CameraModel::Perspective)?.1)
}

/// Linear 20-point pipeline: normalized DLT for the 5×5 matrix, atomic recovery, decomposition.
pub fn solve_20pt(corrs: &[Correspondence]) -> Result<MotionParams> {
    solve_20pt_with(corrs, &Tolerances::default())
}

pub fn solve_20pt_with(corrs: &[Correspondence], tol: &Tolerances) -> Result<MotionParams> {
    let est = solve_linear_with(corrs, CameraModel::LinearRollingShutter, tol)?;
    let atoms = recover_atoms_with(&est.essential, tol)?;
    decompose_atoms(&atoms, corrs)
}

/// Linear rolling-shutter velocities `d₁, d₂` that best satisfy the scanline constraint for a
/// fixed pose, in the algebraic least-squares sense. The constraint
/// `x′ᵀ([t]ₓR + u′[d₂]ₓR − uR[d₁]ₓ)x = 0` is linear in the velocities once `R, t` are known.
pub fn velocities_for_pose(params: &MotionParams, corrs: &[Correspondence]) -> Result<MotionParams> {
    if corrs.len() < 6 {
        return Err(Error::InsufficientPoints {
            model: CameraModel::LinearRollingShutter,
            needed: 6,
            got: corrs.len(),
        });
    }
    let r = *params.rotation.matrix();
    let e0 = crate::geometry::skew(&params.translation) * r;
    let mut a = DMatrix::zeros(corrs.len(), 6);
    let mut b = DVector::zeros(corrs.len());
    for (i, c) in corrs.iter().enumerate() {
        let x1 = c.x1.ray(CameraModel::LinearRollingShutter);
        let x2 = c.x2.ray(CameraModel::LinearRollingShutter);
        let g1 = -c.x1.u * x1.cross(&(r.transpose() * x2));
        let g2 = c.x2.u * (r * x1).cross(&x2);
        for k in 0..3 {
            a[(i, k)] = g1[k];
            a[(i, k + 3)] = g2[k];
        }
        b[i] = -x2.dot(&(e0 * x1));
    }
    let sol = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::DegenerateConfiguration(e.to_string()))?;
    let mut p = params.with_model(CameraModel::LinearRollingShutter);
    p.d1 = Vector3::new(sol[0], sol[1], sol[2]);
    p.d2 = Vector3::new(sol[3], sol[4], sol[5]);
    Ok(p)
}
