use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rs_epipolar::geometry::{rotation_from_angle_axis, rotation_log};
use rs_epipolar::linear::orient_by_cheirality;
use rs_epipolar::nonlinear::{fit, minimal_solve, objective, refine, solve_global_shutter, SampsonConfig};
use rs_epipolar::robust::{ransac, RansacConfig};
use rs_epipolar::synth::{error_rotation, generate, random_params, sample_on_constraint, SceneConfig};
use rs_epipolar::{CameraModel, Correspondence, Error, ImagePoint, MotionParams};

fn scene(model: CameraModel, n_points: usize) -> SceneConfig {
    SceneConfig {
        model,
        n_points,
        ..Default::default()
    }
}

fn distance(a: &MotionParams, b: &MotionParams) -> f64 {
    [
        error_rotation(&a.rotation, &b.rotation),
        (a.translation - b.translation).amax(),
        (a.d1 - b.d1).amax(),
        (a.d2 - b.d2).amax(),
        (a.w1 - b.w1).amax(),
        (a.w2 - b.w2).amax(),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}

fn perturbed(p: &MotionParams, sigma: f64, rng: &mut ChaCha8Rng) -> MotionParams {
    let n = Normal::new(0.0, sigma).unwrap();
    let mut g = || Vector3::new(n.sample(rng), n.sample(rng), n.sample(rng));
    let mut q = *p;
    q.rotation = rotation_from_angle_axis(&(rotation_log(&p.rotation) + g()));
    q.translation += g();
    q.d1 += g();
    q.d2 += g();
    q
}

#[test]
fn refine_converges_from_nearby_starts() {
    let cfg = scene(CameraModel::LinearRollingShutter, 50);
    let sampson = SampsonConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = 200;
    let ok = (0..trials)
        .filter(|&i| {
            let t = generate(&cfg, i).unwrap();
            let init = perturbed(&t.params, 1e-2, &mut rng);
            refine(&init, &t.correspondences, cfg.model, &sampson).is_ok_and(|r| distance(&r.params, &t.params) <= 1e-6)
        })
        .count();
    assert!(ok * 100 >= 95 * trials, "{ok}/{trials}");
}

#[test]
fn refine_ignores_the_translation_scale_of_the_start() {
    let sampson = SampsonConfig::default();
    let cfg = scene(CameraModel::LinearRollingShutter, 50);
    for i in 0..5 {
        let t = generate(&cfg, i).unwrap();
        let init = perturbed(&t.params, 1e-2, &mut ChaCha8Rng::seed_from_u64(i as u64));
        let a = refine(&init, &t.correspondences, cfg.model, &sampson).unwrap();
        for alpha in [0.25, 3.7] {
            let b = refine(&init.scaled(alpha), &t.correspondences, cfg.model, &sampson).unwrap();
            assert!(distance(&a.params, &b.params) <= 1e-8, "{alpha}: {}", distance(&a.params, &b.params));
        }
        assert!((a.params.translation.norm() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn noisy_refine_reaches_the_same_minimum_from_a_rescaled_start() {
    // The noisy minimum is flat: starts differing by rounding stop up to ~1e-6 apart along the
    // valley at an objective equal to working precision.
    let sampson = SampsonConfig::default();
    let cfg = SceneConfig {
        noise_sigma: 1e-3,
        ..scene(CameraModel::LinearRollingShutter, 50)
    };
    for i in 0..5 {
        let t = generate(&cfg, i).unwrap();
        let init = perturbed(&t.params, 1e-2, &mut ChaCha8Rng::seed_from_u64(i as u64));
        let a = refine(&init, &t.correspondences, cfg.model, &sampson).unwrap();
        let b = refine(&init.scaled(3.7), &t.correspondences, cfg.model, &sampson).unwrap();
        assert!((a.objective - b.objective).abs() <= 1e-12 * a.objective);
        assert!(distance(&a.params, &b.params) <= 1e-5);
    }
}

#[test]
fn uniform_rolling_shutter_minimal_set_is_fitted_exactly() {
    let model = CameraModel::UniformRollingShutter;
    let cfg = scene(model, 17);
    let sampson = SampsonConfig::default();
    for i in 0..5 {
        let mut rng = cfg.trial_rng(i);
        let p = random_params(&cfg, &mut rng);
        let corrs = sample_on_constraint(&p, model.minimal_point_count(), &cfg.bounds(), &mut rng).unwrap();
        let hint = perturbed(&p, 1e-3, &mut rng);
        let r = minimal_solve(&corrs, model, &sampson, Some(&hint)).unwrap();
        assert!(r.objective <= 1e-12, "{i}: {}", r.objective);
    }
}

#[test]
fn perspective_minimal_solve_matches_the_global_shutter_pipeline() {
    let cfg = scene(CameraModel::Perspective, 30);
    let sampson = SampsonConfig::default();
    for i in 0..10 {
        let t = generate(&cfg, i).unwrap();
        let a = minimal_solve(&t.correspondences, CameraModel::Perspective, &sampson, None).unwrap();
        let b = solve_global_shutter(&t.correspondences, &sampson).unwrap();
        assert!(distance(&a.params, &b.params) <= 1e-8);
        assert!(distance(&a.params, &t.params) <= 1e-8);
    }
}

#[test]
fn rolling_shutter_fit_never_loses_to_global_shutter() {
    let cfg = SceneConfig {
        noise_sigma: 2e-3,
        d_scale: 1e-2,
        ..scene(CameraModel::LinearRollingShutter, 100)
    };
    let sampson = SampsonConfig::default();
    let (mut rs, mut gs) = (Vec::new(), Vec::new());
    for i in 0..20 {
        let t = generate(&cfg, i).unwrap();
        let r = fit(&t.correspondences, cfg.model, &sampson, None).unwrap();
        let g = solve_global_shutter(&t.correspondences, &sampson).unwrap();
        assert!(r.objective <= g.objective * (1.0 + 1e-9), "{i}: {} vs {}", r.objective, g.objective);
        rs.push(r.objective);
        gs.push(g.objective);
    }
    rs.sort_by(f64::total_cmp);
    gs.sort_by(f64::total_cmp);
    assert!(rs[10] <= gs[10]);
    assert_eq!(
        objective(&generate(&cfg, 0).unwrap().params, &generate(&cfg, 0).unwrap().clean, Default::default()).map(|x| x <= 1e-20),
        Ok(true)
    );
}

#[test]
fn ransac_without_outliers_matches_direct_refinement() {
    let cfg = scene(CameraModel::LinearRollingShutter, 60);
    let sampson = SampsonConfig::default();
    let rcfg = RansacConfig {
        final_threshold: Some(1e-14),
        ..Default::default()
    };
    for i in 0..5 {
        let t = generate(&cfg, i).unwrap();
        let r = ransac(&t.correspondences, cfg.model, &rcfg, &sampson).unwrap();
        assert!(r.inliers.iter().all(|&b| b));
        let direct = fit(&t.correspondences, cfg.model, &sampson, None).unwrap();
        assert!(distance(&r.params, &direct.params) <= 1e-8);
        assert!(r.iterations <= rcfg.max_iterations);
    }
}

#[test]
fn ransac_on_unrelated_pairs_finds_no_consensus() {
    let cfg = scene(CameraModel::LinearRollingShutter, 100);
    let b = cfg.bounds();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut pt = || ImagePoint::new(rng.random_range(b.u_min..=b.u_max), rng.random_range(b.v_min..=b.v_max));
    let corrs: Vec<_> = (0..100).map(|_| Correspondence::new(pt(), pt())).collect();
    let rcfg = RansacConfig {
        threshold: 1e-8,
        max_iterations: 200,
        ..Default::default()
    };
    let r = ransac(&corrs, cfg.model, &rcfg, &SampsonConfig::default());
    assert!(matches!(r, Err(Error::NoConsensus { .. })), "{r:?}");
}

#[test]
fn ransac_is_reproducible_and_seed_dependent_in_iterations_only() {
    let cfg = SceneConfig {
        noise_sigma: 1e-4,
        ..scene(CameraModel::LinearRollingShutter, 80)
    };
    let t = generate(&cfg, 4).unwrap();
    let sampson = SampsonConfig::default();
    let run = |seed| {
        ransac(
            &t.correspondences,
            cfg.model,
            &RansacConfig {
                threshold: 1e-4,
                seed,
                ..Default::default()
            },
            &sampson,
        )
        .unwrap()
    };
    assert_eq!(run(5), run(5));
    let (a, b) = (run(5), run(6));
    assert_eq!(a.inliers, b.inliers);
    assert!(distance(&a.params, &b.params) <= 1e-6);
}

#[test]
fn cheirality_orientation_is_idempotent() {
    let cfg = scene(CameraModel::LinearRollingShutter, 40);
    let t = generate(&cfg, 2).unwrap();
    let o = orient_by_cheirality(&t.params.scaled(-1.0), &t.correspondences);
    assert!(distance(&o, &t.params) <= 1e-15);
    assert_eq!(orient_by_cheirality(&o, &t.correspondences), o);
}
