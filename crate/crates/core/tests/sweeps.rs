use rs_epipolar::bench::{run_sweep, SweepConfig, SweepKind, CSV_HEADER, GLOBAL_SHUTTER};
use rs_epipolar::synth::SceneConfig;
use rs_epipolar::CameraModel;

const RS: &str = "linear-rs";

fn median_e_r(report: &rs_epipolar::bench::ExperimentReport, value: f64, model: &str) -> f64 {
    report.aggregate(value, model).and_then(|a| a.e_r).map(|s| s.median).expect("median")
}

#[test]
fn shorter_focal_lengths_do_not_hurt_the_rolling_shutter_fit() {
    // velocities stay fixed per pixel row, so a shorter focal length means a wider field of view
    // and a larger motion per normalized row
    let scene = SceneConfig {
        noise_sigma: 2e-3,
        ..Default::default()
    };
    let grid = vec![640.0, 320.0, 160.0, 80.0];
    let report = run_sweep(&SweepConfig::new(SweepKind::Focal, grid.clone(), scene)).unwrap();
    let medians: Vec<f64> = grid.iter().map(|&f| median_e_r(&report, f, RS)).collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn rolling_shutter_error_grows_with_noise() {
    let scene = SceneConfig {
        trials: 50,
        d_scale: 1e-2,
        ..Default::default()
    };
    let grid = vec![1e-5, 1e-4, 1e-3];
    let report = run_sweep(&SweepConfig::new(SweepKind::Noise, grid.clone(), scene)).unwrap();
    let medians: Vec<f64> = grid.iter().map(|&s| median_e_r(&report, s, RS)).collect();
    assert!(medians.windows(2).all(|w| w[1] >= w[0]), "{medians:?}");
    let gs: Vec<f64> = grid.iter().map(|&s| median_e_r(&report, s, GLOBAL_SHUTTER)).collect();
    assert!(gs.windows(2).all(|w| w[1] >= w[0]), "{gs:?}");
    assert!(report.aggregates.iter().all(|a| a.trials == 50));
}

#[test]
fn report_rows_follow_grid_and_trial_order() {
    let scene = SceneConfig {
        model: CameraModel::UniformRollingShutter,
        trials: 3,
        n_points: 60,
        noise_sigma: 1e-4,
        ..Default::default()
    };
    let mut cfg = SweepConfig::new(SweepKind::Velocity, vec![1e-3, 1e-4], scene);
    cfg.global_shutter = false;
    let report = run_sweep(&cfg).unwrap();
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let keys: Vec<(f64, usize)> = report.records.iter().map(|r| (r.sweep_value, r.trial)).collect();
    assert_eq!(keys, vec![(1e-3, 0), (1e-3, 1), (1e-3, 2), (1e-4, 0), (1e-4, 1), (1e-4, 2)]);
    assert_eq!(lines.count(), 6);
    assert!(report.records.iter().all(|r| r.model == "uniform-rs"));
    assert_eq!(report, run_sweep(&cfg).unwrap());
}
