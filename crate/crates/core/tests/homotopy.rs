use plapctl::homotopy::*;
use plapctl::library::instance;
use plapctl::*;

fn setup(name: &str, n: usize) -> (ProblemSpec<f64>, std::sync::Arc<Grid<f64>>, HomotopyConfig) {
    let spec = instance(name).unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(n).unwrap();
    (spec, grid, HomotopyConfig::default())
}

#[test]
fn single_stage_schedule_matches_inner_solve() {
    let (spec, grid, mut cfg) = setup("bangbang_sec6", 64);
    cfg.schedule = Schedule::single(1e-2, 0.0, 10.0, 0.1);
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let out = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap();

    let start = ControlPair::at_reference(&boot.reference);
    let params = PenaltyParams::new(&boot.reference, 1e-2, 10.0, 0.1, 0.0).unwrap().with_centers(&start);
    let pen = Penalized::new(&spec, &grid, params, cfg.newton).unwrap();
    let direct = solve_inner(&pen, &start, &boot.reference.ybar, &cfg.inner).unwrap();

    assert_eq!(out.telemetry.stages().count(), 1);
    assert!(out.pair.distance(&direct.pair) < 1e-12);
    let stage = out.telemetry.stages().next().unwrap();
    assert!((stage.objective - direct.objective).abs() < 1e-12);
    assert!(stage.multiplier.is_some());
}

#[test]
fn warm_restart_is_a_fixed_point() {
    let (spec, grid, mut cfg) = setup("bangbang_sec6", 64);
    cfg.schedule = Schedule::single(1e-3, 0.0, 100.0, 1e-2);
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let first = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap();

    let params = first.params.clone().with_centers(&first.pair);
    let pen = Penalized::new(&spec, &grid, params, cfg.newton).unwrap();
    let again = solve_inner(&pen, &first.pair, &first.y, &cfg.inner).unwrap();
    let obj = first.telemetry.stages().last().unwrap().objective;
    assert!(again.pair.distance(&first.pair) < 1e-6, "{}", again.pair.distance(&first.pair));
    assert!((again.objective - obj).abs() < 1e-10, "{} vs {}", again.objective, obj);
}

#[test]
fn decoupled_instance_reaches_lower_bound() {
    let (spec, grid, cfg) = setup("monotone_decoupled", 64);
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let out = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap();
    let worst = out.pair.u.values().iter().map(|u| (u - spec.a).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "{worst}");
    assert!(out.multiplier.mu > 0.5);
    assert!((out.multiplier.psi.norms().l2 + out.multiplier.mu - 1.0).abs() < 1e-12);
    let blocks = out.telemetry.block_ends().count();
    assert_eq!(blocks, cfg.schedule.m.len() * cfg.schedule.tau.len());
}

#[test]
fn schedule_beyond_caps_is_clipped_and_recorded() {
    let (spec, grid, mut cfg) = setup("monotone_decoupled", 32);
    cfg.schedule = Schedule { eps: vec![1e-2, 1e-9], sigma: vec![0.0], m: vec![1.0, 1e5], tau: vec![0.1] };
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let out = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap();
    let caps = out.telemetry.records.iter().find_map(|r| match r {
        TelemetryRecord::Caps { capped, .. } => Some(*capped),
        _ => None,
    });
    assert_eq!(caps, Some(true));
    assert!(out.telemetry.stages().all(|s| s.m <= M_CAP && s.eps >= EPS_FLOOR));
}

#[test]
fn invalid_schedule_aborts_with_empty_telemetry() {
    let (spec, grid, mut cfg) = setup("monotone_decoupled", 16);
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    cfg.schedule.m = vec![10.0, 1.0];
    let err = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap_err();
    assert!(err.telemetry.records.is_empty());
}

#[test]
fn telemetry_survives_a_file_round_trip() {
    let (spec, grid, mut cfg) = setup("bangbang_sec6", 32);
    cfg.schedule = Schedule { eps: vec![1e-1, 1e-2], sigma: vec![0.0], m: vec![1.0, 10.0], tau: vec![0.1] };
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let out = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("telemetry.ndrec");
    out.telemetry.write(std::fs::File::create(&path).unwrap()).unwrap();
    let back = HomotopyTelemetry::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(back, out.telemetry);
    assert_eq!(back.stages().count(), 4);
}

/// On a fixed mesh the discrete gradient near the critical point is of
/// order `h`, so the relative degenerate norm settles once `ε` drops below
/// that scale instead of decreasing to zero.
#[test]
fn radial_instance_degenerate_norm_settles_along_eps() {
    let (spec, grid, mut cfg) = setup("radial_degenerate", 16);
    cfg.theta_rel = 0.1;
    let boot = bootstrap_reference(&spec, &grid, &cfg, None).unwrap();
    let out = run_homotopy(&spec, &grid, &boot.reference, &cfg).unwrap();
    let stages: Vec<_> = out.telemetry.stages().collect();
    let last = stages.last().unwrap();
    let block: Vec<_> = stages.iter().filter(|s| s.tau == last.tau && s.m == last.m && s.sigma == last.sigma).collect();
    assert!(block.iter().all(|s| s.degenerate_measure > 0.0 && s.degenerate_norm < 1e-2));
    let steps: Vec<f64> = block.windows(2).map(|w| (w[1].degenerate_norm - w[0].degenerate_norm).abs()).collect();
    assert!(steps[1..].windows(2).all(|w| w[1] <= w[0]), "{steps:?}");
    assert!(*steps.last().unwrap() < 1e-9);
    assert!(out.multiplier.mu > 0.0);
}
