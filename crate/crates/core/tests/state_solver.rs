use plapctl::{build_grid, CellField, DomainSpec, Field, NewtonConfig, PLaplacian};
use std::f64::consts::PI;

#[test]
fn constant_load_matches_closed_form_maximum() {
    let grid = build_grid(DomainSpec::<f64>::unit_interval(), 512).unwrap();
    let op = PLaplacian::new(&grid, 1.5).unwrap();
    let (y, rep) = op
        .solve_state(&CellField::constant(&grid, 1.0), 1e-6, &Field::zeros(&grid), &NewtonConfig::default())
        .unwrap();
    assert!(rep.converged, "{rep:?}");
    println!("iters {} max {}", rep.iterations, y.max_value());
    assert!((y.max_value() - 1.0 / 24.0).abs() < 1e-3);
}

fn mms_error(n: usize, eps: f64, p: f64) -> f64 {
    let grid = build_grid(DomainSpec::<f64>::unit_interval(), n).unwrap();
    let op = PLaplacian::new(&grid, p).unwrap();
    let rhs = |x: [f64; 2]| {
        let g = 0.1 * PI * (PI * x[0]).cos();
        let ypp = -0.1 * PI * PI * (PI * x[0]).sin();
        let s2 = eps * eps + g * g;
        -s2.powf((p - 2.0) / 2.0) * (1.0 + (p - 2.0) * g * g / s2) * ypp
    };
    let load = grid.load_from_fn(rhs, 8);
    let (y, rep) = op.solve_state_load(&load, eps, &Field::zeros(&grid), &NewtonConfig::default()).unwrap();
    assert!(rep.converged, "{rep:?}");
    let exact = CellField::from_fn(&grid, |x| 0.1 * (PI * x[0]).sin());
    let yq = CellField::from_values(&grid, y.values_at_quadrature());
    println!("n {n} iters {}", rep.iterations);
    yq.sub(&exact).l2_norm()
}

#[test]
fn manufactured_solution_order() {
    let errs: Vec<f64> = [64, 128, 256, 512].iter().map(|&n| mms_error(n, 1e-3, 1.5)).collect();
    println!("{errs:?}");
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        println!("order {order}");
        assert!(order >= 1.5, "{errs:?}");
    }
}

/// Scan over the amplitude of `f(y) = λ arctan(10 y)` with zero control,
/// counting distinct solutions found by multistart. Nonzero solutions
/// first appear between λ = 2 and λ = 2.5; the catalog uses λ = 4.
#[test]
#[ignore]
fn multisolution_amplitude_scan() {
    use plapctl::library::{instance, FExpr, MULTISOLUTION_KAPPA};
    for lam in [2.0, 2.5, 3.0, 4.0, 6.0, 8.0] {
        let mut data = instance("multisolution").unwrap().data;
        data.f = FExpr::Arctan { scale: lam, rate: MULTISOLUTION_KAPPA, offset: 0.0 };
        let spec = data.build::<f64>().unwrap();
        let grid = spec.grid(128).unwrap();
        let op = spec.operator(&grid).unwrap();
        let u = CellField::constant(&grid, 0.0);
        let seeds = plapctl::cli::multistart_seeds(&grid, 0);
        let found = op
            .multistart_semilinear(&u, 1e-3, &spec.f, &spec.growth, &seeds, &NewtonConfig::default(), 1e-3)
            .unwrap();
        let peaks: Vec<f64> = found.iter().map(|(y, _)| y.max_value().max(-y.scaled(-1.0).max_value())).collect();
        println!("lambda {lam}: {} solutions, peaks {peaks:?}", found.len());
    }
}

#[test]
fn multisolution_instance_has_a_symmetric_pair() {
    let spec = plapctl::library::instance("multisolution").unwrap().data.build::<f64>().unwrap();
    let grid = spec.grid(64).unwrap();
    let op = spec.operator(&grid).unwrap();
    let u = CellField::constant(&grid, 0.0);
    let seeds = plapctl::cli::multistart_seeds(&grid, 3);
    let found = op.multistart_semilinear(&u, 1e-3, &spec.f, &spec.growth, &seeds, &NewtonConfig::default(), 1e-3).unwrap();
    assert_eq!(found.len(), 3);
    let (pos, neg): (Vec<_>, Vec<_>) = found.iter().filter(|(y, _)| y.norms().linf > 0.1).partition(|(y, _)| y.max_value() > 0.0);
    assert_eq!((pos.len(), neg.len()), (1, 1));
    assert!(pos[0].0.linf_distance(&neg[0].0.scaled(-1.0)) < 1e-6);
}
