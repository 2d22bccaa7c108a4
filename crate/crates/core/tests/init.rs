mod common;

use bclp_core::init::{filter_sinogram, unconstrained_init};
use bclp_core::propagation::DEFAULT_MAX_MATRIX_BYTES;
use bclp_core::{
    analytic_init, field_norm, inscribed_disk_mask, loss, lsq_init, ram_lak_filter, FeasibleSet, Field,
    FilterKind, LogisticParams, ProblemSpec, Propagation, Propagator, ResponseModel, SinogramSpec,
};
use common::*;

fn disk(grid: &bclp_core::GridSpec, radius: f64) -> Field<f64> {
    Field::from_fn(
        *grid,
        "",
        |i, j, _| {
            if grid.center_x(i).hypot(grid.center_y(j)) <= radius {
                1.0
            } else {
                0.0
            }
        },
    )
}

fn rms_inside(a: &Field<f64>, b: &Field<f64>, mask: &Field<f64>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((x, y), m) in a.values().iter().zip(b.values()).zip(mask.values()) {
        if *m > 0.0 {
            num += (x - y) * (x - y);
            den += y * y;
        }
    }
    (num / den).sqrt()
}

#[test]
fn filtered_backprojection_reconstructs_disk() {
    let grid = unit_grid(128);
    let spec = SinogramSpec::full_circle(&grid, 202).unwrap();
    let p = Propagator::<f64>::with_uniform(&grid, spec, 0.0, 1.0).unwrap();
    let phantom = disk(&grid, 0.3);
    let rec = p.backward(&ram_lak_filter(&p.forward(&phantom).unwrap())).unwrap();
    let err = rms_inside(&rec, &phantom, &phantom);
    assert!(err <= 0.10, "relative RMS {err}");
}

#[test]
fn half_circle_coverage_reconstructs_disk() {
    let grid = unit_grid(64);
    let spec = SinogramSpec::uniform(&grid, 64, 101, 0.0, std::f64::consts::PI).unwrap();
    let p = Propagator::<f64>::with_uniform(&grid, spec, 0.0, 1.0).unwrap();
    let phantom = disk(&grid, 0.3);
    let rec = p.backward(&filter_sinogram(&p.forward(&phantom).unwrap(), FilterKind::SheppLogan)).unwrap();
    assert!(rms_inside(&rec, &phantom, &phantom) <= 0.10);
}

#[test]
fn ram_lak_is_linear() {
    let mut r = rng(1);
    let grid = unit_grid(20);
    let spec = SinogramSpec::full_circle(&grid, 8).unwrap();
    let a = random_sinogram(&spec, &mut r, -1.0, 1.0);
    let b = random_sinogram(&spec, &mut r, -1.0, 1.0);
    let lhs = ram_lak_filter(&a.scale(2.0).axpy(-0.5, &b).unwrap());
    let rhs = ram_lak_filter(&a).scale(2.0).axpy(-0.5, &ram_lak_filter(&b)).unwrap();
    assert!(rel_diff(lhs.values(), rhs.values()) <= 1e-13);
}

fn smooth_disk_problem(n: usize, n_theta: usize) -> (ProblemSpec<f64>, Propagator<f64>) {
    let grid = unit_grid(n);
    let prop = disk_propagator(&grid, n_theta, 0.001);
    let support = inscribed_disk_mask::<f64>(&grid).unwrap();
    let target = Field::from_fn(grid, "", |i, j, _| {
        let r = grid.center_x(i).hypot(grid.center_y(j)) / 0.35;
        if r < 1.0 {
            0.3 + 0.4 * (0.5 + 0.5 * (std::f64::consts::PI * r).cos())
        } else {
            0.3
        }
    });
    let spec = ProblemSpec::constant(
        target,
        Field::filled(grid, 0.05, ""),
        support,
        2.0,
        1.0,
        ResponseModel::logistic(LogisticParams::default()).unwrap(),
    )
    .unwrap();
    (spec, prop)
}

#[test]
fn unconstrained_init_recovers_target_dose() {
    let (spec, prop) = smooth_disk_problem(96, 151);
    let g = unconstrained_init(&spec, &prop, FilterKind::RamLak).unwrap();
    let dose = prop.backward(&g).unwrap();
    let expect = spec.response().invert_field(spec.target());
    let support = inscribed_disk_mask::<f64>(spec.grid()).unwrap();
    let err = rms_inside(&dose, &expect, &support);
    assert!(err <= 0.10, "relative RMS {err}");
}

#[test]
fn analytic_init_is_feasible() {
    let (spec, prop) = smooth_disk_problem(48, 60);
    let fs = FeasibleSet::new(0.0, Some(5e4), None, None).unwrap();
    let g = analytic_init(&spec, &prop, &fs, FilterKind::RamLak).unwrap();
    assert!(g.values().iter().all(|&v| (0.0..=5e4).contains(&v)));
}

#[test]
fn wide_band_target_starts_at_zero_loss() {
    let (spec, prop) = smooth_disk_problem(48, 60);
    let wide = spec.with_tolerance(Field::filled(*spec.grid(), 10.0, "")).unwrap();
    let g = analytic_init(&wide, &prop, &FeasibleSet::non_negative(), FilterKind::RamLak).unwrap();
    let l = loss(&wide, &prop.backward(&g).unwrap(), 0).unwrap();
    assert_eq!(l.loss, 0.0);
}

#[test]
fn zero_target_with_linear_response_gives_zero_init() {
    let grid = unit_grid(16);
    let prop = disk_propagator(&grid, 20, 0.001);
    let spec = ProblemSpec::constant(
        Field::zeros(grid, ""),
        Field::zeros(grid, ""),
        inscribed_disk_mask(&grid).unwrap(),
        2.0,
        1.0,
        ResponseModel::linear_identity(),
    )
    .unwrap();
    let g = analytic_init(&spec, &prop, &FeasibleSet::non_negative(), FilterKind::RamLak).unwrap();
    assert!(g.values().iter().all(|&v| v == 0.0));
}

#[test]
fn weights_outside_absorbing_region_rejected() {
    let grid = unit_grid(16);
    let prop = disk_propagator(&grid, 20, 0.001);
    let spec = ProblemSpec::constant(
        Field::zeros(grid, ""),
        Field::zeros(grid, ""),
        Field::filled(grid, 1.0, ""),
        2.0,
        1.0,
        ResponseModel::linear_identity(),
    )
    .unwrap();
    let err = analytic_init(&spec, &prop, &FeasibleSet::non_negative(), FilterKind::RamLak).unwrap_err();
    assert!(matches!(err, bclp_core::Error::Infeasible(_)));
}

#[test]
fn least_squares_solves_consistent_toy() {
    let mut r = rng(2);
    let grid = unit_grid(4);
    let spec = SinogramSpec::uniform(&grid, 4, 3, 0.0, std::f64::consts::PI).unwrap();
    let prop = Propagator::<f64>::with_uniform(&grid, spec.clone(), 0.2, 1.0).unwrap();
    let m = prop.build_matrix(DEFAULT_MAX_MATRIX_BYTES).unwrap();
    let truth = random_sinogram(&spec, &mut r, 0.0, 1.0);
    let target = m.backward(&truth).unwrap();
    let res = lsq_init(&m, &target, 50).unwrap();
    let last = *res.residuals.last().unwrap();
    assert!(last <= 1e-8 * res.residuals[0], "residual {last}");
    for w in res.residuals.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-12));
    }
}

#[test]
fn one_iteration_does_not_increase_residual() {
    let mut r = rng(3);
    let grid = unit_grid(8);
    let prop = disk_propagator(&grid, 10, 0.5);
    let m = prop.build_matrix(DEFAULT_MAX_MATRIX_BYTES).unwrap();
    let target = random_field(grid, &mut r, 0.0, 1.0);
    let res = lsq_init(&m, &target, 1).unwrap();
    assert_eq!(res.residuals.len(), 2);
    assert!(res.residuals[1] <= res.residuals[0]);
}

#[test]
fn least_squares_beats_filtered_estimate() {
    let mut r = rng(4);
    let grid = unit_grid(16);
    let sspec = SinogramSpec::full_circle(&grid, 24).unwrap();
    let prop = Propagator::<f64>::with_uniform(&grid, sspec, 0.0, 1.0).unwrap();
    let m = prop.build_matrix(DEFAULT_MAX_MATRIX_BYTES).unwrap();
    let target = random_field(grid, &mut r, 0.0, 1.0);
    let spec = ProblemSpec::constant(
        target.clone(),
        Field::zeros(grid, ""),
        Field::filled(grid, 1.0, ""),
        2.0,
        1.0,
        ResponseModel::linear_identity(),
    )
    .unwrap();
    let g_fbp = unconstrained_init(&spec, &prop, FilterKind::RamLak).unwrap();
    let fbp_res = field_norm(&prop.backward(&g_fbp).unwrap().sub(&target).unwrap());
    let lsq = lsq_init(&m, &target, 30).unwrap();
    assert!(*lsq.residuals.last().unwrap() <= fbp_res);
}
