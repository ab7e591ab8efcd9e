mod common;

use gsdeepc::deepc::{condense, deepc_cost, ControllerConfig, DeepcController, DeepcProblem, InitBuffer};
use gsdeepc::plant::PlantParams;
use gsdeepc::qp::QpSettings;
use gsdeepc::signal::{build_hankel_set, truncate_columns, ColumnPolicy, HankelSet, Trajectory};
use gsdeepc::Error;
use nalgebra::{DVector, Vector2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn linear_set(seed: u64, len: usize) -> HankelSet {
    let params = PlantParams::default();
    let sys = common::linearized(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<f64> = (0..len).map(|_| rng.random_range(-0.25..0.25)).collect();
    let (y, _) = common::simulate_linear(&sys, Vector2::zeros(), &u);
    let t = Trajectory::from_scalar(&u, &y, &y, params.ts).unwrap();
    build_hankel_set(&[t.as_segment()], 2, 5).unwrap()
}

fn warm_buffer(u: &[f64], y: &[f64]) -> InitBuffer {
    let mut b = InitBuffer::new(u.len());
    for (&a, &b_) in u.iter().zip(y) {
        b.push_scalar(a, b_);
    }
    b
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn condensed_objective_matches_full_cost(seed in 0u64..10_000, lg in 1e-3f64..1e4, li in 1.0f64..1e7) {
        let h = linear_set(seed, 80);
        let cfg = ControllerConfig { lambda_g: lg, lambda_ini: li, ..ControllerConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let u_ini = DVector::from_fn(2, |_, _| rng.random_range(-0.2..0.2));
        let y_ini = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
        let r = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
        let qp = condense(&h, &cfg, &u_ini, &y_ini, &r).unwrap();
        let g = DVector::from_fn(h.columns(), |_, _| rng.random_range(-0.5..0.5));
        let base = deepc_cost(&h, &cfg, &y_ini, &r, &DVector::zeros(h.columns()));
        let quad = 0.5 * g.dot(&(&qp.p * &g)) + qp.q.dot(&g);
        let full = deepc_cost(&h, &cfg, &y_ini, &r, &g) - base;
        prop_assert!((quad - full).abs() <= 1e-8 * full.abs().max(1.0), "{quad} vs {full}");

        // central differences of the full cost against P g + q
        let grad = &qp.p * &g + &qp.q;
        let step = 1e-4;
        for i in (0..h.columns()).step_by(7) {
            let mut gp = g.clone();
            let mut gm = g.clone();
            gp[i] += step;
            gm[i] -= step;
            let fd = (deepc_cost(&h, &cfg, &y_ini, &r, &gp) - deepc_cost(&h, &cfg, &y_ini, &r, &gm)) / (2.0 * step);
            prop_assert!((fd - grad[i]).abs() <= 1e-6 * grad.amax().max(1.0), "coordinate {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn hessian_is_bounded_below_by_the_ridge(seed in 0u64..10_000, lg in 1e-2f64..1e4) {
        let h = linear_set(seed, 60);
        let cfg = ControllerConfig { lambda_g: lg, ..ControllerConfig::default() };
        let prob = DeepcProblem::new(&h, &cfg).unwrap();
        let ev = prob.p.clone().symmetric_eigenvalues();
        prop_assert!(ev.min() >= 2.0 * lg * (1.0 - 1e-9) - 1e-9 * ev.max());
    }
}

#[test]
fn pinned_input_box_fixes_the_plan() {
    let h = linear_set(5, 200);
    let cfg = ControllerConfig { u_min: vec![0.1], u_max: vec![0.1], ..ControllerConfig::default() };
    let mut ctrl = DeepcController::new(cfg, QpSettings::default()).unwrap();
    let res = ctrl.step(0, &h, &warm_buffer(&[0.0, 0.05], &[0.0, 0.0]), &DVector::from_element(5, 1.0)).unwrap();
    assert_eq!(res.u_apply[0], 0.1);
    assert!(res.u_plan.iter().all(|&u| (u - 0.1).abs() < 1e-6), "{}", res.u_plan);
}

#[test]
fn initial_condition_slack_shrinks_with_its_weight() {
    let h = linear_set(9, 200);
    let buf = warm_buffer(&[0.1, -0.1], &[0.3, 0.2]);
    let r = DVector::from_element(5, 2.0);
    let mut last = f64::INFINITY;
    for li in [1e2, 1e3, 1e4, 1e5, 1e6, 1e7] {
        let cfg = ControllerConfig { lambda_ini: li, ..ControllerConfig::default() };
        let mut ctrl = DeepcController::new(cfg, QpSettings::default()).unwrap();
        let s = ctrl.step(0, &h, &buf, &r).unwrap().sigma_norm;
        assert!(s <= last * (1.0 + 1e-6) + 1e-9, "lambda_ini {li}: {s} after {last}");
        last = s;
    }
}

#[test]
fn data_sets_of_equal_shape_swap_without_rebuild() {
    let a = truncate_columns(&linear_set(1, 120), 100, ColumnPolicy::Uniform).unwrap();
    let b = truncate_columns(&linear_set(2, 150), 100, ColumnPolicy::Uniform).unwrap();
    let wrong = truncate_columns(&linear_set(3, 150), 90, ColumnPolicy::Uniform).unwrap();
    let buf = warm_buffer(&[0.0, 0.0], &[0.0, 0.0]);
    let r = DVector::from_element(5, 0.5);
    let mut ctrl = DeepcController::new(ControllerConfig::default(), QpSettings::default()).unwrap();
    ctrl.step(0, &a, &buf, &r).unwrap();
    ctrl.step(1, &b, &buf, &r).unwrap();
    ctrl.step(0, &a, &buf, &r).unwrap();
    assert_eq!(ctrl.cached(), 2);
    assert_eq!(ctrl.structure().unwrap().n, 100);
    assert!(matches!(ctrl.step(2, &wrong, &buf, &r), Err(Error::Config(_))));
}

#[test]
fn cold_buffer_is_rejected() {
    let h = linear_set(4, 80);
    let mut ctrl = DeepcController::new(ControllerConfig::default(), QpSettings::default()).unwrap();
    let mut buf = InitBuffer::new(2);
    buf.push_scalar(0.0, 0.0);
    assert!(matches!(ctrl.step(0, &h, &buf, &DVector::zeros(5)), Err(Error::NotWarmedUp { have: 1, need: 2 })));
}
