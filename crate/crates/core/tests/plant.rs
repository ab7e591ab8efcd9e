use std::f64::consts::PI;

use gsdeepc::partition::make_partition;
use gsdeepc::plant::{
    generate_excitation, generate_excitation_with_coverage, generate_reference, sample_count, step_plant,
    ExcitationParams, InputLevel, PlantParams, PlantState,
};
use proptest::prelude::*;

fn run(params: &PlantParams, x0: PlantState, u: f64, steps: usize, substeps: usize) -> PlantState {
    let mut x = x0;
    for _ in 0..steps {
        x = step_plant(x, u, params, substeps).unwrap();
    }
    x
}

#[test]
fn settles_at_the_static_equilibrium() {
    let p = PlantParams::default();
    for u in [-0.03, -0.01, 0.0, 0.02, 0.04] {
        let x = run(&p, PlantState::default(), u, 2000, p.substeps);
        let target = p.km * u / (p.tau * p.kappa());
        assert!((x.x2.sin() - target).abs() < 1e-6, "u={u}: sin x2 {} vs {target}", x.x2.sin());
        assert!(x.x1.abs() < 1e-6);
        assert!((p.holding_input(x.x2) - u).abs() < 1e-7);
    }
}

#[test]
fn matches_the_closed_form_without_gravity() {
    // with the unbalance removed the angle obeys a first-order velocity lag:
    // x1(t) = Km u + (x1_0 - Km u) e^{-t/tau}
    let p = PlantParams { l_len: 1e-15, ..PlantParams::default() };
    let (x10, x20, u) = (0.5, -0.3, 0.1);
    let mut x = PlantState { x1: x10, x2: x20 };
    for k in 1..=100 {
        x = step_plant(x, u, &p, p.substeps).unwrap();
        let t = k as f64 * p.ts;
        let e = (-t / p.tau).exp();
        let x1 = p.km * u + (x10 - p.km * u) * e;
        let x2 = x20 + p.km * u * t + p.tau * (x10 - p.km * u) * (1.0 - e);
        assert!((x.x1 - x1).abs() < 1e-6 && (x.x2 - x2).abs() < 1e-6, "t={t}");
    }
}

#[test]
fn integrator_is_fourth_order() {
    // long sampling period so the truncation error dominates rounding
    let p = PlantParams { ts: 0.6, m_mass: 0.21, ..PlantParams::default() };
    let x0 = PlantState { x1: 2.0, x2: 1.0 };
    let exact = run(&p, x0, 0.1, 5, 512);
    let err = |s: usize| {
        let x = run(&p, x0, 0.1, 5, s);
        (x.x1 - exact.x1).abs().max((x.x2 - exact.x2).abs())
    };
    let ratio = err(4) / err(8);
    assert!((ratio - 16.0).abs() <= 0.2 * 16.0, "halving the step reduced the error by {ratio}");
}

proptest! {
    #[test]
    fn unforced_energy_never_grows(x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, m in 0.01f64..0.21) {
        // E = x1^2 / 2 + kappa (1 - cos x2), dE/dt = -x1^2 / tau
        let p = PlantParams { m_mass: m, ..PlantParams::default() };
        let energy = |x: PlantState| 0.5 * x.x1 * x.x1 + p.kappa() * (1.0 - x.x2.cos());
        let mut x = PlantState { x1, x2 };
        let mut e = energy(x);
        for _ in 0..200 {
            x = step_plant(x, 0.0, &p, p.substeps).unwrap();
            let next = energy(x);
            prop_assert!(next <= e + 1e-12);
            e = next;
        }
    }

    #[test]
    fn excitation_respects_the_input_box(seed in 0u64..1000, amp in 0.0f64..0.3) {
        let exc = ExcitationParams { duration: 60.0, rbs_amplitude: InputLevel::Fixed(amp), ..ExcitationParams::default() };
        let t = generate_excitation(&PlantParams::default(), &exc, seed).unwrap();
        prop_assert!(t.u.iter().all(|&u| (exc.u_min..=exc.u_max).contains(&u)));
        prop_assert_eq!(t.len(), sample_count(60.0, 0.075));
    }
}

#[test]
fn excitation_is_seed_deterministic() {
    let p = PlantParams::default();
    let exc = ExcitationParams { duration: 120.0, ..ExcitationParams::default() };
    let a = generate_excitation(&p, &exc, 4).unwrap();
    let b = generate_excitation(&p, &exc, 4).unwrap();
    let c = generate_excitation(&p, &exc, 5).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.u, c.u);
}

#[test]
fn ten_minutes_of_excitation_visit_every_region() {
    let p = PlantParams::default();
    let exc = ExcitationParams { duration: 600.0, ..ExcitationParams::default() };
    let spec = make_partition(-PI, PI, 8).unwrap();
    let (t, cov) = generate_excitation_with_coverage(&p, &exc, 1, &spec, 7).unwrap();
    // samples outside the range belong to no region
    let inside = t.rho.iter().filter(|r| r.abs() <= PI).count();
    assert_eq!(cov.iter().map(|c| c.samples).sum::<usize>(), inside);
    assert!(inside > t.len() / 2);
    for c in &cov {
        assert!(c.columns > 0, "region {} has no window of 7 samples", c.region);
    }
}

#[test]
fn reference_steps_land_on_the_next_sample() {
    let r = generate_reference(&[0.0, 4.0, 8.0], &[0.5, -0.5, 1.0], 20.0, 0.075, (-PI, PI)).unwrap();
    assert_eq!(r.len(), 267);
    // 4 / 0.075 = 53.33 -> 54, 8 / 0.075 = 106.67 -> 107
    assert_eq!((r[53], r[54]), (0.5, -0.5));
    assert_eq!((r[106], r[107]), (-0.5, 1.0));
    assert_eq!(r[266], 1.0);
}
