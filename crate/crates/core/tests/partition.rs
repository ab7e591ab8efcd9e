use std::f64::consts::PI;

use gsdeepc::par::Execution;
use gsdeepc::partition::{assemble_bank, coverage, make_partition, RegionBank};
use gsdeepc::plant::{generate_excitation, ExcitationParams, PlantParams};
use gsdeepc::signal::{ColumnPolicy, Trajectory};
use gsdeepc::Error;
use proptest::prelude::*;

fn data(duration: f64, seed: u64) -> Trajectory {
    let exc = ExcitationParams { duration, ..ExcitationParams::default() };
    generate_excitation(&PlantParams::default(), &exc, seed).unwrap()
}

proptest! {
    #[test]
    fn regions_tile_the_range(lo in -5.0f64..0.0, span in 0.1f64..10.0, m_n in 1usize..40, rho in -6.0f64..11.0) {
        let hi = lo + span;
        let spec = make_partition(lo, hi, m_n).unwrap();
        let b = spec.boundaries();
        prop_assert_eq!(b.len(), m_n + 1);
        prop_assert_eq!((b[0], b[m_n]), (lo, hi));
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        let i = spec.region_of(rho);
        let c = rho.clamp(lo, hi);
        let (a, z) = spec.bounds(i);
        // half-open regions, the last one closed
        prop_assert!(a <= c && (c < z || (i == m_n - 1 && c <= z)));
        prop_assert_eq!(spec.contains(rho), lo <= rho && rho <= hi);
        for k in 0..spec.composite_count() {
            prop_assert_eq!(spec.composite_bounds(k), (b[k], b[k + 2]));
            prop_assert_eq!(spec.composite_center(k), b[k + 1]);
        }
    }
}

#[test]
fn composites_are_neighbour_concatenations() {
    let spec = make_partition(-PI, PI, 6).unwrap();
    let bank = assemble_bank(&data(3000.0, 1), &spec, 2, 5, 120, ColumnPolicy::Uniform, Execution::Sequential).unwrap();
    assert_eq!(bank.composite.len(), 5);
    for (i, h) in bank.composite.iter().enumerate() {
        assert_eq!(h.columns(), bank.composite_columns());
        let (a, b) = (&bank.regional[i], &bank.regional[i + 1]);
        assert_eq!(h.up.columns(0, 120), a.up);
        assert_eq!(h.up.columns(120, 120), b.up);
        assert_eq!(h.yf.columns(0, 120), a.yf);
        assert_eq!(h.yf.columns(120, 120), b.yf);
    }
}

#[test]
fn regional_data_stays_inside_its_region() {
    let spec = make_partition(-PI, PI, 8).unwrap();
    let bank = assemble_bank(&data(3000.0, 2), &spec, 2, 5, 100, ColumnPolicy::Uniform, Execution::Sequential).unwrap();
    for (i, h) in bank.regional.iter().enumerate() {
        let (a, b) = spec.bounds(i);
        for y in h.yp.iter().chain(h.yf.iter()) {
            assert!(a <= *y && *y <= b, "region {i}: {y} outside [{a}, {b}]");
        }
    }
}

#[test]
fn bank_round_trips_through_disk() {
    let spec = make_partition(-PI, PI, 5).unwrap();
    let bank = assemble_bank(&data(2000.0, 3), &spec, 2, 5, 80, ColumnPolicy::First, Execution::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    bank.save(dir.path()).unwrap();
    assert!(dir.path().join("partition.json").exists());
    assert!(dir.path().join("region_4_Yf.csv").exists());
    assert_eq!(RegionBank::load(dir.path()).unwrap(), bank);
}

#[test]
fn parallel_and_sequential_assembly_agree() {
    let spec = make_partition(-PI, PI, 8).unwrap();
    let t = data(3000.0, 4);
    let a = assemble_bank(&t, &spec, 2, 5, 100, ColumnPolicy::Uniform, Execution::Sequential).unwrap();
    let b = assemble_bank(&t, &spec, 2, 5, 100, ColumnPolicy::Uniform, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn starvation_names_every_short_region() {
    let spec = make_partition(-PI, PI, 8).unwrap();
    let t = data(300.0, 5);
    let cov = coverage(&t, &spec, 7);
    let c = 400;
    let expected: Vec<usize> = cov.iter().filter(|r| r.columns < c).map(|r| r.region).collect();
    assert!(!expected.is_empty());
    match assemble_bank(&t, &spec, 2, 5, c, ColumnPolicy::Uniform, Execution::Sequential) {
        Err(Error::StarvedRegions(d)) => {
            assert_eq!(d.iter().map(|r| r.region).collect::<Vec<_>>(), expected);
            for r in &d {
                assert_eq!(r.available, cov[r.region].columns);
            }
        }
        other => panic!("expected starvation, got {other:?}"),
    }
}
