//! Online selection of the active region or composite region.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::partition::PartitionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerMode {
    Plain,
    DwellSelective,
    DwellFull,
    Composite,
}

impl SchedulerMode {
    pub const ALL: [SchedulerMode; 4] = [
        SchedulerMode::Plain,
        SchedulerMode::DwellSelective,
        SchedulerMode::DwellFull,
        SchedulerMode::Composite,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerMode::Plain => "plain",
            SchedulerMode::DwellSelective => "dwell_selective",
            SchedulerMode::DwellFull => "dwell_full",
            SchedulerMode::Composite => "composite",
        }
    }
}

impl std::fmt::Display for SchedulerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SchedulerMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        SchedulerMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheduler mode `{s}`")))
    }
}

/// Region containing `rho` (half-open intervals, closed top, clamped).
pub fn select_plain(rho: f64, spec: &PartitionSpec) -> usize {
    spec.region_of(rho)
}

/// Composite containing `rho` whose center is nearest; ties go to the lower
/// index. Out-of-range values are clamped first. Requires `m_n >= 2`.
pub fn nearest_composite(rho: f64, spec: &PartitionSpec) -> usize {
    let rho = clamp_rho(rho, spec);
    let mut best: Option<(f64, usize)> = None;
    for i in 0..spec.composite_count() {
        let (lo, hi) = spec.composite_bounds(i);
        if rho < lo || rho > hi {
            continue;
        }
        let dist = (rho - spec.composite_center(i)).abs();
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, i));
        }
    }
    best.map_or(0, |(_, i)| i)
}

fn clamp_rho(rho: f64, spec: &PartitionSpec) -> f64 {
    if rho.is_nan() {
        spec.l_lo
    } else {
        rho.clamp(spec.l_lo, spec.l_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulerState {
    pub mode: SchedulerMode,
    pub active_index: Option<usize>,
    pub previous_index: Option<usize>,
    pub steps_since_switch: usize,
    pub t_dwell: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub index: usize,
    /// The active index changed on this call (the first call never counts).
    pub switched: bool,
}

#[derive(Debug, Clone)]
pub struct Scheduler {
    spec: PartitionSpec,
    state: SchedulerState,
}

impl Scheduler {
    pub fn new(mode: SchedulerMode, spec: PartitionSpec, t_dwell: usize) -> Self {
        Self {
            spec,
            state: SchedulerState {
                mode,
                active_index: None,
                previous_index: None,
                // the first switch is never blocked
                steps_since_switch: t_dwell,
                t_dwell,
            },
        }
    }

    pub fn state(&self) -> &SchedulerState {
        &self.state
    }

    pub fn mode(&self) -> SchedulerMode {
        self.state.mode
    }

    /// Whether the selected index refers to a composite data set.
    pub fn uses_composites(&self) -> bool {
        self.state.mode == SchedulerMode::Composite && self.spec.m_n >= 2
    }

    pub fn select(&mut self, rho: f64) -> Selection {
        let st = &mut self.state;
        let Some(active) = st.active_index else {
            let index = if self.state.mode == SchedulerMode::Composite && self.spec.m_n >= 2 {
                nearest_composite(rho, &self.spec)
            } else {
                select_plain(rho, &self.spec)
            };
            self.state.active_index = Some(index);
            return Selection { index, switched: false };
        };
        st.steps_since_switch = st.steps_since_switch.saturating_add(1);
        let target = match st.mode {
            SchedulerMode::Plain => select_plain(rho, &self.spec),
            SchedulerMode::DwellFull => {
                let cand = select_plain(rho, &self.spec);
                if st.steps_since_switch < st.t_dwell {
                    active
                } else {
                    cand
                }
            }
            SchedulerMode::DwellSelective => {
                let cand = select_plain(rho, &self.spec);
                if st.steps_since_switch < st.t_dwell && Some(cand) == st.previous_index {
                    active
                } else {
                    cand
                }
            }
            SchedulerMode::Composite => {
                if self.spec.m_n < 2 {
                    0
                } else {
                    let r = clamp_rho(rho, &self.spec);
                    let (lo, hi) = self.spec.composite_bounds(active);
                    if lo <= r && r <= hi {
                        active
                    } else {
                        nearest_composite(r, &self.spec)
                    }
                }
            }
        };
        if target != active {
            st.previous_index = Some(active);
            st.active_index = Some(target);
            st.steps_since_switch = 0;
            Selection { index: target, switched: true }
        } else {
            Selection { index: active, switched: false }
        }
    }
}

/// Replay a scheduling trace from a fresh state.
pub fn replay(mode: SchedulerMode, spec: &PartitionSpec, t_dwell: usize, rho: &[f64]) -> Vec<usize> {
    let mut s = Scheduler::new(mode, *spec, t_dwell);
    rho.iter().map(|&r| s.select(r).index).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::make_partition;
    use std::f64::consts::PI;

    #[test]
    fn plain_examples() {
        let spec = make_partition(-PI, PI, 8).unwrap();
        assert_eq!(select_plain(0.0, &spec), 4);
        assert_eq!(select_plain(-PI, &spec), 0);
        assert_eq!(select_plain(PI, &spec), 7);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in SchedulerMode::ALL {
            assert_eq!(m.as_str().parse::<SchedulerMode>().unwrap(), m);
        }
        assert!("fast".parse::<SchedulerMode>().is_err());
    }

    #[test]
    fn composite_hysteresis() {
        let spec = make_partition(-PI, PI, 8).unwrap();
        let l = spec.boundaries();
        let mut s = Scheduler::new(SchedulerMode::Composite, spec, 10);
        // start inside composite 2 = [l2, l4], right at its center l3
        assert_eq!(s.select(l[3]).index, 2);
        for r in [l[2] + 0.01, l[3] + 0.2, l[4] - 1e-9, l[3] - 0.3] {
            assert_eq!(s.select(r), Selection { index: 2, switched: false });
        }
        // exit upwards: composites 3 (center l4) and 4 (center l5) contain it
        assert_eq!(s.select(l[4] + 1e-6), Selection { index: 3, switched: true });
        assert_eq!(s.select(l[3] + 1e-6).index, 3);
        assert_eq!(s.select(l[3] - 1e-6), Selection { index: 2, switched: true });
    }

    #[test]
    fn composite_tie_breaks_low() {
        let spec = make_partition(-PI, PI, 4).unwrap();
        // rho = 0 is l2: composites 0 = [l0,l2] (center l1), 1 = [l1,l3] (center l2), 2 = [l2,l4] (center l3)
        assert_eq!(nearest_composite(0.0, &spec), 1);
        // halfway between centers l1 and l2
        let mid = 0.5 * (spec.boundary(1) + spec.boundary(2));
        assert_eq!(nearest_composite(mid, &spec), 0);
        assert_eq!(nearest_composite(100.0, &spec), 2);
        assert_eq!(nearest_composite(-100.0, &spec), 0);
    }

    #[test]
    fn single_region_pins_zero() {
        let spec = make_partition(-PI, PI, 1).unwrap();
        for mode in SchedulerMode::ALL {
            let trace = replay(mode, &spec, 10, &[-3.0, 0.0, 3.0, -1.0]);
            assert_eq!(trace, vec![0; 4]);
        }
    }

    #[test]
    fn dwell_full_blocks_everything() {
        let spec = make_partition(0.0, 8.0, 8).unwrap();
        let mut s = Scheduler::new(SchedulerMode::DwellFull, spec, 10);
        assert_eq!(s.select(0.5).index, 0);
        assert!(s.select(1.5).switched);
        for _ in 0..9 {
            assert_eq!(s.select(5.5).index, 1);
        }
        assert_eq!(s.select(5.5), Selection { index: 5, switched: true });
    }

    #[test]
    fn dwell_selective_passes_forward_jumps() {
        let spec = make_partition(0.0, 8.0, 8).unwrap();
        let mut s = Scheduler::new(SchedulerMode::DwellSelective, spec, 10);
        s.select(0.5);
        assert!(s.select(1.5).switched);
        assert_eq!(s.select(4.5), Selection { index: 4, switched: true });
        // region 1 is now the previous region, so going back is blocked
        assert_eq!(s.select(1.5).index, 4);
        assert_eq!(s.select(3.5), Selection { index: 3, switched: true });
    }
}
