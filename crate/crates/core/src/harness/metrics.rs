//! Steady-state and transient tracking errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::PartitionSpec;
use crate::scheduler::{Scheduler, SchedulerMode};

use super::run::RunRecord;

/// Quasi-stationary windows (s), closed on both ends.
pub const SS_WINDOWS: [(f64, f64); 5] = [(2.0, 3.0), (6.0, 7.0), (10.0, 11.0), (14.0, 15.0), (18.0, 19.0)];

/// Denominator floor of the relative error (rad).
pub const REL_ERROR_FLOOR: f64 = 0.1;

const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalError {
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
    pub rmse: f64,
    pub max_abs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rmse_ss: f64,
    pub rmse_t: f64,
    pub switch_count: usize,
    pub intervals: Vec<IntervalError>,
    pub ss_samples: usize,
    pub t_samples: usize,
    /// `(t, |y - r| / max(|r|, 0.1))` on the steady-state samples.
    pub rel_error: Vec<(f64, f64)>,
}

pub fn window_of(t: f64) -> Option<usize> {
    SS_WINDOWS
        .iter()
        .position(|&(a, b)| t >= a - TIME_TOL && t <= b + TIME_TOL)
}

fn rms(sq_sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        (sq_sum / n as f64).sqrt()
    }
}

pub fn compute_metrics(rec: &RunRecord) -> Result<MetricsReport> {
    let mut acc = vec![(0usize, 0.0f64, 0.0f64); SS_WINDOWS.len()];
    let (mut ss_n, mut ss_sq, mut t_n, mut t_sq) = (0usize, 0.0, 0usize, 0.0);
    let mut rel_error = Vec::new();
    for row in &rec.rows {
        let e = row.y - row.r;
        match window_of(row.t) {
            Some(w) => {
                let a = &mut acc[w];
                a.0 += 1;
                a.1 += e * e;
                a.2 = a.2.max(e.abs());
                ss_n += 1;
                ss_sq += e * e;
                rel_error.push((row.t, e.abs() / row.r.abs().max(REL_ERROR_FLOOR)));
            }
            None => {
                t_n += 1;
                t_sq += e * e;
            }
        }
    }
    if ss_n == 0 {
        return Err(Error::Metrics("record covers none of the steady-state windows".into()));
    }
    let covered = acc.iter().filter(|a| a.0 > 0).count();
    if covered < SS_WINDOWS.len() {
        log::warn!("record covers only {covered} of {} steady-state windows", SS_WINDOWS.len());
    }
    let intervals = SS_WINDOWS
        .iter()
        .zip(&acc)
        .filter(|(_, a)| a.0 > 0)
        .map(|(&(a, b), &(n, sq, mx))| IntervalError { t_start: a, t_end: b, samples: n, rmse: rms(sq, n), max_abs: mx })
        .collect();
    Ok(MetricsReport {
        rmse_ss: rms(ss_sq, ss_n),
        rmse_t: rms(t_sq, t_n),
        switch_count: rec.switch_count(),
        intervals,
        ss_samples: ss_n,
        t_samples: t_n,
        rel_error,
    })
}

/// The `metrics.json` document: rmse_ss, rmse_t, switch_count, intervals.
pub fn metrics_json(m: &MetricsReport) -> serde_json::Value {
    serde_json::json!({
        "rmse_ss": m.rmse_ss,
        "rmse_t": m.rmse_t,
        "switch_count": m.switch_count,
        "intervals": m.intervals,
        "ss_samples": m.ss_samples,
        "t_samples": m.t_samples,
    })
}

/// Index pairs `k` where the trace goes A -> B -> A within three steps.
pub fn back_and_forth(trace: &[usize]) -> Vec<usize> {
    trace
        .windows(3)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1] && w[2] == w[0])
        .map(|(k, _)| k)
        .collect()
}

/// Composite switches needed to follow the reference schedule quasi-statically:
/// the composite selector is driven along a fine monotone path from `start`
/// through every reference value in turn, and its switches are counted.
pub fn composite_path_switches(spec: &PartitionSpec, start: f64, values: &[f64]) -> usize {
    if spec.m_n < 2 {
        return 0;
    }
    let mut sched = Scheduler::new(SchedulerMode::Composite, *spec, 0);
    sched.select(start);
    let step = spec.width() / 1000.0;
    let mut from = start;
    let mut count = 0;
    for &to in values {
        let n = ((to - from).abs() / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let rho = from + (to - from) * i as f64 / n as f64;
            count += usize::from(sched.select(rho).switched);
        }
        from = to;
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::run::RunRow;
    use crate::partition::make_partition;

    fn record(f: impl Fn(f64) -> (f64, f64)) -> RunRecord {
        RunRecord {
            rows: (0..267)
                .map(|k| {
                    let t = k as f64 * 0.075;
                    let (r, y) = f(t);
                    RunRow {
                        t,
                        r,
                        u: 0.0,
                        y,
                        rho: y,
                        region_idx: 0,
                        switch_flag: false,
                        solver_iters: 0,
                        solver_status: "optimal".into(),
                        g_norm: 0.0,
                        sigma_norm: 0.0,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn perfect_tracking() {
        let m = compute_metrics(&record(|t| (t.sin(), t.sin()))).unwrap();
        assert_eq!((m.rmse_ss, m.rmse_t), (0.0, 0.0));
        assert_eq!(m.ss_samples + m.t_samples, 267);
    }

    #[test]
    fn constant_offset() {
        let m = compute_metrics(&record(|_| (1.0, 1.1))).unwrap();
        assert!((m.rmse_ss - 0.1).abs() < 1e-12 && (m.rmse_t - 0.1).abs() < 1e-12);
    }

    #[test]
    fn window_only_error() {
        let m = compute_metrics(&record(|t| (0.0, if window_of(t).is_some() { 0.2 } else { 0.0 }))).unwrap();
        assert!((m.rmse_ss - 0.2).abs() < 1e-12);
        assert_eq!(m.rmse_t, 0.0);
        assert_eq!(m.intervals.len(), 5);
    }

    #[test]
    fn window_sample_counts() {
        // t = 0.075 k lies in [a, a+1] for k = ceil(a/0.075) ..= floor((a+1)/0.075)
        let m = compute_metrics(&record(|_| (0.0, 0.0))).unwrap();
        let counts: Vec<usize> = m.intervals.iter().map(|i| i.samples).collect();
        let oracle: Vec<usize> = SS_WINDOWS
            .iter()
            .map(|&(a, b)| (0..267usize).filter(|&k| {
                let t = k as f64 * 0.075;
                t >= a - 1e-9 && t <= b + 1e-9
            }).count())
            .collect();
        assert_eq!(counts, oracle);
        assert_eq!(counts.iter().sum::<usize>(), m.ss_samples);
    }

    #[test]
    fn relative_error_floor() {
        let m = compute_metrics(&record(|_| (0.0, 0.05))).unwrap();
        assert!(m.rel_error.iter().all(|&(_, e)| (e - 0.5).abs() < 1e-12));
    }

    #[test]
    fn empty_windows_rejected() {
        let rec = RunRecord { rows: record(|_| (0.0, 0.0)).rows.into_iter().take(20).collect() };
        assert!(matches!(compute_metrics(&rec), Err(Error::Metrics(_))));
    }

    #[test]
    fn back_and_forth_detection() {
        assert_eq!(back_and_forth(&[1, 1, 2, 2, 3]), Vec::<usize>::new());
        assert_eq!(back_and_forth(&[1, 2, 1, 1]), vec![0]);
    }

    #[test]
    fn path_switches() {
        let spec = make_partition(-std::f64::consts::PI, std::f64::consts::PI, 4).unwrap();
        let l = spec.boundaries();
        // from the middle of composite 1 = [l1, l3] up to the top: one exit
        assert_eq!(composite_path_switches(&spec, l[2], &[l[4]]), 1);
        assert_eq!(composite_path_switches(&spec, l[2], &[l[2] + 0.1, l[2] - 0.1]), 0);
    }
}
