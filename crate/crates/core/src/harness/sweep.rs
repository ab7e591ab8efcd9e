//! Region-count sweeps.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::signal::fmt_f64;

use super::config::ExperimentConfig;
use super::metrics::compute_metrics;
use super::run::{prepare_bank, run_closed_loop, sweep_setting};

pub const SWEEP_HEADER: &str = "cn,seed,rmse_ss,rmse_t,switch_count,feasible";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cn: usize,
    pub seed: u64,
    pub rmse_ss: f64,
    pub rmse_t: f64,
    pub switch_count: usize,
    /// False when the data could not fill every region, or the run stopped
    /// early.
    pub feasible: bool,
}

/// One closed-loop experiment per `(cn, seed)`, sorted by `(cn, seed)`.
pub fn sweep_regions(
    base: &ExperimentConfig,
    cn_values: &[usize],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    base.validate()?;
    let mut jobs: Vec<(usize, u64)> = cn_values
        .iter()
        .flat_map(|&cn| seeds.iter().map(move |&s| (cn, s)))
        .collect();
    jobs.sort_unstable();
    let rows = exec.map(&jobs, |&(cn, seed)| sweep_one(base, cn, seed, exec));
    rows.into_iter().collect()
}

pub fn sweep_one(base: &ExperimentConfig, cn: usize, seed: u64, exec: Execution) -> Result<SweepRow> {
    let (regions, c, mode) = sweep_setting(base, cn);
    let mut cfg = base.clone();
    cfg.partition.regions = regions;
    cfg.scheduler.mode = mode;
    cfg.data.seed = seed;
    let infeasible = SweepRow { cn, seed, rmse_ss: f64::NAN, rmse_t: f64::NAN, switch_count: 0, feasible: false };
    let bank = match prepare_bank(&cfg, regions, c, seed, exec) {
        Ok((bank, _)) => bank,
        Err(Error::StarvedRegions(d)) => {
            log::warn!("C_n={cn}, seed={seed}: {}", Error::StarvedRegions(d));
            return Ok(infeasible);
        }
        Err(e) => return Err(e),
    };
    let out = run_closed_loop(&cfg, &bank)?;
    if let Some(reason) = &out.aborted {
        log::warn!("C_n={cn}, seed={seed}: run stopped early: {reason}");
        return Ok(infeasible);
    }
    let m = compute_metrics(&out.record)?;
    Ok(SweepRow { cn, seed, rmse_ss: m.rmse_ss, rmse_t: m.rmse_t, switch_count: m.switch_count, feasible: true })
}

pub fn write_sweep_csv_to<W: Write>(rows: &[SweepRow], w: &mut W) -> Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.cn,
            r.seed,
            fmt_f64(r.rmse_ss),
            fmt_f64(r.rmse_t),
            r.switch_count,
            u8::from(r.feasible)
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<P: AsRef<Path>>(rows: &[SweepRow], path: P) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_sweep_csv_to(rows, &mut f)?;
    f.flush()?;
    Ok(())
}
