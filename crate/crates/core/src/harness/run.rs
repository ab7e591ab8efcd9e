//! Data collection, bank preparation and the closed loop.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::deepc::{DeepcController, InitBuffer, SolverStats};
use crate::error::{Error, Result};
use crate::par::Execution;
use crate::partition::{assemble_bank, make_partition, PartitionSpec, RegionBank};
use crate::plant::{generate_excitation, generate_reference, step_plant, with_step, PlantState};
use crate::scheduler::{Scheduler, SchedulerMode};
use crate::signal::{fmt_f64, Trajectory};

use super::config::ExperimentConfig;

pub const RUN_HEADER: &str = "t,r,u,y,rho,region_idx,switch_flag,solver_iters,solver_status,g_norm,sigma_norm";

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: f64,
    pub r: f64,
    pub u: f64,
    pub y: f64,
    pub rho: f64,
    pub region_idx: usize,
    pub switch_flag: bool,
    pub solver_iters: usize,
    /// `optimal`, `max_iter`, `primal_infeasible` or `warmup`.
    pub solver_status: String,
    pub g_norm: f64,
    pub sigma_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn switch_count(&self) -> usize {
        self.rows.iter().filter(|r| r.switch_flag).count()
    }

    pub fn column(&self, f: impl Fn(&RunRow) -> f64) -> Vec<f64> {
        self.rows.iter().map(f).collect()
    }

    pub fn region_trace(&self) -> Vec<usize> {
        self.rows.iter().map(|r| r.region_idx).collect()
    }

    pub fn write_csv_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "{RUN_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                fmt_f64(r.t),
                fmt_f64(r.r),
                fmt_f64(r.u),
                fmt_f64(r.y),
                fmt_f64(r.rho),
                r.region_idx,
                u8::from(r.switch_flag),
                r.solver_iters,
                r.solver_status,
                fmt_f64(r.g_norm),
                fmt_f64(r.sigma_norm)
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv_from(std::io::BufReader::new(f))
    }

    pub fn read_csv_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Parse("empty run record".into()))??;
        if header.trim() != RUN_HEADER {
            return Err(Error::Parse(format!("unexpected run record header `{}`", header.trim())));
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let at = |what: &str| Error::Parse(format!("row {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 11 {
                return Err(Error::Parse(format!("row {} has {} fields, expected 11", i + 2, f.len())));
            }
            let num = |j: usize, what: &str| f[j].parse::<f64>().map_err(|_| at(what));
            let int = |j: usize, what: &str| f[j].parse::<usize>().map_err(|_| at(what));
            rows.push(RunRow {
                t: num(0, "t")?,
                r: num(1, "r")?,
                u: num(2, "u")?,
                y: num(3, "y")?,
                rho: num(4, "rho")?,
                region_idx: int(5, "region_idx")?,
                switch_flag: match f[6] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(at("switch_flag")),
                },
                solver_iters: int(7, "solver_iters")?,
                solver_status: f[8].to_string(),
                g_norm: num(9, "g_norm")?,
                sigma_norm: num(10, "sigma_norm")?,
            });
        }
        Ok(Self { rows })
    }
}

/// Closed-loop result: the record, the per-step solver diagnostics (`None`
/// during warm-up or after a solver failure) and the reason for an early
/// stop, if any.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub solves: Vec<Option<SolverStats>>,
    pub aborted: Option<String>,
}

/// Excitation data for a partition with `regions` regions, using the
/// auto-scaled collection length multiplied by `scale`.
pub fn collect_data(cfg: &ExperimentConfig, regions: usize, seed: u64, scale: f64) -> Result<Trajectory> {
    let mut exc = cfg.data.excitation;
    exc.duration = cfg.collection_duration(regions) * scale;
    exc.l_lo = cfg.partition.l_lo;
    exc.l_hi = cfg.partition.l_hi;
    exc.u_min = cfg.controller.u_min[0];
    exc.u_max = cfg.controller.u_max[0];
    generate_excitation(&cfg.plant, &exc, seed)
}

/// Collect data and assemble the bank for `regions` regions with `c`
/// columns each. A starved collection is repeated with a longer duration,
/// growing geometrically up to `data.max_duration`.
pub fn prepare_bank(
    cfg: &ExperimentConfig,
    regions: usize,
    c: usize,
    seed: u64,
    exec: Execution,
) -> Result<(RegionBank, Trajectory)> {
    let spec = make_partition(cfg.partition.l_lo, cfg.partition.l_hi, regions)?;
    let mut scale = 1.0;
    loop {
        let traj = collect_data(cfg, regions, seed, scale)?;
        let ct = &cfg.controller;
        match assemble_bank(&traj, &spec, ct.t_ini, ct.horizon, c, cfg.data.policy, exec) {
            Ok(bank) => return Ok((bank, traj)),
            Err(Error::StarvedRegions(d)) => {
                let next = scale * cfg.data.growth;
                if cfg.data.growth <= 1.0 || cfg.collection_duration(regions) * next > cfg.data.max_duration {
                    return Err(Error::StarvedRegions(d));
                }
                log::info!(
                    "{} starved region(s) at {} s of data, retrying with {} s",
                    d.len(),
                    cfg.collection_duration(regions) * scale,
                    cfg.collection_duration(regions) * next
                );
                scale = next;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Reference over the whole run.
pub fn reference(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    generate_reference(
        &cfg.run.step_times,
        &cfg.run.step_values,
        cfg.run.duration,
        cfg.plant.ts,
        (cfg.controller.y_min[0], cfg.controller.y_max[0]),
    )
}

/// Run the closed loop with the scheduler mode of `cfg` on `bank`.
///
/// At step `k` the output `y_k` is measured, the scheduler picks the data
/// set from `rho = y_k`, and the controller plans `u_k .. u_{k+N-1}` from the
/// last `T_ini` pairs `(u_j, y_j)`, `j < k`, tracking `r_k .. r_{k+N-1}`. The
/// first `T_ini` steps apply `u = 0`. A failed solve holds the previous
/// input; a non-finite plant state stops the run with the rows logged so far.
pub fn run_closed_loop(cfg: &ExperimentConfig, bank: &RegionBank) -> Result<RunOutput> {
    cfg.validate()?;
    let ct = &cfg.controller;
    if bank.t_ini != ct.t_ini || bank.horizon != ct.horizon {
        return Err(Error::Config(format!(
            "bank built for T_ini={}, N={} but the controller uses T_ini={}, N={}",
            bank.t_ini, bank.horizon, ct.t_ini, ct.horizon
        )));
    }
    let refs = reference(cfg)?;
    let ts = cfg.plant.ts;
    let mut sched = Scheduler::new(cfg.scheduler.mode, bank.spec, cfg.scheduler.t_dwell);
    let mut ctrl = DeepcController::new(ct.clone(), cfg.solver)?;
    let mut buffer = InitBuffer::new(ct.t_ini);
    let mut x = PlantState::default();
    let mut record = RunRecord::default();
    let mut solves = Vec::with_capacity(refs.len());
    let mut aborted = None;
    let mut u_prev = 0.0;

    for k in 0..refs.len() {
        let y = x.output();
        let sel = sched.select(y);
        let mut row = RunRow {
            t: k as f64 * ts,
            r: refs[k],
            u: 0.0,
            y,
            rho: y,
            region_idx: sel.index,
            switch_flag: sel.switched,
            solver_iters: 0,
            solver_status: "warmup".into(),
            g_norm: 0.0,
            sigma_norm: 0.0,
        };
        let mut stats = None;
        if buffer.is_warm() {
            let h = if sched.uses_composites() { &bank.composite[sel.index] } else { &bank.regional[sel.index] };
            let r = DVector::from_iterator(
                ct.horizon,
                (0..ct.horizon).map(|j| refs[(k + j).min(refs.len() - 1)]),
            );
            match ctrl.step(sel.index, h, &buffer, &r) {
                Ok(res) => {
                    row.u = res.u_apply[0];
                    row.solver_iters = res.solver.iterations;
                    row.solver_status = res.solver.status.to_string();
                    row.g_norm = res.g_norm;
                    row.sigma_norm = res.sigma_norm;
                    stats = Some(res.solver);
                }
                Err(Error::Solver(msg)) => {
                    log::warn!("step {k}: {msg}; holding the previous input");
                    row.u = u_prev;
                    row.solver_status = "primal_infeasible".into();
                }
                Err(e) => return Err(e),
            }
        }
        u_prev = row.u;
        buffer.push_scalar(row.u, y);
        record.rows.push(row);
        solves.push(stats);
        match step_plant(x, u_prev, &cfg.plant, cfg.plant.substeps) {
            Ok(next) => x = next,
            Err(e) => {
                let e = with_step(e, k);
                log::error!("{e}");
                aborted = Some(e.to_string());
                break;
            }
        }
    }
    Ok(RunOutput { record, solves, aborted })
}

/// Region count, column count and scheduler mode of one sweep entry:
/// `cn = 1` is the single-region baseline, otherwise `cn` composites over
/// `cn + 1` regions.
pub fn sweep_setting(cfg: &ExperimentConfig, cn: usize) -> (usize, usize, SchedulerMode) {
    if cn <= 1 {
        (1, cfg.data.c_deepc, SchedulerMode::Composite)
    } else {
        (cn + 1, cfg.data.c, SchedulerMode::Composite)
    }
}

/// Partition of `cfg` with a different region count.
pub fn partition_with(cfg: &ExperimentConfig, regions: usize) -> Result<PartitionSpec> {
    make_partition(cfg.partition.l_lo, cfg.partition.l_hi, regions)
}
