//! `gsdeepc`: collect excitation data, build region banks, run closed-loop
//! experiments and region-count sweeps.
//!
//! Exit status is 0 on success, 1 on a configuration error and 2 on a runtime
//! failure. Failures also print one JSON object on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gsdeepc::harness::config::parse_cn_list;
use gsdeepc::harness::metrics::metrics_json;
use gsdeepc::harness::run::{collect_data, sweep_setting};
use gsdeepc::harness::sweep::write_sweep_csv;
use gsdeepc::harness::{compute_metrics, prepare_bank, run_closed_loop, sweep_regions, ExperimentConfig, RunRecord};
use gsdeepc::par::Execution;
use gsdeepc::partition::{assemble_bank, coverage, make_partition, RegionBank};
use gsdeepc::scheduler::SchedulerMode;
use gsdeepc::signal::Trajectory;
use gsdeepc::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "gsdeepc", version, about = "Gain-scheduled DeePC experiments")]
struct Cli {
    /// Configuration file of `key=value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data collection.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Scheduler mode: plain, dwell_selective, dwell_full or composite.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Number of regions M_n.
    #[arg(long, global = true)]
    regions: Option<usize>,
    /// Override a configuration key, e.g. `--set controller.lambda_g=100`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Run data-parallel loops on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate excitation data; writes trajectory.csv and coverage.json.
    Collect,
    /// Build the regional and composite Hankel data; writes bank/.
    Build {
        /// Trajectory CSV to partition instead of collecting fresh data.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run one closed-loop experiment; writes run.csv and metrics.json.
    Run {
        /// Load the bank from this directory instead of building it.
        #[arg(long)]
        bank: Option<PathBuf>,
        /// Use the sweep setting for this composite count (1 is plain DeePC).
        #[arg(long)]
        cn: Option<usize>,
    },
    /// Sweep the composite count; writes sweep.csv.
    Sweep {
        /// Composite counts, `1,2,4` or `2..6`.
        #[arg(long)]
        cn: Option<String>,
        /// Data seeds, comma separated.
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Metrics of a recorded run.
    Metrics {
        /// Run record CSV.
        record: PathBuf,
    },
    /// Print the effective configuration.
    Config,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    for kv in &cli.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.data.seed = s;
    }
    if let Some(m) = &cli.mode {
        cfg.scheduler.mode = m.parse::<SchedulerMode>()?;
    }
    if let Some(r) = cli.regions {
        cfg.partition.regions = r;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn collect(cfg: &ExperimentConfig) -> Result<()> {
    let dir = out_dir(cfg)?;
    let regions = cfg.partition.regions;
    let traj = collect_data(cfg, regions, cfg.data.seed, 1.0)?;
    let spec = make_partition(cfg.partition.l_lo, cfg.partition.l_hi, regions)?;
    let depth = cfg.controller.t_ini + cfg.controller.horizon;
    let cov = coverage(&traj, &spec, depth);
    let starved: Vec<usize> = cov.iter().filter(|c| c.columns < cfg.data.c).map(|c| c.region).collect();
    let inside = traj.rho.iter().filter(|&&r| spec.contains(r)).count();
    traj.write_csv(dir.join("trajectory.csv"))?;
    write_json(
        &dir.join("coverage.json"),
        &serde_json::json!({
            "regions": regions,
            "depth": depth,
            "required_columns": cfg.data.c,
            "samples": traj.len(),
            "out_of_range": traj.len() - inside,
            "coverage": cov,
            "starved": starved,
        }),
    )?;
    if !starved.is_empty() {
        log::warn!("{} region(s) below {} columns: {starved:?}", starved.len(), cfg.data.c);
    }
    println!("{} samples -> {}", traj.len(), dir.display());
    Ok(())
}

fn build(cfg: &ExperimentConfig, data: Option<&Path>, exec: Execution) -> Result<()> {
    let dir = out_dir(cfg)?;
    let (regions, c) = (cfg.partition.regions, cfg.data.c);
    let bank = match data {
        Some(p) => {
            let traj = Trajectory::read_csv(p, Some(cfg.plant.ts))?;
            let spec = make_partition(cfg.partition.l_lo, cfg.partition.l_hi, regions)?;
            let ct = &cfg.controller;
            assemble_bank(&traj, &spec, ct.t_ini, ct.horizon, c, cfg.data.policy, exec)?
        }
        None => prepare_bank(cfg, regions, c, cfg.data.seed, exec)?.0,
    };
    let bank_dir = dir.join("bank");
    bank.save(&bank_dir)?;
    println!("{regions} regions x {c} columns -> {}", bank_dir.display());
    Ok(())
}

fn run(cfg: &mut ExperimentConfig, bank_dir: Option<&Path>, cn: Option<usize>, exec: Execution) -> Result<()> {
    let dir = out_dir(cfg)?;
    let (regions, c) = match cn {
        Some(cn) => {
            let (regions, c, mode) = sweep_setting(cfg, cn);
            cfg.partition.regions = regions;
            cfg.scheduler.mode = mode;
            (regions, c)
        }
        None => (cfg.partition.regions, cfg.data.c),
    };
    let bank = match bank_dir {
        Some(p) => {
            let b = RegionBank::load(p)?;
            cfg.partition.regions = b.spec.m_n;
            b
        }
        None => prepare_bank(cfg, regions, c, cfg.data.seed, exec)?.0,
    };
    let out = run_closed_loop(cfg, &bank)?;
    out.record.write_csv(dir.join("run.csv"))?;
    if let Some(reason) = out.aborted {
        return Err(Error::Solver(format!("run stopped early: {reason}")));
    }
    let m = metrics_json(&compute_metrics(&out.record)?);
    write_json(&dir.join("metrics.json"), &m)?;
    println!("{m}");
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, cn: Option<&str>, seeds: Option<&str>, exec: Execution) -> Result<()> {
    let dir = out_dir(cfg)?;
    let cns = match cn {
        Some(v) => parse_cn_list(v)?,
        None => cfg.sweep.cn.clone(),
    };
    let seeds = match seeds {
        Some(v) => v
            .split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|_| Error::Config(format!("bad seed `{s}`"))))
            .collect::<Result<Vec<_>>>()?,
        None => cfg.sweep.seeds.clone(),
    };
    if cns.is_empty() || seeds.is_empty() || cns.contains(&0) {
        return Err(Error::Config("sweep needs at least one C_n >= 1 and one seed".into()));
    }
    let rows = sweep_regions(cfg, &cns, &seeds, exec)?;
    let path = dir.join("sweep.csv");
    write_sweep_csv(&rows, &path)?;
    for r in &rows {
        log::info!("C_n={} seed={} rmse_ss={} rmse_t={} feasible={}", r.cn, r.seed, r.rmse_ss, r.rmse_t, r.feasible);
    }
    println!("{} rows -> {}", rows.len(), path.display());
    Ok(())
}

fn metrics(cfg: &ExperimentConfig, record: &Path, write: bool) -> Result<()> {
    let rec = RunRecord::read_csv(record)?;
    let m = metrics_json(&compute_metrics(&rec)?);
    if write {
        write_json(&out_dir(cfg)?.join("metrics.json"), &m)?;
    }
    println!("{m}");
    Ok(())
}

fn dispatch(cli: &Cli) -> Result<()> {
    let mut cfg = load_config(cli)?;
    let exec = if cli.sequential { Execution::Sequential } else { Execution::default() };
    match &cli.command {
        Command::Collect => collect(&cfg),
        Command::Build { data } => build(&cfg, data.as_deref(), exec),
        Command::Run { bank, cn } => run(&mut cfg, bank.as_deref(), *cn, exec),
        Command::Sweep { cn, seeds } => sweep(&cfg, cn.as_deref(), seeds.as_deref(), exec),
        Command::Metrics { record } => metrics(&cfg, record, cli.out.is_some()),
        Command::Config => {
            print!("{}", cfg.to_text());
            Ok(())
        }
    }
}

fn fail(code: u8, kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(1, "usage", e.to_string().trim()),
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(if e.is_config() { 1 } else { 2 }, e.kind(), &e.to_string()),
    }
}
