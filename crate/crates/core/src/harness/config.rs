//! Flat `section.key=value` configuration.

use std::collections::BTreeMap;
use std::path::Path;

use crate::deepc::ControllerConfig;
use crate::error::{Error, Result};
use crate::plant::{ExcitationParams, InputLevel, PlantParams};
use crate::qp::QpSettings;
use crate::scheduler::SchedulerMode;
use crate::signal::{fmt_f64, ColumnPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConfig {
    pub l_lo: f64,
    pub l_hi: f64,
    pub regions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerConfig {
    pub mode: SchedulerMode,
    pub t_dwell: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub seed: u64,
    /// Columns per region.
    pub c: usize,
    /// Columns of the single-region baseline.
    pub c_deepc: usize,
    pub policy: ColumnPolicy,
    pub excitation: ExcitationParams,
    /// Collection length grows with `regions / scale_regions` when enabled.
    pub auto_scale: bool,
    pub scale_regions: usize,
    /// Length multiplier applied after a starved collection.
    pub growth: f64,
    pub max_duration: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub duration: f64,
    pub step_times: Vec<f64>,
    pub step_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub cn: Vec<usize>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub plant: PlantParams,
    pub partition: PartitionConfig,
    pub controller: ControllerConfig,
    pub scheduler: SchedulerConfig,
    pub data: DataConfig,
    pub run: RunConfig,
    pub sweep: SweepConfig,
    pub solver: QpSettings,
    pub output_dir: String,
}

pub const DEFAULT_STEP_TIMES: [f64; 5] = [0.0, 4.0, 8.0, 12.0, 16.0];
pub const DEFAULT_STEP_VALUES: [f64; 5] = [1.0, 2.6, 0.3, -2.6, -0.8];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let pi = std::f64::consts::PI;
        Self {
            plant: PlantParams::default(),
            partition: PartitionConfig { l_lo: -pi, l_hi: pi, regions: 17 },
            controller: ControllerConfig::default(),
            scheduler: SchedulerConfig { mode: SchedulerMode::Composite, t_dwell: 10 },
            data: DataConfig {
                seed: 1,
                c: 200,
                c_deepc: 800,
                policy: ColumnPolicy::Uniform,
                excitation: ExcitationParams::default(),
                auto_scale: true,
                scale_regions: 8,
                growth: 1.5,
                max_duration: 60_000.0,
            },
            run: RunConfig {
                duration: 20.0,
                step_times: DEFAULT_STEP_TIMES.to_vec(),
                step_values: DEFAULT_STEP_VALUES.to_vec(),
            },
            sweep: SweepConfig { cn: vec![1, 2, 4, 8, 16, 24, 32], seeds: vec![1] },
            solver: QpSettings::default(),
            output_dir: "out".into(),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    let s = v.trim();
    let x = match s {
        "pi" => std::f64::consts::PI,
        "-pi" => -std::f64::consts::PI,
        _ => s
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("{key}: `{v}` is not a number")))?,
    };
    Ok(x)
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse::<usize>()
        .map_err(|_| Error::Config(format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.trim()
        .parse::<u64>()
        .map_err(|_| Error::Config(format!("{key}: `{v}` is not a non-negative integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: `{v}` is not a boolean"))),
    }
}

/// `auto`, `auto:<factor>` or a value in volts.
fn parse_level(key: &str, v: &str, default_factor: f64) -> Result<InputLevel> {
    match v.trim().strip_prefix("auto") {
        Some("") => Ok(InputLevel::Auto(default_factor)),
        Some(rest) => Ok(InputLevel::Auto(parse_f64(key, rest.trim_start_matches([':', ' ']))?)),
        None => Ok(InputLevel::Fixed(parse_f64(key, v)?)),
    }
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str, &str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| f(key, s))
        .collect()
}

fn list<T>(v: &[T], f: impl Fn(&T) -> String) -> String {
    v.iter().map(f).collect::<Vec<_>>().join(",")
}

/// Parse `a..b` as an inclusive integer range, or a comma list.
pub fn parse_cn_list(v: &str) -> Result<Vec<usize>> {
    let t = v.trim();
    if let Some((a, b)) = t.split_once("..") {
        let (a, b) = (parse_usize("cn", a)?, parse_usize("cn", b)?);
        if a > b {
            return Err(Error::Config(format!("empty range `{v}`")));
        }
        return Ok((a..=b).collect());
    }
    parse_list("cn", t, parse_usize)
}

impl ExperimentConfig {
    pub fn from_file<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults overridden by every `key=value` line of `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", lineno + 1)))?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let f = |v: &str| parse_f64(key, v);
        let u = |v: &str| parse_usize(key, v);
        let exc = &mut self.data.excitation;
        match key {
            "plant.m" => self.plant.m_mass = f(v)?,
            "plant.g" => self.plant.g_grav = f(v)?,
            "plant.l" => self.plant.l_len = f(v)?,
            "plant.J" => self.plant.j = f(v)?,
            "plant.tau" => self.plant.tau = f(v)?,
            "plant.Km" => self.plant.km = f(v)?,
            "plant.Ts" => self.plant.ts = f(v)?,
            "plant.substeps" => self.plant.substeps = u(v)?,
            "partition.l_lo" => self.partition.l_lo = f(v)?,
            "partition.l_hi" => self.partition.l_hi = f(v)?,
            "partition.regions" => self.partition.regions = u(v)?,
            "controller.T_ini" => self.controller.t_ini = u(v)?,
            "controller.N" => self.controller.horizon = u(v)?,
            "controller.Q" => self.controller.q = vec![vec![f(v)?]],
            "controller.R" => self.controller.r = vec![vec![f(v)?]],
            "controller.lambda_g" => self.controller.lambda_g = f(v)?,
            "controller.lambda_ini" => self.controller.lambda_ini = f(v)?,
            "controller.u_min" => self.controller.u_min = vec![f(v)?],
            "controller.u_max" => self.controller.u_max = vec![f(v)?],
            "controller.y_min" => self.controller.y_min = vec![f(v)?],
            "controller.y_max" => self.controller.y_max = vec![f(v)?],
            "scheduler.mode" => self.scheduler.mode = v.parse()?,
            "scheduler.T_dwell" => self.scheduler.t_dwell = u(v)?,
            "data.seed" => self.data.seed = parse_u64(key, v)?,
            "data.c" => self.data.c = u(v)?,
            "data.c_deepc" => self.data.c_deepc = u(v)?,
            "data.policy" => self.data.policy = v.parse()?,
            "data.duration" => exc.duration = f(v)?,
            "data.auto_scale" => self.data.auto_scale = parse_bool(key, v)?,
            "data.scale_regions" => self.data.scale_regions = u(v)?,
            "data.growth" => self.data.growth = f(v)?,
            "data.max_duration" => self.data.max_duration = f(v)?,
            "data.rbs_count" => exc.rbs_count = u(v)?,
            "data.rbs_amplitude" => exc.rbs_amplitude = parse_level(key, v, 1.56)?,
            "data.hold_min" => exc.hold_min = u(v)?,
            "data.hold_max" => exc.hold_max = u(v)?,
            "data.boundary_fraction" => exc.boundary_fraction = f(v)?,
            "data.bias" => exc.bias = parse_level(key, v, 1.3)?,
            "data.noise_std" => exc.noise_std = f(v)?,
            "run.duration" => self.run.duration = f(v)?,
            "run.step_times" => self.run.step_times = parse_list(key, v, parse_f64)?,
            "run.step_values" => self.run.step_values = parse_list(key, v, parse_f64)?,
            "sweep.cn" => self.sweep.cn = parse_cn_list(v)?,
            "sweep.seeds" => self.sweep.seeds = parse_list(key, v, parse_u64)?,
            "solver.eps_abs" => self.solver.eps_abs = f(v)?,
            "solver.eps_rel" => self.solver.eps_rel = f(v)?,
            "solver.max_iter" => self.solver.max_iter = u(v)?,
            "solver.rho" => self.solver.rho = f(v)?,
            "solver.alpha" => self.solver.alpha = f(v)?,
            "solver.polish" => self.solver.polish = parse_bool(key, v)?,
            "output.dir" => self.output_dir = v.to_string(),
            _ => return Err(Error::Config(format!("unknown configuration key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn entries(&self) -> BTreeMap<&'static str, String> {
        let g = fmt_f64;
        let exc = &self.data.excitation;
        let c = &self.controller;
        let level = |l: InputLevel| match l {
            InputLevel::Auto(f) => format!("auto:{}", g(f)),
            InputLevel::Fixed(v) => g(v),
        };
        BTreeMap::from([
            ("plant.m", g(self.plant.m_mass)),
            ("plant.g", g(self.plant.g_grav)),
            ("plant.l", g(self.plant.l_len)),
            ("plant.J", g(self.plant.j)),
            ("plant.tau", g(self.plant.tau)),
            ("plant.Km", g(self.plant.km)),
            ("plant.Ts", g(self.plant.ts)),
            ("plant.substeps", self.plant.substeps.to_string()),
            ("partition.l_lo", g(self.partition.l_lo)),
            ("partition.l_hi", g(self.partition.l_hi)),
            ("partition.regions", self.partition.regions.to_string()),
            ("controller.T_ini", c.t_ini.to_string()),
            ("controller.N", c.horizon.to_string()),
            ("controller.Q", g(c.q[0][0])),
            ("controller.R", g(c.r[0][0])),
            ("controller.lambda_g", g(c.lambda_g)),
            ("controller.lambda_ini", g(c.lambda_ini)),
            ("controller.u_min", g(c.u_min[0])),
            ("controller.u_max", g(c.u_max[0])),
            ("controller.y_min", g(c.y_min[0])),
            ("controller.y_max", g(c.y_max[0])),
            ("scheduler.mode", self.scheduler.mode.to_string()),
            ("scheduler.T_dwell", self.scheduler.t_dwell.to_string()),
            ("data.seed", self.data.seed.to_string()),
            ("data.c", self.data.c.to_string()),
            ("data.c_deepc", self.data.c_deepc.to_string()),
            ("data.policy", self.data.policy.to_string()),
            ("data.duration", g(exc.duration)),
            ("data.auto_scale", self.data.auto_scale.to_string()),
            ("data.scale_regions", self.data.scale_regions.to_string()),
            ("data.growth", g(self.data.growth)),
            ("data.max_duration", g(self.data.max_duration)),
            ("data.rbs_count", exc.rbs_count.to_string()),
            ("data.rbs_amplitude", level(exc.rbs_amplitude)),
            ("data.hold_min", exc.hold_min.to_string()),
            ("data.hold_max", exc.hold_max.to_string()),
            ("data.boundary_fraction", g(exc.boundary_fraction)),
            ("data.bias", level(exc.bias)),
            ("data.noise_std", g(exc.noise_std)),
            ("run.duration", g(self.run.duration)),
            ("run.step_times", list(&self.run.step_times, |v| g(*v))),
            ("run.step_values", list(&self.run.step_values, |v| g(*v))),
            ("sweep.cn", list(&self.sweep.cn, |v| v.to_string())),
            ("sweep.seeds", list(&self.sweep.seeds, |v| v.to_string())),
            ("solver.eps_abs", g(self.solver.eps_abs)),
            ("solver.eps_rel", g(self.solver.eps_rel)),
            ("solver.max_iter", self.solver.max_iter.to_string()),
            ("solver.rho", g(self.solver.rho)),
            ("solver.alpha", g(self.solver.alpha)),
            ("solver.polish", self.solver.polish.to_string()),
            ("output.dir", self.output_dir.clone()),
        ])
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            s.push_str(k);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        self.plant.validate()?;
        self.controller.validate()?;
        self.data.excitation.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if self.controller.m() != 1 || self.controller.p() != 1 {
            return bad("the benchmark plant is single-input single-output".into());
        }
        if self.partition.regions == 0 || !(self.partition.l_hi > self.partition.l_lo) {
            return bad("partition needs regions >= 1 and l_lo < l_hi".into());
        }
        if self.data.c == 0 || self.data.c_deepc == 0 {
            return bad("column counts must be positive".into());
        }
        if self.data.scale_regions == 0 || !(self.data.growth >= 1.0) {
            return bad("data.scale_regions must be positive and data.growth >= 1".into());
        }
        if !(self.run.duration > 0.0) {
            return bad("run.duration must be positive".into());
        }
        if self.run.step_times.len() != self.run.step_values.len() || self.run.step_times.is_empty() {
            return bad("run.step_times and run.step_values must have equal, non-zero length".into());
        }
        if self.sweep.cn.contains(&0) {
            return bad("sweep.cn values must be at least 1".into());
        }
        if !(self.solver.eps_abs >= 0.0 && self.solver.eps_rel >= 0.0) || self.solver.max_iter == 0 {
            return bad("solver tolerances must be non-negative and max_iter positive".into());
        }
        Ok(())
    }

    /// Collection length used for a partition with `regions` regions.
    pub fn collection_duration(&self, regions: usize) -> f64 {
        let base = self.data.excitation.duration;
        if self.data.auto_scale {
            base * (regions as f64 / self.data.scale_regions as f64).max(1.0)
        } else {
            base
        }
    }
}
