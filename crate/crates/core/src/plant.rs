//! DC motor driving an unbalanced disc, its excitation signal and references.
//!
//! ```text
//! x1' = -x1 / tau - kappa sin(x2) + (Km / tau) u,   x2' = x1,   y = x2
//! kappa = m g l / J
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::{coverage, PartitionSpec, RegionCoverage};
use crate::signal::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Disc unbalance mass (kg).
    pub m_mass: f64,
    pub g_grav: f64,
    /// Lever arm of the unbalance (m).
    pub l_len: f64,
    /// Inertia (N m^2).
    pub j: f64,
    pub tau: f64,
    pub km: f64,
    /// Sampling period (s).
    pub ts: f64,
    /// RK4 steps per sampling period.
    pub substeps: usize,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            m_mass: 0.07,
            g_grav: 9.8,
            l_len: 0.42e-3,
            j: 2.2e-4,
            tau: 0.6,
            km: 15.3,
            ts: 0.075,
            substeps: 10,
        }
    }
}

impl PlantParams {
    pub fn kappa(&self) -> f64 {
        self.m_mass * self.g_grav * self.l_len / self.j
    }

    /// Input holding the disc at rest at angle `theta`.
    pub fn holding_input(&self, theta: f64) -> f64 {
        self.tau * self.kappa() * theta.sin() / self.km
    }

    pub fn validate(&self) -> Result<()> {
        let vals = [
            ("plant.m", self.m_mass),
            ("plant.g", self.g_grav),
            ("plant.l", self.l_len),
            ("plant.J", self.j),
            ("plant.tau", self.tau),
            ("plant.Km", self.km),
            ("plant.Ts", self.ts),
        ];
        for (name, v) in vals {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.substeps == 0 {
            return Err(Error::Config("plant.substeps must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    /// Angular velocity (rad/s).
    pub x1: f64,
    /// Angle (rad).
    pub x2: f64,
}

impl PlantState {
    pub fn output(&self) -> f64 {
        self.x2
    }
}

fn deriv(x: [f64; 2], u: f64, tau: f64, kappa: f64, km: f64) -> [f64; 2] {
    [-x[0] / tau - kappa * x[1].sin() + km / tau * u, x[0]]
}

/// Advance one sampling period with a zero-order-hold input.
pub fn step_plant(state: PlantState, u: f64, params: &PlantParams, substeps: usize) -> Result<PlantState> {
    let substeps = substeps.max(1);
    let h = params.ts / substeps as f64;
    let (tau, kappa, km) = (params.tau, params.kappa(), params.km);
    let f = |x: [f64; 2]| deriv(x, u, tau, kappa, km);
    let mut x = [state.x1, state.x2];
    for _ in 0..substeps {
        let k1 = f(x);
        let k2 = f([x[0] + 0.5 * h * k1[0], x[1] + 0.5 * h * k1[1]]);
        let k3 = f([x[0] + 0.5 * h * k2[0], x[1] + 0.5 * h * k2[1]]);
        let k4 = f([x[0] + h * k3[0], x[1] + h * k3[1]]);
        for i in 0..2 {
            x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(Error::Divergence { step: 0, x1: state.x1, x2: state.x2 });
    }
    Ok(PlantState { x1: x[0], x2: x[1] })
}

/// Simulate an input sequence; returns the outputs measured before each input.
pub fn simulate(params: &PlantParams, x0: PlantState, inputs: &[f64]) -> Result<Vec<f64>> {
    let mut x = x0;
    let mut y = Vec::with_capacity(inputs.len());
    for (k, &u) in inputs.iter().enumerate() {
        y.push(x.output());
        x = step_plant(x, u, params, params.substeps).map_err(|e| with_step(e, k))?;
    }
    Ok(y)
}

pub(crate) fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::Divergence { x1, x2, .. } => Error::Divergence { step, x1, x2 },
        other => other,
    }
}

/// An excitation level, either in volts or relative to the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InputLevel {
    /// Fixed value (V).
    Fixed(f64),
    /// `factor` times the input holding the disc horizontal, `tau kappa / Km`.
    Auto(f64),
}

impl InputLevel {
    /// Value in volts for `plant`, limited to `cap`.
    pub fn volts(&self, plant: &PlantParams, cap: f64) -> f64 {
        match *self {
            InputLevel::Fixed(v) => v,
            InputLevel::Auto(f) => (f * plant.tau * plant.kappa() / plant.km).min(cap),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            InputLevel::Fixed(v) | InputLevel::Auto(v) => v >= 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcitationParams {
    /// Collection length (s).
    pub duration: f64,
    pub rbs_count: usize,
    /// Level of each RBS component.
    pub rbs_amplitude: InputLevel,
    /// Inclusive range of RBS hold lengths (steps).
    pub hold_min: usize,
    pub hold_max: usize,
    pub boundary_fraction: f64,
    /// Magnitude of the boundary reflection.
    pub bias: InputLevel,
    /// Range the reflection keeps the output inside.
    pub l_lo: f64,
    pub l_hi: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Standard deviation of additive output noise.
    pub noise_std: f64,
}

impl Default for ExcitationParams {
    fn default() -> Self {
        Self {
            duration: 4500.0,
            rbs_count: 2,
            rbs_amplitude: InputLevel::Auto(1.56),
            hold_min: 2,
            hold_max: 20,
            boundary_fraction: 0.1,
            bias: InputLevel::Auto(1.3),
            l_lo: -std::f64::consts::PI,
            l_hi: std::f64::consts::PI,
            u_min: -0.25,
            u_max: 0.25,
            noise_std: 0.0,
        }
    }
}

impl ExcitationParams {
    pub fn bias_value(&self, plant: &PlantParams) -> f64 {
        self.bias.volts(plant, self.u_max)
    }

    pub fn rbs_value(&self, plant: &PlantParams) -> f64 {
        self.rbs_amplitude.volts(plant, self.u_max)
    }

    pub fn samples(&self, ts: f64) -> usize {
        (self.duration / ts).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.duration > 0.0) {
            return bad("excitation duration must be positive");
        }
        if self.hold_min == 0 || self.hold_max < self.hold_min {
            return bad("RBS hold range must satisfy 1 <= min <= max");
        }
        if !(0.0..0.5).contains(&self.boundary_fraction) {
            return bad("boundary fraction must lie in [0, 0.5)");
        }
        if !self.rbs_amplitude.is_valid() || !self.bias.is_valid() || !(self.noise_std >= 0.0) {
            return bad("amplitudes must be non-negative");
        }
        if !(self.l_hi > self.l_lo) || !(self.u_max >= self.u_min) {
            return bad("excitation ranges are inverted");
        }
        Ok(())
    }
}

/// Multi-RBS input plus a latched bias that pushes the output back toward
/// the far end of the range whenever it enters a boundary zone. The plant
/// starts at rest with the bias pointing upward.
pub fn generate_excitation(
    plant: &PlantParams,
    exc: &ExcitationParams,
    seed: u64,
) -> Result<Trajectory> {
    plant.validate()?;
    exc.validate()?;
    let n = exc.samples(plant.ts);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = exc.rbs_value(plant);
    let mut levels: Vec<f64> = (0..exc.rbs_count)
        .map(|_| if rng.random_bool(0.5) { amp } else { -amp })
        .collect();
    let mut hold: Vec<usize> = (0..exc.rbs_count)
        .map(|_| rng.random_range(exc.hold_min..=exc.hold_max))
        .collect();
    let noise = if exc.noise_std > 0.0 {
        Some(Normal::new(0.0, exc.noise_std).map_err(|e| Error::Config(e.to_string()))?)
    } else {
        None
    };
    let bias = exc.bias_value(plant);
    let zone = exc.boundary_fraction * (exc.l_hi - exc.l_lo);
    let mut b = bias;
    let mut x = PlantState::default();
    let (mut u, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for k in 0..n {
        let mut yk = x.output();
        if let Some(d) = &noise {
            yk += d.sample(&mut rng);
        }
        if yk < exc.l_lo + zone {
            b = bias;
        } else if yk > exc.l_hi - zone {
            b = -bias;
        }
        let uk = (levels.iter().sum::<f64>() + b).clamp(exc.u_min, exc.u_max);
        u.push(uk);
        y.push(yk);
        x = step_plant(x, uk, plant, plant.substeps).map_err(|e| with_step(e, k))?;
        for j in 0..levels.len() {
            hold[j] -= 1;
            if hold[j] == 0 {
                levels[j] = -levels[j];
                hold[j] = rng.random_range(exc.hold_min..=exc.hold_max);
            }
        }
    }
    Trajectory::from_scalar(&u, &y, &y.clone(), plant.ts)
}

/// Excitation data together with its per-region coverage.
pub fn generate_excitation_with_coverage(
    plant: &PlantParams,
    exc: &ExcitationParams,
    seed: u64,
    spec: &PartitionSpec,
    depth: usize,
) -> Result<(Trajectory, Vec<RegionCoverage>)> {
    let traj = generate_excitation(plant, exc, seed)?;
    let cov = coverage(&traj, spec, depth);
    Ok((traj, cov))
}

/// Number of samples covering `duration`, `ceil(duration / ts)`.
pub fn sample_count(duration: f64, ts: f64) -> usize {
    (duration / ts - 1e-9).ceil().max(0.0) as usize
}

/// Piecewise-constant reference; step `i` takes effect at sample
/// `ceil(t_i / ts)`.
pub fn generate_reference(
    step_times: &[f64],
    step_values: &[f64],
    duration: f64,
    ts: f64,
    y_bounds: (f64, f64),
) -> Result<Vec<f64>> {
    if step_times.is_empty() || step_times.len() != step_values.len() {
        return Err(Error::Config("reference needs equally many step times and values".into()));
    }
    if step_times[0] != 0.0 || step_times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Config("step times must start at 0 and strictly increase".into()));
    }
    if let Some(v) = step_values.iter().find(|v| !(**v >= y_bounds.0 && **v <= y_bounds.1)) {
        return Err(Error::Config(format!(
            "reference value {v} outside output bounds [{}, {}]",
            y_bounds.0, y_bounds.1
        )));
    }
    if !(ts > 0.0) || !(duration > 0.0) {
        return Err(Error::Config("duration and sampling period must be positive".into()));
    }
    let starts: Vec<usize> = step_times.iter().map(|&t| sample_count(t, ts)).collect();
    let n = sample_count(duration, ts);
    Ok((0..n)
        .map(|k| {
            let i = starts.iter().rposition(|&s| s <= k).unwrap_or(0);
            step_values[i]
        })
        .collect())
}
