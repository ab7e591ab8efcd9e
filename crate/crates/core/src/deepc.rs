//! Regularized DeePC condensed onto the column-weight vector `g`.
//!
//! With `u = Uf g`, `y = Yf g` and the slack `sigma_y = Yp g - y_ini`
//! eliminated, the program becomes
//!
//! ```text
//! minimize   ||r - Yf g||^2_Q + ||Uf g||^2_R + lambda_g ||g||^2 + lambda_ini ||Yp g - y_ini||^2
//! subject to Up g = u_ini,  u_min <= Uf g <= u_max,  y_min <= Yf g <= y_max
//! ```
//!
//! The Hessian and constraint matrix depend only on the data, so one
//! factorized [`QpSolver`] serves every step spent in the same region.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{kkt_residuals, KktReport, QpProblem, QpSettings, QpSolution, QpSolver, QpStatus, WarmStart};
use crate::signal::{stack_rows, HankelSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerConfig {
    pub t_ini: usize,
    pub horizon: usize,
    /// Output weight, `p x p`.
    pub q: Vec<Vec<f64>>,
    /// Input weight, `m x m`.
    pub r: Vec<Vec<f64>>,
    pub lambda_g: f64,
    pub lambda_ini: f64,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
    pub y_min: Vec<f64>,
    pub y_max: Vec<f64>,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self::siso(2, 5, 100.0, 0.05, 1e3, 1e6, (-0.25, 0.25), (-std::f64::consts::PI, std::f64::consts::PI))
    }
}

impl ControllerConfig {
    #[allow(clippy::too_many_arguments)]
    pub fn siso(
        t_ini: usize,
        horizon: usize,
        q: f64,
        r: f64,
        lambda_g: f64,
        lambda_ini: f64,
        u_bounds: (f64, f64),
        y_bounds: (f64, f64),
    ) -> Self {
        Self {
            t_ini,
            horizon,
            q: vec![vec![q]],
            r: vec![vec![r]],
            lambda_g,
            lambda_ini,
            u_min: vec![u_bounds.0],
            u_max: vec![u_bounds.1],
            y_min: vec![y_bounds.0],
            y_max: vec![y_bounds.1],
        }
    }

    pub fn m(&self) -> usize {
        self.r.len()
    }

    pub fn p(&self) -> usize {
        self.q.len()
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        square(&self.q)
    }

    pub fn r_matrix(&self) -> DMatrix<f64> {
        square(&self.r)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.t_ini == 0 || self.horizon == 0 {
            return bad("T_ini and N must be at least 1".into());
        }
        let (m, p) = (self.m(), self.p());
        if m == 0 || p == 0 || self.r.iter().any(|row| row.len() != m) || self.q.iter().any(|row| row.len() != p) {
            return bad("Q and R must be square and non-empty".into());
        }
        if self.u_min.len() != m || self.u_max.len() != m || self.y_min.len() != p || self.y_max.len() != p {
            return bad("bound lengths must match m and p".into());
        }
        for (name, w) in [("Q", self.q_matrix()), ("R", self.r_matrix())] {
            let sym = (&w - w.transpose()).amax() <= 1e-12 * w.amax().max(1.0);
            if !sym || w.cholesky().is_none() {
                return bad(format!("{name} must be symmetric positive definite"));
            }
        }
        if !(self.lambda_g > 0.0) || !(self.lambda_ini > 0.0) {
            return bad("lambda_g and lambda_ini must be positive".into());
        }
        for (lo, hi, name) in [(&self.u_min, &self.u_max, "u"), (&self.y_min, &self.y_max, "y")] {
            if lo.iter().zip(hi.iter()).any(|(a, b)| !(a <= b)) {
                return bad(format!("{name}_min must not exceed {name}_max"));
            }
        }
        Ok(())
    }

    fn check_set(&self, h: &HankelSet) -> Result<()> {
        if h.t_ini != self.t_ini || h.horizon != self.horizon || h.m() != self.m() || h.p() != self.p() {
            return Err(Error::Config(format!(
                "data set (T_ini={}, N={}, m={}, p={}) does not match controller (T_ini={}, N={}, m={}, p={})",
                h.t_ini,
                h.horizon,
                h.m(),
                h.p(),
                self.t_ini,
                self.horizon,
                self.m(),
                self.p()
            )));
        }
        Ok(())
    }
}

fn square(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    DMatrix::from_fn(n, n, |i, j| rows[i].get(j).copied().unwrap_or(f64::NAN))
}

/// Block-diagonal repetition of `w` over `k` steps.
fn block_diag(w: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let d = w.nrows();
    let mut out = DMatrix::zeros(d * k, d * k);
    for b in 0..k {
        out.view_mut((b * d, b * d), (d, d)).copy_from(w);
    }
    out
}

/// Last `T_ini` input/output pairs, oldest first.
#[derive(Debug, Clone, PartialEq)]
pub struct InitBuffer {
    t_ini: usize,
    entries: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl InitBuffer {
    pub fn new(t_ini: usize) -> Self {
        Self { t_ini, entries: VecDeque::with_capacity(t_ini + 1) }
    }

    pub fn push(&mut self, u: DVector<f64>, y: DVector<f64>) {
        self.entries.push_back((u, y));
        while self.entries.len() > self.t_ini {
            self.entries.pop_front();
        }
    }

    pub fn push_scalar(&mut self, u: f64, y: f64) {
        self.push(DVector::from_element(1, u), DVector::from_element(1, y));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_warm(&self) -> bool {
        self.entries.len() == self.t_ini
    }

    fn ensure_warm(&self) -> Result<()> {
        if self.is_warm() {
            Ok(())
        } else {
            Err(Error::NotWarmedUp { have: self.entries.len(), need: self.t_ini })
        }
    }

    /// Stacked past inputs, sample-major.
    pub fn u_ini(&self) -> Result<DVector<f64>> {
        self.ensure_warm()?;
        Ok(stack(self.entries.iter().map(|e| &e.0)))
    }

    /// Stacked past outputs, sample-major.
    pub fn y_ini(&self) -> Result<DVector<f64>> {
        self.ensure_warm()?;
        Ok(stack(self.entries.iter().map(|e| &e.1)))
    }

    pub fn last_input(&self) -> Option<&DVector<f64>> {
        self.entries.back().map(|e| &e.0)
    }
}

fn stack<'a>(it: impl Iterator<Item = &'a DVector<f64>>) -> DVector<f64> {
    let v: Vec<f64> = it.flat_map(|x| x.iter().copied()).collect();
    DVector::from_vec(v)
}

/// Dimension metadata of a condensed program. Equal structures mean a data
/// swap needs no re-shaping of the optimization problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ProblemStructure {
    pub n: usize,
    pub equalities: usize,
    pub inequalities: usize,
}

/// Data-dependent part of the condensed program for one Hankel set.
#[derive(Debug, Clone)]
pub struct DeepcProblem {
    pub p: DMatrix<f64>,
    /// `[Up; Uf; Yf]`
    pub a: DMatrix<f64>,
    yf_t_q: DMatrix<f64>,
    yp_t: DMatrix<f64>,
    lambda_ini: f64,
    structure: ProblemStructure,
}

impl DeepcProblem {
    pub fn new(h: &HankelSet, cfg: &ControllerConfig) -> Result<Self> {
        cfg.validate()?;
        cfg.check_set(h)?;
        let c = h.columns();
        let qbar = block_diag(&cfg.q_matrix(), cfg.horizon);
        let rbar = block_diag(&cfg.r_matrix(), cfg.horizon);
        let yf_t_q = h.yf.transpose() * &qbar;
        let mut p = &yf_t_q * &h.yf;
        p += h.uf.transpose() * &rbar * &h.uf;
        p += h.yp.tr_mul(&h.yp) * cfg.lambda_ini;
        for i in 0..c {
            p[(i, i)] += cfg.lambda_g;
        }
        p *= 2.0;
        let p = (&p + p.transpose()) * 0.5;
        let a = stack_rows(&stack_rows(&h.up, &h.uf), &h.yf);
        let structure = ProblemStructure {
            n: c,
            equalities: h.up.nrows(),
            inequalities: h.uf.nrows() + h.yf.nrows(),
        };
        Ok(Self { p, a, yf_t_q, yp_t: h.yp.transpose(), lambda_ini: cfg.lambda_ini, structure })
    }

    pub fn structure(&self) -> ProblemStructure {
        self.structure
    }

    /// `q = -2 (Yf' Qbar r + lambda_ini Yp' y_ini)`
    pub fn linear_term(&self, y_ini: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        (&self.yf_t_q * r + &self.yp_t * y_ini * self.lambda_ini) * -2.0
    }

    pub fn bounds(&self, cfg: &ControllerConfig, u_ini: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let me = self.structure.equalities;
        let (m, p, n) = (cfg.m(), cfg.p(), cfg.horizon);
        let total = me + (m + p) * n;
        let mut lb = DVector::zeros(total);
        let mut ub = DVector::zeros(total);
        lb.rows_mut(0, me).copy_from(u_ini);
        ub.rows_mut(0, me).copy_from(u_ini);
        for k in 0..n {
            for i in 0..m {
                lb[me + k * m + i] = cfg.u_min[i];
                ub[me + k * m + i] = cfg.u_max[i];
            }
            for i in 0..p {
                lb[me + m * n + k * p + i] = cfg.y_min[i];
                ub[me + m * n + k * p + i] = cfg.y_max[i];
            }
        }
        (lb, ub)
    }
}

fn check_vectors(cfg: &ControllerConfig, u_ini: &DVector<f64>, y_ini: &DVector<f64>, r: &DVector<f64>) -> Result<()> {
    let (m, p) = (cfg.m(), cfg.p());
    if u_ini.len() != m * cfg.t_ini || y_ini.len() != p * cfg.t_ini || r.len() != p * cfg.horizon {
        return Err(Error::Config(format!(
            "u_ini/y_ini/r have lengths {}/{}/{}, expected {}/{}/{}",
            u_ini.len(),
            y_ini.len(),
            r.len(),
            m * cfg.t_ini,
            p * cfg.t_ini,
            p * cfg.horizon
        )));
    }
    Ok(())
}

/// Condensed program in split form: `A_eq = Up`, `C_in = [Uf; Yf]`.
pub fn condense(
    h: &HankelSet,
    cfg: &ControllerConfig,
    u_ini: &DVector<f64>,
    y_ini: &DVector<f64>,
    r: &DVector<f64>,
) -> Result<QpProblem> {
    check_vectors(cfg, u_ini, y_ini, r)?;
    let prob = DeepcProblem::new(h, cfg)?;
    let (lb, ub) = prob.bounds(cfg, u_ini);
    let me = prob.structure.equalities;
    let mi = prob.structure.inequalities;
    Ok(QpProblem {
        q: prob.linear_term(y_ini, r),
        a_eq: h.up.clone(),
        b_eq: u_ini.clone(),
        c_in: prob.a.rows(me, mi).into_owned(),
        lb: lb.rows(me, mi).into_owned(),
        ub: ub.rows(me, mi).into_owned(),
        p: prob.p,
    })
}

/// Uncondensed DeePC cost of `g`, including the constant terms dropped by
/// [`condense`].
pub fn deepc_cost(
    h: &HankelSet,
    cfg: &ControllerConfig,
    y_ini: &DVector<f64>,
    r: &DVector<f64>,
    g: &DVector<f64>,
) -> f64 {
    let qbar = block_diag(&cfg.q_matrix(), cfg.horizon);
    let rbar = block_diag(&cfg.r_matrix(), cfg.horizon);
    let e = r - &h.yf * g;
    let u = &h.uf * g;
    let s = &h.yp * g - y_ini;
    e.dot(&(&qbar * &e)) + u.dot(&(&rbar * &u)) + cfg.lambda_g * g.norm_squared() + cfg.lambda_ini * s.norm_squared()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverStats {
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub polished: bool,
    /// Independent KKT evaluation of the returned pair.
    pub kkt: KktReport,
    /// Scale used for the relative stationarity test.
    pub dual_scale: f64,
    /// Scale used for the relative feasibility test.
    pub primal_scale: f64,
}

impl SolverStats {
    /// KKT conditions hold with absolute and relative tolerance `eps`.
    pub fn kkt_within(&self, eps: f64) -> bool {
        self.kkt.stationarity <= eps + eps * self.dual_scale
            && self.kkt.primal <= eps + eps * self.primal_scale
            && self.kkt.dual_sign <= eps + eps * self.dual_scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlResult {
    /// First planned input, clamped to the input bounds.
    pub u_apply: DVector<f64>,
    /// `m x N`, one column per future step.
    pub u_plan: DMatrix<f64>,
    /// `p x N`, one column per future step.
    pub y_pred: DMatrix<f64>,
    pub g: DVector<f64>,
    pub g_norm: f64,
    pub sigma_norm: f64,
    pub solver: SolverStats,
}

/// Receding-horizon controller with one cached solver per data set key.
#[derive(Debug)]
pub struct DeepcController {
    cfg: ControllerConfig,
    settings: QpSettings,
    cache: HashMap<usize, (DeepcProblem, QpSolver)>,
    structure: Option<ProblemStructure>,
    last_key: Option<usize>,
    warm: Option<WarmStart>,
}

impl DeepcController {
    pub fn new(cfg: ControllerConfig, settings: QpSettings) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, settings, cache: HashMap::new(), structure: None, last_key: None, warm: None })
    }

    pub fn config(&self) -> &ControllerConfig {
        &self.cfg
    }

    /// Structure shared by every data set used so far.
    pub fn structure(&self) -> Option<ProblemStructure> {
        self.structure
    }

    /// Number of distinct data sets factorized so far.
    pub fn cached(&self) -> usize {
        self.cache.len()
    }

    /// Solve for the next input using data set `h`, identified by `key`.
    /// Consecutive calls with the same key warm-start the solver; a new key
    /// starts cold.
    pub fn step(&mut self, key: usize, h: &HankelSet, buffer: &InitBuffer, r: &DVector<f64>) -> Result<ControlResult> {
        let u_ini = buffer.u_ini()?;
        let y_ini = buffer.y_ini()?;
        check_vectors(&self.cfg, &u_ini, &y_ini, r)?;
        if !self.cache.contains_key(&key) {
            let prob = DeepcProblem::new(h, &self.cfg)?;
            match self.structure {
                None => self.structure = Some(prob.structure()),
                Some(s) if s != prob.structure() => {
                    return Err(Error::Config(format!(
                        "data set {key} changes the problem structure from {s:?} to {:?}",
                        prob.structure()
                    )))
                }
                _ => {}
            }
            let solver = QpSolver::new(prob.p.clone(), prob.a.clone(), self.settings)?;
            self.cache.insert(key, (prob, solver));
        }
        if self.last_key != Some(key) {
            self.warm = None;
        }
        self.last_key = Some(key);
        let (prob, solver) = &self.cache[&key];
        let q = prob.linear_term(&y_ini, r);
        let (lb, ub) = prob.bounds(&self.cfg, &u_ini);
        let sol = solver.solve(&q, &lb, &ub, self.warm.as_ref())?;
        if sol.status == QpStatus::PrimalInfeasible {
            self.warm = None;
            return Err(Error::Solver(format!("primal infeasible after {} iterations", sol.iterations)));
        }
        if sol.status == QpStatus::MaxIter {
            log::warn!(
                "DeePC solve hit the iteration limit ({}), applying best iterate (primal {:.3e}, dual {:.3e})",
                sol.iterations,
                sol.primal_residual,
                sol.dual_residual
            );
        }
        self.warm = Some(sol.warm_start());
        Ok(self.result(prob, &q, &lb, &ub, &y_ini, h, sol))
    }

    #[allow(clippy::too_many_arguments)]
    fn result(
        &self,
        prob: &DeepcProblem,
        q: &DVector<f64>,
        lb: &DVector<f64>,
        ub: &DVector<f64>,
        y_ini: &DVector<f64>,
        h: &HankelSet,
        sol: QpSolution,
    ) -> ControlResult {
        let (m, p, n) = (self.cfg.m(), self.cfg.p(), self.cfg.horizon);
        let g = sol.x;
        let u = &h.uf * &g;
        let y = &h.yf * &g;
        let u_plan = DMatrix::from_column_slice(m, n, u.as_slice());
        let y_pred = DMatrix::from_column_slice(p, n, y.as_slice());
        let u_apply = DVector::from_iterator(
            m,
            (0..m).map(|i| u_plan[(i, 0)].clamp(self.cfg.u_min[i], self.cfg.u_max[i])),
        );
        let sigma_norm = (&h.yp * &g - y_ini).norm();
        let kkt = kkt_residuals(&prob.p, q, &prob.a, lb, ub, &g, &sol.y);
        let inf = crate::qp::inf_norm;
        let ag = &prob.a * &g;
        let dual_scale = inf(&(&prob.p * &g)).max(inf(q)).max(inf(&prob.a.tr_mul(&sol.y)));
        let primal_scale = inf(&ag).max(inf(&sol.z));
        ControlResult {
            u_apply,
            u_plan,
            y_pred,
            g_norm: g.norm(),
            g,
            sigma_norm,
            solver: SolverStats {
                status: sol.status,
                iterations: sol.iterations,
                primal_residual: sol.primal_residual,
                dual_residual: sol.dual_residual,
                polished: sol.polished,
                kkt,
                dual_scale,
                primal_scale,
            },
        }
    }
}
