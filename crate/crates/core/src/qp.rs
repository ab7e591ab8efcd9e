//! Dense convex QP solver for
//!
//! ```text
//! minimize  1/2 x'Px + q'x   subject to  lb <= A x <= ub
//! ```
//!
//! Operator splitting (ADMM) with over-relaxation, Jacobi row scaling,
//! residual-balancing step-size adaptation and a final active-set polish.
//! Equality constraints are rows with `lb == ub`.
//!
//! The iteration runs in constraint space. With `M = P + sigma I` factored
//! once, the linear system of each ADMM step is solved through the
//! Woodbury identity using `W = M^{-1} A'` and `S = A W`, so an iteration
//! costs `O(rows^2)` when `P` is positive definite (`sigma = 0`). The
//! factorization depends only on `(P, A)`, which lets a receding-horizon
//! controller reuse one solver while `q` and the bounds change every step.
//!
//! Dual sign convention: `P x + q + A' y = 0`, with `y_i >= 0` at an active
//! upper bound and `y_i <= 0` at an active lower bound.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iter: usize,
    /// Initial ADMM step size.
    pub rho: f64,
    /// Over-relaxation parameter in (0, 2).
    pub alpha: f64,
    /// Proximal term, used only when `P` is not positive definite.
    pub sigma: f64,
    pub adaptive_rho: bool,
    pub check_interval: usize,
    pub polish: bool,
    /// Tolerance of the primal infeasibility certificate.
    pub eps_pinf: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            max_iter: 20_000,
            rho: 0.1,
            alpha: 1.6,
            sigma: 1e-6,
            adaptive_rho: true,
            check_interval: 10,
            polish: true,
            eps_pinf: 1e-5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    MaxIter,
    PrimalInfeasible,
}

impl QpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::MaxIter => "max_iter",
            QpStatus::PrimalInfeasible => "primal_infeasible",
        }
    }
}

impl std::fmt::Display for QpStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QpStatus {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimal" => Ok(QpStatus::Optimal),
            "max_iter" => Ok(QpStatus::MaxIter),
            "primal_infeasible" => Ok(QpStatus::PrimalInfeasible),
            _ => Err(Error::Parse(format!("unknown solver status `{s}`"))),
        }
    }
}

/// QP with separate equality and box-inequality blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub c_in: DMatrix<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpProblem {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if self.p.shape() != (n, n) {
            return Err(Error::Dimension(format!("P is {:?}, expected {n}x{n}", self.p.shape())));
        }
        if self.a_eq.ncols() != n && self.a_eq.nrows() > 0 {
            return Err(Error::Dimension("A_eq column count differs from n".into()));
        }
        if self.a_eq.nrows() != self.b_eq.len() {
            return Err(Error::Dimension("A_eq and b_eq row counts differ".into()));
        }
        if self.c_in.ncols() != n && self.c_in.nrows() > 0 {
            return Err(Error::Dimension("C_in column count differs from n".into()));
        }
        if self.c_in.nrows() != self.lb.len() || self.lb.len() != self.ub.len() {
            return Err(Error::Dimension("C_in, lb and ub row counts differ".into()));
        }
        let scale = self.p.amax().max(1.0);
        if (&self.p - self.p.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Dimension("P is not symmetric".into()));
        }
        if self.lb.iter().zip(self.ub.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("lb must not exceed ub".into()));
        }
        Ok(())
    }

    /// Stacked form `[A_eq; C_in]` with bounds `[b_eq; lb]`, `[b_eq; ub]`.
    pub fn stacked(&self) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
        let n = self.n();
        let (me, mi) = (self.a_eq.nrows(), self.c_in.nrows());
        let mut a = DMatrix::zeros(me + mi, n);
        if me > 0 {
            a.rows_mut(0, me).copy_from(&self.a_eq);
        }
        if mi > 0 {
            a.rows_mut(me, mi).copy_from(&self.c_in);
        }
        let lb = DVector::from_iterator(me + mi, self.b_eq.iter().chain(self.lb.iter()).copied());
        let ub = DVector::from_iterator(me + mi, self.b_eq.iter().chain(self.ub.iter()).copied());
        (a, lb, ub)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Constraint values estimate (projected onto the bounds).
    pub z: DVector<f64>,
    /// Multipliers of the stacked constraints.
    pub y: DVector<f64>,
    pub objective: f64,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub polished: bool,
    /// Step size at exit, reused by warm starts.
    pub rho: f64,
}

impl QpSolution {
    pub fn warm_start(&self) -> WarmStart {
        WarmStart {
            x: self.x.clone(),
            z: self.z.clone(),
            y: self.y.clone(),
            rho: self.rho,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub y: DVector<f64>,
    pub rho: f64,
}

/// Solver with the `(P, A)` factorization cached. Immutable after
/// construction, so a single instance may be shared between threads.
#[derive(Debug, Clone)]
pub struct QpSolver {
    p: DMatrix<f64>,
    a: DMatrix<f64>,
    settings: QpSettings,
    sigma: f64,
    chol: Cholesky<f64, Dyn>,
    /// `M^{-1} A'`
    w: DMatrix<f64>,
    /// `A M^{-1} A'`
    s: DMatrix<f64>,
    /// Row scaling.
    d: DVector<f64>,
    as_: DMatrix<f64>,
    ws: DMatrix<f64>,
    ss: DMatrix<f64>,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Free,
    Ineq,
    Eq,
}

impl QpSolver {
    pub fn new(p: DMatrix<f64>, a: DMatrix<f64>, settings: QpSettings) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n || (a.nrows() > 0 && a.ncols() != n) {
            return Err(Error::Dimension(format!(
                "P is {:?} and A is {:?}",
                p.shape(),
                a.shape()
            )));
        }
        if !(settings.alpha > 0.0 && settings.alpha < 2.0) || !(settings.rho > 0.0) {
            return Err(Error::Config("ADMM needs rho > 0 and alpha in (0, 2)".into()));
        }
        let (sigma, chol) = match Cholesky::new(p.clone()) {
            Some(c) => (0.0, c),
            None => {
                let sigma = settings.sigma.max(f64::EPSILON);
                let m = &p + DMatrix::identity(n, n) * sigma;
                let c = Cholesky::new(m)
                    .ok_or_else(|| Error::Solver("P is not positive semidefinite".into()))?;
                (sigma, c)
            }
        };
        let w = chol.solve(&a.transpose());
        let mut s = &a * &w;
        s = (&s + s.transpose()) * 0.5;
        let d = DVector::from_iterator(
            s.nrows(),
            s.diagonal().iter().map(|&v| if v > 1e-300 { 1.0 / v.sqrt() } else { 1.0 }),
        );
        let as_ = DMatrix::from_fn(a.nrows(), n, |i, j| a[(i, j)] * d[i]);
        let ws = DMatrix::from_fn(n, a.nrows(), |i, j| w[(i, j)] * d[j]);
        let ss = DMatrix::from_fn(s.nrows(), s.ncols(), |i, j| s[(i, j)] * d[i] * d[j]);
        Ok(Self { p, a, settings, sigma, chol, w, s, d, as_, ws, ss })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    /// Whether the proximal fallback is active (`P` only semidefinite).
    pub fn uses_proximal_term(&self) -> bool {
        self.sigma > 0.0
    }

    fn factor_k(&self, rho: f64, kinds: &[RowKind]) -> Result<(DVector<f64>, Cholesky<f64, Dyn>)> {
        let rv = DVector::from_iterator(
            kinds.len(),
            kinds.iter().map(|k| match k {
                RowKind::Free => RHO_MIN,
                RowKind::Ineq => rho,
                RowKind::Eq => (RHO_EQ_FACTOR * rho).min(RHO_MAX),
            }),
        );
        let mut k = self.ss.clone();
        for i in 0..kinds.len() {
            k[(i, i)] += 1.0 / rv[i];
        }
        let f = Cholesky::new(k).ok_or_else(|| Error::Solver("reduced KKT factorization failed".into()))?;
        Ok((rv, f))
    }

    pub fn solve(
        &self,
        q: &DVector<f64>,
        lb: &DVector<f64>,
        ub: &DVector<f64>,
        warm: Option<&WarmStart>,
    ) -> Result<QpSolution> {
        let (n, mi) = (self.n(), self.rows());
        if q.len() != n || lb.len() != mi || ub.len() != mi {
            return Err(Error::Dimension(format!(
                "q/lb/ub have lengths {}/{}/{}, expected {n}/{mi}/{mi}",
                q.len(),
                lb.len(),
                ub.len()
            )));
        }
        if lb.iter().zip(ub.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("lb must not exceed ub".into()));
        }
        let st = &self.settings;
        let d = &self.d;
        let kinds: Vec<RowKind> = lb
            .iter()
            .zip(ub.iter())
            .map(|(&l, &u)| {
                if l == f64::NEG_INFINITY && u == f64::INFINITY {
                    RowKind::Free
                } else if l.is_finite() && u.is_finite() && u - l <= 1e-10 * (1.0 + l.abs()) {
                    RowKind::Eq
                } else {
                    RowKind::Ineq
                }
            })
            .collect();
        let lbs = lb.component_mul(d);
        let ubs = ub.component_mul(d);

        let mut rho = warm.map_or(st.rho, |w| w.rho).clamp(RHO_MIN, RHO_MAX);
        let (mut rv, mut kf) = self.factor_k(rho, &kinds)?;

        let mut x = DVector::zeros(n);
        let mut z = DVector::zeros(mi);
        let mut y = DVector::zeros(mi);
        if let Some(w) = warm {
            if w.x.len() == n && w.z.len() == mi && w.y.len() == mi {
                x.copy_from(&w.x);
                z = w.z.component_mul(d);
                y = w.y.component_div(d);
            }
        }
        clip(&mut z, &lbs, &ubs);

        let m0 = -self.chol.solve(q);
        let am0 = &self.as_ * &m0;
        let alpha = st.alpha;
        let check = st.check_interval.max(1);

        let mut status = QpStatus::MaxIter;
        let mut iterations = 0;
        let mut x_out = x.clone();
        let (mut rp, mut rd) = (f64::INFINITY, f64::INFINITY);

        for it in 1..=st.max_iter.max(1) {
            iterations = it;
            let w = rv.component_mul(&z) - &y;
            let v0 = if self.sigma > 0.0 {
                self.chol.solve(&(&x * self.sigma - q))
            } else {
                m0.clone()
            };
            let t = if self.sigma > 0.0 { &self.as_ * &v0 } else { am0.clone() } + &self.ss * &w;
            let kt = kf.solve(&t);
            let ax_t = &t - &self.ss * &kt;
            let is_check = it % check == 0 || it == st.max_iter;
            let mut px_cheap = None;
            if self.sigma > 0.0 || is_check {
                let v = &w - &kt;
                let xt = &v0 + &self.ws * &v;
                if self.sigma > 0.0 {
                    x = &xt * alpha + &x * (1.0 - alpha);
                } else {
                    // P (m0 + Ws v) = -q + As' v
                    px_cheap = Some(self.as_.tr_mul(&v) - q);
                    x = xt;
                }
            }
            let zt = &ax_t * alpha + &z * (1.0 - alpha);
            let mut z_new = &zt + y.component_div(&rv);
            clip(&mut z_new, &lbs, &ubs);
            let y_prev = y.clone();
            y += rv.component_mul(&(&zt - &z_new));
            z = z_new;

            if !is_check {
                continue;
            }
            let zu = z.component_div(d);
            let yu = y.component_mul(d);
            let ax = &self.a * &x;
            let px = px_cheap.unwrap_or_else(|| &self.p * &x);
            let aty = self.a.tr_mul(&yu);
            rp = inf_norm(&(&ax - &zu));
            rd = inf_norm(&(&px + q + &aty));
            let sp = inf_norm(&ax).max(inf_norm(&zu));
            let sd = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(q));
            x_out = x.clone();
            if rp <= st.eps_abs + st.eps_rel * sp && rd <= st.eps_abs + st.eps_rel * sd {
                status = QpStatus::Optimal;
                break;
            }
            let dy = (&y - &y_prev).component_mul(d);
            if self.primal_infeasible(&dy, lb, ub, st.eps_pinf) {
                status = QpStatus::PrimalInfeasible;
                break;
            }
            if st.adaptive_rho {
                let num = rp / sp.max(1e-30);
                let den = (rd / sd.max(1e-30)).max(1e-30);
                let cand = (rho * (num / den).sqrt()).clamp(RHO_MIN, RHO_MAX);
                if cand > 5.0 * rho || cand < rho / 5.0 {
                    rho = cand;
                    let f = self.factor_k(rho, &kinds)?;
                    rv = f.0;
                    kf = f.1;
                }
            }
        }

        let zu = z.component_div(d);
        let yu = y.component_mul(d);
        let mut sol = QpSolution {
            objective: objective(&self.p, q, &x_out),
            x: x_out,
            z: zu,
            y: yu,
            status,
            iterations,
            primal_residual: rp,
            dual_residual: rd,
            polished: false,
            rho,
        };
        if st.polish && self.sigma == 0.0 && status != QpStatus::PrimalInfeasible {
            self.polish(&mut sol, q, lb, ub, &m0, &kinds);
        }
        Ok(sol)
    }

    fn primal_infeasible(&self, dy: &DVector<f64>, lb: &DVector<f64>, ub: &DVector<f64>, eps: f64) -> bool {
        let norm = inf_norm(dy);
        if !(norm > 1e-12) {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            let v = dy[i] / norm;
            if v > eps {
                if ub[i].is_infinite() {
                    return false;
                }
                support += ub[i] * v;
            } else if v < -eps {
                if lb[i].is_infinite() {
                    return false;
                }
                support += lb[i] * v;
            }
        }
        inf_norm(&self.a.tr_mul(dy)) / norm <= eps && support <= -eps
    }

    /// Equality-constrained re-solve on the guessed active set. Replaces the
    /// ADMM iterate when the result is feasible, has consistent multiplier
    /// signs and satisfies the termination test.
    /// Minimizer with the rows in `active` held at the bound given by `side`.
    fn solve_active(
        &self,
        m0: &DVector<f64>,
        lb: &DVector<f64>,
        ub: &DVector<f64>,
        active: &[usize],
        side: &[i8],
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        if active.is_empty() {
            return Some((m0.clone(), DVector::zeros(self.rows())));
        }
        let k = active.len();
        let saa = DMatrix::from_fn(k, k, |i, j| self.s[(active[i], active[j])]);
        let b = DVector::from_iterator(
            k,
            active.iter().zip(side).map(|(&i, &s)| if s > 0 { ub[i] } else { lb[i] }),
        );
        let am0 = DVector::from_iterator(k, active.iter().map(|&i| self.a.row(i).dot(&m0.transpose())));
        let lambda = regularized_solve(&saa, &(am0 - b))?;
        let mut x = m0.clone();
        let mut y = DVector::zeros(self.rows());
        for (kk, &i) in active.iter().enumerate() {
            x.axpy(-lambda[kk], &self.w.column(i), 1.0);
            y[i] = lambda[kk];
        }
        Some((x, y))
    }

    fn polish(
        &self,
        sol: &mut QpSolution,
        q: &DVector<f64>,
        lb: &DVector<f64>,
        ub: &DVector<f64>,
        m0: &DVector<f64>,
        kinds: &[RowKind],
    ) {
        let st = &self.settings;
        let mut active = Vec::new();
        let mut side = Vec::new();
        for i in 0..self.rows() {
            match kinds[i] {
                RowKind::Free => {}
                RowKind::Eq => {
                    active.push(i);
                    side.push(0i8);
                }
                RowKind::Ineq => {
                    if sol.z[i] - lb[i] < -sol.y[i] {
                        active.push(i);
                        side.push(-1);
                    } else if ub[i] - sol.z[i] < sol.y[i] {
                        active.push(i);
                        side.push(1);
                    }
                }
            }
        }
        // the guess from the ADMM iterate may be slightly off: drop rows with
        // a wrong-sign multiplier, add violated rows, and re-solve
        let mut solved = None;
        for _ in 0..POLISH_ROUNDS {
            let Some((x, y)) = self.solve_active(m0, lb, ub, &active, &side) else {
                return;
            };
            let ax = &self.a * &x;
            let sign_tol = st.eps_abs + st.eps_rel * inf_norm(&y);
            let before = active.len();
            let mut keep = Vec::with_capacity(before);
            for (&i, &s) in active.iter().zip(&side) {
                if !((s < 0 && y[i] > sign_tol) || (s > 0 && y[i] < -sign_tol)) {
                    keep.push((i, s));
                }
            }
            let dropped = keep.len() < before;
            let mut added = false;
            if !dropped {
                let feas_tol = st.eps_abs + st.eps_rel * inf_norm(&ax);
                for i in 0..self.rows() {
                    if kinds[i] != RowKind::Ineq || keep.iter().any(|&(a, _)| a == i) {
                        continue;
                    }
                    if ax[i] > ub[i] + feas_tol {
                        keep.push((i, 1));
                        added = true;
                    } else if ax[i] < lb[i] - feas_tol {
                        keep.push((i, -1));
                        added = true;
                    }
                }
            }
            if !dropped && !added {
                solved = Some((x, y, ax));
                break;
            }
            keep.sort_unstable();
            active = keep.iter().map(|k| k.0).collect();
            side = keep.iter().map(|k| k.1).collect();
        }
        let Some((x, y, ax)) = solved else {
            return;
        };
        let mut z = ax.clone();
        clip(&mut z, lb, ub);
        let px = &self.p * &x;
        let aty = self.a.tr_mul(&y);
        let rp = inf_norm(&(&ax - &z));
        let rd = inf_norm(&(&px + q + &aty));
        let sp = inf_norm(&ax).max(inf_norm(&z));
        let sd = inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(q));
        if rp <= st.eps_abs + st.eps_rel * sp && rd <= st.eps_abs + st.eps_rel * sd {
            sol.objective = objective(&self.p, q, &x);
            sol.x = x;
            sol.z = z;
            sol.y = y;
            sol.primal_residual = rp;
            sol.dual_residual = rd;
            sol.status = QpStatus::Optimal;
            sol.polished = true;
        }
    }
}

const POLISH_ROUNDS: usize = 25;

/// Cholesky with a tiny diagonal shift, followed by iterative refinement
/// against the unshifted matrix.
fn regularized_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let delta = 1e-11 * a.diagonal().amax().max(1e-300);
    let shifted = a + DMatrix::identity(a.nrows(), a.ncols()) * delta;
    let f = Cholesky::new(shifted)?;
    let mut x = f.solve(b);
    for _ in 0..5 {
        let r = b - a * &x;
        x += f.solve(&r);
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn clip(v: &mut DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) {
    for i in 0..v.len() {
        v[i] = v[i].max(lo[i]).min(hi[i]);
    }
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn objective(p: &DMatrix<f64>, q: &DVector<f64>, x: &DVector<f64>) -> f64 {
    0.5 * x.dot(&(p * x)) + q.dot(x)
}

/// One-shot solve of a problem in split form. The returned multipliers are
/// ordered as `[equalities; inequalities]`.
pub fn solve_qp(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution> {
    problem.validate()?;
    let (a, lb, ub) = problem.stacked();
    QpSolver::new(problem.p.clone(), a, *settings)?.solve(&problem.q, &lb, &ub, None)
}

/// Solve independent problems, results in input order.
pub fn solve_batch(problems: &[QpProblem], settings: &QpSettings, exec: Execution) -> Vec<Result<QpSolution>> {
    exec.map(problems, |p| solve_qp(p, settings))
}

/// KKT residuals of a primal/dual pair for `lb <= A x <= ub`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// `||P x + q + A' y||_inf`
    pub stationarity: f64,
    /// Largest bound violation of `A x`.
    pub primal: f64,
    /// Largest `|y_i| * distance to the bound its sign points at`.
    pub complementarity: f64,
    /// Largest multiplier of the wrong sign.
    pub dual_sign: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.complementarity).max(self.dual_sign)
    }
}

pub fn kkt_residuals(
    p: &DMatrix<f64>,
    q: &DVector<f64>,
    a: &DMatrix<f64>,
    lb: &DVector<f64>,
    ub: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> KktReport {
    let ax = a * x;
    let stationarity = inf_norm(&(p * x + q + a.tr_mul(y)));
    let mut primal: f64 = 0.0;
    let mut complementarity: f64 = 0.0;
    let mut dual_sign: f64 = 0.0;
    for i in 0..ax.len() {
        primal = primal.max(lb[i] - ax[i]).max(ax[i] - ub[i]);
        let yi = y[i];
        // a multiplier pointing at an infinite bound is a sign error
        if yi > 0.0 {
            if ub[i].is_finite() {
                complementarity = complementarity.max(yi * (ub[i] - ax[i]).abs());
            } else {
                dual_sign = dual_sign.max(yi);
            }
        } else if yi < 0.0 {
            if lb[i].is_finite() {
                complementarity = complementarity.max(-yi * (ax[i] - lb[i]).abs());
            } else {
                dual_sign = dual_sign.max(-yi);
            }
        }
    }
    KktReport { stationarity, primal, complementarity, dual_sign }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn one_sided_rows_stay_inequalities() {
        // x <= 1 with an unbounded lower side must not be held at 1
        let prob = QpProblem {
            p: DMatrix::from_element(1, 1, 2.0),
            q: dv(&[2.0]),
            a_eq: DMatrix::zeros(0, 1),
            b_eq: dv(&[]),
            c_in: DMatrix::from_element(1, 1, 1.0),
            lb: dv(&[f64::NEG_INFINITY]),
            ub: dv(&[1.0]),
        };
        let sol = solve_qp(&prob, &QpSettings::default()).unwrap();
        assert!((sol.x[0] + 1.0).abs() < 1e-9, "{}", sol.x[0]);
        assert!(sol.y[0].abs() < 1e-9);
    }

    #[test]
    fn clipped_scalar() {
        let prob = QpProblem {
            p: DMatrix::from_element(1, 1, 2.0),
            q: dv(&[0.0]),
            a_eq: DMatrix::zeros(0, 1),
            b_eq: dv(&[]),
            c_in: DMatrix::from_element(1, 1, 1.0),
            lb: dv(&[1.0]),
            ub: dv(&[2.0]),
        };
        let sol = solve_qp(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!(sol.y[0] < 0.0);
    }

    #[test]
    fn symmetric_equality() {
        let prob = QpProblem {
            p: DMatrix::identity(2, 2) * 2.0,
            q: dv(&[0.0, 0.0]),
            a_eq: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            b_eq: dv(&[2.0]),
            c_in: DMatrix::zeros(0, 2),
            lb: dv(&[]),
            ub: dv(&[]),
        };
        let sol = solve_qp(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-9 && (sol.x[1] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn detects_infeasibility() {
        let prob = QpProblem {
            p: DMatrix::identity(1, 1),
            q: dv(&[0.0]),
            a_eq: DMatrix::zeros(0, 1),
            b_eq: dv(&[]),
            c_in: DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            lb: dv(&[0.0, 2.0]),
            ub: dv(&[1.0, 3.0]),
        };
        let sol = solve_qp(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn semidefinite_cost_uses_proximal_term() {
        // minimize x0 subject to 1 <= x0 <= 3, 0 <= x1 <= 1 with P = diag(0, 1)
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let solver = QpSolver::new(p, DMatrix::identity(2, 2), QpSettings::default()).unwrap();
        assert!(solver.uses_proximal_term());
        let sol = solver.solve(&dv(&[1.0, 0.0]), &dv(&[1.0, 0.0]), &dv(&[3.0, 1.0]), None).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-4, "{}", sol.x);
        assert!(sol.x[1].abs() < 1e-4);
    }

    #[test]
    fn max_iter_reports_best_iterate() {
        let settings = QpSettings { max_iter: 3, polish: false, ..Default::default() };
        let solver = QpSolver::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), settings).unwrap();
        let sol = solver.solve(&dv(&[-5.0, 1.0]), &dv(&[0.0, 0.0]), &dv(&[1.0, 1.0]), None).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIter);
        assert_eq!(sol.iterations, 3);
        assert!(sol.x.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn rejects_bad_dimensions() {
        let solver = QpSolver::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2), QpSettings::default()).unwrap();
        assert!(solver.solve(&dv(&[1.0]), &dv(&[0.0, 0.0]), &dv(&[1.0, 1.0]), None).is_err());
        assert!(solver.solve(&dv(&[1.0, 1.0]), &dv(&[2.0, 0.0]), &dv(&[1.0, 1.0]), None).is_err());
        assert!(QpSolver::new(DMatrix::identity(2, 2), DMatrix::identity(3, 3), QpSettings::default()).is_err());
    }
}
