//! Oracles shared by the integration tests. Nothing here calls into the
//! solver or predictor under test.

#![allow(dead_code)]

use gsdeepc::plant::PlantParams;
use gsdeepc::qp::QpProblem;
use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};
use rand::Rng;

/// Zero-order-hold discretization of the plant linearized at the origin
/// (`sin x2 -> x2`), through the exponential of the augmented matrix.
pub fn linearized(params: &PlantParams) -> (Matrix2<f64>, Vector2<f64>) {
    let (tau, kappa, km) = (params.tau, params.kappa(), params.km);
    let aug = Matrix3::new(
        -1.0 / tau, -kappa, km / tau, //
        1.0, 0.0, 0.0, //
        0.0, 0.0, 0.0,
    ) * params.ts;
    let e = aug.exp();
    (
        Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]),
        Vector2::new(e[(0, 2)], e[(1, 2)]),
    )
}

/// Outputs `y_k = x2_k` measured before each input, plus the final state.
pub fn simulate_linear(
    sys: &(Matrix2<f64>, Vector2<f64>),
    x0: Vector2<f64>,
    inputs: &[f64],
) -> (Vec<f64>, Vector2<f64>) {
    let mut x = x0;
    let mut y = Vec::with_capacity(inputs.len());
    for &u in inputs {
        y.push(x[1]);
        x = sys.0 * x + sys.1 * u;
    }
    (y, x)
}

fn uniform_matrix<R: Rng>(rng: &mut R, r: usize, c: usize, a: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-a..a))
}

/// Strictly convex QP with a known feasible point; a large linear term
/// pushes the optimum onto some of the boxes.
pub fn random_qp<R: Rng>(rng: &mut R, n: usize, me: usize, mi: usize) -> QpProblem {
    let m = uniform_matrix(rng, n, n, 1.0);
    let p = m.transpose() * &m + DMatrix::identity(n, n) * 0.1;
    let p = (&p + p.transpose()) * 0.5;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-10.0..10.0));
    let x_f = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let a_eq = uniform_matrix(rng, me, n, 1.0);
    let b_eq = &a_eq * &x_f;
    let c_in = uniform_matrix(rng, mi, n, 1.0);
    let cx = &c_in * &x_f;
    let mut lb = DVector::zeros(mi);
    let mut ub = DVector::zeros(mi);
    for i in 0..mi {
        lb[i] = cx[i] - rng.random_range(0.05..1.0);
        ub[i] = cx[i] + rng.random_range(0.05..1.0);
        match rng.random_range(0..6) {
            0 => lb[i] = f64::NEG_INFINITY,
            1 => ub[i] = f64::INFINITY,
            _ => {}
        }
    }
    QpProblem { p, q, a_eq, b_eq, c_in, lb, ub }
}

/// Rows in `n x >= b` form. An equality contributes one row per direction.
fn ge_rows(prob: &QpProblem) -> (Vec<DVector<f64>>, Vec<f64>) {
    let (mut n, mut b) = (Vec::new(), Vec::new());
    let mut push = |row: DVector<f64>, lo: f64| {
        n.push(row);
        b.push(lo);
    };
    for i in 0..prob.a_eq.nrows() {
        let row = prob.a_eq.row(i).transpose();
        push(row.clone(), prob.b_eq[i]);
        push(-row, -prob.b_eq[i]);
    }
    for i in 0..prob.c_in.nrows() {
        let row = prob.c_in.row(i).transpose();
        if prob.lb[i].is_finite() {
            push(row.clone(), prob.lb[i]);
        }
        if prob.ub[i].is_finite() {
            push(-row, -prob.ub[i]);
        }
    }
    (n, b)
}

/// Solves `[P N'; N 0] [z; w] = [a; 0]` for the rows of `n` listed in `active`.
fn kkt_step(p: &DMatrix<f64>, n: &[DVector<f64>], active: &[usize], a: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
    let dim = p.nrows();
    let k = active.len();
    let mut kkt = DMatrix::zeros(dim + k, dim + k);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(p);
    for (j, &i) in active.iter().enumerate() {
        kkt.view_mut((dim + j, 0), (1, dim)).copy_from(&n[i].transpose());
        kkt.view_mut((0, dim + j), (dim, 1)).copy_from(&n[i]);
    }
    let mut rhs = DVector::zeros(dim + k);
    rhs.rows_mut(0, dim).copy_from(a);
    let sol = kkt.lu().solve(&rhs)?;
    Some((sol.rows(0, dim).into_owned(), sol.rows(dim, k).into_owned()))
}

/// Reference solution by the Goldfarb-Idnani dual active-set method with
/// dense KKT solves. Starts from the unconstrained minimum and adds the most
/// violated row until none is left; finite for strictly convex problems.
/// Returns None if the problem is infeasible or P is not positive definite.
pub fn oracle_qp(prob: &QpProblem) -> Option<DVector<f64>> {
    let chol = prob.p.clone().cholesky()?;
    let (n, b) = ge_rows(prob);
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale;
    let mut x = chol.solve(&(-&prob.q));
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    for _ in 0..20 * (n.len() + 10) {
        let slack = |x: &DVector<f64>, i: usize| n[i].dot(x) - b[i];
        let p = (0..n.len())
            .filter(|i| !active.contains(i))
            .min_by(|&i, &j| slack(&x, i).total_cmp(&slack(&x, j)));
        let p = match p {
            Some(p) if slack(&x, p) < -tol => p,
            _ => return Some(x),
        };
        let mut up = 0.0;
        loop {
            let (z, r) = kkt_step(&prob.p, &n, &active, &n[p])?;
            // largest dual step before an active multiplier hits zero
            let mut t1 = f64::INFINITY;
            let mut block = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > 1e-14 && u[j] / rj < t1 {
                    t1 = u[j] / rj;
                    block = Some(j);
                }
            }
            // n' z vanishes relative to n' P^-1 n when n_p depends on the active rows
            let nz = z.dot(&n[p]);
            let free = n[p].dot(&chol.solve(&n[p]));
            let t2 = if nz > 1e-10 * free { -slack(&x, p) / nz } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return None;
            }
            if t2.is_finite() {
                x += &z * t;
            }
            for (j, &rj) in r.iter().enumerate() {
                u[j] -= t * rj;
            }
            up += t;
            if t2 <= t1 {
                active.push(p);
                u.push(up);
                break;
            }
            let j = block?;
            active.remove(j);
            u.remove(j);
        }
    }
    None
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}
