//! Dense convex quadratic programming.
//!
//! Solves
//!
//! ```text
//! min  ½ xᵀQx + cᵀx
//! s.t. A_eq x  = b_eq
//!      A_in x >= b_in
//! ```
//!
//! with a Mehrotra predictor-corrector primal-dual interior point method on
//! the reduced KKT system, followed by an active-set polish that re-solves
//! the equality-constrained problem on the identified active set. When the
//! interior point iteration fails, an ℓ1 phase-1 program decides whether the
//! constraint set is empty.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// PSD tolerance on the smallest eigenvalue of `Q`.
pub const PSD_TOLERANCE: f64 = 1e-9;
/// Largest asymmetry accepted in `Q`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;
/// Phase-1 objective above which the constraints are declared infeasible.
pub const INFEASIBILITY_THRESHOLD: f64 = 1e-6;
/// Upper bound on the KKT residual of a solution reported optimal.
pub const OPTIMAL_KKT_BOUND: f64 = 1e-6;
/// Upper bound on the primal infeasibility of a solution reported optimal.
pub const OPTIMAL_FEASIBILITY_BOUND: f64 = 1e-8;

const PHASE1_PROXIMAL: f64 = 1e-8;
const REGULARIZATION: f64 = 1e-11;
const REFINEMENT_STEPS: usize = 10;
const DIVERGENCE_LIMIT: f64 = 1e14;

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    q: DMatrix<f64>,
    c: DVector<f64>,
    a_eq: DMatrix<f64>,
    b_eq: DVector<f64>,
    a_in: DMatrix<f64>,
    b_in: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem; add constraints with [`Self::equalities`] and
    /// [`Self::inequalities`].
    ///
    /// `q` must be symmetric within [`SYMMETRY_TOLERANCE`] and PSD within
    /// [`PSD_TOLERANCE`]. A slightly indefinite `q` is shifted by
    /// `|λ_min| + 1e-12` on the diagonal.
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = c.len();
        if q.shape() != (n, n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: q.nrows(),
            });
        }
        if q.iter().chain(c.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("QP data must be finite".into()));
        }
        if linalg::asymmetry(&q) > SYMMETRY_TOLERANCE {
            return Err(Error::InvalidInput("Q is not symmetric".into()));
        }
        let mut q = linalg::symmetrize(&q);
        let lambda_min = linalg::min_eigenvalue(&q);
        if lambda_min < -PSD_TOLERANCE {
            return Err(Error::InvalidInput(format!("Q is not PSD (smallest eigenvalue {lambda_min:e})")));
        }
        if lambda_min < 0.0 {
            let shift = lambda_min.abs() + 1e-12;
            for i in 0..n {
                q[(i, i)] += shift;
            }
        }
        Ok(Self {
            q,
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_in: DMatrix::zeros(0, n),
            b_in: DVector::zeros(0),
        })
    }

    /// Appends rows `a x = b`.
    pub fn equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_rows(&a, &b, self.n())?;
        self.a_eq = stack(&self.a_eq, &a);
        self.b_eq = concat(&self.b_eq, &b);
        Ok(self)
    }

    /// Appends rows `a x >= b`.
    pub fn inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_rows(&a, &b, self.n())?;
        self.a_in = stack(&self.a_in, &a);
        self.b_in = concat(&self.b_in, &b);
        Ok(self)
    }

    /// Appends `x >= 0`.
    pub fn nonnegative(self) -> Result<Self> {
        let n = self.n();
        self.inequalities(DMatrix::identity(n, n), DVector::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    /// `½ xᵀQx + cᵀx`
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * linalg::quad_form(&self.q, x) + self.c.dot(x)
    }

    /// Largest violation of any constraint at `x`.
    pub fn infeasibility(&self, x: &DVector<f64>) -> f64 {
        let eq = linalg::max_abs(&(&self.a_eq * x - &self.b_eq));
        let ineq = (&self.b_in - &self.a_in * x).iter().fold(0.0_f64, |acc, v| acc.max(*v));
        eq.max(ineq)
    }

    /// Max-norm KKT residual: stationarity, primal feasibility, dual sign and complementarity.
    pub fn kkt_residual(&self, x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        let stationarity = &self.q * x + &self.c - self.a_eq.transpose() * y - self.a_in.transpose() * z;
        let slack = &self.a_in * x - &self.b_in;
        let complementarity = slack.iter().zip(z.iter()).fold(0.0_f64, |acc, (s, z)| acc.max((s * z).abs()));
        let dual_sign = z.iter().fold(0.0_f64, |acc, z| acc.max(-z));
        linalg::max_abs(&stationarity)
            .max(self.infeasibility(x))
            .max(complementarity)
            .max(dual_sign)
            .abs()
    }
}

fn check_rows(a: &DMatrix<f64>, b: &DVector<f64>, n: usize) -> Result<()> {
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: a.ncols(),
        });
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            actual: b.len(),
        });
    }
    if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("constraint data must be finite".into()));
    }
    Ok(())
}

fn stack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// `½ xᵀQx + cᵀx` at `x`.
    pub objective: f64,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Multipliers of the equality rows.
    pub eq_duals: DVector<f64>,
    /// Multipliers of the inequality rows (non-negative at optimality).
    pub ineq_duals: DVector<f64>,
}

impl QpSolution {
    /// Converts a non-optimal status into an error.
    pub fn into_result(self) -> Result<Self> {
        match self.status {
            QpStatus::Optimal => Ok(self),
            QpStatus::Infeasible => Err(Error::Infeasible),
            QpStatus::MaxIterations => Err(Error::Solver(format!(
                "no optimal point after {} iterations (KKT residual {:e})",
                self.iterations, self.kkt_residual
            ))),
        }
    }
}

#[derive(Debug, Clone)]
struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    z: DVector<f64>,
    s: DVector<f64>,
}

struct IpmOutcome {
    it: Iterate,
    iterations: usize,
    diverged: bool,
}

/// Newton step `(dx, dy, dz, ds)`.
type Direction = (DVector<f64>, DVector<f64>, DVector<f64>, DVector<f64>);

/// Solves `problem`. The returned status is `Optimal` only when the KKT
/// residual is at most `min(tolerance, 1e-6)` and every constraint holds
/// within `1e-8`; otherwise the best iterate is returned with
/// `MaxIterations`, or `Infeasible` when the phase-1 objective exceeds
/// [`INFEASIBILITY_THRESHOLD`].
pub fn solve_qp(problem: &QpProblem, tolerance: f64, max_iter: usize) -> QpSolution {
    let kkt_tol = tolerance.min(OPTIMAL_KKT_BOUND);
    let feas_tol = tolerance.min(OPTIMAL_FEASIBILITY_BOUND);

    let outcome = interior_point(problem, kkt_tol, max_iter);
    let mut best = outcome.it;
    let mut best_res = problem.kkt_residual(&best.x, &best.y, &best.z);
    if !outcome.diverged && best_res.is_finite() {
        if let Some(polished) = polish(problem, &best) {
            let res = problem.kkt_residual(&polished.x, &polished.y, &polished.z);
            if res < best_res {
                best = polished;
                best_res = res;
            }
        }
    }

    let optimal = !outcome.diverged
        && best_res.is_finite()
        && best_res <= kkt_tol
        && problem.infeasibility(&best.x) <= feas_tol;
    let status = if optimal {
        QpStatus::Optimal
    } else if phase_one_objective(problem, max_iter) > INFEASIBILITY_THRESHOLD {
        QpStatus::Infeasible
    } else {
        QpStatus::MaxIterations
    };
    QpSolution {
        objective: problem.objective(&best.x),
        status,
        kkt_residual: best_res,
        iterations: outcome.iterations,
        x: best.x,
        eq_duals: best.y,
        ineq_duals: best.z,
    }
}

/// Minimum total ℓ1 constraint violation (0 for a feasible set).
fn phase_one_objective(p: &QpProblem, max_iter: usize) -> f64 {
    let n = p.n();
    let me = p.a_eq.nrows();
    let mi = p.a_in.nrows();
    let nv = n + 2 * me + mi;

    let q = DMatrix::from_diagonal_element(nv, nv, PHASE1_PROXIMAL);
    let mut c = DVector::zeros(nv);
    c.rows_mut(n, nv - n).fill(1.0);

    let mut a = DMatrix::zeros(me, nv);
    a.view_mut((0, 0), (me, n)).copy_from(&p.a_eq);
    for r in 0..me {
        a[(r, n + r)] = 1.0;
        a[(r, n + me + r)] = -1.0;
    }

    let mut g = DMatrix::zeros(mi + nv - n, nv);
    g.view_mut((0, 0), (mi, n)).copy_from(&p.a_in);
    for r in 0..mi {
        g[(r, n + 2 * me + r)] = 1.0;
    }
    for k in 0..(nv - n) {
        g[(mi + k, n + k)] = 1.0;
    }
    let mut h = DVector::zeros(mi + nv - n);
    h.rows_mut(0, mi).copy_from(&p.b_in);

    let phase1 = QpProblem {
        q,
        c,
        a_eq: a,
        b_eq: p.b_eq.clone(),
        a_in: g,
        b_in: h,
    };
    let out = interior_point(&phase1, 1e-10, max_iter.max(50));
    let violation: f64 = out.it.x.rows(n, nv - n).iter().map(|t| t.max(0.0)).sum();
    // The proximal term can leave tiny residual slack; report the true violation when smaller.
    violation.min(ell1_violation(p, &out.it.x.rows(0, n).into_owned()))
}

fn ell1_violation(p: &QpProblem, x: &DVector<f64>) -> f64 {
    let eq: f64 = (&p.a_eq * x - &p.b_eq).iter().map(|v| v.abs()).sum();
    let ineq: f64 = (&p.b_in - &p.a_in * x).iter().map(|v| v.max(0.0)).sum();
    eq + ineq
}

fn initial_point(p: &QpProblem) -> Iterate {
    let n = p.n();
    let me = p.a_eq.nrows();
    let mi = p.a_in.nrows();
    let mut h = p.q.clone() + DMatrix::identity(n, n);
    h += p.a_in.transpose() * &p.a_in;
    let mut rhs_top = -&p.c;
    rhs_top += p.a_in.transpose() * &p.b_in;
    let (x, _) = solve_kkt(&h, &p.a_eq, &rhs_top, &p.b_eq).unwrap_or_else(|| (DVector::zeros(n), DVector::zeros(me)));
    let gx = &p.a_in * &x - &p.b_in;
    let s = gx.map(|v| v.max(1.0));
    let z = DVector::from_element(mi, 1.0);
    Iterate {
        x,
        y: DVector::zeros(me),
        z,
        s,
    }
}

/// Solves `[H Aᵀ; A 0] [dx; w] = [r1; r2]` with light regularization and
/// iterative refinement. Returns `(dx, w)` where `w = -dy` in KKT terms.
fn solve_kkt(
    h: &DMatrix<f64>,
    a: &DMatrix<f64>,
    r1: &DVector<f64>,
    r2: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let m = a.nrows();
    let scale = h.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let delta_p = REGULARIZATION * scale;
    // The dual block lives on the scale of A H⁻¹ Aᵀ.
    let delta_d = REGULARIZATION / scale;

    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    let exact = k.clone();
    for i in 0..n {
        k[(i, i)] += delta_p;
    }
    for i in n..n + m {
        k[(i, i)] -= delta_d;
    }
    let lu = k.lu();
    let rhs = concat(r1, r2);
    let mut sol = lu.solve(&rhs)?;
    let mut resid = &rhs - &exact * &sol;
    for _ in 0..REFINEMENT_STEPS {
        let before = linalg::max_abs(&resid);
        let candidate = &sol + lu.solve(&resid)?;
        let next = &rhs - &exact * &candidate;
        if !(linalg::max_abs(&next) < before) {
            break;
        }
        sol = candidate;
        resid = next;
    }
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(1.0_f64, f64::min)
}

fn interior_point(p: &QpProblem, tol: f64, max_iter: usize) -> IpmOutcome {
    let g = &p.a_in;
    let a = &p.a_eq;
    let mi = g.nrows();
    let mut it = initial_point(p);
    let mut best = it.clone();
    let mut best_merit = f64::INFINITY;
    let mut iterations = 0;

    for iter in 0..max_iter {
        iterations = iter + 1;
        let r_d = &p.q * &it.x + &p.c - a.transpose() * &it.y - g.transpose() * &it.z;
        let r_e = a * &it.x - &p.b_eq;
        let r_i = g * &it.x - &p.b_in - &it.s;
        let gap = it.s.iter().zip(it.z.iter()).fold(0.0_f64, |acc, (s, z)| acc.max(s * z));
        let merit = linalg::max_abs(&r_d)
            .max(linalg::max_abs(&r_e))
            .max(linalg::max_abs(&r_i))
            .max(gap);
        if merit < best_merit {
            best_merit = merit;
            best = it.clone();
        }
        if merit <= 0.1 * tol {
            return IpmOutcome {
                it: best,
                iterations: iter,
                diverged: false,
            };
        }
        if linalg::max_abs(&it.x).max(linalg::max_abs(&it.z)).max(linalg::max_abs(&it.y)) > DIVERGENCE_LIMIT {
            return IpmOutcome {
                it: best,
                iterations: iter,
                diverged: true,
            };
        }

        let w = DVector::from_iterator(mi, it.z.iter().zip(it.s.iter()).map(|(z, s)| z / s));
        let mut gw = g.clone();
        for (r, wr) in w.iter().enumerate() {
            gw.row_mut(r).scale_mut(*wr);
        }
        let h = &p.q + g.transpose() * &gw;
        let mu = if mi > 0 { it.s.dot(&it.z) / mi as f64 } else { 0.0 };

        // Direction for a given complementarity target r_c (Z ds + S dz = r_c).
        let direction = |r_c: &DVector<f64>| -> Option<Direction> {
            let s_inv_rc = r_c.component_div(&it.s);
            let w_ri = w.component_mul(&r_i);
            let rhs = -&r_d - g.transpose() * &w_ri + g.transpose() * &s_inv_rc;
            let (dx, neg_dy) = solve_kkt(&h, a, &rhs, &(-&r_e))?;
            let dy = -neg_dy;
            let gdx = g * &dx;
            let dz = -w.component_mul(&(&r_i + &gdx)) + &s_inv_rc;
            let ds = &gdx + &r_i;
            Some((dx, dy, dz, ds))
        };

        let r_aff = -it.s.component_mul(&it.z);
        let Some((dx_a, _dy_a, dz_a, ds_a)) = direction(&r_aff) else {
            break;
        };
        let alpha_aff = max_step(&it.s, &ds_a).min(max_step(&it.z, &dz_a));
        let sigma = if mi > 0 && mu > 0.0 {
            let s_aff = &it.s + &ds_a * alpha_aff;
            let z_aff = &it.z + &dz_a * alpha_aff;
            let mu_aff = s_aff.dot(&z_aff) / mi as f64;
            (mu_aff / mu).powi(3).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let r_c = -it.s.component_mul(&it.z) - ds_a.component_mul(&dz_a) + DVector::from_element(mi, sigma * mu);
        let (dx, dy, dz, ds) = match direction(&r_c) {
            Some(d) => d,
            None => (dx_a, DVector::zeros(a.nrows()), dz_a, ds_a),
        };
        let alpha = (0.99 * max_step(&it.s, &ds).min(max_step(&it.z, &dz))).min(1.0);
        if alpha < 1e-14 {
            break;
        }
        it.x += &dx * alpha;
        it.y += &dy * alpha;
        it.z += &dz * alpha;
        it.s += &ds * alpha;
    }
    IpmOutcome {
        it: best,
        iterations,
        diverged: false,
    }
}

/// Re-solves the equality-constrained QP on the active set suggested by `it`.
fn polish(p: &QpProblem, it: &Iterate) -> Option<Iterate> {
    let active: Vec<usize> = (0..p.a_in.nrows()).filter(|&r| it.z[r] > it.s[r]).collect();
    let n = p.n();
    let me = p.a_eq.nrows();
    let mut a = DMatrix::zeros(me + active.len(), n);
    a.rows_mut(0, me).copy_from(&p.a_eq);
    let mut b = DVector::zeros(me + active.len());
    b.rows_mut(0, me).copy_from(&p.b_eq);
    for (k, &r) in active.iter().enumerate() {
        a.row_mut(me + k).copy_from(&p.a_in.row(r));
        b[me + k] = p.b_in[r];
    }
    let (x, w) = solve_kkt(&p.q, &a, &(-&p.c), &b)?;
    // w = -multipliers
    let lambda = -w;
    let y = lambda.rows(0, me).into_owned();
    let mut z = DVector::zeros(p.a_in.nrows());
    for (k, &r) in active.iter().enumerate() {
        z[r] = lambda[me + k].max(0.0);
    }
    let s = (&p.a_in * &x - &p.b_in).map(|v| v.max(0.0));
    Some(Iterate { x, y, z, s })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplex_problem(q: DMatrix<f64>, c: DVector<f64>) -> QpProblem {
        let n = c.len();
        QpProblem::new(q, c)
            .unwrap()
            .equalities(DMatrix::from_element(1, n, 1.0), DVector::from_element(1, 1.0))
            .unwrap()
            .nonnegative()
            .unwrap()
    }

    #[test]
    fn identity_on_simplex() {
        let p = simplex_problem(DMatrix::identity(2, 2), DVector::zeros(2));
        let sol = solve_qp(&p, 1e-9, 100);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.5).abs() < 1e-9 && (sol.x[1] - 0.5).abs() < 1e-9);
        assert!(sol.kkt_residual <= 1e-9);
    }

    #[test]
    fn inverse_variance_weights() {
        // minimizer of x1² + 4x2² on the simplex is proportional to (1, 1/4)
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let sol = solve_qp(&simplex_problem(q.clone(), DVector::zeros(2)), 1e-9, 100);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[0] - 0.8).abs() < 1e-9 && (sol.x[1] - 0.2).abs() < 1e-9);

        // independent check against a 1e-3 grid on the simplex
        let mut best = (f64::INFINITY, 0.0);
        for k in 0..=1000 {
            let x0 = k as f64 / 1000.0;
            let x = DVector::from_vec(vec![x0, 1.0 - x0]);
            let f = 0.5 * linalg::quad_form(&q, &x);
            if f < best.0 {
                best = (f, x0);
            }
        }
        assert!((best.1 - 0.8).abs() < 1e-9);
        assert!(sol.objective <= best.0 + 1e-12);
    }

    #[test]
    fn contradictory_constraints_are_infeasible() {
        let p = simplex_problem(DMatrix::identity(2, 2), DVector::zeros(2))
            .inequalities(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), DVector::from_element(1, 2.0))
            .unwrap();
        let sol = solve_qp(&p, 1e-9, 100);
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(matches!(sol.into_result(), Err(Error::Infeasible)));
    }

    #[test]
    fn linear_program_on_simplex() {
        // Q = 0: picks the cheapest coordinate.
        let p = simplex_problem(DMatrix::zeros(3, 3), DVector::from_vec(vec![0.3, -0.2, 0.1]));
        let sol = solve_qp(&p, 1e-9, 100);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn equality_only_is_one_newton_step() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let p = QpProblem::new(q, DVector::from_vec(vec![-1.0, 0.0]))
            .unwrap()
            .equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0))
            .unwrap();
        let sol = solve_qp(&p, 1e-10, 50);
        assert_eq!(sol.status, QpStatus::Optimal);
        assert!(sol.kkt_residual < 1e-10);
    }

    #[test]
    fn rejects_bad_q() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(QpProblem::new(asym, DVector::zeros(2)).is_err());
        let indefinite = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!(QpProblem::new(indefinite, DVector::zeros(2)).is_err());
        let nearly = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-11]));
        let p = QpProblem::new(nearly, DVector::zeros(2)).unwrap();
        assert!(linalg::min_eigenvalue(p.q()) > 0.0);
        assert!(matches!(
            QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn deterministic_output() {
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.2, 0.1, 0.2, 1.5]);
        let p = simplex_problem(q, DVector::from_vec(vec![0.1, -0.3, 0.05]));
        let a = solve_qp(&p, 1e-9, 100);
        let b = solve_qp(&p, 1e-9, 100);
        assert_eq!(a, b);
        assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}
