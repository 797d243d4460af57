use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use secureplan_core::qp::{QpProblem, QpSolution};

pub fn normal_matrix<R: Rng>(rng: &mut R, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn normal_vector<R: Rng>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// `P = MMᵀ/k` with `k` columns, so rank `min(n, k)`, plus an optional ridge.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, rank: usize, ridge: f64) -> DMatrix<f64> {
    let m = normal_matrix(rng, n, rank);
    let mut p = &m * m.transpose() / rank as f64;
    for i in 0..n {
        p[(i, i)] += ridge;
    }
    (&p + p.transpose()) * 0.5
}

/// Direct solve of the equality-constrained KKT system.
pub fn kkt_direct(p: &DMatrix<f64>, q: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (n, m) = (q.len(), b.len());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(p);
    k.view_mut((n, 0), (m, n)).copy_from(a);
    k.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-q));
    rhs.rows_mut(n, m).copy_from(b);
    k.lu().solve(&rhs).expect("nonsingular KKT").rows(0, n).into_owned()
}

/// Largest violation among stationarity, primal feasibility, multiplier sign and
/// complementary slackness, computed from the problem data alone.
pub fn kkt_residual(prob: &QpProblem, sol: &QpSolution) -> f64 {
    let z = &sol.z;
    let stat = &prob.p * z + &prob.q + prob.a_eq.transpose() * &sol.y_eq + prob.g.transpose() * &sol.y_ineq;
    let eq = &prob.a_eq * z - &prob.b_eq;
    let slack = &prob.h - &prob.g * z;
    let mut worst = stat.amax().max(if eq.is_empty() { 0.0 } else { eq.amax() });
    for i in 0..slack.len() {
        worst = worst.max(-slack[i]).max(-sol.y_ineq[i]).max((sol.y_ineq[i] * slack[i]).abs());
    }
    worst
}

pub struct Instance {
    pub problem: QpProblem,
    /// Known optimum when inequalities are built to be inactive.
    pub expected: Option<DVector<f64>>,
}

/// Equality-constrained problem with strictly positive-definite reduced Hessian and
/// inequality rows placed away from the optimum.
pub fn inactive_instance<R: Rng>(rng: &mut R, n: usize) -> Instance {
    let me = rng.gen_range(0..=n / 2);
    let mi = rng.gen_range(0..=n);
    let p = random_psd(rng, n, n, 0.1);
    let q = normal_vector(rng, n);
    let a = normal_matrix(rng, me, n);
    let b = normal_vector(rng, me);
    let z = kkt_direct(&p, &q, &a, &b);
    let g = normal_matrix(rng, mi, n);
    let h = &g * &z + DVector::from_fn(mi, |_, _| rng.gen_range(0.5..2.0));
    Instance {
        problem: QpProblem::new(p, q).with_equalities(a, b).with_inequalities(g, h),
        expected: Some(z),
    }
}

/// Possibly rank-deficient P with inequalities through a known feasible point, so
/// some rows are active at the optimum.
pub fn active_instance<R: Rng>(rng: &mut R, n: usize) -> Instance {
    let me = rng.gen_range(0..=n / 3);
    let mi = rng.gen_range(1..=2 * n);
    let rank = rng.gen_range(1..=n);
    let p = random_psd(rng, n, rank, 0.0);
    let q = normal_vector(rng, n);
    let feasible = normal_vector(rng, n);
    let a = normal_matrix(rng, me, n);
    let b = &a * &feasible;
    let g = normal_matrix(rng, mi, n);
    let h = &g * &feasible + DVector::from_fn(mi, |_, _| rng.gen_range(0.0..1.0));
    // Box rows keep the problem bounded when P is singular.
    let mut gb = DMatrix::zeros(mi + 2 * n, n);
    let mut hb = DVector::zeros(mi + 2 * n);
    gb.rows_mut(0, mi).copy_from(&g);
    hb.rows_mut(0, mi).copy_from(&h);
    for i in 0..n {
        gb[(mi + 2 * i, i)] = 1.0;
        gb[(mi + 2 * i + 1, i)] = -1.0;
        hb[mi + 2 * i] = feasible[i] + 5.0;
        hb[mi + 2 * i + 1] = -feasible[i] + 5.0;
    }
    Instance { problem: QpProblem::new(p, q).with_equalities(a, b).with_inequalities(gb, hb), expected: None }
}

/// A feasible random problem plus two rows demanding `aᵀz ≤ c` and `aᵀz ≥ c + gap`.
pub fn infeasible_instance<R: Rng>(rng: &mut R, n: usize) -> QpProblem {
    let mut inst = active_instance(rng, n).problem;
    let a = normal_vector(rng, n);
    let c: f64 = rng.sample(StandardNormal);
    let gap = rng.gen_range(0.1..2.0);
    let mi = inst.g.nrows();
    let mut g = DMatrix::zeros(mi + 2, n);
    let mut h = DVector::zeros(mi + 2);
    g.rows_mut(0, mi).copy_from(&inst.g);
    h.rows_mut(0, mi).copy_from(&inst.h);
    g.row_mut(mi).copy_from(&a.transpose());
    h[mi] = c;
    g.row_mut(mi + 1).copy_from(&(-a.transpose()));
    h[mi + 1] = -(c + gap);
    inst.g = g;
    inst.h = h;
    inst
}
