//! Dense convex QP solver: minimize `½ zᵀPz + qᵀz` subject to `A_eq z = b_eq` and
//! `G z ≤ h`.
//!
//! The iteration is ADMM on the splitting `l ≤ Az ≤ u` (OSQP style) with Ruiz
//! equilibration, over-relaxation, adaptive step size, infeasibility certificates from
//! successive iterate differences, and an active-set polishing step.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("P is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("P is not positive semidefinite")]
    NotPositiveSemidefinite,
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub g: DMatrix<f64>,
    pub h: DVector<f64>,
}

impl QpProblem {
    /// Unconstrained problem; add rows with [`QpProblem::with_equalities`] and
    /// [`QpProblem::with_inequalities`].
    pub fn new(p: DMatrix<f64>, q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            p,
            q,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            g: DMatrix::zeros(0, n),
            h: DVector::zeros(0),
        }
    }

    pub fn with_equalities(mut self, a_eq: DMatrix<f64>, b_eq: DVector<f64>) -> Self {
        self.a_eq = a_eq;
        self.b_eq = b_eq;
        self
    }

    pub fn with_inequalities(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.g = g;
        self.h = h;
        self
    }

    pub fn num_vars(&self) -> usize {
        self.q.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.p * z)) + self.q.dot(z)
    }

    pub fn validate(&self) -> Result<(), QpError> {
        let n = self.q.len();
        if self.p.shape() != (n, n) {
            return Err(QpError::DimensionMismatch(format!("P is {:?}, expected {n}x{n}", self.p.shape())));
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::DimensionMismatch(format!(
                "A_eq is {:?} with {} right-hand sides",
                self.a_eq.shape(),
                self.b_eq.len()
            )));
        }
        if self.g.ncols() != n || self.g.nrows() != self.h.len() {
            return Err(QpError::DimensionMismatch(format!(
                "G is {:?} with {} right-hand sides",
                self.g.shape(),
                self.h.len()
            )));
        }
        for (name, ok) in [
            ("P", self.p.iter().all(|v| v.is_finite())),
            ("q", self.q.iter().all(|v| v.is_finite())),
            ("A_eq", self.a_eq.iter().all(|v| v.is_finite())),
            ("b_eq", self.b_eq.iter().all(|v| v.is_finite())),
            ("G", self.g.iter().all(|v| v.is_finite())),
            ("h", self.h.iter().all(|v| !v.is_nan() && *v != f64::NEG_INFINITY)),
        ] {
            if !ok {
                return Err(QpError::NonFinite(name));
            }
        }
        let asym = (&self.p - self.p.transpose()).amax();
        if asym > 1e-10 {
            return Err(QpError::NotSymmetric(asym));
        }
        let diag_max = (0..n).map(|i| self.p[(i, i)].abs()).fold(1.0, f64::max);
        let shifted = &self.p + DMatrix::identity(n, n) * (PSD_SHIFT * diag_max);
        if n > 0 && shifted.cholesky().is_none() {
            return Err(QpError::NotPositiveSemidefinite);
        }
        Ok(())
    }

    /// Plain-text dump for offline reproduction.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut mat = |name: &str, m: &DMatrix<f64>| {
            writeln!(s, "{name} {} {}", m.nrows(), m.ncols()).unwrap();
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
                writeln!(s, "{}", row.join(" ")).unwrap();
            }
        };
        mat("P", &self.p);
        mat("q", &DMatrix::from_column_slice(1, self.q.len(), self.q.as_slice()));
        mat("A_eq", &self.a_eq);
        mat("b_eq", &DMatrix::from_column_slice(1, self.b_eq.len(), self.b_eq.as_slice()));
        mat("G", &self.g);
        mat("h", &DMatrix::from_column_slice(1, self.h.len(), self.h.as_slice()));
        s
    }
}

/// Shift used by the positive-semidefiniteness check, relative to the largest diagonal.
const PSD_SHIFT: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QpSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    pub max_iter: usize,
    /// Iterations between step-size updates; 0 disables adaptation.
    pub adaptive_rho_interval: usize,
    pub scaling_iterations: usize,
    pub polish: bool,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            sigma: 1e-9,
            alpha: 1.6,
            eps_abs: 1e-6,
            eps_rel: 1e-6,
            eps_prim_inf: 1e-8,
            eps_dual_inf: 1e-8,
            max_iter: 50_000,
            adaptive_rho_interval: 50,
            scaling_iterations: 10,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    pub z: DVector<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: DVector<f64>,
    /// Multipliers of `G z ≤ h`, nonnegative at an optimum.
    pub y_ineq: DVector<f64>,
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
}

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const ADAPTIVE_RHO_TOLERANCE: f64 = 5.0;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE_ITERS: usize = 10;
const SCALING_MIN: f64 = 1e-4;
const SCALING_MAX: f64 = 1e4;

/// Equilibrated problem data `P̂ = c·DPD`, `q̂ = c·Dq`, `Â = EAD`, `l̂ = El`, `û = Eu`.
struct Scaled {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: DVector<f64>,
    e: DVector<f64>,
    c: f64,
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn clamp_norm(v: f64) -> f64 {
    if v < SCALING_MIN {
        1.0
    } else {
        v.min(SCALING_MAX)
    }
}

fn equilibrate(p: &DMatrix<f64>, q: &DVector<f64>, a: &DMatrix<f64>, l: &DVector<f64>, u: &DVector<f64>, iters: usize) -> Scaled {
    let (n, m) = (p.nrows(), a.nrows());
    let mut s = Scaled {
        p: p.clone(),
        q: q.clone(),
        a: a.clone(),
        l: l.clone(),
        u: u.clone(),
        d: DVector::from_element(n, 1.0),
        e: DVector::from_element(m, 1.0),
        c: 1.0,
    };
    for _ in 0..iters {
        let delta_d = DVector::from_fn(n, |j, _| {
            let col = s.p.column(j).amax().max(if m > 0 { s.a.column(j).amax() } else { 0.0 });
            1.0 / clamp_norm(col).sqrt()
        });
        let delta_e = DVector::from_fn(m, |i, _| 1.0 / clamp_norm(s.a.row(i).amax()).sqrt());
        for j in 0..n {
            for i in 0..n {
                s.p[(i, j)] *= delta_d[i] * delta_d[j];
            }
            for i in 0..m {
                s.a[(i, j)] *= delta_e[i] * delta_d[j];
            }
        }
        s.q.component_mul_assign(&delta_d);
        s.d.component_mul_assign(&delta_d);
        s.e.component_mul_assign(&delta_e);
    }
    if iters > 0 && n > 0 {
        let mean_col = (0..n).map(|j| s.p.column(j).amax()).sum::<f64>() / n as f64;
        let c = 1.0 / clamp_norm(mean_col.max(inf_norm(&s.q)));
        s.p *= c;
        s.q *= c;
        s.c = c;
    }
    s.l = l.component_mul(&s.e);
    s.u = u.component_mul(&s.e);
    s
}

struct Iterate {
    x: DVector<f64>,
    z: DVector<f64>,
    y: DVector<f64>,
}

struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
}

/// Problem in `l ≤ Az ≤ u` form together with its equilibration.
struct Admm<'a> {
    s: Scaled,
    is_eq: Vec<bool>,
    settings: &'a QpSettings,
}

impl Admm<'_> {
    fn rho_vec(&self, rho: f64) -> DVector<f64> {
        DVector::from_fn(self.is_eq.len(), |i, _| if self.is_eq[i] { rho * RHO_EQ_FACTOR } else { rho })
    }

    fn factor(&self, rho_vec: &DVector<f64>) -> nalgebra::Cholesky<f64, nalgebra::Dyn> {
        let n = self.s.p.nrows();
        let mut sigma = self.settings.sigma;
        loop {
            let mut k = self.s.p.clone();
            let ra = DMatrix::from_fn(self.s.a.nrows(), n, |i, j| self.s.a[(i, j)] * rho_vec[i]);
            k += self.s.a.transpose() * ra;
            for i in 0..n {
                k[(i, i)] += sigma;
            }
            if let Some(ch) = k.cholesky() {
                return ch;
            }
            sigma *= 10.0;
        }
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i].max(self.s.l[i]).min(self.s.u[i]))
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let s = &self.s;
        let ax = &s.a * &it.x;
        let px = &s.p * &it.x;
        let aty = s.a.transpose() * &it.y;
        let einv = s.e.map(|v| 1.0 / v);
        let dinv = s.d.map(|v| 1.0 / v);
        let prim = inf_norm(&(&ax - &it.z).component_mul(&einv));
        let dual = inf_norm(&(&px + &s.q + &aty).component_mul(&dinv)) / s.c;
        let eps = self.settings;
        let eps_prim = eps.eps_abs
            + eps.eps_rel * inf_norm(&ax.component_mul(&einv)).max(inf_norm(&it.z.component_mul(&einv)));
        let eps_dual = eps.eps_abs
            + eps.eps_rel
                * inf_norm(&px.component_mul(&dinv))
                    .max(inf_norm(&aty.component_mul(&dinv)))
                    .max(inf_norm(&s.q.component_mul(&dinv)))
                / s.c;
        Residuals { prim, dual, eps_prim, eps_dual }
    }

    /// Residual ratio used to rebalance ρ, on scaled quantities.
    fn rho_estimate(&self, it: &Iterate, rho: f64) -> f64 {
        let s = &self.s;
        let ax = &s.a * &it.x;
        let px = &s.p * &it.x;
        let aty = s.a.transpose() * &it.y;
        let prim = inf_norm(&(&ax - &it.z)) / (inf_norm(&ax).max(inf_norm(&it.z)) + 1e-30);
        let dual = inf_norm(&(&px + &s.q + &aty)) / (inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&s.q)) + 1e-30);
        (rho * (prim / (dual + 1e-30)).sqrt()).clamp(RHO_MIN, RHO_MAX)
    }

    fn primal_infeasible(&self, dy_scaled: &DVector<f64>) -> bool {
        let s = &self.s;
        // project onto the polar of the recession cone of [l, u]
        let mut dy_scaled = dy_scaled.clone();
        for i in 0..dy_scaled.len() {
            if s.u[i].is_infinite() {
                dy_scaled[i] = dy_scaled[i].min(0.0);
            }
            if s.l[i].is_infinite() {
                dy_scaled[i] = dy_scaled[i].max(0.0);
            }
        }
        let dy = dy_scaled.component_mul(&s.e) / s.c;
        let norm = inf_norm(&dy);
        if norm <= 1e-30 {
            return false;
        }
        let eps = self.settings.eps_prim_inf;
        let at_dy = (s.a.transpose() * &dy_scaled).component_div(&s.d) / s.c;
        if inf_norm(&at_dy) > eps * norm {
            return false;
        }
        let mut support = 0.0;
        for i in 0..dy.len() {
            if dy[i] > 0.0 {
                support += s.u[i] / s.e[i] * dy[i];
            } else if dy[i] < 0.0 {
                support += s.l[i] / s.e[i] * dy[i];
            }
        }
        support < -eps * norm
    }

    fn dual_infeasible(&self, dx_scaled: &DVector<f64>) -> bool {
        let s = &self.s;
        let dx = dx_scaled.component_mul(&s.d);
        let norm = inf_norm(&dx);
        if norm <= 1e-30 {
            return false;
        }
        let eps = self.settings.eps_dual_inf * norm;
        let pdx = (&s.p * dx_scaled).component_div(&s.d) / s.c;
        if inf_norm(&pdx) > eps {
            return false;
        }
        let qdx = s.q.dot(dx_scaled) / s.c;
        if qdx > -eps {
            return false;
        }
        let adx = (&s.a * dx_scaled).component_div(&s.e);
        (0..adx.len()).all(|i| {
            let lo_ok = s.l[i].is_infinite() || adx[i] >= -eps;
            let hi_ok = s.u[i].is_infinite() || adx[i] <= eps;
            lo_ok && hi_ok
        })
    }

    /// Solves the equality-constrained problem on a guessed active set. Returns the
    /// polished iterate if it meets the tolerances and the multiplier signs.
    fn polish(&self, it: &Iterate) -> Option<Iterate> {
        let s = &self.s;
        let (n, m) = (s.p.nrows(), s.a.nrows());
        let mut active: Vec<(usize, f64, i8)> = Vec::new();
        for i in 0..m {
            if self.is_eq[i] {
                active.push((i, s.l[i], 0));
            } else if it.z[i] - s.l[i] < -it.y[i] {
                active.push((i, s.l[i], -1));
            } else if s.u[i] - it.z[i] < it.y[i] {
                active.push((i, s.u[i], 1));
            }
        }
        let k = active.len();
        let dim = n + k;
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&s.p);
        for (r, &(i, _, _)) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + r, j)] = s.a[(i, j)];
                kkt[(j, n + r)] = s.a[(i, j)];
            }
        }
        let mut reg = kkt.clone();
        for i in 0..n {
            reg[(i, i)] += POLISH_DELTA;
        }
        for r in 0..k {
            reg[(n + r, n + r)] -= POLISH_DELTA;
        }
        let lu = reg.lu();
        let mut rhs = DVector::zeros(dim);
        rhs.rows_mut(0, n).copy_from(&(-&s.q));
        for (r, &(_, b, _)) in active.iter().enumerate() {
            rhs[n + r] = b;
        }
        let mut sol = lu.solve(&rhs)?;
        for _ in 0..POLISH_REFINE_ITERS {
            let err = &rhs - &kkt * &sol;
            if inf_norm(&err) < 1e-14 {
                break;
            }
            sol += lu.solve(&err)?;
        }
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let x = sol.rows(0, n).into_owned();
        let mut y = DVector::zeros(m);
        for (r, &(i, _, _)) in active.iter().enumerate() {
            y[i] = sol[n + r];
        }
        let z = self.project(&(&s.a * &x));
        let cand = Iterate { x, z, y };
        let res = self.residuals(&cand);
        let ax = &s.a * &cand.x;
        let viol = (0..m)
            .map(|i| ((s.l[i] - ax[i]).max(ax[i] - s.u[i]).max(0.0)) / s.e[i])
            .fold(0.0, f64::max);
        // Multipliers are in scaled units; compare them in the original ones.
        let sign_ok = active.iter().all(|&(i, _, side)| {
            let yi = cand.y[i] * s.e[i] / s.c;
            match side {
                -1 => yi <= res.eps_dual,
                1 => yi >= -res.eps_dual,
                _ => true,
            }
        });
        (viol <= res.eps_prim && res.dual <= res.eps_dual && sign_ok).then_some(cand)
    }
}

/// Solves with the given settings. Structural problems with the data are errors;
/// everything else is reported through [`QpSolution::status`].
pub fn solve(problem: &QpProblem, settings: &QpSettings) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let n = problem.num_vars();
    let (me, mi) = (problem.a_eq.nrows(), problem.g.nrows());
    // Rows with h = +inf carry no constraint.
    let kept: Vec<usize> = (0..mi).filter(|&i| problem.h[i].is_finite()).collect();
    let m = me + kept.len();
    let mut a = DMatrix::zeros(m, n);
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    a.rows_mut(0, me).copy_from(&problem.a_eq);
    l.rows_mut(0, me).copy_from(&problem.b_eq);
    u.rows_mut(0, me).copy_from(&problem.b_eq);
    for (r, &i) in kept.iter().enumerate() {
        a.row_mut(me + r).copy_from(&problem.g.row(i));
        l[me + r] = f64::NEG_INFINITY;
        u[me + r] = problem.h[i];
    }
    let is_eq: Vec<bool> = (0..m).map(|i| i < me).collect();
    let scaled = equilibrate(&problem.p, &problem.q, &a, &l, &u, settings.scaling_iterations);
    let admm = Admm { s: scaled, is_eq, settings };

    let mut it = Iterate { x: DVector::zeros(n), z: DVector::zeros(m), y: DVector::zeros(m) };
    let mut rho = settings.rho.clamp(RHO_MIN, RHO_MAX);
    let mut rho_vec = admm.rho_vec(rho);
    let mut chol = admm.factor(&rho_vec);
    let alpha = settings.alpha;
    let mut next_polish = 0usize;

    let finish = |it: &Iterate, status: QpStatus, iterations: usize, polished: bool| {
        let s = &admm.s;
        let z = it.x.component_mul(&s.d);
        let y = it.y.component_mul(&s.e) / s.c;
        let res = admm.residuals(it);
        let mut y_ineq = DVector::zeros(mi);
        for (r, &i) in kept.iter().enumerate() {
            y_ineq[i] = y[me + r];
        }
        QpSolution {
            status,
            objective: problem.objective(&z),
            z,
            y_eq: y.rows(0, me).into_owned(),
            y_ineq,
            primal_residual: res.prim,
            dual_residual: res.dual,
            iterations,
            polished,
        }
    };

    for iter in 1..=settings.max_iter {
        let x_prev = it.x.clone();
        let z_prev = it.z.clone();
        let y_prev = it.y.clone();
        let s = &admm.s;

        let rhs = &it.x * settings.sigma - &s.q + s.a.transpose() * (rho_vec.component_mul(&it.z) - &it.y);
        let x_tilde = chol.solve(&rhs);
        let z_tilde = &s.a * &x_tilde;
        it.x = &x_tilde * alpha + &x_prev * (1.0 - alpha);
        let z_relax = &z_tilde * alpha + &z_prev * (1.0 - alpha);
        it.z = admm.project(&(&z_relax + it.y.component_div(&rho_vec)));
        it.y += rho_vec.component_mul(&(&z_relax - &it.z));

        let res = admm.residuals(&it);
        if res.prim <= res.eps_prim && res.dual <= res.eps_dual {
            if settings.polish {
                if let Some(p) = admm.polish(&it) {
                    return Ok(finish(&p, QpStatus::Optimal, iter, true));
                }
            }
            return Ok(finish(&it, QpStatus::Optimal, iter, false));
        }
        // Early polishing once the iterate is roughly converged.
        if settings.polish && iter >= next_polish && res.prim <= res.eps_prim.sqrt() && res.dual <= res.eps_dual.sqrt() {
            if let Some(p) = admm.polish(&it) {
                return Ok(finish(&p, QpStatus::Optimal, iter, true));
            }
            next_polish = iter + 100;
        }
        if admm.primal_infeasible(&(&it.y - &y_prev)) {
            return Ok(finish(&it, QpStatus::PrimalInfeasible, iter, false));
        }
        if admm.dual_infeasible(&(&it.x - &x_prev)) {
            return Ok(finish(&it, QpStatus::DualInfeasible, iter, false));
        }
        if settings.adaptive_rho_interval > 0 && iter % settings.adaptive_rho_interval == 0 {
            let new_rho = admm.rho_estimate(&it, rho);
            if new_rho > rho * ADAPTIVE_RHO_TOLERANCE || new_rho < rho / ADAPTIVE_RHO_TOLERANCE {
                rho = new_rho;
                rho_vec = admm.rho_vec(rho);
                chol = admm.factor(&rho_vec);
            }
        }
    }
    Ok(finish(&it, QpStatus::MaxIterations, settings.max_iter, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projection_example() {
        // (z - 1)^2 = z^2 - 2z + 1
        let prob = QpProblem::new(DMatrix::from_element(1, 1, 2.0), DVector::from_element(1, -2.0))
            .with_inequalities(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 0.0));
        let sol = solve(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.objective + 1.0, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.y_ineq[0], 2.0, epsilon = 1e-6);
    }

    #[test]
    fn symmetric_equality_example() {
        let prob = QpProblem::new(DMatrix::identity(2, 2) * 2.0, DVector::zeros(2))
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 1.0));
        let sol = solve(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_abs_diff_eq!(sol.z[0], 0.5, epsilon = 1e-8);
        assert_abs_diff_eq!(sol.z[1], 0.5, epsilon = 1e-8);
    }

    #[test]
    fn contradictory_bounds_are_infeasible() {
        let prob = QpProblem::new(DMatrix::from_element(1, 1, 1.0), DVector::zeros(1))
            .with_inequalities(DMatrix::from_column_slice(2, 1, &[-1.0, 1.0]), DVector::from_column_slice(&[-1.0, 0.0]));
        let sol = solve(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn unbounded_linear_objective_is_dual_infeasible() {
        let prob = QpProblem::new(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0))
            .with_inequalities(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, 0.0));
        let sol = solve(&prob, &QpSettings::default()).unwrap();
        assert_eq!(sol.status, QpStatus::DualInfeasible);
    }

    #[test]
    fn structural_errors() {
        let indefinite = QpProblem::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), DVector::zeros(2));
        assert_eq!(solve(&indefinite, &QpSettings::default()), Err(QpError::NotPositiveSemidefinite));
        let asym = QpProblem::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), DVector::zeros(2));
        assert!(matches!(solve(&asym, &QpSettings::default()), Err(QpError::NotSymmetric(_))));
        let bad = QpProblem::new(DMatrix::identity(2, 2), DVector::zeros(3));
        assert!(matches!(solve(&bad, &QpSettings::default()), Err(QpError::DimensionMismatch(_))));
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let p = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 2.0]);
        let prob = QpProblem::new(p, DVector::from_column_slice(&[1.0, -2.0, 0.5]))
            .with_inequalities(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), DVector::from_element(1, 0.1));
        let a = solve(&prob, &QpSettings::default()).unwrap();
        let b = solve(&prob, &QpSettings::default()).unwrap();
        assert_eq!(a, b);
        assert!(prob.dump().starts_with("P 3 3\n"));
    }
}
