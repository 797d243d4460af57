//! Dynamic feasibility of discrete transitions: a sampled-data trajectory QP per agent
//! with control-barrier rows that keep each agent inside its region until the crossing
//! sample and inside the next region afterwards.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::abstraction::{AffineDynamics, TransitionSystem};
use crate::geometry::Partition;
use crate::qp::{solve, QpError, QpProblem, QpSettings, QpStatus};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeasibilityError {
    #[error("invalid feasibility parameters: {0}")]
    InvalidParams(String),
    #[error("regions {from} and {to} share no facet")]
    MissingFacet { from: usize, to: usize },
    #[error("agent {0} has no dynamics")]
    MissingDynamics(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("no cached segment for transition {from} -> {to}")]
    MissingSegment { from: usize, to: usize },
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityParams {
    /// Duration `t_f` of one transition in seconds.
    pub horizon: f64,
    /// Number of Euler steps `N`.
    pub steps: usize,
    /// Sample index at which region-changing agents sit on the shared facet.
    pub crossing: usize,
    pub gamma: f64,
    pub epsilon: f64,
}

impl Default for FeasibilityParams {
    fn default() -> Self {
        Self { horizon: 2.0, steps: 40, crossing: 20, gamma: 1.0, epsilon: 0.01 }
    }
}

impl FeasibilityParams {
    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn validate(&self) -> Result<(), FeasibilityError> {
        let bad = |m: String| Err(FeasibilityError::InvalidParams(m));
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return bad(format!("horizon must be positive, got {}", self.horizon));
        }
        if self.steps < 2 {
            return bad(format!("need at least 2 steps, got {}", self.steps));
        }
        if self.crossing == 0 || self.crossing >= self.steps {
            return bad(format!("crossing index {} outside (0, {})", self.crossing, self.steps));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be nonnegative, got {}", self.epsilon));
        }
        if self.gamma * self.dt() > 1.0 {
            return bad(format!("gamma * dt = {} exceeds 1", self.gamma * self.dt()));
        }
        Ok(())
    }
}

/// Sampled states `x(0..=N)` and zero-order-hold inputs `u(0..N)` of one agent.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentSegment {
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    /// `dt Σ ‖u(k)‖²`.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectorySegment {
    pub dt: f64,
    pub crossing: usize,
    pub real: Vec<AgentSegment>,
    pub copy: Option<Vec<AgentSegment>>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LocalOutcome {
    Feasible(AgentSegment),
    Infeasible { status: QpStatus, retried: bool },
}

impl LocalOutcome {
    pub fn segment(&self) -> Option<&AgentSegment> {
        match self {
            LocalOutcome::Feasible(s) => Some(s),
            LocalOutcome::Infeasible { .. } => None,
        }
    }
}

/// Local results keyed by `(agent, from region, to region)`. Real and copy agents with
/// the same index share dynamics, so both roles read the same entry.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SegmentCache {
    pub params: FeasibilityParams,
    local: BTreeMap<(usize, usize, usize), LocalOutcome>,
    /// Transitions dropped because the solver hit its iteration limit twice.
    pub warnings: Vec<String>,
}

impl SegmentCache {
    pub fn new(params: FeasibilityParams) -> Self {
        Self { params, local: BTreeMap::new(), warnings: Vec::new() }
    }

    pub fn get(&self, agent: usize, from: usize, to: usize) -> Option<&LocalOutcome> {
        self.local.get(&(agent, from, to))
    }

    pub fn len(&self) -> usize {
        self.local.len()
    }

    pub fn is_empty(&self) -> bool {
        self.local.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(usize, usize, usize), &LocalOutcome)> {
        self.local.iter()
    }

    fn insert(&mut self, key: (usize, usize, usize), outcome: LocalOutcome) {
        if let LocalOutcome::Infeasible { status: QpStatus::MaxIterations, .. } = outcome {
            self.warnings.push(format!(
                "agent {} transition {} -> {}: iteration limit reached twice, treated as infeasible",
                key.0, key.1, key.2
            ));
        }
        self.local.insert(key, outcome);
    }

    /// Joint segment of a transition of `sys`, or `None` if some agent is infeasible.
    pub fn segment(
        &self,
        sys: &TransitionSystem,
        from: usize,
        to: usize,
    ) -> Result<Option<TrajectorySegment>, FeasibilityError> {
        let mut real = Vec::new();
        let mut copy = Vec::new();
        for (key, is_copy) in local_keys(sys, from, to) {
            match self.local.get(&key) {
                None => return Err(FeasibilityError::MissingSegment { from, to }),
                Some(LocalOutcome::Infeasible { .. }) => return Ok(None),
                Some(LocalOutcome::Feasible(s)) => {
                    if is_copy { copy.push(s.clone()) } else { real.push(s.clone()) }
                }
            }
        }
        let objective = real.iter().chain(&copy).map(|s| s.objective).sum();
        let copy = sys.state(from).copy.as_ref().map(|_| copy);
        Ok(Some(TrajectorySegment { dt: self.params.dt(), crossing: self.params.crossing, real, copy, objective }))
    }
}

fn local_keys(sys: &TransitionSystem, from: usize, to: usize) -> Vec<((usize, usize, usize), bool)> {
    let (s, t) = (sys.state(from), sys.state(to));
    let mut keys: Vec<_> = (0..s.real.len()).map(|i| ((i, s.real[i], t.real[i]), false)).collect();
    if let (Some(a), Some(b)) = (&s.copy, &t.copy) {
        keys.extend((0..a.len()).map(|i| ((i, a[i], b[i]), true)));
    }
    keys
}

/// Row-wise sparse builder for `A_eq z = b_eq` and `G z ≤ h`.
#[derive(Default)]
struct Rows {
    eq: Vec<(Vec<(usize, f64)>, f64)>,
    ineq: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Rows {
    fn matrices(&self, vars: usize) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>, DVector<f64>) {
        let dense = |rows: &[(Vec<(usize, f64)>, f64)]| {
            let mut m = DMatrix::zeros(rows.len(), vars);
            let mut v = DVector::zeros(rows.len());
            for (r, (coeffs, rhs)) in rows.iter().enumerate() {
                for &(c, x) in coeffs {
                    m[(r, c)] += x;
                }
                v[r] = *rhs;
            }
            (m, v)
        };
        let (a, b) = dense(&self.eq);
        let (g, h) = dense(&self.ineq);
        (a, b, g, h)
    }
}

/// Variable offsets of one agent block: states first, then inputs.
#[derive(Clone, Copy)]
struct Layout {
    base: usize,
    n: usize,
    m: usize,
    steps: usize,
}

impl Layout {
    fn x(&self, k: usize, d: usize) -> usize {
        self.base + k * self.n + d
    }

    fn u(&self, k: usize, d: usize) -> usize {
        self.base + (self.steps + 1) * self.n + k * self.m + d
    }

    fn size(&self) -> usize {
        (self.steps + 1) * self.n + self.steps * self.m
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `h(x(k)) ≥ ε` for the half-space `p·x + g ≥ 0`.
fn margin_row(rows: &mut Rows, l: &Layout, k: usize, p: &[f64], g: f64, eps: f64) {
    let coeffs = (0..l.n).map(|d| (l.x(k, d), -p[d])).collect();
    rows.ineq.push((coeffs, g - eps));
}

/// `p·(A x(k) + B u(k) + b) ≥ −γ (p·x(k) + g − ε)`.
fn cbf_row(rows: &mut Rows, l: &Layout, dynamics: &AffineDynamics, k: usize, p: &[f64], g: f64, params: &FeasibilityParams) {
    let mut coeffs = Vec::with_capacity(l.n + l.m);
    for d in 0..l.n {
        let pa: f64 = (0..l.n).map(|r| p[r] * dynamics.a[(r, d)]).sum();
        coeffs.push((l.x(k, d), -(pa + params.gamma * p[d])));
    }
    for d in 0..l.m {
        let pb: f64 = (0..l.n).map(|r| p[r] * dynamics.b[(r, d)]).sum();
        coeffs.push((l.u(k, d), -pb));
    }
    let pb0 = dot(p, dynamics.offset.as_slice());
    rows.ineq.push((coeffs, pb0 + params.gamma * (g - params.epsilon)));
}

fn check_dims(dynamics: &AffineDynamics, partition: &Partition) -> Result<(), FeasibilityError> {
    let n = partition.dim();
    let m = dynamics.input_dim();
    if dynamics.a.shape() != (n, n) || dynamics.b.nrows() != n || dynamics.offset.len() != n || dynamics.input.dim() != m {
        return Err(FeasibilityError::DimensionMismatch(format!(
            "workspace dimension {n}, A {:?}, B {:?}, b {}, input set dimension {}",
            dynamics.a.shape(),
            dynamics.b.shape(),
            dynamics.offset.len(),
            dynamics.input.dim()
        )));
    }
    Ok(())
}

fn agent_rows(
    rows: &mut Rows,
    l: &Layout,
    dynamics: &AffineDynamics,
    partition: &Partition,
    from: usize,
    to: usize,
    params: &FeasibilityParams,
) -> Result<(), FeasibilityError> {
    let (n, m, steps, kc, dt) = (l.n, l.m, l.steps, params.crossing, params.dt());

    // x(k+1) − x(k) − dt (A x(k) + B u(k)) = dt b
    for k in 0..steps {
        for r in 0..n {
            let mut coeffs = vec![(l.x(k + 1, r), 1.0), (l.x(k, r), -1.0)];
            coeffs.extend((0..n).map(|d| (l.x(k, d), -dt * dynamics.a[(r, d)])));
            coeffs.extend((0..m).map(|d| (l.u(k, d), -dt * dynamics.b[(r, d)])));
            rows.eq.push((coeffs, dt * dynamics.offset[r]));
        }
    }
    let (start, end) = (partition.center(from), partition.center(to));
    for d in 0..n {
        rows.eq.push((vec![(l.x(0, d), 1.0)], start[d]));
    }
    for d in 0..n {
        rows.eq.push((vec![(l.x(steps, d), 1.0)], end[d]));
    }

    let input = &dynamics.input;
    for k in 0..steps {
        for (p, g) in input.normals().iter().zip(input.offsets()) {
            rows.ineq.push(((0..m).map(|d| (l.u(k, d), -p[d])).collect(), *g));
        }
    }

    let q = partition.region(from);
    if from == to {
        for k in 0..steps {
            for (p, g) in q.normals().iter().zip(q.offsets()) {
                cbf_row(rows, l, dynamics, k, p, *g, params);
            }
        }
        return Ok(());
    }

    let exit = partition.shared_facet(from, to).ok_or(FeasibilityError::MissingFacet { from, to })?;
    let entry = partition.shared_facet(to, from).ok_or(FeasibilityError::MissingFacet { from, to })?;
    rows.eq.push(((0..n).map(|d| (l.x(kc, d), exit.normal[d])).collect(), -exit.offset));

    for (j, (p, g)) in q.normals().iter().zip(q.offsets()).enumerate() {
        if j == exit.owner_index {
            for k in 0..kc {
                margin_row(rows, l, k, p, *g, params.epsilon);
            }
        } else {
            for k in 0..=kc {
                cbf_row(rows, l, dynamics, k, p, *g, params);
            }
        }
    }
    let next = partition.region(to);
    for (j, (p, g)) in next.normals().iter().zip(next.offsets()).enumerate() {
        if j == entry.owner_index {
            for k in kc + 1..=steps {
                margin_row(rows, l, k, p, *g, params.epsilon);
            }
        } else {
            margin_row(rows, l, kc, p, *g, params.epsilon);
            for k in kc..steps {
                cbf_row(rows, l, dynamics, k, p, *g, params);
            }
        }
    }
    Ok(())
}

fn assemble(blocks: &[(&AffineDynamics, usize, usize)], partition: &Partition, params: &FeasibilityParams) -> Result<QpProblem, FeasibilityError> {
    params.validate()?;
    let mut rows = Rows::default();
    let mut base = 0;
    let mut layouts = Vec::new();
    for &(dynamics, from, to) in blocks {
        check_dims(dynamics, partition)?;
        let l = Layout { base, n: partition.dim(), m: dynamics.input_dim(), steps: params.steps };
        agent_rows(&mut rows, &l, dynamics, partition, from, to, params)?;
        base += l.size();
        layouts.push(l);
    }
    let mut p = DMatrix::zeros(base, base);
    for l in &layouts {
        for k in 0..l.steps {
            for d in 0..l.m {
                p[(l.u(k, d), l.u(k, d))] = 2.0 * params.dt();
            }
        }
    }
    let (a, b, g, h) = rows.matrices(base);
    Ok(QpProblem::new(p, DVector::zeros(base)).with_equalities(a, b).with_inequalities(g, h))
}

/// Trajectory QP of one agent moving from region `from` to region `to`.
pub fn build_agent_qp(
    dynamics: &AffineDynamics,
    partition: &Partition,
    from: usize,
    to: usize,
    params: &FeasibilityParams,
) -> Result<QpProblem, FeasibilityError> {
    assemble(&[(dynamics, from, to)], partition, params)
}

fn dynamics_of(sys: &TransitionSystem, agent: usize) -> Result<&AffineDynamics, FeasibilityError> {
    let a = &sys.agents()[agent];
    a.dynamics.as_ref().ok_or_else(|| FeasibilityError::MissingDynamics(a.name.clone()))
}

/// Joint QP of a transition of `sys`: every real agent, then every copy agent, stacked.
/// The blocks are uncoupled, so its optimum is the sum of the per-agent optima.
pub fn build_transition_qp(
    sys: &TransitionSystem,
    from: usize,
    to: usize,
    partition: &Partition,
    params: &FeasibilityParams,
) -> Result<QpProblem, FeasibilityError> {
    let mut blocks = Vec::new();
    for ((agent, a, b), _) in local_keys(sys, from, to) {
        blocks.push((dynamics_of(sys, agent)?, a, b));
    }
    assemble(&blocks, partition, params)
}

fn extract(sol: &DVector<f64>, dynamics: &AffineDynamics, partition: &Partition, params: &FeasibilityParams) -> AgentSegment {
    let l = Layout { base: 0, n: partition.dim(), m: dynamics.input_dim(), steps: params.steps };
    let states = (0..=l.steps).map(|k| (0..l.n).map(|d| sol[l.x(k, d)]).collect()).collect();
    let inputs: Vec<Vec<f64>> = (0..l.steps).map(|k| (0..l.m).map(|d| sol[l.u(k, d)]).collect()).collect();
    let objective = params.dt() * inputs.iter().flatten().map(|u| u * u).sum::<f64>();
    AgentSegment { states, inputs, objective }
}

/// Solves one agent's QP. An iteration-limit result is retried once with a smaller
/// initial step size before being reported infeasible.
pub fn check_local(
    dynamics: &AffineDynamics,
    partition: &Partition,
    from: usize,
    to: usize,
    params: &FeasibilityParams,
) -> Result<LocalOutcome, FeasibilityError> {
    let problem = build_agent_qp(dynamics, partition, from, to, params)?;
    let settings = QpSettings::default();
    let mut sol = solve(&problem, &settings)?;
    let mut retried = false;
    if sol.status == QpStatus::MaxIterations {
        retried = true;
        let relaxed = QpSettings { rho: 0.1, max_iter: 2 * settings.max_iter, ..settings };
        sol = solve(&problem, &relaxed)?;
    }
    Ok(match sol.status {
        QpStatus::Optimal => LocalOutcome::Feasible(extract(&sol.z, dynamics, partition, params)),
        status => LocalOutcome::Infeasible { status, retried },
    })
}

/// Checks one transition of `sys`, filling the cache with any missing agent results.
pub fn check_transition(
    sys: &TransitionSystem,
    from: usize,
    to: usize,
    partition: &Partition,
    cache: &mut SegmentCache,
) -> Result<Option<TrajectorySegment>, FeasibilityError> {
    let params = cache.params;
    for (key, _) in local_keys(sys, from, to) {
        if cache.get(key.0, key.1, key.2).is_none() {
            let outcome = check_local(dynamics_of(sys, key.0)?, partition, key.1, key.2, &params)?;
            cache.insert(key, outcome);
        }
    }
    cache.segment(sys, from, to)
}

/// Drops every transition of `sys` for which some real or copy agent has no feasible
/// trajectory. Local problems are solved in parallel and collected in key order.
pub fn prune_infeasible(
    sys: &TransitionSystem,
    partition: &Partition,
    params: &FeasibilityParams,
) -> Result<(TransitionSystem, SegmentCache), FeasibilityError> {
    params.validate()?;
    let mut keys = std::collections::BTreeSet::new();
    for s in 0..sys.num_states() {
        for &(t, _) in sys.successors(s) {
            keys.extend(local_keys(sys, s, t).into_iter().map(|(k, _)| k));
        }
    }
    let keys: Vec<_> = keys.into_iter().collect();
    let outcomes: Vec<Result<LocalOutcome, FeasibilityError>> = keys
        .par_iter()
        .map(|&(agent, a, b)| check_local(dynamics_of(sys, agent)?, partition, a, b, params))
        .collect();
    let mut cache = SegmentCache::new(*params);
    for (key, outcome) in keys.into_iter().zip(outcomes) {
        cache.insert(key, outcome?);
    }
    let pruned = sys.filter_transitions(|s, t| {
        local_keys(sys, s, t).iter().all(|(k, _)| matches!(cache.local.get(k), Some(LocalOutcome::Feasible(_))))
    });
    Ok((pruned, cache))
}

/// Forward-Euler replay of `inputs` from `x0`.
pub fn simulate(dynamics: &AffineDynamics, x0: &[f64], inputs: &[Vec<f64>], dt: f64) -> Vec<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    let mut out = vec![x0.to_vec()];
    for u in inputs {
        let dx = &dynamics.a * &x + &dynamics.b * DVector::from_column_slice(u) + &dynamics.offset;
        x += dx * dt;
        out.push(x.iter().copied().collect());
    }
    out
}
