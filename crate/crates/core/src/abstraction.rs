//! Weighted transition systems over a partition: per-agent WTS, their synchronous
//! product, and the security-restricted systems derived from it.

use std::collections::{BTreeSet, HashMap};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::geometry::{HPolytope, Partition};

/// Self-loop weight used when a scenario does not set one.
pub const DEFAULT_SELF_LOOP_WEIGHT: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AbstractionError {
    #[error("invalid agent {agent}: {message}")]
    InvalidAgent { agent: String, message: String },
    #[error("expected a {expected} system, found {found:?}")]
    WrongKind { expected: &'static str, found: SystemKind },
    #[error("transition weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("no initial states left after {0}")]
    NoInitialStates(&'static str),
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("incompatible systems: {0}")]
    Incompatible(String),
}

/// `ẋ = A x + B u + b` with `u` in the input polytope.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineDynamics {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub input: HPolytope,
}

impl AffineDynamics {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }
}

/// Per-agent data over a fixed partition. Region ids index the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub name: String,
    pub initial: BTreeSet<usize>,
    pub secret: BTreeSet<usize>,
    /// Observation symbol per region.
    pub observations: Vec<String>,
    /// Atom set per region.
    pub labels: Vec<BTreeSet<String>>,
    pub dynamics: Option<AffineDynamics>,
}

impl AgentModel {
    fn invalid(&self, message: impl Into<String>) -> AbstractionError {
        AbstractionError::InvalidAgent { agent: self.name.clone(), message: message.into() }
    }

    pub fn validate(&self, regions: usize) -> Result<(), AbstractionError> {
        if self.observations.len() != regions || self.labels.len() != regions {
            return Err(self.invalid(format!(
                "{} observations and {} labels for {regions} regions",
                self.observations.len(),
                self.labels.len()
            )));
        }
        if let Some(&q) = self.initial.iter().chain(&self.secret).find(|&&q| q >= regions) {
            return Err(self.invalid(format!("region id {q} out of range")));
        }
        if self.initial.is_empty() {
            return Err(self.invalid("no initial regions"));
        }
        if let Some(dyn_) = &self.dynamics {
            let n = dyn_.state_dim();
            if dyn_.a.ncols() != n || dyn_.b.nrows() != n || dyn_.offset.len() != n || dyn_.input.dim() != dyn_.input_dim() {
                return Err(self.invalid("inconsistent dynamics dimensions"));
            }
            let report = dyn_.input.validate().map_err(|e| self.invalid(e.to_string()))?;
            if !report.bounded || !report.full_dimensional {
                return Err(self.invalid("input set must be bounded and full-dimensional"));
            }
        }
        Ok(())
    }

    /// Type-A security needs a non-secret region and a non-secret initial region.
    pub fn validate_for_type_a(&self, regions: usize) -> Result<(), AbstractionError> {
        if (0..regions).all(|q| self.secret.contains(&q)) {
            return Err(self.invalid("every region is secret"));
        }
        if self.initial.iter().all(|q| self.secret.contains(q)) {
            return Err(self.invalid("every initial region is secret"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum WeightRule {
    /// Euclidean distance between region representative points; fixed self-loop cost.
    CentroidDistance { self_loop: f64 },
    Constant { moves: f64, self_loop: f64 },
}

impl Default for WeightRule {
    fn default() -> Self {
        WeightRule::CentroidDistance { self_loop: DEFAULT_SELF_LOOP_WEIGHT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Wts,
    Global,
    TypeB,
    Twin,
    SecureTwin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SecurityMode {
    None,
    A,
    B,
    #[default]
    #[serde(rename = "AB", alias = "ab")]
    AB,
}

impl SecurityMode {
    pub fn type_a(self) -> bool {
        matches!(self, SecurityMode::A | SecurityMode::AB)
    }

    pub fn type_b(self) -> bool {
        matches!(self, SecurityMode::B | SecurityMode::AB)
    }
}

impl std::str::FromStr for SecurityMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(SecurityMode::None),
            "a" => Ok(SecurityMode::A),
            "b" => Ok(SecurityMode::B),
            "ab" => Ok(SecurityMode::AB),
            other => Err(format!("unknown security mode `{other}` (expected none, A, B or AB)")),
        }
    }
}

/// A state: a tuple of region ids (one per agent), plus the copy tuple in twin systems.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SysState {
    pub real: Vec<usize>,
    pub copy: Option<Vec<usize>>,
}

impl SysState {
    pub fn global(real: Vec<usize>) -> Self {
        Self { real, copy: None }
    }
}

#[derive(Debug, Clone)]
pub struct TransitionSystem {
    kind: SystemKind,
    agents: Vec<AgentModel>,
    region_names: Vec<String>,
    states: Vec<SysState>,
    index: HashMap<SysState, usize>,
    initial: Vec<usize>,
    edges: Vec<Vec<(usize, f64)>>,
}

impl TransitionSystem {
    fn assemble(
        kind: SystemKind,
        agents: Vec<AgentModel>,
        region_names: Vec<String>,
        states: Vec<SysState>,
        initial: Vec<usize>,
        mut edges: Vec<Vec<(usize, f64)>>,
    ) -> Self {
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        for e in &mut edges {
            e.sort_by_key(|&(t, _)| t);
        }
        Self { kind, agents, region_names, states, index, initial, edges }
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn agents(&self) -> &[AgentModel] {
        &self.agents
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn region_names(&self) -> &[String] {
        &self.region_names
    }

    pub fn num_regions(&self) -> usize {
        self.region_names.len()
    }

    pub fn states(&self) -> &[SysState] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &SysState {
        &self.states[i]
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_initial(&self, i: usize) -> bool {
        self.initial.binary_search(&i).is_ok()
    }

    /// Successors with weights, sorted by target.
    pub fn successors(&self, i: usize) -> &[(usize, f64)] {
        &self.edges[i]
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        let out = &self.edges[from];
        out.binary_search_by_key(&to, |&(t, _)| t).ok().map(|k| out[k].1)
    }

    pub fn index_of(&self, state: &SysState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Flattened label of a region tuple: `a_i` for atom `a` of agent `i` (1-based),
    /// plus the bare atom `a` when any agent carries it.
    pub fn tuple_label(&self, tuple: &[usize]) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (i, (agent, &q)) in self.agents.iter().zip(tuple).enumerate() {
            for atom in &agent.labels[q] {
                out.insert(format!("{atom}_{}", i + 1));
                out.insert(atom.clone());
            }
        }
        out
    }

    /// Label of state `i`; twin states carry the label of their real component.
    pub fn label(&self, i: usize) -> BTreeSet<String> {
        self.tuple_label(&self.states[i].real)
    }

    pub fn observation(&self, tuple: &[usize]) -> Vec<&str> {
        self.agents.iter().zip(tuple).map(|(a, &q)| a.observations[q].as_str()).collect()
    }

    pub fn is_secret(&self, agent: usize, region: usize) -> bool {
        self.agents[agent].secret.contains(&region)
    }

    /// All atoms that can occur in a label of this system.
    pub fn alphabet(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            for atom in agent.labels.iter().flatten() {
                out.insert(format!("{atom}_{}", i + 1));
                out.insert(atom.clone());
            }
        }
        out
    }

    pub fn state_name(&self, i: usize) -> String {
        let s = &self.states[i];
        let tuple = |t: &[usize]| {
            let names: Vec<&str> = t.iter().map(|&q| self.region_names[q].as_str()).collect();
            format!("({})", names.join(","))
        };
        match &s.copy {
            None => tuple(&s.real),
            Some(c) => format!("[{} | {}]", tuple(&s.real), tuple(c)),
        }
    }

    /// Whether `path` starts in an initial state and follows transitions.
    pub fn is_path(&self, path: &[usize]) -> bool {
        match path.first() {
            None => false,
            Some(&s) => {
                s < self.num_states()
                    && self.is_initial(s)
                    && path.windows(2).all(|w| w[1] < self.num_states() && self.weight(w[0], w[1]).is_some())
            }
        }
    }

    /// Keeps the states accepted by `keep`; transitions among kept states survive.
    fn restrict(&self, kind: SystemKind, keep: impl Fn(&SysState) -> bool) -> TransitionSystem {
        let mut map = vec![usize::MAX; self.num_states()];
        let mut states = Vec::new();
        for (i, s) in self.states.iter().enumerate() {
            if keep(s) {
                map[i] = states.len();
                states.push(s.clone());
            }
        }
        let edges = (0..self.num_states())
            .filter(|&i| map[i] != usize::MAX)
            .map(|i| {
                self.edges[i].iter().filter(|&&(t, _)| map[t] != usize::MAX).map(|&(t, w)| (map[t], w)).collect()
            })
            .collect();
        let initial = self.initial.iter().filter(|&&i| map[i] != usize::MAX).map(|&i| map[i]).collect();
        Self::assemble(kind, self.agents.clone(), self.region_names.clone(), states, initial, edges)
    }

    /// Keeps only the transitions accepted by `keep`.
    pub fn filter_transitions(&self, keep: impl Fn(usize, usize) -> bool) -> TransitionSystem {
        let mut out = self.clone();
        for (i, e) in out.edges.iter_mut().enumerate() {
            e.retain(|&(t, _)| keep(i, t));
        }
        out
    }

    /// Adjacency dump for debugging.
    pub fn to_json(&self) -> serde_json::Value {
        let states: Vec<serde_json::Value> = (0..self.num_states())
            .map(|i| {
                serde_json::json!({
                    "id": i,
                    "name": self.state_name(i),
                    "initial": self.is_initial(i),
                    "label": self.label(i),
                    "successors": self.edges[i].iter().map(|&(t, w)| serde_json::json!([t, w])).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "kind": self.kind, "states": states })
    }
}

fn check_weight(w: f64) -> Result<f64, AbstractionError> {
    if w > 0.0 && w.is_finite() {
        Ok(w)
    } else {
        Err(AbstractionError::NonPositiveWeight(w))
    }
}

/// WTS of one agent: regions as states, adjacency moves plus self-loops.
pub fn build_wts(partition: &Partition, agent: &AgentModel, rule: &WeightRule) -> Result<TransitionSystem, AbstractionError> {
    let n = partition.len();
    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    for q in 0..n {
        let self_loop = match rule {
            WeightRule::CentroidDistance { self_loop } | WeightRule::Constant { self_loop, .. } => *self_loop,
        };
        edges.push((q, q, self_loop));
    }
    for (a, b) in partition.adjacent_pairs() {
        let w = match rule {
            WeightRule::CentroidDistance { .. } => {
                let (ca, cb) = (partition.center(a), partition.center(b));
                ca.iter().zip(cb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            }
            WeightRule::Constant { moves, .. } => *moves,
        };
        edges.push((a, b, w));
    }
    let names = (0..n).map(|q| partition.name(q).to_string()).collect();
    wts_from_edges(agent, names, &edges)
}

/// WTS from an explicit edge list `(from, to, weight)`.
pub fn wts_from_edges(
    agent: &AgentModel,
    region_names: Vec<String>,
    edges: &[(usize, usize, f64)],
) -> Result<TransitionSystem, AbstractionError> {
    let n = region_names.len();
    agent.validate(n)?;
    let mut out = vec![Vec::new(); n];
    for &(a, b, w) in edges {
        if a >= n || b >= n {
            return Err(agent.invalid(format!("edge ({a},{b}) out of range")));
        }
        out[a].push((b, check_weight(w)?));
    }
    for e in &mut out {
        e.sort_by_key(|&(t, _)| t);
        e.dedup_by_key(|&mut (t, _)| t);
    }
    let states = (0..n).map(|q| SysState::global(vec![q])).collect();
    let initial = agent.initial.iter().copied().collect();
    Ok(TransitionSystem::assemble(SystemKind::Wts, vec![agent.clone()], region_names, states, initial, out))
}

/// Synchronous product of single-agent systems; weights add up.
pub fn product_gwts(wts: &[TransitionSystem]) -> Result<TransitionSystem, AbstractionError> {
    let Some(first) = wts.first() else {
        return Err(AbstractionError::Incompatible("no agents".into()));
    };
    for w in wts {
        if w.kind != SystemKind::Wts {
            return Err(AbstractionError::WrongKind { expected: "single-agent", found: w.kind });
        }
        if w.region_names != first.region_names {
            return Err(AbstractionError::Incompatible("agents over different partitions".into()));
        }
    }
    let n = first.num_regions();
    let m = wts.len();
    let total = n.checked_pow(m as u32).ok_or_else(|| AbstractionError::Incompatible("state space too large".into()))?;
    let encode = |t: &[usize]| t.iter().fold(0, |acc, &q| acc * n + q);
    let decode = |mut k: usize| {
        let mut t = vec![0; m];
        for i in (0..m).rev() {
            t[i] = k % n;
            k /= n;
        }
        t
    };
    let states: Vec<SysState> = (0..total).map(|k| SysState::global(decode(k))).collect();
    let edges = states
        .iter()
        .map(|s| {
            let mut out = vec![(Vec::with_capacity(m), 0.0)];
            for (i, &q) in s.real.iter().enumerate() {
                let mut next = Vec::new();
                for (prefix, w) in &out {
                    for &(t, wi) in wts[i].successors(q) {
                        let mut p = prefix.clone();
                        p.push(t);
                        next.push((p, w + wi));
                    }
                }
                out = next;
            }
            out.into_iter().map(|(t, w)| (encode(&t), w)).collect()
        })
        .collect();
    let initial = states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.real.iter().zip(wts).all(|(&q, w)| w.is_initial(q)))
        .map(|(i, _)| i)
        .collect();
    let agents = wts.iter().map(|w| w.agents[0].clone()).collect();
    let sys = TransitionSystem::assemble(SystemKind::Global, agents, first.region_names.clone(), states, initial, edges);
    debug_assert!(sys.num_states() <= n.pow(m as u32));
    Ok(sys)
}

/// Whether every agent in a secret region shares its observation with another agent.
pub fn type_b_holds(sys: &TransitionSystem, tuple: &[usize]) -> bool {
    (0..tuple.len()).all(|i| {
        !sys.is_secret(i, tuple[i])
            || (0..tuple.len())
                .any(|k| k != i && sys.agents[k].observations[tuple[k]] == sys.agents[i].observations[tuple[i]])
    })
}

/// Global states where each agent in a secret region is matched by another agent's
/// observation.
pub fn restrict_type_b(gwts: &TransitionSystem) -> Result<TransitionSystem, AbstractionError> {
    if !matches!(gwts.kind, SystemKind::Global | SystemKind::TypeB) {
        return Err(AbstractionError::WrongKind { expected: "global", found: gwts.kind });
    }
    let sys = gwts.restrict(SystemKind::TypeB, |s| type_b_holds(gwts, &s.real));
    if sys.initial.is_empty() {
        return Err(AbstractionError::NoInitialStates("type-B restriction"));
    }
    Ok(sys)
}

/// Pairs of observation-equivalent states, real side from `real`, copy side from
/// `copy` (usually the same system). Costs are the real side's.
pub fn build_twin(real: &TransitionSystem, copy: &TransitionSystem) -> Result<TransitionSystem, AbstractionError> {
    for sys in [real, copy] {
        if !matches!(sys.kind, SystemKind::Global | SystemKind::TypeB) {
            return Err(AbstractionError::WrongKind { expected: "global", found: sys.kind });
        }
    }
    if real.agents.len() != copy.agents.len() || real.region_names != copy.region_names {
        return Err(AbstractionError::Incompatible("real and copy systems differ in agents or regions".into()));
    }
    let mut by_obs: HashMap<Vec<&str>, Vec<usize>> = HashMap::new();
    for (i, s) in copy.states.iter().enumerate() {
        by_obs.entry(copy.observation(&s.real)).or_default().push(i);
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (i, s) in real.states.iter().enumerate() {
        if let Some(cs) = by_obs.get(&real.observation(&s.real)) {
            pairs.extend(cs.iter().map(|&c| (i, c)));
        }
    }
    let id: HashMap<(usize, usize), usize> = pairs.iter().enumerate().map(|(k, &p)| (p, k)).collect();
    let edges = pairs
        .iter()
        .map(|&(a, b)| {
            let mut out = Vec::new();
            for &(a2, w) in real.successors(a) {
                let obs = real.observation(&real.states[a2].real);
                for &(b2, _) in copy.successors(b) {
                    if copy.observation(&copy.states[b2].real) == obs {
                        out.push((id[&(a2, b2)], w));
                    }
                }
            }
            out
        })
        .collect();
    let initial = pairs
        .iter()
        .enumerate()
        .filter(|(_, &(a, b))| real.is_initial(a) && copy.is_initial(b))
        .map(|(k, _)| k)
        .collect();
    let states = pairs
        .iter()
        .map(|&(a, b)| SysState { real: real.states[a].real.clone(), copy: Some(copy.states[b].real.clone()) })
        .collect();
    Ok(TransitionSystem::assemble(SystemKind::Twin, real.agents.clone(), real.region_names.clone(), states, initial, edges))
}

/// Whether no agent is in a secret region on both sides of a twin state.
pub fn twin_state_secure(sys: &TransitionSystem, state: &SysState) -> bool {
    match &state.copy {
        None => true,
        Some(copy) => (0..state.real.len()).all(|i| !(sys.is_secret(i, state.real[i]) && sys.is_secret(i, copy[i]))),
    }
}

/// Drops twin states in which some agent is in a secret region on both sides.
pub fn restrict_secure_twin(twin: &TransitionSystem) -> Result<TransitionSystem, AbstractionError> {
    if !matches!(twin.kind, SystemKind::Twin | SystemKind::SecureTwin) {
        return Err(AbstractionError::WrongKind { expected: "twin", found: twin.kind });
    }
    let sys = twin.restrict(SystemKind::SecureTwin, |s| twin_state_secure(twin, s));
    if sys.initial.is_empty() {
        return Err(AbstractionError::NoInitialStates("secure-twin restriction"));
    }
    Ok(sys)
}

/// Real-side region tuples along a path of `sys`.
pub fn project_real(sys: &TransitionSystem, path: &[usize]) -> Result<Vec<Vec<usize>>, AbstractionError> {
    if !sys.is_path(path) {
        return Err(AbstractionError::InvalidPath(format!("{path:?} is not a path of the system")));
    }
    Ok(path.iter().map(|&s| sys.states[s].real.clone()).collect())
}

/// The system the planner searches for a security mode. In mode AB the copy side of
/// the twin ranges over the full product, so that copy behaviors need not themselves
/// be Type-B secure.
pub fn secure_system(gwts: &TransitionSystem, mode: SecurityMode) -> Result<TransitionSystem, AbstractionError> {
    if gwts.kind != SystemKind::Global {
        return Err(AbstractionError::WrongKind { expected: "global", found: gwts.kind });
    }
    match mode {
        SecurityMode::None => Ok(gwts.clone()),
        SecurityMode::B => restrict_type_b(gwts),
        SecurityMode::A => restrict_secure_twin(&build_twin(gwts, gwts)?),
        SecurityMode::AB => {
            let typeb = restrict_type_b(gwts)?;
            restrict_secure_twin(&build_twin(&typeb, gwts)?)
        }
    }
}
