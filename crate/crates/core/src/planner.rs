//! Product of a (secure) transition system with a Büchi automaton, the per-accepting-state
//! prefix/suffix search, and reconstruction of the continuous trajectory.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use serde::Serialize;

use crate::abstraction::TransitionSystem;
use crate::feasibility::{FeasibilityError, SegmentCache};
use crate::ltl::Buchi;

/// Joint samples of consecutive segments must agree this closely.
pub const JOINT_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    #[error("formula atom `{0}` never appears in a state label")]
    UnknownAtom(String),
    #[error("beta must lie in [0, 1], got {0}")]
    InvalidBeta(f64),
    #[error("malformed product: {0}")]
    Malformed(String),
    #[error("no feasible segment cached for transition {from} -> {to}")]
    MissingSegment { from: usize, to: usize },
    #[error("segments disagree by {gap:e} at transition {index}")]
    Discontinuity { index: usize, gap: f64 },
    #[error(transparent)]
    Feasibility(#[from] FeasibilityError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ProductAutomaton {
    /// `(system state, automaton state)` pairs in discovery order.
    states: Vec<(usize, usize)>,
    initial: Vec<usize>,
    accepting: Vec<bool>,
    edges: Vec<Vec<(usize, f64)>>,
}

impl ProductAutomaton {
    /// Builds a product directly from its parts; edges to the same target keep the
    /// cheapest weight. Used for synthetic instances.
    pub fn from_parts(
        states: Vec<(usize, usize)>,
        initial: Vec<usize>,
        accepting: Vec<bool>,
        edges: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self, PlannerError> {
        let n = states.len();
        if accepting.len() != n || edges.len() != n {
            return Err(PlannerError::Malformed("length mismatch".into()));
        }
        if initial.iter().any(|&i| i >= n) {
            return Err(PlannerError::Malformed("initial state out of range".into()));
        }
        let mut clean = Vec::with_capacity(n);
        for out in edges {
            let mut best: Vec<(usize, f64)> = Vec::new();
            for (t, w) in out {
                if t >= n {
                    return Err(PlannerError::Malformed(format!("edge target {t} out of range")));
                }
                if !(w.is_finite() && w >= 0.0) {
                    return Err(PlannerError::Malformed(format!("edge weight {w}")));
                }
                match best.iter_mut().find(|(u, _)| *u == t) {
                    Some(e) => e.1 = e.1.min(w),
                    None => best.push((t, w)),
                }
            }
            best.sort_by_key(|e| e.0);
            clean.push(best);
        }
        let mut initial = initial;
        initial.sort_unstable();
        initial.dedup();
        Ok(Self { states, initial, accepting, edges: clean })
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn state(&self, i: usize) -> (usize, usize) {
        self.states[i]
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_accepting(&self, i: usize) -> bool {
        self.accepting[i]
    }

    pub fn successors(&self, i: usize) -> &[(usize, f64)] {
        &self.edges[i]
    }

    pub fn weight(&self, from: usize, to: usize) -> Option<f64> {
        self.edges[from].iter().find(|e| e.0 == to).map(|e| e.1)
    }
}

/// Reachable product of `sys` and `nba`. A product state `(q, s)` records that the
/// automaton is in `s` after reading the labels up to and including `q`, so initial
/// states are `(q0, s)` with `s ∈ δ(s0, L(q0))`.
pub fn build_pba(sys: &TransitionSystem, nba: &Buchi) -> Result<ProductAutomaton, PlannerError> {
    let alphabet = sys.alphabet();
    if let Some(a) = nba.ap().iter().find(|a| !alphabet.contains(*a)) {
        return Err(PlannerError::UnknownAtom(a.clone()));
    }
    let letters: Vec<u64> = (0..sys.num_states()).map(|q| nba.encode(&sys.label(q))).collect();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    let mut states = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    let mut intern = |key: (usize, usize), states: &mut Vec<(usize, usize)>, queue: &mut std::collections::VecDeque<usize>| {
        *index.entry(key).or_insert_with(|| {
            states.push(key);
            queue.push_back(states.len() - 1);
            states.len() - 1
        })
    };

    let mut initial = Vec::new();
    for &q in sys.initial() {
        let mut next: Vec<usize> = nba.initial().iter().flat_map(|&s| nba.step(s, letters[q])).collect();
        next.sort_unstable();
        next.dedup();
        for s in next {
            initial.push(intern((q, s), &mut states, &mut queue));
        }
    }
    let mut edges: Vec<Vec<(usize, f64)>> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (q, s) = states[i];
        let mut out = Vec::new();
        for &(t, w) in sys.successors(q) {
            let mut next = nba.step(s, letters[t]);
            next.sort_unstable();
            next.dedup();
            for s2 in next {
                out.push((intern((t, s2), &mut states, &mut queue), w));
            }
        }
        out.sort_by_key(|e| e.0);
        if edges.len() <= i {
            edges.resize(i + 1, Vec::new());
        }
        edges[i] = out;
    }
    edges.resize(states.len(), Vec::new());
    let accepting = states.iter().map(|&(_, s)| nba.is_accepting(s)).collect();
    initial.sort_unstable();
    initial.dedup();
    Ok(ProductAutomaton { states, initial, accepting, edges })
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Multi-source Dijkstra over `adj`; returns distances and parent pointers. Nodes
/// farther than `limit` are left unsettled.
fn dijkstra(adj: &[Vec<(usize, f64)>], sources: &[usize], limit: f64) -> (Vec<f64>, Vec<Option<usize>>) {
    let n = adj.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut parent = vec![None; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry(0.0, s));
    }
    let mut done = vec![false; n];
    while let Some(Entry(d, u)) = heap.pop() {
        if d > limit {
            break;
        }
        if done[u] {
            continue;
        }
        done[u] = true;
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                parent[v] = Some(u);
                heap.push(Entry(nd, v));
            }
        }
    }
    (dist, parent)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrefixSuffixPlan {
    /// Product states visited once, before the cycle. May be empty.
    pub prefix: Vec<usize>,
    /// Product states of the repeated cycle; starts at the accepting state and the last
    /// state has an edge back to the first.
    pub cycle: Vec<usize>,
    pub j_prefix: f64,
    pub j_suffix: f64,
    pub j: f64,
    pub beta: f64,
}

impl PrefixSuffixPlan {
    pub fn accepting_state(&self) -> usize {
        self.cycle[0]
    }

    /// System states of the prefix and of the cycle.
    pub fn system_lasso(&self, pba: &ProductAutomaton) -> (Vec<usize>, Vec<usize>) {
        let proj = |v: &[usize]| v.iter().map(|&i| pba.state(i).0).collect();
        (proj(&self.prefix), proj(&self.cycle))
    }

    /// System transitions executed with the cycle unrolled `repeats` times, ending back
    /// at the cycle start.
    pub fn transitions(&self, pba: &ProductAutomaton, repeats: usize) -> Vec<(usize, usize)> {
        let (prefix, cycle) = self.system_lasso(pba);
        let mut seq = prefix;
        for _ in 0..repeats.max(1) {
            seq.extend(&cycle);
        }
        seq.push(cycle[0]);
        seq.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

struct Candidate {
    j: f64,
    j_prefix: f64,
    j_suffix: f64,
    acc: usize,
    cycle: Vec<usize>,
}

/// Shortest cycle through `acc` no longer than `limit`: min over successors `v` of
/// `w(acc, v) + dist(v, acc)`.
fn shortest_cycle(pba: &ProductAutomaton, reverse: &[Vec<(usize, f64)>], acc: usize, limit: f64) -> Option<(f64, Vec<usize>)> {
    let (to_acc, next) = dijkstra(reverse, &[acc], limit);
    let mut best: Option<(f64, usize)> = None;
    for &(v, w) in pba.successors(acc) {
        let c = w + to_acc[v];
        if c.is_finite() && best.is_none_or(|(b, _)| c < b) {
            best = Some((c, v));
        }
    }
    let (cost, first) = best?;
    let mut cycle = vec![acc];
    let mut u = first;
    while u != acc {
        cycle.push(u);
        u = next[u].expect("reverse tree reaches the accepting state");
    }
    Some((cost, cycle))
}

fn better(a: &Candidate, b: &Candidate, pba: &ProductAutomaton) -> bool {
    a.j.total_cmp(&b.j)
        .then(a.j_prefix.total_cmp(&b.j_prefix))
        .then(pba.state(a.acc).cmp(&pba.state(b.acc)))
        .is_lt()
}

/// Minimum of `β J_prefix + (1−β) J_suffix` over accepting states, each with its
/// shortest prefix from any initial state and its shortest cycle. Ties go to the
/// smaller prefix cost, then to the smaller `(system, automaton)` state pair.
///
/// Accepting states are visited by increasing prefix cost and each cycle search stops
/// once it cannot beat the best plan found so far.
pub fn search_prefix_suffix(pba: &ProductAutomaton, beta: f64) -> Result<Option<PrefixSuffixPlan>, PlannerError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(PlannerError::InvalidBeta(beta));
    }
    let (dist, parent) = dijkstra(&pba.edges, &pba.initial, f64::INFINITY);
    let mut reverse = vec![Vec::new(); pba.num_states()];
    for (u, out) in pba.edges.iter().enumerate() {
        for &(v, w) in out {
            reverse[v].push((u, w));
        }
    }
    let mut accepting: Vec<usize> = (0..pba.num_states()).filter(|&i| pba.accepting[i] && dist[i].is_finite()).collect();
    accepting.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(pba.state(a).cmp(&pba.state(b))));

    let mut best: Option<Candidate> = None;
    for acc in accepting {
        let j_prefix = dist[acc];
        let limit = match &best {
            None => f64::INFINITY,
            Some(_) if beta == 1.0 => f64::INFINITY,
            Some(b) => {
                if beta * j_prefix > b.j {
                    break;
                }
                // slack so float rounding never prunes an exact tie
                (b.j - beta * j_prefix) / (1.0 - beta) * (1.0 + 1e-12) + 1e-12
            }
        };
        if beta == 1.0 && best.as_ref().is_some_and(|b| j_prefix > b.j) {
            break;
        }
        let Some((j_suffix, cycle)) = shortest_cycle(pba, &reverse, acc, limit) else { continue };
        let c = Candidate { j: beta * j_prefix + (1.0 - beta) * j_suffix, j_prefix, j_suffix, acc, cycle };
        if best.as_ref().is_none_or(|b| better(&c, b, pba)) {
            best = Some(c);
        }
    }
    let Some(best) = best else { return Ok(None) };
    let mut prefix = Vec::new();
    let mut u = best.acc;
    while let Some(p) = parent[u] {
        prefix.push(p);
        u = p;
    }
    prefix.reverse();
    Ok(Some(PrefixSuffixPlan {
        prefix,
        cycle: best.cycle,
        j_prefix: best.j_prefix,
        j_suffix: best.j_suffix,
        j: best.j,
        beta,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Real,
    Copy,
}

/// One agent's concatenated samples. `regions[k]` is the region the sample belongs to:
/// the source region before the crossing index, the target region from it on.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentTrack {
    pub agent: usize,
    pub role: Role,
    pub states: Vec<Vec<f64>>,
    pub inputs: Vec<Vec<f64>>,
    pub regions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryBundle {
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    pub tracks: Vec<AgentTrack>,
    /// Number of transitions before the first cycle pass.
    pub prefix_transitions: usize,
    pub cycle_transitions: usize,
    pub repeats: usize,
}

/// Concatenates the cached segments along the plan, unrolling the cycle `repeats` times.
pub fn assemble_trajectory(
    plan: &PrefixSuffixPlan,
    pba: &ProductAutomaton,
    sys: &TransitionSystem,
    cache: &SegmentCache,
    repeats: usize,
) -> Result<TrajectoryBundle, PlannerError> {
    let params = cache.params;
    let (n_steps, kc, dt) = (params.steps, params.crossing, params.dt());
    let transitions = plan.transitions(pba, repeats);
    let mut tracks: Vec<AgentTrack> = Vec::new();
    for (index, &(from, to)) in transitions.iter().enumerate() {
        let seg = cache.segment(sys, from, to)?.ok_or(PlannerError::MissingSegment { from, to })?;
        let (fs, ts) = (sys.state(from), sys.state(to));
        let mut parts: Vec<(Role, usize, &crate::feasibility::AgentSegment, usize, usize)> = Vec::new();
        for (i, s) in seg.real.iter().enumerate() {
            parts.push((Role::Real, i, s, fs.real[i], ts.real[i]));
        }
        if let (Some(copy), Some(fc), Some(tc)) = (&seg.copy, &fs.copy, &ts.copy) {
            for (i, s) in copy.iter().enumerate() {
                parts.push((Role::Copy, i, s, fc[i], tc[i]));
            }
        }
        if index == 0 {
            tracks = parts
                .iter()
                .map(|&(role, agent, s, a, _)| AgentTrack {
                    agent,
                    role,
                    states: vec![s.states[0].clone()],
                    inputs: Vec::new(),
                    regions: vec![a],
                })
                .collect();
        }
        for (track, &(_, _, s, a, b)) in tracks.iter_mut().zip(&parts) {
            let last = track.states.last().unwrap();
            let gap = last.iter().zip(&s.states[0]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            if gap > JOINT_TOL {
                return Err(PlannerError::Discontinuity { index, gap });
            }
            track.states.extend(s.states[1..].iter().cloned());
            track.inputs.extend(s.inputs.iter().cloned());
            track.regions.extend((1..=n_steps).map(|k| if k < kc && a != b { a } else { b }));
        }
    }
    let samples = transitions.len() * n_steps + 1;
    Ok(TrajectoryBundle {
        dt,
        steps: n_steps,
        times: (0..samples).map(|k| k as f64 * dt).collect(),
        tracks,
        prefix_transitions: plan.prefix.len(),
        cycle_transitions: plan.cycle.len(),
        repeats: repeats.max(1),
    })
}
