//! Brute-force security checks on explicit paths of the global system, and the
//! projection of sampled trajectories back to region sequences.

use serde::Serialize;

use crate::abstraction::{SysState, SystemKind, TransitionSystem};
use crate::geometry::Partition;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("invalid path: {0}")]
    InvalidPath(String),
    #[error("oracle needs the global system, got {0:?}")]
    WrongKind(SystemKind),
    #[error("agent {agent} sample {sample} at {point:?} lies outside every region")]
    OutsidePartition { agent: usize, sample: usize, point: Vec<f64> },
    #[error("trajectories disagree: {0}")]
    Mismatch(String),
}

/// A path as region tuples, one entry per agent.
pub type GlobalPath = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeBVerdict {
    pub secure: bool,
    /// `(agent, step)` pairs, both 1-based.
    pub violations: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TypeAVerdict {
    pub secure: bool,
    /// Copy path aligned with the checked path (its prefix part for lassos).
    pub witness: GlobalPath,
    /// Copy cycle for lassos; its length is a multiple of the checked cycle's length.
    pub witness_cycle: GlobalPath,
    /// First 1-based step at which no copy candidate remained (finite paths only).
    pub failed_step: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecurityVerdict {
    pub type_a: TypeAVerdict,
    pub type_b: TypeBVerdict,
}

fn require_global(gwts: &TransitionSystem) -> Result<(), OracleError> {
    if gwts.kind() == SystemKind::Global {
        Ok(())
    } else {
        Err(OracleError::WrongKind(gwts.kind()))
    }
}

fn indices(gwts: &TransitionSystem, path: &[Vec<usize>]) -> Result<Vec<usize>, OracleError> {
    path.iter()
        .map(|t| {
            gwts.index_of(&SysState::global(t.clone()))
                .ok_or_else(|| OracleError::InvalidPath(format!("{t:?} is not a global state")))
        })
        .collect()
}

/// Checks that `path` is a path of `gwts`, returning state indices.
pub fn validate_path(gwts: &TransitionSystem, path: &[Vec<usize>]) -> Result<Vec<usize>, OracleError> {
    require_global(gwts)?;
    let idx = indices(gwts, path)?;
    if !gwts.is_path(&idx) {
        return Err(OracleError::InvalidPath("not an initial path of the global system".into()));
    }
    Ok(idx)
}

/// Checks a lasso `prefix · cycle^ω`, including the edge closing the cycle.
pub fn validate_lasso(gwts: &TransitionSystem, prefix: &[Vec<usize>], cycle: &[Vec<usize>]) -> Result<Vec<usize>, OracleError> {
    if cycle.is_empty() {
        return Err(OracleError::InvalidPath("empty cycle".into()));
    }
    let whole: Vec<Vec<usize>> = prefix.iter().chain(cycle).cloned().collect();
    let idx = validate_path(gwts, &whole)?;
    let (last, back) = (idx[idx.len() - 1], idx[prefix.len()]);
    if gwts.weight(last, back).is_none() {
        return Err(OracleError::InvalidPath("cycle does not close".into()));
    }
    Ok(idx)
}

/// Pointwise check: an agent in a secret region must share its observation with some
/// other agent at that step.
pub fn check_type_b(gwts: &TransitionSystem, path: &[Vec<usize>]) -> Result<TypeBVerdict, OracleError> {
    validate_path(gwts, path)?;
    let agents = gwts.agents();
    let mut violations = Vec::new();
    for (j, tuple) in path.iter().enumerate() {
        for i in 0..tuple.len() {
            if !agents[i].secret.contains(&tuple[i]) {
                continue;
            }
            let mine = &agents[i].observations[tuple[i]];
            if !(0..tuple.len()).any(|k| k != i && &agents[k].observations[tuple[k]] == mine) {
                violations.push((i + 1, j + 1));
            }
        }
    }
    Ok(TypeBVerdict { secure: violations.is_empty(), violations })
}

/// Copy state `c` may stand in for real tuple `t`: same observations, and no agent
/// secret on both sides.
fn compatible(gwts: &TransitionSystem, t: &[usize], c: &[usize]) -> bool {
    gwts.observation(t) == gwts.observation(c)
        && (0..t.len()).all(|i| !(gwts.is_secret(i, t[i]) && gwts.is_secret(i, c[i])))
}

fn candidates(gwts: &TransitionSystem, from: &[usize], t: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = from
        .iter()
        .flat_map(|&c| gwts.successors(c).iter().map(|&(d, _)| d))
        .filter(|&d| compatible(gwts, t, &gwts.state(d).real))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Searches layer by layer for a copy path with equal observations that avoids the
/// real path's secret visits agent by agent.
pub fn check_type_a(gwts: &TransitionSystem, path: &[Vec<usize>]) -> Result<TypeAVerdict, OracleError> {
    validate_path(gwts, path)?;
    let mut layers: Vec<Vec<usize>> = Vec::with_capacity(path.len());
    let first: Vec<usize> =
        gwts.initial().iter().copied().filter(|&c| compatible(gwts, &path[0], &gwts.state(c).real)).collect();
    layers.push(first);
    for t in &path[1..] {
        let prev = layers.last().unwrap();
        layers.push(candidates(gwts, prev, t));
    }
    if let Some(j) = layers.iter().position(Vec::is_empty) {
        return Ok(TypeAVerdict { secure: false, witness: vec![], witness_cycle: vec![], failed_step: Some(j + 1) });
    }
    // Walk back from the smallest survivor, always picking the smallest predecessor.
    let mut rev = vec![layers[layers.len() - 1][0]];
    for j in (0..layers.len() - 1).rev() {
        let next = *rev.last().unwrap();
        let pred = layers[j].iter().copied().find(|&c| gwts.weight(c, next).is_some()).expect("layer predecessor");
        rev.push(pred);
    }
    rev.reverse();
    let witness = rev.iter().map(|&c| gwts.state(c).real.clone()).collect();
    Ok(TypeAVerdict { secure: true, witness, witness_cycle: vec![], failed_step: None })
}

/// Type-A check of `prefix · cycle^ω`, exact: a witness exists iff the product of lasso
/// positions and compatible copy states has a reachable cycle.
pub fn check_type_a_lasso(
    gwts: &TransitionSystem,
    prefix: &[Vec<usize>],
    cycle: &[Vec<usize>],
) -> Result<TypeAVerdict, OracleError> {
    validate_lasso(gwts, prefix, cycle)?;
    let word: Vec<&Vec<usize>> = prefix.iter().chain(cycle).collect();
    let len = word.len();
    let loop_start = prefix.len();
    let succ = |i: usize| if i + 1 < len { i + 1 } else { loop_start };
    let n = gwts.num_states();
    let node = |pos: usize, c: usize| pos * n + c;

    let next = |v: usize| -> Vec<usize> {
        let (pos, c) = (v / n, v % n);
        let p2 = succ(pos);
        candidates(gwts, &[c], word[p2]).into_iter().map(|d| node(p2, d)).collect()
    };
    let mut parent = vec![usize::MAX; len * n];
    let mut reached = vec![false; len * n];
    let mut order = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for &c in gwts.initial() {
        if compatible(gwts, word[0], &gwts.state(c).real) {
            reached[node(0, c)] = true;
            queue.push_back(node(0, c));
        }
    }
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for w in next(v) {
            if !reached[w] {
                reached[w] = true;
                parent[w] = v;
                queue.push_back(w);
            }
        }
    }
    // Any reachable node on a cycle gives a witness; cycles live in the loop part.
    for &v in order.iter().filter(|&&v| v / n >= loop_start) {
        let mut back = vec![usize::MAX; len * n];
        let mut q = std::collections::VecDeque::from([v]);
        let mut found = false;
        let mut seen = vec![false; len * n];
        'bfs: while let Some(x) = q.pop_front() {
            for y in next(x) {
                if y == v {
                    back[v] = x;
                    found = true;
                    break 'bfs;
                }
                if !seen[y] {
                    seen[y] = true;
                    back[y] = x;
                    q.push_back(y);
                }
            }
        }
        if !found {
            continue;
        }
        let mut stem = vec![v];
        while parent[*stem.last().unwrap()] != usize::MAX {
            stem.push(parent[*stem.last().unwrap()]);
        }
        stem.reverse();
        stem.pop();
        let mut loop_nodes = vec![back[v]];
        while *loop_nodes.last().unwrap() != v {
            loop_nodes.push(back[*loop_nodes.last().unwrap()]);
        }
        loop_nodes.reverse();
        let state = |x: usize| gwts.state(x % n).real.clone();
        return Ok(TypeAVerdict {
            secure: true,
            witness: stem.into_iter().map(state).collect(),
            witness_cycle: loop_nodes.into_iter().map(state).collect(),
            failed_step: None,
        });
    }
    Ok(TypeAVerdict { secure: false, witness: vec![], witness_cycle: vec![], failed_step: None })
}

pub fn check_path(gwts: &TransitionSystem, path: &[Vec<usize>]) -> Result<SecurityVerdict, OracleError> {
    Ok(SecurityVerdict { type_a: check_type_a(gwts, path)?, type_b: check_type_b(gwts, path)? })
}

pub fn check_lasso(gwts: &TransitionSystem, prefix: &[Vec<usize>], cycle: &[Vec<usize>]) -> Result<SecurityVerdict, OracleError> {
    let whole: Vec<Vec<usize>> = prefix.iter().chain(cycle).cloned().collect();
    Ok(SecurityVerdict { type_a: check_type_a_lasso(gwts, prefix, cycle)?, type_b: check_type_b(gwts, &whole)? })
}

/// Region sequence recovered from sampled trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectedPath {
    pub steps: GlobalPath,
    /// Sample index at which each step begins.
    pub switch_samples: Vec<usize>,
    /// The last step persists to the end of the samples.
    pub repeats: bool,
}

/// Classifies each sample of each agent into a region and merges the switching
/// instants of all agents. A sample on a shared facet goes to the region the agent
/// enters next.
pub fn trajectory_to_path(partition: &Partition, trajectories: &[Vec<Vec<f64>>], tol: f64) -> Result<ProjectedPath, OracleError> {
    let Some(len) = trajectories.first().map(Vec::len) else {
        return Err(OracleError::Mismatch("no agents".into()));
    };
    if trajectories.iter().any(|t| t.len() != len) || len == 0 {
        return Err(OracleError::Mismatch("agents have different or zero sample counts".into()));
    }
    let mut per_agent: Vec<Vec<usize>> = Vec::new();
    for (agent, samples) in trajectories.iter().enumerate() {
        let sets: Vec<Vec<usize>> = samples.iter().map(|x| partition.containing(x, tol)).collect();
        if let Some(k) = sets.iter().position(Vec::is_empty) {
            return Err(OracleError::OutsidePartition { agent, sample: k, point: samples[k].clone() });
        }
        let mut regions = vec![usize::MAX; len];
        let mut ahead: Option<usize> = None;
        for k in (0..len).rev() {
            regions[k] = if sets[k].len() == 1 {
                sets[k][0]
            } else {
                match ahead.filter(|r| sets[k].contains(r)) {
                    Some(r) => r,
                    None => partition.locate(&samples[k], tol).expect("sample lies in some region"),
                }
            };
            ahead = Some(regions[k]);
        }
        per_agent.push(regions);
    }
    let tuple = |k: usize| per_agent.iter().map(|r| r[k]).collect::<Vec<usize>>();
    let mut steps = vec![tuple(0)];
    let mut switch_samples = vec![0];
    for k in 1..len {
        let t = tuple(k);
        if &t != steps.last().unwrap() {
            steps.push(t);
            switch_samples.push(k);
        }
    }
    let repeats = *switch_samples.last().unwrap() < len - 1;
    Ok(ProjectedPath { steps, switch_samples, repeats })
}

/// Drops consecutive repeats, the form in which a discrete plan appears in
/// continuous motion.
pub fn collapse_stutter(path: &[Vec<usize>]) -> GlobalPath {
    let mut out: GlobalPath = Vec::new();
    for t in path {
        if out.last() != Some(t) {
            out.push(t.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::abstraction::{build_wts, product_gwts, AgentModel, WeightRule};
    use crate::geometry::{AxisCut, HPolytope};
    use std::collections::BTreeSet;

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;
    const D: usize = 3;
    const E: usize = 4;
    const F: usize = 5;

    fn grid() -> TransitionSystem {
        let b = |x0: f64, y0: f64| HPolytope::from_box(&[x0, y0], &[x0 + 1.0, y0 + 1.0]).unwrap();
        let ws = HPolytope::from_box(&[0.0, 0.0], &[2.0, 3.0]).unwrap();
        let names = ["A", "B", "C", "D", "E", "F"];
        let boxes = [b(0.0, 2.0), b(0.0, 1.0), b(0.0, 0.0), b(1.0, 0.0), b(1.0, 1.0), b(1.0, 2.0)];
        let p = Partition::new(ws, names.iter().map(|s| s.to_string()).zip(boxes).collect()).unwrap();
        let obs = ["y1", "y2", "y3", "y3", "y2", "y1"];
        let agents: Vec<AgentModel> = (1..=2)
            .map(|i| AgentModel {
                name: format!("r{i}"),
                initial: (0..6).collect(),
                secret: [A, B, F].into_iter().collect(),
                observations: obs.iter().map(|s| s.to_string()).collect(),
                labels: vec![BTreeSet::new(); 6],
                dynamics: None,
            })
            .collect();
        let w: Vec<_> = agents.iter().map(|a| build_wts(&p, a, &WeightRule::default()).unwrap()).collect();
        product_gwts(&w).unwrap()
    }

    #[test]
    fn secure_example_path() {
        let g = grid();
        let tau = vec![vec![D, E], vec![E, B]];
        let v = check_path(&g, &tau).unwrap();
        assert!(v.type_b.secure);
        assert!(v.type_a.secure);
        let w = &v.type_a.witness;
        assert_eq!(w.len(), 2);
        for (t, c) in tau.iter().zip(w) {
            assert!(compatible(&g, t, c));
        }
        let idx = validate_path(&g, w).unwrap();
        assert!(g.is_path(&idx));
    }

    #[test]
    fn insecure_example_path() {
        let g = grid();
        let tau = vec![vec![A, B], vec![F, A]];
        let v = check_path(&g, &tau).unwrap();
        assert!(!v.type_a.secure);
        assert_eq!(v.type_a.failed_step, Some(1));
        assert!(!v.type_b.secure);
        assert!(v.type_b.violations.contains(&(1, 1)));
        assert!(v.type_b.violations.contains(&(2, 1)));
    }

    #[test]
    fn non_secret_path_is_its_own_witness() {
        let g = grid();
        let tau = vec![vec![C, D], vec![C, E], vec![D, E]];
        let v = check_path(&g, &tau).unwrap();
        assert!(v.type_a.secure && v.type_b.secure);
        assert!(tau.iter().all(|t| compatible(&g, t, t)));
    }

    #[test]
    fn invalid_paths_are_errors() {
        let g = grid();
        assert!(check_type_b(&g, &[vec![D, E], vec![B, E]]).is_err());
        assert!(check_type_a(&g, &[vec![D, 9]]).is_err());
        assert!(check_type_a_lasso(&g, &[vec![D, E]], &[]).is_err());
    }

    #[test]
    fn lasso_witness_replays() {
        let g = grid();
        let prefix = vec![vec![D, E]];
        let cycle = vec![vec![E, B], vec![D, E]];
        let v = check_lasso(&g, &prefix, &cycle).unwrap();
        assert!(v.type_a.secure);
        let (wp, wc) = (&v.type_a.witness, &v.type_a.witness_cycle);
        assert!(!wc.is_empty());
        assert_eq!(wc.len() % cycle.len(), 0);
        let real_at = |j: usize| {
            if j < prefix.len() {
                &prefix[j]
            } else {
                &cycle[(j - prefix.len()) % cycle.len()]
            }
        };
        for (j, c) in wp.iter().chain(wc).enumerate() {
            assert!(compatible(&g, real_at(j), c));
        }
        let whole: Vec<_> = wp.iter().chain(wc).cloned().collect();
        let idx = validate_path(&g, &whole).unwrap();
        let back = g.index_of(&SysState::global(wc[0].clone())).unwrap();
        assert!(g.weight(*idx.last().unwrap(), back).is_some());
    }

    #[test]
    fn staying_in_a_secret_row_is_insecure() {
        let g = grid();
        // Both regions observed as y1 are secret, so no copy can stand in for A.
        let v = check_lasso(&g, &[], &[vec![A, C]]).unwrap();
        assert!(!v.type_a.secure);
        assert!(!v.type_b.secure);
    }

    #[test]
    fn trajectory_projection() {
        let ws = HPolytope::from_box(&[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let p = Partition::axis_split(&ws, &[AxisCut { axis: 0, value: 1.0 }]).unwrap();
        let still: Vec<Vec<f64>> = vec![vec![0.5, 0.5]; 5];
        let r = trajectory_to_path(&p, &[still.clone()], 1e-9).unwrap();
        assert_eq!(r.steps, vec![vec![0]]);
        assert!(r.repeats);
        let crossing: Vec<Vec<f64>> = (0..5).map(|k| vec![0.5 + 0.25 * k as f64, 0.5]).collect();
        let r = trajectory_to_path(&p, &[crossing.clone(), still], 1e-9).unwrap();
        assert_eq!(r.steps, vec![vec![0, 0], vec![1, 0]]);
        assert_eq!(r.switch_samples, vec![0, 2]);
        assert!(r.repeats);
        let outside = vec![vec![3.0, 0.5]];
        assert!(matches!(trajectory_to_path(&p, &[outside], 1e-9), Err(OracleError::OutsidePartition { .. })));
    }
}
