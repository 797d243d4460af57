use std::collections::{BTreeSet, HashSet};

use rand::Rng;
use secureplan_core::abstraction::{
    product_gwts, secure_system, wts_from_edges, AgentModel, SecurityMode, SysState, TransitionSystem,
};
use secureplan_core::oracle::{check_type_a, check_type_b};

pub fn agent(name: &str, initial: &[usize], secret: &[usize], obs: &[&str]) -> AgentModel {
    AgentModel {
        name: name.into(),
        initial: initial.iter().copied().collect(),
        secret: secret.iter().copied().collect(),
        observations: obs.iter().map(|s| s.to_string()).collect(),
        labels: vec![BTreeSet::new(); obs.len()],
        dynamics: None,
    }
}

pub fn region_names(n: usize) -> Vec<String> {
    (0..n).map(|q| format!("r{q}")).collect()
}

/// Random abstract two-level instance: `agents` agents over `n` regions with
/// per-agent observation maps over `y` symbols, random secrets, initial sets and edges.
pub fn random_gwts<R: Rng>(rng: &mut R, agents: usize, n: usize, y: usize) -> TransitionSystem {
    let density = rng.gen_range(0.2..0.6);
    let wts: Vec<TransitionSystem> = (0..agents)
        .map(|i| {
            let obs: Vec<String> = (0..n).map(|_| format!("y{}", rng.gen_range(0..y))).collect();
            let secret: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            let mut initial: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.5)).collect();
            if initial.is_empty() {
                initial.insert(rng.gen_range(0..n));
            }
            let a = AgentModel {
                name: format!("a{i}"),
                initial,
                secret,
                observations: obs,
                labels: vec![BTreeSet::new(); n],
                dynamics: None,
            };
            let mut edges = Vec::new();
            for p in 0..n {
                for q in 0..n {
                    if rng.gen_bool(if p == q { 0.7 } else { density }) {
                        edges.push((p, q, rng.gen_range(0.1..3.0)));
                    }
                }
            }
            wts_from_edges(&a, region_names(n), &edges).unwrap()
        })
        .collect();
    product_gwts(&wts).unwrap()
}

/// All initial paths of `sys` with exactly `len` states, as state indices.
pub fn all_paths(sys: &TransitionSystem, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack: Vec<Vec<usize>> = sys.initial().iter().map(|&s| vec![s]).collect();
    while let Some(p) = stack.pop() {
        if p.len() == len {
            out.push(p);
            continue;
        }
        for &(t, _) in sys.successors(*p.last().unwrap()) {
            let mut q = p.clone();
            q.push(t);
            stack.push(q);
        }
    }
    out
}

pub fn tuples(sys: &TransitionSystem, path: &[usize]) -> Vec<Vec<usize>> {
    path.iter().map(|&s| sys.state(s).real.clone()).collect()
}

/// Whether some initial path of `twin` has real side exactly `real`.
pub fn has_twin_path(twin: &TransitionSystem, real: &[Vec<usize>]) -> bool {
    let mut layer: HashSet<usize> =
        twin.initial().iter().copied().filter(|&s| twin.state(s).real == real[0]).collect();
    for t in &real[1..] {
        layer = layer
            .iter()
            .flat_map(|&s| twin.successors(s).iter().map(|&(d, _)| d))
            .filter(|&d| &twin.state(d).real == t)
            .collect();
        if layer.is_empty() {
            return false;
        }
    }
    !layer.is_empty()
}

pub fn global_index(sys: &TransitionSystem, t: &[usize]) -> usize {
    sys.index_of(&SysState::global(t.to_vec())).unwrap()
}

/// Oracle-secure paths of each length equal the real projections of secure-system
/// paths. Returns the number of paths compared and the disagreements.
pub fn compare_with_oracle(g: &TransitionSystem, mode: SecurityMode, max_len: usize) -> (usize, Vec<String>) {
    let secure = secure_system(g, mode).ok();
    let mut compared = 0;
    let mut mismatches = Vec::new();
    for len in 1..=max_len {
        for p in all_paths(g, len) {
            let t = tuples(g, &p);
            let a = !mode.type_a() || check_type_a(g, &t).unwrap().secure;
            let b = !mode.type_b() || check_type_b(g, &t).unwrap().secure;
            let projected = secure.as_ref().is_some_and(|s| has_twin_path(s, &t));
            if (a && b) != projected {
                mismatches.push(format!("mode {mode:?}, path {t:?}: oracle {} construction {projected}", a && b));
            }
            compared += 1;
        }
    }
    (compared, mismatches)
}
