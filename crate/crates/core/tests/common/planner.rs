use std::collections::BTreeSet;

use rand::Rng;
use secureplan_core::abstraction::{product_gwts, wts_from_edges, AgentModel, TransitionSystem};
use secureplan_core::planner::ProductAutomaton;

use super::instances::region_names;

/// Raw weighted graph behind a synthetic product automaton.
#[derive(Debug, Clone)]
pub struct Graph {
    pub initial: Vec<usize>,
    pub accepting: Vec<bool>,
    pub edges: Vec<Vec<(usize, f64)>>,
}

impl Graph {
    pub fn pba(&self) -> ProductAutomaton {
        let n = self.edges.len();
        ProductAutomaton::from_parts(
            (0..n).map(|i| (i, 0)).collect(),
            self.initial.clone(),
            self.accepting.clone(),
            self.edges.clone(),
        )
        .unwrap()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    pub fn without_edge(&self, k: usize) -> Graph {
        let mut g = self.clone();
        let mut seen = 0;
        for out in &mut g.edges {
            if k < seen + out.len() {
                out.remove(k - seen);
                break;
            }
            seen += out.len();
        }
        g
    }
}

/// Random graph; integer weights half of the time so that ties occur.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> Graph {
    let density = rng.gen_range(0.05..0.4);
    let integral = rng.gen_bool(0.5);
    let mut initial: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.15)).collect();
    if initial.is_empty() {
        initial.push(rng.gen_range(0..n));
    }
    let accepting = (0..n).map(|_| rng.gen_bool(0.25)).collect();
    let mut edges = vec![Vec::new(); n];
    for out in &mut edges {
        for t in 0..n {
            if rng.gen_bool(density) {
                out.push((t, if integral { rng.gen_range(0..5) as f64 } else { rng.gen_range(0.0..10.0) }));
            }
        }
    }
    Graph { initial, accepting, edges }
}

/// Optimal cost by all-pairs shortest paths.
pub fn floyd_warshall_optimum(g: &Graph, beta: f64) -> Option<f64> {
    let n = g.edges.len();
    let mut d = vec![vec![f64::INFINITY; n]; n];
    for (u, row) in d.iter_mut().enumerate() {
        row[u] = 0.0;
        for &(v, w) in &g.edges[u] {
            row[v] = row[v].min(w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let c = d[i][k] + d[k][j];
                if c < d[i][j] {
                    d[i][j] = c;
                }
            }
        }
    }
    let mut best: Option<f64> = None;
    for a in (0..n).filter(|&a| g.accepting[a]) {
        let pre = g.initial.iter().map(|&i| d[i][a]).fold(f64::INFINITY, f64::min);
        let cyc = g.edges[a].iter().map(|&(v, w)| w + d[v][a]).fold(f64::INFINITY, f64::min);
        if pre.is_finite() && cyc.is_finite() {
            let j = beta * pre + (1.0 - beta) * cyc;
            best = Some(best.map_or(j, |b: f64| b.min(j)));
        }
    }
    best
}

/// Random two-agent system whose regions carry atoms `a` and `b`.
pub fn labelled_gwts<R: Rng>(rng: &mut R, n: usize) -> TransitionSystem {
    let wts: Vec<TransitionSystem> = (0..2)
        .map(|i| {
            let labels = (0..n)
                .map(|_| ["a", "b"].iter().filter(|_| rng.gen_bool(0.4)).map(|s| s.to_string()).collect::<BTreeSet<_>>())
                .collect();
            let mut initial: BTreeSet<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
            initial.insert(0);
            let a = AgentModel {
                name: format!("a{i}"),
                initial,
                secret: BTreeSet::new(),
                observations: vec!["y".into(); n],
                labels,
                dynamics: None,
            };
            let mut edges = Vec::new();
            for p in 0..n {
                for q in 0..n {
                    if p == q || rng.gen_bool(0.4) {
                        edges.push((p, q, rng.gen_range(0.5..2.0)));
                    }
                }
            }
            wts_from_edges(&a, region_names(n), &edges).unwrap()
        })
        .collect();
    product_gwts(&wts).unwrap()
}

/// Sparse random graph: every state gets at most three successors.
pub fn sparse_graph<R: Rng>(rng: &mut R, n: usize) -> Graph {
    let mut g = random_graph(rng, n);
    for out in &mut g.edges {
        out.clear();
        for _ in 0..rng.gen_range(0..=3) {
            out.push((rng.gen_range(0..n), rng.gen_range(0..5) as f64 + rng.gen_range(0..2) as f64 * 0.25));
        }
    }
    g
}

fn simple_paths(g: &Graph, path: &mut Vec<usize>, cost: f64, on_path: &mut [bool], visit: &mut dyn FnMut(&[usize], f64)) {
    visit(path, cost);
    let u = *path.last().unwrap();
    for &(v, w) in &g.edges[u] {
        if !on_path[v] {
            on_path[v] = true;
            path.push(v);
            simple_paths(g, path, cost + w, on_path, visit);
            path.pop();
            on_path[v] = false;
        }
    }
}

/// Optimal cost by enumerating every simple prefix from an initial state and every
/// simple cycle through an accepting state.
pub fn brute_force_optimum(g: &Graph, beta: f64) -> Option<f64> {
    let n = g.edges.len();
    let mut prefix = vec![f64::INFINITY; n];
    for &i in &g.initial {
        let mut on_path = vec![false; n];
        on_path[i] = true;
        simple_paths(g, &mut vec![i], 0.0, &mut on_path, &mut |p, c| {
            let last = *p.last().unwrap();
            prefix[last] = prefix[last].min(c);
        });
    }
    let mut best: Option<f64> = None;
    for a in (0..n).filter(|&a| g.accepting[a] && prefix[a].is_finite()) {
        let mut cycle = f64::INFINITY;
        let mut on_path = vec![false; n];
        on_path[a] = true;
        simple_paths(g, &mut vec![a], 0.0, &mut on_path, &mut |p, c| {
            let last = *p.last().unwrap();
            if let Some(&(_, w)) = g.edges[last].iter().filter(|e| e.0 == a).min_by(|x, y| x.1.total_cmp(&y.1)) {
                cycle = cycle.min(c + w);
            }
        });
        if cycle.is_finite() {
            let j = beta * prefix[a] + (1.0 - beta) * cycle;
            best = Some(best.map_or(j, |b: f64| b.min(j)));
        }
    }
    best
}
