use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::eval::Symbol;
use super::syntax::Ltl;
use super::LtlError;

/// Largest alphabet a guard bitmask can index.
pub const MAX_ATOMS: usize = 64;

/// Conjunction of literals over the automaton's atom list, as bitmasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Guard {
    pub pos: u64,
    pub neg: u64,
}

impl Guard {
    pub const TRUE: Guard = Guard { pos: 0, neg: 0 };

    pub fn matches(&self, letter: u64) -> bool {
        letter & self.pos == self.pos && letter & self.neg == 0
    }

    pub fn is_true(&self) -> bool {
        self.pos == 0 && self.neg == 0
    }

    pub fn is_contradictory(&self) -> bool {
        self.pos & self.neg != 0
    }

    /// Every letter accepted by `self` is accepted by `other`.
    pub fn implies(&self, other: &Guard) -> bool {
        other.pos & !self.pos == 0 && other.neg & !self.neg == 0
    }
}

/// State-based Büchi automaton with conjunctive guards.
#[derive(Debug, Clone, PartialEq)]
pub struct Buchi {
    ap: Vec<String>,
    initial: Vec<usize>,
    accepting: Vec<bool>,
    edges: Vec<Vec<(Guard, usize)>>,
}

impl Buchi {
    pub fn new(
        ap: Vec<String>,
        initial: Vec<usize>,
        accepting: Vec<bool>,
        edges: Vec<Vec<(Guard, usize)>>,
    ) -> Result<Self, LtlError> {
        if ap.len() > MAX_ATOMS {
            return Err(LtlError::TooManyAtoms(ap.len()));
        }
        let n = accepting.len();
        if edges.len() != n || initial.iter().any(|&s| s >= n) || edges.iter().flatten().any(|&(_, t)| t >= n) {
            return Err(LtlError::Malformed("state index out of range".into()));
        }
        Ok(Self { ap, initial, accepting, edges })
    }

    pub fn ap(&self) -> &[String] {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.accepting.len()
    }

    pub fn initial(&self) -> &[usize] {
        &self.initial
    }

    pub fn is_accepting(&self, s: usize) -> bool {
        self.accepting[s]
    }

    pub fn accepting_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(|&s| self.accepting[s])
    }

    pub fn edges(&self, s: usize) -> &[(Guard, usize)] {
        &self.edges[s]
    }

    pub fn num_edges(&self) -> usize {
        self.edges.iter().map(Vec::len).sum()
    }

    /// Bitmask of `symbol` over this automaton's atoms. Atoms the automaton does not
    /// mention are ignored.
    pub fn encode(&self, symbol: &Symbol) -> u64 {
        self.ap
            .iter()
            .enumerate()
            .filter(|(_, a)| symbol.contains(*a))
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    /// Successor states of `s` on `letter`, sorted and deduplicated.
    pub fn step(&self, s: usize, letter: u64) -> Vec<usize> {
        let mut out: Vec<usize> = self.edges[s].iter().filter(|(g, _)| g.matches(letter)).map(|&(_, t)| t).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Whether the automaton accepts `prefix · cycle^ω`.
    pub fn accepts_lasso(&self, prefix: &[Symbol], cycle: &[Symbol]) -> Result<bool, LtlError> {
        let p: Vec<u64> = prefix.iter().map(|s| self.encode(s)).collect();
        let c: Vec<u64> = cycle.iter().map(|s| self.encode(s)).collect();
        self.accepts_lasso_letters(&p, &c)
    }

    /// Same as [`Buchi::accepts_lasso`] with letters already encoded over [`Buchi::ap`].
    pub fn accepts_lasso_letters(&self, prefix: &[u64], cycle: &[u64]) -> Result<bool, LtlError> {
        if cycle.is_empty() {
            return Err(LtlError::EmptyCycle);
        }
        let letters: Vec<u64> = prefix.iter().chain(cycle).copied().collect();
        let len = letters.len();
        let loop_start = prefix.len();
        let succ = |i: usize| if i + 1 < len { i + 1 } else { loop_start };
        let n = self.num_states();
        let id = |i: usize, s: usize| i * n + s;
        let next = |node: usize| -> Vec<usize> {
            let (i, s) = (node / n, node % n);
            self.step(s, letters[i]).into_iter().map(|t| id(succ(i), t)).collect()
        };

        let mut reached = vec![false; len * n];
        let mut queue: VecDeque<usize> = self.initial.iter().map(|&s| id(0, s)).collect();
        for &v in &queue {
            reached[v] = true;
        }
        while let Some(v) = queue.pop_front() {
            for w in next(v) {
                if !reached[w] {
                    reached[w] = true;
                    queue.push_back(w);
                }
            }
        }
        for start in (0..len * n).filter(|&v| reached[v] && self.accepting[v % n]) {
            let mut seen = vec![false; len * n];
            let mut stack = next(start);
            while let Some(v) = stack.pop() {
                if v == start {
                    return Ok(true);
                }
                if !seen[v] {
                    seen[v] = true;
                    stack.extend(next(v));
                }
            }
        }
        Ok(false)
    }

    /// Drops states that are unreachable or cannot reach an accepting cycle, then merges
    /// bisimilar states and subsumed edges until nothing changes.
    pub fn simplify(&self) -> Buchi {
        let mut current = self.trim();
        loop {
            let next = current.quotient().prune_subsumed_edges().merge_transient().trim();
            if next.num_states() == current.num_states() && next.num_edges() == current.num_edges() {
                return next.renumber();
            }
            current = next;
        }
    }

    fn reachable_from(&self, sources: &[usize], reverse: bool) -> Vec<bool> {
        let n = self.num_states();
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        for s in 0..n {
            for &(_, t) in &self.edges[s] {
                if reverse {
                    adj[t].push(s);
                } else {
                    adj[s].push(t);
                }
            }
        }
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = sources.to_vec();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(adj[v].iter().copied());
            }
        }
        seen
    }

    fn restrict(&self, keep: &[bool]) -> Buchi {
        let map: Vec<Option<usize>> = keep
            .iter()
            .scan(0, |next, &k| {
                Some(k.then(|| {
                    *next += 1;
                    *next - 1
                }))
            })
            .collect();
        let states: Vec<usize> = (0..self.num_states()).filter(|&s| keep[s]).collect();
        Buchi {
            ap: self.ap.clone(),
            initial: self.initial.iter().filter_map(|&s| map[s]).collect(),
            accepting: states.iter().map(|&s| self.accepting[s]).collect(),
            edges: states
                .iter()
                .map(|&s| self.edges[s].iter().filter_map(|&(g, t)| map[t].map(|t| (g, t))).collect())
                .collect(),
        }
    }

    /// Also clears the accepting flag of states on no cycle; a run visits those once.
    fn trim(&self) -> Buchi {
        let reach = self.reachable_from(&self.initial, false);
        let good: Vec<usize> = (0..self.num_states())
            .filter(|&s| reach[s] && self.accepting[s] && self.on_cycle(s))
            .collect();
        let coreach = self.reachable_from(&good, true);
        let keep: Vec<bool> = (0..self.num_states()).map(|s| reach[s] && coreach[s]).collect();
        let mut accepting = vec![false; self.num_states()];
        for &s in &good {
            accepting[s] = true;
        }
        Buchi { accepting, ..self.clone() }.restrict(&keep)
    }

    fn quotient(&self) -> Buchi {
        let n = self.num_states();
        let mut block: Vec<usize> = self.accepting.iter().map(|&a| usize::from(a)).collect();
        let mut count = block.iter().collect::<BTreeSet<_>>().len();
        loop {
            let mut ids: BTreeMap<(usize, BTreeSet<(Guard, usize)>), usize> = BTreeMap::new();
            let next: Vec<usize> = (0..n)
                .map(|s| {
                    let sig = (block[s], self.edges[s].iter().map(|&(g, t)| (g, block[t])).collect());
                    let fresh = ids.len();
                    *ids.entry(sig).or_insert(fresh)
                })
                .collect();
            let next_count = ids.len();
            block = next;
            if next_count == count {
                break;
            }
            count = next_count;
        }
        let mut edges: Vec<BTreeSet<(Guard, usize)>> = vec![BTreeSet::new(); count];
        let mut accepting = vec![false; count];
        for s in 0..n {
            accepting[block[s]] = self.accepting[s];
            edges[block[s]].extend(self.edges[s].iter().map(|&(g, t)| (g, block[t])));
        }
        let initial: BTreeSet<usize> = self.initial.iter().map(|&s| block[s]).collect();
        Buchi {
            ap: self.ap.clone(),
            initial: initial.into_iter().collect(),
            accepting,
            edges: edges.into_iter().map(|e| e.into_iter().collect()).collect(),
        }
    }

    fn on_cycle(&self, s: usize) -> bool {
        let succ: Vec<usize> = self.edges[s].iter().map(|&(_, t)| t).collect();
        self.reachable_from(&succ, false)[s]
    }

    /// A state on no cycle is visited at most once, so its language is fixed by its
    /// outgoing edges alone; it can be replaced by any other state with the same edges.
    fn merge_transient(&self) -> Buchi {
        let n = self.num_states();
        let out: Vec<BTreeSet<(Guard, usize)>> = self.edges.iter().map(|e| e.iter().copied().collect()).collect();
        for s in (0..n).filter(|&s| !self.on_cycle(s)) {
            if let Some(t) = (0..n).find(|&t| t != s && out[t] == out[s]) {
                let redirect = |q: usize| if q == s { t } else { q };
                let merged = Buchi {
                    ap: self.ap.clone(),
                    initial: self.initial.iter().map(|&q| redirect(q)).collect(),
                    accepting: self.accepting.clone(),
                    edges: self.edges.iter().map(|e| e.iter().map(|&(g, q)| (g, redirect(q))).collect()).collect(),
                };
                let keep: Vec<bool> = (0..n).map(|q| q != s).collect();
                return merged.restrict(&keep);
            }
        }
        self.clone()
    }

    fn prune_subsumed_edges(&self) -> Buchi {
        let edges = self
            .edges
            .iter()
            .map(|out| {
                out.iter()
                    .enumerate()
                    .filter(|&(i, &(g, t))| {
                        !out.iter().enumerate().any(|(j, &(h, u))| {
                            j != i && u == t && g.implies(&h) && (!h.implies(&g) || j < i)
                        })
                    })
                    .map(|(_, &e)| e)
                    .collect()
            })
            .collect();
        Buchi { edges, ..self.clone() }
    }

    /// Breadth-first renumbering from the initial states, for stable output.
    fn renumber(&self) -> Buchi {
        let n = self.num_states();
        let mut order = Vec::with_capacity(n);
        let mut map = vec![usize::MAX; n];
        let mut queue: VecDeque<usize> = VecDeque::new();
        let mut init = self.initial.clone();
        init.sort_unstable();
        for s in init {
            if map[s] == usize::MAX {
                map[s] = order.len();
                order.push(s);
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            let mut out = self.edges[s].clone();
            out.sort();
            for (_, t) in out {
                if map[t] == usize::MAX {
                    map[t] = order.len();
                    order.push(t);
                    queue.push_back(t);
                }
            }
        }
        let mut edges: Vec<Vec<(Guard, usize)>> = order
            .iter()
            .map(|&s| self.edges[s].iter().map(|&(g, t)| (g, map[t])).collect())
            .collect();
        for e in &mut edges {
            e.sort_by_key(|&(g, t)| (t, g));
        }
        let mut initial: Vec<usize> = self.initial.iter().map(|&s| map[s]).collect();
        initial.sort_unstable();
        initial.dedup();
        Buchi {
            ap: self.ap.clone(),
            initial,
            accepting: order.iter().map(|&s| self.accepting[s]).collect(),
            edges,
        }
    }
}

#[derive(Debug, Clone)]
struct Pending {
    incoming: BTreeSet<usize>,
    new: BTreeSet<Ltl>,
    old: BTreeSet<Ltl>,
    next: BTreeSet<Ltl>,
}

struct Node {
    incoming: BTreeSet<usize>,
    old: BTreeSet<Ltl>,
    next: BTreeSet<Ltl>,
}

const INIT: usize = 0;

/// Tableau expansion of an NNF formula into a generalized Büchi graph. Node ids start
/// at 1; id 0 is the virtual initial node.
fn expand(f: &Ltl) -> Vec<Node> {
    let mut done: Vec<Node> = Vec::new();
    let mut stack = vec![Pending {
        incoming: BTreeSet::from([INIT]),
        new: BTreeSet::from([f.clone()]),
        old: BTreeSet::new(),
        next: BTreeSet::new(),
    }];
    while let Some(mut node) = stack.pop() {
        let Some(eta) = node.new.pop_first() else {
            if let Some(d) = done.iter_mut().find(|d| d.old == node.old && d.next == node.next) {
                d.incoming.extend(node.incoming);
            } else {
                let id = done.len() + 1;
                stack.push(Pending {
                    incoming: BTreeSet::from([id]),
                    new: node.next.clone(),
                    old: BTreeSet::new(),
                    next: BTreeSet::new(),
                });
                done.push(Node { incoming: node.incoming, old: node.old, next: node.next });
            }
            continue;
        };
        if node.old.contains(&eta) {
            stack.push(node);
            continue;
        }
        node.old.insert(eta.clone());
        match &eta {
            Ltl::False => {}
            Ltl::True => stack.push(node),
            Ltl::Atom(_) => {
                if !node.old.contains(&Ltl::not(eta.clone())) {
                    stack.push(node);
                }
            }
            Ltl::Not(inner) => {
                if !node.old.contains(inner) {
                    stack.push(node);
                }
            }
            Ltl::And(a, b) => {
                node.new.insert((**a).clone());
                node.new.insert((**b).clone());
                stack.push(node);
            }
            Ltl::Next(a) => {
                node.next.insert((**a).clone());
                stack.push(node);
            }
            Ltl::Always(a) => {
                node.new.insert((**a).clone());
                node.next.insert(eta.clone());
                stack.push(node);
            }
            Ltl::Or(a, b) => {
                let mut other = node.clone();
                node.new.insert((**a).clone());
                other.new.insert((**b).clone());
                stack.push(other);
                stack.push(node);
            }
            Ltl::Until(a, b) => {
                let mut other = node.clone();
                node.new.insert((**a).clone());
                node.next.insert(eta.clone());
                other.new.insert((**b).clone());
                stack.push(other);
                stack.push(node);
            }
            Ltl::Eventually(a) => {
                let mut other = node.clone();
                node.next.insert(eta.clone());
                other.new.insert((**a).clone());
                stack.push(other);
                stack.push(node);
            }
            Ltl::Release(a, b) => {
                let mut other = node.clone();
                node.new.insert((**b).clone());
                node.next.insert(eta.clone());
                other.new.insert((**a).clone());
                other.new.insert((**b).clone());
                stack.push(other);
                stack.push(node);
            }
            Ltl::Implies(..) => unreachable!("formula is in negation normal form"),
        }
    }
    done
}

fn eventualities(f: &Ltl, out: &mut BTreeSet<(Ltl, Ltl)>) {
    match f {
        Ltl::True | Ltl::False | Ltl::Atom(_) => {}
        Ltl::Not(g) | Ltl::Next(g) | Ltl::Always(g) => eventualities(g, out),
        Ltl::Eventually(g) => {
            out.insert((f.clone(), (**g).clone()));
            eventualities(g, out);
        }
        Ltl::Until(a, b) => {
            out.insert((f.clone(), (**b).clone()));
            eventualities(a, out);
            eventualities(b, out);
        }
        Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) | Ltl::Release(a, b) => {
            eventualities(a, out);
            eventualities(b, out);
        }
    }
}

/// Translates `f` into a simplified state-based Büchi automaton over `ap`.
///
/// Every atom of `f` must appear in `ap`. An unsatisfiable formula yields the empty
/// automaton (no states).
pub fn translate(f: &Ltl, ap: &[String]) -> Result<Buchi, LtlError> {
    if ap.len() > MAX_ATOMS {
        return Err(LtlError::TooManyAtoms(ap.len()));
    }
    let index: BTreeMap<&str, usize> = ap.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    if let Some(missing) = f.atoms().into_iter().find(|a| !index.contains_key(a.as_str())) {
        return Err(LtlError::UnknownAtom { pos: 0, name: missing });
    }
    let nnf = f.to_nnf();
    let nodes = expand(&nnf);

    let guard_of = |old: &BTreeSet<Ltl>| {
        let mut g = Guard::default();
        for lit in old {
            match lit {
                Ltl::Atom(a) => g.pos |= 1 << index[a.as_str()],
                Ltl::Not(inner) => {
                    if let Ltl::Atom(a) = &**inner {
                        g.neg |= 1 << index[a.as_str()];
                    }
                }
                _ => {}
            }
        }
        g
    };

    let mut evs = BTreeSet::new();
    eventualities(&nnf, &mut evs);
    let evs: Vec<(Ltl, Ltl)> = evs.into_iter().collect();
    let k = evs.len();
    // membership[id][i]: node id is in the i-th acceptance set; the virtual initial
    // node has an empty `old` and so belongs to all of them.
    let mut membership = vec![vec![true; k]];
    for node in &nodes {
        membership.push(evs.iter().map(|(u, rhs)| !node.old.contains(u) || node.old.contains(rhs)).collect());
    }
    let mut out: Vec<Vec<(Guard, usize)>> = vec![Vec::new(); nodes.len() + 1];
    for (i, node) in nodes.iter().enumerate() {
        let g = guard_of(&node.old);
        for &m in &node.incoming {
            out[m].push((g, i + 1));
        }
    }

    // Counter degeneralization over reachable (node, counter) pairs.
    let mut ids: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut pairs = vec![(INIT, 0)];
    ids.insert((INIT, 0), 0);
    let mut edges: Vec<Vec<(Guard, usize)>> = Vec::new();
    let mut at = 0;
    while at < pairs.len() {
        let (m, i) = pairs[at];
        let j = if k > 0 && membership[m][i] { (i + 1) % k } else { i };
        let mut row = Vec::new();
        for &(g, t) in &out[m] {
            let fresh = pairs.len();
            let id = *ids.entry((t, j)).or_insert_with(|| {
                pairs.push((t, j));
                fresh
            });
            row.push((g, id));
        }
        edges.push(row);
        at += 1;
    }
    let accepting = pairs.iter().map(|&(m, i)| k == 0 || (i == 0 && membership[m][0])).collect();
    let raw = Buchi { ap: ap.to_vec(), initial: vec![0], accepting, edges };
    Ok(raw.simplify())
}

/// Translates `f` over its own atoms, in sorted order.
pub fn translate_formula(f: &Ltl) -> Result<Buchi, LtlError> {
    let ap: Vec<String> = f.atoms().into_iter().collect();
    translate(f, &ap)
}
