use std::collections::BTreeSet;

use super::syntax::Ltl;
use super::LtlError;

/// A letter of the word: the set of atoms that hold.
pub type Symbol = BTreeSet<String>;

/// Evaluates `f` at position 0 of the ultimately periodic word `prefix · cycle^ω`.
///
/// Positions of the word are folded onto `prefix.len() + cycle.len()` states, with the
/// last state looping back to the start of the cycle. Until is a least fixpoint and
/// release a greatest fixpoint over that graph.
pub fn eval_lasso(f: &Ltl, prefix: &[Symbol], cycle: &[Symbol]) -> Result<bool, LtlError> {
    if cycle.is_empty() {
        return Err(LtlError::EmptyCycle);
    }
    let ap: Vec<String> = f.atoms().into_iter().collect();
    let mask = |s: &Symbol| ap.iter().enumerate().filter(|(_, a)| s.contains(*a)).fold(0u64, |m, (i, _)| m | 1 << i);
    let p: Vec<u64> = prefix.iter().map(mask).collect();
    let c: Vec<u64> = cycle.iter().map(mask).collect();
    eval_lasso_letters(f, &ap, &p, &c)
}

/// Same as [`eval_lasso`] with letters given as bitmasks over `ap` (bit `i` set when
/// `ap[i]` holds). Atoms of `f` missing from `ap` are false everywhere.
pub fn eval_lasso_letters(f: &Ltl, ap: &[String], prefix: &[u64], cycle: &[u64]) -> Result<bool, LtlError> {
    if cycle.is_empty() {
        return Err(LtlError::EmptyCycle);
    }
    let word: Vec<u64> = prefix.iter().chain(cycle).copied().collect();
    let ctx = Lasso { word, loop_start: prefix.len(), ap };
    Ok(ctx.eval(f)[0])
}

struct Lasso<'a> {
    word: Vec<u64>,
    loop_start: usize,
    ap: &'a [String],
}

impl Lasso<'_> {
    fn len(&self) -> usize {
        self.word.len()
    }

    fn succ(&self, i: usize) -> usize {
        if i + 1 < self.len() {
            i + 1
        } else {
            self.loop_start
        }
    }

    fn eval(&self, f: &Ltl) -> Vec<bool> {
        let n = self.len();
        match f {
            Ltl::True => vec![true; n],
            Ltl::False => vec![false; n],
            Ltl::Atom(a) => match self.ap.iter().position(|x| x == a) {
                Some(i) => self.word.iter().map(|&m| m >> i & 1 == 1).collect(),
                None => vec![false; n],
            },
            Ltl::Not(g) => self.eval(g).into_iter().map(|b| !b).collect(),
            Ltl::And(a, b) => zip(self.eval(a), self.eval(b), |x, y| x && y),
            Ltl::Or(a, b) => zip(self.eval(a), self.eval(b), |x, y| x || y),
            Ltl::Implies(a, b) => zip(self.eval(a), self.eval(b), |x, y| !x || y),
            Ltl::Next(g) => {
                let v = self.eval(g);
                (0..n).map(|i| v[self.succ(i)]).collect()
            }
            Ltl::Until(a, b) => self.fixpoint(&self.eval(a), &self.eval(b)),
            Ltl::Release(a, b) => {
                // a R b = b & (a | X(a R b))
                let va = self.eval(a);
                let vb = self.eval(b);
                self.release(&va, &vb)
            }
            Ltl::Eventually(g) => self.fixpoint(&vec![true; n], &self.eval(g)),
            Ltl::Always(g) => self.release(&vec![false; n], &self.eval(g)),
        }
    }

    /// Least solution of `v = b | (a & X v)`.
    fn fixpoint(&self, a: &[bool], b: &[bool]) -> Vec<bool> {
        let n = self.len();
        let mut v = vec![false; n];
        loop {
            let mut changed = false;
            for i in (0..n).rev() {
                let nv = b[i] || (a[i] && v[self.succ(i)]);
                if nv != v[i] {
                    v[i] = nv;
                    changed = true;
                }
            }
            if !changed {
                return v;
            }
        }
    }

    /// Greatest solution of `v = b & (a | X v)`.
    fn release(&self, a: &[bool], b: &[bool]) -> Vec<bool> {
        let n = self.len();
        let mut v = vec![true; n];
        loop {
            let mut changed = false;
            for i in (0..n).rev() {
                let nv = b[i] && (a[i] || v[self.succ(i)]);
                if nv != v[i] {
                    v[i] = nv;
                    changed = true;
                }
            }
            if !changed {
                return v;
            }
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}
