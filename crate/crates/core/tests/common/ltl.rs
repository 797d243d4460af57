use secureplan_core::ltl::{eval_lasso_letters, parse_ltl_unchecked, translate_formula, Ltl};

/// At most four temporal operators and three atoms each.
pub const CORPUS: &[&str] = &[
    "p",
    "F p",
    "G p",
    "X p",
    "p U q",
    "p R q",
    "G F p",
    "F G p",
    "G (p -> F q)",
    "F p & F q",
    "G !p",
    "X X p",
    "!(p U q)",
    "(p U q) U r",
    "G (p -> X q)",
    "F (p & X G q)",
    "G F p & G F q",
    "F G p | G F q",
    "p U (q & X r)",
    "G (p | q)",
    "G F p -> G F q",
    "X (p R (q U r))",
    "G F (p & F (q & F r))",
    "F p & G !q",
    "!G F p",
    "G (p -> (q U r))",
    "true U p",
    "false R p",
    "G (F p & F !p)",
    "X (p U q) & F G !r",
    "(p R q) & F !q",
    "F (p & X (q & X p))",
    "G (p -> F (q & F p))",
    "!F p | G q",
];

fn temporal_ops(f: &Ltl) -> usize {
    match f {
        Ltl::True | Ltl::False | Ltl::Atom(_) => 0,
        Ltl::Not(a) => temporal_ops(a),
        Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) => temporal_ops(a) + temporal_ops(b),
        Ltl::Until(a, b) | Ltl::Release(a, b) => 1 + temporal_ops(a) + temporal_ops(b),
        Ltl::Next(a) | Ltl::Eventually(a) | Ltl::Always(a) => 1 + temporal_ops(a),
    }
}

pub fn corpus_respects_bounds() -> bool {
    CORPUS.iter().all(|t| {
        let f = parse_ltl_unchecked(t).unwrap();
        f.atoms().len() <= 3 && temporal_ops(&f) <= 4
    })
}

#[derive(Debug, Default)]
pub struct LassoStats {
    pub checked: u64,
    pub mismatches: Vec<String>,
}

fn word(mut x: u64, letters: u64, out: &mut [u64]) {
    for slot in out.iter_mut() {
        *slot = x % letters;
        x /= letters;
    }
}

fn primitive(v: &[u64]) -> bool {
    let n = v.len();
    (1..n).filter(|d| n % d == 0).all(|d| (0..n).any(|i| v[i] != v[(i + d) % n]))
}

/// Compares automaton acceptance with the evaluator on every ultimately periodic word
/// `u v^ω` with `|u| ≤ max_prefix`, `1 ≤ |v| ≤ max_cycle`. Each word is visited once,
/// in its canonical form: `v` primitive and `u` not ending in the last letter of `v`.
pub fn check_exhaustive(text: &str, max_prefix: usize, max_cycle: usize) -> LassoStats {
    let f = parse_ltl_unchecked(text).unwrap();
    let nba = translate_formula(&f).unwrap();
    let ap = nba.ap().to_vec();
    let letters = 1u64 << ap.len();
    let mut stats = LassoStats::default();
    for c in 1..=max_cycle {
        let mut v = vec![0; c];
        for y in 0..letters.pow(c as u32) {
            word(y, letters, &mut v);
            if !primitive(&v) {
                continue;
            }
            for p in 0..=max_prefix {
                let mut u = vec![0; p];
                for x in 0..letters.pow(p as u32) {
                    word(x, letters, &mut u);
                    if p > 0 && u[p - 1] == v[c - 1] {
                        continue;
                    }
                    let a = nba.accepts_lasso_letters(&u, &v).unwrap();
                    let e = eval_lasso_letters(&f, &ap, &u, &v).unwrap();
                    stats.checked += 1;
                    if a != e && stats.mismatches.len() < 5 {
                        stats.mismatches.push(format!("{text}: prefix {u:?} cycle {v:?} automaton {a} evaluator {e}"));
                    }
                }
            }
        }
    }
    stats
}
