//! HOA v1 export and a Büchi-only import.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::automaton::{Buchi, Guard};
use super::LtlError;

fn guard_text(g: &Guard, n_ap: usize) -> String {
    if g.is_true() {
        return "t".into();
    }
    let lits: Vec<String> = (0..n_ap)
        .filter_map(|i| {
            if g.pos >> i & 1 == 1 {
                Some(i.to_string())
            } else if g.neg >> i & 1 == 1 {
                Some(format!("!{i}"))
            } else {
                None
            }
        })
        .collect();
    lits.join("&")
}

/// Writes the automaton in HOA v1 with state-based `Inf(0)` acceptance.
pub fn to_hoa(nba: &Buchi, name: &str) -> String {
    let mut s = String::new();
    let n_ap = nba.ap().len();
    writeln!(s, "HOA: v1").unwrap();
    writeln!(s, "name: \"{}\"", name.replace('\\', "\\\\").replace('"', "\\\"")).unwrap();
    writeln!(s, "States: {}", nba.num_states()).unwrap();
    for &q in nba.initial() {
        writeln!(s, "Start: {q}").unwrap();
    }
    write!(s, "AP: {n_ap}").unwrap();
    for a in nba.ap() {
        write!(s, " \"{a}\"").unwrap();
    }
    writeln!(s).unwrap();
    writeln!(s, "acc-name: Buchi").unwrap();
    writeln!(s, "Acceptance: 1 Inf(0)").unwrap();
    writeln!(s, "properties: trans-labels explicit-labels state-acc").unwrap();
    writeln!(s, "--BODY--").unwrap();
    for q in 0..nba.num_states() {
        if nba.is_accepting(q) {
            writeln!(s, "State: {q} {{0}}").unwrap();
        } else {
            writeln!(s, "State: {q}").unwrap();
        }
        for (g, t) in nba.edges(q) {
            writeln!(s, "[{}] {t}", guard_text(g, n_ap)).unwrap();
        }
    }
    writeln!(s, "--END--").unwrap();
    s
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Header(String),
    Ident(String),
    Str(String),
    Int(usize),
    Sym(char),
    Body,
    End,
}

fn hoa_err<T>(message: impl Into<String>) -> Result<T, LtlError> {
    Err(LtlError::Hoa(message.into()))
}

fn lex(text: &str) -> Result<Vec<Tok>, LtlError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            let mut j = i + 2;
            while j + 1 < chars.len() && !(chars[j] == '*' && chars[j + 1] == '/') {
                j += 1;
            }
            i = j + 2;
        } else if c == '"' {
            let mut j = i + 1;
            let mut s = String::new();
            while j < chars.len() && chars[j] != '"' {
                if chars[j] == '\\' && j + 1 < chars.len() {
                    j += 1;
                }
                s.push(chars[j]);
                j += 1;
            }
            if j >= chars.len() {
                return hoa_err("unterminated string");
            }
            out.push(Tok::Str(s));
            i = j + 1;
        } else if c.is_ascii_digit() {
            let mut j = i;
            while j < chars.len() && chars[j].is_ascii_digit() {
                j += 1;
            }
            let s: String = chars[i..j].iter().collect();
            out.push(Tok::Int(s.parse().map_err(|_| LtlError::Hoa(format!("bad integer {s}")))?));
            i = j;
        } else if c == '-' && chars[i..].starts_with(&['-', '-', 'B', 'O', 'D', 'Y', '-', '-']) {
            out.push(Tok::Body);
            i += 8;
        } else if c == '-' && chars[i..].starts_with(&['-', '-', 'E', 'N', 'D', '-', '-']) {
            out.push(Tok::End);
            i += 7;
        } else if c.is_ascii_alphabetic() || c == '_' || c == '@' {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_alphanumeric() || matches!(chars[j], '_' | '-' | '@')) {
                j += 1;
            }
            let word: String = chars[i..j].iter().collect();
            if chars.get(j) == Some(&':') {
                out.push(Tok::Header(word));
                i = j + 1;
            } else {
                out.push(Tok::Ident(word));
                i = j;
            }
        } else if "[]{}()&|!".contains(c) {
            out.push(Tok::Sym(c));
            i += 1;
        } else {
            return hoa_err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

#[derive(Debug)]
enum Expr {
    Const(bool),
    Var(usize),
    Not(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
}

struct Cursor {
    toks: Vec<Tok>,
    at: usize,
}

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.at).cloned();
        self.at += 1;
        t
    }

    fn expect_sym(&mut self, c: char) -> Result<(), LtlError> {
        match self.bump() {
            Some(Tok::Sym(d)) if d == c => Ok(()),
            other => hoa_err(format!("expected `{c}`, found {other:?}")),
        }
    }

    fn or_expr(&mut self) -> Result<Expr, LtlError> {
        let mut lhs = self.and_expr()?;
        while self.peek() == Some(&Tok::Sym('|')) {
            self.at += 1;
            lhs = Expr::Or(Box::new(lhs), Box::new(self.and_expr()?));
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> Result<Expr, LtlError> {
        let mut lhs = self.not_expr()?;
        while self.peek() == Some(&Tok::Sym('&')) {
            self.at += 1;
            lhs = Expr::And(Box::new(lhs), Box::new(self.not_expr()?));
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> Result<Expr, LtlError> {
        match self.bump() {
            Some(Tok::Sym('!')) => Ok(Expr::Not(Box::new(self.not_expr()?))),
            Some(Tok::Sym('(')) => {
                let e = self.or_expr()?;
                self.expect_sym(')')?;
                Ok(e)
            }
            Some(Tok::Ident(w)) if w == "t" => Ok(Expr::Const(true)),
            Some(Tok::Ident(w)) if w == "f" => Ok(Expr::Const(false)),
            Some(Tok::Int(i)) => Ok(Expr::Var(i)),
            other => hoa_err(format!("bad label token {other:?}")),
        }
    }

    fn int_set(&mut self) -> Result<Vec<usize>, LtlError> {
        self.expect_sym('{')?;
        let mut out = Vec::new();
        loop {
            match self.bump() {
                Some(Tok::Int(i)) => out.push(i),
                Some(Tok::Sym('}')) => return Ok(out),
                other => return hoa_err(format!("bad acceptance set token {other:?}")),
            }
        }
    }
}

fn dnf(e: &Expr, negated: bool) -> Vec<Guard> {
    match e {
        Expr::Const(b) => {
            if *b != negated {
                vec![Guard::TRUE]
            } else {
                vec![]
            }
        }
        Expr::Var(i) => {
            if negated {
                vec![Guard { pos: 0, neg: 1 << i }]
            } else {
                vec![Guard { pos: 1 << i, neg: 0 }]
            }
        }
        Expr::Not(inner) => dnf(inner, !negated),
        Expr::And(a, b) | Expr::Or(a, b) => {
            let conjunctive = matches!(e, Expr::And(..)) != negated;
            let (x, y) = (dnf(a, negated), dnf(b, negated));
            if conjunctive {
                let mut out = Vec::new();
                for g in &x {
                    for h in &y {
                        let c = Guard { pos: g.pos | h.pos, neg: g.neg | h.neg };
                        if !c.is_contradictory() && !out.contains(&c) {
                            out.push(c);
                        }
                    }
                }
                out
            } else {
                let mut out = x;
                for h in y {
                    if !out.contains(&h) {
                        out.push(h);
                    }
                }
                out
            }
        }
    }
}

/// Reads a HOA v1 automaton with `Acceptance: 1 Inf(0)`, state- or transition-based.
/// Transition-based marks are moved onto states by splitting each state in two.
pub fn from_hoa(text: &str) -> Result<Buchi, LtlError> {
    let mut cur = Cursor { toks: lex(text)?, at: 0 };
    let mut headers: BTreeMap<String, Vec<Tok>> = BTreeMap::new();
    let mut starts: Vec<usize> = Vec::new();
    loop {
        match cur.bump() {
            Some(Tok::Body) => break,
            Some(Tok::Header(name)) => {
                let mut vals = Vec::new();
                while !matches!(cur.peek(), Some(Tok::Header(_)) | Some(Tok::Body) | None) {
                    vals.push(cur.bump().unwrap());
                }
                if name == "Start" {
                    if vals.len() != 1 {
                        return Err(LtlError::UnsupportedHoa("alternating start states".into()));
                    }
                    match vals[0] {
                        Tok::Int(q) => starts.push(q),
                        _ => return hoa_err("bad Start header"),
                    }
                }
                headers.insert(name, vals);
            }
            other => return hoa_err(format!("expected header, found {other:?}")),
        }
    }
    match headers.get("HOA").map(Vec::as_slice) {
        Some([Tok::Ident(v)]) if v == "v1" => {}
        _ => return hoa_err("missing `HOA: v1` header"),
    }
    let acc = headers.get("Acceptance").ok_or_else(|| LtlError::Hoa("missing Acceptance header".into()))?;
    let expected = [Tok::Int(1), Tok::Ident("Inf".into()), Tok::Sym('('), Tok::Int(0), Tok::Sym(')')];
    if acc.as_slice() != expected {
        return Err(LtlError::UnsupportedAcceptance(format!("{acc:?}")));
    }
    let ap: Vec<String> = match headers.get("AP").map(Vec::as_slice) {
        Some([Tok::Int(n), rest @ ..]) if rest.len() == *n => rest
            .iter()
            .map(|t| match t {
                Tok::Str(s) => Ok(s.clone()),
                _ => hoa_err("bad AP header"),
            })
            .collect::<Result<_, _>>()?,
        None => Vec::new(),
        _ => return hoa_err("bad AP header"),
    };
    if ap.len() > super::automaton::MAX_ATOMS {
        return Err(LtlError::TooManyAtoms(ap.len()));
    }

    // (source, guard, target, marked)
    let mut edges: Vec<(usize, Guard, usize, bool)> = Vec::new();
    let mut state_acc: BTreeMap<usize, bool> = BTreeMap::new();
    let mut current: Option<(usize, bool)> = None;
    let mut any_edge_mark = false;
    loop {
        match cur.bump() {
            Some(Tok::End) => break,
            Some(Tok::Header(h)) if h == "State" => {
                if cur.peek() == Some(&Tok::Sym('[')) {
                    return Err(LtlError::UnsupportedHoa("state labels".into()));
                }
                let q = match cur.bump() {
                    Some(Tok::Int(q)) => q,
                    other => return hoa_err(format!("bad state id {other:?}")),
                };
                if let Some(Tok::Str(_)) = cur.peek() {
                    cur.at += 1;
                }
                let marked = if cur.peek() == Some(&Tok::Sym('{')) { cur.int_set()?.contains(&0) } else { false };
                state_acc.insert(q, marked);
                current = Some((q, marked));
            }
            Some(Tok::Sym('[')) => {
                let Some((q, q_marked)) = current else {
                    return hoa_err("edge before any State");
                };
                let expr = cur.or_expr()?;
                cur.expect_sym(']')?;
                let target = match cur.bump() {
                    Some(Tok::Int(t)) => t,
                    other => return hoa_err(format!("bad edge target {other:?}")),
                };
                if cur.peek() == Some(&Tok::Sym('&')) {
                    return Err(LtlError::UnsupportedHoa("alternating transitions".into()));
                }
                let mut marked = q_marked;
                if cur.peek() == Some(&Tok::Sym('{')) {
                    let set = cur.int_set()?;
                    if set.contains(&0) {
                        marked = true;
                        any_edge_mark = true;
                    }
                }
                for g in dnf(&expr, false) {
                    edges.push((q, g, target, marked));
                }
            }
            Some(Tok::Int(_)) => return Err(LtlError::UnsupportedHoa("implicit edge labels".into())),
            other => return hoa_err(format!("unexpected token in body {other:?}")),
        }
    }
    let n = headers
        .get("States")
        .and_then(|v| match v.as_slice() {
            [Tok::Int(n)] => Some(*n),
            _ => None,
        })
        .unwrap_or(0)
        .max(state_acc.keys().next_back().map_or(0, |&q| q + 1))
        .max(edges.iter().map(|e| e.0.max(e.2) + 1).max().unwrap_or(0));

    if !any_edge_mark {
        let mut out = vec![Vec::new(); n];
        for (q, g, t, _) in edges {
            out[q].push((g, t));
        }
        let accepting = (0..n).map(|q| state_acc.get(&q).copied().unwrap_or(false)).collect();
        return Buchi::new(ap, starts, accepting, out);
    }
    // State (q, flag) is 2q + flag; flag records that the last edge was marked.
    let mut out = vec![Vec::new(); 2 * n];
    for (q, g, t, marked) in edges {
        let target = 2 * t + usize::from(marked);
        out[2 * q].push((g, target));
        out[2 * q + 1].push((g, target));
    }
    let accepting = (0..2 * n).map(|s| s % 2 == 1).collect();
    let split = Buchi::new(ap, starts.iter().map(|&q| 2 * q).collect(), accepting, out)?;
    Ok(split.simplify())
}
