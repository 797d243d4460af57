use std::collections::BTreeSet;
use std::fmt;

use super::LtlError;

/// LTL abstract syntax. `Eventually`, `Always`, `Or`, `Implies`, `Release` and the
/// constants are derived operators; [`Ltl::to_core`] rewrites them away.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    Atom(String),
    Not(Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    Implies(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Release(Box<Ltl>, Box<Ltl>),
    Eventually(Box<Ltl>),
    Always(Box<Ltl>),
}

impl Ltl {
    pub fn atom(name: &str) -> Ltl {
        Ltl::Atom(name.to_string())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Ltl) -> Ltl {
        Ltl::Not(Box::new(f))
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        Ltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Ltl) -> Ltl {
        Ltl::Next(Box::new(f))
    }

    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Release(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Ltl) -> Ltl {
        Ltl::Eventually(Box::new(f))
    }

    pub fn always(f: Ltl) -> Ltl {
        Ltl::Always(Box::new(f))
    }

    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Ltl::True | Ltl::False => {}
            Ltl::Atom(a) => {
                out.insert(a.clone());
            }
            Ltl::Not(f) | Ltl::Next(f) | Ltl::Eventually(f) | Ltl::Always(f) => f.collect_atoms(out),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Number of temporal operators in the formula.
    pub fn temporal_depth_count(&self) -> usize {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => 0,
            Ltl::Not(f) => f.temporal_depth_count(),
            Ltl::Next(f) | Ltl::Eventually(f) | Ltl::Always(f) => 1 + f.temporal_depth_count(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Implies(a, b) => a.temporal_depth_count() + b.temporal_depth_count(),
            Ltl::Until(a, b) | Ltl::Release(a, b) => 1 + a.temporal_depth_count() + b.temporal_depth_count(),
        }
    }

    /// Negation normal form: negations only on atoms. `F`/`G` are kept; a negated
    /// until becomes a release.
    pub fn to_nnf(&self) -> Ltl {
        self.nnf(false)
    }

    fn nnf(&self, negated: bool) -> Ltl {
        match (self, negated) {
            (Ltl::True, false) | (Ltl::False, true) => Ltl::True,
            (Ltl::True, true) | (Ltl::False, false) => Ltl::False,
            (Ltl::Atom(a), false) => Ltl::Atom(a.clone()),
            (Ltl::Atom(a), true) => Ltl::not(Ltl::Atom(a.clone())),
            (Ltl::Not(f), n) => f.nnf(!n),
            (Ltl::And(a, b), false) => Ltl::and(a.nnf(false), b.nnf(false)),
            (Ltl::And(a, b), true) => Ltl::or(a.nnf(true), b.nnf(true)),
            (Ltl::Or(a, b), false) => Ltl::or(a.nnf(false), b.nnf(false)),
            (Ltl::Or(a, b), true) => Ltl::and(a.nnf(true), b.nnf(true)),
            (Ltl::Implies(a, b), false) => Ltl::or(a.nnf(true), b.nnf(false)),
            (Ltl::Implies(a, b), true) => Ltl::and(a.nnf(false), b.nnf(true)),
            (Ltl::Next(f), n) => Ltl::next(f.nnf(n)),
            (Ltl::Until(a, b), false) => Ltl::until(a.nnf(false), b.nnf(false)),
            (Ltl::Until(a, b), true) => Ltl::release(a.nnf(true), b.nnf(true)),
            (Ltl::Release(a, b), false) => Ltl::release(a.nnf(false), b.nnf(false)),
            (Ltl::Release(a, b), true) => Ltl::until(a.nnf(true), b.nnf(true)),
            (Ltl::Eventually(f), false) => Ltl::eventually(f.nnf(false)),
            (Ltl::Eventually(f), true) => Ltl::always(f.nnf(true)),
            (Ltl::Always(f), false) => Ltl::always(f.nnf(false)),
            (Ltl::Always(f), true) => Ltl::eventually(f.nnf(true)),
        }
    }

    pub fn is_nnf(&self) -> bool {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => true,
            Ltl::Not(f) => matches!(**f, Ltl::Atom(_)),
            Ltl::Implies(..) => false,
            Ltl::Next(f) | Ltl::Eventually(f) | Ltl::Always(f) => f.is_nnf(),
            Ltl::And(a, b) | Ltl::Or(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => a.is_nnf() && b.is_nnf(),
        }
    }

    /// Rewrites into the core grammar `p | !f | f & g | X f | f U g`, with
    /// `true := p | !p` over the given atom.
    pub fn to_core(&self, witness_atom: &str) -> Ltl {
        let p = || Ltl::atom(witness_atom);
        let or = |a: Ltl, b: Ltl| Ltl::not(Ltl::and(Ltl::not(a), Ltl::not(b)));
        let tt = || or(p(), Ltl::not(p()));
        match self {
            Ltl::True => tt(),
            Ltl::False => Ltl::not(tt()),
            Ltl::Atom(a) => Ltl::Atom(a.clone()),
            Ltl::Not(f) => Ltl::not(f.to_core(witness_atom)),
            Ltl::And(a, b) => Ltl::and(a.to_core(witness_atom), b.to_core(witness_atom)),
            Ltl::Or(a, b) => or(a.to_core(witness_atom), b.to_core(witness_atom)),
            Ltl::Implies(a, b) => Ltl::not(Ltl::and(a.to_core(witness_atom), Ltl::not(b.to_core(witness_atom)))),
            Ltl::Next(f) => Ltl::next(f.to_core(witness_atom)),
            Ltl::Until(a, b) => Ltl::until(a.to_core(witness_atom), b.to_core(witness_atom)),
            Ltl::Release(a, b) => Ltl::not(Ltl::until(
                Ltl::not(a.to_core(witness_atom)),
                Ltl::not(b.to_core(witness_atom)),
            )),
            Ltl::Eventually(f) => Ltl::until(tt(), f.to_core(witness_atom)),
            Ltl::Always(f) => Ltl::not(Ltl::until(tt(), Ltl::not(f.to_core(witness_atom)))),
        }
    }
}

impl fmt::Display for Ltl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ltl::True => write!(f, "true"),
            Ltl::False => write!(f, "false"),
            Ltl::Atom(a) => write!(f, "{a}"),
            Ltl::Not(g) => write!(f, "!{g}"),
            Ltl::And(a, b) => write!(f, "({a} & {b})"),
            Ltl::Or(a, b) => write!(f, "({a} | {b})"),
            Ltl::Implies(a, b) => write!(f, "({a} -> {b})"),
            Ltl::Next(g) => write!(f, "X {g}"),
            Ltl::Until(a, b) => write!(f, "({a} U {b})"),
            Ltl::Release(a, b) => write!(f, "({a} R {b})"),
            Ltl::Eventually(g) => write!(f, "F {g}"),
            Ltl::Always(g) => write!(f, "G {g}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    True,
    False,
    Not,
    And,
    Or,
    Implies,
    Next,
    Eventually,
    Always,
    Until,
    Release,
    LParen,
    RParen,
}

fn describe(tok: &Tok) -> String {
    match tok {
        Tok::Ident(s) => format!("atom `{s}`"),
        Tok::True => "`true`".into(),
        Tok::False => "`false`".into(),
        Tok::Not => "`!`".into(),
        Tok::And => "`&`".into(),
        Tok::Or => "`|`".into(),
        Tok::Implies => "`->`".into(),
        Tok::Next => "`X`".into(),
        Tok::Eventually => "`F`".into(),
        Tok::Always => "`G`".into(),
        Tok::Until => "`U`".into(),
        Tok::Release => "`R`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            c if c.is_ascii_whitespace() => {
                i += 1;
                continue;
            }
            '(' => out.push((start, Tok::LParen)),
            ')' => out.push((start, Tok::RParen)),
            '!' | '~' => out.push((start, Tok::Not)),
            '&' => {
                if bytes.get(i + 1) == Some(&b'&') {
                    i += 1;
                }
                out.push((start, Tok::And));
            }
            '|' => {
                if bytes.get(i + 1) == Some(&b'|') {
                    i += 1;
                }
                out.push((start, Tok::Or));
            }
            '-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                out.push((start, Tok::Implies));
            }
            '[' if bytes.get(i + 1) == Some(&b']') => {
                i += 1;
                out.push((start, Tok::Always));
            }
            '<' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                out.push((start, Tok::Eventually));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Tok::True,
                    "false" => Tok::False,
                    "X" => Tok::Next,
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    _ => Tok::Ident(word.to_string()),
                };
                out.push((start, tok));
                continue;
            }
            other => return Err(LtlError::Parse { pos: start, message: format!("unexpected character `{other}`") }),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    registry: Option<&'a BTreeSet<String>>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LtlError> {
        Err(LtlError::Parse { pos: self.pos(), message: message.into() })
    }

    fn implication(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Implies) {
            self.at += 1;
            let rhs = self.implication()?;
            return Ok(Ltl::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            lhs = Ltl::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.binary()?;
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            lhs = Ltl::and(lhs, self.binary()?);
        }
        Ok(lhs)
    }

    fn binary(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.unary()?;
        match self.peek() {
            Some(Tok::Until) => {
                self.at += 1;
                Ok(Ltl::until(lhs, self.binary()?))
            }
            Some(Tok::Release) => {
                self.at += 1;
                Ok(Ltl::release(lhs, self.binary()?))
            }
            _ => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Ltl, LtlError> {
        match self.peek() {
            Some(Tok::Not) => {
                self.at += 1;
                Ok(Ltl::not(self.unary()?))
            }
            Some(Tok::Next) => {
                self.at += 1;
                Ok(Ltl::next(self.unary()?))
            }
            Some(Tok::Eventually) => {
                self.at += 1;
                Ok(Ltl::eventually(self.unary()?))
            }
            Some(Tok::Always) => {
                self.at += 1;
                Ok(Ltl::always(self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Ltl, LtlError> {
        let pos = self.pos();
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of input");
        };
        self.at += 1;
        match tok {
            Tok::True => Ok(Ltl::True),
            Tok::False => Ok(Ltl::False),
            Tok::Ident(name) => {
                if let Some(reg) = self.registry {
                    if !reg.contains(&name) {
                        return Err(LtlError::UnknownAtom { pos, name });
                    }
                }
                Ok(Ltl::Atom(name))
            }
            Tok::LParen => {
                let inner = self.implication()?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(LtlError::Parse { pos: self.pos(), message: format!("unbalanced parenthesis opened at {pos}") });
                }
                self.at += 1;
                Ok(inner)
            }
            other => Err(LtlError::Parse { pos, message: format!("unexpected {}", describe(&other)) }),
        }
    }
}

fn parse_inner(text: &str, registry: Option<&BTreeSet<String>>) -> Result<Ltl, LtlError> {
    let toks = lex(text)?;
    let mut parser = Parser { toks, at: 0, end: text.len(), registry };
    let f = parser.implication()?;
    if let Some(tok) = parser.peek() {
        let message = match tok {
            Tok::RParen => "unbalanced `)`".to_string(),
            t => format!("unexpected {}", describe(t)),
        };
        return parser.error(message);
    }
    Ok(f)
}

/// Parses a formula, rejecting atoms outside `registry`.
///
/// Surface syntax: atoms are identifiers, `true`/`false`, unary `!`, `X`, `F`, `G`
/// (also `[]`, `<>`), binary `U`, `R` (right associative), then `&`, `|`, `->` in
/// decreasing binding strength.
pub fn parse_ltl(text: &str, registry: &BTreeSet<String>) -> Result<Ltl, LtlError> {
    parse_inner(text, Some(registry))
}

/// Parses without an atom registry.
pub fn parse_ltl_unchecked(text: &str) -> Result<Ltl, LtlError> {
    parse_inner(text, None)
}
