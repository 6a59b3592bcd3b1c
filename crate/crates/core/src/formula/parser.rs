//! Recursive-descent parser for the formula language.
//!
//! ```text
//! formula  := trace_q* traj_q+ body
//! trace_q  := ("forall" | "exists") IDENT ["in" IDENT] "."
//! traj_q   := ("A" | "E") IDENT "."
//! body     := impl (("<->" | "=" | "!=") impl)*
//! impl     := or ["->" impl]
//! or       := and ("|" and)*
//! and      := temp ("&" temp)*
//! temp     := unary [("U" | "R") temp]
//! unary    := ("!" | "F" | "G") unary | primary
//! primary  := "true" | "false" | "(" body ")" | IDENT "[" IDENT "," IDENT "]"
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{AhltlFormula, Body, FormulaError, Quant, TraceBinding, TrajBinding};

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    LBracket,
    RBracket,
    LParen,
    RParen,
    Comma,
    Dot,
    Bang,
    Amp,
    Bar,
    Arrow,
    Iff,
    Eq,
    Neq,
    Eof,
}

struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, FormulaError> {
    let mut out = Vec::new();
    for (l, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let chars: Vec<(usize, char)> = line.char_indices().collect();
        let mut i = 0;
        while i < chars.len() {
            let (col, c) = chars[i];
            let at = |tok| Token {
                tok,
                line: l + 1,
                column: col + 1,
            };
            let next = chars.get(i + 1).map(|&(_, c)| c);
            let next2 = chars.get(i + 2).map(|&(_, c)| c);
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_alphanumeric() || c == '_' {
                let start = i;
                while i < chars.len()
                    && (chars[i].1.is_alphanumeric() || chars[i].1 == '_' || chars[i].1 == '\'')
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().map(|&(_, c)| c).collect();
                out.push(at(Tok::Ident(s)));
                continue;
            }
            let (tok, len) = match (c, next, next2) {
                ('<', Some('-'), Some('>')) => (Tok::Iff, 3),
                ('-', Some('>'), _) => (Tok::Arrow, 2),
                ('!', Some('='), _) => (Tok::Neq, 2),
                ('&', Some('&'), _) => (Tok::Amp, 2),
                ('|', Some('|'), _) => (Tok::Bar, 2),
                ('=', Some('='), _) => (Tok::Eq, 2),
                ('[', ..) => (Tok::LBracket, 1),
                (']', ..) => (Tok::RBracket, 1),
                ('(', ..) => (Tok::LParen, 1),
                (')', ..) => (Tok::RParen, 1),
                (',', ..) => (Tok::Comma, 1),
                ('.', ..) => (Tok::Dot, 1),
                ('!', ..) | ('~', ..) => (Tok::Bang, 1),
                ('&', ..) => (Tok::Amp, 1),
                ('|', ..) => (Tok::Bar, 1),
                ('=', ..) => (Tok::Eq, 1),
                _ => {
                    return Err(FormulaError::Syntax {
                        line: l + 1,
                        column: col + 1,
                        message: alloc::format!("unexpected character `{c}`"),
                    })
                }
            };
            out.push(at(tok));
            i += len;
        }
    }
    let (line, column) = out.last().map_or((1, 1), |t| (t.line, t.column + 1));
    out.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    traces: Vec<TraceBinding>,
    trajs: Vec<TrajBinding>,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, message: &str) -> FormulaError {
        let t = &self.toks[self.pos];
        FormulaError::Syntax {
            line: t.line,
            column: t.column,
            message: message.to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), FormulaError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&alloc::format!("expected {what}")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, FormulaError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&alloc::format!("expected {what}"))),
        }
    }

    fn is_ident(&self, n: usize, s: &str) -> bool {
        matches!(self.peek_at(n), Tok::Ident(x) if x == s)
    }

    fn check_fresh(&self, v: &str) -> Result<(), FormulaError> {
        if self.traces.iter().any(|b| b.var == v) || self.trajs.iter().any(|b| b.var == v) {
            return Err(FormulaError::Duplicate(v.to_string()));
        }
        Ok(())
    }

    fn prefix(&mut self) -> Result<(), FormulaError> {
        loop {
            let trace_q = if self.is_ident(0, "forall") {
                Some(Quant::Forall)
            } else if self.is_ident(0, "exists") {
                Some(Quant::Exists)
            } else {
                None
            };
            if let Some(quant) = trace_q {
                self.bump();
                let var = self.ident("trace variable")?;
                if let Some(t) = self.trajs.first() {
                    return Err(FormulaError::TrajBeforeTrace(t.var.clone()));
                }
                self.check_fresh(&var)?;
                let model = if self.is_ident(0, "in") {
                    self.bump();
                    Some(self.ident("model name")?)
                } else {
                    None
                };
                self.expect(Tok::Dot, "`.`")?;
                self.traces.push(TraceBinding { quant, var, model });
                continue;
            }
            let traj_q = if self.is_ident(0, "A") {
                Some(Quant::Forall)
            } else if self.is_ident(0, "E") {
                Some(Quant::Exists)
            } else {
                None
            };
            match traj_q {
                Some(quant)
                    if matches!(self.peek_at(1), Tok::Ident(_))
                        && *self.peek_at(2) == Tok::Dot =>
                {
                    self.bump();
                    let var = self.ident("trajectory variable")?;
                    self.check_fresh(&var)?;
                    self.bump();
                    self.trajs.push(TrajBinding { quant, var });
                }
                _ => return Ok(()),
            }
        }
    }

    fn body(&mut self) -> Result<Body, FormulaError> {
        let mut lhs = self.implication()?;
        loop {
            match self.peek() {
                Tok::Iff | Tok::Eq => {
                    self.bump();
                    let rhs = self.implication()?;
                    lhs = Body::iff(lhs, rhs);
                }
                Tok::Neq => {
                    self.bump();
                    let rhs = self.implication()?;
                    lhs = Body::not(Body::iff(lhs, rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn implication(&mut self) -> Result<Body, FormulaError> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implication()?;
            return Ok(Body::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> Result<Body, FormulaError> {
        let mut lhs = self.conjunction()?;
        while *self.peek() == Tok::Bar {
            self.bump();
            let rhs = self.conjunction()?;
            lhs = Body::or(lhs, rhs);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Body, FormulaError> {
        let mut lhs = self.temporal()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.temporal()?;
            lhs = Body::and(lhs, rhs);
        }
        Ok(lhs)
    }

    fn binary_temporal(&self) -> Option<bool> {
        if *self.peek_at(1) == Tok::LBracket {
            return None;
        }
        if self.is_ident(0, "U") {
            Some(true)
        } else if self.is_ident(0, "R") {
            Some(false)
        } else {
            None
        }
    }

    fn temporal(&mut self) -> Result<Body, FormulaError> {
        let lhs = self.unary()?;
        match self.binary_temporal() {
            Some(until) => {
                self.bump();
                let rhs = self.temporal()?;
                Ok(if until {
                    Body::until(lhs, rhs)
                } else {
                    Body::release(lhs, rhs)
                })
            }
            None => Ok(lhs),
        }
    }

    fn unary(&mut self) -> Result<Body, FormulaError> {
        if *self.peek() == Tok::Bang {
            self.bump();
            return Ok(Body::not(self.unary()?));
        }
        if *self.peek_at(1) != Tok::LBracket {
            if self.is_ident(0, "F") {
                self.bump();
                return Ok(Body::eventually(self.unary()?));
            }
            if self.is_ident(0, "G") {
                self.bump();
                return Ok(Body::globally(self.unary()?));
            }
            if self.is_ident(0, "X") {
                return Err(self.error("the next operator is not part of the logic"));
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Body, FormulaError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let b = self.body()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(b)
            }
            Tok::Ident(s) if *self.peek_at(1) == Tok::LBracket => {
                self.bump();
                self.bump();
                let pv = self.ident("trace variable")?;
                self.expect(Tok::Comma, "`,`")?;
                let tv = self.ident("trajectory variable")?;
                self.expect(Tok::RBracket, "`]`")?;
                let trace = self
                    .traces
                    .iter()
                    .position(|b| b.var == pv)
                    .ok_or(FormulaError::UnboundTrace(pv))?;
                let traj = self
                    .trajs
                    .iter()
                    .position(|b| b.var == tv)
                    .ok_or(FormulaError::UnboundTraj(tv))?;
                Ok(Body::Atom {
                    prop: s,
                    trace,
                    traj,
                })
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                Ok(Body::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                Ok(Body::False)
            }
            _ => Err(self.error("expected an atom, constant or `(`")),
        }
    }
}

/// Parses and validates a formula.
pub fn parse_formula(text: &str) -> Result<AhltlFormula, FormulaError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        traces: Vec::new(),
        trajs: Vec::new(),
    };
    p.prefix()?;
    let body = p.body()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error("unexpected trailing input"));
    }
    let f = AhltlFormula {
        trace_prefix: p.traces,
        traj_prefix: p.trajs,
        body,
    };
    f.validate()?;
    f.classify_prefix()?;
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::PrefixShape;

    const NI: &str =
        "forall p1. exists p2. E t. ((h[p1,t] != h[p2,t]) & G (obs[p1,t] <-> obs[p2,t]))";

    #[test]
    fn parses_ni() {
        let f = parse_formula(NI).unwrap();
        assert_eq!(f.trace_prefix.len(), 2);
        assert_eq!(f.trace_prefix[0].quant, Quant::Forall);
        assert_eq!(f.classify_prefix().unwrap(), PrefixShape::EOnly(vec![0]));
        let h = |i| Body::atom("h", i, 0);
        let o = |i| Body::atom("obs", i, 0);
        assert_eq!(
            f.body,
            Body::and(
                Body::not(Body::iff(h(0), h(1))),
                Body::globally(Body::iff(o(0), o(1)))
            )
        );
    }

    #[test]
    fn parses_ni_nd_shape() {
        let f = parse_formula(
            "forall p1. exists p2. A t. E t'. (F(h[p1,t] != h[p2,t]) & G(l[p1,t] = l[p2,t])) -> G(obs[p1,t'] = obs[p2,t'])",
        )
        .unwrap();
        assert_eq!(
            f.classify_prefix().unwrap(),
            PrefixShape::AThenE(vec![0], vec![1])
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_formula("forall p. E t. a[p,u]").unwrap_err(),
            FormulaError::UnboundTraj("u".into())
        );
        assert_eq!(
            parse_formula("forall p. E t. a[q,t]").unwrap_err(),
            FormulaError::UnboundTrace("q".into())
        );
        assert_eq!(
            parse_formula("forall p. exists p. E t. a[p,t]").unwrap_err(),
            FormulaError::Duplicate("p".into())
        );
        assert_eq!(
            parse_formula("forall p. E t. forall q. a[p,t]").unwrap_err(),
            FormulaError::TrajBeforeTrace("t".into())
        );
        assert!(matches!(
            parse_formula("forall p. E t1. A t2. E t3. a[p,t1]"),
            Err(FormulaError::Unsupported(_))
        ));
        assert!(matches!(
            parse_formula("forall p. E t. a[p,t] &"),
            Err(FormulaError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_formula("forall p. E t. X a[p,t]"),
            Err(FormulaError::Syntax { .. })
        ));
    }

    #[test]
    fn precedence() {
        let f = parse_formula("forall p. E t. a[p,t] | b[p,t] & c[p,t] U d[p,t] -> e[p,t]").unwrap();
        let a = |s: &str| Body::atom(s, 0, 0);
        assert_eq!(
            f.body,
            Body::implies(
                Body::or(a("a"), Body::and(a("b"), Body::until(a("c"), a("d")))),
                a("e")
            )
        );
    }

    #[test]
    fn keyword_named_props() {
        let f = parse_formula("exists p in M. A t. F[p,t] U G G[p,t]").unwrap();
        assert_eq!(f.trace_prefix[0].model.as_deref(), Some("M"));
        assert_eq!(
            f.body,
            Body::until(Body::atom("F", 0, 0), Body::globally(Body::atom("G", 0, 0)))
        );
    }

    #[test]
    fn print_round_trip() {
        for text in [
            NI,
            "forall p. exists q in K2. A t. E u. (F !a[p,t] -> (b[q,u] R false)) <-> true",
            "exists p. E t. E u. !(a[p,t] U (b[p,u] | !c[p,t]))",
        ] {
            let f = parse_formula(text).unwrap();
            let printed = f.to_string();
            assert_eq!(parse_formula(&printed).unwrap(), f, "{printed}");
        }
    }
}
