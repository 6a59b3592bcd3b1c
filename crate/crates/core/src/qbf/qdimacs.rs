//! QDIMACS reader and writer. The writer clausifies the circuit with one
//! fresh variable per gate, emitting only the implication directions each
//! gate's polarity requires.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use hashbrown::HashMap;

use super::{Circuit, Node, NodeId, QbfError, QbfQuery, Quant, QuantBlock, Var};

const POS: u8 = 1;
const NEG: u8 = 2;

/// Clausifies and serializes a query. Gate variables are appended to the
/// innermost existential block, or to a new one when the innermost block is
/// universal; the root literal is asserted as a unit clause.
pub fn to_qdimacs(q: &QbfQuery) -> String {
    let c = &q.circuit;
    let order = c.reachable(q.root);

    // polarity propagation, parents before children
    let mut pol: HashMap<NodeId, u8> = HashMap::new();
    pol.insert(q.root, POS);
    for &n in order.iter().rev() {
        let p = pol.get(&n).copied().unwrap_or(0);
        let flip = |p: u8| ((p & POS) << 1) | ((p & NEG) >> 1);
        let mut mark = |x: NodeId, bits: u8| *pol.entry(x).or_insert(0) |= bits;
        match c.node(n) {
            Node::Not(x) => mark(*x, flip(p)),
            Node::And(cs) | Node::Or(cs) => cs.iter().for_each(|&x| mark(x, p)),
            _ => {}
        }
    }

    let mut next = q.num_vars as i64;
    let mut gate_var: HashMap<NodeId, i64> = HashMap::new();
    for &n in &order {
        if matches!(c.node(n), Node::And(_) | Node::Or(_)) {
            next += 1;
            gate_var.insert(n, next);
        }
    }
    fn lit(c: &Circuit, g: &HashMap<NodeId, i64>, n: NodeId) -> i64 {
        match c.node(n) {
            Node::Var(v) => v.0 as i64,
            Node::Not(x) => -lit(c, g, *x),
            Node::And(_) | Node::Or(_) => g[&n],
            Node::True | Node::False => unreachable!("constants are folded away below the root"),
        }
    }

    let mut clauses: Vec<Vec<i64>> = Vec::new();
    match c.node(q.root) {
        Node::True => {}
        Node::False => clauses.push(vec![]),
        _ => {
            for &n in &order {
                let (is_and, cs) = match c.node(n) {
                    Node::And(cs) => (true, cs),
                    Node::Or(cs) => (false, cs),
                    _ => continue,
                };
                let g = gate_var[&n];
                let p = pol[&n];
                let ls: Vec<i64> = cs.iter().map(|&x| lit(c, &gate_var, x)).collect();
                if p & POS != 0 {
                    if is_and {
                        ls.iter().for_each(|&l| clauses.push(vec![-g, l]));
                    } else {
                        let mut cl = vec![-g];
                        cl.extend_from_slice(&ls);
                        clauses.push(cl);
                    }
                }
                if p & NEG != 0 {
                    if is_and {
                        let mut cl = vec![g];
                        cl.extend(ls.iter().map(|&l| -l));
                        clauses.push(cl);
                    } else {
                        ls.iter().for_each(|&l| clauses.push(vec![g, -l]));
                    }
                }
            }
            clauses.push(vec![lit(c, &gate_var, q.root)]);
        }
    }

    let mut blocks: Vec<(Quant, Vec<i64>)> = q
        .merged_blocks()
        .into_iter()
        .map(|b| (b.quant, b.vars.iter().map(|v| v.0 as i64).collect()))
        .collect();
    let fresh: Vec<i64> = ((q.num_vars as i64 + 1)..=next).collect();
    if !fresh.is_empty() {
        match blocks.last_mut() {
            Some((Quant::Exists, vs)) => vs.extend_from_slice(&fresh),
            _ => blocks.push((Quant::Exists, fresh)),
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "p cnf {} {}", next, clauses.len());
    for (quant, vs) in &blocks {
        let kw = match quant {
            Quant::Exists => 'e',
            Quant::Forall => 'a',
        };
        out.push(kw);
        for v in vs {
            let _ = write!(out, " {v}");
        }
        out.push_str(" 0\n");
    }
    for cl in &clauses {
        for l in cl {
            let _ = write!(out, "{l} ");
        }
        out.push_str("0\n");
    }
    out
}

fn syntax(line: usize, message: impl Into<String>) -> QbfError {
    QbfError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses QDIMACS into a query whose matrix is a conjunction of clauses.
/// Variables used in clauses but not quantified become an outermost
/// existential block.
pub fn parse_qdimacs(text: &str) -> Result<QbfQuery, QbfError> {
    let mut header: Option<(u32, usize)> = None;
    let mut blocks: Vec<QuantBlock> = Vec::new();
    let mut clauses: Vec<Vec<i64>> = Vec::new();
    let mut cur: Vec<i64> = Vec::new();
    let mut bound = BTreeSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('p') {
            let parts: Vec<&str> = rest.split_whitespace().collect();
            if parts.len() != 3 || parts[0] != "cnf" {
                return Err(syntax(line_no, "expected `p cnf <vars> <clauses>`"));
            }
            let v = parts[1]
                .parse()
                .map_err(|_| syntax(line_no, "bad variable count"))?;
            let n = parts[2]
                .parse()
                .map_err(|_| syntax(line_no, "bad clause count"))?;
            header = Some((v, n));
            continue;
        }
        if header.is_none() {
            return Err(syntax(line_no, "content before the problem line"));
        }
        let quant = match line.as_bytes()[0] {
            b'a' => Some(Quant::Forall),
            b'e' => Some(Quant::Exists),
            _ => None,
        };
        if let Some(quant) = quant {
            if !clauses.is_empty() || !cur.is_empty() {
                return Err(syntax(line_no, "quantifier line after clauses"));
            }
            let mut vars = Vec::new();
            let mut terminated = false;
            for tok in line[1..].split_whitespace() {
                let n: i64 = tok
                    .parse()
                    .map_err(|_| syntax(line_no, format!("bad literal `{tok}`")))?;
                if n == 0 {
                    terminated = true;
                    break;
                }
                if n < 0 {
                    return Err(syntax(line_no, "negative variable in quantifier line"));
                }
                let v = Var(n as u32);
                if !bound.insert(v) {
                    return Err(QbfError::Rebound(v));
                }
                vars.push(v);
            }
            if !terminated {
                return Err(syntax(line_no, "quantifier line not terminated by 0"));
            }
            match blocks.last_mut() {
                Some(b) if b.quant == quant => b.vars.extend(vars),
                _ => blocks.push(QuantBlock { quant, vars }),
            }
            continue;
        }
        for tok in line.split_whitespace() {
            let n: i64 = tok
                .parse()
                .map_err(|_| syntax(line_no, format!("bad literal `{tok}`")))?;
            if n == 0 {
                clauses.push(core::mem::take(&mut cur));
            } else {
                cur.push(n);
            }
        }
    }
    let (nv, nc) = header.ok_or_else(|| syntax(0, "missing problem line"))?;
    if !cur.is_empty() {
        clauses.push(cur);
    }
    if clauses.len() != nc {
        return Err(syntax(
            0,
            format!("header announces {nc} clauses, found {}", clauses.len()),
        ));
    }

    let mut c = Circuit::new();
    let mut free = BTreeSet::new();
    let mut conj = Vec::with_capacity(clauses.len());
    for cl in &clauses {
        let mut disj = Vec::with_capacity(cl.len());
        for &l in cl {
            let v = Var(l.unsigned_abs() as u32);
            if v.0 > nv {
                return Err(syntax(0, format!("literal {l} exceeds the variable count")));
            }
            if !bound.contains(&v) {
                free.insert(v);
            }
            disj.push(c.lit(v, l > 0));
        }
        conj.push(c.or(disj));
    }
    let root = c.and(conj);
    if !free.is_empty() {
        blocks.insert(
            0,
            QuantBlock {
                quant: Quant::Exists,
                vars: free.into_iter().collect(),
            },
        );
    }
    let mut q = QbfQuery::new(c, root, blocks);
    q.num_vars = q.num_vars.max(nv);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn block(quant: Quant, vars: &[u32]) -> QuantBlock {
        QuantBlock {
            quant,
            vars: vars.iter().map(|&v| Var(v)).collect(),
        }
    }

    #[test]
    fn single_variable() {
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let q = QbfQuery::new(c, x, vec![block(Quant::Exists, &[1])]);
        assert_eq!(to_qdimacs(&q), "p cnf 1 1\ne 1 0\n1 0\n");
    }

    #[test]
    fn and_of_two() {
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let y = c.var(Var(2));
        let g = c.and2(x, y);
        let q = QbfQuery::new(c, g, vec![block(Quant::Exists, &[1, 2])]);
        let text = to_qdimacs(&q);
        assert!(text.starts_with("p cnf 3 3\ne 1 2 3 0\n"), "{text}");
    }

    #[test]
    fn fresh_block_after_universal() {
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let y = c.var(Var(2));
        let g = c.or2(x, y);
        let q = QbfQuery::new(
            c,
            g,
            vec![block(Quant::Exists, &[1]), block(Quant::Forall, &[2])],
        );
        let text = to_qdimacs(&q);
        assert_eq!(text, "p cnf 3 2\ne 1 0\na 2 0\ne 3 0\n-3 1 2 0\n3 0\n");
        let back = parse_qdimacs(&text).unwrap();
        assert_eq!(back.blocks.len(), 3);
    }

    #[test]
    fn constants() {
        let c = Circuit::new();
        let q = QbfQuery::new(c.clone(), c.ff(), vec![]);
        assert_eq!(to_qdimacs(&q), "p cnf 0 1\n0\n");
        let back = parse_qdimacs("p cnf 0 1\n0\n").unwrap();
        assert_eq!(back.root, back.circuit.ff());
        let q = QbfQuery::new(c.clone(), c.tt(), vec![]);
        assert_eq!(to_qdimacs(&q), "p cnf 0 0\n");
    }

    #[test]
    fn parse_errors() {
        assert!(parse_qdimacs("e 1 0\n").is_err());
        assert!(parse_qdimacs("p cnf 1 2\n1 0\n").is_err());
        assert!(parse_qdimacs("p cnf 1 1\ne 1\n1 0\n").is_err());
        let q = parse_qdimacs("c hi\np cnf 2 1\na 1 0\n1 2 0\n").unwrap();
        assert_eq!(q.blocks[0], block(Quant::Exists, &[2]));
    }
}
