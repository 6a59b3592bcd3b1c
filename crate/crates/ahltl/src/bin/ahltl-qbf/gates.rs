//! Gate recovery for clausified queries.
//!
//! A variable of the innermost existential block that is the largest
//! variable of some clauses is treated as the output of a gate defined by
//! those clauses. Full definitions (both directions of an and/or gate) are
//! substituted outright. One-sided definitions `g -> A` (or `A -> g`) are
//! substituted when every remaining occurrence of `g` has the matching
//! polarity, which makes the substitution equisatisfiable. Definitions only
//! mention smaller variables, so substitution terminates.

use std::collections::{BTreeMap, BTreeSet};

use ahltl_core::qbf::{Circuit, Node, NodeId, QbfQuery, Quant, QuantBlock, Var, Witness};

type Clauses = Vec<Vec<i64>>;

const POS: u8 = 1;
const NEG: u8 = 2;

#[derive(Debug, Clone)]
enum Def {
    /// `g <-> and(lits)` or `g <-> or(lits)`.
    Func { is_and: bool, lits: Vec<i64> },
    /// `g -> and of clauses`.
    Upper(Vec<Vec<i64>>),
    /// `and of clauses -> g`, i.e. `!g -> ...`.
    Lower(Vec<Vec<i64>>),
}

pub struct Recovered {
    pub query: QbfQuery,
    defs: BTreeMap<u32, Def>,
}

fn clauses_of(q: &QbfQuery) -> Option<Vec<Vec<i64>>> {
    let c = &q.circuit;
    let lit = |n: NodeId| match c.node(n) {
        Node::Var(v) => Some(v.0 as i64),
        Node::Not(x) => match c.node(*x) {
            Node::Var(v) => Some(-(v.0 as i64)),
            _ => None,
        },
        _ => None,
    };
    let clause = |n: NodeId| match c.node(n) {
        Node::Or(ls) => ls.iter().map(|&l| lit(l)).collect(),
        _ => lit(n).map(|l| vec![l]),
    };
    match c.node(q.root) {
        Node::True => Some(Vec::new()),
        Node::False => Some(vec![Vec::new()]),
        Node::And(cs) => cs.iter().map(|&n| clause(n)).collect(),
        _ => clause(q.root).map(|cl| vec![cl]),
    }
}

fn head(cl: &[i64]) -> u32 {
    cl.iter().map(|l| l.unsigned_abs() as u32).max().unwrap_or(0)
}

fn func_def(g: i64, pos: &[Vec<i64>], neg: &[Vec<i64>]) -> Option<Def> {
    // and: (-g, l) for each l, plus (g, -l1, ..., -ln)
    let try_and = |g: i64, bins: &[Vec<i64>], long: &[Vec<i64>]| -> Option<Vec<i64>> {
        if long.len() != 1 || bins.iter().any(|c| c.len() != 2) {
            return None;
        }
        let ls: BTreeSet<i64> = bins.iter().map(|c| if c[0] == -g { c[1] } else { c[0] }).collect();
        let back: BTreeSet<i64> = long[0].iter().filter(|&&l| l != g).map(|&l| -l).collect();
        (ls == back && !ls.is_empty()).then(|| ls.into_iter().collect())
    };
    if let Some(lits) = try_and(g, neg, pos) {
        return Some(Def::Func { is_and: true, lits });
    }
    // or is the and of the negated output
    try_and(-g, pos, neg).map(|ls| Def::Func {
        is_and: false,
        lits: ls.into_iter().map(|l| -l).collect(),
    })
}

/// Rebuilds a circuit from a clausified query, or `None` when the matrix is
/// not a clause set or no gate can be recovered soundly.
pub fn recover(q: &QbfQuery) -> Option<Recovered> {
    let clauses = clauses_of(q)?;
    let blocks = q.merged_blocks();
    let inner: BTreeSet<u32> = match blocks.last() {
        Some(b) if b.quant == Quant::Exists => b.vars.iter().map(|v| v.0).collect(),
        _ => return None,
    };

    // clauses headed by each variable: (containing g, containing -g)
    let mut owned: BTreeMap<u32, (Clauses, Clauses)> = BTreeMap::new();
    let mut top: Vec<Vec<i64>> = Vec::new();
    for cl in clauses {
        let h = head(&cl);
        if cl.len() < 2 || !inner.contains(&h) {
            top.push(cl);
            continue;
        }
        let e = owned.entry(h).or_default();
        if cl.contains(&(h as i64)) {
            e.0.push(cl);
        } else {
            e.1.push(cl);
        }
    }

    let mut defs: BTreeMap<u32, Def> = BTreeMap::new();
    for (&g, (pos, neg)) in &owned {
        let gl = g as i64;
        let def = if neg.is_empty() {
            Def::Lower(pos.iter().map(|c| c.iter().copied().filter(|&l| l != gl).collect()).collect())
        } else if pos.is_empty() {
            Def::Upper(neg.iter().map(|c| c.iter().copied().filter(|&l| l != -gl).collect()).collect())
        } else if let Some(d) = func_def(gl, pos, neg) {
            d
        } else {
            top.extend(pos.iter().cloned());
            top.extend(neg.iter().cloned());
            continue;
        };
        defs.insert(g, def);
    }
    if defs.is_empty() {
        return None;
    }

    // polarity of every defined variable, parents (larger ids) first
    let mut pol: BTreeMap<u32, u8> = BTreeMap::new();
    let mark = |pol: &mut BTreeMap<u32, u8>, l: i64, p: u8| {
        let v = l.unsigned_abs() as u32;
        let p = if l < 0 { ((p & POS) << 1) | ((p & NEG) >> 1) } else { p };
        *pol.entry(v).or_insert(0) |= p;
    };
    for cl in &top {
        for &l in cl {
            mark(&mut pol, l, POS);
        }
    }
    for (&g, def) in defs.iter().rev() {
        let p = pol.get(&g).copied().unwrap_or(0);
        match def {
            Def::Func { lits, .. } => lits.iter().for_each(|&l| mark(&mut pol, l, p)),
            Def::Upper(cls) => {
                if p & NEG != 0 {
                    return None;
                }
                cls.iter().flatten().for_each(|&l| mark(&mut pol, l, p));
            }
            Def::Lower(cls) => {
                if p & POS != 0 {
                    return None;
                }
                let flipped = (p & NEG) >> 1;
                cls.iter().flatten().for_each(|&l| mark(&mut pol, l, flipped));
            }
        }
    }

    let mut c = Circuit::new();
    let mut memo: BTreeMap<u32, NodeId> = BTreeMap::new();
    // ascending ids: definitions only mention smaller variables
    for (&g, def) in &defs {
        let node = match def {
            Def::Func { is_and, lits } => {
                let ls = lits.iter().map(|&l| lit_node(&mut c, &memo, l)).collect();
                if *is_and {
                    c.and(ls)
                } else {
                    c.or(ls)
                }
            }
            Def::Upper(cls) => cnf_node(&mut c, &memo, cls),
            Def::Lower(cls) => {
                let n = cnf_node(&mut c, &memo, cls);
                c.not(n)
            }
        };
        memo.insert(g, node);
    }
    let root = cnf_node(&mut c, &memo, &top);
    let new_blocks: Vec<QuantBlock> = blocks
        .into_iter()
        .map(|b| QuantBlock {
            quant: b.quant,
            vars: b.vars.into_iter().filter(|v| !defs.contains_key(&v.0)).collect(),
        })
        .filter(|b| !b.vars.is_empty())
        .collect();
    let mut query = QbfQuery::new(c, root, new_blocks);
    query.num_vars = query.num_vars.max(q.num_vars);
    Some(Recovered { query, defs })
}

fn lit_node(c: &mut Circuit, memo: &BTreeMap<u32, NodeId>, l: i64) -> NodeId {
    let v = l.unsigned_abs() as u32;
    let n = match memo.get(&v) {
        Some(&n) => n,
        None => c.var(Var(v)),
    };
    if l < 0 {
        c.not(n)
    } else {
        n
    }
}

fn cnf_node(c: &mut Circuit, memo: &BTreeMap<u32, NodeId>, cls: &[Vec<i64>]) -> NodeId {
    let mut conj = Vec::with_capacity(cls.len());
    for cl in cls {
        let ls = cl.iter().map(|&l| lit_node(c, memo, l)).collect();
        conj.push(c.or(ls));
    }
    c.and(conj)
}

impl Recovered {
    /// Adds values for the eliminated variables among `leading`, obtained by
    /// evaluating their definitions.
    pub fn complete(&self, w: &mut Witness, leading: &[Var]) {
        let mut val: BTreeMap<u32, bool> = w.assignment.iter().map(|&(v, b)| (v.0, b)).collect();
        let get = |val: &BTreeMap<u32, bool>, l: i64| {
            let b = val.get(&(l.unsigned_abs() as u32)).copied().unwrap_or(false);
            if l < 0 {
                !b
            } else {
                b
            }
        };
        for (&g, def) in &self.defs {
            let cnf = |cls: &[Vec<i64>]| cls.iter().all(|cl| cl.iter().any(|&l| get(&val, l)));
            let b = match def {
                Def::Func { is_and: true, lits } => lits.iter().all(|&l| get(&val, l)),
                Def::Func { is_and: false, lits } => lits.iter().any(|&l| get(&val, l)),
                Def::Upper(cls) => cnf(cls),
                Def::Lower(cls) => !cnf(cls),
            };
            val.insert(g, b);
        }
        for v in leading {
            if self.defs.contains_key(&v.0) {
                w.assignment.push((*v, val[&v.0]));
            }
        }
        w.assignment.sort();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ahltl_core::qbf::{eval_expand, parse_qdimacs, to_qdimacs, ExpandResult};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_query(rng: &mut StdRng) -> QbfQuery {
        let nv = rng.gen_range(2..=7u32);
        let mut c = Circuit::new();
        let mut pool: Vec<NodeId> = (1..=nv).map(|v| c.var(Var(v))).collect();
        for _ in 0..rng.gen_range(1..10) {
            let a = pool[rng.gen_range(0..pool.len())];
            let b = pool[rng.gen_range(0..pool.len())];
            let a = if rng.gen() { c.not(a) } else { a };
            let g = if rng.gen() { c.and2(a, b) } else { c.or2(a, b) };
            pool.push(g);
        }
        let root = *pool.last().unwrap();
        let mut blocks = Vec::new();
        for v in 1..=nv {
            let quant = if rng.gen() { Quant::Exists } else { Quant::Forall };
            match blocks.last_mut() {
                Some(QuantBlock { quant: q, vars }) if *q == quant => vars.push(Var(v)),
                _ => blocks.push(QuantBlock { quant, vars: vec![Var(v)] }),
            }
        }
        QbfQuery::new(c, root, blocks)
    }

    fn truth(r: ExpandResult) -> bool {
        match r {
            ExpandResult::Sat(_) => true,
            ExpandResult::Unsat(_) => false,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn recovery_preserves_truth() {
        let mut rng = StdRng::seed_from_u64(7);
        let mut recovered = 0;
        for _ in 0..400 {
            let q = random_query(&mut rng);
            let cnf = parse_qdimacs(&to_qdimacs(&q)).unwrap();
            let expected = truth(eval_expand(&q, 1_000_000));
            assert_eq!(truth(eval_expand(&cnf, 1_000_000)), expected);
            if let Some(r) = recover(&cnf) {
                recovered += 1;
                assert_eq!(truth(eval_expand(&r.query, 1_000_000)), expected);
            }
        }
        assert!(recovered > 300);
    }

    #[test]
    fn witnesses_are_completed() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let q = random_query(&mut rng);
            let cnf = parse_qdimacs(&to_qdimacs(&q)).unwrap();
            let Some(r) = recover(&cnf) else { continue };
            let lead = &cnf.merged_blocks()[0];
            if lead.quant != Quant::Exists || cnf.merged_blocks().len() != 1 {
                continue;
            }
            if let ExpandResult::Sat(mut w) = eval_expand(&r.query, 1_000_000) {
                r.complete(&mut w, &lead.vars);
                let val: BTreeMap<Var, bool> = w.assignment.iter().copied().collect();
                assert!(cnf.circuit.eval(cnf.root, &|v| val.get(&v).copied().unwrap_or(false)));
            }
        }
    }

    #[test]
    fn unsound_one_sided_use_is_rejected() {
        // 3 -> 1 is one-sided, but 3 is also used negatively by 4's full definition
        let text = "p cnf 4 6\ne 1 2 3 4 0\n-3 1 0\n-4 2 0\n-4 -3 0\n4 -2 3 0\n4 0\n2 0\n";
        let cnf = parse_qdimacs(text).unwrap();
        let expected = truth(eval_expand(&cnf, 1000));
        if let Some(r) = recover(&cnf) {
            assert_eq!(truth(eval_expand(&r.query, 1000)), expected);
        }
    }
}
