//! Expansion-based QBF evaluation.
//!
//! The matrix is imported into a private negation-normal-form store where
//! literals refer to prefix ranks instead of variables. Evaluation branches on
//! the outermost remaining variable, simplifies top-level unit literals and
//! memoizes the truth value of every residual formula it meets. Residuals are
//! hash-consed, so different partial assignments that lead to the same
//! residual are solved once.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use super::{Node, QbfQuery, Quant, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct Id(u32);

const TRUE: Id = Id(0);
const FALSE: Id = Id(1);

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum E {
    Const(bool),
    Lit(u32, bool),
    And(Vec<Id>),
    Or(Vec<Id>),
}

#[derive(Debug, Clone, Copy)]
struct Meta {
    min: u32,
    max: u32,
    sig: u64,
}

/// Assignment of the leading quantifier block reported with a verdict.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Witness {
    pub assignment: Vec<(Var, bool)>,
}

impl Witness {
    pub fn get(&self, v: Var) -> Option<bool> {
        self.assignment
            .iter()
            .find(|(x, _)| *x == v)
            .map(|&(_, b)| b)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpandResult {
    /// True. The witness assigns the leading existential block (empty when
    /// the prefix starts with a universal block).
    Sat(Witness),
    /// False. The witness assigns the leading universal block to values that
    /// falsify the rest (empty when the prefix starts existentially).
    Unsat(Witness),
    BudgetExceeded,
    Interrupted,
}

pub struct ExpandConfig<'a> {
    /// Maximum number of nodes in the evaluator's store.
    pub budget: usize,
    /// Polled periodically; returning true aborts with `Interrupted`.
    pub interrupt: Option<&'a dyn Fn() -> bool>,
}

impl Default for ExpandConfig<'_> {
    fn default() -> Self {
        ExpandConfig {
            budget: 5_000_000,
            interrupt: None,
        }
    }
}

#[derive(Debug)]
enum Stop {
    Budget,
    Interrupt,
}

struct Store<'a> {
    nodes: Vec<E>,
    meta: Vec<Meta>,
    index: HashMap<E, Id>,
    quant: Vec<Quant>,
    bucket_shift: u32,
    memo: HashMap<Id, bool>,
    budget: usize,
    interrupt: Option<&'a dyn Fn() -> bool>,
    ticks: u64,
}

struct Assign {
    lits: Vec<(u32, bool)>,
    min: u32,
    max: u32,
    sig: u64,
}

impl<'a> Store<'a> {
    fn new(quant: Vec<Quant>, cfg: &ExpandConfig<'a>) -> Self {
        let n = quant.len().max(1) as u32;
        // contiguous rank ranges share a signature bit
        let mut bucket_shift = 0;
        while (n - 1) >> bucket_shift >= 64 {
            bucket_shift += 1;
        }
        let mut s = Store {
            nodes: Vec::new(),
            meta: Vec::new(),
            index: HashMap::new(),
            quant,
            bucket_shift,
            memo: HashMap::new(),
            budget: cfg.budget,
            interrupt: cfg.interrupt,
            ticks: 0,
        };
        s.intern(E::Const(true));
        s.intern(E::Const(false));
        s
    }

    fn bit(&self, rank: u32) -> u64 {
        1u64 << (rank >> self.bucket_shift)
    }

    fn intern(&mut self, e: E) -> Id {
        if let Some(&id) = self.index.get(&e) {
            return id;
        }
        let meta = match &e {
            E::Const(_) => Meta {
                min: u32::MAX,
                max: 0,
                sig: 0,
            },
            E::Lit(r, _) => Meta {
                min: *r,
                max: *r,
                sig: self.bit(*r),
            },
            E::And(cs) | E::Or(cs) => cs.iter().fold(
                Meta {
                    min: u32::MAX,
                    max: 0,
                    sig: 0,
                },
                |acc, c| {
                    let m = self.meta[c.0 as usize];
                    Meta {
                        min: acc.min.min(m.min),
                        max: acc.max.max(m.max),
                        sig: acc.sig | m.sig,
                    }
                },
            ),
        };
        let id = Id(self.nodes.len() as u32);
        self.nodes.push(e.clone());
        self.meta.push(meta);
        self.index.insert(e, id);
        id
    }

    fn lit(&mut self, rank: u32, positive: bool) -> Id {
        self.intern(E::Lit(rank, positive))
    }

    fn gate(&mut self, is_and: bool, children: Vec<Id>) -> Id {
        let (unit, zero) = if is_and { (TRUE, FALSE) } else { (FALSE, TRUE) };
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            if c == zero {
                return zero;
            }
            if c == unit {
                continue;
            }
            match &self.nodes[c.0 as usize] {
                E::And(gs) if is_and => flat.extend_from_slice(gs),
                E::Or(gs) if !is_and => flat.extend_from_slice(gs),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        let mut lits: Vec<(u32, bool)> = flat
            .iter()
            .filter_map(|c| match self.nodes[c.0 as usize] {
                E::Lit(r, p) => Some((r, p)),
                _ => None,
            })
            .collect();
        lits.sort_unstable();
        if lits.windows(2).any(|w| w[0].0 == w[1].0) {
            return zero;
        }
        match flat.len() {
            0 => unit,
            1 => flat[0],
            _ => self.intern(if is_and { E::And(flat) } else { E::Or(flat) }),
        }
    }

    fn cofactor(&mut self, f: Id, a: &Assign, cache: &mut HashMap<Id, Id>) -> Id {
        let m = self.meta[f.0 as usize];
        if m.sig & a.sig == 0 || m.max < a.min || m.min > a.max {
            return f;
        }
        if let Some(&r) = cache.get(&f) {
            return r;
        }
        let r = match self.nodes[f.0 as usize].clone() {
            E::Const(_) => f,
            E::Lit(rank, pos) => match a.lits.binary_search_by_key(&rank, |&(r, _)| r) {
                Ok(i) => {
                    if a.lits[i].1 == pos {
                        TRUE
                    } else {
                        FALSE
                    }
                }
                Err(_) => f,
            },
            E::And(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    let x = self.cofactor(c, a, cache);
                    if x == FALSE {
                        cache.insert(f, FALSE);
                        return FALSE;
                    }
                    out.push(x);
                }
                self.gate(true, out)
            }
            E::Or(cs) => {
                let mut out = Vec::with_capacity(cs.len());
                for c in cs {
                    let x = self.cofactor(c, a, cache);
                    if x == TRUE {
                        cache.insert(f, TRUE);
                        return TRUE;
                    }
                    out.push(x);
                }
                self.gate(false, out)
            }
        };
        cache.insert(f, r);
        r
    }

    fn assign(&mut self, f: Id, mut lits: Vec<(u32, bool)>) -> Result<Id, Stop> {
        lits.sort_unstable();
        lits.dedup();
        let a = Assign {
            min: lits.first().map_or(0, |l| l.0),
            max: lits.last().map_or(0, |l| l.0),
            sig: lits.iter().fold(0, |s, l| s | self.bit(l.0)),
            lits,
        };
        let mut cache = HashMap::new();
        let r = self.cofactor(f, &a, &mut cache);
        if self.nodes.len() > self.budget {
            return Err(Stop::Budget);
        }
        Ok(r)
    }

    fn solve(&mut self, f: Id) -> Result<bool, Stop> {
        if let E::Const(b) = self.nodes[f.0 as usize] {
            return Ok(b);
        }
        if let Some(&b) = self.memo.get(&f) {
            return Ok(b);
        }
        self.ticks += 1;
        if self.ticks.is_multiple_of(256) {
            if let Some(stop) = self.interrupt {
                if stop() {
                    return Err(Stop::Interrupt);
                }
            }
        }
        let r = self.solve_inner(f)?;
        self.memo.insert(f, r);
        Ok(r)
    }

    fn solve_inner(&mut self, f: Id) -> Result<bool, Stop> {
        // top-level unit literals
        let mut units = Vec::new();
        match &self.nodes[f.0 as usize] {
            E::Lit(r, _) => return Ok(self.quant[*r as usize] == Quant::Exists),
            E::And(cs) => {
                for c in cs {
                    if let E::Lit(r, p) = self.nodes[c.0 as usize] {
                        if self.quant[r as usize] == Quant::Forall {
                            return Ok(false);
                        }
                        units.push((r, p));
                    }
                }
            }
            E::Or(cs) => {
                for c in cs {
                    if let E::Lit(r, p) = self.nodes[c.0 as usize] {
                        if self.quant[r as usize] == Quant::Exists {
                            return Ok(true);
                        }
                        units.push((r, !p));
                    }
                }
            }
            E::Const(b) => return Ok(*b),
        }
        if !units.is_empty() {
            let g = self.assign(f, units)?;
            return self.solve(g);
        }
        let r = self.meta[f.0 as usize].min;
        let f0 = self.assign(f, vec![(r, false)])?;
        let f1 = self.assign(f, vec![(r, true)])?;
        if f0 == f1 {
            return self.solve(f0);
        }
        match self.quant[r as usize] {
            Quant::Exists => Ok(self.solve(f1)? || self.solve(f0)?),
            Quant::Forall => Ok(self.solve(f0)? && self.solve(f1)?),
        }
    }
}

/// Evaluates a query with the default configuration and the given node
/// budget.
pub fn eval_expand(q: &QbfQuery, budget: usize) -> ExpandResult {
    eval_expand_with(
        q,
        &ExpandConfig {
            budget,
            interrupt: None,
        },
    )
}

pub fn eval_expand_with(q: &QbfQuery, cfg: &ExpandConfig<'_>) -> ExpandResult {
    // ranks: merged blocks in order, variables sorted inside each block;
    // unbound matrix variables are treated as outermost existentials
    let blocks = q.merged_blocks();
    let mut order: Vec<(Var, Quant)> = Vec::new();
    let matrix_vars = q.circuit.vars(q.root);
    let bound: alloc::collections::BTreeSet<Var> =
        blocks.iter().flat_map(|b| b.vars.iter().copied()).collect();
    for &v in matrix_vars.iter().filter(|v| !bound.contains(v)) {
        order.push((v, Quant::Exists));
    }
    for b in &blocks {
        for &v in &b.vars {
            order.push((v, b.quant));
        }
    }
    let mut rank_of: HashMap<Var, u32> = HashMap::with_capacity(order.len());
    for (i, &(v, _)) in order.iter().enumerate() {
        rank_of.insert(v, i as u32);
    }
    let mut st = Store::new(order.iter().map(|&(_, q)| q).collect(), cfg);

    // import with negations pushed to the literals
    let c = &q.circuit;
    let reach = c.reachable(q.root);
    let mut pos: HashMap<super::NodeId, Id> = HashMap::with_capacity(reach.len());
    let mut neg: HashMap<super::NodeId, Id> = HashMap::with_capacity(reach.len());
    for &n in &reach {
        let (p, m) = match c.node(n) {
            Node::True => (TRUE, FALSE),
            Node::False => (FALSE, TRUE),
            Node::Var(v) => {
                let r = rank_of[v];
                (st.lit(r, true), st.lit(r, false))
            }
            Node::Not(x) => (neg[x], pos[x]),
            Node::And(cs) => {
                let p = cs.iter().map(|x| pos[x]).collect();
                let m = cs.iter().map(|x| neg[x]).collect();
                (st.gate(true, p), st.gate(false, m))
            }
            Node::Or(cs) => {
                let p = cs.iter().map(|x| pos[x]).collect();
                let m = cs.iter().map(|x| neg[x]).collect();
                (st.gate(false, p), st.gate(true, m))
            }
        };
        pos.insert(n, p);
        neg.insert(n, m);
    }
    let root = pos[&q.root];
    if st.nodes.len() > st.budget {
        return ExpandResult::BudgetExceeded;
    }

    let run = |st: &mut Store<'_>| -> Result<ExpandResult, Stop> {
        let verdict = st.solve(root)?;
        // leading block: ranks before the first quantifier change
        let lead_q = order.first().map(|&(_, q)| q);
        let lead_len = order
            .iter()
            .position(|&(_, q)| Some(q) != lead_q)
            .unwrap_or(order.len());
        let extract = match lead_q {
            Some(Quant::Exists) => verdict,
            Some(Quant::Forall) => !verdict,
            None => false,
        };
        let mut w = Witness::default();
        if extract {
            let mut f = root;
            for r in 0..lead_len as u32 {
                let f1 = st.assign(f, vec![(r, true)])?;
                let good = st.solve(f1)? == verdict;
                f = if good {
                    f1
                } else {
                    st.assign(f, vec![(r, false)])?
                };
                w.assignment.push((order[r as usize].0, good));
            }
        }
        Ok(if verdict {
            ExpandResult::Sat(w)
        } else {
            ExpandResult::Unsat(w)
        })
    };
    match run(&mut st) {
        Ok(r) => r,
        Err(Stop::Budget) => ExpandResult::BudgetExceeded,
        Err(Stop::Interrupt) => ExpandResult::Interrupted,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qbf::{Circuit, NodeId, QuantBlock};
    use alloc::vec::Vec;

    fn q1(quant: Quant, build: impl FnOnce(&mut Circuit, NodeId) -> NodeId) -> QbfQuery {
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let root = build(&mut c, x);
        QbfQuery::new(
            c,
            root,
            vec![QuantBlock {
                quant,
                vars: vec![Var(1)],
            }],
        )
    }

    #[test]
    fn trivial() {
        let r = eval_expand(&q1(Quant::Exists, |_, x| x), 1000);
        assert_eq!(
            r,
            ExpandResult::Sat(Witness {
                assignment: vec![(Var(1), true)]
            })
        );
        let r = eval_expand(&q1(Quant::Forall, |_, x| x), 1000);
        assert_eq!(
            r,
            ExpandResult::Unsat(Witness {
                assignment: vec![(Var(1), false)]
            })
        );
        let r = eval_expand(&q1(Quant::Forall, |c, x| c.not(x)), 1000);
        assert_eq!(
            r,
            ExpandResult::Unsat(Witness {
                assignment: vec![(Var(1), true)]
            })
        );
    }

    // brute-force expansion over the prefix
    fn brute(q: &QbfQuery) -> bool {
        let order: Vec<(Var, Quant)> = q
            .blocks
            .iter()
            .flat_map(|b| b.vars.iter().map(move |&v| (v, b.quant)))
            .collect();
        fn go(q: &QbfQuery, order: &[(Var, Quant)], asg: &mut Vec<(Var, bool)>) -> bool {
            match order.split_first() {
                None => q.circuit.eval(q.root, &|v| {
                    asg.iter().find(|(x, _)| *x == v).map_or(false, |p| p.1)
                }),
                Some((&(v, quant), rest)) => {
                    let mut res = [false; 2];
                    for b in [false, true] {
                        asg.push((v, b));
                        res[b as usize] = go(q, rest, asg);
                        asg.pop();
                    }
                    match quant {
                        Quant::Exists => res[0] || res[1],
                        Quant::Forall => res[0] && res[1],
                    }
                }
            }
        }
        go(q, &order, &mut Vec::new())
    }

    #[test]
    fn alternation() {
        // forall x exists y. x <-> y  is true; exists y forall x. x <-> y is false
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let y = c.var(Var(2));
        let root = c.iff(x, y);
        let b = |quant, v| QuantBlock {
            quant,
            vars: vec![Var(v)],
        };
        let fe = QbfQuery::new(
            c.clone(),
            root,
            vec![b(Quant::Forall, 1), b(Quant::Exists, 2)],
        );
        let ef = QbfQuery::new(c, root, vec![b(Quant::Exists, 2), b(Quant::Forall, 1)]);
        assert!(matches!(eval_expand(&fe, 1000), ExpandResult::Sat(_)));
        assert!(matches!(eval_expand(&ef, 1000), ExpandResult::Unsat(_)));
        assert!(brute(&fe));
        assert!(!brute(&ef));
    }

    #[test]
    fn budget() {
        let mut c = Circuit::new();
        let mut terms = Vec::new();
        for i in 1..=8 {
            let a = c.var(Var(i));
            let b = c.var(Var(i + 8));
            terms.push(c.iff(a, b));
        }
        let root = c.and(terms);
        let q = QbfQuery::new(
            c,
            root,
            vec![QuantBlock {
                quant: Quant::Exists,
                vars: (1..=16).map(Var).collect(),
            }],
        );
        assert_eq!(eval_expand(&q, 4), ExpandResult::BudgetExceeded);
        assert!(matches!(eval_expand(&q, 100_000), ExpandResult::Sat(_)));
    }
}
