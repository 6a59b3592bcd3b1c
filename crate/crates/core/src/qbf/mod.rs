//! Hash-consed Boolean circuits and prenex QBF queries.

mod expand;
mod qcir;
mod qdimacs;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;
use thiserror::Error;

pub use crate::formula::Quant;
pub use expand::{eval_expand, eval_expand_with, ExpandConfig, ExpandResult, Witness};
pub use qcir::{parse_qcir, to_qcir};
pub use qdimacs::{parse_qdimacs, to_qdimacs};

/// Boolean variable, numbered from 1 as in the QCIR and QDIMACS formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    True,
    False,
    Var(Var),
    Not(NodeId),
    And(Vec<NodeId>),
    Or(Vec<NodeId>),
}

/// A DAG of gates with structural hashing. Children are always created
/// before their parents, so ascending ids are a topological order.
///
/// Construction applies constant folding, double negation elimination,
/// flattening of nested gates of the same kind, duplicate removal and
/// complementary-literal detection. Nothing else is rewritten.
#[derive(Debug, Clone)]
pub struct Circuit {
    nodes: Vec<Node>,
    index: HashMap<Node, NodeId>,
}

impl Default for Circuit {
    fn default() -> Self {
        Self::new()
    }
}

impl Circuit {
    const TRUE: NodeId = NodeId(0);
    const FALSE: NodeId = NodeId(1);

    pub fn new() -> Self {
        let mut c = Circuit {
            nodes: Vec::new(),
            index: HashMap::new(),
        };
        c.intern(Node::True);
        c.intern(Node::False);
        c
    }

    fn intern(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(n.clone());
        self.index.insert(n, id);
        id
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn tt(&self) -> NodeId {
        Self::TRUE
    }

    pub fn ff(&self) -> NodeId {
        Self::FALSE
    }

    pub fn constant(&self, b: bool) -> NodeId {
        if b {
            Self::TRUE
        } else {
            Self::FALSE
        }
    }

    pub fn var(&mut self, v: Var) -> NodeId {
        self.intern(Node::Var(v))
    }

    pub fn lit(&mut self, v: Var, positive: bool) -> NodeId {
        let x = self.var(v);
        if positive {
            x
        } else {
            self.not(x)
        }
    }

    pub fn not(&mut self, x: NodeId) -> NodeId {
        match self.node(x) {
            Node::True => Self::FALSE,
            Node::False => Self::TRUE,
            Node::Not(y) => *y,
            _ => self.intern(Node::Not(x)),
        }
    }

    fn gate(&mut self, is_and: bool, children: Vec<NodeId>) -> NodeId {
        let (unit, zero) = if is_and {
            (Self::TRUE, Self::FALSE)
        } else {
            (Self::FALSE, Self::TRUE)
        };
        let mut flat = Vec::with_capacity(children.len());
        for c in children {
            if c == zero {
                return zero;
            }
            if c == unit {
                continue;
            }
            match self.node(c) {
                Node::And(gs) if is_and => flat.extend_from_slice(gs),
                Node::Or(gs) if !is_and => flat.extend_from_slice(gs),
                _ => flat.push(c),
            }
        }
        flat.sort_unstable();
        flat.dedup();
        for &c in &flat {
            if let Node::Not(y) = self.node(c) {
                if flat.binary_search(y).is_ok() {
                    return zero;
                }
            }
        }
        match flat.len() {
            0 => unit,
            1 => flat[0],
            _ => self.intern(if is_and {
                Node::And(flat)
            } else {
                Node::Or(flat)
            }),
        }
    }

    pub fn and(&mut self, children: Vec<NodeId>) -> NodeId {
        self.gate(true, children)
    }

    pub fn or(&mut self, children: Vec<NodeId>) -> NodeId {
        self.gate(false, children)
    }

    pub fn and2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.gate(true, vec![a, b])
    }

    pub fn or2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.gate(false, vec![a, b])
    }

    pub fn implies(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let na = self.not(a);
        self.or2(na, b)
    }

    pub fn iff(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let ab = self.and2(a, b);
        let na = self.not(a);
        let nb = self.not(b);
        let nab = self.and2(na, nb);
        self.or2(ab, nab)
    }

    /// Reachable nodes from `root`, children before parents.
    pub fn reachable(&self, root: NodeId) -> Vec<NodeId> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![root];
        seen[root.index()] = true;
        while let Some(n) = stack.pop() {
            let mut push = |c: NodeId| {
                if !seen[c.index()] {
                    seen[c.index()] = true;
                    stack.push(c);
                }
            };
            match self.node(n) {
                Node::Not(c) => push(*c),
                Node::And(cs) | Node::Or(cs) => cs.iter().for_each(|&c| push(c)),
                _ => {}
            }
        }
        (0..self.nodes.len() as u32)
            .map(NodeId)
            .filter(|n| seen[n.index()])
            .collect()
    }

    /// Variables occurring under `root`.
    pub fn vars(&self, root: NodeId) -> BTreeSet<Var> {
        self.reachable(root)
            .into_iter()
            .filter_map(|n| match self.node(n) {
                Node::Var(v) => Some(*v),
                _ => None,
            })
            .collect()
    }

    /// Evaluates `root` under a total assignment.
    pub fn eval(&self, root: NodeId, value: &dyn Fn(Var) -> bool) -> bool {
        let order = self.reachable(root);
        let mut val: HashMap<NodeId, bool> = HashMap::with_capacity(order.len());
        for n in order {
            let v = match self.node(n) {
                Node::True => true,
                Node::False => false,
                Node::Var(x) => value(*x),
                Node::Not(c) => !val[c],
                Node::And(cs) => cs.iter().all(|c| val[c]),
                Node::Or(cs) => cs.iter().any(|c| val[c]),
            };
            val.insert(n, v);
        }
        val[&root]
    }

    /// Number of gates (And/Or) reachable from `root`.
    pub fn gate_count(&self, root: NodeId) -> usize {
        self.reachable(root)
            .into_iter()
            .filter(|&n| matches!(self.node(n), Node::And(_) | Node::Or(_)))
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantBlock {
    pub quant: Quant,
    pub vars: Vec<Var>,
}

/// A prenex QBF: quantifier blocks (outermost first) over a circuit matrix.
#[derive(Debug, Clone)]
pub struct QbfQuery {
    pub circuit: Circuit,
    pub root: NodeId,
    pub blocks: Vec<QuantBlock>,
    pub num_vars: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QbfError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("variable {0} is quantified more than once")]
    Rebound(Var),
    #[error("variable {0} occurs in the matrix but is not quantified")]
    Free(Var),
}

impl QbfQuery {
    pub fn new(circuit: Circuit, root: NodeId, blocks: Vec<QuantBlock>) -> Self {
        let mut num_vars = blocks
            .iter()
            .flat_map(|b| b.vars.iter().map(|v| v.0))
            .max()
            .unwrap_or(0);
        if let Some(v) = circuit.vars(root).iter().next_back() {
            num_vars = num_vars.max(v.0);
        }
        QbfQuery {
            circuit,
            root,
            blocks,
            num_vars,
        }
    }

    /// Every matrix variable bound exactly once.
    pub fn validate(&self) -> Result<(), QbfError> {
        let mut bound = BTreeSet::new();
        for b in &self.blocks {
            for &v in &b.vars {
                if !bound.insert(v) {
                    return Err(QbfError::Rebound(v));
                }
            }
        }
        for v in self.circuit.vars(self.root) {
            if !bound.contains(&v) {
                return Err(QbfError::Free(v));
            }
        }
        Ok(())
    }

    /// Quantifier of `v`, if bound.
    pub fn quant_of(&self, v: Var) -> Option<Quant> {
        self.blocks
            .iter()
            .find(|b| b.vars.contains(&v))
            .map(|b| b.quant)
    }

    /// Blocks with empty blocks dropped and adjacent blocks of the same
    /// quantifier merged (variables sorted within a merged block).
    pub fn merged_blocks(&self) -> Vec<QuantBlock> {
        let mut out: Vec<QuantBlock> = Vec::new();
        for b in self.blocks.iter().filter(|b| !b.vars.is_empty()) {
            match out.last_mut() {
                Some(last) if last.quant == b.quant => last.vars.extend_from_slice(&b.vars),
                _ => out.push(b.clone()),
            }
        }
        for b in &mut out {
            b.vars.sort_unstable();
        }
        out
    }

    pub fn num_gates(&self) -> usize {
        self.circuit.gate_count(self.root)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folding_and_sharing() {
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let y = c.var(Var(2));
        let nx = c.not(x);
        assert_eq!(c.not(nx), x);
        assert_eq!(c.and2(x, nx), c.ff());
        assert_eq!(c.or2(x, nx), c.tt());
        let tt = c.tt();
        assert_eq!(c.and2(x, tt), x);
        let a = c.and2(x, y);
        let b = c.and2(y, x);
        assert_eq!(a, b);
        let z = c.var(Var(3));
        let nested = c.and2(a, z);
        assert_eq!(c.node(nested), &Node::And(vec![x, y, z]));
        assert_eq!(c.and(vec![]), c.tt());
        assert_eq!(c.or(vec![]), c.ff());
    }

    #[test]
    fn eval_and_validate() {
        let mut c = Circuit::new();
        let x = c.var(Var(1));
        let y = c.var(Var(2));
        let root = c.iff(x, y);
        assert!(c.eval(root, &|v| v.0 == 1 || v.0 == 2));
        assert!(!c.eval(root, &|v| v.0 == 1));
        let q = QbfQuery::new(
            c.clone(),
            root,
            vec![QuantBlock {
                quant: Quant::Forall,
                vars: vec![Var(1)],
            }],
        );
        assert_eq!(q.validate(), Err(QbfError::Free(Var(2))));
        assert_eq!(q.num_vars, 2);
    }
}
