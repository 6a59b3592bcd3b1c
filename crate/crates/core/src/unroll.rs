//! Unrolling of a Kripke structure into `k + 1` copies of binary-encoded
//! state variables.

use alloc::vec::Vec;

use hashbrown::HashMap;
use thiserror::Error;

use crate::model::{KripkeModel, PropId, StateId};
use crate::qbf::{Circuit, NodeId, Var};

/// Hands out fresh QBF variables, starting at 1.
#[derive(Debug, Clone)]
pub struct VariableAllocator {
    next: u32,
}

impl Default for VariableAllocator {
    fn default() -> Self {
        Self::new()
    }
}

impl VariableAllocator {
    pub fn new() -> Self {
        VariableAllocator { next: 1 }
    }

    pub fn fresh(&mut self) -> Var {
        let v = Var(self.next);
        self.next += 1;
        v
    }

    /// Number of variables allocated so far.
    pub fn count(&self) -> u32 {
        self.next - 1
    }
}

/// State bits `bits[i][b]` of one trace variable, for steps `i` in `0..=k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBank {
    pub trace: usize,
    pub bits: Vec<Vec<Var>>,
}

impl VarBank {
    pub fn all_vars(&self) -> impl Iterator<Item = Var> + '_ {
        self.bits.iter().flatten().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("proposition `{prop}` is not declared in model `{model}`")]
pub struct UnknownProp {
    pub prop: alloc::string::String,
    pub model: alloc::string::String,
}

/// A trace variable's unrolling: its variable bank and the constraint
/// `I(x^0) ∧ R(x^0,x^1) ∧ … ∧ R(x^{k-1},x^k)` together with a validity
/// clause per step after the first.
#[derive(Debug, Clone)]
pub struct UnrolledModel<'m> {
    pub model: &'m KripkeModel,
    pub bank: VarBank,
    pub k: usize,
    pub constraint: NodeId,
    width: usize,
    props: HashMap<(PropId, usize), NodeId>,
}

fn width_for(n: usize) -> usize {
    let mut w = 0;
    while (1usize << w) < n {
        w += 1;
    }
    w
}

/// Unrolls `model` for trace variable `trace` up to depth `k`.
pub fn unroll<'m>(
    c: &mut Circuit,
    model: &'m KripkeModel,
    trace: usize,
    k: usize,
    alloc: &mut VariableAllocator,
) -> UnrolledModel<'m> {
    let width = width_for(model.num_states());
    let bits = (0..=k)
        .map(|_| (0..width).map(|_| alloc.fresh()).collect())
        .collect();
    let mut u = UnrolledModel {
        model,
        bank: VarBank { trace, bits },
        k,
        constraint: c.tt(),
        width,
        props: HashMap::new(),
    };
    let mut parts = Vec::with_capacity(2 * k + 2);
    parts.push(u.state_cube(c, model.init(), 0));
    for i in 1..=k {
        let valid: Vec<NodeId> = model.states().map(|s| u.state_cube(c, s, i)).collect();
        parts.push(c.or(valid));
    }
    for i in 0..k {
        let mut trans = Vec::new();
        for s in model.states() {
            let here = u.state_cube(c, s, i);
            let succ: Vec<NodeId> = model
                .successors(s)
                .iter()
                .map(|&t| u.state_cube(c, t, i + 1))
                .collect();
            let next = c.or(succ);
            trans.push(c.and2(here, next));
        }
        parts.push(c.or(trans));
    }
    u.constraint = c.and(parts);
    u
}

impl UnrolledModel<'_> {
    pub fn width(&self) -> usize {
        self.width
    }

    /// Conjunction of bit literals identifying state `s` at step `i`.
    pub fn state_cube(&self, c: &mut Circuit, s: StateId, i: usize) -> NodeId {
        let lits = (0..self.width)
            .map(|b| c.lit(self.bank.bits[i][b], (s.0 >> b) & 1 == 1))
            .collect();
        c.and(lits)
    }

    /// Formula over the step-`i` bits that holds exactly on states labeled
    /// with `p`.
    pub fn prop_id_literal(&mut self, c: &mut Circuit, p: PropId, i: usize) -> NodeId {
        if let Some(&n) = self.props.get(&(p, i)) {
            return n;
        }
        let labeled: Vec<StateId> = self.model.states().filter(|&s| self.model.holds(s, p)).collect();
        let n = if labeled.len() == self.model.num_states() {
            c.tt()
        } else if labeled.is_empty() {
            c.ff()
        } else {
            let cubes = labeled.iter().map(|&s| self.state_cube(c, s, i)).collect();
            c.or(cubes)
        };
        self.props.insert((p, i), n);
        n
    }

    pub fn prop_literal(&mut self, c: &mut Circuit, prop: &str, i: usize) -> Result<NodeId, UnknownProp> {
        let p = self.model.prop_id(prop).ok_or_else(|| UnknownProp {
            prop: prop.into(),
            model: self.model.name().into(),
        })?;
        Ok(self.prop_id_literal(c, p, i))
    }

    pub fn halt_literal(&mut self, c: &mut Circuit, i: usize) -> NodeId {
        let h = self.model.halt_prop();
        self.prop_id_literal(c, h, i)
    }

    /// Reads back the state sequence from an assignment of the bank's bits.
    /// Returns `None` if some step holds an unused bit pattern.
    pub fn decode(&self, value: &dyn Fn(Var) -> bool) -> Option<Vec<StateId>> {
        (0..=self.k)
            .map(|i| {
                let mut s = 0u32;
                for b in 0..self.width {
                    if value(self.bank.bits[i][b]) {
                        s |= 1 << b;
                    }
                }
                ((s as usize) < self.model.num_states()).then_some(StateId(s))
            })
            .collect()
    }
}
