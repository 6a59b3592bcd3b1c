//! Translation of a formula and its models into a prenex QBF.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::formula::{AhltlFormula, FormulaError, NnfArena, NnfNode, PrefixShape, Quant};
use crate::model::{KripkeModel, ModelBundle, StateId};
use crate::qbf::{Circuit, NodeId, QbfQuery, QuantBlock, Var};
use crate::trajectory::{
    build_pos, halted_predicate, moves_predicate, off_predicate, PosConstraint, TrajectoryBanks,
};
use crate::unroll::{unroll, UnknownProp, UnrolledModel, VarBank, VariableAllocator};
use crate::Semantics;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    UnknownProp(#[from] UnknownProp),
}

/// Builder state for one `(k, m, mode)` encoding. The steps can be driven
/// one at a time ([`EncodingSession::new`], [`build_pos`](Self::build_pos),
/// [`encode_body`](Self::encode_body),
/// [`encode_prefix_shape`](Self::encode_prefix_shape),
/// [`assemble`](Self::assemble)) or all at once through [`encode`].
pub struct EncodingSession<'m> {
    pub mode: Semantics,
    pub k: usize,
    pub m: usize,
    pub formula: AhltlFormula,
    pub shape: PrefixShape,
    pub circuit: Circuit,
    pub unrolled: Vec<UnrolledModel<'m>>,
    pub banks: TrajectoryBanks,
    alloc: VariableAllocator,
    arena: NnfArena,
    pos: Option<PosConstraint>,
}

impl<'m> EncodingSession<'m> {
    /// Resolves the formula against the bundle, unrolls every trace
    /// variable and allocates the trajectory variables.
    pub fn new(
        bundle: &'m ModelBundle,
        f: &AhltlFormula,
        k: usize,
        m: usize,
        mode: Semantics,
    ) -> Result<Self, EncodeError> {
        let formula = f.resolve(bundle)?;
        let shape = formula.classify_prefix()?;
        let mut circuit = Circuit::new();
        let mut alloc = VariableAllocator::new();
        let mut unrolled = Vec::with_capacity(formula.num_paths());
        for (i, b) in formula.trace_prefix.iter().enumerate() {
            let model = bundle
                .resolve(b.model.as_deref())
                .ok_or_else(|| FormulaError::UnknownModel(b.model.clone().unwrap_or_default()))?;
            unrolled.push(unroll(&mut circuit, model, i, k, &mut alloc));
        }
        let groups = match &shape {
            PrefixShape::EOnly(u) | PrefixShape::AOnly(u) => vec![u.clone()],
            PrefixShape::AThenE(x, y) | PrefixShape::EThenA(x, y) => vec![x.clone(), y.clone()],
        };
        let banks = TrajectoryBanks::allocate(
            formula.num_paths(),
            formula.num_trajs(),
            k,
            m,
            &groups,
            &mut alloc,
        );
        let mut arena = NnfArena::new();
        arena.add(&formula.body);
        Ok(EncodingSession {
            mode,
            k,
            m,
            formula,
            shape,
            circuit,
            unrolled,
            banks,
            alloc,
            arena,
            pos: None,
        })
    }

    /// The position constraint, built once.
    pub fn build_pos(&mut self) -> PosConstraint {
        if let Some(p) = self.pos {
            return p;
        }
        let p = build_pos(&mut self.circuit, &self.banks, &mut self.unrolled);
        self.pos = Some(p);
        p
    }

    /// Encodes the body at step 0. Every (subformula, step) pair is built
    /// once, children first and later steps before earlier ones.
    pub fn encode_body(&mut self) -> Result<NodeId, EncodeError> {
        let m = self.m;
        let c = &mut self.circuit;
        let all: Vec<usize> = (0..self.banks.num_trajs).collect();
        let off: Vec<NodeId> = (0..=m).map(|j| off_predicate(c, j, &self.banks)).collect();
        let halted_m = halted_predicate(c, &all, m, &self.banks, &mut self.unrolled);
        let mut memo: Vec<Vec<NodeId>> = Vec::with_capacity(self.arena.len());
        for id in 0..self.arena.len() {
            let mut row = vec![c.ff(); m + 1];
            let node = self.arena.node(crate::formula::NnfId(id as u32)).clone();
            for j in (0..=m).rev() {
                let n = match &node {
                    NnfNode::True => c.tt(),
                    NnfNode::False => c.ff(),
                    NnfNode::Lit {
                        prop,
                        trace,
                        traj,
                        positive,
                    } => {
                        let b = self.banks.get(*trace, *traj);
                        let u = &mut self.unrolled[*trace];
                        let mut terms = Vec::with_capacity(self.k + 1);
                        for i in 0..=self.k {
                            let p = u.prop_literal(c, prop, i)?;
                            let p = if *positive { p } else { c.not(p) };
                            let at = c.var(b.pos[j][i]);
                            terms.push(c.and2(at, p));
                        }
                        c.or(terms)
                    }
                    NnfNode::And(a, b) => c.and2(memo[a.0 as usize][j], memo[b.0 as usize][j]),
                    NnfNode::Or(a, b) => c.or2(memo[a.0 as usize][j], memo[b.0 as usize][j]),
                    NnfNode::Until(a, b) => {
                        let (x, y) = (memo[a.0 as usize][j], memo[b.0 as usize][j]);
                        let o = off[j];
                        let no = c.not(o);
                        match (self.mode, j < m) {
                            (Semantics::Hpes, true) => {
                                let step = c.and2(x, row[j + 1]);
                                let body = c.or2(y, step);
                                c.and2(no, body)
                            }
                            (Semantics::Hpes, false) => c.and2(no, y),
                            (Semantics::Hopt, true) => {
                                let step = c.and2(x, row[j + 1]);
                                c.or(vec![o, y, step])
                            }
                            (Semantics::Hopt, false) => {
                                let nh = c.not(halted_m);
                                let pend = c.and2(nh, x);
                                c.or(vec![o, y, pend])
                            }
                        }
                    }
                    NnfNode::Release(a, b) => {
                        let (x, y) = (memo[a.0 as usize][j], memo[b.0 as usize][j]);
                        let o = off[j];
                        let no = c.not(o);
                        match (self.mode, j < m) {
                            (Semantics::Hpes, true) => {
                                let rest = c.or2(x, row[j + 1]);
                                c.and(vec![no, y, rest])
                            }
                            (Semantics::Hpes, false) => {
                                let both = c.and2(x, y);
                                let done = c.and2(halted_m, y);
                                let end = c.or2(both, done);
                                c.and2(no, end)
                            }
                            (Semantics::Hopt, true) => {
                                let rest = c.or2(x, row[j + 1]);
                                let body = c.and2(y, rest);
                                c.or2(o, body)
                            }
                            (Semantics::Hopt, false) => c.or2(o, y),
                        }
                    }
                };
                row[j] = n;
            }
            memo.push(row);
        }
        Ok(memo.last().map_or(c.tt(), |r| r[0]))
    }

    /// Wraps the step-0 body with the move restrictions of the prefix shape.
    pub fn encode_prefix_shape(&mut self, body: NodeId) -> NodeId {
        let m = self.m;
        let shape = self.shape.clone();
        let moves = |s: &mut Self, u: &[usize]| -> Vec<NodeId> {
            (0..=m)
                .map(|j| moves_predicate(&mut s.circuit, u, j, &s.banks, &mut s.unrolled))
                .collect()
        };
        let guarded = |s: &mut Self, first: &[usize], second: &[usize]| -> NodeId {
            let mut parts = Vec::with_capacity(m + 1);
            for j in 0..=m {
                let h = halted_predicate(&mut s.circuit, first, j, &s.banks, &mut s.unrolled);
                let mv = moves_predicate(&mut s.circuit, second, j, &s.banks, &mut s.unrolled);
                parts.push(s.circuit.implies(h, mv));
            }
            s.circuit.and(parts)
        };
        match &shape {
            PrefixShape::EOnly(u) => {
                let mut parts = moves(self, u);
                parts.push(body);
                self.circuit.and(parts)
            }
            PrefixShape::AOnly(u) => {
                let mv = moves(self, u);
                let mv = self.circuit.and(mv);
                self.circuit.implies(mv, body)
            }
            PrefixShape::AThenE(a, e) => {
                let mv = moves(self, a);
                let mv = self.circuit.and(mv);
                let g = guarded(self, a, e);
                let inner = self.circuit.and2(g, body);
                self.circuit.implies(mv, inner)
            }
            PrefixShape::EThenA(e, a) => {
                let mv = moves(self, e);
                let mv = self.circuit.and(mv);
                let g = guarded(self, e, a);
                let inner = self.circuit.implies(g, body);
                self.circuit.and2(mv, inner)
            }
        }
    }

    /// Nests the unrolled models around `φ_Pos ∧ enc` and attaches the
    /// quantifier blocks.
    pub fn assemble(mut self, enc: NodeId) -> Encoding {
        let pos = self.build_pos();
        let c = &mut self.circuit;
        let mut matrix = c.and2(pos.node, enc);
        for (b, u) in self.formula.trace_prefix.iter().zip(&self.unrolled).rev() {
            matrix = match b.quant {
                Quant::Forall => c.implies(u.constraint, matrix),
                Quant::Exists => c.and2(u.constraint, matrix),
            };
        }
        let mut blocks = Vec::new();
        for (b, u) in self.formula.trace_prefix.iter().zip(&self.unrolled) {
            blocks.push(QuantBlock {
                quant: b.quant,
                vars: u.bank.all_vars().collect(),
            });
        }
        for (t, b) in self.formula.traj_prefix.iter().enumerate() {
            blocks.push(QuantBlock {
                quant: b.quant,
                vars: self.banks.move_vars(t),
            });
        }
        blocks.push(QuantBlock {
            quant: Quant::Exists,
            vars: self.banks.pos_off_vars(),
        });
        let mut query = QbfQuery::new(self.circuit, matrix, blocks);
        query.num_vars = query.num_vars.max(self.alloc.count());
        Encoding {
            query,
            mode: self.mode,
            k: self.k,
            m: self.m,
            shape: self.shape,
            formula: self.formula,
            traces: self.unrolled.iter().map(|u| u.bank.clone()).collect(),
            trajs: self.banks,
        }
    }
}

/// A finished encoding with the variable layout needed to read back
/// witnesses.
#[derive(Debug, Clone)]
pub struct Encoding {
    pub query: QbfQuery,
    pub mode: Semantics,
    pub k: usize,
    pub m: usize,
    pub shape: PrefixShape,
    /// The formula as resolved against the bundle.
    pub formula: AhltlFormula,
    pub traces: Vec<VarBank>,
    pub trajs: TrajectoryBanks,
}

impl Encoding {
    /// State path of trace variable `trace` under `value`, or `None` if a
    /// step holds an unused bit pattern.
    pub fn decode_path(
        &self,
        model: &KripkeModel,
        trace: usize,
        value: &dyn Fn(Var) -> bool,
    ) -> Option<Vec<StateId>> {
        self.traces[trace]
            .bits
            .iter()
            .map(|step| {
                let s = step
                    .iter()
                    .enumerate()
                    .fold(0u32, |s, (b, &v)| s | (value(v) as u32) << b);
                ((s as usize) < model.num_states()).then_some(StateId(s))
            })
            .collect()
    }

    /// Move bits `t^0..t^m` of a (trace, trajectory) pair under `value`.
    pub fn decode_moves(&self, trace: usize, traj: usize, value: &dyn Fn(Var) -> bool) -> Vec<bool> {
        self.trajs.get(trace, traj).moves.iter().map(|&v| value(v)).collect()
    }
}

/// Builds `⟦K, φ⟧_{k,m}` for the given semantics.
pub fn encode(
    bundle: &ModelBundle,
    f: &AhltlFormula,
    k: usize,
    m: usize,
    mode: Semantics,
) -> Result<Encoding, EncodeError> {
    let mut s = EncodingSession::new(bundle, f, k, m, mode)?;
    s.build_pos();
    let body = s.encode_body()?;
    let enc = s.encode_prefix_shape(body);
    Ok(s.assemble(enc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::parse_formula;
    use crate::model::parse_model;
    use crate::qbf::{eval_expand, ExpandResult};

    const BRANCH: &str = "model K\nprops h l obs_a obs_b\nstate s0 obs_a\nstate s1 l obs_a\nstate s2 obs_a\nstate s3 h l obs_b\nstate s4 obs_b\nstate s5 obs_b\ninit s0\ntrans s0 -> s1\ntrans s1 -> s2\ntrans s0 -> s3\ntrans s3 -> s4\ntrans s2 -> s5\ntrans s4 -> s5\ntrans s5 -> s5\n";

    fn sat(e: &Encoding) -> bool {
        match eval_expand(&e.query, 50_000_000) {
            ExpandResult::Sat(_) => true,
            ExpandResult::Unsat(_) => false,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn block_layout() {
        let b = ModelBundle::single(parse_model(BRANCH).unwrap());
        let f = parse_formula("forall p. exists q. E t. G(obs[p,t] = obs[q,t])").unwrap();
        let e = encode(&b, &f, 3, 4, Semantics::Hpes).unwrap();
        let q: Vec<Quant> = e.query.blocks.iter().map(|b| b.quant).collect();
        assert_eq!(q, [Quant::Forall, Quant::Exists, Quant::Exists, Quant::Exists]);
        assert_eq!(e.query.blocks[0].vars.len(), 12);
        assert_eq!(e.query.blocks[2].vars.len(), 2 * 5);
        assert_eq!(e.query.blocks[3].vars.len(), 2 * 6 * 5);
        e.query.validate().unwrap();
    }

    #[test]
    fn trivial_bodies() {
        let b = ModelBundle::single(parse_model(BRANCH).unwrap());
        for mode in [Semantics::Hpes, Semantics::Hopt] {
            let f = parse_formula("forall p. A t. true").unwrap();
            assert!(sat(&encode(&b, &f, 2, 3, mode).unwrap()));
            let f = parse_formula("exists p. E t. false").unwrap();
            assert!(!sat(&encode(&b, &f, 2, 3, mode).unwrap()));
        }
    }

    #[test]
    fn branch_verdicts() {
        let b = ModelBundle::single(parse_model(BRANCH).unwrap());
        let ni = parse_formula(
            "forall p1. exists p2. E t. (h[p1,t] != h[p2,t]) & G (obs[p1,t] = obs[p2,t])",
        )
        .unwrap();
        assert!(!sat(&encode(&b, &ni, 3, 3, Semantics::Hopt).unwrap()));
        let nd = parse_formula(
            "forall p1. exists p2. A t. E u. (F(h[p1,t] != h[p2,t]) & G(l[p1,t] = l[p2,t])) -> G(obs[p1,u] = obs[p2,u])",
        )
        .unwrap();
        assert!(sat(&encode(&b, &nd, 3, 4, Semantics::Hpes).unwrap()));
    }
}
