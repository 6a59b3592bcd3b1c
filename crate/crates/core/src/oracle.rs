//! Reference evaluator for the bounded semantics by explicit enumeration.
//!
//! Trace quantifiers range over one representative path per distinct label
//! sequence of length `k + 1`. Trajectory quantifiers range over words of
//! move sets; with [`TrajectoryDomain::Relativized`] the words are filtered
//! by the same `moves`/`halted` restrictions the QBF encoding applies, with
//! [`TrajectoryDomain::Unrestricted`] every word is admitted.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::formula::{AhltlFormula, Body, FormulaError, NnfArena, NnfId, NnfNode, PrefixShape, Quant};
use crate::model::{KripkeModel, ModelBundle, PropId, StateId};
use crate::unroll::UnknownProp;
use crate::Semantics;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryDomain {
    /// Words restricted as in the encoding: quantified groups must move a
    /// non-halted trace at every step (after the outer group halts, for the
    /// inner group).
    Relativized,
    /// All words.
    Unrestricted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleConfig {
    /// Maximum number of enumeration steps and body evaluations.
    pub budget: u64,
    pub domain: TrajectoryDomain,
    /// Fix the bits of halted traces to 0 and stop branching once some
    /// trace has fallen off. Neither changes the result.
    pub prune: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            budget: 20_000_000,
            domain: TrajectoryDomain::Relativized,
            prune: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("enumeration budget exceeded")]
    BudgetExceeded,
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    UnknownProp(#[from] UnknownProp),
}

/// Pointer of a (trace, trajectory) pair: a position in `0..=k`, or `None`
/// once the pair has fallen off.
pub type Pointer = Option<usize>;

fn advance(model: &KripkeModel, path: &[StateId], p: Pointer, bit: bool, k: usize) -> Pointer {
    match p {
        Some(i) if !bit => Some(i),
        Some(i) if i < k => Some(i + 1),
        Some(i) if model.is_halt(path[i]) => Some(i),
        _ => None,
    }
}

/// One representative state path of length `k + 1` per distinct label
/// sequence.
pub fn representatives(model: &KripkeModel, k: usize) -> Vec<Vec<StateId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in model.paths_up_to(k) {
        let labels: Vec<Vec<PropId>> = p.iter().map(|&s| model.label(s).to_vec()).collect();
        if seen.insert(labels) {
            out.push(p);
        }
    }
    out
}

/// A complete assignment of traces and trajectory words.
#[derive(Debug, Clone)]
pub struct AsyncAssignment<'a> {
    pub models: Vec<&'a KripkeModel>,
    pub paths: Vec<Vec<StateId>>,
    /// `words[τ][j]`: bit `π` is set when trace `π` moves at step `j`.
    pub words: Vec<Vec<u64>>,
    pub k: usize,
    pub m: usize,
}

impl AsyncAssignment<'_> {
    /// Pointer table `[τ * |paths| + π][j]` for `j` in `0..=m+1`.
    pub fn pointers(&self) -> Vec<Vec<Pointer>> {
        let np = self.paths.len();
        let mut out = Vec::with_capacity(np * self.words.len());
        for w in &self.words {
            for p in 0..np {
                let mut col = Vec::with_capacity(self.m + 2);
                let mut cur = Some(0);
                col.push(cur);
                for j in 0..=self.m {
                    let bit = w.get(j).is_some_and(|b| b >> p & 1 == 1);
                    cur = advance(self.models[p], &self.paths[p], cur, bit, self.k);
                    col.push(cur);
                }
                out.push(col);
            }
        }
        out
    }
}

/// Compiled body: NNF arena with atoms resolved to proposition ids.
struct Program {
    nodes: Vec<Op>,
}

#[derive(Clone, Copy)]
enum Op {
    Const(bool),
    Lit { pair: usize, trace: usize, prop: PropId, positive: bool },
    And(usize, usize),
    Or(usize, usize),
    Until(usize, usize),
    Release(usize, usize),
}

impl Program {
    fn compile(body: &Body, models: &[&KripkeModel], np: usize) -> Result<Self, UnknownProp> {
        let mut arena = NnfArena::new();
        arena.add(body);
        let mut nodes = Vec::with_capacity(arena.len());
        for id in 0..arena.len() {
            let op = match arena.node(NnfId(id as u32)) {
                NnfNode::True => Op::Const(true),
                NnfNode::False => Op::Const(false),
                NnfNode::Lit {
                    prop,
                    trace,
                    traj,
                    positive,
                } => {
                    let m = models[*trace];
                    let p = m.prop_id(prop).ok_or_else(|| UnknownProp {
                        prop: prop.clone(),
                        model: m.name().into(),
                    })?;
                    Op::Lit {
                        pair: traj * np + trace,
                        trace: *trace,
                        prop: p,
                        positive: *positive,
                    }
                }
                NnfNode::And(a, b) => Op::And(a.0 as usize, b.0 as usize),
                NnfNode::Or(a, b) => Op::Or(a.0 as usize, b.0 as usize),
                NnfNode::Until(a, b) => Op::Until(a.0 as usize, b.0 as usize),
                NnfNode::Release(a, b) => Op::Release(a.0 as usize, b.0 as usize),
            };
            nodes.push(op);
        }
        Ok(Program { nodes })
    }

    /// Truth values of every node at every step `0..=m`.
    fn run(
        &self,
        models: &[&KripkeModel],
        paths: &[Vec<StateId>],
        ptrs: &[Vec<Pointer>],
        m: usize,
        mode: Semantics,
    ) -> Vec<Vec<bool>> {
        let off: Vec<bool> = (0..=m).map(|j| ptrs.iter().any(|c| c[j].is_none())).collect();
        let np = paths.len();
        let halted_m = ptrs.iter().enumerate().all(|(pair, c)| {
            c[m].is_some_and(|i| models[pair % np].is_halt(paths[pair % np][i]))
        });
        let mut val: Vec<Vec<bool>> = Vec::with_capacity(self.nodes.len());
        for op in &self.nodes {
            let mut row = vec![false; m + 1];
            for j in (0..=m).rev() {
                let o = off[j];
                row[j] = match *op {
                    Op::Const(b) => b,
                    Op::Lit {
                        pair,
                        trace,
                        prop,
                        positive,
                    } => match ptrs[pair][j] {
                        Some(i) => models[trace].holds(paths[trace][i], prop) == positive,
                        None => false,
                    },
                    Op::And(a, b) => val[a][j] && val[b][j],
                    Op::Or(a, b) => val[a][j] || val[b][j],
                    Op::Until(a, b) => {
                        let (x, y) = (val[a][j], val[b][j]);
                        match (mode, j < m) {
                            (Semantics::Hpes, true) => !o && (y || (x && row[j + 1])),
                            (Semantics::Hpes, false) => !o && y,
                            (Semantics::Hopt, true) => o || y || (x && row[j + 1]),
                            (Semantics::Hopt, false) => o || y || (!halted_m && x),
                        }
                    }
                    Op::Release(a, b) => {
                        let (x, y) = (val[a][j], val[b][j]);
                        match (mode, j < m) {
                            (Semantics::Hpes, true) => !o && y && (x || row[j + 1]),
                            (Semantics::Hpes, false) => !o && ((x && y) || (halted_m && y)),
                            (Semantics::Hopt, true) => o || (y && (x || row[j + 1])),
                            (Semantics::Hopt, false) => o || y,
                        }
                    }
                };
            }
            val.push(row);
        }
        val
    }
}

/// Evaluates `body` at step `i` under a fixed assignment.
pub fn eval_pointwise(
    a: &AsyncAssignment<'_>,
    body: &Body,
    i: usize,
    mode: Semantics,
) -> Result<bool, OracleError> {
    let prog = Program::compile(body, &a.models, a.paths.len())?;
    let ptrs = a.pointers();
    let val = prog.run(&a.models, &a.paths, &ptrs, a.m, mode);
    Ok(val.last().is_none_or(|r| r[i]))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Restriction {
    Moves,
    /// `halted` of the given group implies `moves` of this one.
    After(usize),
}

struct Group {
    quant: Quant,
    trajs: Vec<usize>,
    restriction: Restriction,
}

struct Search<'a> {
    models: Vec<&'a KripkeModel>,
    paths: Vec<Vec<StateId>>,
    prog: Program,
    groups: Vec<Group>,
    k: usize,
    m: usize,
    mode: Semantics,
    cfg: OracleConfig,
    used: u64,
    /// `[τ * |paths| + π][j]` for `j` in `0..=m+1`.
    ptrs: Vec<Vec<Pointer>>,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), OracleError> {
        self.used += 1;
        if self.used > self.cfg.budget {
            Err(OracleError::BudgetExceeded)
        } else {
            Ok(())
        }
    }

    fn pairs(&self, g: usize) -> Vec<usize> {
        let np = self.paths.len();
        self.groups[g]
            .trajs
            .iter()
            .flat_map(|&t| (0..np).map(move |p| t * np + p))
            .collect()
    }

    fn haltpos(&self, pair: usize, j: usize) -> bool {
        let p = pair % self.paths.len();
        self.ptrs[pair][j].is_some_and(|i| self.models[p].is_halt(self.paths[p][i]))
    }

    fn step(&mut self, pair: usize, j: usize, bit: bool) {
        let p = pair % self.paths.len();
        let next = advance(self.models[p], &self.paths[p], self.ptrs[pair][j], bit, self.k);
        self.ptrs[pair][j + 1] = next;
    }

    fn leaf(&mut self) -> Result<bool, OracleError> {
        self.tick()?;
        let val = self.prog.run(&self.models, &self.paths, &self.ptrs, self.m, self.mode);
        Ok(val.last().is_none_or(|r| r[0]))
    }

    /// Quantifies over the words of group `g` from step `j` on.
    fn group(&mut self, g: usize, j: usize, pairs: &[usize]) -> Result<bool, OracleError> {
        if j > self.m {
            return if g + 1 < self.groups.len() {
                let inner = self.pairs(g + 1);
                self.group(g + 1, 0, &inner)
            } else {
                self.leaf()
            };
        }
        self.tick()?;
        if self.cfg.prune && j > 0 {
            let assigned = (0..=g).flat_map(|h| self.pairs(h));
            let off = assigned.into_iter().any(|pair| self.ptrs[pair][j].is_none());
            if off {
                for jj in j..=self.m {
                    for &pair in pairs {
                        self.step(pair, jj, true);
                    }
                }
                return self.group(g, self.m + 1, pairs);
            }
        }
        let free: Vec<usize> = if self.cfg.prune {
            pairs.iter().copied().filter(|&p| !self.haltpos(p, j)).collect()
        } else {
            pairs.to_vec()
        };
        let group_halted = pairs.iter().all(|&p| self.haltpos(p, j));
        let required = match self.groups[g].restriction {
            _ if self.cfg.domain == TrajectoryDomain::Unrestricted => false,
            Restriction::Moves => !group_halted,
            Restriction::After(h) => {
                !group_halted && self.pairs(h).iter().all(|&p| self.haltpos(p, j))
            }
        };
        let quant = self.groups[g].quant;
        for mask in 0u64..(1u64 << free.len()) {
            for &pair in pairs {
                self.step(pair, j, false);
            }
            let mut moved = false;
            for (b, &pair) in free.iter().enumerate() {
                let bit = mask >> b & 1 == 1;
                moved |= bit && !self.haltpos(pair, j);
                self.step(pair, j, bit);
            }
            if required && !moved {
                continue;
            }
            let r = self.group(g, j + 1, pairs)?;
            match quant {
                Quant::Exists if r => return Ok(true),
                Quant::Forall if !r => return Ok(false),
                _ => {}
            }
        }
        Ok(quant == Quant::Forall)
    }

    fn traces(&mut self, reps: &[Vec<Vec<StateId>>], quants: &[Quant], i: usize) -> Result<bool, OracleError> {
        if i == quants.len() {
            for col in &mut self.ptrs {
                col.iter_mut().for_each(|p| *p = None);
                col[0] = Some(0);
            }
            let first = self.pairs(0);
            return self.group(0, 0, &first);
        }
        for p in &reps[i] {
            self.paths[i] = p.clone();
            let r = self.traces(reps, quants, i + 1)?;
            match quants[i] {
                Quant::Exists if r => return Ok(true),
                Quant::Forall if !r => return Ok(false),
                _ => {}
            }
        }
        Ok(quants[i] == Quant::Forall)
    }
}

/// Truth of `f` under the bounded semantics `mode` at bounds `(k, m)`.
pub fn eval_bounded(
    bundle: &ModelBundle,
    f: &AhltlFormula,
    k: usize,
    m: usize,
    mode: Semantics,
    cfg: OracleConfig,
) -> Result<bool, OracleError> {
    let f = f.resolve(bundle)?;
    let shape = f.classify_prefix()?;
    let mut models = Vec::with_capacity(f.num_paths());
    for b in &f.trace_prefix {
        let model = bundle
            .resolve(b.model.as_deref())
            .ok_or_else(|| FormulaError::UnknownModel(b.model.clone().unwrap_or_default()))?;
        models.push(model);
    }
    let np = models.len();
    if np > 64 {
        return Err(OracleError::BudgetExceeded);
    }
    let prog = Program::compile(&f.body, &models, np)?;
    let groups = match shape {
        PrefixShape::EOnly(u) => vec![Group { quant: Quant::Exists, trajs: u, restriction: Restriction::Moves }],
        PrefixShape::AOnly(u) => vec![Group { quant: Quant::Forall, trajs: u, restriction: Restriction::Moves }],
        PrefixShape::AThenE(a, e) => vec![
            Group { quant: Quant::Forall, trajs: a, restriction: Restriction::Moves },
            Group { quant: Quant::Exists, trajs: e, restriction: Restriction::After(0) },
        ],
        PrefixShape::EThenA(e, a) => vec![
            Group { quant: Quant::Exists, trajs: e, restriction: Restriction::Moves },
            Group { quant: Quant::Forall, trajs: a, restriction: Restriction::After(0) },
        ],
    };
    let reps: Vec<Vec<Vec<StateId>>> = models.iter().map(|m| representatives(m, k)).collect();
    let quants: Vec<Quant> = f.trace_prefix.iter().map(|b| b.quant).collect();
    let mut s = Search {
        paths: vec![Vec::new(); np],
        models,
        prog,
        groups,
        k,
        m,
        mode,
        cfg,
        used: 0,
        ptrs: vec![vec![None; m + 2]; np * f.num_trajs()],
    };
    s.traces(&reps, &quants, 0)
}
