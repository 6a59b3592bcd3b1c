//! Trajectory variables: move bits, position and off flags, the position
//! constraint and the `halted`/`moves` predicates.

use alloc::vec::Vec;

use crate::qbf::{Circuit, NodeId, Var};
use crate::unroll::{UnrolledModel, VariableAllocator};

/// Variables of one (trace, trajectory) pair.
///
/// `moves[j]` for `j` in `0..=m`; `pos[j][i]` and `off[j]` for `j` in
/// `0..=m+1` and `i` in `0..=k`. Column `m + 1` only receives the updates
/// from step `m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryBank {
    pub trace: usize,
    pub traj: usize,
    pub moves: Vec<Var>,
    pub pos: Vec<Vec<Var>>,
    pub off: Vec<Var>,
}

/// All trajectory banks of a formula, indexed by (trace, trajectory).
#[derive(Debug, Clone)]
pub struct TrajectoryBanks {
    pub k: usize,
    pub m: usize,
    pub num_paths: usize,
    pub num_trajs: usize,
    banks: Vec<TrajectoryBank>,
}

impl TrajectoryBanks {
    /// Allocates move bits group by group (each group step-major, so that
    /// the bits of one step are adjacent), then all position and off
    /// variables column by column.
    pub fn allocate(
        num_paths: usize,
        num_trajs: usize,
        k: usize,
        m: usize,
        move_groups: &[Vec<usize>],
        alloc: &mut VariableAllocator,
    ) -> Self {
        let mut moves = alloc::vec![alloc::vec![Vec::with_capacity(m + 1); num_paths]; num_trajs];
        for group in move_groups {
            for _j in 0..=m {
                for &t in group {
                    for p in 0..num_paths {
                        moves[t][p].push(alloc.fresh());
                    }
                }
            }
        }
        let mut pos = alloc::vec![alloc::vec![Vec::with_capacity(m + 2); num_paths]; num_trajs];
        let mut off = alloc::vec![alloc::vec![Vec::with_capacity(m + 2); num_paths]; num_trajs];
        for _j in 0..=m + 1 {
            for t in 0..num_trajs {
                for p in 0..num_paths {
                    off[t][p].push(alloc.fresh());
                    let col: Vec<Var> = (0..=k).map(|_| alloc.fresh()).collect();
                    pos[t][p].push(col);
                }
            }
        }
        let mut banks = Vec::with_capacity(num_paths * num_trajs);
        for t in 0..num_trajs {
            for p in 0..num_paths {
                banks.push(TrajectoryBank {
                    trace: p,
                    traj: t,
                    moves: core::mem::take(&mut moves[t][p]),
                    pos: core::mem::take(&mut pos[t][p]),
                    off: core::mem::take(&mut off[t][p]),
                });
            }
        }
        TrajectoryBanks {
            k,
            m,
            num_paths,
            num_trajs,
            banks,
        }
    }

    pub fn get(&self, trace: usize, traj: usize) -> &TrajectoryBank {
        &self.banks[traj * self.num_paths + trace]
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrajectoryBank> {
        self.banks.iter()
    }

    /// Move bits of trajectory `traj`, sorted.
    pub fn move_vars(&self, traj: usize) -> Vec<Var> {
        let mut v: Vec<Var> = (0..self.num_paths)
            .flat_map(|p| self.get(p, traj).moves.iter().copied())
            .collect();
        v.sort_unstable();
        v
    }

    /// All position and off variables, sorted.
    pub fn pos_off_vars(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self
            .banks
            .iter()
            .flat_map(|b| b.off.iter().copied().chain(b.pos.iter().flatten().copied()))
            .collect();
        v.sort_unstable();
        v
    }
}

/// `pos^{i,j} ∧ ⋀_{n≠i} ¬pos^{n,j} ∧ ¬off^j`
pub fn setpos(c: &mut Circuit, b: &TrajectoryBank, i: usize, j: usize) -> NodeId {
    let mut lits: Vec<NodeId> = b.pos[j]
        .iter()
        .enumerate()
        .map(|(n, &v)| c.lit(v, n == i))
        .collect();
    lits.push(c.lit(b.off[j], false));
    c.and(lits)
}

/// `off^j ∧ ⋀_n ¬pos^{n,j}`
pub fn nopos(c: &mut Circuit, b: &TrajectoryBank, j: usize) -> NodeId {
    let mut lits: Vec<NodeId> = b.pos[j].iter().map(|&v| c.lit(v, false)).collect();
    lits.push(c.lit(b.off[j], true));
    c.and(lits)
}

/// The position constraint `φ_Pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PosConstraint {
    pub node: NodeId,
}

/// Builds `I_pos ∧ ⋀_{j,π,τ} (step ∧ stutters ∧ ends)`, plus
/// `off^j → nopos^{j+1}` so that columns after falling off are determined.
pub fn build_pos(
    c: &mut Circuit,
    banks: &TrajectoryBanks,
    unrolled: &mut [UnrolledModel<'_>],
) -> PosConstraint {
    let (k, m) = (banks.k, banks.m);
    let mut parts = Vec::new();
    for b in banks.iter() {
        parts.push(setpos(c, b, 0, 0));
    }
    for j in 0..=m {
        for b in banks.iter() {
            let t = c.var(b.moves[j]);
            let nt = c.not(t);
            for i in 0..k {
                let p = c.var(b.pos[j][i]);
                let lhs = c.and2(p, t);
                let rhs = setpos(c, b, i + 1, j + 1);
                parts.push(c.implies(lhs, rhs));
            }
            for i in 0..=k {
                let p = c.var(b.pos[j][i]);
                let lhs = c.and2(p, nt);
                let rhs = setpos(c, b, i, j + 1);
                parts.push(c.implies(lhs, rhs));
            }
            let halt = unrolled[b.trace].halt_literal(c, k);
            let pk = c.var(b.pos[j][k]);
            let lhs = c.and2(pk, t);
            let gone = nopos(c, b, j + 1);
            let stay = setpos(c, b, k, j + 1);
            let nhalt = c.not(halt);
            let r1 = c.implies(nhalt, gone);
            let r2 = c.implies(halt, stay);
            let rhs = c.and2(r1, r2);
            parts.push(c.implies(lhs, rhs));
            let off = c.var(b.off[j]);
            parts.push(c.implies(off, gone));
        }
    }
    PosConstraint { node: c.and(parts) }
}

/// `⋁_i (pos^{i,j} ∧ halt^i)`: the pair sits on a halting position at `j`.
pub fn haltpos(
    c: &mut Circuit,
    b: &TrajectoryBank,
    u: &mut UnrolledModel<'_>,
    j: usize,
) -> NodeId {
    let mut terms = Vec::with_capacity(b.pos[j].len());
    for (i, &v) in b.pos[j].iter().enumerate() {
        let p = c.var(v);
        let h = u.halt_literal(c, i);
        terms.push(c.and2(p, h));
    }
    c.or(terms)
}

/// `halted^j_U`: every trace sits on a halting position under every
/// trajectory in `trajs`.
pub fn halted_predicate(
    c: &mut Circuit,
    trajs: &[usize],
    j: usize,
    banks: &TrajectoryBanks,
    unrolled: &mut [UnrolledModel<'_>],
) -> NodeId {
    let mut parts = Vec::new();
    for &t in trajs {
        for p in 0..banks.num_paths {
            let b = banks.get(p, t);
            parts.push(haltpos(c, b, &mut unrolled[p], j));
        }
    }
    c.and(parts)
}

/// `moves^j_U = halted^j_U ∨ ⋁_{τ∈U,π} (t^j_{π,τ} ∧ ¬haltpos^j_{π,τ})`.
pub fn moves_predicate(
    c: &mut Circuit,
    trajs: &[usize],
    j: usize,
    banks: &TrajectoryBanks,
    unrolled: &mut [UnrolledModel<'_>],
) -> NodeId {
    let mut parts = alloc::vec![halted_predicate(c, trajs, j, banks, unrolled)];
    for &t in trajs {
        for p in 0..banks.num_paths {
            let b = banks.get(p, t);
            let mv = c.var(b.moves[j]);
            let h = haltpos(c, b, &mut unrolled[p], j);
            let nh = c.not(h);
            parts.push(c.and2(mv, nh));
        }
    }
    c.or(parts)
}

/// `off^j = ⋁_{π,τ} off^j_{π,τ}`.
pub fn off_predicate(c: &mut Circuit, j: usize, banks: &TrajectoryBanks) -> NodeId {
    let parts = banks.iter().map(|b| c.var(b.off[j])).collect();
    c.or(parts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::parse_model;
    use crate::unroll::unroll;

    fn single_halt() -> crate::model::KripkeModel {
        parse_model("model one\nstate s\ninit s\ntrans s -> s\n").unwrap()
    }

    #[test]
    fn allocation_layout() {
        let m = single_halt();
        let mut c = Circuit::new();
        let mut a = VariableAllocator::new();
        let u = unroll(&mut c, &m, 0, 1, &mut a);
        assert_eq!(u.width(), 0);
        let banks = TrajectoryBanks::allocate(2, 1, 1, 2, &[alloc::vec![0]], &mut a);
        // step-major move bits: t^0_{π0}, t^0_{π1}, t^1_{π0}, ...
        assert_eq!(banks.get(0, 0).moves, [Var(1), Var(3), Var(5)]);
        assert_eq!(banks.get(1, 0).moves, [Var(2), Var(4), Var(6)]);
        assert_eq!(banks.get(0, 0).pos.len(), 4);
        assert_eq!(banks.pos_off_vars().len(), 2 * 4 * 3);
    }

    #[test]
    fn halted_on_single_halt_model() {
        let m = single_halt();
        let mut c = Circuit::new();
        let mut a = VariableAllocator::new();
        let mut us = alloc::vec![unroll(&mut c, &m, 0, 1, &mut a)];
        let banks = TrajectoryBanks::allocate(1, 1, 1, 2, &[alloc::vec![0]], &mut a);
        let pos = build_pos(&mut c, &banks, &mut us);
        for j in 0..=2 {
            let h = halted_predicate(&mut c, &[0], j, &banks, &mut us);
            // under the position constraint the pair is always somewhere
            let both = c.and2(pos.node, h);
            let neg = c.not(h);
            let bad = c.and2(pos.node, neg);
            let vars: Vec<Var> = c.vars(bad).into_iter().collect();
            assert!(vars.len() <= 20);
            let mut sat_bad = false;
            let mut sat_ok = false;
            for bits in 0u32..(1 << vars.len()) {
                let val = |v: Var| bits >> vars.iter().position(|&x| x == v).unwrap() & 1 == 1;
                sat_bad |= c.eval(bad, &val);
                sat_ok |= c.eval(both, &val);
            }
            assert!(!sat_bad && sat_ok, "j = {j}");
        }
    }
}
