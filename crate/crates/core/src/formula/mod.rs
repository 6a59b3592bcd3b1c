//! A-HLTL formulas: AST, validation, negation normal form and prefix
//! classification.

mod parser;

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;
use thiserror::Error;

use crate::model::ModelBundle;

pub use parser::parse_formula;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Quant {
    Exists,
    Forall,
}

impl Quant {
    pub fn flip(self) -> Self {
        match self {
            Quant::Exists => Quant::Forall,
            Quant::Forall => Quant::Exists,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceBinding {
    pub quant: Quant,
    pub var: String,
    pub model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajBinding {
    pub quant: Quant,
    pub var: String,
}

/// Temporal body. Atoms refer to trace and trajectory variables by their
/// index in the formula's prefixes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Body {
    True,
    False,
    Atom {
        prop: String,
        trace: usize,
        traj: usize,
    },
    Not(Box<Body>),
    And(Box<Body>, Box<Body>),
    Or(Box<Body>, Box<Body>),
    Implies(Box<Body>, Box<Body>),
    Iff(Box<Body>, Box<Body>),
    Until(Box<Body>, Box<Body>),
    Release(Box<Body>, Box<Body>),
    Eventually(Box<Body>),
    Globally(Box<Body>),
}

impl Body {
    pub fn atom(prop: &str, trace: usize, traj: usize) -> Body {
        Body::Atom {
            prop: prop.to_string(),
            trace,
            traj,
        }
    }

    pub fn not(b: Body) -> Body {
        Body::Not(Box::new(b))
    }

    pub fn and(a: Body, b: Body) -> Body {
        Body::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Body, b: Body) -> Body {
        Body::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Body, b: Body) -> Body {
        Body::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Body, b: Body) -> Body {
        Body::Iff(Box::new(a), Box::new(b))
    }

    pub fn until(a: Body, b: Body) -> Body {
        Body::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Body, b: Body) -> Body {
        Body::Release(Box::new(a), Box::new(b))
    }

    pub fn eventually(a: Body) -> Body {
        Body::Eventually(Box::new(a))
    }

    pub fn globally(a: Body) -> Body {
        Body::Globally(Box::new(a))
    }

    /// Visits every atom as `(prop, trace, traj)`.
    pub fn for_each_atom(&self, f: &mut impl FnMut(&str, usize, usize)) {
        match self {
            Body::True | Body::False => {}
            Body::Atom { prop, trace, traj } => f(prop, *trace, *traj),
            Body::Not(a) | Body::Eventually(a) | Body::Globally(a) => a.for_each_atom(f),
            Body::And(a, b)
            | Body::Or(a, b)
            | Body::Implies(a, b)
            | Body::Iff(a, b)
            | Body::Until(a, b)
            | Body::Release(a, b) => {
                a.for_each_atom(f);
                b.for_each_atom(f);
            }
        }
    }

    /// True when only atoms, negated atoms, constants, `&`, `|`, `U` and `R`
    /// occur.
    pub fn is_nnf(&self) -> bool {
        match self {
            Body::True | Body::False | Body::Atom { .. } => true,
            Body::Not(a) => matches!(**a, Body::Atom { .. }),
            Body::And(a, b) | Body::Or(a, b) | Body::Until(a, b) | Body::Release(a, b) => {
                a.is_nnf() && b.is_nnf()
            }
            _ => false,
        }
    }

    pub fn size(&self) -> usize {
        match self {
            Body::True | Body::False | Body::Atom { .. } => 1,
            Body::Not(a) | Body::Eventually(a) | Body::Globally(a) => 1 + a.size(),
            Body::And(a, b)
            | Body::Or(a, b)
            | Body::Implies(a, b)
            | Body::Iff(a, b)
            | Body::Until(a, b)
            | Body::Release(a, b) => 1 + a.size() + b.size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unbound trace variable `{0}`")]
    UnboundTrace(String),
    #[error("unbound trajectory variable `{0}`")]
    UnboundTraj(String),
    #[error("variable `{0}` is quantified twice")]
    Duplicate(String),
    #[error("trajectory quantifier on `{0}` precedes a trace quantifier")]
    TrajBeforeTrace(String),
    #[error("unsupported fragment: {0}")]
    Unsupported(String),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("proposition `{prop}` is not declared in model `{model}`")]
    UnknownProp { prop: String, model: String },
    #[error("cannot compare `{0}` with `{1}`: different proposition groups")]
    GroupMismatch(String, String),
}

/// A prenex A-HLTL formula: trace quantifiers, then trajectory quantifiers,
/// then a temporal body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AhltlFormula {
    pub trace_prefix: Vec<TraceBinding>,
    pub traj_prefix: Vec<TrajBinding>,
    pub body: Body,
}

/// The four supported trajectory prefix shapes. Sets hold indices into
/// `traj_prefix`, in prefix order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrefixShape {
    EOnly(Vec<usize>),
    AOnly(Vec<usize>),
    AThenE(Vec<usize>, Vec<usize>),
    EThenA(Vec<usize>, Vec<usize>),
}

impl PrefixShape {
    /// The quantifier string, e.g. `"AE"` for `A t. E u.`.
    pub fn quantifier_string(&self) -> String {
        let rep = |c: char, n: usize| core::iter::repeat_n(c, n).collect::<String>();
        match self {
            PrefixShape::EOnly(u) => rep('E', u.len()),
            PrefixShape::AOnly(u) => rep('A', u.len()),
            PrefixShape::AThenE(a, e) => rep('A', a.len()) + &rep('E', e.len()),
            PrefixShape::EThenA(e, a) => rep('E', e.len()) + &rep('A', a.len()),
        }
    }

    /// Trajectory indices in prefix order.
    pub fn order(&self) -> Vec<usize> {
        match self {
            PrefixShape::EOnly(u) | PrefixShape::AOnly(u) => u.clone(),
            PrefixShape::AThenE(x, y) | PrefixShape::EThenA(x, y) => {
                let mut v = x.clone();
                v.extend_from_slice(y);
                v
            }
        }
    }
}

impl AhltlFormula {
    /// Checks well-formedness: distinct variable names, atoms in range.
    pub fn validate(&self) -> Result<(), FormulaError> {
        let mut seen = BTreeSet::new();
        for v in self
            .trace_prefix
            .iter()
            .map(|b| &b.var)
            .chain(self.traj_prefix.iter().map(|b| &b.var))
        {
            if !seen.insert(v.as_str()) {
                return Err(FormulaError::Duplicate(v.clone()));
            }
        }
        let mut err = None;
        self.body.for_each_atom(&mut |_, trace, traj| {
            if err.is_some() {
                return;
            }
            if trace >= self.trace_prefix.len() {
                err = Some(FormulaError::UnboundTrace(format!("#{trace}")));
            } else if traj >= self.traj_prefix.len() {
                err = Some(FormulaError::UnboundTraj(format!("#{traj}")));
            }
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }

    pub fn num_paths(&self) -> usize {
        self.trace_prefix.len()
    }

    pub fn num_trajs(&self) -> usize {
        self.traj_prefix.len()
    }

    /// Splits the trajectory prefix into one of the supported shapes.
    pub fn classify_prefix(&self) -> Result<PrefixShape, FormulaError> {
        classify(&self.traj_prefix)
    }

    /// The negated formula: every quantifier flipped, body negated.
    pub fn negated(&self) -> AhltlFormula {
        AhltlFormula {
            trace_prefix: self
                .trace_prefix
                .iter()
                .map(|b| TraceBinding {
                    quant: b.quant.flip(),
                    ..b.clone()
                })
                .collect(),
            traj_prefix: self
                .traj_prefix
                .iter()
                .map(|b| TrajBinding {
                    quant: b.quant.flip(),
                    ..b.clone()
                })
                .collect(),
            body: Body::not(self.body.clone()),
        }
    }

    /// Checks model names against the bundle and expands comparisons over
    /// proposition groups: `obs[p,t] <-> obs[q,t]` where `obs` is not a
    /// declared proposition becomes a conjunction over `obs_*`.
    pub fn resolve(&self, bundle: &ModelBundle) -> Result<AhltlFormula, FormulaError> {
        let mut models = Vec::new();
        for b in &self.trace_prefix {
            let m = bundle.resolve(b.model.as_deref()).ok_or_else(|| {
                FormulaError::UnknownModel(b.model.clone().unwrap_or_else(|| "<default>".into()))
            })?;
            models.push(m);
        }
        let declared = |prop: &str, trace: usize| models[trace].prop_id(prop).is_some();
        let group = |prop: &str, trace: usize| -> Vec<String> {
            let prefix = format!("{prop}_");
            models[trace]
                .props()
                .iter()
                .filter(|p| p.starts_with(&prefix))
                .cloned()
                .collect()
        };
        let unknown = |prop: &str, trace: usize| FormulaError::UnknownProp {
            prop: prop.to_string(),
            model: models[trace].name().to_string(),
        };

        fn go(
            b: &Body,
            declared: &dyn Fn(&str, usize) -> bool,
            group: &dyn Fn(&str, usize) -> Vec<String>,
            unknown: &dyn Fn(&str, usize) -> FormulaError,
        ) -> Result<Body, FormulaError> {
            let rec = |x: &Body| go(x, declared, group, unknown);
            Ok(match b {
                Body::True => Body::True,
                Body::False => Body::False,
                Body::Atom { prop, trace, .. } => {
                    if !declared(prop, *trace) {
                        return Err(unknown(prop, *trace));
                    }
                    b.clone()
                }
                Body::Iff(l, r) => match (&**l, &**r) {
                    (
                        Body::Atom {
                            prop: pl,
                            trace: tl,
                            traj: jl,
                        },
                        Body::Atom {
                            prop: pr,
                            trace: tr,
                            traj: jr,
                        },
                    ) if !declared(pl, *tl) || !declared(pr, *tr) => {
                        let gl = group(pl, *tl);
                        let gr = group(pr, *tr);
                        if gl.is_empty() {
                            return Err(unknown(pl, *tl));
                        }
                        if gr.is_empty() {
                            return Err(unknown(pr, *tr));
                        }
                        let strip = |g: &[String], p: &str| -> Vec<String> {
                            g.iter().map(|x| x[p.len() + 1..].to_string()).collect()
                        };
                        let sl = strip(&gl, pl);
                        if sl != strip(&gr, pr) {
                            return Err(FormulaError::GroupMismatch(pl.clone(), pr.clone()));
                        }
                        let mut out: Option<Body> = None;
                        for (a, c) in gl.iter().zip(gr.iter()) {
                            let eq = Body::iff(Body::atom(a, *tl, *jl), Body::atom(c, *tr, *jr));
                            out = Some(match out {
                                None => eq,
                                Some(prev) => Body::and(prev, eq),
                            });
                        }
                        out.unwrap()
                    }
                    _ => Body::iff(rec(l)?, rec(r)?),
                },
                Body::Not(a) => Body::not(rec(a)?),
                Body::Eventually(a) => Body::eventually(rec(a)?),
                Body::Globally(a) => Body::globally(rec(a)?),
                Body::And(a, c) => Body::and(rec(a)?, rec(c)?),
                Body::Or(a, c) => Body::or(rec(a)?, rec(c)?),
                Body::Implies(a, c) => Body::implies(rec(a)?, rec(c)?),
                Body::Until(a, c) => Body::until(rec(a)?, rec(c)?),
                Body::Release(a, c) => Body::release(rec(a)?, rec(c)?),
            })
        }
        let body = go(&self.body, &declared, &group, &unknown)?;
        Ok(AhltlFormula {
            trace_prefix: self.trace_prefix.clone(),
            traj_prefix: self.traj_prefix.clone(),
            body,
        })
    }
}

fn classify(prefix: &[TrajBinding]) -> Result<PrefixShape, FormulaError> {
    if prefix.is_empty() {
        return Err(FormulaError::Unsupported(
            "at least one trajectory quantifier is required".into(),
        ));
    }
    let mut runs: Vec<(Quant, Vec<usize>)> = Vec::new();
    for (i, b) in prefix.iter().enumerate() {
        match runs.last_mut() {
            Some((q, v)) if *q == b.quant => v.push(i),
            _ => runs.push((b.quant, vec![i])),
        }
    }
    match runs.as_slice() {
        [(Quant::Exists, u)] => Ok(PrefixShape::EOnly(u.clone())),
        [(Quant::Forall, u)] => Ok(PrefixShape::AOnly(u.clone())),
        [(Quant::Forall, a), (Quant::Exists, e)] => Ok(PrefixShape::AThenE(a.clone(), e.clone())),
        [(Quant::Exists, e), (Quant::Forall, a)] => Ok(PrefixShape::EThenA(e.clone(), a.clone())),
        _ => Err(FormulaError::Unsupported(format!(
            "{} trajectory quantifier alternations; at most one is supported",
            runs.len() - 1
        ))),
    }
}

/// Negation normal form: sugar expanded, negations pushed onto atoms.
pub fn nnf(body: &Body) -> Body {
    to_nnf(body, true)
}

fn to_nnf(b: &Body, pos: bool) -> Body {
    match b {
        Body::True => {
            if pos {
                Body::True
            } else {
                Body::False
            }
        }
        Body::False => {
            if pos {
                Body::False
            } else {
                Body::True
            }
        }
        Body::Atom { .. } => {
            if pos {
                b.clone()
            } else {
                Body::not(b.clone())
            }
        }
        Body::Not(a) => to_nnf(a, !pos),
        Body::And(a, c) => {
            if pos {
                Body::and(to_nnf(a, true), to_nnf(c, true))
            } else {
                Body::or(to_nnf(a, false), to_nnf(c, false))
            }
        }
        Body::Or(a, c) => {
            if pos {
                Body::or(to_nnf(a, true), to_nnf(c, true))
            } else {
                Body::and(to_nnf(a, false), to_nnf(c, false))
            }
        }
        Body::Implies(a, c) => {
            if pos {
                Body::or(to_nnf(a, false), to_nnf(c, true))
            } else {
                Body::and(to_nnf(a, true), to_nnf(c, false))
            }
        }
        Body::Iff(a, c) => {
            // a <-> c  ==  (a & c) | (!a & !c);  !(a <-> c)  ==  (a & !c) | (!a & c)
            let (c1, c2) = if pos { (true, false) } else { (false, true) };
            Body::or(
                Body::and(to_nnf(a, true), to_nnf(c, c1)),
                Body::and(to_nnf(a, false), to_nnf(c, c2)),
            )
        }
        Body::Until(a, c) => {
            if pos {
                Body::until(to_nnf(a, true), to_nnf(c, true))
            } else {
                Body::release(to_nnf(a, false), to_nnf(c, false))
            }
        }
        Body::Release(a, c) => {
            if pos {
                Body::release(to_nnf(a, true), to_nnf(c, true))
            } else {
                Body::until(to_nnf(a, false), to_nnf(c, false))
            }
        }
        Body::Eventually(a) => {
            if pos {
                Body::until(Body::True, to_nnf(a, true))
            } else {
                Body::release(Body::False, to_nnf(a, false))
            }
        }
        Body::Globally(a) => {
            if pos {
                Body::release(Body::False, to_nnf(a, true))
            } else {
                Body::until(Body::True, to_nnf(a, false))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NnfId(pub u32);

/// Interned NNF node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NnfNode {
    True,
    False,
    Lit {
        prop: String,
        trace: usize,
        traj: usize,
        positive: bool,
    },
    And(NnfId, NnfId),
    Or(NnfId, NnfId),
    Until(NnfId, NnfId),
    Release(NnfId, NnfId),
}

/// Hash-consed NNF DAG. Children always have smaller ids than parents.
#[derive(Debug, Clone, Default)]
pub struct NnfArena {
    nodes: Vec<NnfNode>,
    index: HashMap<NnfNode, NnfId>,
}

impl NnfArena {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, n: NnfNode) -> NnfId {
        if let Some(&id) = self.index.get(&n) {
            return id;
        }
        let id = NnfId(self.nodes.len() as u32);
        self.nodes.push(n.clone());
        self.index.insert(n, id);
        id
    }

    /// Interns the NNF of `body`.
    pub fn add(&mut self, body: &Body) -> NnfId {
        self.add_nnf(&nnf(body))
    }

    fn add_nnf(&mut self, b: &Body) -> NnfId {
        let n = match b {
            Body::True => NnfNode::True,
            Body::False => NnfNode::False,
            Body::Atom { prop, trace, traj } => NnfNode::Lit {
                prop: prop.clone(),
                trace: *trace,
                traj: *traj,
                positive: true,
            },
            Body::Not(a) => match &**a {
                Body::Atom { prop, trace, traj } => NnfNode::Lit {
                    prop: prop.clone(),
                    trace: *trace,
                    traj: *traj,
                    positive: false,
                },
                _ => unreachable!("input is in NNF"),
            },
            Body::And(a, c) => NnfNode::And(self.add_nnf(a), self.add_nnf(c)),
            Body::Or(a, c) => NnfNode::Or(self.add_nnf(a), self.add_nnf(c)),
            Body::Until(a, c) => NnfNode::Until(self.add_nnf(a), self.add_nnf(c)),
            Body::Release(a, c) => NnfNode::Release(self.add_nnf(a), self.add_nnf(c)),
            _ => unreachable!("input is in NNF"),
        };
        self.intern(n)
    }

    pub fn node(&self, id: NnfId) -> &NnfNode {
        &self.nodes[id.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

impl fmt::Display for Quant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quant::Exists => "exists",
            Quant::Forall => "forall",
        })
    }
}

struct BodyPrinter<'a> {
    f: &'a AhltlFormula,
    b: &'a Body,
}

impl fmt::Display for BodyPrinter<'_> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |b| BodyPrinter { f: self.f, b };
        let bin = |out: &mut fmt::Formatter<'_>, a, op: &str, c| {
            write!(out, "({} {op} {})", sub(a), sub(c))
        };
        match self.b {
            Body::True => out.write_str("true"),
            Body::False => out.write_str("false"),
            Body::Atom { prop, trace, traj } => {
                let pv = self.f.trace_prefix.get(*trace).map_or("?", |b| b.var.as_str());
                let tv = self.f.traj_prefix.get(*traj).map_or("?", |b| b.var.as_str());
                write!(out, "{prop}[{pv},{tv}]")
            }
            Body::Not(a) => write!(out, "!{}", sub(a)),
            Body::Eventually(a) => write!(out, "F {}", sub(a)),
            Body::Globally(a) => write!(out, "G {}", sub(a)),
            Body::And(a, c) => bin(out, a, "&", c),
            Body::Or(a, c) => bin(out, a, "|", c),
            Body::Implies(a, c) => bin(out, a, "->", c),
            Body::Iff(a, c) => bin(out, a, "<->", c),
            Body::Until(a, c) => bin(out, a, "U", c),
            Body::Release(a, c) => bin(out, a, "R", c),
        }
    }
}

impl AhltlFormula {
    /// Prints a body using this formula's variable names.
    pub fn display_body<'a>(&'a self, b: &'a Body) -> impl fmt::Display + 'a {
        BodyPrinter { f: self, b }
    }
}

impl fmt::Display for AhltlFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.trace_prefix {
            write!(f, "{} {}", b.quant, b.var)?;
            if let Some(m) = &b.model {
                write!(f, " in {m}")?;
            }
            f.write_str(". ")?;
        }
        for b in &self.traj_prefix {
            let q = match b.quant {
                Quant::Exists => "E",
                Quant::Forall => "A",
            };
            write!(f, "{q} {}. ", b.var)?;
        }
        write!(f, "{}", self.display_body(&self.body))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize) -> Body {
        Body::atom("p", i, 0)
    }

    #[test]
    fn nnf_duals() {
        // !G p  ->  true U !p
        assert_eq!(
            nnf(&Body::not(Body::globally(p(0)))),
            Body::until(Body::True, Body::not(p(0)))
        );
        // !(p U q)  ->  !p R !q
        let q = Body::atom("q", 0, 0);
        assert_eq!(
            nnf(&Body::not(Body::until(p(0), q.clone()))),
            Body::release(Body::not(p(0)), Body::not(q.clone()))
        );
        assert_eq!(
            nnf(&Body::not(Body::release(p(0), q.clone()))),
            Body::until(Body::not(p(0)), Body::not(q))
        );
        assert_eq!(nnf(&Body::not(Body::not(p(0)))), p(0));
    }

    #[test]
    fn nnf_is_nnf_and_idempotent() {
        let b = Body::not(Body::iff(
            Body::implies(p(0), Body::eventually(p(1))),
            Body::globally(Body::False),
        ));
        let n = nnf(&b);
        assert!(n.is_nnf());
        assert!(!b.is_nnf());
        assert_eq!(nnf(&n), n);
    }

    #[test]
    fn classify_shapes() {
        let tb = |q| TrajBinding {
            quant: q,
            var: "t".into(),
        };
        use Quant::*;
        assert_eq!(
            classify(&[tb(Exists), tb(Exists)]).unwrap(),
            PrefixShape::EOnly(vec![0, 1])
        );
        assert_eq!(
            classify(&[tb(Forall), tb(Exists)]).unwrap(),
            PrefixShape::AThenE(vec![0], vec![1])
        );
        assert_eq!(
            classify(&[tb(Exists), tb(Forall), tb(Forall)]).unwrap(),
            PrefixShape::EThenA(vec![0], vec![1, 2])
        );
        assert!(matches!(
            classify(&[tb(Exists), tb(Forall), tb(Exists)]),
            Err(FormulaError::Unsupported(_))
        ));
        assert!(matches!(classify(&[]), Err(FormulaError::Unsupported(_))));
    }

    #[test]
    fn arena_shares_subterms() {
        let mut a = NnfArena::new();
        let x = a.add(&Body::and(p(0), p(0)));
        let y = a.add(&Body::and(p(0), p(0)));
        assert_eq!(x, y);
        // p, p & p
        assert_eq!(a.len(), 2);
    }
}
