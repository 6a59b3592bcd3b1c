//! Kripke structures: parsing, validation and the graph queries the checker
//! needs (acyclicity, maximum depth, bounded trace enumeration).
//!
//! Model files are line oriented:
//!
//! ```text
//! # comment
//! model K
//! props h l obs_a obs_b
//! state s0 obs_a
//! state s1 h obs_b
//! init s0
//! trans s0 -> s1
//! trans s1 -> s1
//! ```
//!
//! The proposition `halt` is reserved. When it is not written it is added and
//! attached to every terminal state (a state whose only successor is itself).

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Reserved proposition marking terminal states.
pub const HALT: &str = "halt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PropId(pub u32);

impl PropId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: undeclared state `{name}`")]
    UndeclaredState { line: usize, name: String },
    #[error("line {line}: undeclared proposition `{name}`")]
    UndeclaredProp { line: usize, name: String },
    #[error("line {line}: duplicate {what} `{name}`")]
    Duplicate {
        line: usize,
        what: &'static str,
        name: String,
    },
    #[error("missing `model` line")]
    NoName,
    #[error("no initial state")]
    NoInit,
    #[error("model declares no states")]
    NoStates,
    #[error("state `{0}` has no outgoing transition")]
    NoSuccessor(String),
    #[error("state `{0}` is labeled `halt` but is not terminal")]
    HaltOnNonTerminal(String),
    #[error("model `{0}` is not acyclic")]
    NotAcyclic(String),
}

/// A finite Kripke structure with a single initial state.
///
/// States are dense ids `0..n`; the original names are kept for printing and
/// witness decoding. Labels are sorted proposition ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KripkeModel {
    name: String,
    props: Vec<String>,
    state_names: Vec<String>,
    labels: Vec<Vec<PropId>>,
    init: StateId,
    succ: Vec<Vec<StateId>>,
}

impl KripkeModel {
    /// Builds a model from already resolved parts, applying the same
    /// validation as the parser (successors, halt labeling).
    pub fn new(
        name: impl Into<String>,
        props: Vec<String>,
        state_names: Vec<String>,
        labels: Vec<Vec<PropId>>,
        init: StateId,
        transitions: &[(StateId, StateId)],
    ) -> Result<Self, ModelError> {
        if state_names.is_empty() {
            return Err(ModelError::NoStates);
        }
        let n = state_names.len();
        let mut succ = vec![Vec::new(); n];
        for &(a, b) in transitions {
            succ[a.index()].push(b);
        }
        for s in &mut succ {
            s.sort();
            s.dedup();
        }
        let mut labels = labels;
        for l in &mut labels {
            l.sort();
            l.dedup();
        }
        let mut model = KripkeModel {
            name: name.into(),
            props,
            state_names,
            labels,
            init,
            succ,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&mut self) -> Result<(), ModelError> {
        for (i, s) in self.succ.iter().enumerate() {
            if s.is_empty() {
                return Err(ModelError::NoSuccessor(self.state_names[i].clone()));
            }
        }
        let halt = match self.prop_id(HALT) {
            Some(h) => h,
            None => {
                self.props.push(HALT.to_string());
                PropId(self.props.len() as u32 - 1)
            }
        };
        for i in 0..self.state_names.len() {
            let terminal = self.is_terminal(StateId(i as u32));
            let labeled = self.labels[i].binary_search(&halt).is_ok();
            if labeled && !terminal {
                return Err(ModelError::HaltOnNonTerminal(self.state_names[i].clone()));
            }
            if terminal && !labeled {
                let pos = self.labels[i].binary_search(&halt).unwrap_err();
                self.labels[i].insert(pos, halt);
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    pub fn prop_id(&self, name: &str) -> Option<PropId> {
        self.props
            .iter()
            .position(|p| p == name)
            .map(|i| PropId(i as u32))
    }

    pub fn halt_prop(&self) -> PropId {
        self.prop_id(HALT).expect("validated models declare halt")
    }

    pub fn num_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_names.len() as u32).map(StateId)
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.index()]
    }

    pub fn state_id(&self, name: &str) -> Option<StateId> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| StateId(i as u32))
    }

    pub fn init(&self) -> StateId {
        self.init
    }

    pub fn successors(&self, s: StateId) -> &[StateId] {
        &self.succ[s.index()]
    }

    pub fn transitions(&self) -> impl Iterator<Item = (StateId, StateId)> + '_ {
        self.succ
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&t| (StateId(i as u32), t)))
    }

    pub fn label(&self, s: StateId) -> &[PropId] {
        &self.labels[s.index()]
    }

    pub fn holds(&self, s: StateId, p: PropId) -> bool {
        self.labels[s.index()].binary_search(&p).is_ok()
    }

    pub fn is_halt(&self, s: StateId) -> bool {
        self.holds(s, self.halt_prop())
    }

    /// A state is terminal when its only successor is itself.
    pub fn is_terminal(&self, s: StateId) -> bool {
        self.succ[s.index()] == [s]
    }

    /// True iff the only cycles are self-loops on terminal states.
    pub fn is_acyclic(&self) -> bool {
        // iterative three-colour DFS over the graph without terminal self-loops
        let n = self.num_states();
        let mut colour = vec![0u8; n];
        for root in 0..n {
            if colour[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            colour[root] = 1;
            while let Some(&mut (v, ref mut next)) = stack.last_mut() {
                let succ = &self.succ[v];
                if *next < succ.len() {
                    let w = succ[*next].index();
                    *next += 1;
                    if w == v {
                        if !self.is_terminal(StateId(v as u32)) {
                            return false;
                        }
                        continue;
                    }
                    match colour[w] {
                        0 => {
                            colour[w] = 1;
                            stack.push((w, 0));
                        }
                        1 => return false,
                        _ => {}
                    }
                } else {
                    colour[v] = 2;
                    stack.pop();
                }
            }
        }
        true
    }

    /// Longest path (edge count) from the initial state to a terminal state,
    /// ignoring terminal self-loops.
    pub fn max_depth(&self) -> Result<usize, ModelError> {
        if !self.is_acyclic() {
            return Err(ModelError::NotAcyclic(self.name.clone()));
        }
        let mut memo: Vec<Option<usize>> = vec![None; self.num_states()];
        Ok(self.depth_from(self.init, &mut memo))
    }

    fn depth_from(&self, s: StateId, memo: &mut Vec<Option<usize>>) -> usize {
        if let Some(d) = memo[s.index()] {
            return d;
        }
        let mut best = 0;
        for &t in self.successors(s) {
            if t != s {
                best = best.max(1 + self.depth_from(t, memo));
            }
        }
        memo[s.index()] = Some(best);
        best
    }

    /// All state sequences of length `k + 1` starting in the initial state.
    /// Terminal states repeat through their self-loop.
    pub fn paths_up_to(&self, k: usize) -> Vec<Vec<StateId>> {
        let mut out = Vec::new();
        let mut cur = vec![self.init];
        self.extend_paths(k, &mut cur, &mut out);
        out
    }

    fn extend_paths(&self, k: usize, cur: &mut Vec<StateId>, out: &mut Vec<Vec<StateId>>) {
        if cur.len() == k + 1 {
            out.push(cur.clone());
            return;
        }
        let last = *cur.last().unwrap();
        for &t in self.successors(last) {
            cur.push(t);
            self.extend_paths(k, cur, out);
            cur.pop();
        }
    }

    /// Distinct label sequences of length `k + 1` (one per path, duplicates
    /// removed, first occurrence order).
    pub fn traces_up_to(&self, k: usize) -> Vec<Vec<Vec<PropId>>> {
        let mut out: Vec<Vec<Vec<PropId>>> = Vec::new();
        for path in self.paths_up_to(k) {
            let trace: Vec<Vec<PropId>> = path.iter().map(|&s| self.label(s).to_vec()).collect();
            if !out.contains(&trace) {
                out.push(trace);
            }
        }
        out
    }
}

impl fmt::Display for KripkeModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "model {}", self.name)?;
        write!(f, "props")?;
        for p in &self.props {
            write!(f, " {p}")?;
        }
        writeln!(f)?;
        for (i, name) in self.state_names.iter().enumerate() {
            write!(f, "state {name}")?;
            for p in &self.labels[i] {
                write!(f, " {}", self.props[p.index()])?;
            }
            writeln!(f)?;
        }
        writeln!(f, "init {}", self.state_names[self.init.index()])?;
        for (a, b) in self.transitions() {
            writeln!(
                f,
                "trans {} -> {}",
                self.state_names[a.index()],
                self.state_names[b.index()]
            )?;
        }
        Ok(())
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '.' || c == '-')
}

/// Parses a model file. See the module docs for the grammar.
pub fn parse_model(text: &str) -> Result<KripkeModel, ModelError> {
    let mut name: Option<String> = None;
    let mut props: Vec<String> = Vec::new();
    let mut states: Vec<(usize, String, Vec<(usize, String)>)> = Vec::new();
    let mut init: Option<(usize, String)> = None;
    let mut trans: Vec<(usize, String, String)> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let mut words: Vec<(usize, &str)> = Vec::new();
        let mut offset = 0;
        for w in line.split_whitespace() {
            let col = line[offset..].find(w).unwrap() + offset;
            offset = col + w.len();
            words.push((col + 1, w));
        }
        let Some(&(kw_col, kw)) = words.first() else {
            continue;
        };
        let syntax = |column: usize, message: &str| ModelError::Syntax {
            line: line_no,
            column,
            message: message.to_string(),
        };
        let check_ident = |&(col, w): &(usize, &str)| {
            if is_ident(w) {
                Ok(())
            } else {
                Err(syntax(col, "expected identifier"))
            }
        };
        match kw {
            "model" => {
                if words.len() != 2 {
                    return Err(syntax(kw_col, "expected `model <name>`"));
                }
                check_ident(&words[1])?;
                if name.is_some() {
                    return Err(ModelError::Duplicate {
                        line: line_no,
                        what: "model line",
                        name: words[1].1.to_string(),
                    });
                }
                name = Some(words[1].1.to_string());
            }
            "props" => {
                for w in &words[1..] {
                    check_ident(w)?;
                    if props.iter().any(|p| p == w.1) {
                        return Err(ModelError::Duplicate {
                            line: line_no,
                            what: "proposition",
                            name: w.1.to_string(),
                        });
                    }
                    props.push(w.1.to_string());
                }
            }
            "state" => {
                if words.len() < 2 {
                    return Err(syntax(kw_col, "expected `state <name> [props...]`"));
                }
                check_ident(&words[1])?;
                for w in &words[2..] {
                    check_ident(w)?;
                }
                let labels = words[2..]
                    .iter()
                    .map(|&(_, w)| (line_no, w.to_string()))
                    .collect();
                states.push((line_no, words[1].1.to_string(), labels));
            }
            "init" => {
                if words.len() != 2 {
                    return Err(syntax(kw_col, "expected `init <state>`"));
                }
                if init.is_some() {
                    return Err(ModelError::Duplicate {
                        line: line_no,
                        what: "init line",
                        name: words[1].1.to_string(),
                    });
                }
                init = Some((line_no, words[1].1.to_string()));
            }
            "trans" => {
                if words.len() != 4 || words[2].1 != "->" {
                    return Err(syntax(kw_col, "expected `trans <state> -> <state>`"));
                }
                trans.push((line_no, words[1].1.to_string(), words[3].1.to_string()));
            }
            _ => return Err(syntax(kw_col, "unknown directive")),
        }
    }

    let name = name.ok_or(ModelError::NoName)?;
    let mut index: BTreeMap<String, StateId> = BTreeMap::new();
    let mut state_names = Vec::new();
    let mut labels = Vec::new();
    for (line, sname, lbls) in &states {
        if index.contains_key(sname) {
            return Err(ModelError::Duplicate {
                line: *line,
                what: "state",
                name: sname.clone(),
            });
        }
        index.insert(sname.clone(), StateId(state_names.len() as u32));
        state_names.push(sname.clone());
        let mut ids = Vec::new();
        for (l, p) in lbls {
            match props.iter().position(|q| q == p) {
                Some(i) => ids.push(PropId(i as u32)),
                None if p == HALT => {
                    props.push(HALT.to_string());
                    ids.push(PropId(props.len() as u32 - 1));
                }
                None => {
                    return Err(ModelError::UndeclaredProp {
                        line: *l,
                        name: p.clone(),
                    })
                }
            }
        }
        labels.push(ids);
    }
    if state_names.is_empty() {
        return Err(ModelError::NoStates);
    }
    let lookup = |line: usize, s: &str| {
        index
            .get(s)
            .copied()
            .ok_or_else(|| ModelError::UndeclaredState {
                line,
                name: s.to_string(),
            })
    };
    let (init_line, init_name) = init.ok_or(ModelError::NoInit)?;
    let init = lookup(init_line, &init_name)?;
    let mut edges = Vec::with_capacity(trans.len());
    for (line, a, b) in &trans {
        edges.push((lookup(*line, a)?, lookup(*line, b)?));
    }
    KripkeModel::new(name, props, state_names, labels, init, &edges)
}

/// Named collection of models; trace quantifiers pick one by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelBundle {
    models: BTreeMap<String, KripkeModel>,
    default: Option<String>,
}

impl ModelBundle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(model: KripkeModel) -> Self {
        let mut b = Self::new();
        b.insert(model).expect("empty bundle");
        b
    }

    /// Adds a model under its own name. The first model inserted is the
    /// default for quantifiers without an explicit `in` clause.
    pub fn insert(&mut self, model: KripkeModel) -> Result<(), ModelError> {
        self.insert_as(model.name().to_string(), model)
    }

    pub fn insert_as(&mut self, name: String, model: KripkeModel) -> Result<(), ModelError> {
        if self.models.contains_key(&name) {
            return Err(ModelError::Duplicate {
                line: 0,
                what: "model",
                name,
            });
        }
        if self.default.is_none() {
            self.default = Some(name.clone());
        }
        self.models.insert(name, model);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&KripkeModel> {
        self.models.get(name)
    }

    /// The model a quantifier ranges over: the named one, or the default.
    pub fn resolve(&self, name: Option<&str>) -> Option<&KripkeModel> {
        match name {
            Some(n) => self.models.get(n),
            None => self.default.as_deref().and_then(|d| self.models.get(d)),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &KripkeModel)> {
        self.models.iter().map(|(k, v)| (k.as_str(), v))
    }
}
