//! Reading solver assignments back as traces, trajectories and the
//! position grid.

use std::cell::Cell;
use std::collections::BTreeSet;
use std::fmt::Write;

use ahltl_core::encoder::Encoding;
use ahltl_core::oracle::AsyncAssignment;
use ahltl_core::qbf::{Quant, Var, Witness};
use ahltl_core::{KripkeModel, ModelBundle};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TraceWitness {
    pub var: String,
    pub model: String,
    pub states: Vec<String>,
    /// Labels of each state, in path order.
    pub labels: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrajectoryWitness {
    pub var: String,
    /// Trace variables selected at each step `0..=m`.
    pub steps: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DecodedWitness {
    pub traces: Vec<TraceWitness>,
    pub trajectories: Vec<TrajectoryWitness>,
    /// Position grid per (trace, trajectory), one row per position.
    pub grid: String,
    pub warnings: Vec<String>,
}

impl DecodedWitness {
    pub fn is_empty(&self) -> bool {
        self.traces.is_empty() && self.trajectories.is_empty()
    }
}

impl TraceWitness {
    /// The path's labels restricted to props starting with `prefix`, with
    /// consecutive repeats collapsed.
    pub fn observations(&self, prefix: &str) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for labels in &self.labels {
            let obs: Vec<&str> = labels
                .iter()
                .filter_map(|l| l.strip_prefix(prefix))
                .collect();
            let obs = obs.join("+");
            if out.last() != Some(&obs) {
                out.push(obs);
            }
        }
        out
    }
}

/// Decodes the leading existential trace and trajectory variables of
/// `enc` from `w`.
pub fn decode_witness(w: &Witness, enc: &Encoding, bundle: &ModelBundle) -> DecodedWitness {
    let f = &enc.formula;
    let mut out = DecodedWitness::default();
    let lead_traces = f
        .trace_prefix
        .iter()
        .take_while(|b| b.quant == Quant::Exists)
        .count();
    let all_traces = lead_traces == f.num_paths();
    let lead_trajs = if all_traces {
        f.traj_prefix
            .iter()
            .take_while(|b| b.quant == Quant::Exists)
            .count()
    } else {
        0
    };
    if lead_traces == 0 {
        out.warnings.push("no extractable prefix".into());
        return out;
    }

    let models: Vec<&KripkeModel> = f
        .trace_prefix
        .iter()
        .map(|b| bundle.resolve(b.model.as_deref()).expect("resolved formula"))
        .collect();
    let missing = Cell::new(false);
    let read = |v: Var| {
        w.get(v).unwrap_or_else(|| {
            missing.set(true);
            false
        })
    };

    let mut paths = Vec::new();
    for (i, b) in f.trace_prefix.iter().take(lead_traces).enumerate() {
        let model = models[i];
        match enc.decode_path(model, i, &read) {
            Some(p) => {
                out.traces.push(TraceWitness {
                    var: b.var.clone(),
                    model: model.name().to_string(),
                    states: p.iter().map(|&s| model.state_name(s).to_string()).collect(),
                    labels: p
                        .iter()
                        .map(|&s| {
                            model
                                .label(s)
                                .iter()
                                .map(|&q| model.props()[q.index()].clone())
                                .collect()
                        })
                        .collect(),
                });
                paths.push(p);
            }
            None => out
                .warnings
                .push(format!("trace {} decodes to an unused state code", b.var)),
        }
    }

    let mut words: Vec<Vec<u64>> = Vec::new();
    for (t, b) in f.traj_prefix.iter().take(lead_trajs).enumerate() {
        let mut steps = vec![Vec::new(); enc.m + 1];
        let mut word = vec![0u64; enc.m + 1];
        for (p, tb) in f.trace_prefix.iter().enumerate() {
            for (j, bit) in enc.decode_moves(p, t, &read).into_iter().enumerate() {
                if bit {
                    steps[j].push(tb.var.clone());
                    word[j] |= 1 << p;
                }
            }
        }
        out.trajectories.push(TrajectoryWitness {
            var: b.var.clone(),
            steps,
        });
        words.push(word);
    }
    if missing.get() {
        out.warnings
            .push("the solver did not report every witness variable; missing bits read as false".into());
    }

    if !words.is_empty() && paths.len() == f.num_paths() {
        let a = AsyncAssignment {
            models: models.clone(),
            paths,
            words,
            k: enc.k,
            m: enc.m,
        };
        out.grid = render_grid(&a, enc);
    }
    out
}

fn render_grid(a: &AsyncAssignment<'_>, enc: &Encoding) -> String {
    let f = &enc.formula;
    let np = a.paths.len();
    let ptrs = a.pointers();
    let mut s = String::new();
    for (t, tb) in f.traj_prefix.iter().enumerate().take(a.words.len()) {
        for (p, pb) in f.trace_prefix.iter().enumerate() {
            let col = &ptrs[t * np + p];
            let _ = write!(s, "pos[{},{}]", pb.var, tb.var);
            let _ = write!(s, "\n  t   ");
            for j in 0..=enc.m {
                let _ = write!(s, " {}", if a.words[t][j] >> p & 1 == 1 { '1' } else { '0' });
            }
            s.push('\n');
            for i in (0..=enc.k).rev() {
                let _ = write!(s, "  {i:<3} ");
                for c in col.iter().take(enc.m + 1) {
                    let _ = write!(s, " {}", if *c == Some(i) { '#' } else { '.' });
                }
                s.push('\n');
            }
            let _ = write!(s, "  off ");
            for c in col.iter().take(enc.m + 1) {
                let _ = write!(s, " {}", if c.is_none() { '#' } else { '.' });
            }
            s.push('\n');
        }
    }
    s
}

/// Selected trace names per step, as a set, for comparisons in tests.
pub fn step_sets(t: &TrajectoryWitness) -> Vec<BTreeSet<String>> {
    t.steps.iter().map(|s| s.iter().cloned().collect()).collect()
}
