#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ahltl_core::{parse_formula, parse_model, AhltlFormula, ModelBundle};

pub const TEMPLATES: [&str; 10] = [
    "G (p[p0,{a}] <-> p[p1,{a}])",
    "F (q[p0,{a}] & q[p1,{b}])",
    "(p[p0,{a}] != p[p1,{a}]) & G (q[p0,{b}] = q[p1,{b}])",
    "p[p0,{a}] U q[p1,{b}]",
    "G (p[p0,{a}] -> F q[p1,{b}])",
    "(F p[p0,{a}] & G q[p1,{a}]) -> G (p[p0,{b}] = p[p1,{b}])",
    "q[p0,{a}] R (p[p1,{b}] | q[p1,{a}])",
    "F G (p[p0,{a}] = q[p1,{b}])",
    "G F (p[p0,{a}] & !p[p1,{b}])",
    "!(p[p0,{a}] U (q[p0,{b}] & q[p1,{b}]))",
];

pub const TRAJ_PREFIXES: [&str; 6] = ["E", "A", "EE", "AA", "AE", "EA"];

#[derive(Debug, Clone)]
pub struct Instance {
    pub seed: u64,
    pub model: String,
    pub formula: String,
    pub k: usize,
    pub m: usize,
}

impl Instance {
    pub fn bundle(&self) -> ModelBundle {
        ModelBundle::single(parse_model(&self.model).unwrap())
    }

    pub fn parsed(&self) -> AhltlFormula {
        parse_formula(&self.formula).unwrap()
    }
}

/// Acyclic model with at most `max_states` states over props `p`, `q`.
pub fn random_model_text(rng: &mut StdRng, max_states: usize) -> String {
    let n = rng.gen_range(2..=max_states);
    let mut text = String::from("model r\nprops p q\n");
    for i in 0..n {
        text.push_str(&format!("state s{i}"));
        for prop in ["p", "q"] {
            if rng.gen_bool(0.5) {
                text.push_str(&format!(" {prop}"));
            }
        }
        text.push('\n');
    }
    text.push_str("init s0\n");
    for i in 0..n {
        let later: Vec<usize> = (i + 1..n).filter(|_| rng.gen_bool(0.45)).collect();
        if later.is_empty() || (i > 0 && rng.gen_bool(0.15)) {
            text.push_str(&format!("trans s{i} -> s{i}\n"));
        } else {
            for j in later {
                text.push_str(&format!("trans s{i} -> s{j}\n"));
            }
        }
    }
    text
}

pub fn instance(seed: u64) -> Instance {
    let mut rng = StdRng::seed_from_u64(seed);
    let model = random_model_text(&mut rng, 5);
    let quants = ["forall p0. forall p1.", "forall p0. exists p1.", "exists p0. forall p1.", "exists p0. exists p1."]
        [rng.gen_range(0..4)];
    let trajs = TRAJ_PREFIXES[rng.gen_range(0..TRAJ_PREFIXES.len())];
    let (a, b) = if trajs.len() == 2 { ("t0", "t1") } else { ("t0", "t0") };
    let mut prefix = String::from(quants);
    for (i, q) in trajs.chars().enumerate() {
        prefix.push_str(&format!(" {q} t{i}."));
    }
    let body = TEMPLATES[rng.gen_range(0..TEMPLATES.len())]
        .replace("{a}", a)
        .replace("{b}", b);
    Instance {
        seed,
        model,
        formula: format!("{prefix} {body}"),
        k: rng.gen_range(0..=3),
        m: rng.gen_range(0..=6),
    }
}
