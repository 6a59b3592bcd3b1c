//! Stand-alone QBF solver over the internal expansion evaluator.
//!
//! Usage: `ahltl-qbf <file>`. Reads QCIR or QDIMACS, prints `s cnf 1` with
//! `V` lines for the leading existential block and exits 10, or prints
//! `s cnf 0` and exits 20. Exit code 1 signals an error.

mod gates;

use std::process::ExitCode;

use ahltl_core::qbf::{eval_expand, parse_qcir, parse_qdimacs, ExpandResult};
use ahltl::solver::DEFAULT_BUDGET;

fn is_qcir(text: &str) -> bool {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .is_some_and(|l| l.starts_with("#QCIR"))
}

fn main() -> ExitCode {
    let Some(path) = std::env::args().nth(1) else {
        eprintln!("usage: ahltl-qbf <file>");
        return ExitCode::from(1);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("ahltl-qbf: {path}: {e}");
            return ExitCode::from(1);
        }
    };
    let parsed = if is_qcir(&text) {
        parse_qcir(&text)
    } else {
        parse_qdimacs(&text)
    };
    let q = match parsed {
        Ok(q) => q,
        Err(e) => {
            eprintln!("ahltl-qbf: {path}: {e}");
            return ExitCode::from(1);
        }
    };
    let recovered = if is_qcir(&text) { None } else { gates::recover(&q) };
    let target = recovered.as_ref().map_or(&q, |r| &r.query);
    match eval_expand(target, DEFAULT_BUDGET) {
        ExpandResult::Sat(mut w) => {
            if let (Some(r), Some(lead)) = (&recovered, q.merged_blocks().first()) {
                r.complete(&mut w, &lead.vars);
            }
            println!("s cnf 1");
            let lits: Vec<String> = w
                .assignment
                .iter()
                .map(|&(v, b)| if b { format!("{}", v.0) } else { format!("-{}", v.0) })
                .collect();
            for chunk in lits.chunks(16) {
                println!("V {} 0", chunk.join(" "));
            }
            ExitCode::from(10)
        }
        ExpandResult::Unsat(_) => {
            println!("s cnf 0");
            ExitCode::from(20)
        }
        ExpandResult::BudgetExceeded | ExpandResult::Interrupted => {
            eprintln!("ahltl-qbf: budget exceeded");
            ExitCode::from(1)
        }
    }
}
