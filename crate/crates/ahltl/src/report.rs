//! Text and JSON rendering of [`BmcReport`].

use std::fmt::Write;

use serde::Serialize;

use crate::bmc::{BmcReport, Iteration, OracleCheck, Outcome, Timings, WitnessReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    verdict: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    bound: Option<[usize; 2]>,
    completeness: Option<[usize; 2]>,
    iterations: &'a [Iteration],
    timings: &'a Timings,
    witness: Option<&'a WitnessReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<&'a OracleCheck>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    artifacts: Vec<String>,
}

pub fn verdict_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Holds => "holds",
        Outcome::Violated => "violated",
        Outcome::Unknown { .. } => "unknown",
    }
}

pub fn emit_report(r: &BmcReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => text(r),
        ReportFormat::Json => json(r),
    }
}

fn json(r: &BmcReport) -> String {
    let j = JsonReport {
        verdict: verdict_name(r.outcome),
        bound: match r.outcome {
            Outcome::Unknown { k, m } => Some([k, m]),
            _ => None,
        },
        completeness: r.completeness.map(|(k, m)| [k, m]),
        iterations: &r.iterations,
        timings: &r.timings,
        witness: r.witness.as_ref(),
        oracle: r.oracle.as_ref(),
        artifacts: r.artifacts.iter().map(|p| p.display().to_string()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&j).expect("report serializes");
    s.push('\n');
    s
}

fn text(r: &BmcReport) -> String {
    let mut s = String::new();
    let _ = match r.outcome {
        Outcome::Holds => writeln!(s, "RESULT: HOLDS"),
        Outcome::Violated => writeln!(s, "RESULT: VIOLATED"),
        Outcome::Unknown { k, m } => writeln!(s, "RESULT: UNKNOWN (k={k}, m={m})"),
    };
    if let Some((k, m)) = r.completeness {
        let _ = writeln!(s, "completeness bound: K={k}, M={m}");
    }
    let _ = writeln!(s, "\n{:>4} {:>5}  {:<8} {:<8}", "k", "m", "hpes", "hopt");
    for it in &r.iterations {
        let _ = writeln!(
            s,
            "{:>4} {:>5}  {:<8} {:<8}",
            it.k,
            it.m,
            it.hpes.unwrap_or("-"),
            it.hopt.unwrap_or("-")
        );
    }
    let t = &r.timings;
    let _ = writeln!(
        s,
        "\ntimings: genQBF {:.3}s  buildTr {:.3}s  solveQBF {:.3}s  total {:.3}s",
        t.gen_qbf_s, t.build_tr_s, t.solve_qbf_s, t.total_s
    );
    if let Some(o) = &r.oracle {
        let show = |v: Option<bool>| v.map_or("-", |b| if b { "true" } else { "false" });
        match &o.skipped {
            Some(why) => {
                let _ = writeln!(s, "oracle at k={}, m={}: skipped ({why})", o.k, o.m);
            }
            None => {
                let _ = writeln!(
                    s,
                    "oracle at k={}, m={}: hpes {}  hopt {}  (agrees)",
                    o.k,
                    o.m,
                    show(o.hpes),
                    show(o.hopt)
                );
            }
        }
    }
    if let Some(w) = &r.witness {
        let _ = writeln!(s, "\nwitness ({}, k={}, m={}):", w.source, w.k, w.m);
        for t in &w.decoded.traces {
            let _ = writeln!(s, "  {} in {}: {}", t.var, t.model, t.states.join(" "));
            let labels: Vec<String> = t.labels.iter().map(|l| format!("{{{}}}", l.join(","))).collect();
            let _ = writeln!(s, "    labels: {}", labels.join(" "));
        }
        for t in &w.decoded.trajectories {
            let steps: Vec<String> = t.steps.iter().map(|st| format!("{{{}}}", st.join(","))).collect();
            let _ = writeln!(s, "  {}: {}", t.var, steps.join(" "));
        }
        if !w.decoded.grid.is_empty() {
            s.push('\n');
            for line in w.decoded.grid.lines() {
                let _ = writeln!(s, "  {line}");
            }
        }
        for warn in &w.decoded.warnings {
            let _ = writeln!(s, "  warning: {warn}");
        }
    }
    for a in &r.artifacts {
        let _ = writeln!(s, "kept query: {}", a.display());
    }
    s
}
