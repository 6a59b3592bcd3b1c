//! Iterative deepening over `(k, m)` with both bounded semantics.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use ahltl_core::encoder::{EncodeError, Encoding, EncodingSession};
use ahltl_core::oracle::{eval_bounded, OracleConfig, OracleError};
use ahltl_core::{AhltlFormula, ModelBundle, Semantics};
use serde::Serialize;
use thiserror::Error;

use crate::solver::{solve, QbfFormat, SolveResult, SolverBackend, Verdict};
use crate::witness::{decode_witness, DecodedWitness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SemanticsChoice {
    Hpes,
    Hopt,
    Both,
}

impl SemanticsChoice {
    fn modes(self) -> &'static [Semantics] {
        match self {
            SemanticsChoice::Hpes => &[Semantics::Hpes],
            SemanticsChoice::Hopt => &[Semantics::Hopt],
            SemanticsChoice::Both => &[Semantics::Hpes, Semantics::Hopt],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bounds {
    /// Deepen up to the completeness bound.
    Auto,
    Fixed { k: usize, m: usize },
}

#[derive(Debug, Clone)]
pub struct BmcConfig<'a> {
    pub bundle: &'a ModelBundle,
    pub formula: &'a AhltlFormula,
    pub semantics: SemanticsChoice,
    pub bounds: Bounds,
    pub backend: SolverBackend,
    /// Write each query here (overwritten per iteration).
    pub emit_qbf: Option<PathBuf>,
    pub format: QbfFormat,
    /// Cross-check the final verdicts against the enumeration oracle.
    pub oracle_budget: Option<u64>,
    pub witness: bool,
}

impl<'a> BmcConfig<'a> {
    pub fn new(bundle: &'a ModelBundle, formula: &'a AhltlFormula, backend: SolverBackend) -> Self {
        BmcConfig {
            bundle,
            formula,
            semantics: SemanticsChoice::Both,
            bounds: Bounds::Auto,
            backend,
            emit_qbf: None,
            format: QbfFormat::Qcir,
            oracle_budget: None,
            witness: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Outcome {
    Holds,
    Violated,
    Unknown { k: usize, m: usize },
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Holds => 0,
            Outcome::Violated => 1,
            Outcome::Unknown { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Iteration {
    pub k: usize,
    pub m: usize,
    pub hpes: Option<&'static str>,
    pub hopt: Option<&'static str>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timings {
    pub gen_qbf_s: f64,
    pub build_tr_s: f64,
    pub solve_qbf_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OracleCheck {
    pub k: usize,
    pub m: usize,
    pub hpes: Option<bool>,
    pub hopt: Option<bool>,
    /// Set when the enumeration ran out of budget.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    /// `"hpes"` of the formula for a holding verdict, of its negation for a
    /// violation.
    pub source: String,
    pub k: usize,
    pub m: usize,
    #[serde(flatten)]
    pub decoded: DecodedWitness,
}

#[derive(Debug, Clone, Serialize)]
pub struct BmcReport {
    pub outcome: Outcome,
    pub iterations: Vec<Iteration>,
    pub timings: Timings,
    /// `(K, M)` for the formula and bundle, when the models are acyclic.
    pub completeness: Option<(usize, usize)>,
    pub witness: Option<WitnessReport>,
    pub oracle: Option<OracleCheck>,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Debug, Error)]
pub enum BmcError {
    #[error("{0}")]
    Input(String),
    #[error("solver failed at k={k}, m={m} ({mode}): {detail}")]
    Solver {
        k: usize,
        m: usize,
        mode: Semantics,
        detail: String,
    },
    #[error("hpes and hopt disagree at the completeness bound k={k}, m={m}; queries written to {}", dump.display())]
    Inconsistent { k: usize, m: usize, dump: PathBuf },
    #[error("oracle disagrees with the solver at k={k}, m={m} ({mode}): solver {solver}, oracle {oracle}")]
    OracleMismatch {
        k: usize,
        m: usize,
        mode: Semantics,
        solver: bool,
        oracle: bool,
    },
}

impl BmcError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BmcError::Input(_) => 3,
            _ => 4,
        }
    }
}

impl From<EncodeError> for BmcError {
    fn from(e: EncodeError) -> Self {
        BmcError::Input(e.to_string())
    }
}

/// `(K, M)`: maximum depth of the bound models and `K·|Paths|·|Trajs|`.
pub fn completeness_bound(bundle: &ModelBundle, f: &AhltlFormula) -> Result<(usize, usize), BmcError> {
    let mut k = 0;
    for b in &f.trace_prefix {
        let model = bundle.resolve(b.model.as_deref()).ok_or_else(|| {
            BmcError::Input(format!(
                "unknown model `{}`",
                b.model.as_deref().unwrap_or("<default>")
            ))
        })?;
        k = k.max(model.max_depth().map_err(|e| BmcError::Input(e.to_string()))?);
    }
    Ok((k, k * f.num_paths() * f.num_trajs()))
}

/// The `(k, m)` pairs visited by the auto schedule.
pub fn schedule(bundle: &ModelBundle, f: &AhltlFormula) -> Result<Vec<(usize, usize)>, BmcError> {
    let (big_k, _) = completeness_bound(bundle, f)?;
    let scale = f.num_paths() * f.num_trajs();
    if big_k == 0 {
        return Ok(vec![(0, 0)]);
    }
    Ok((1..=big_k).map(|k| (k, k * scale)).collect())
}

struct Built {
    enc: Encoding,
    gen: Duration,
    build: Duration,
}

fn build(bundle: &ModelBundle, f: &AhltlFormula, k: usize, m: usize, mode: Semantics) -> Result<Built, BmcError> {
    let t0 = Instant::now();
    let mut s = EncodingSession::new(bundle, f, k, m, mode)?;
    let mut gen = t0.elapsed();
    let t1 = Instant::now();
    s.build_pos();
    let body = s.encode_body()?;
    let enc = s.encode_prefix_shape(body);
    let build = t1.elapsed();
    let t2 = Instant::now();
    let enc = s.assemble(enc);
    gen += t2.elapsed();
    Ok(Built { enc, gen, build })
}

const SOLVER_STACK: usize = 64 << 20;

/// Solves all queries, concurrently when there is more than one.
fn solve_all(queries: &[&Encoding], backend: &SolverBackend) -> Vec<SolveResult> {
    if queries.len() == 1 {
        return vec![solve(&queries[0].query, backend)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = queries
            .iter()
            .map(|e| {
                std::thread::Builder::new()
                    .stack_size(SOLVER_STACK)
                    .spawn_scoped(s, move || solve(&e.query, backend))
                    .expect("spawning solver thread")
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| crate::solver::SolveResult {
                        verdict: Verdict::SolverError("solver thread panicked".into()),
                        witness: None,
                        artifact: None,
                    })
            })
            .collect()
    })
}

fn emit_path(base: &Path, mode: Semantics, both: bool) -> PathBuf {
    if !both {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match base.extension() {
        Some(ext) => format!("{stem}.{}.{}", mode.name(), ext.to_string_lossy()),
        None => format!("{stem}.{}", mode.name()),
    };
    base.with_file_name(name)
}

pub fn run_bmc(cfg: &BmcConfig<'_>) -> Result<BmcReport, BmcError> {
    let start = Instant::now();
    let f = cfg.formula;
    f.validate().map_err(|e| BmcError::Input(e.to_string()))?;
    f.classify_prefix().map_err(|e| BmcError::Input(e.to_string()))?;
    f.resolve(cfg.bundle).map_err(|e| BmcError::Input(e.to_string()))?;

    let completeness = match cfg.bounds {
        Bounds::Auto => Some(completeness_bound(cfg.bundle, f)?),
        Bounds::Fixed { .. } => completeness_bound(cfg.bundle, f).ok(),
    };
    let steps = match cfg.bounds {
        Bounds::Auto => schedule(cfg.bundle, f)?,
        Bounds::Fixed { k, m } => vec![(k, m)],
    };
    let modes = cfg.semantics.modes();
    let both = modes.len() == 2;

    let mut timings = Timings::default();
    let mut iterations = Vec::new();
    let mut artifacts = Vec::new();
    let mut decided = None;
    let mut holds_witness = None;

    for &(k, m) in &steps {
        let mut built = Vec::new();
        for &mode in modes {
            let b = build(cfg.bundle, f, k, m, mode)?;
            timings.gen_qbf_s += b.gen.as_secs_f64();
            timings.build_tr_s += b.build.as_secs_f64();
            if let Some(base) = &cfg.emit_qbf {
                let path = emit_path(base, mode, both);
                std::fs::write(&path, cfg.format.render(&b.enc.query))
                    .map_err(|e| BmcError::Input(format!("writing {}: {e}", path.display())))?;
            }
            built.push(b);
        }
        let t = Instant::now();
        let encs: Vec<&Encoding> = built.iter().map(|b| &b.enc).collect();
        let results = solve_all(&encs, &cfg.backend);
        timings.solve_qbf_s += t.elapsed().as_secs_f64();

        let mut it = Iteration { k, m, hpes: None, hopt: None };
        let mut hpes = None;
        let mut hopt = None;
        for ((&mode, r), b) in modes.iter().zip(&results).zip(&built) {
            artifacts.extend(r.artifact.clone());
            let v = r.verdict.as_bool().ok_or_else(|| BmcError::Solver {
                k,
                m,
                mode,
                detail: match &r.verdict {
                    Verdict::SolverError(d) => d.clone(),
                    other => other.name().to_string(),
                },
            })?;
            match mode {
                Semantics::Hpes => {
                    it.hpes = Some(r.verdict.name());
                    hpes = Some(v);
                    if v && cfg.witness {
                        holds_witness = r.witness.clone().map(|w| (w, b.enc.clone()));
                    }
                }
                Semantics::Hopt => {
                    it.hopt = Some(r.verdict.name());
                    hopt = Some(v);
                }
            }
        }
        iterations.push(it);

        let at_completeness = completeness == Some((k, m));
        if at_completeness {
            if let (Some(a), Some(b)) = (hpes, hopt) {
                if a != b {
                    let dump = dump_queries(&built, cfg.format);
                    return Err(BmcError::Inconsistent { k, m, dump });
                }
            }
        }
        decided = match (hpes, hopt) {
            (Some(true), _) => Some(Outcome::Holds),
            (_, Some(false)) => Some(Outcome::Violated),
            (Some(false), None) if at_completeness => Some(Outcome::Violated),
            (None, Some(true)) if at_completeness => Some(Outcome::Holds),
            _ => None,
        };
        if decided.is_some() {
            break;
        }
    }
    let (last_k, last_m) = *steps.last().expect("non-empty schedule");
    let outcome = decided.unwrap_or(Outcome::Unknown { k: last_k, m: last_m });

    let witness = match outcome {
        Outcome::Holds if cfg.witness => holds_witness.map(|(w, enc)| WitnessReport {
            source: "hpes".into(),
            k: enc.k,
            m: enc.m,
            decoded: decode_witness(&w, &enc, cfg.bundle),
        }),
        Outcome::Violated if cfg.witness => {
            let (k, m) = match cfg.bounds {
                Bounds::Auto => completeness.expect("auto bounds"),
                Bounds::Fixed { k, m } => (k, m),
            };
            counterexample(cfg, k, m, &mut timings)?
        }
        _ => None,
    };

    let oracle = match cfg.oracle_budget {
        Some(budget) => {
            let (k, m) = iterations.last().map(|i| (i.k, i.m)).unwrap_or((last_k, last_m));
            Some(oracle_check(cfg, k, m, budget, iterations.last())?)
        }
        None => None,
    };

    timings.total_s = start.elapsed().as_secs_f64();
    Ok(BmcReport {
        outcome,
        iterations,
        timings,
        completeness,
        witness,
        oracle,
        artifacts,
    })
}

/// Solves hpes of the negated formula and decodes its leading block.
fn counterexample(
    cfg: &BmcConfig<'_>,
    k: usize,
    m: usize,
    timings: &mut Timings,
) -> Result<Option<WitnessReport>, BmcError> {
    let neg = cfg.formula.negated();
    let b = build(cfg.bundle, &neg, k, m, Semantics::Hpes)?;
    timings.gen_qbf_s += b.gen.as_secs_f64();
    timings.build_tr_s += b.build.as_secs_f64();
    let t = Instant::now();
    let r = solve_all(&[&b.enc], &cfg.backend).pop().expect("one result");
    timings.solve_qbf_s += t.elapsed().as_secs_f64();
    Ok(match (r.verdict, r.witness) {
        (Verdict::Sat, Some(w)) => Some(WitnessReport {
            source: "hpes of the negation".into(),
            k,
            m,
            decoded: decode_witness(&w, &b.enc, cfg.bundle),
        }),
        (Verdict::Sat, None) => Some(WitnessReport {
            source: "hpes of the negation".into(),
            k,
            m,
            decoded: DecodedWitness {
                warnings: vec!["the solver reported no certificate".into()],
                ..DecodedWitness::default()
            },
        }),
        (v, _) => Some(WitnessReport {
            source: "hpes of the negation".into(),
            k,
            m,
            decoded: DecodedWitness {
                warnings: vec![format!("negated query returned {}", v.name())],
                ..DecodedWitness::default()
            },
        }),
    })
}

fn oracle_check(
    cfg: &BmcConfig<'_>,
    k: usize,
    m: usize,
    budget: u64,
    last: Option<&Iteration>,
) -> Result<OracleCheck, BmcError> {
    let oc = OracleConfig {
        budget,
        ..OracleConfig::default()
    };
    let mut check = OracleCheck {
        k,
        m,
        hpes: None,
        hopt: None,
        skipped: None,
    };
    for &mode in cfg.semantics.modes() {
        let v = match eval_bounded(cfg.bundle, cfg.formula, k, m, mode, oc) {
            Ok(v) => v,
            Err(OracleError::BudgetExceeded) => {
                check.skipped = Some("enumeration budget exceeded".into());
                return Ok(check);
            }
            Err(e) => return Err(BmcError::Input(e.to_string())),
        };
        let solver = last.and_then(|i| match mode {
            Semantics::Hpes => i.hpes,
            Semantics::Hopt => i.hopt,
        });
        if let Some(s) = solver {
            let s = s == "sat";
            if s != v {
                return Err(BmcError::OracleMismatch {
                    k,
                    m,
                    mode,
                    solver: s,
                    oracle: v,
                });
            }
        }
        match mode {
            Semantics::Hpes => check.hpes = Some(v),
            Semantics::Hopt => check.hopt = Some(v),
        }
    }
    Ok(check)
}

fn dump_queries(built: &[Built], format: QbfFormat) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ahltl-inconsistent-{}", std::process::id()));
    let _ = std::fs::create_dir_all(&dir);
    for b in built {
        let path = dir.join(format!("{}.{}", b.enc.mode.name(), format.extension()));
        let _ = std::fs::write(path, format.render(&b.enc.query));
    }
    dir
}

#[cfg(test)]
mod tests {
    use super::*;
    use ahltl_core::{parse_formula, parse_model};

    fn chain() -> ModelBundle {
        let m = parse_model(
            "model chain\nprops a\nstate s0\nstate s1 a\nstate s2\ninit s0\ntrans s0 -> s1\ntrans s1 -> s2\ntrans s2 -> s2\n",
        )
        .unwrap();
        ModelBundle::single(m)
    }

    #[test]
    fn schedule_couples_m_to_k() {
        let b = chain();
        let f = parse_formula("forall p. forall q. E t. E u. true").unwrap();
        assert_eq!(completeness_bound(&b, &f).unwrap(), (2, 8));
        assert_eq!(schedule(&b, &f).unwrap(), vec![(1, 4), (2, 8)]);
    }

    #[test]
    fn emitted_names() {
        let p = Path::new("/tmp/q.qcir");
        assert_eq!(emit_path(p, Semantics::Hpes, false), p);
        assert_eq!(emit_path(p, Semantics::Hopt, true), Path::new("/tmp/q.hopt.qcir"));
    }

    #[test]
    fn verdicts_on_a_chain() {
        let b = chain();
        let backend = SolverBackend::internal(crate::solver::DEFAULT_BUDGET);
        let f = parse_formula("forall p. E t. F a[p,t]").unwrap();
        let r = run_bmc(&BmcConfig::new(&b, &f, backend.clone())).unwrap();
        assert_eq!(r.outcome, Outcome::Holds);
        let f = parse_formula("forall p. E t. G a[p,t]").unwrap();
        let r = run_bmc(&BmcConfig::new(&b, &f, backend)).unwrap();
        assert_eq!(r.outcome, Outcome::Violated);
        assert!(r.timings.total_s >= r.timings.gen_qbf_s + r.timings.build_tr_s + r.timings.solve_qbf_s);
    }
}
