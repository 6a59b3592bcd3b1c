//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use ahltl::bmc::{completeness_bound, run_bmc, BmcConfig, Outcome};
use ahltl::cases;
use ahltl::solver::{solve, QbfFormat, SolverBackend, Verdict, DEFAULT_BUDGET};
use ahltl::witness::decode_witness;
use ahltl_core::encoder::{Encoding, EncodingSession};
use ahltl_core::oracle::{eval_bounded, eval_pointwise, AsyncAssignment, OracleConfig};
use ahltl_core::qbf::{
    eval_expand, to_qcir, Circuit, ExpandResult, NodeId, QbfQuery, Quant, QuantBlock, Var, Witness,
};
use ahltl_core::{encode, parse_formula, parse_model, AhltlFormula, KripkeModel, ModelBundle, PrefixShape, Semantics};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use common::{instance, Instance};

const SUITE_SIZE: u64 = 240;
const MODES: [Semantics; 2] = [Semantics::Hpes, Semantics::Hopt];

type Outcomes = Result<String, String>;

fn internal() -> SolverBackend {
    SolverBackend::internal(DEFAULT_BUDGET)
}

fn qbf_verdict(bundle: &ModelBundle, f: &AhltlFormula, k: usize, m: usize, mode: Semantics) -> Result<bool, String> {
    let e = encode(bundle, f, k, m, mode).map_err(|e| e.to_string())?;
    solve(&e.query, &internal())
        .verdict
        .as_bool()
        .ok_or_else(|| format!("no verdict at ({k},{m}) {mode}"))
}

fn c1_branch_pair() -> Outcomes {
    let start = Instant::now();
    let bundle = cases::branch();
    let ni = run_bmc(&BmcConfig::new(&bundle, &cases::ni(), internal())).map_err(|e| e.to_string())?;
    let nd = run_bmc(&BmcConfig::new(&bundle, &cases::ni_nd(), internal())).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    if ni.outcome != Outcome::Violated {
        return Err(format!("ni: {:?}", ni.outcome));
    }
    if nd.outcome != Outcome::Holds {
        return Err(format!("ni_nd: {:?}", nd.outcome));
    }
    if t >= Duration::from_secs(10) {
        return Err(format!("took {t:?}"));
    }
    Ok(format!("ni violated, ni_nd holds, {:.3}s (limit 10s)", t.as_secs_f64()))
}

fn c2_position_grid() -> Outcomes {
    let start = Instant::now();
    let bundle = cases::branch();
    let model = bundle.resolve(None).unwrap();
    let f = parse_formula("forall p1. forall p2. E t. true").unwrap();
    let (k, m) = (3, 6);
    let mut s = EncodingSession::new(&bundle, &f, k, m, Semantics::Hpes).map_err(|e| e.to_string())?;
    let pos = s.build_pos();
    let moves: [[bool; 7]; 2] = [
        [true, true, true, false, false, false, true],
        [false, false, false, true, true, true, true],
    ];
    let cells: [&[(usize, usize)]; 2] = [
        &[(0, 0), (1, 1), (2, 2), (3, 3), (3, 4), (3, 5), (3, 6)],
        &[(0, 0), (0, 1), (0, 2), (0, 3), (1, 4), (2, 5), (3, 6)],
    ];
    let paths = [["s0", "s1", "s2", "s5"], ["s0", "s3", "s4", "s5"]];

    let c = &mut s.circuit;
    let mut fixed = vec![pos.node];
    for (p, names) in paths.iter().enumerate() {
        fixed.push(s.unrolled[p].constraint);
        for (i, n) in names.iter().enumerate() {
            let id = model.state_id(n).unwrap().0;
            for (b, &v) in s.unrolled[p].bank.bits[i].iter().enumerate() {
                fixed.push(c.lit(v, id >> b & 1 == 1));
            }
        }
        for (j, &v) in s.banks.get(p, 0).moves.iter().enumerate() {
            fixed.push(c.lit(v, moves[p][j]));
        }
    }
    let base = c.and(fixed.clone());
    let vars: Vec<Var> = c.vars(base).into_iter().collect();
    let q = QbfQuery::new(c.clone(), base, vec![QuantBlock { quant: Quant::Exists, vars: vars.clone() }]);
    let w = match eval_expand(&q, 5_000_000) {
        ExpandResult::Sat(w) => w,
        other => return Err(format!("fixed moves admit no completion: {other:?}")),
    };
    // the completion must match the expected cells, with no off column
    for p in 0..2 {
        let b = s.banks.get(p, 0);
        for j in 0..=m {
            if w.get(b.off[j]) != Some(false) {
                return Err(format!("trace {p} off at column {j}"));
            }
            for i in 0..=k {
                if w.get(b.pos[j][i]) != Some(cells[p].contains(&(i, j))) {
                    return Err(format!("trace {p} cell ({i},{j}) differs"));
                }
            }
        }
    }
    // and it must be the only one
    let c = &mut s.circuit;
    let pos_off = s.banks.pos_off_vars();
    let differ: Vec<NodeId> = pos_off.iter().map(|&v| c.lit(v, !w.get(v).unwrap_or(false))).collect();
    fixed.push(c.or(differ));
    let other = c.and(fixed);
    let q = QbfQuery::new(c.clone(), other, vec![QuantBlock { quant: Quant::Exists, vars }]);
    if !matches!(eval_expand(&q, 5_000_000), ExpandResult::Unsat(_)) {
        return Err("a second pos/off completion exists".into());
    }
    let t = start.elapsed();
    if t >= Duration::from_secs(1) {
        return Err(format!("took {t:?}"));
    }
    Ok(format!("14 move bits, {} pos/off vars, unique completion, {:.3}s (limit 1s)", pos_off.len(), t.as_secs_f64()))
}

struct Row {
    inst: Instance,
    qbf: [bool; 2],
    next: [bool; 2],
    complete: [bool; 2],
}

/// Runs the random suite once; criteria 3 to 5 read from it.
fn differential_suite() -> Result<(Vec<Row>, Vec<String>, Duration), String> {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut mismatches = Vec::new();
    for seed in 0..SUITE_SIZE {
        let inst = instance(seed);
        let bundle = inst.bundle();
        let f = inst.parsed();
        let (k, m) = (inst.k, inst.m);
        let (big_k, _) = completeness_bound(&bundle, &f).map_err(|e| e.to_string())?;
        let big_m = big_k * f.num_paths() * f.num_trajs();
        let mut qbf = [false; 2];
        let mut next = [false; 2];
        let mut complete = [false; 2];
        for (i, &mode) in MODES.iter().enumerate() {
            qbf[i] = qbf_verdict(&bundle, &f, k, m, mode)?;
            next[i] = qbf_verdict(&bundle, &f, k + 1, m + 1, mode)?;
            complete[i] = qbf_verdict(&bundle, &f, big_k, big_m, mode)?;
            let oracle = eval_bounded(&bundle, &f, k, m, mode, OracleConfig::default())
                .map_err(|e| format!("seed {seed}: oracle: {e}"))?;
            if oracle != qbf[i] {
                mismatches.push(format!("seed {seed} {mode} ({k},{m}): qbf {} oracle {oracle}", qbf[i]));
            }
        }
        rows.push(Row { inst, qbf, next, complete });
    }
    Ok((rows, mismatches, start.elapsed()))
}

fn shape_coverage(rows: &[Row]) -> BTreeMap<&'static str, usize> {
    let mut seen = BTreeMap::new();
    for r in rows {
        let name = match r.inst.parsed().classify_prefix().unwrap() {
            PrefixShape::EOnly(_) => "E*",
            PrefixShape::AOnly(_) => "A*",
            PrefixShape::AThenE(..) => "A*E*",
            PrefixShape::EThenA(..) => "E*A*",
        };
        *seen.entry(name).or_insert(0) += 1;
    }
    seen
}

fn c3_oracle(suite: &Result<(Vec<Row>, Vec<String>, Duration), String>) -> Outcomes {
    let (rows, mismatches, t) = suite.as_ref().map_err(Clone::clone)?;
    let shapes = shape_coverage(rows);
    if rows.len() < 200 {
        return Err(format!("only {} instances", rows.len()));
    }
    if shapes.len() != 4 {
        return Err(format!("shapes covered: {shapes:?}"));
    }
    if !mismatches.is_empty() {
        return Err(format!("{} mismatches, first: {}", mismatches.len(), mismatches[0]));
    }
    if *t >= Duration::from_secs(300) {
        return Err(format!("took {t:?}"));
    }
    Ok(format!(
        "{} instances x 2 modes agree, shapes {shapes:?}, {:.1}s for the whole suite (limit 300s)",
        rows.len(),
        t.as_secs_f64()
    ))
}

fn c4_monotonicity(suite: &Result<(Vec<Row>, Vec<String>, Duration), String>) -> Outcomes {
    let (rows, _, _) = suite.as_ref().map_err(Clone::clone)?;
    let bad: Vec<u64> = rows
        .iter()
        .filter(|r| (r.qbf[0] && !r.next[0]) || (!r.qbf[1] && r.next[1]))
        .map(|r| r.inst.seed)
        .collect();
    if !bad.is_empty() {
        return Err(format!("{} violations, seeds {bad:?}", bad.len()));
    }
    Ok(format!("0 violations over {} (k,m) -> (k+1,m+1) pairs", rows.len()))
}

fn c5_completeness(suite: &Result<(Vec<Row>, Vec<String>, Duration), String>) -> Outcomes {
    let (rows, _, _) = suite.as_ref().map_err(Clone::clone)?;
    let bad: Vec<u64> = rows
        .iter()
        .filter(|r| r.complete[0] != r.complete[1])
        .map(|r| r.inst.seed)
        .collect();
    if !bad.is_empty() {
        return Err(format!("{} disagreements, seeds {bad:?}", bad.len()));
    }
    Ok(format!("0 disagreements at (K, K*|Paths|*|Trajs|) over {} instances", rows.len()))
}

fn c6_acdb() -> Outcomes {
    let start = Instant::now();
    let (bundle, f) = cases::acdb();
    let r = run_bmc(&BmcConfig::new(&bundle, &f, internal())).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    if r.outcome != Outcome::Violated {
        return Err(format!("verdict {:?}", r.outcome));
    }
    let w = r.witness.ok_or("no counterexample")?;
    let p1 = w.decoded.traces.first().ok_or("no decoded trace")?;
    if p1.labels.iter().any(|l| l.iter().any(|p| p == "h")) {
        return Err(format!("counterexample has h set: {:?}", p1.states));
    }
    let obs: Vec<String> = p1.observations("obs_").into_iter().filter(|o| o != "n").collect();
    if obs != ["a", "c", "d", "b"] {
        return Err(format!("observations {obs:?}"));
    }
    if t >= Duration::from_secs(60) {
        return Err(format!("took {t:?}"));
    }
    Ok(format!("violated, h=0, observations {}, {:.3}s (limit 60s)", obs.concat(), t.as_secs_f64()))
}

/// One-path copy of `path` so the oracle can range a trace over it alone.
fn single_path_model(model: &KripkeModel, path: &[ahltl_core::StateId], name: &str) -> KripkeModel {
    let props: Vec<&str> = model.props().iter().map(String::as_str).collect();
    let mut text = format!("model {name}\nprops {}\n", props.join(" "));
    let mut trans = String::new();
    let mut closed = false;
    for (i, &s) in path.iter().enumerate() {
        let labels: Vec<&str> = model.label(s).iter().map(|p| props[p.index()]).collect();
        text.push_str(&format!("state c{i} {}\n", labels.join(" ")));
        if model.is_halt(s) {
            trans.push_str(&format!("trans c{i} -> c{i}\n"));
            closed = true;
            break;
        }
        if i + 1 < path.len() {
            trans.push_str(&format!("trans c{i} -> c{}\n", i + 1));
        }
    }
    if !closed {
        let last = path.len() - 1;
        text.push_str("state cx\n");
        trans.push_str(&format!("trans c{last} -> cx\ntrans cx -> cx\n"));
    }
    parse_model(&format!("{text}init c0\n{trans}")).expect("copied path is a model")
}

/// Checks a Sat witness: all-existential queries are replayed pointwise,
/// otherwise the leading traces are pinned and the oracle decides the rest.
fn replay(bundle: &ModelBundle, e: &Encoding, w: &Witness) -> Result<bool, String> {
    let f = &e.formula;
    let lead = f.trace_prefix.iter().take_while(|b| b.quant == Quant::Exists).count();
    if lead == 0 {
        return Ok(true);
    }
    let models: Vec<&KripkeModel> = f
        .trace_prefix
        .iter()
        .map(|b| bundle.resolve(b.model.as_deref()).unwrap())
        .collect();
    let val = |v: Var| w.get(v).unwrap_or(false);
    let paths: Vec<_> = (0..lead)
        .map(|i| e.decode_path(models[i], i, &val).ok_or("unused state code"))
        .collect::<Result<_, _>>()?;

    if lead == f.num_paths() && matches!(e.shape, PrefixShape::EOnly(_)) {
        let words: Vec<Vec<u64>> = (0..f.num_trajs())
            .map(|t| {
                let mut word = vec![0u64; e.m + 1];
                for p in 0..lead {
                    for (j, bit) in e.decode_moves(p, t, &val).into_iter().enumerate() {
                        word[j] |= (bit as u64) << p;
                    }
                }
                word
            })
            .collect();
        let a = AsyncAssignment { models, paths, words, k: e.k, m: e.m };
        return eval_pointwise(&a, &f.body, 0, e.mode).map_err(|e| e.to_string());
    }

    let mut pinned = bundle.clone();
    let mut g = f.clone();
    for (i, path) in paths.iter().enumerate() {
        let name = format!("replay{i}");
        pinned
            .insert_as(name.clone(), single_path_model(models[i], path, &name))
            .map_err(|e| e.to_string())?;
        g.trace_prefix[i].model = Some(name);
    }
    eval_bounded(&pinned, &g, e.k, e.m, e.mode, OracleConfig::default()).map_err(|e| e.to_string())
}

fn c7_backends() -> Outcomes {
    let exe = env!("CARGO_BIN_EXE_ahltl-qbf");
    let qcir = SolverBackend::external(exe, QbfFormat::Qcir).map_err(|e| e.to_string())?;
    let qdimacs = SolverBackend::external(exe, QbfFormat::Qdimacs).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let mut sat = 0;
    let mut replayed = 0;
    let mut no_witness = 0;
    for i in 0..100u64 {
        let inst = instance(10_000 + i);
        let bundle = inst.bundle();
        let f = inst.parsed();
        let mode = MODES[(i % 2) as usize];
        let e = encode(&bundle, &f, inst.k, inst.m, mode).map_err(|e| e.to_string())?;
        let a = solve(&e.query, &internal());
        let b = solve(&e.query, &qcir);
        let c = solve(&e.query, &qdimacs);
        if a.verdict.as_bool().is_none() || a.verdict != b.verdict || a.verdict != c.verdict {
            return Err(format!(
                "seed {}: internal {} qcir {} qdimacs {}",
                inst.seed,
                a.verdict.name(),
                b.verdict.name(),
                c.verdict.name()
            ));
        }
        if a.verdict == Verdict::Sat {
            sat += 1;
            let w = a.witness.ok_or("internal Sat without witness")?;
            if e.formula.trace_prefix[0].quant == Quant::Forall {
                no_witness += 1;
                let d = decode_witness(&w, &e, &bundle);
                if d.warnings != ["no extractable prefix"] {
                    return Err(format!("seed {}: unexpected decode {d:?}", inst.seed));
                }
                continue;
            }
            if !replay(&bundle, &e, &w)? {
                return Err(format!("seed {}: witness does not replay ({mode})", inst.seed));
            }
            replayed += 1;
        }
    }
    Ok(format!(
        "100 queries agree on 3 backends; {sat} sat, {replayed} witnesses replayed, {no_witness} with a universal lead; {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

/// Minimal QCIR-G14 reader evaluating under a full assignment.
struct QcirGates {
    quantified: Vec<u32>,
    output: i64,
    gates: HashMap<u32, (bool, Vec<i64>)>,
}

fn read_qcir(text: &str) -> QcirGates {
    let mut q = QcirGates { quantified: Vec::new(), output: 0, gates: HashMap::new() };
    let args = |s: &str| -> Vec<i64> {
        let inner = &s[s.find('(').unwrap() + 1..s.rfind(')').unwrap()];
        inner.split(',').map(str::trim).filter(|t| !t.is_empty()).map(|t| t.parse().unwrap()).collect()
    };
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if line.starts_with("exists(") || line.starts_with("forall(") {
            q.quantified.extend(args(line).into_iter().map(|v| v as u32));
        } else if line.starts_with("output(") {
            q.output = args(line)[0];
        } else {
            let (lhs, rhs) = line.split_once('=').unwrap();
            let is_and = rhs.trim().starts_with("and");
            assert!(is_and || rhs.trim().starts_with("or"), "gate {line}");
            q.gates.insert(lhs.trim().parse().unwrap(), (is_and, args(rhs)));
        }
    }
    q
}

fn eval_qcir(q: &QcirGates, lit: i64, val: &HashMap<u32, bool>) -> bool {
    let v = lit.unsigned_abs() as u32;
    let b = match q.gates.get(&v) {
        Some((true, xs)) => xs.iter().all(|&x| eval_qcir(q, x, val)),
        Some((false, xs)) => xs.iter().any(|&x| eval_qcir(q, x, val)),
        None => val[&v],
    };
    b == (lit > 0)
}

fn random_circuit(rng: &mut StdRng, nvars: u32) -> QbfQuery {
    let mut c = Circuit::new();
    let mut pool: Vec<NodeId> = (1..=nvars).map(|v| c.var(Var(v))).collect();
    for _ in 0..rng.gen_range(1..16) {
        let n = rng.gen_range(2..=3);
        let mut kids = Vec::new();
        for _ in 0..n {
            let x = pool[rng.gen_range(0..pool.len())];
            kids.push(if rng.gen() { c.not(x) } else { x });
        }
        let g = if rng.gen() { c.and(kids) } else { c.or(kids) };
        pool.push(g);
    }
    let root = *pool.last().unwrap();
    let blocks = (1..=nvars)
        .map(|v| QuantBlock {
            quant: if rng.gen() { Quant::Exists } else { Quant::Forall },
            vars: vec![Var(v)],
        })
        .collect();
    QbfQuery::new(c, root, blocks)
}

fn c8_round_trips() -> Outcomes {
    let mut models = 0;
    for seed in 0..200u64 {
        let inst = instance(20_000 + seed);
        let m = parse_model(&inst.model).unwrap();
        let back = parse_model(&m.to_string()).map_err(|e| format!("seed {seed}: {e}"))?;
        if back != m || back.to_string() != m.to_string() {
            return Err(format!("seed {seed}: model print does not round-trip"));
        }
        let f = inst.parsed();
        let fb = parse_formula(&f.to_string()).map_err(|e| format!("seed {seed}: {e}"))?;
        if fb != f {
            return Err(format!("seed {seed}: formula print does not round-trip: {f}"));
        }
        models += 1;
    }
    for case in [cases::BRANCH_MODEL, cases::ACDB_H0, cases::ACDB_H1, cases::DBE_SRC, cases::DBE_TGT_OK] {
        let m = parse_model(case).unwrap();
        if parse_model(&m.to_string()).unwrap() != m {
            return Err(format!("shipped model {} does not round-trip", m.name()));
        }
    }

    let mut rng = StdRng::seed_from_u64(8);
    let mut queries = 0;
    for _ in 0..100 {
        let nvars = rng.gen_range(1..=12u32);
        let q = random_circuit(&mut rng, nvars);
        let text = to_qcir(&q);
        let g = read_qcir(&text);
        let vars: Vec<u32> = (1..=nvars).collect();
        if g.quantified.iter().copied().collect::<std::collections::BTreeSet<_>>()
            != vars.iter().copied().collect()
        {
            return Err(format!("quantified vars {:?}", g.quantified));
        }
        for bits in 0u32..(1 << nvars) {
            let val: HashMap<u32, bool> = vars.iter().map(|&v| (v, bits >> (v - 1) & 1 == 1)).collect();
            let expected = q.circuit.eval(q.root, &|v| val[&v.0]);
            if eval_qcir(&g, g.output, &val) != expected {
                return Err(format!("QCIR evaluation differs on\n{text}"));
            }
        }
        queries += 1;
    }
    Ok(format!("{models} models and formulas round-trip; {queries} QCIR queries (<=12 vars) evaluate identically"))
}

#[test]
fn acceptance() {
    let suite = differential_suite();
    let results: Vec<(&str, Outcomes)> = vec![
        ("1 branch golden pair", c1_branch_pair()),
        ("2 position grid", c2_position_grid()),
        ("3 oracle differential", c3_oracle(&suite)),
        ("4 monotonicity", c4_monotonicity(&suite)),
        ("5 completeness agreement", c5_completeness(&suite)),
        ("6 acdb counterexample", c6_acdb()),
        ("7 backend equivalence", c7_backends()),
        ("8 round-trips", c8_round_trips()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS criterion {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {name}: {d}");
            }
        }
    }
    assert_eq!(failed, 0, "{failed} acceptance criteria failed");
}
