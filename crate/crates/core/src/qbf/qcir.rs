//! QCIR-G14 reader and writer.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use hashbrown::HashMap;

use super::{Circuit, Node, NodeId, QbfError, QbfQuery, Quant, QuantBlock, Var};

/// Serializes a query. Gates are numbered after the last input variable and
/// written children first.
pub fn to_qcir(q: &QbfQuery) -> String {
    let c = &q.circuit;
    let mut out = String::from("#QCIR-G14\n");
    for b in q.blocks.iter().filter(|b| !b.vars.is_empty()) {
        let kw = match b.quant {
            Quant::Exists => "exists",
            Quant::Forall => "forall",
        };
        let vars: Vec<String> = b.vars.iter().map(|v| v.0.to_string()).collect();
        let _ = writeln!(out, "{kw}({})", vars.join(", "));
    }

    let order = c.reachable(q.root);
    let mut next = q.num_vars as i64;
    let mut gate_id: HashMap<NodeId, i64> = HashMap::new();
    let mut true_gate = None;
    let needs_true = order
        .iter()
        .any(|&n| matches!(c.node(n), Node::True | Node::False));
    if needs_true {
        next += 1;
        true_gate = Some(next);
    }
    for &n in &order {
        if matches!(c.node(n), Node::And(_) | Node::Or(_)) {
            next += 1;
            gate_id.insert(n, next);
        }
    }
    let lit = |n: NodeId| -> i64 {
        fn go(c: &Circuit, g: &HashMap<NodeId, i64>, t: Option<i64>, n: NodeId) -> i64 {
            match c.node(n) {
                Node::True => t.unwrap(),
                Node::False => -t.unwrap(),
                Node::Var(v) => v.0 as i64,
                Node::Not(x) => -go(c, g, t, *x),
                _ => g[&n],
            }
        }
        go(c, &gate_id, true_gate, n)
    };
    let _ = writeln!(out, "output({})", lit(q.root));
    if let Some(t) = true_gate {
        let _ = writeln!(out, "{t} = and()");
    }
    for &n in &order {
        let (kw, cs) = match c.node(n) {
            Node::And(cs) => ("and", cs),
            Node::Or(cs) => ("or", cs),
            _ => continue,
        };
        let args: Vec<String> = cs.iter().map(|&x| lit(x).to_string()).collect();
        let _ = writeln!(out, "{} = {kw}({})", gate_id[&n], args.join(", "));
    }
    out
}

fn syntax(line: usize, message: impl Into<String>) -> QbfError {
    QbfError::Syntax {
        line,
        message: message.into(),
    }
}

fn split_call(s: &str) -> Option<(&str, Vec<&str>)> {
    let open = s.find('(')?;
    let close = s.rfind(')')?;
    if close < open || !s[close + 1..].trim().is_empty() {
        return None;
    }
    let name = s[..open].trim();
    let inner = s[open + 1..close].trim();
    let args = if inner.is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(str::trim).collect()
    };
    Some((name, args))
}

/// Parses QCIR-G14 (and/or gates only). Quantified variables keep their
/// numbers when every name is numeric; otherwise they are renumbered in order
/// of appearance. `free(...)` variables are treated as outermost existentials.
pub fn parse_qcir(text: &str) -> Result<QbfQuery, QbfError> {
    let mut blocks: Vec<(Quant, Vec<String>)> = Vec::new();
    let mut output: Option<(usize, String)> = None;
    let mut gates: Vec<(usize, String, bool, Vec<String>)> = Vec::new();
    let mut seen_header = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if !seen_header && line.starts_with("#QCIR") {
                seen_header = true;
            }
            continue;
        }
        if let Some(eq) = line.find('=') {
            let name = line[..eq].trim().to_string();
            let (kind, args) =
                split_call(&line[eq + 1..]).ok_or_else(|| syntax(line_no, "malformed gate"))?;
            let is_and = match kind.to_ascii_lowercase().as_str() {
                "and" => true,
                "or" => false,
                other => return Err(syntax(line_no, format!("unsupported gate type `{other}`"))),
            };
            gates.push((
                line_no,
                name,
                is_and,
                args.into_iter().map(String::from).collect(),
            ));
            continue;
        }
        let (kw, args) = split_call(line).ok_or_else(|| syntax(line_no, "unrecognized line"))?;
        match kw.to_ascii_lowercase().as_str() {
            "exists" | "free" => blocks.push((
                Quant::Exists,
                args.into_iter().map(String::from).collect(),
            )),
            "forall" => blocks.push((
                Quant::Forall,
                args.into_iter().map(String::from).collect(),
            )),
            "output" => {
                if args.len() != 1 {
                    return Err(syntax(line_no, "output takes one literal"));
                }
                output = Some((line_no, args[0].to_string()));
            }
            other => return Err(syntax(line_no, format!("unknown statement `{other}`"))),
        }
    }

    let all_numeric = blocks
        .iter()
        .flat_map(|(_, vs)| vs.iter())
        .all(|v| v.parse::<u32>().is_ok_and(|n| n > 0));
    let mut var_of: BTreeMap<String, Var> = BTreeMap::new();
    let mut qblocks = Vec::new();
    let mut counter = 0u32;
    for (quant, names) in blocks {
        let mut vars = Vec::new();
        for n in names {
            if var_of.contains_key(&n) {
                return Err(QbfError::Rebound(var_of[&n]));
            }
            let v = if all_numeric {
                Var(n.parse().unwrap())
            } else {
                counter += 1;
                Var(counter)
            };
            var_of.insert(n, v);
            vars.push(v);
        }
        qblocks.push(QuantBlock { quant, vars });
    }

    let mut c = Circuit::new();
    let mut gate_of: BTreeMap<String, NodeId> = BTreeMap::new();
    let resolve = |c: &mut Circuit,
                   gate_of: &BTreeMap<String, NodeId>,
                   line: usize,
                   s: &str|
     -> Result<NodeId, QbfError> {
        let (neg, name) = match s.strip_prefix('-') {
            Some(rest) => (true, rest.trim()),
            None => (false, s),
        };
        let node = if let Some(&g) = gate_of.get(name) {
            g
        } else if let Some(&v) = var_of.get(name) {
            c.var(v)
        } else {
            return Err(syntax(line, format!("undefined literal `{name}`")));
        };
        Ok(if neg { c.not(node) } else { node })
    };
    for (line, name, is_and, args) in &gates {
        if gate_of.contains_key(name) || var_of.contains_key(name) {
            return Err(syntax(*line, format!("`{name}` defined twice")));
        }
        let mut cs = Vec::with_capacity(args.len());
        for a in args {
            cs.push(resolve(&mut c, &gate_of, *line, a)?);
        }
        let g = if *is_and { c.and(cs) } else { c.or(cs) };
        gate_of.insert(name.clone(), g);
    }
    let (oline, oname) = output.ok_or_else(|| syntax(0, "missing output statement"))?;
    let root = resolve(&mut c, &gate_of, oline, &oname)?;
    Ok(QbfQuery::new(c, root, qblocks))
}
