use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use preview_synth::geometry::{Polytope, Tolerance};
use preview_synth::preview::parse_label;
use preview_synth::simulator::{run_batch, Harness, RunTrace, Start};
use preview_synth::spec::{self, certificate_from_json, certificate_to_json, set_to_json, Overrides, Problem};
use preview_synth::synthesis::{con_inv, max_controlled_invariant};
use preview_synth::systems::{Plant, Point, StateSet, SwitchedSystem};
use serde_json::{json, Value};

use crate::{ExportArgs, Format, SimulateArgs, INVALID, NOT_CERTIFIED, OK, UNSAFE};

const SPEC_COPY: &str = "spec.json";
const CERTIFICATE: &str = "certificate.json";
const WINNING: &str = "winning_sets.json";
const SUMMARY: &str = "summary.json";

/// Text of a problem file; names of bundled problems work as paths.
fn read_spec(path: &str) -> Result<String> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(text),
        Err(e) => spec::bundled(path)
            .map(str::to_owned)
            .ok_or_else(|| anyhow!(e).context(format!("reading {path}"))),
    }
}

fn load(path: &str, over: &Overrides) -> Result<Problem> {
    Problem::parse(&read_spec(path)?, over).with_context(|| format!("loading {path}"))
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json(path: &Path, v: &Value) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn labelled(sets: impl IntoIterator<Item = Result<Value>>) -> Result<Value> {
    let mut map = serde_json::Map::new();
    for (q, v) in sets.into_iter().enumerate() {
        map.insert((q + 1).to_string(), v?);
    }
    Ok(Value::Object(map))
}

pub fn validate(path: &str) -> Result<u8> {
    let problems = spec::validate(&read_spec(path)?);
    if problems.is_empty() {
        println!("{path}: ok");
        return Ok(OK);
    }
    for p in &problems {
        println!("{path}: {p}");
    }
    Ok(INVALID)
}

/// Size of a set for the summary: the state count of a finite set, the
/// length or area of a polytope in one or two dimensions.
fn measure(system: &SwitchedSystem, set: &StateSet, tol: &Tolerance) -> Result<Value> {
    let empty = system.is_empty(set)?;
    Ok(match set {
        StateSet::Finite(f) => json!({ "empty": empty, "states": f.len() }),
        StateSet::Polytope(p) => {
            let bbox = if empty { None } else { p.bounding_box(tol)? };
            let volume = match (empty, p.dim()) {
                (true, _) => Some(0.0),
                (false, 1 | 2) => Some(area(&ordered_vertices(p, tol)?)),
                _ => None,
            };
            json!({ "empty": empty, "rows": p.n_rows(), "bounding_box": bbox, "volume": volume })
        }
    })
}

/// Vertices, in counter-clockwise order when there are two coordinates.
fn ordered_vertices(p: &Polytope, tol: &Tolerance) -> Result<Vec<Vec<f64>>> {
    let mut v = p.vertices(tol)?;
    match p.dim() {
        1 => v.sort_by(|a, b| a[0].total_cmp(&b[0])),
        2 if !v.is_empty() => {
            let n = v.len() as f64;
            let c = [v.iter().map(|x| x[0]).sum::<f64>() / n, v.iter().map(|x| x[1]).sum::<f64>() / n];
            v.sort_by(|a, b| (a[1] - c[1]).atan2(a[0] - c[0]).total_cmp(&(b[1] - c[1]).atan2(b[0] - c[0])));
        }
        _ => {}
    }
    Ok(v)
}

/// Length of a sorted 1D vertex list or area of an ordered polygon.
fn area(v: &[Vec<f64>]) -> f64 {
    match v.first().map(Vec::len) {
        Some(1) => v.last().unwrap()[0] - v[0][0],
        Some(2) => {
            let twice: f64 = (0..v.len())
                .map(|i| {
                    let (a, b) = (&v[i], &v[(i + 1) % v.len()]);
                    a[0] * b[1] - a[1] * b[0]
                })
                .sum();
            twice.abs() / 2.0
        }
        _ => 0.0,
    }
}

pub fn synth(path: &str, out_dir: &Path, over: &Overrides) -> Result<u8> {
    let text = read_spec(path)?;
    let p = Problem::parse(&text, over).with_context(|| format!("loading {path}"))?;
    let start = Instant::now();
    let out = con_inv(&p.system, &p.automaton, &p.safety, &p.fixpoint())?;
    let wall = start.elapsed().as_secs_f64();
    let certified = out.is_certified();

    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    fs::write(out_dir.join(SPEC_COPY), &text)?;
    let sets = labelled(out.winning.sets.iter().map(|s| Ok(set_to_json(&p.system, s)?)))?;
    write_json(&out_dir.join(WINNING), &json!({ "certified": certified, "sets": sets }))?;
    let mut cert = certificate_to_json(&p.system, &out.certificate)?;
    cert["certified"] = json!(certified);
    write_json(&out_dir.join(CERTIFICATE), &cert)?;

    let tol = p.tolerance();
    let summary = json!({
        "certified": certified,
        "status": out.winning.status,
        "iterations": out.winning.iterations,
        "changed": out.winning.changed.iter().map(|c| c.iter().map(|q| q + 1).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "wall_time_s": wall,
        "options": p.options,
        "nodes": labelled(out.winning.sets.iter().map(|s| measure(&p.system, s, &tol)))?,
    });
    write_json(&out_dir.join(SUMMARY), &summary)?;
    print_json(&summary)?;
    if !certified {
        eprintln!("iteration cap reached: the sets over-approximate the winning sets and are not certified");
        return Ok(NOT_CERTIFIED);
    }
    Ok(OK)
}

pub fn compare(path: &str, over: &Overrides) -> Result<u8> {
    let p = load(path, over)?;
    let out = con_inv(&p.system, &p.automaton, &p.safety, &p.fixpoint())?;
    let base = max_controlled_invariant(&p.system, &p.common_safe_set()?, &p.fixpoint())?;
    let tol = p.tolerance();
    let mut nodes = Vec::new();
    for (q, w) in out.winning.sets.iter().enumerate() {
        nodes.push(json!({
            "node": q + 1,
            "winning": measure(&p.system, w, &tol)?,
            "baseline_inside": p.system.is_subset(&base.set, w)?,
            "equal": p.system.set_eq(&base.set, w)?,
        }));
    }
    let certified = out.is_certified() && base.status == out.winning.status;
    print_json(&json!({
        "certified": certified,
        "baseline": measure(&p.system, &base.set, &tol)?,
        "baseline_status": base.status,
        "nodes": nodes,
    }))?;
    Ok(if certified { OK } else { NOT_CERTIFIED })
}

fn parse_state(system: &SwitchedSystem, s: &str) -> Result<Point> {
    match system {
        SwitchedSystem::Finite(f) => f
            .state_index(s.trim())
            .map(Point::Id)
            .ok_or_else(|| anyhow!("unknown state {s:?}")),
        SwitchedSystem::Affine(a) => {
            let v = s
                .split(',')
                .map(|c| c.trim().parse::<f64>().with_context(|| format!("bad coordinate {c:?}")))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != a.state_dim() {
                bail!("start state has {} coordinates, the system has {}", v.len(), a.state_dim());
            }
            Ok(Point::Vector(v))
        }
    }
}

fn point_json(system: &SwitchedSystem, x: &Point) -> Value {
    match (system, x) {
        (SwitchedSystem::Finite(f), Point::Id(i)) => json!(f.state_names()[*i]),
        _ => json!(x),
    }
}

fn input_json(system: &SwitchedSystem, u: &Point) -> Value {
    match (system, u) {
        (SwitchedSystem::Finite(f), Point::Id(i)) => json!(f.input_names()[*i]),
        _ => json!(u),
    }
}

fn write_trace(out: &mut impl Write, system: &SwitchedSystem, run: usize, trace: &RunTrace<Point, Point>) -> Result<()> {
    for s in &trace.steps {
        let line = json!({
            "run": run,
            "time": s.time,
            "mode": s.mode + 1,
            "state": point_json(system, &s.state),
            "input": s.input.as_ref().map(|u| input_json(system, u)),
            "preview": s.preview.map(|p| json!({ "t": p.t, "tau": p.tau, "dest": p.dest + 1 })),
            "pending": s.pending.map(|(dest, steps)| json!({ "dest": dest + 1, "steps": steps })),
            "target": s.target.map(|t| t.to_string()),
            "safe": s.safe,
            "margin": s.margin,
            "fallback": s.fallback,
        });
        writeln!(out, "{line}")?;
    }
    if let Some(why) = &trace.failure {
        writeln!(out, "{}", json!({ "run": run, "failure": why }))?;
    }
    Ok(())
}

pub fn simulate(args: &SimulateArgs, over: &Overrides) -> Result<u8> {
    let p = load(&args.spec, over)?;
    let raw = read_json(&args.cert_dir.join(CERTIFICATE))?;
    if raw.get("certified") != Some(&Value::Bool(true)) {
        eprintln!("the certificate in {} is not certified; refusing to run its controller", args.cert_dir.display());
        return Ok(NOT_CERTIFIED);
    }
    let cert = certificate_from_json(&p.system, &raw)?;
    let start = match (&args.q0, &args.x0) {
        (Some(q), Some(x)) => {
            let node = parse_label(q, p.automaton.nodes())?;
            let state = parse_state(&p.system, x)?;
            if !args.allow_unsafe_start && !p.system.contains(cert.winning(node), &state) {
                bail!("start state is outside the winning set of node {q}; pass --allow-unsafe-start to run anyway");
            }
            Start::Fixed { node, state }
        }
        _ => Start::Sampled,
    };
    let h = Harness::new(&p.system, &p.automaton, &cert, &p.safety)?;
    let mut trace_out = match &args.trace {
        Some(path) => Some(BufWriter::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => None,
    };
    let summary = if args.runs == 0 {
        preview_synth::simulator::Summary { runs: 0, violations: 0, min_margin: None }
    } else {
        run_batch(&h, args.runs, args.steps, p.options.seed, &start, args.allow_unsafe_start, |run, trace| {
            if let Some(out) = trace_out.as_mut() {
                write_trace(out, &p.system, run, trace).map_err(|e| preview_synth::Error::Spec(e.to_string()))?;
            }
            Ok(())
        })?
    };
    if let Some(mut out) = trace_out {
        out.flush()?;
    }
    print_json(&json!({
        "runs": summary.runs,
        "steps": args.steps,
        "seed": p.options.seed,
        "violations": summary.violations,
        "min_margin": summary.min_margin,
    }))?;
    Ok(if summary.violations > 0 { UNSAFE } else { OK })
}

pub fn export(args: &ExportArgs, over: &Overrides) -> Result<u8> {
    let text = fs::read_to_string(args.cert_dir.join(SPEC_COPY))
        .with_context(|| format!("reading {}", args.cert_dir.join(SPEC_COPY).display()))?;
    let p = Problem::parse(&text, over)?;
    let raw = read_json(&args.cert_dir.join(WINNING))?;
    let tol = p.tolerance();
    let mut nodes = Vec::new();
    for q in 1..=p.automaton.nodes() {
        let v = raw["sets"].get(q.to_string()).ok_or_else(|| anyhow!("node {q} missing from {WINNING}"))?;
        let set = spec::set_from_json(&p.system, v)?;
        nodes.push((q, set));
    }

    let mut records = Vec::new();
    for (q, set) in nodes {
        let StateSet::Polytope(poly) = set else {
            if args.project.is_some() || args.hrep {
                bail!("finite sets have no coordinates to project");
            }
            let StateSet::Finite(f) = &set else { unreachable!() };
            records.push(json!({ "node": q, "empty": f.is_empty(), "states": set_to_json(&p.system, &set)? }));
            continue;
        };
        let keep: Vec<usize> = match &args.project {
            Some(dims) => dims
                .iter()
                .map(|&d| {
                    if d == 0 || d > poly.dim() {
                        bail!("coordinate {d} is not in 1..={}", poly.dim());
                    }
                    Ok(d - 1)
                })
                .collect::<Result<_>>()?,
            None => (0..poly.dim()).collect(),
        };
        if !args.hrep && keep.len() > 3 {
            bail!("vertex output needs at most 3 coordinates, got {}; use --project or --hrep", keep.len());
        }
        let proj = if keep.len() == poly.dim() && keep.iter().enumerate().all(|(i, &k)| i == k) {
            poly.clone()
        } else {
            poly.project(&keep, &tol)?
        };
        let empty = proj.is_empty(&tol)?;
        let coords: Vec<usize> = keep.iter().map(|k| k + 1).collect();
        if args.hrep {
            records.push(json!({ "node": q, "coordinates": coords, "empty": empty, "hrep": proj }));
        } else {
            let vertices = if empty { Vec::new() } else { ordered_vertices(&proj, &tol)? };
            records.push(json!({ "node": q, "coordinates": coords, "empty": empty, "vertices": vertices }));
        }
    }

    let body = match args.format {
        Format::Json => serde_json::to_string_pretty(&Value::Array(records))? + "\n",
        Format::Csv => to_csv(&records, args.hrep),
    };
    match &args.out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{body}"),
    }
    Ok(OK)
}

/// One line per vertex (`node,vertex,x..`), half-space (`node,row,a..,b`)
/// or state (`node,state`). Empty sets get a line with only the node.
fn to_csv(records: &[Value], hrep: bool) -> String {
    let mut out = String::new();
    let num = |v: &Value| v.as_f64().map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        let q = &r["node"];
        if let Some(states) = r.get("states").and_then(Value::as_array) {
            out += &states.iter().map(|s| format!("{q},{}\n", s.as_str().unwrap_or_default())).collect::<String>();
        } else if r["empty"] == Value::Bool(true) {
            out += &format!("{q}\n");
        } else if hrep {
            let h = &r["hrep"];
            let (a, b) = (h["A"].as_array().cloned().unwrap_or_default(), h["b"].as_array().cloned().unwrap_or_default());
            for (i, (row, rhs)) in a.iter().zip(&b).enumerate() {
                let row: Vec<String> = row.as_array().into_iter().flatten().map(num).collect();
                out += &format!("{q},{i},{},{}\n", row.join(","), num(rhs));
            }
        } else {
            for (i, v) in r["vertices"].as_array().into_iter().flatten().enumerate() {
                let v: Vec<String> = v.as_array().into_iter().flatten().map(num).collect();
                out += &format!("{q},{i},{}\n", v.join(","));
            }
        }
    }
    out
}
