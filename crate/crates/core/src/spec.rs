//! JSON problem files: a switched system, a preview automaton, per-node
//! safe sets and solver options.
//!
//! ```json
//! {
//!   "system": { "backend": "finite", "states": ["s1"], "inputs": ["u1"],
//!               "modes": [{ "name": "f1", "transitions": { "s1": { "u1": ["s1"] } } }] },
//!   "automaton": { "nodes": 1, "edges": [], "holding": { "1": null } },
//!   "safety": { "1": ["s1"] }
//! }
//! ```
//!
//! Polytopes are written `{"A": [[..]], "b": [..]}` or `{"box": [[lo, hi], ..]}`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geometry::{Polytope, Tolerance};
use crate::preview::{parse_label, PreviewAutomaton};
use crate::synthesis::{Certificate, NodeCertificate};
use crate::systems::{
    discretize, AffineMode, AffineSystem, Discretization, FiniteSystem, FixpointOptions, StateSet,
    SwitchedSystem,
};

const TOY: &str = include_str!("../assets/toy.json");
const CRUISE: &str = include_str!("../assets/cruise.json");
const LANE4D: &str = include_str!("../assets/lane4d.json");

/// Names of the problem files shipped with the crate.
pub const BUNDLED: [&str; 3] = ["toy", "cruise", "lane4d"];

/// Text of a bundled problem file by name (`toy`, `cruise`, `lane4d`).
pub fn bundled(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".json") {
        "toy" => Some(TOY),
        "cruise" => Some(CRUISE),
        "lane4d" => Some(LANE4D),
        _ => None,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum PolyJson {
    Box {
        #[serde(rename = "box")]
        bounds: Vec<(f64, f64)>,
    },
    Halfspaces(Polytope),
}

impl PolyJson {
    fn build(self) -> Result<Polytope> {
        match self {
            PolyJson::Halfspaces(p) => Ok(p),
            PolyJson::Box { bounds } => {
                let (lo, hi): (Vec<f64>, Vec<f64>) = bounds.into_iter().unzip();
                Polytope::from_box(&lo, &hi)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FiniteModeJson {
    name: String,
    transitions: BTreeMap<String, BTreeMap<String, Vec<String>>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum TimeDomain {
    Continuous,
    #[default]
    Discrete,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AffineModeJson {
    name: String,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "E", default)]
    e: Option<Vec<Vec<f64>>>,
    #[serde(rename = "K", default)]
    k: Option<Vec<f64>>,
    #[serde(rename = "D", default)]
    d: Option<PolyJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
enum SystemJson {
    Finite {
        states: Vec<String>,
        inputs: Vec<String>,
        modes: Vec<FiniteModeJson>,
    },
    Affine {
        #[serde(default)]
        time: TimeDomain,
        #[serde(default)]
        dt: Option<f64>,
        domain: PolyJson,
        input: PolyJson,
        modes: Vec<AffineModeJson>,
    },
}

/// Solver options stored in a problem file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    pub tol: f64,
    pub max_iters: usize,
    pub discretization: Discretization,
    pub seed: u64,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: Tolerance::DEFAULT,
            max_iters: FixpointOptions::default().max_iters,
            discretization: Discretization::Euler,
            seed: 0,
        }
    }
}

/// Command-line values that take precedence over the file's options.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub discretization: Option<Discretization>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecJson {
    #[serde(default)]
    description: String,
    system: SystemJson,
    automaton: PreviewAutomaton,
    safety: BTreeMap<String, Value>,
    #[serde(default)]
    options: Options,
}

/// A fully built problem.
#[derive(Clone, Debug)]
pub struct Problem {
    pub description: String,
    pub system: SwitchedSystem,
    pub automaton: PreviewAutomaton,
    pub safety: Vec<StateSet>,
    pub options: Options,
}

impl Problem {
    pub fn parse(text: &str, overrides: &Overrides) -> Result<Problem> {
        let raw: SpecJson = serde_json::from_str(text)?;
        let mut options = raw.options;
        options.tol = overrides.tol.unwrap_or(options.tol);
        options.max_iters = overrides.max_iters.unwrap_or(options.max_iters);
        options.discretization = overrides.discretization.unwrap_or(options.discretization);
        options.seed = overrides.seed.unwrap_or(options.seed);
        if !(options.tol > 0.0 && options.tol.is_finite()) {
            return Err(Error::Spec(format!("tolerance must be positive, got {}", options.tol)));
        }

        let tol = Tolerance::uniform(options.tol);
        let system = build_system(raw.system, options.discretization, tol)?;
        let g = raw.automaton;
        g.ensure_valid()?;
        if g.nodes() != system_modes(&system) {
            return Err(Error::Spec(format!(
                "automaton has {} nodes but the system has {} modes",
                g.nodes(),
                system_modes(&system)
            )));
        }
        let mut safety: Vec<Option<StateSet>> = vec![None; g.nodes()];
        for (label, value) in raw.safety {
            let q = parse_label(&label, g.nodes())?;
            safety[q] = Some(
                set_from_json(&system, &value)
                    .map_err(|e| Error::Spec(format!("safety set of node {label}: {e}")))?,
            );
        }
        let safety = safety
            .into_iter()
            .enumerate()
            .map(|(q, s)| s.ok_or_else(|| Error::Spec(format!("missing safety set for node {}", q + 1))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Problem {
            description: raw.description,
            system,
            automaton: g,
            safety,
            options,
        })
    }

    pub fn bundled(name: &str) -> Result<Problem> {
        let text = bundled(name).ok_or_else(|| Error::Spec(format!("no bundled problem named {name:?}")))?;
        Problem::parse(text, &Overrides::default())
    }

    pub fn fixpoint(&self) -> FixpointOptions {
        FixpointOptions {
            max_iters: self.options.max_iters,
        }
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::uniform(self.options.tol)
    }

    /// Intersection of all safe sets, the safety target of the baseline.
    pub fn common_safe_set(&self) -> Result<StateSet> {
        use crate::systems::Plant;
        let mut out = self.system.domain();
        for s in &self.safety {
            out = self.system.intersect(&out, s)?;
        }
        Ok(out)
    }
}

/// Every problem found in `text`, without stopping at the first one.
pub fn validate(text: &str) -> Vec<String> {
    let raw: SpecJson = match serde_json::from_str(text) {
        Ok(raw) => raw,
        Err(e) => return vec![format!("parse error: {e}")],
    };
    let mut out: Vec<String> = raw.automaton.validate().iter().map(ToString::to_string).collect();
    let nodes = raw.automaton.nodes();
    for q in 1..=nodes {
        if !raw.safety.contains_key(&q.to_string()) {
            out.push(format!("missing-safety: no safety set for node {q}"));
        }
    }
    for label in raw.safety.keys() {
        if parse_label(label, nodes).is_err() {
            out.push(format!("unknown-node: safety set for node {label:?}"));
        }
    }
    if out.is_empty() {
        if let Err(e) = Problem::parse(text, &Overrides::default()) {
            out.push(e.to_string());
        }
    }
    out
}

fn system_modes(sys: &SwitchedSystem) -> usize {
    use crate::systems::Plant;
    sys.num_modes()
}

fn build_system(raw: SystemJson, method: Discretization, tol: Tolerance) -> Result<SwitchedSystem> {
    match raw {
        SystemJson::Finite { states, inputs, modes } => {
            let find = |names: &[String], s: &str, what: &str| {
                names
                    .iter()
                    .position(|n| n == s)
                    .ok_or_else(|| Error::Spec(format!("unknown {what} {s:?}")))
            };
            let mut names = Vec::with_capacity(modes.len());
            let mut tables = Vec::with_capacity(modes.len());
            for mode in modes {
                let mut table = vec![vec![Vec::new(); inputs.len()]; states.len()];
                for (x, row) in &mode.transitions {
                    let xi = find(&states, x, "state")?;
                    for (u, next) in row {
                        let ui = find(&inputs, u, "input")?;
                        table[xi][ui] = next
                            .iter()
                            .map(|y| find(&states, y, "state"))
                            .collect::<Result<_>>()?;
                    }
                }
                names.push(mode.name);
                tables.push(table);
            }
            Ok(SwitchedSystem::Finite(FiniteSystem::new(states, inputs, names, tables)?))
        }
        SystemJson::Affine {
            time,
            dt,
            domain,
            input,
            modes,
        } => {
            let domain = domain.build()?;
            let input = input.build()?;
            let (n, m) = (domain.dim(), input.dim());
            let mut built = Vec::with_capacity(modes.len());
            for mode in modes {
                let bad = |what: String| Error::Spec(format!("mode {}: {what}", mode.name));
                let a = matrix(&mode.a, n, n).map_err(bad)?;
                let b = matrix(&mode.b, n, m).map_err(bad)?;
                let d = match mode.d {
                    Some(d) => d.build()?,
                    None => Polytope::interval(0.0, 0.0),
                };
                let e = match &mode.e {
                    Some(e) => matrix(e, n, d.dim()).map_err(bad)?,
                    None => DMatrix::zeros(n, d.dim()),
                };
                let k = match &mode.k {
                    Some(k) if k.len() == n => DVector::from_column_slice(k),
                    Some(k) => return Err(bad(format!("K has {} entries, expected {n}", k.len()))),
                    None => DVector::zeros(n),
                };
                let (a, b, e, k) = match time {
                    TimeDomain::Discrete => (a, b, e, k),
                    TimeDomain::Continuous => {
                        let dt = dt.ok_or_else(|| Error::Spec("continuous-time system needs \"dt\"".into()))?;
                        discretize(&a, &b, &e, &k, dt, method)
                    }
                };
                built.push(AffineMode::new(mode.name, a, b, e, k, d)?);
            }
            Ok(SwitchedSystem::Affine(AffineSystem::new(domain, input, built, tol)?))
        }
    }
}

fn matrix(rows: &[Vec<f64>], r: usize, c: usize) -> std::result::Result<DMatrix<f64>, String> {
    if rows.len() != r || rows.iter().any(|row| row.len() != c) {
        return Err(format!("expected a {r}x{c} matrix"));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

/// Sets of a finite system are lists of state names; polytopes use the
/// H-representation object.
pub fn set_to_json(system: &SwitchedSystem, set: &StateSet) -> Result<Value> {
    match (system, set) {
        (SwitchedSystem::Finite(s), StateSet::Finite(f)) => {
            Ok(json!(f.iter().map(|x| s.state_names()[x].clone()).collect::<Vec<_>>()))
        }
        (SwitchedSystem::Affine(_), StateSet::Polytope(p)) => Ok(serde_json::to_value(p)?),
        _ => Err(Error::BackendMismatch),
    }
}

pub fn set_from_json(system: &SwitchedSystem, value: &Value) -> Result<StateSet> {
    match system {
        SwitchedSystem::Finite(s) => {
            let names: Vec<String> = serde_json::from_value(value.clone())?;
            Ok(StateSet::Finite(s.named_set(&names)?))
        }
        SwitchedSystem::Affine(s) => {
            let p = serde_json::from_value::<PolyJson>(value.clone())?.build()?;
            if p.dim() != s.state_dim() {
                return Err(Error::DimensionMismatch {
                    expected: s.state_dim(),
                    found: p.dim(),
                });
            }
            Ok(StateSet::Polytope(p))
        }
    }
}

/// Certificate as JSON with 1-based node labels.
pub fn certificate_to_json(system: &SwitchedSystem, cert: &Certificate<StateSet>) -> Result<Value> {
    let set = |s: &StateSet| set_to_json(system, s);
    let mut nodes = serde_json::Map::new();
    for (q, node) in cert.nodes.iter().enumerate() {
        let entry = match node {
            NodeCertificate::Sink { invariant } => json!({ "kind": "sink", "invariant": set(invariant)? }),
            NodeCertificate::NonSink {
                t_min,
                holding,
                reach,
                hold,
            } => {
                let mut r = serde_json::Map::new();
                for (j, chain) in reach {
                    r.insert((j + 1).to_string(), Value::Array(chain.iter().map(set).collect::<Result<_>>()?));
                }
                json!({
                    "kind": "non_sink",
                    "t_min": t_min,
                    "holding": holding,
                    "reach": r,
                    "hold": hold.iter().map(set).collect::<Result<Vec<_>>>()?,
                })
            }
        };
        nodes.insert((q + 1).to_string(), entry);
    }
    Ok(json!({ "automaton": cert.automaton, "nodes": nodes }))
}

pub fn certificate_from_json(system: &SwitchedSystem, value: &Value) -> Result<Certificate<StateSet>> {
    let bad = |what: &str| Error::Spec(format!("certificate: {what}"));
    let automaton: PreviewAutomaton = serde_json::from_value(value.get("automaton").cloned().ok_or_else(|| bad("missing automaton"))?)?;
    let raw_nodes = value
        .get("nodes")
        .and_then(Value::as_object)
        .ok_or_else(|| bad("missing nodes"))?;
    let set = |v: &Value| set_from_json(system, v);
    let list = |v: Option<&Value>| -> Result<Vec<StateSet>> {
        v.and_then(Value::as_array)
            .ok_or_else(|| bad("expected a list of sets"))?
            .iter()
            .map(set)
            .collect()
    };
    let mut nodes = Vec::with_capacity(automaton.nodes());
    for q in 1..=automaton.nodes() {
        let entry = raw_nodes
            .get(&q.to_string())
            .ok_or_else(|| bad(&format!("node {q} missing")))?;
        let node = match entry.get("kind").and_then(Value::as_str) {
            Some("sink") => NodeCertificate::Sink {
                invariant: set(entry.get("invariant").ok_or_else(|| bad("sink without invariant"))?)?,
            },
            Some("non_sink") => {
                let num = |k: &str| {
                    entry
                        .get(k)
                        .and_then(Value::as_u64)
                        .map(|v| v as usize)
                        .ok_or_else(|| bad(&format!("node {q}: missing {k}")))
                };
                let mut reach = BTreeMap::new();
                for (label, chain) in entry
                    .get("reach")
                    .and_then(Value::as_object)
                    .ok_or_else(|| bad("missing reach"))?
                {
                    reach.insert(parse_label(label, automaton.nodes())?, list(Some(chain))?);
                }
                let (t_min, holding) = (num("t_min")?, num("holding")?);
                let hold = list(entry.get("hold"))?;
                if hold.len() != holding + 1 - t_min.min(holding + 1) {
                    return Err(bad(&format!("node {q}: hold chain has the wrong length")));
                }
                NodeCertificate::NonSink {
                    t_min,
                    holding,
                    reach,
                    hold,
                }
            }
            _ => return Err(bad(&format!("node {q}: unknown kind"))),
        };
        nodes.push(node);
    }
    Ok(Certificate { automaton, nodes })
}
