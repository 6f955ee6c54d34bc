//! Preview automata: which mode switches may happen, how early each one is
//! announced and how long a mode must be held.
//!
//! Node ids are 0-based in the API. Files and messages use 1-based labels.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound used when sampling from an interval without one.
const SAMPLE_CAP: usize = 16;

/// Integer interval `[lo, hi]`; `hi = None` stands for an unbounded interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: usize,
    pub hi: Option<usize>,
}

impl Interval {
    pub fn new(lo: usize, hi: Option<usize>) -> Self {
        Interval { lo, hi }
    }

    pub fn singleton(v: usize) -> Self {
        Interval { lo: v, hi: Some(v) }
    }

    pub fn unbounded(lo: usize) -> Self {
        Interval { lo, hi: None }
    }

    pub fn contains(&self, v: usize) -> bool {
        v >= self.lo && self.hi.is_none_or(|h| v <= h)
    }

    pub fn is_singleton(&self) -> bool {
        self.hi == Some(self.lo)
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.hi {
            Some(h) => write!(f, "[{}, {}]", self.lo, h),
            None => write!(f, "[{}, inf)", self.lo),
        }
    }
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        (self.lo, self.hi).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (lo, hi) = <(usize, Option<usize>)>::deserialize(d)?;
        Ok(Interval { lo, hi })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub preview: Interval,
}

/// `{Q, E, T, H}` with `Q = 0..nodes`. `holding[q] = None` marks an
/// unbounded holding time, which is what sinks carry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreviewAutomaton {
    nodes: usize,
    edges: Vec<Edge>,
    holding: Vec<Option<usize>>,
}

/// A structural rule broken by an automaton.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    NoNodes,
    HoldingLength { expected: usize, found: usize },
    UnknownNode { from: usize, to: usize },
    SelfLoop { node: usize },
    DuplicateEdge { from: usize, to: usize },
    EmptyInterval { from: usize, to: usize },
    SinkWithFiniteHolding { node: usize },
    NonSinkWithInfiniteHolding { node: usize },
    ZeroHolding { node: usize },
    HoldingBelowPreview { node: usize, holding: usize, min_preview: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match *self {
            NoNodes => write!(f, "no-nodes: the automaton has no nodes"),
            HoldingLength { expected, found } => write!(
                f,
                "holding-map: expected {expected} holding times, found {found}"
            ),
            UnknownNode { from, to } => {
                write!(f, "unknown-node: edge ({}, {}) leaves the node set", from + 1, to + 1)
            }
            SelfLoop { node } => write!(f, "self-loop: edge ({0}, {0})", node + 1),
            DuplicateEdge { from, to } => {
                write!(f, "duplicate-edge: ({}, {}) listed twice", from + 1, to + 1)
            }
            EmptyInterval { from, to } => write!(
                f,
                "empty-interval: preview interval of ({}, {}) has upper bound below lower bound",
                from + 1,
                to + 1
            ),
            SinkWithFiniteHolding { node } => write!(
                f,
                "sink-holding: node {} has no outgoing edges but a finite holding time",
                node + 1
            ),
            NonSinkWithInfiniteHolding { node } => write!(
                f,
                "holding-time: node {} has outgoing edges but an infinite holding time",
                node + 1
            ),
            ZeroHolding { node } => write!(f, "holding-time: node {} has holding time 0", node + 1),
            HoldingBelowPreview {
                node,
                holding,
                min_preview,
            } => write!(
                f,
                "holding-below-preview: node {} holds for {holding} steps but its shortest preview is {min_preview}",
                node + 1
            ),
        }
    }
}

impl PreviewAutomaton {
    /// Builds an automaton without validating it; see [`Self::validate`].
    pub fn new(nodes: usize, edges: Vec<Edge>, holding: Vec<Option<usize>>) -> Self {
        let mut edges = edges;
        edges.sort_by_key(|e| (e.from, e.to));
        PreviewAutomaton {
            nodes,
            edges,
            holding,
        }
    }

    /// Builds and validates, reporting every violation on failure.
    pub fn checked(nodes: usize, edges: Vec<Edge>, holding: Vec<Option<usize>>) -> Result<Self> {
        let g = Self::new(nodes, edges, holding);
        g.ensure_valid()?;
        Ok(g)
    }

    /// Same preview interval on every edge and same holding time on every
    /// non-sink node.
    pub fn uniform(nodes: usize, pairs: &[(usize, usize)], preview: Interval, holding: usize) -> Result<Self> {
        let edges: Vec<Edge> = pairs
            .iter()
            .map(|&(from, to)| Edge { from, to, preview })
            .collect();
        let hold = (0..nodes)
            .map(|q| pairs.iter().any(|&(f, _)| f == q).then_some(holding))
            .collect();
        Self::checked(nodes, edges, hold)
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn holding(&self, q: usize) -> Option<usize> {
        self.holding.get(q).copied().flatten()
    }

    pub fn edge(&self, from: usize, to: usize) -> Option<Interval> {
        self.edges
            .iter()
            .find(|e| e.from == from && e.to == to)
            .map(|e| e.preview)
    }

    /// Outgoing edges of `q` as `(destination, preview interval)`.
    pub fn successors(&self, q: usize) -> impl Iterator<Item = (usize, Interval)> + '_ {
        self.edges
            .iter()
            .filter(move |e| e.from == q)
            .map(|e| (e.to, e.preview))
    }

    pub fn is_sink(&self, q: usize) -> bool {
        self.successors(q).next().is_none()
    }

    /// Shortest preview time over the outgoing edges of `q`.
    pub fn t_min(&self, q: usize) -> Option<usize> {
        self.successors(q).map(|(_, t)| t.lo).min()
    }

    pub fn is_reduced(&self) -> bool {
        self.edges.iter().all(|e| e.preview.is_singleton())
    }

    /// Replaces each preview interval by the singleton of its lower bound.
    pub fn reduce_to_lower_bounds(&self) -> PreviewAutomaton {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.preview = Interval::singleton(e.preview.lo);
        }
        g
    }

    /// Copy with every preview interval and non-sink holding time replaced.
    pub fn with_timing(&self, preview: Interval, holding: usize) -> Result<PreviewAutomaton> {
        let mut g = self.clone();
        for e in &mut g.edges {
            e.preview = preview;
        }
        for q in 0..g.nodes {
            if !g.is_sink(q) {
                g.holding[q] = Some(holding);
            }
        }
        g.ensure_valid()?;
        Ok(g)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.nodes == 0 {
            out.push(Violation::NoNodes);
        }
        if self.holding.len() != self.nodes {
            out.push(Violation::HoldingLength {
                expected: self.nodes,
                found: self.holding.len(),
            });
        }
        for (k, e) in self.edges.iter().enumerate() {
            if e.from >= self.nodes || e.to >= self.nodes {
                out.push(Violation::UnknownNode { from: e.from, to: e.to });
            }
            if e.from == e.to {
                out.push(Violation::SelfLoop { node: e.from });
            }
            if self.edges[..k].iter().any(|f| f.from == e.from && f.to == e.to) {
                out.push(Violation::DuplicateEdge { from: e.from, to: e.to });
            }
            if e.preview.hi.is_some_and(|h| h < e.preview.lo) {
                out.push(Violation::EmptyInterval { from: e.from, to: e.to });
            }
        }
        for q in 0..self.nodes.min(self.holding.len()) {
            match (self.is_sink(q), self.holding[q]) {
                (true, Some(_)) => out.push(Violation::SinkWithFiniteHolding { node: q }),
                (false, None) => out.push(Violation::NonSinkWithInfiniteHolding { node: q }),
                (false, Some(0)) => out.push(Violation::ZeroHolding { node: q }),
                (false, Some(h)) => {
                    let min_preview = self.t_min(q).expect("non-sink");
                    if h < min_preview {
                        out.push(Violation::HoldingBelowPreview {
                            node: q,
                            holding: h,
                            min_preview,
                        });
                    }
                }
                (true, None) => {}
            }
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            let msgs: Vec<String> = v.iter().map(ToString::to_string).collect();
            Err(Error::InvalidAutomaton(msgs.join("; ")))
        }
    }

    fn check_node(&self, q: usize) -> Result<()> {
        if q < self.nodes {
            Ok(())
        } else {
            Err(Error::UnknownMode(q))
        }
    }
}

/// Announcement at time `t` that the mode switches to `dest` at `t + tau`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviewInput {
    pub t: usize,
    pub tau: usize,
    pub dest: usize,
}

impl PreviewInput {
    pub fn new(t: usize, tau: usize, dest: usize) -> Self {
        PreviewInput { t, tau, dest }
    }

    pub fn switch_time(&self) -> usize {
        self.t + self.tau
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Clause {
    /// A preview arrived before the previous switch took place.
    Ordering,
    /// The edge does not exist or the preview time is outside its interval.
    Transition,
    /// The switch comes before the holding time of the current mode ran out.
    Holding,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SequenceViolation {
    pub index: usize,
    pub clause: Clause,
    pub detail: String,
}

impl fmt::Display for SequenceViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let clause = match self.clause {
            Clause::Ordering => "ordering",
            Clause::Transition => "transition",
            Clause::Holding => "holding",
        };
        write!(f, "input {} breaks the {clause} rule: {}", self.index, self.detail)
    }
}

/// Checks a preview input sequence starting in `q0` at time 0.
///
/// Holding is measured from the moment a mode is entered to the moment it
/// is left, so the initial mode must also be held for `H(q0)` steps.
pub fn validate_input_sequence(
    g: &PreviewAutomaton,
    q0: usize,
    seq: &[PreviewInput],
) -> std::result::Result<(), SequenceViolation> {
    let mut entry = 0usize;
    let mut current = q0;
    for (index, p) in seq.iter().enumerate() {
        let fail = |clause, detail: String| SequenceViolation {
            index,
            clause,
            detail,
        };
        if p.t < entry {
            return Err(fail(
                Clause::Ordering,
                format!("preview at {} precedes the previous switch at {entry}", p.t),
            ));
        }
        let Some(interval) = g.edge(current, p.dest) else {
            return Err(fail(
                Clause::Transition,
                format!("no edge ({}, {})", current + 1, p.dest + 1),
            ));
        };
        if !interval.contains(p.tau) {
            return Err(fail(
                Clause::Transition,
                format!("preview time {} outside {interval}", p.tau),
            ));
        }
        let held = p.switch_time() - entry;
        match g.holding(current) {
            Some(h) if held >= h => {}
            h => {
                return Err(fail(
                    Clause::Holding,
                    format!(
                        "mode {} held for {held} steps, needs {}",
                        current + 1,
                        h.map_or("inf".to_string(), |h| h.to_string())
                    ),
                ))
            }
        }
        entry = p.switch_time();
        current = p.dest;
    }
    Ok(())
}

/// Mode `node` is active on the integer interval `[start, end]`; `end = None`
/// means forever.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Segment {
    pub start: usize,
    pub end: Option<usize>,
    pub node: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Execution {
    pub segments: Vec<Segment>,
}

impl Execution {
    pub fn node_at(&self, t: usize) -> usize {
        self.segments
            .iter()
            .find(|s| t >= s.start && s.end.is_none_or(|e| t <= e))
            .expect("segments cover every time")
            .node
    }
}

pub fn execution_of(g: &PreviewAutomaton, q0: usize, seq: &[PreviewInput]) -> Result<Execution> {
    g.check_node(q0)?;
    validate_input_sequence(g, q0, seq).map_err(Error::InvalidSequence)?;
    let mut segments = Vec::with_capacity(seq.len() + 1);
    let mut start = 0;
    let mut node = q0;
    for p in seq {
        segments.push(Segment {
            start,
            end: Some(p.switch_time() - 1),
            node,
        });
        start = p.switch_time();
        node = p.dest;
    }
    segments.push(Segment {
        start,
        end: None,
        node,
    });
    Ok(Execution { segments })
}

/// The input of the reduced automaton that announces the same switch, using
/// the shortest admissible preview time.
pub fn infer_reduced_input(g: &PreviewAutomaton, input: PreviewInput, source: usize) -> Result<PreviewInput> {
    let interval = g.edge(source, input.dest).ok_or_else(|| {
        Error::PreviewRejected(format!("no edge ({}, {})", source + 1, input.dest + 1))
    })?;
    if !interval.contains(input.tau) {
        return Err(Error::PreviewRejected(format!(
            "preview time {} outside {interval}",
            input.tau
        )));
    }
    let tau = interval.lo;
    Ok(PreviewInput {
        t: input.switch_time() - tau,
        tau,
        dest: input.dest,
    })
}

/// Random valid preview input sequence whose last switch happens at or after
/// `horizon` (or that ends in a sink). Deterministic in `seed`.
pub fn random_input_sequence(g: &PreviewAutomaton, q0: usize, horizon: usize, seed: u64) -> Vec<PreviewInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut entry = 0usize;
    let mut current = q0;
    while entry < horizon {
        let succ: Vec<(usize, Interval)> = g.successors(current).collect();
        let Some(&(dest, interval)) = succ.choose(&mut rng) else {
            break;
        };
        let top = interval.hi.map_or(interval.lo + SAMPLE_CAP, |h| h.min(interval.lo + SAMPLE_CAP));
        let tau = rng.random_range(interval.lo..=top);
        let hold = g.holding(current).unwrap_or(0);
        let extra = rng.random_range(0..=hold.max(2));
        let switch = entry + hold.max(tau) + extra;
        out.push(PreviewInput {
            t: switch - tau,
            tau,
            dest,
        });
        entry = switch;
        current = dest;
    }
    out
}

#[derive(Serialize, Deserialize)]
struct EdgeJson {
    from: usize,
    to: usize,
    preview: Interval,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutomatonJson {
    nodes: usize,
    edges: Vec<EdgeJson>,
    holding: BTreeMap<String, Option<usize>>,
}

/// Parses a 1-based node label.
pub fn parse_label(s: &str, nodes: usize) -> Result<usize> {
    match s.trim().parse::<usize>() {
        Ok(v) if v >= 1 && v <= nodes => Ok(v - 1),
        _ => Err(Error::Spec(format!("node label {s:?} is not in 1..={nodes}"))),
    }
}

impl Serialize for PreviewAutomaton {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        AutomatonJson {
            nodes: self.nodes,
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    from: e.from + 1,
                    to: e.to + 1,
                    preview: e.preview,
                })
                .collect(),
            holding: self
                .holding
                .iter()
                .enumerate()
                .map(|(q, h)| ((q + 1).to_string(), *h))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PreviewAutomaton {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = AutomatonJson::deserialize(d)?;
        let mut holding = vec![None; raw.nodes];
        let mut seen = vec![false; raw.nodes];
        for (label, h) in &raw.holding {
            let q = parse_label(label, raw.nodes).map_err(D::Error::custom)?;
            holding[q] = *h;
            seen[q] = true;
        }
        if let Some(q) = seen.iter().position(|s| !s) {
            return Err(D::Error::custom(format!("holding time missing for node {}", q + 1)));
        }
        let mut edges = Vec::with_capacity(raw.edges.len());
        for e in raw.edges {
            if e.from == 0 || e.to == 0 {
                return Err(D::Error::custom("node labels start at 1"));
            }
            edges.push(Edge {
                from: e.from - 1,
                to: e.to - 1,
                preview: e.preview,
            });
        }
        Ok(PreviewAutomaton::new(raw.nodes, edges, holding))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig4() -> PreviewAutomaton {
        PreviewAutomaton::uniform(2, &[(0, 1), (1, 0)], Interval::singleton(1), 3).unwrap()
    }

    fn fig2() -> PreviewAutomaton {
        PreviewAutomaton::uniform(3, &[(0, 1), (1, 0), (1, 2), (2, 1)], Interval::singleton(1), 2).unwrap()
    }

    #[test]
    fn fig2_is_valid() {
        assert!(fig2().validate().is_empty());
    }

    #[test]
    fn self_loop_and_holding_rules() {
        let g = PreviewAutomaton::new(
            2,
            vec![
                Edge { from: 0, to: 0, preview: Interval::singleton(1) },
                Edge { from: 0, to: 1, preview: Interval::singleton(1) },
            ],
            vec![Some(2), Some(2)],
        );
        let v = g.validate();
        assert!(v.contains(&Violation::SelfLoop { node: 0 }));
        assert!(v.contains(&Violation::SinkWithFiniteHolding { node: 1 }));

        let g = PreviewAutomaton::new(
            2,
            vec![Edge { from: 0, to: 1, preview: Interval::singleton(1) }],
            vec![None, None],
        );
        assert_eq!(g.validate(), vec![Violation::NonSinkWithInfiniteHolding { node: 0 }]);
        assert!(g.validate()[0].to_string().starts_with("holding-time"));
    }

    #[test]
    fn holding_must_cover_shortest_preview() {
        let g = PreviewAutomaton::new(
            2,
            vec![Edge { from: 0, to: 1, preview: Interval::new(3, Some(4)) }],
            vec![Some(2), None],
        );
        assert!(matches!(g.validate()[..], [Violation::HoldingBelowPreview { node: 0, .. }]));
    }

    #[test]
    fn sequence_clauses() {
        let g = fig4();
        assert!(validate_input_sequence(&g, 0, &[]).is_ok());
        assert!(validate_input_sequence(&g, 0, &[PreviewInput::new(2, 1, 1)]).is_ok());
        let err = validate_input_sequence(&g, 0, &[PreviewInput::new(1, 1, 1)]).unwrap_err();
        assert_eq!((err.index, err.clause), (0, Clause::Holding));
        let err = validate_input_sequence(&g, 0, &[PreviewInput::new(3, 2, 1)]).unwrap_err();
        assert_eq!(err.clause, Clause::Transition);
        let seq = [PreviewInput::new(2, 1, 1), PreviewInput::new(2, 1, 0)];
        assert_eq!(validate_input_sequence(&g, 0, &seq).unwrap_err().clause, Clause::Ordering);
    }

    #[test]
    fn execution_intervals() {
        let g = fig4();
        let e = execution_of(&g, 0, &[]).unwrap();
        assert_eq!(e.segments, vec![Segment { start: 0, end: None, node: 0 }]);
        let e = execution_of(&g, 0, &[PreviewInput::new(2, 1, 1)]).unwrap();
        assert_eq!(
            e.segments,
            vec![
                Segment { start: 0, end: Some(2), node: 0 },
                Segment { start: 3, end: None, node: 1 }
            ]
        );
        assert!(execution_of(&g, 0, &[PreviewInput::new(0, 1, 1)]).is_err());
    }

    #[test]
    fn reduction_and_inference() {
        let g = PreviewAutomaton::new(
            2,
            vec![Edge { from: 0, to: 1, preview: Interval::new(1, Some(3)) }],
            vec![Some(3), None],
        );
        let r = g.reduce_to_lower_bounds();
        assert_eq!(r.edge(0, 1), Some(Interval::singleton(1)));
        assert_eq!(r.reduce_to_lower_bounds(), r);
        assert_eq!(
            infer_reduced_input(&g, PreviewInput::new(5, 3, 1), 0).unwrap(),
            PreviewInput::new(7, 1, 1)
        );
        assert_eq!(
            infer_reduced_input(&g, PreviewInput::new(5, 1, 1), 0).unwrap(),
            PreviewInput::new(5, 1, 1)
        );
        assert!(infer_reduced_input(&g, PreviewInput::new(5, 4, 1), 0).is_err());
        assert!(infer_reduced_input(&g, PreviewInput::new(5, 1, 0), 1).is_err());
    }

    #[test]
    fn unbounded_reduces_to_lower_bound() {
        let g = PreviewAutomaton::new(
            2,
            vec![Edge { from: 0, to: 1, preview: Interval::unbounded(1) }],
            vec![Some(1), None],
        );
        assert_eq!(g.reduce_to_lower_bounds().edge(0, 1), Some(Interval::singleton(1)));
    }

    #[test]
    fn random_sequences() {
        let g = fig2();
        let a = random_input_sequence(&g, 0, 200, 0);
        let b = random_input_sequence(&g, 0, 200, 1);
        assert_ne!(a, b);
        assert_eq!(a, random_input_sequence(&g, 0, 200, 0));
        assert!(validate_input_sequence(&g, 0, &a).is_ok());
        assert!(a.last().unwrap().switch_time() >= 200);

        let sink = PreviewAutomaton::new(1, vec![], vec![None]);
        assert!(random_input_sequence(&sink, 0, 100, 3).is_empty());
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"nodes": 3, "edges": [{"from": 1, "to": 2, "preview": [1, null]},
                       {"from": 2, "to": 3, "preview": [0, 2]}],
                       "holding": {"1": 2, "2": 2, "3": null}}"#;
        let g: PreviewAutomaton = serde_json::from_str(text).unwrap();
        assert!(g.validate().is_empty());
        assert_eq!(g.edge(0, 1), Some(Interval::unbounded(1)));
        let back: PreviewAutomaton = serde_json::from_value(serde_json::to_value(&g).unwrap()).unwrap();
        assert_eq!(back, g);

        let missing = r#"{"nodes": 2, "edges": [], "holding": {"1": null}}"#;
        assert!(serde_json::from_str::<PreviewAutomaton>(missing).is_err());
    }
}
