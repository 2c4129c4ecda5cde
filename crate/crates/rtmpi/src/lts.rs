//! Finite labelled transition systems: bounded exploration of generated
//! systems, restriction to a finite input alphabet, and Aldebaran (.aut)
//! serialization.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

/// A transition label.
///
/// `BoundOutput` carries the placeholder name chosen for the opened channel;
/// `NuOutput` is the anonymized form produced by restriction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionLabel {
    Tau,
    Plain(String),
    FreeInput(String, String),
    FreeOutput(String, String),
    BoundOutput(String, String),
    NuOutput(String),
}

impl ActionLabel {
    pub fn is_tau(&self) -> bool {
        matches!(self, ActionLabel::Tau)
    }

    /// Text rendering used in .aut files and sort keys.
    pub fn render(&self) -> String {
        match self {
            ActionLabel::Tau => "tau".to_string(),
            ActionLabel::Plain(a) => a.clone(),
            ActionLabel::FreeInput(x, y) => format!("{x}?{y}"),
            ActionLabel::FreeOutput(x, y) => format!("{x}!{y}"),
            ActionLabel::BoundOutput(x, z) => format!("{x}!({z})"),
            ActionLabel::NuOutput(x) => format!("nu!{x}"),
        }
    }

    /// Inverse of [`ActionLabel::render`].
    pub fn parse(text: &str) -> Result<ActionLabel, AutError> {
        fn name_ok(s: &str) -> bool {
            !s.is_empty()
                && s.chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'' || c == '@')
        }
        let bad = || AutError::BadLabel(text.to_string());
        if text == "tau" {
            return Ok(ActionLabel::Tau);
        }
        if let Some(x) = text.strip_prefix("nu!") {
            return if name_ok(x) { Ok(ActionLabel::NuOutput(x.to_string())) } else { Err(bad()) };
        }
        if let Some((x, y)) = text.split_once('?') {
            return if name_ok(x) && name_ok(y) {
                Ok(ActionLabel::FreeInput(x.to_string(), y.to_string()))
            } else {
                Err(bad())
            };
        }
        if let Some((x, rest)) = text.split_once('!') {
            if let Some(z) = rest.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
                return if name_ok(x) && name_ok(z) {
                    Ok(ActionLabel::BoundOutput(x.to_string(), z.to_string()))
                } else {
                    Err(bad())
                };
            }
            return if name_ok(x) && name_ok(rest) {
                Ok(ActionLabel::FreeOutput(x.to_string(), rest.to_string()))
            } else {
                Err(bad())
            };
        }
        if name_ok(text) {
            Ok(ActionLabel::Plain(text.to_string()))
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for ActionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// A finite explored transition system.
///
/// States are opaque canonical keys produced by the owning semantics module.
/// `frontier` marks states at which exploration was cut off; they carry no
/// outgoing transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lts {
    states: Vec<String>,
    transitions: Vec<(usize, ActionLabel, usize)>,
    initial: usize,
    frontier: BTreeSet<usize>,
}

impl Lts {
    pub fn new(
        states: Vec<String>,
        transitions: Vec<(usize, ActionLabel, usize)>,
        initial: usize,
        frontier: BTreeSet<usize>,
    ) -> Lts {
        debug_assert!(initial < states.len());
        debug_assert!(transitions.iter().all(|(s, _, t)| *s < states.len() && *t < states.len()));
        Lts { states, transitions, initial, frontier }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state_key(&self, i: usize) -> &str {
        &self.states[i]
    }

    pub fn state_index(&self, key: &str) -> Option<usize> {
        self.states.iter().position(|k| k == key)
    }

    pub fn transitions(&self) -> &[(usize, ActionLabel, usize)] {
        &self.transitions
    }

    pub fn frontier(&self) -> &BTreeSet<usize> {
        &self.frontier
    }

    pub fn is_frontier_free(&self) -> bool {
        self.frontier.is_empty()
    }

    /// Exact set of labels occurring on transitions.
    pub fn labels(&self) -> BTreeSet<ActionLabel> {
        self.transitions.iter().map(|(_, a, _)| a.clone()).collect()
    }

    pub fn outgoing(&self, state: usize) -> impl Iterator<Item = (&ActionLabel, usize)> {
        self.transitions.iter().filter(move |(s, _, _)| *s == state).map(|(_, a, t)| (a, *t))
    }

    /// The sub-system reachable from `new_initial`, re-rooted there.
    ///
    /// Used to compare an interior state of one exploration against the
    /// initial state of another.
    pub fn rerooted(&self, new_initial: usize) -> Lts {
        assert!(new_initial < self.states.len());
        let mut keep = vec![false; self.states.len()];
        let mut queue = VecDeque::from([new_initial]);
        keep[new_initial] = true;
        while let Some(s) = queue.pop_front() {
            for (_, t) in self.outgoing(s) {
                if !keep[t] {
                    keep[t] = true;
                    queue.push_back(t);
                }
            }
        }
        let mut remap = vec![usize::MAX; self.states.len()];
        let mut states = Vec::new();
        for (i, k) in self.states.iter().enumerate() {
            if keep[i] {
                remap[i] = states.len();
                states.push(k.clone());
            }
        }
        let transitions = self
            .transitions
            .iter()
            .filter(|(s, _, _)| keep[*s])
            .map(|(s, a, t)| (remap[*s], a.clone(), remap[*t]))
            .collect();
        let frontier = self.frontier.iter().filter(|s| keep[**s]).map(|s| remap[*s]).collect();
        Lts { states, transitions, initial: remap[new_initial], frontier }
    }
}

/// Abstract successor function bridging machine and term semantics into one
/// exploration interface. Successor sets must be deterministic per key.
pub trait StepGenerator {
    fn initial_key(&mut self) -> Result<String, String>;
    fn successors(&mut self, key: &str) -> Result<Vec<(ActionLabel, String)>, String>;
}

/// Generator combinator applying the finite-name restriction on the fly:
/// free inputs of data outside `allowed_inputs` are dropped, bound outputs
/// are anonymized to nu-outputs.
///
/// Exploring through this combinator yields the restricted system directly,
/// which stays finite in cases where the unrestricted system does not.
pub struct RestrictedGenerator<G> {
    inner: G,
    allowed_inputs: BTreeSet<String>,
}

impl<G: StepGenerator> RestrictedGenerator<G> {
    pub fn new(inner: G, allowed_inputs: BTreeSet<String>) -> Self {
        RestrictedGenerator { inner, allowed_inputs }
    }
}

impl<G: StepGenerator> StepGenerator for RestrictedGenerator<G> {
    fn initial_key(&mut self) -> Result<String, String> {
        self.inner.initial_key()
    }

    fn successors(&mut self, key: &str) -> Result<Vec<(ActionLabel, String)>, String> {
        let succ = self.inner.successors(key)?;
        Ok(succ
            .into_iter()
            .filter(|(a, _)| match a {
                ActionLabel::FreeInput(_, y) => self.allowed_inputs.contains(y),
                _ => true,
            })
            .map(|(a, t)| match a {
                ActionLabel::BoundOutput(x, _) => (ActionLabel::NuOutput(x), t),
                other => (other, t),
            })
            .collect())
    }
}

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("max_states must be at least 1")]
    InvalidBounds,
    #[error("generator failure on state `{key}`: {message}")]
    Generator { key: String, message: String },
}

/// Breadth-first closure of the generator's initial state under successors.
///
/// States whose expansion would exceed `max_states` or that sit at depth
/// `max_depth` are kept as frontier states with no outgoing transitions.
/// Successor sets are sorted by (rendered label, target key), so the output
/// is deterministic and bound-monotone.
pub fn explore(
    gen: &mut dyn StepGenerator,
    max_states: usize,
    max_depth: usize,
) -> Result<Lts, ExploreError> {
    if max_states == 0 {
        return Err(ExploreError::InvalidBounds);
    }
    let init = gen
        .initial_key()
        .map_err(|message| ExploreError::Generator { key: "<initial>".to_string(), message })?;

    let mut states = vec![init.clone()];
    let mut index: HashMap<String, usize> = HashMap::from([(init, 0)]);
    let mut depth = vec![0usize];
    let mut transitions: Vec<(usize, ActionLabel, usize)> = Vec::new();
    let mut frontier: BTreeSet<usize> = BTreeSet::new();
    let mut queue: VecDeque<usize> = VecDeque::from([0]);

    while let Some(s) = queue.pop_front() {
        if depth[s] >= max_depth {
            frontier.insert(s);
            continue;
        }
        let key = states[s].clone();
        let mut succ = gen
            .successors(&key)
            .map_err(|message| ExploreError::Generator { key: key.clone(), message })?;
        succ.sort_by(|a, b| (a.0.render(), &a.1).cmp(&(b.0.render(), &b.1)));
        succ.dedup();

        let mut fresh = BTreeSet::new();
        for (_, t) in &succ {
            if !index.contains_key(t) {
                fresh.insert(t.clone());
            }
        }
        if states.len() + fresh.len() > max_states {
            frontier.insert(s);
            continue;
        }
        for (a, t) in succ {
            let ti = *index.entry(t.clone()).or_insert_with(|| {
                states.push(t.clone());
                depth.push(depth[s] + 1);
                queue.push_back(states.len() - 1);
                states.len() - 1
            });
            transitions.push((s, a, ti));
        }
    }
    Ok(Lts { states, transitions, initial: 0, frontier })
}

#[derive(Debug, Error)]
pub enum RestrictError {
    #[error("input LTS has {0} frontier states; pass the acknowledgment flag to restrict anyway")]
    Frontier(usize),
}

/// Restriction of an explored system to a finite set of input names
/// (free inputs of other data deleted, bound outputs anonymized, states no
/// longer reachable pruned).
pub fn restrict(
    lts: &Lts,
    allowed_inputs: &BTreeSet<String>,
    acknowledge_frontier: bool,
) -> Result<Lts, RestrictError> {
    if !lts.is_frontier_free() && !acknowledge_frontier {
        return Err(RestrictError::Frontier(lts.frontier.len()));
    }
    let kept: Vec<(usize, ActionLabel, usize)> = lts
        .transitions
        .iter()
        .filter(|(_, a, _)| match a {
            ActionLabel::FreeInput(_, y) => allowed_inputs.contains(y),
            _ => true,
        })
        .map(|(s, a, t)| {
            let a = match a {
                ActionLabel::BoundOutput(x, _) => ActionLabel::NuOutput(x.clone()),
                other => other.clone(),
            };
            (*s, a, *t)
        })
        .collect();

    // Reachability over the surviving edges.
    let mut keep = vec![false; lts.states.len()];
    keep[lts.initial] = true;
    let mut queue = VecDeque::from([lts.initial]);
    while let Some(s) = queue.pop_front() {
        for (src, _, t) in &kept {
            if *src == s && !keep[*t] {
                keep[*t] = true;
                queue.push_back(*t);
            }
        }
    }
    let mut remap = vec![usize::MAX; lts.states.len()];
    let mut states = Vec::new();
    for (i, k) in lts.states.iter().enumerate() {
        if keep[i] {
            remap[i] = states.len();
            states.push(k.clone());
        }
    }
    let mut transitions: Vec<(usize, ActionLabel, usize)> = kept
        .into_iter()
        .filter(|(s, _, _)| keep[*s])
        .map(|(s, a, t)| (remap[s], a, remap[t]))
        .collect();
    transitions.sort_by(|a, b| (a.0, a.1.render(), a.2).cmp(&(b.0, b.1.render(), b.2)));
    transitions.dedup();
    let frontier = lts.frontier.iter().filter(|s| keep[**s]).map(|s| remap[*s]).collect();
    Ok(Lts { states, transitions, initial: remap[lts.initial], frontier })
}

#[derive(Debug, Error)]
pub enum AutError {
    #[error("cannot write an LTS with frontier states to .aut")]
    Frontier,
    #[error("malformed .aut header: {0}")]
    BadHeader(String),
    #[error("state index {0} out of range (header declares {1} states)")]
    OutOfRange(usize, usize),
    #[error("malformed transition line: {0}")]
    BadTransition(String),
    #[error("unparseable label: {0}")]
    BadLabel(String),
    #[error("header declares {declared} transitions, file has {actual}")]
    CountMismatch { declared: usize, actual: usize },
}

/// Serialize to Aldebaran format with canonical (BFS) state numbering and
/// sorted transition lines. Deterministic per input.
pub fn write_aut(lts: &Lts) -> Result<String, AutError> {
    if !lts.is_frontier_free() {
        return Err(AutError::Frontier);
    }
    write_aut_acknowledged(lts)
}

/// As [`write_aut`] but accepts frontier states, recording them as plain
/// deadlock states. Only for callers that explicitly acknowledge truncation.
pub fn write_aut_acknowledged(lts: &Lts) -> Result<String, AutError> {
    // Canonical BFS renumbering driven by (rendered label, target key).
    let mut order: Vec<usize> = Vec::with_capacity(lts.states.len());
    let mut number = vec![usize::MAX; lts.states.len()];
    number[lts.initial] = 0;
    order.push(lts.initial);
    let mut queue = VecDeque::from([lts.initial]);
    while let Some(s) = queue.pop_front() {
        let mut out: Vec<(&ActionLabel, usize)> = lts.outgoing(s).collect();
        out.sort_by_key(|(a, t)| (a.render(), lts.states[*t].clone()));
        for (_, t) in out {
            if number[t] == usize::MAX {
                number[t] = order.len();
                order.push(t);
                queue.push_back(t);
            }
        }
    }
    let reachable = order.len();
    let mut lines: Vec<String> = Vec::with_capacity(lts.transitions.len());
    let mut rows: Vec<(usize, String, usize)> = lts
        .transitions
        .iter()
        .filter(|(s, _, _)| number[*s] != usize::MAX)
        .map(|(s, a, t)| (number[*s], a.render(), number[*t]))
        .collect();
    rows.sort();
    rows.dedup();
    for (s, a, t) in &rows {
        lines.push(format!("({s},\"{a}\",{t})"));
    }
    let mut text = format!("des (0, {}, {})\n", rows.len(), reachable);
    for l in &lines {
        text.push_str(l);
        text.push('\n');
    }
    Ok(text)
}

/// Parse an Aldebaran file. State keys become their decimal indices.
pub fn read_aut(text: &str) -> Result<Lts, AutError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| AutError::BadHeader("<empty>".to_string()))?;
    let header_err = || AutError::BadHeader(header.to_string());
    let body = header
        .trim()
        .strip_prefix("des")
        .and_then(|r| r.trim().strip_prefix('('))
        .and_then(|r| r.trim_end().strip_suffix(')'))
        .ok_or_else(header_err)?;
    let parts: Vec<&str> = body.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(header_err());
    }
    let initial: usize = parts[0].parse().map_err(|_| header_err())?;
    let n_trans: usize = parts[1].parse().map_err(|_| header_err())?;
    let n_states: usize = parts[2].parse().map_err(|_| header_err())?;
    if n_states == 0 || initial >= n_states {
        return Err(AutError::OutOfRange(initial, n_states));
    }

    let mut transitions = Vec::new();
    for line in lines {
        let line = line.trim();
        let bad = || AutError::BadTransition(line.to_string());
        let inner = line
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(bad)?;
        let c1 = inner.find(',').ok_or_else(bad)?;
        let c2 = inner.rfind(',').ok_or_else(bad)?;
        if c1 >= c2 {
            return Err(bad());
        }
        let src: usize = inner[..c1].trim().parse().map_err(|_| bad())?;
        let dst: usize = inner[c2 + 1..].trim().parse().map_err(|_| bad())?;
        let label_text = inner[c1 + 1..c2].trim();
        let label_text = label_text
            .strip_prefix('"')
            .and_then(|r| r.strip_suffix('"'))
            .ok_or_else(bad)?;
        if src >= n_states {
            return Err(AutError::OutOfRange(src, n_states));
        }
        if dst >= n_states {
            return Err(AutError::OutOfRange(dst, n_states));
        }
        transitions.push((src, ActionLabel::parse(label_text)?, dst));
    }
    if transitions.len() != n_trans {
        return Err(AutError::CountMismatch { declared: n_trans, actual: transitions.len() });
    }
    let states = (0..n_states).map(|i| i.to_string()).collect();
    Ok(Lts { states, transitions, initial, frontier: BTreeSet::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct TableGen {
        initial: String,
        rows: Vec<(String, ActionLabel, String)>,
    }

    impl StepGenerator for TableGen {
        fn initial_key(&mut self) -> Result<String, String> {
            Ok(self.initial.clone())
        }
        fn successors(&mut self, key: &str) -> Result<Vec<(ActionLabel, String)>, String> {
            Ok(self
                .rows
                .iter()
                .filter(|(s, _, _)| s == key)
                .map(|(_, a, t)| (a.clone(), t.clone()))
                .collect())
        }
    }

    fn gen(initial: &str, rows: &[(&str, ActionLabel, &str)]) -> TableGen {
        TableGen {
            initial: initial.to_string(),
            rows: rows
                .iter()
                .map(|(s, a, t)| (s.to_string(), a.clone(), t.to_string()))
                .collect(),
        }
    }

    #[test]
    fn empty_closure() {
        let lts = explore(&mut gen("s0", &[]), 10, 10).unwrap();
        assert_eq!(lts.num_states(), 1);
        assert_eq!(lts.num_transitions(), 0);
        assert!(lts.is_frontier_free());
    }

    #[test]
    fn tau_self_loop_closes() {
        let lts = explore(&mut gen("s", &[("s", ActionLabel::Tau, "s")]), 10, 10).unwrap();
        assert_eq!(lts.num_states(), 1);
        assert_eq!(lts.num_transitions(), 1);
        assert!(lts.is_frontier_free());
    }

    #[test]
    fn depth_bound_yields_frontier() {
        struct Chain;
        impl StepGenerator for Chain {
            fn initial_key(&mut self) -> Result<String, String> {
                Ok("0".to_string())
            }
            fn successors(&mut self, key: &str) -> Result<Vec<(ActionLabel, String)>, String> {
                let n: u64 = key.parse().unwrap();
                Ok(vec![(ActionLabel::Plain("a".to_string()), (n + 1).to_string())])
            }
        }
        let lts = explore(&mut Chain, 100, 3).unwrap();
        assert_eq!(lts.num_states(), 4);
        assert_eq!(lts.frontier().len(), 1);
        // Frontier states have no outgoing transitions.
        for f in lts.frontier() {
            assert_eq!(lts.outgoing(*f).count(), 0);
        }
        // Bound monotonicity: raising bounds keeps everything.
        let bigger = explore(&mut Chain, 100, 5).unwrap();
        for i in 0..lts.num_states() {
            assert_eq!(lts.state_key(i), bigger.state_key(i));
        }
        for tr in lts.transitions() {
            assert!(bigger.transitions().contains(tr));
        }
    }

    #[test]
    fn explore_deterministic() {
        let rows = [
            ("s", ActionLabel::Plain("b".to_string()), "u"),
            ("s", ActionLabel::Plain("a".to_string()), "t"),
            ("t", ActionLabel::Tau, "s"),
        ];
        let a = explore(&mut gen("s", &rows), 10, 10).unwrap();
        let b = explore(&mut gen("s", &rows), 10, 10).unwrap();
        assert_eq!(a, b);
        // Successors sorted by rendered label.
        assert_eq!(a.transitions()[0].1, ActionLabel::Plain("a".to_string()));
    }

    #[test]
    fn generator_failure_reports_state() {
        struct Failing;
        impl StepGenerator for Failing {
            fn initial_key(&mut self) -> Result<String, String> {
                Ok("root".to_string())
            }
            fn successors(&mut self, _: &str) -> Result<Vec<(ActionLabel, String)>, String> {
                Err("boom".to_string())
            }
        }
        let err = explore(&mut Failing, 10, 10).unwrap_err();
        assert!(err.to_string().contains("root"));
    }

    #[test]
    fn restrict_deletes_and_relabels() {
        let rows = [
            ("p", ActionLabel::FreeInput("x".to_string(), "a".to_string()), "qa"),
            ("p", ActionLabel::FreeInput("x".to_string(), "c".to_string()), "qc"),
            ("p", ActionLabel::BoundOutput("y".to_string(), "z".to_string()), "qz"),
            ("qc", ActionLabel::Plain("dead".to_string()), "end"),
        ];
        let lts = explore(&mut gen("p", &rows), 50, 50).unwrap();
        let allowed: BTreeSet<String> = ["a".to_string()].into();
        let restricted = restrict(&lts, &allowed, false).unwrap();
        let labels = restricted.labels();
        assert!(labels.contains(&ActionLabel::FreeInput("x".to_string(), "a".to_string())));
        assert!(labels.contains(&ActionLabel::NuOutput("y".to_string())));
        assert!(!labels.iter().any(|l| matches!(l, ActionLabel::BoundOutput(..))));
        // qc and its descendant are pruned.
        assert_eq!(restricted.num_states(), 3);
    }

    #[test]
    fn restrict_tau_only_identity() {
        let rows = [("p", ActionLabel::Tau, "q"), ("q", ActionLabel::Tau, "p")];
        let lts = explore(&mut gen("p", &rows), 10, 10).unwrap();
        let restricted = restrict(&lts, &BTreeSet::new(), false).unwrap();
        assert_eq!(lts, restricted);
    }

    #[test]
    fn aut_roundtrip() {
        let rows = [
            ("p", ActionLabel::Plain("a".to_string()), "q"),
            ("q", ActionLabel::FreeOutput("x".to_string(), "y".to_string()), "p"),
            ("q", ActionLabel::Tau, "q"),
        ];
        let lts = explore(&mut gen("p", &rows), 10, 10).unwrap();
        let text = write_aut(&lts).unwrap();
        let back = read_aut(&text).unwrap();
        assert_eq!(back.num_states(), lts.num_states());
        assert_eq!(back.num_transitions(), lts.num_transitions());
        // Textual idempotence on canonical files.
        assert_eq!(write_aut(&back).unwrap(), text);
    }

    #[test]
    fn aut_trivial_forms() {
        let lts = explore(&mut gen("only", &[]), 10, 10).unwrap();
        assert_eq!(write_aut(&lts).unwrap(), "des (0, 0, 1)\n");
        let rows = [("p", ActionLabel::Plain("a".to_string()), "q")];
        let two = explore(&mut gen("p", &rows), 10, 10).unwrap();
        assert_eq!(write_aut(&two).unwrap(), "des (0, 1, 2)\n(0,\"a\",1)\n");
    }

    #[test]
    fn aut_rejects_malformed() {
        assert!(read_aut("nonsense").is_err());
        assert!(read_aut("des (0, 1, 1)\n(0,\"a\",7)\n").is_err());
        assert!(read_aut("des (0, 0, 1)\n(0,\"a\",0)\n").is_err());
        assert!(read_aut("des (0, 1, 2)\n(0,\"a b\",1)\n").is_err());
    }

    #[test]
    fn label_render_parse_roundtrip() {
        let labels = [
            ActionLabel::Tau,
            ActionLabel::Plain("go".to_string()),
            ActionLabel::FreeInput("x".to_string(), "a".to_string()),
            ActionLabel::FreeOutput("x".to_string(), "a".to_string()),
            ActionLabel::BoundOutput("x".to_string(), "z".to_string()),
            ActionLabel::NuOutput("x".to_string()),
        ];
        for l in labels {
            assert_eq!(ActionLabel::parse(&l.render()).unwrap(), l);
        }
    }
}
