//! Reactive Turing machines: text format, configurations on a finite tape
//! window, and the induced transition system.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::lts::{ActionLabel, StepGenerator};

/// A tape symbol: the blank symbol or a datum.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum TapeSym {
    Blank,
    Data(String),
}

impl TapeSym {
    fn parse(text: &str) -> TapeSym {
        if text == "_" {
            TapeSym::Blank
        } else {
            TapeSym::Data(text.to_string())
        }
    }
}

impl fmt::Display for TapeSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TapeSym::Blank => write!(f, "_"),
            TapeSym::Data(d) => write!(f, "{d}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Move {
    Left,
    Right,
}

/// One machine rule: in state `state` reading `read`, perform `action`
/// (`None` = internal step), write `write`, move the head, go to `next`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Rule {
    pub state: String,
    pub action: Option<String>,
    pub read: TapeSym,
    pub write: TapeSym,
    pub mv: Move,
    pub next: String,
}

/// A reactive Turing machine over finite state, action, and data alphabets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rtm {
    pub states: Vec<String>,
    pub actions: Vec<String>,
    pub data: Vec<String>,
    pub init: String,
    pub rules: Vec<Rule>,
}

/// A finite tape fragment with a marked head position. Canonical form: no
/// blank cells on either margin, except that the head cell itself is never
/// trimmed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TapeInstance {
    pub cells: Vec<TapeSym>,
    pub head: usize,
}

impl TapeInstance {
    /// The all-blank tape: a single marked blank cell.
    pub fn empty() -> TapeInstance {
        TapeInstance { cells: vec![TapeSym::Blank], head: 0 }
    }

    pub fn new(cells: Vec<TapeSym>, head: usize) -> TapeInstance {
        assert!(head < cells.len());
        let mut t = TapeInstance { cells, head };
        t.trim();
        t
    }

    pub fn under_head(&self) -> &TapeSym {
        &self.cells[self.head]
    }

    fn trim(&mut self) {
        while self.cells.len() > 1 && self.head < self.cells.len() - 1 && *self.cells.last().unwrap() == TapeSym::Blank {
            self.cells.pop();
        }
        while self.cells.len() > 1 && self.head > 0 && self.cells[0] == TapeSym::Blank {
            self.cells.remove(0);
            self.head -= 1;
        }
    }

    /// Apply a write and head move, extending the fragment with a blank cell
    /// if the head walks off an edge, then re-canonicalize.
    pub fn write_and_move(&self, write: TapeSym, mv: Move) -> TapeInstance {
        let mut cells = self.cells.clone();
        cells[self.head] = write;
        let mut head = self.head;
        match mv {
            Move::Left => {
                if head == 0 {
                    cells.insert(0, TapeSym::Blank);
                } else {
                    head -= 1;
                }
            }
            Move::Right => {
                head += 1;
                if head == cells.len() {
                    cells.push(TapeSym::Blank);
                }
            }
        }
        TapeInstance::new(cells, head)
    }
}

impl fmt::Display for TapeInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .cells
            .iter()
            .enumerate()
            .map(|(i, c)| if i == self.head { format!("[{c}]") } else { c.to_string() })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// A machine configuration: current state plus tape instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Configuration {
    pub state: String,
    pub tape: TapeInstance,
}

impl Configuration {
    /// Canonical key used as LTS state identity.
    pub fn key(&self) -> String {
        format!("{} | {}", self.state, self.tape)
    }
}

#[derive(Debug, Error)]
pub enum RtmParseError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing `{0}:` declaration")]
    MissingSection(&'static str),
    #[error("initial state `{0}` is not a declared state")]
    BadInit(String),
    #[error("rule {0}: {1}")]
    BadRule(usize, String),
    #[error("duplicate rule for (state `{0}`, action `{1}`, read `{2}`)")]
    DuplicateRule(String, String, TapeSym),
}

fn valid_name(s: &str) -> bool {
    !s.is_empty()
        && s != "_"
        && s != "tau"
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Parse the machine text format:
///
/// ```text
/// states: even odd
/// actions: mark move
/// data: 1
/// init: even
/// even mark [_/1] R odd
/// odd  move [_/_] L even
/// ```
///
/// `_` is the blank symbol, `tau` the internal action, `#` starts a comment.
pub fn parse_rtm(text: &str) -> Result<Rtm, RtmParseError> {
    let mut states: Option<Vec<String>> = None;
    let mut actions: Option<Vec<String>> = None;
    let mut data: Option<Vec<String>> = None;
    let mut init: Option<String> = None;
    let mut rule_lines: Vec<(usize, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| RtmParseError::Line { line: line_no, message };
        if let Some(rest) = line.strip_prefix("states:") {
            let names = split_names(rest).map_err(err)?;
            states = Some(names);
        } else if let Some(rest) = line.strip_prefix("actions:") {
            actions = Some(split_names(rest).map_err(err)?);
        } else if let Some(rest) = line.strip_prefix("data:") {
            data = Some(split_names(rest).map_err(err)?);
        } else if let Some(rest) = line.strip_prefix("init:") {
            let name = rest.trim();
            if !valid_name(name) {
                return Err(err(format!("invalid initial state `{name}`")));
            }
            init = Some(name.to_string());
        } else {
            rule_lines.push((line_no, line.to_string()));
        }
    }

    let states = states.ok_or(RtmParseError::MissingSection("states"))?;
    let actions = actions.ok_or(RtmParseError::MissingSection("actions"))?;
    let data = data.ok_or(RtmParseError::MissingSection("data"))?;
    let init = init.ok_or(RtmParseError::MissingSection("init"))?;
    if !states.contains(&init) {
        return Err(RtmParseError::BadInit(init));
    }

    let sym_ok = |s: &TapeSym| match s {
        TapeSym::Blank => true,
        TapeSym::Data(d) => data.contains(d),
    };
    let mut rules = Vec::new();
    for (line_no, line) in rule_lines {
        let bad = |m: String| RtmParseError::BadRule(line_no, m);
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 5 {
            return Err(bad(format!("expected `state action [read/write] move next`, got `{line}`")));
        }
        let state = tokens[0].to_string();
        let action_tok = tokens[1];
        let rw = tokens[2]
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| bad(format!("expected `[read/write]`, got `{}`", tokens[2])))?;
        let (read_tok, write_tok) = rw
            .split_once('/')
            .ok_or_else(|| bad(format!("expected `read/write` inside brackets, got `{rw}`")))?;
        let mv = match tokens[3] {
            "L" => Move::Left,
            "R" => Move::Right,
            other => return Err(bad(format!("expected move `L` or `R`, got `{other}`"))),
        };
        let next = tokens[4].to_string();

        if !states.contains(&state) {
            return Err(bad(format!("undeclared state `{state}`")));
        }
        if !states.contains(&next) {
            return Err(bad(format!("undeclared state `{next}`")));
        }
        let action = if action_tok == "tau" {
            None
        } else if actions.contains(&action_tok.to_string()) {
            Some(action_tok.to_string())
        } else {
            return Err(bad(format!("undeclared action `{action_tok}`")));
        };
        let read = TapeSym::parse(read_tok);
        let write = TapeSym::parse(write_tok);
        if !sym_ok(&read) {
            return Err(bad(format!("undeclared datum `{read_tok}`")));
        }
        if !sym_ok(&write) {
            return Err(bad(format!("undeclared datum `{write_tok}`")));
        }
        let rule = Rule { state, action, read, write, mv, next };
        if rules.contains(&rule) {
            return Err(RtmParseError::DuplicateRule(
                rule.state,
                rule.action.unwrap_or_else(|| "tau".to_string()),
                rule.read,
            ));
        }
        rules.push(rule);
    }
    Ok(Rtm { states, actions, data, init, rules })
}

fn split_names(rest: &str) -> Result<Vec<String>, String> {
    let mut names = Vec::new();
    for tok in rest.split_whitespace() {
        if !valid_name(tok) {
            return Err(format!("invalid name `{tok}`"));
        }
        if names.contains(&tok.to_string()) {
            return Err(format!("duplicate name `{tok}`"));
        }
        names.push(tok.to_string());
    }
    if names.is_empty() && !rest.trim().is_empty() {
        return Err(format!("unparseable list `{rest}`"));
    }
    Ok(names)
}

/// The initial configuration: initial state, all-blank tape.
pub fn initial_config(m: &Rtm) -> Configuration {
    Configuration { state: m.init.clone(), tape: TapeInstance::empty() }
}

/// Enabled steps of a configuration: rules of the current state whose read
/// symbol matches the cell under the head.
pub fn rtm_out(m: &Rtm, config: &Configuration) -> Vec<(ActionLabel, Configuration)> {
    let mut out = Vec::new();
    for rule in &m.rules {
        if rule.state == config.state && rule.read == *config.tape.under_head() {
            let label = match &rule.action {
                None => ActionLabel::Tau,
                Some(a) => ActionLabel::Plain(a.clone()),
            };
            let tape = config.tape.write_and_move(rule.write.clone(), rule.mv);
            out.push((label, Configuration { state: rule.next.clone(), tape }));
        }
    }
    out
}

/// Step generator exposing a machine's configuration graph to [`crate::lts::explore`].
pub struct RtmGenerator {
    machine: Rtm,
}

impl RtmGenerator {
    pub fn new(machine: Rtm) -> RtmGenerator {
        RtmGenerator { machine }
    }
}

/// Convenience constructor.
pub fn rtm_generator(machine: &Rtm) -> RtmGenerator {
    RtmGenerator::new(machine.clone())
}

impl StepGenerator for RtmGenerator {
    fn initial_key(&mut self) -> Result<String, String> {
        Ok(initial_config(&self.machine).key())
    }

    fn successors(&mut self, key: &str) -> Result<Vec<(ActionLabel, String)>, String> {
        let config = parse_config_key(&self.machine, key)?;
        Ok(rtm_out(&self.machine, &config)
            .into_iter()
            .map(|(a, c)| (a, c.key()))
            .collect())
    }
}

fn parse_config_key(m: &Rtm, key: &str) -> Result<Configuration, String> {
    let (state, tape_text) = key
        .split_once(" | ")
        .ok_or_else(|| format!("malformed configuration key `{key}`"))?;
    if !m.states.contains(&state.to_string()) {
        return Err(format!("unknown state in key `{key}`"));
    }
    let mut cells = Vec::new();
    let mut head = None;
    for tok in tape_text.split_whitespace() {
        if let Some(inner) = tok.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            if head.is_some() {
                return Err(format!("two head markers in key `{key}`"));
            }
            head = Some(cells.len());
            cells.push(TapeSym::parse(inner));
        } else {
            cells.push(TapeSym::parse(tok));
        }
    }
    let head = head.ok_or_else(|| format!("no head marker in key `{key}`"))?;
    Ok(Configuration { state: state.to_string(), tape: TapeInstance::new(cells, head) })
}

/// All machine states mentioned by `m`, useful when sizing compilations.
pub fn alphabet_summary(m: &Rtm) -> (BTreeSet<String>, BTreeSet<String>, BTreeSet<String>) {
    (
        m.states.iter().cloned().collect(),
        m.actions.iter().cloned().collect(),
        m.data.iter().cloned().collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::explore;

    const PARITY: &str = "\
# alternate marking and clearing a single cell
states: even odd
actions: mark move clear
data: 1
init: even
even mark  [_/1] R odd
odd  move  [_/_] L even
even clear [1/_] R odd
";

    #[test]
    fn parse_parity() {
        let m = parse_rtm(PARITY).unwrap();
        assert_eq!(m.states, vec!["even", "odd"]);
        assert_eq!(m.rules.len(), 3);
        assert_eq!(m.rules[0].write, TapeSym::Data("1".to_string()));
        assert_eq!(m.rules[1].action, Some("move".to_string()));
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_rtm("states: s\nactions: a\ninit: s\n").is_err()); // no data section
        assert!(parse_rtm("states: s\nactions: a\ndata: 1\ninit: t\n").is_err());
        assert!(parse_rtm("states: s\nactions: a\ndata: 1\ninit: s\ns b [_/_] R s\n").is_err());
        assert!(parse_rtm("states: s\nactions: a\ndata: 1\ninit: s\ns a [_/2] R s\n").is_err());
        assert!(parse_rtm("states: s\nactions: a\ndata: 1\ninit: s\ns a [_/_] X s\n").is_err());
    }

    #[test]
    fn tau_keyword_is_internal() {
        let m = parse_rtm("states: s t\nactions: a\ndata: 1\ninit: s\ns tau [_/_] R t\n").unwrap();
        assert_eq!(m.rules[0].action, None);
        let succ = rtm_out(&m, &initial_config(&m));
        assert_eq!(succ[0].0, ActionLabel::Tau);
    }

    #[test]
    fn tape_trimming_canonical() {
        // Blank margins vanish; head cell survives even when blank.
        let t = TapeInstance::new(
            vec![TapeSym::Blank, TapeSym::Data("1".into()), TapeSym::Blank, TapeSym::Blank],
            1,
        );
        assert_eq!(t.to_string(), "[1]");
        let t2 = TapeInstance::new(vec![TapeSym::Blank, TapeSym::Blank], 1);
        assert_eq!(t2.to_string(), "[_]");
    }

    #[test]
    fn write_and_move_edges() {
        let t = TapeInstance::empty();
        // Write 1, move right: head sits on a fresh blank, 1 remains on the left.
        let r = t.write_and_move(TapeSym::Data("1".into()), Move::Right);
        assert_eq!(r.to_string(), "1 [_]");
        // Move left off the edge of an all-blank tape: still the single blank cell.
        let l = t.write_and_move(TapeSym::Blank, Move::Left);
        assert_eq!(l.to_string(), "[_]");
    }

    #[test]
    fn parity_cycle() {
        // [DERIVED] by hand-stepping the three rules from the blank tape:
        // even|[_] --mark--> odd|1 [_] --move--> even|[1] --clear--> odd|[_] _? ...
        let m = parse_rtm(PARITY).unwrap();
        let c0 = initial_config(&m);
        assert_eq!(c0.key(), "even | [_]");
        let s1 = rtm_out(&m, &c0);
        assert_eq!(s1.len(), 1);
        assert_eq!(s1[0].0, ActionLabel::Plain("mark".into()));
        assert_eq!(s1[0].1.key(), "odd | 1 [_]");
        let s2 = rtm_out(&m, &s1[0].1);
        assert_eq!(s2[0].1.key(), "even | [1]");
        let s3 = rtm_out(&m, &s2[0].1);
        assert_eq!(s3[0].0, ActionLabel::Plain("clear".into()));
        assert_eq!(s3[0].1.key(), "odd | [_]");
        let s4 = rtm_out(&m, &s3[0].1);
        assert_eq!(s4[0].1.key(), "even | [_]");

        let lts = explore(&mut rtm_generator(&m), 100, 100).unwrap();
        assert_eq!(lts.num_states(), 4);
        assert_eq!(lts.num_transitions(), 4);
        assert!(lts.is_frontier_free());
    }

    #[test]
    fn growing_machine_hits_bounds() {
        // s writes 1 and moves right forever: unbounded tape growth.
        let m = parse_rtm("states: s\nactions: a\ndata: 1\ninit: s\ns a [_/1] R s\n").unwrap();
        let lts = explore(&mut rtm_generator(&m), 10, 1000).unwrap();
        assert_eq!(lts.num_states(), 10);
        assert!(!lts.is_frontier_free());
        let deep = explore(&mut rtm_generator(&m), 1000, 5).unwrap();
        assert_eq!(deep.frontier().len(), 1);
        assert_eq!(deep.num_states(), 6);
    }

    #[test]
    fn key_roundtrip_through_generator() {
        let m = parse_rtm(PARITY).unwrap();
        let mut g = rtm_generator(&m);
        let init = g.initial_key().unwrap();
        let succ = g.successors(&init).unwrap();
        assert_eq!(succ, vec![(ActionLabel::Plain("mark".into()), "odd | 1 [_]".to_string())]);
        assert!(g.successors("nowhere | [_]").is_err());
    }
}
