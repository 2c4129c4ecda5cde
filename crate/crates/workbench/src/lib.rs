//! Pipeline plumbing behind the `workbench` command-line tool: parse →
//! explore → restrict → compile → check → analyze, over reactive Turing
//! machine (`.rtm`) and π-calculus (`.pi`) inputs and Aldebaran (`.aut`)
//! transition systems.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rtmpi::{
    branching_bisim, branching_degree, compile, dp_branching_bisim, explore, parse_pi, parse_rtm,
    pi_generator, read_aut, restrict, rtm_generator, write_aut, write_aut_acknowledged,
    ActionLabel, EquivResult, Lts, NameUniverse, RestrictedGenerator, Verdict,
};

/// Comparison mode: plain or divergence-preserving branching bisimilarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Bb,
    Dpbb,
}

impl Mode {
    pub fn parse(s: &str) -> Result<Mode, String> {
        match s {
            "bb" => Ok(Mode::Bb),
            "dpbb" => Ok(Mode::Dpbb),
            other => Err(format!("unknown mode `{other}` (expected bb or dpbb)")),
        }
    }
}

/// Shared knobs for the exploration-based commands.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub max_states: usize,
    pub max_depth: usize,
    pub free_data: Vec<String>,
    pub mode: Mode,
    pub allow_frontier: bool,
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            max_states: 20000,
            max_depth: 200,
            free_data: Vec::new(),
            mode: Mode::Dpbb,
            allow_frontier: false,
            out: None,
        }
    }
}

/// A command outcome: what to print, what exit code to use, and optionally a
/// file to write.
pub struct Outcome {
    pub summary: String,
    pub exit_code: i32,
    pub file: Option<(String, String)>,
}

impl Outcome {
    fn ok(summary: String) -> Outcome {
        Outcome { summary, exit_code: 0, file: None }
    }
}

pub type CmdResult = Result<Outcome, String>;

fn read_file(path: &str) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("cannot read {path}: {e}"))
}

fn lts_summary(name: &str, lts: &Lts) -> String {
    let labels: Vec<String> = lts.labels().iter().map(|l| l.render()).collect();
    format!(
        "{name}: {} states, {} transitions, {} frontier states\nlabels: {{{}}}",
        lts.num_states(),
        lts.num_transitions(),
        lts.frontier().len(),
        labels.join(", ")
    )
}

/// Explore an `.rtm` or `.pi` file into a finite LTS.
pub fn explore_file(path: &str, cfg: &RunConfig) -> Result<Lts, String> {
    let text = read_file(path)?;
    let ext = Path::new(path).extension().and_then(|e| e.to_str()).unwrap_or("");
    let lts = match ext {
        "rtm" => {
            let m = parse_rtm(&text).map_err(|e| format!("{path}: {e}"))?;
            let mut gen = rtm_generator(&m);
            explore(&mut gen, cfg.max_states, cfg.max_depth).map_err(|e| e.to_string())?
        }
        "pi" => {
            let term = parse_pi(&text).map_err(|e| format!("{path}: {e}"))?;
            let universe = NameUniverse::new(cfg.free_data.iter().cloned().collect());
            let mut gen = pi_generator(&term, universe);
            explore(&mut gen, cfg.max_states, cfg.max_depth).map_err(|e| e.to_string())?
        }
        other => return Err(format!("{path}: unsupported input extension `.{other}` (expected .rtm or .pi)")),
    };
    if !lts.is_frontier_free() && !cfg.allow_frontier {
        return Err(format!(
            "{path}: exploration truncated at {} frontier states; raise --max-states/--max-depth or pass --allow-frontier",
            lts.frontier().len()
        ));
    }
    Ok(lts)
}

fn render_aut(lts: &Lts) -> Result<String, String> {
    if lts.is_frontier_free() {
        write_aut(lts).map_err(|e| e.to_string())
    } else {
        write_aut_acknowledged(lts).map_err(|e| e.to_string())
    }
}

pub fn cmd_explore(path: &str, cfg: &RunConfig) -> CmdResult {
    let lts = explore_file(path, cfg)?;
    let text = render_aut(&lts)?;
    let mut outcome = Outcome::ok(lts_summary(path, &lts));
    if let Some(out) = &cfg.out {
        outcome.file = Some((out.clone(), text));
    } else {
        outcome.summary.push('\n');
        outcome.summary.push_str(&text);
    }
    Ok(outcome)
}

/// Compile an RTM to the π-calculus and emit surface syntax plus the name
/// map as comments.
pub fn cmd_compile(path: &str, cfg: &RunConfig) -> CmdResult {
    let text = read_file(path)?;
    let m = parse_rtm(&text).map_err(|e| format!("{path}: {e}"))?;
    let out = compile(&m);
    let mut body = String::new();
    for (k, v) in &out.name_map {
        let _ = writeln!(body, "# {k} -> {v}");
    }
    let _ = writeln!(body, "{}", out.templates["M"].render());
    let mut outcome = Outcome::ok(format!(
        "compiled {path}: {} machine names mapped, term with {} visible action channels",
        out.name_map.len(),
        m.actions.len()
    ));
    if let Some(dest) = &cfg.out {
        outcome.file = Some((dest.clone(), body));
    } else {
        outcome.summary.push('\n');
        outcome.summary.push_str(&body);
    }
    Ok(outcome)
}

fn verdict_outcome(result: &EquivResult, cfg: &RunConfig) -> Outcome {
    let (summary, exit_code) = match result.verdict {
        Verdict::Equivalent => ("equivalent".to_string(), 0),
        Verdict::Inequivalent => {
            let detail = result
                .evidence
                .as_ref()
                .map(|(s, t, a)| format!(" (unmatched `{}` obligation at pair ({s}, {t}))", a.render()))
                .unwrap_or_default();
            (format!("inequivalent{detail}"), 1)
        }
        Verdict::IndeterminateFrontier => {
            ("indeterminate: frontier states present; raise exploration bounds".to_string(), 2)
        }
    };
    let mut outcome = Outcome { summary, exit_code, file: None };
    if let Some(out) = &cfg.out {
        if let Some(witness) = &result.witness {
            let mut text = String::new();
            for (a, b) in witness {
                let _ = writeln!(text, "({a},{b})");
            }
            outcome.file = Some((out.clone(), text));
        }
    }
    outcome
}

fn check_lts(a: &Lts, b: &Lts, mode: Mode) -> EquivResult {
    match mode {
        Mode::Bb => branching_bisim(a, b),
        Mode::Dpbb => dp_branching_bisim(a, b),
    }
}

pub fn cmd_check(path_a: &str, path_b: &str, cfg: &RunConfig) -> CmdResult {
    let a = read_aut(&read_file(path_a)?).map_err(|e| format!("{path_a}: {e}"))?;
    let b = read_aut(&read_file(path_b)?).map_err(|e| format!("{path_b}: {e}"))?;
    Ok(verdict_outcome(&check_lts(&a, &b, cfg.mode), cfg))
}

pub fn cmd_restrict(path: &str, names: &[String], cfg: &RunConfig) -> CmdResult {
    let lts = read_aut(&read_file(path)?).map_err(|e| format!("{path}: {e}"))?;
    let allowed: BTreeSet<String> = names.iter().cloned().collect();
    let restricted =
        restrict(&lts, &allowed, cfg.allow_frontier).map_err(|e| e.to_string())?;
    let text = render_aut(&restricted)?;
    let mut outcome = Outcome::ok(lts_summary("restricted", &restricted));
    if let Some(out) = &cfg.out {
        outcome.file = Some((out.clone(), text));
    } else {
        outcome.summary.push('\n');
        outcome.summary.push_str(&text);
    }
    Ok(outcome)
}

pub fn cmd_degree(path: &str) -> CmdResult {
    let lts = read_aut(&read_file(path)?).map_err(|e| format!("{path}: {e}"))?;
    if !lts.is_frontier_free() {
        return Err("degree analysis requires a frontier-free LTS".to_string());
    }
    let (degrees, sup) = branching_degree(&lts);
    let mut summary = String::new();
    for (s, d) in degrees.iter().enumerate() {
        let _ = writeln!(summary, "state {s}: degree {d}");
    }
    let _ = write!(summary, "supremum: {sup}");
    Ok(Outcome::ok(summary))
}

/// Result of the compile-and-compare pipeline, kept structured so tests can
/// assert on the pieces.
pub struct RoundtripReport {
    pub native: Lts,
    pub compiled: Lts,
    pub result: EquivResult,
}

/// One-shot Theorem-style pipeline: explore the machine natively, compile it,
/// explore the compiled term restricted to its action alphabet, align the
/// label vocabularies, and compare.
pub fn roundtrip(machine_text: &str, cfg: &RunConfig) -> Result<RoundtripReport, String> {
    let m = parse_rtm(machine_text).map_err(|e| e.to_string())?;
    let mut native_gen = rtm_generator(&m);
    let native = explore(&mut native_gen, cfg.max_states, cfg.max_depth).map_err(|e| e.to_string())?;
    if !native.is_frontier_free() {
        return Err(format!(
            "native exploration truncated at {} frontier states; the machine's reachable space must be finite within the bounds (raise --max-states/--max-depth)",
            native.frontier().len()
        ));
    }

    let out = compile(&m);
    // Compiled terms never receive external data, so the compiled system is
    // explored with an empty input universe; bound outputs of the action
    // channels surface as nu-outputs.
    let gen = pi_generator(&out.term, NameUniverse::empty());
    let mut restricted_gen = RestrictedGenerator::new(gen, BTreeSet::new());
    let compiled_raw =
        explore(&mut restricted_gen, cfg.max_states, cfg.max_depth).map_err(|e| e.to_string())?;
    if !compiled_raw.is_frontier_free() {
        return Err(format!(
            "compiled exploration truncated at {} frontier states ({} explored); raise --max-states/--max-depth",
            compiled_raw.frontier().len(),
            compiled_raw.num_states()
        ));
    }

    let compiled = relabel_actions(&compiled_raw, &out.name_map)?;
    let result = check_lts(&native, &compiled, cfg.mode);
    Ok(RoundtripReport { native, compiled, result })
}

/// Map the compiled system's `nu!act_a` labels back to the machine's plain
/// action labels, rejecting any label outside the expected vocabulary.
fn relabel_actions(
    lts: &Lts,
    name_map: &std::collections::BTreeMap<String, String>,
) -> Result<Lts, String> {
    let mut reverse = std::collections::BTreeMap::new();
    for (k, v) in name_map {
        if let Some(action) = k.strip_prefix("action:") {
            reverse.insert(v.clone(), action.to_string());
        }
    }
    let transitions: Result<Vec<_>, String> = lts
        .transitions()
        .iter()
        .map(|(s, a, t)| {
            let a = match a {
                ActionLabel::Tau => ActionLabel::Tau,
                ActionLabel::NuOutput(x) => match reverse.get(x) {
                    Some(action) => ActionLabel::Plain(action.clone()),
                    None => return Err(format!("unexpected visible channel `{x}` in compiled system")),
                },
                other => return Err(format!("unexpected label `{}` in compiled system", other.render())),
            };
            Ok((*s, a, *t))
        })
        .collect();
    let keys: Vec<String> = (0..lts.num_states()).map(|i| lts.state_key(i).to_string()).collect();
    Ok(Lts::new(keys, transitions?, lts.initial(), lts.frontier().clone()))
}

pub fn cmd_roundtrip(path: &str, cfg: &RunConfig) -> CmdResult {
    let text = read_file(path)?;
    match roundtrip(&text, cfg) {
        Ok(report) => {
            let mut outcome = verdict_outcome(&report.result, cfg);
            outcome.summary = format!(
                "native: {} states / compiled: {} states\nverdict: {}",
                report.native.num_states(),
                report.compiled.num_states(),
                outcome.summary
            );
            Ok(outcome)
        }
        Err(e) if e.contains("truncated") => Ok(Outcome {
            summary: format!("indeterminate: {e}"),
            exit_code: 2,
            file: None,
        }),
        Err(e) => Err(e),
    }
}
