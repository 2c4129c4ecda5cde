//! Early-style operational semantics for core π-terms: PREFIX, SUM, PAR,
//! COM, CLOSE, RES, OPEN, and the three replication rules, with symmetric
//! variants of the left-handed rules.

use std::collections::BTreeSet;
use std::collections::HashMap;

use crate::lts::{ActionLabel, StepGenerator};

use super::normal::{normalize_owned, normalize};
use super::term::{expand_polyadic, free_names, pick_fresh, substitute, NameUniverse, PiTerm};

/// A symbolic transition: inputs are kept as abstractions so that the
/// instantiation policy (which data to receive) is applied exactly once, at
/// the top level or at a communication point.
#[derive(Clone, Debug)]
pub enum Step {
    Tau(PiTerm),
    /// free output x!y
    Free { chan: String, datum: String, cont: PiTerm },
    /// bound output x!(z): `placeholder` is globally fresh for this call
    Bound { chan: String, placeholder: String, cont: PiTerm },
    /// input x(z): `body` still abstracts over the binder
    In { chan: String, binder: String, body: PiTerm },
}

/// All symbolic transitions of a core (sugar-free) term.
///
/// Precondition: the term is in canonical form (see `normalize`), so its
/// binders are pairwise distinct and disjoint from its free names. Under
/// that hygiene condition the RES/OPEN side conditions reduce to equality
/// checks and the PAR side condition bn(α) ∩ fn(others) = ∅ holds for free;
/// `substitute` (capture-avoiding) covers the remaining replication cases,
/// where two copies of one body share binder names.
pub fn pi_steps(p: &PiTerm) -> Vec<Step> {
    steps(p)
}

fn steps(p: &PiTerm) -> Vec<Step> {
    match p {
        PiTerm::Nil => Vec::new(),
        PiTerm::Tau(q) => vec![Step::Tau((**q).clone())],
        PiTerm::Out(x, y, q) => {
            vec![Step::Free { chan: x.clone(), datum: y.clone(), cont: (**q).clone() }]
        }
        PiTerm::In(x, z, q) => {
            vec![Step::In { chan: x.clone(), binder: z.clone(), body: (**q).clone() }]
        }
        PiTerm::PolyOut(..) | PiTerm::PolyIn(..) => {
            unreachable!("pi_steps requires sugar-expanded terms")
        }
        PiTerm::Sum(ps) => ps.iter().flat_map(steps).collect(),
        PiTerm::Par(ps) => {
            let component_steps: Vec<Vec<Step>> = ps.iter().map(steps).collect();
            let mut out = Vec::new();
            // PAR: lift each component's steps into the full composition.
            for (i, ss) in component_steps.iter().enumerate() {
                if ss.is_empty() {
                    continue;
                }
                let others: Vec<PiTerm> =
                    ps.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, q)| q.clone()).collect();
                for s in ss {
                    out.push(lift_par(s, &others, i));
                }
            }
            // COM / CLOSE between distinct components (both orientations).
            for i in 0..ps.len() {
                for j in 0..ps.len() {
                    if i == j {
                        continue;
                    }
                    let mut rest: Option<Vec<PiTerm>> = None;
                    for send in &component_steps[i] {
                        for recv in &component_steps[j] {
                            if !can_communicate(send, recv) {
                                continue;
                            }
                            let rest = rest.get_or_insert_with(|| {
                                ps.iter()
                                    .enumerate()
                                    .filter(|(k, _)| *k != i && *k != j)
                                    .map(|(_, q)| q.clone())
                                    .collect()
                            });
                            if let Some(t) = communicate(send, recv, rest) {
                                out.push(Step::Tau(t));
                            }
                        }
                    }
                }
            }
            out
        }
        PiTerm::Restrict(z, q) => {
            let mut out = Vec::new();
            for s in steps(q) {
                match s {
                    Step::Tau(t) => out.push(Step::Tau(PiTerm::restrict(z, t))),
                    Step::Free { chan, datum, cont } => {
                        if chan == *z {
                            continue; // RES: blocked on the restricted channel
                        }
                        if datum == *z {
                            // OPEN: scope extrusion, continuation not rewrapped
                            out.push(Step::Bound { chan, placeholder: z.clone(), cont });
                        } else {
                            out.push(Step::Free {
                                chan,
                                datum,
                                cont: PiTerm::restrict(z, cont),
                            });
                        }
                    }
                    Step::Bound { chan, placeholder, cont } => {
                        if chan == *z {
                            continue;
                        }
                        out.push(Step::Bound {
                            chan,
                            placeholder,
                            cont: PiTerm::restrict(z, cont),
                        });
                    }
                    Step::In { chan, binder, body } => {
                        if chan == *z {
                            continue;
                        }
                        out.push(Step::In { chan, binder, body: PiTerm::restrict(z, body) });
                    }
                }
            }
            out
        }
        PiTerm::Bang(q) => {
            let inner = steps(q);
            let mut out = Vec::new();
            // REP-ACT: P | !P after one copy acts.
            let bang = [p.clone()];
            for s in &inner {
                out.push(lift_par(s, &bang, 0));
            }
            // REP-COM / REP-CLOSE: two copies communicate with each other.
            for send in &inner {
                for recv in &inner {
                    if let Some(t) = communicate(send, recv, &bang) {
                        out.push(Step::Tau(t));
                    }
                }
            }
            out
        }
    }
}

/// PAR: attach the non-acting components to a step's continuation. Binder
/// hygiene (see [`pi_steps`]) discharges the bn(α) ∩ fn(others) = ∅ side
/// condition without renaming.
fn lift_par(s: &Step, others: &[PiTerm], acting_index: usize) -> Step {
    let compose = |t: PiTerm| {
        let mut parts = Vec::with_capacity(others.len() + 1);
        parts.extend(others[..acting_index].iter().cloned());
        parts.push(t);
        parts.extend(others[acting_index..].iter().cloned());
        PiTerm::Par(parts)
    };
    match s {
        Step::Tau(t) => Step::Tau(compose(t.clone())),
        Step::Free { chan, datum, cont } => {
            Step::Free { chan: chan.clone(), datum: datum.clone(), cont: compose(cont.clone()) }
        }
        Step::Bound { chan, placeholder, cont } => Step::Bound {
            chan: chan.clone(),
            placeholder: placeholder.clone(),
            cont: compose(cont.clone()),
        },
        Step::In { chan, binder, body } => {
            Step::In { chan: chan.clone(), binder: binder.clone(), body: compose(body.clone()) }
        }
    }
}

fn can_communicate(send: &Step, recv: &Step) -> bool {
    let chan_r = match recv {
        Step::In { chan, .. } => chan,
        _ => return false,
    };
    matches!(send,
        Step::Free { chan, .. } | Step::Bound { chan, .. } if chan == chan_r)
}

/// COM / CLOSE: combine a sending step with a receiving step.
fn communicate(send: &Step, recv: &Step, rest: &[PiTerm]) -> Option<PiTerm> {
    let (chan_r, binder, body) = match recv {
        Step::In { chan, binder, body } => (chan, binder, body),
        _ => return None,
    };
    match send {
        Step::Free { chan, datum, cont } if chan == chan_r => {
            let mut parts = vec![cont.clone(), substitute(body, binder, datum)];
            parts.extend(rest.iter().cloned());
            Some(PiTerm::Par(parts))
        }
        Step::Bound { chan, placeholder, cont } if chan == chan_r => {
            // CLOSE: the extruded name is re-bound around both parties.
            // Binder hygiene gives z ∉ fn(rest); a same-named binder inside
            // `body` (possible only for replication copies) is shadowing,
            // which `substitute` preserves.
            let joined = PiTerm::Par(vec![cont.clone(), substitute(body, binder, placeholder)]);
            let mut parts = vec![PiTerm::restrict(placeholder, joined)];
            parts.extend(rest.iter().cloned());
            Some(PiTerm::Par(parts))
        }
        _ => None,
    }
}

/// Concrete transitions of a normalized term: symbolic steps with inputs
/// instantiated per the finite-name policy (universe data ∪ free names of
/// the term ∪ one canonical fresh representative) and every target
/// normalized. Deterministic per (term, universe).
pub fn pi_out(p: &PiTerm, u: &NameUniverse) -> Vec<(ActionLabel, PiTerm)> {
    let fns = free_names(p);
    let mut out = Vec::new();
    for s in pi_steps(p) {
        match s {
            Step::Tau(t) => out.push((ActionLabel::Tau, normalize_owned(t))),
            Step::Free { chan, datum, cont } => {
                out.push((ActionLabel::FreeOutput(chan, datum), normalize_owned(cont)))
            }
            Step::Bound { chan, placeholder, cont } => {
                // Canonicalize the placeholder: it is exported to the
                // observer, so pick the first `@f` name unused elsewhere in
                // the continuation.
                let mut used = free_names(&cont);
                used.remove(&placeholder);
                let canon = pick_fresh("f", &used);
                let cont = normalize_owned(substitute(&cont, &placeholder, &canon));
                out.push((ActionLabel::BoundOutput(chan, canon), cont));
            }
            Step::In { chan, binder, body } => {
                let mut candidates: BTreeSet<String> = u.free_data.clone();
                candidates.extend(fns.iter().cloned());
                let mut pool = candidates.clone();
                pool.insert(chan.clone());
                candidates.insert(pick_fresh("f", &pool));
                for datum in candidates {
                    out.push((
                        ActionLabel::FreeInput(chan.clone(), datum.clone()),
                        normalize_owned(substitute(&body, &binder, &datum)),
                    ));
                }
            }
        }
    }
    out.sort_by_cached_key(|(label, term)| (label.render(), term.render()));
    out.dedup();
    out
}

/// Step generator over canonical term renderings, for [`crate::lts::explore`].
pub struct PiGenerator {
    initial: PiTerm,
    universe: NameUniverse,
    cache: HashMap<String, PiTerm>,
}

impl PiGenerator {
    pub fn new(p: &PiTerm, universe: NameUniverse) -> PiGenerator {
        let initial = normalize(&expand_polyadic(p));
        PiGenerator { initial, universe, cache: HashMap::new() }
    }
}

/// Convenience constructor matching the other semantics modules.
pub fn pi_generator(p: &PiTerm, universe: NameUniverse) -> PiGenerator {
    PiGenerator::new(p, universe)
}

impl StepGenerator for PiGenerator {
    fn initial_key(&mut self) -> Result<String, String> {
        let key = self.initial.render();
        self.cache.insert(key.clone(), self.initial.clone());
        Ok(key)
    }

    fn successors(&mut self, key: &str) -> Result<Vec<(ActionLabel, String)>, String> {
        let term = match self.cache.get(key) {
            Some(t) => t.clone(),
            None => return Err(format!("unknown state key `{key}`")),
        };
        let mut out = Vec::new();
        for (label, target) in pi_out(&term, &self.universe) {
            let tkey = target.render();
            self.cache.entry(tkey.clone()).or_insert(target);
            out.push((label, tkey));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lts::explore;
    use crate::pi::parse::parse_pi;

    fn prep(src: &str) -> PiTerm {
        normalize(&expand_polyadic(&parse_pi(src).unwrap()))
    }

    fn universe(names: &[&str]) -> NameUniverse {
        NameUniverse::new(names.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn prefix_rules() {
        // tau.0 -> {(tau, 0)}
        let out = pi_out(&prep("tau.0"), &NameUniverse::empty());
        assert_eq!(out, vec![(ActionLabel::Tau, PiTerm::Nil)]);
        // x!a.0 -> {(x!a, 0)}
        let out = pi_out(&prep("x!a.0"), &NameUniverse::empty());
        assert_eq!(out, vec![(ActionLabel::FreeOutput("x".into(), "a".into()), PiTerm::Nil)]);
        // Input: one branch per candidate datum plus one fresh representative.
        let out = pi_out(&prep("x?(y).y!y.0"), &universe(&["a"]));
        let labels: Vec<String> = out.iter().map(|(l, _)| l.render()).collect();
        assert_eq!(labels, vec!["x?@f0", "x?a", "x?x"]);
        // Received name is substituted through.
        assert_eq!(out[1].1, prep("a!a.0"));
    }

    #[test]
    fn open_rule_emits_bound_output() {
        // (v z)x!z.0 -> x!(z) via OPEN, with a canonical placeholder.
        let out = pi_out(&prep("(v z)x!z.0"), &NameUniverse::empty());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, ActionLabel::BoundOutput("x".into(), "@f0".into()));
        assert_eq!(out[0].1, PiTerm::Nil);
    }

    #[test]
    fn res_blocks_restricted_channel() {
        let out = pi_out(&prep("(v z)z!a.0"), &NameUniverse::empty());
        assert!(out.is_empty());
        let out = pi_out(&prep("(v z)z?(w).0"), &NameUniverse::empty());
        assert!(out.is_empty());
        // But an unrelated action passes RES.
        let out = pi_out(&prep("(v z)(x!a.z?(w).0)"), &NameUniverse::empty());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, ActionLabel::FreeOutput("x".into(), "a".into()));
    }

    #[test]
    fn com_between_components() {
        // x!a.0 | x?(y).y!b.0: COM gives tau to a!b.0.
        let p = prep("x!a.0 | x?(y).y!b.0");
        let out = pi_out(&p, &universe(&["a"]));
        let taus: Vec<&PiTerm> =
            out.iter().filter(|(l, _)| l.is_tau()).map(|(_, t)| t).collect();
        assert_eq!(taus, vec![&prep("a!b.0")]);
        // External branches are still present.
        assert!(out.iter().any(|(l, _)| *l == ActionLabel::FreeOutput("x".into(), "a".into())));
        assert!(out.iter().any(|(l, _)| matches!(l, ActionLabel::FreeInput(c, _) if c == "x")));
    }

    #[test]
    fn close_restores_scope() {
        // (v z)(x!z.z!a.0) | x?(y).y?(w).w!w.0: CLOSE re-binds the extruded name.
        let p = prep("(v z)x!z.z!a.0 | x?(y).y?(w).w!b.0");
        let out = pi_out(&p, &NameUniverse::empty());
        let taus: Vec<&PiTerm> = out.iter().filter(|(l, _)| l.is_tau()).map(|(_, t)| t).collect();
        assert_eq!(taus.len(), 1);
        // After CLOSE the two parties share a private channel.
        assert_eq!(*taus[0], prep("(v z)(z!a.0 | z?(w).w!b.0)"));
    }

    #[test]
    fn polyadic_zero_arity_synchronizes() {
        // Encoded dataless handshake: sync!<>.a!x.0 | sync?().b!x.0
        let p = prep("(v sync)(sync!<>.a!x.0 | sync?().b!x.0)");
        let out = pi_out(&p, &NameUniverse::empty());
        assert_eq!(out.len(), 1);
        assert!(out[0].0.is_tau());
        assert_eq!(out[0].1, prep("a!x.0 | b!x.0"));
    }

    #[test]
    fn replication_rules() {
        // REP-ACT: !tau.0 has a tau self-loop at its single canonical state.
        let p = prep("!tau.0");
        let out = pi_out(&p, &NameUniverse::empty());
        assert_eq!(out.len(), 1);
        assert!(out[0].0.is_tau());
        assert_eq!(out[0].1, p);
        // REP-COM: two copies of one replicated term communicate.
        let p = prep("!(x!a.0 + x?(y).y!c.0)");
        let out = pi_out(&p, &universe(&[]));
        assert!(out
            .iter()
            .any(|(l, t)| l.is_tau() && *t == prep("a!c.0 | !(x!a.0 + x?(y).y!c.0)")));
    }

    #[test]
    fn rep_close_keeps_bang_outside_scope() {
        // The 0-ary output sugar hides a bound output, so two copies of the
        // replicated term connect through REP-CLOSE.
        let p = prep("!(x!<>.a!q.0 + x?(y).b!q.0)");
        let out = pi_out(&p, &NameUniverse::empty());
        let expected = prep("a!q.0 | b!q.0 | !(x!<>.a!q.0 + x?(y).b!q.0)");
        assert!(out.iter().any(|(l, t)| l.is_tau() && *t == expected));
    }

    #[test]
    fn explore_simple_chains() {
        let mut g = pi_generator(&parse_pi("tau.tau.0").unwrap(), NameUniverse::empty());
        let lts = explore(&mut g, 10, 10).unwrap();
        assert_eq!(lts.num_states(), 3);
        assert_eq!(lts.num_transitions(), 2);

        let mut g = pi_generator(&parse_pi("0").unwrap(), NameUniverse::empty());
        let lts = explore(&mut g, 10, 10).unwrap();
        assert_eq!(lts.num_states(), 1);
        assert_eq!(lts.num_transitions(), 0);
    }

    #[test]
    fn alpha_invariance_of_pi_out() {
        let u = universe(&["a", "b"]);
        let p = prep("x?(y).(v q)(y!q.0 | q?(w).0)");
        let q = prep("x?(z).(v r)(z!r.0 | r?(v2).0)");
        assert_eq!(p, q);
        assert_eq!(pi_out(&p, &u), pi_out(&q, &u));
    }

    #[test]
    fn generator_is_deterministic() {
        let src = "(v z)(x!z.z!a.0) | x?(y).y?(w).w!b.0";
        let mk = || pi_generator(&parse_pi(src).unwrap(), universe(&["a"]));
        let a = explore(&mut mk(), 100, 100).unwrap();
        let b = explore(&mut mk(), 100, 100).unwrap();
        assert_eq!(a, b);
    }
}
