//! Translation of reactive Turing machines into π-terms: replicated tape
//! cells linked into a doubly-linked chain, blank-cell generators at both
//! ends, a tape head, and a machine-specific control process.

use std::collections::BTreeMap;

use crate::pi::{normalize, PiTerm};
use crate::rtm::{Move, Rtm, TapeInstance, TapeSym};

/// Result of compiling a machine: the assembled configuration term, the
/// machine-name → π-name mapping, and the named building blocks.
#[derive(Clone, Debug)]
pub struct CompilationOutput {
    pub term: PiTerm,
    pub name_map: BTreeMap<String, String>,
    pub templates: BTreeMap<String, PiTerm>,
}

/// π-name of a machine state.
pub fn state_name(s: &str) -> String {
    format!("st_{s}")
}

/// π-name of a tape symbol (data are free names inside the tape encoding).
pub fn datum_name(d: &TapeSym) -> String {
    match d {
        TapeSym::Blank => "dt__".to_string(),
        TapeSym::Data(x) => format!("dt_{x}"),
    }
}

/// π-name of a visible machine action.
pub fn action_name(a: &str) -> String {
    format!("act_{a}")
}

fn move_name(mv: Move) -> &'static str {
    match mv {
        Move::Left => "left",
        Move::Right => "right",
    }
}

/// Tape symbols with the blank first, then the machine's data alphabet.
fn symbol_alphabet(m: &Rtm) -> Vec<TapeSym> {
    let mut out = vec![TapeSym::Blank];
    let mut data: Vec<&String> = m.data.iter().collect();
    data.sort();
    out.extend(data.into_iter().map(|d| TapeSym::Data(d.clone())));
    out
}

fn sum_of(mut terms: Vec<PiTerm>) -> PiTerm {
    match terms.len() {
        0 => PiTerm::Nil,
        1 => terms.pop().unwrap(),
        _ => PiTerm::Sum(terms),
    }
}

/// A tape cell holding datum `d`, with its own channel `t`, neighbour
/// channels `l` and `r`, and update channel `u`: either accept an update
/// along `u`, or report everything along `t`; recreate via `c` either way.
pub fn cell_body(t: &str, l: &str, r: &str, u: &str, d: &str) -> PiTerm {
    PiTerm::Sum(vec![
        PiTerm::input(u, "e", PiTerm::poly_out("c", &[t, l, r, u, "e"], PiTerm::Nil)),
        PiTerm::poly_out(
            t,
            &[l, r, u, d],
            PiTerm::poly_out("c", &[t, l, r, u, d], PiTerm::Nil),
        ),
    ])
}

/// The replicated cell definition: receive a full cell description on `c`,
/// then behave as that cell.
pub fn cell_template() -> PiTerm {
    PiTerm::poly_in("c", &["t", "l", "r", "u", "d"], cell_body("t", "l", "r", "u", "d"))
}

/// Body of a left-edge blank-cell generator: announce a blank cell, then in
/// parallel recreate it as an ordinary cell and re-arm the generator one
/// position further left.
pub fn gen_left_body(t: &str, l: &str, r: &str, u: &str) -> PiTerm {
    PiTerm::poly_out(
        t,
        &[l, r, u, "dt__"],
        PiTerm::Par(vec![
            PiTerm::poly_out("c", &[t, l, r, u, "dt__"], PiTerm::Nil),
            PiTerm::poly_out("b_l", &[l, t], PiTerm::Nil),
        ]),
    )
}

/// Right-edge counterpart of [`gen_left_body`]. The re-arming message
/// carries (new own channel, new left neighbour) = (r, t), mirroring the
/// left edge's (l, t) so that the receiving b_r(t, l) binds them correctly.
pub fn gen_right_body(t: &str, l: &str, r: &str, u: &str) -> PiTerm {
    PiTerm::poly_out(
        t,
        &[l, r, u, "dt__"],
        PiTerm::Par(vec![
            PiTerm::poly_out("c", &[t, l, r, u, "dt__"], PiTerm::Nil),
            PiTerm::poly_out("b_r", &[r, t], PiTerm::Nil),
        ]),
    )
}

/// The replicated generator definition: a request on `b_l` or `b_r` carries
/// the links shared with the existing edge; the two remaining links of the
/// new cell are created fresh.
pub fn generator_template() -> PiTerm {
    PiTerm::Sum(vec![
        PiTerm::poly_in(
            "b_l",
            &["t", "r"],
            PiTerm::restrict_all(&["u", "l"], gen_left_body("t", "l", "r", "u")),
        ),
        PiTerm::poly_in(
            "b_r",
            &["t", "l"],
            PiTerm::restrict_all(&["u", "r"], gen_right_body("t", "l", "r", "u")),
        ),
    ])
}

/// The tape head over the cell with links (t, l, r, u) and datum `d`: offer
/// the datum on `read`, accept a replacement on `write` (forwarded to the
/// cell via `u`), or shift attention to a neighbour cell on `left`/`right`.
/// Every branch recreates the head via `h`.
pub fn head_body(t: &str, l: &str, r: &str, u: &str, d: &str) -> PiTerm {
    PiTerm::Sum(vec![
        PiTerm::out("read", d, PiTerm::poly_out("h", &[t, l, r, u, d], PiTerm::Nil)),
        PiTerm::input(
            "write",
            "e",
            PiTerm::out(u, "e", PiTerm::poly_out("h", &[t, l, r, u, "e"], PiTerm::Nil)),
        ),
        PiTerm::poly_in(
            "left",
            &[],
            PiTerm::poly_in(
                l,
                &["l'", "r'", "u'", "d'"],
                PiTerm::poly_out("h", &[l, "l'", "r'", "u'", "d'"], PiTerm::Nil),
            ),
        ),
        PiTerm::poly_in(
            "right",
            &[],
            PiTerm::poly_in(
                r,
                &["l'", "r'", "u'", "d'"],
                PiTerm::poly_out("h", &[r, "l'", "r'", "u'", "d'"], PiTerm::Nil),
            ),
        ),
    ])
}

/// The replicated head definition.
pub fn head_template() -> PiTerm {
    PiTerm::poly_in("h", &["t", "l", "r", "u", "d"], head_body("t", "l", "r", "u", "d"))
}

/// The rule menu of the control in state `s` with datum `d` under the head:
/// one summand per machine rule out of (s, d), performing the action, then
/// write / move / read, then handing (next state, read datum) to the next
/// control incarnation via synchronisations on their names.
pub fn control_rules(m: &Rtm, s: &str, d: &TapeSym) -> PiTerm {
    let mut rules: Vec<&crate::rtm::Rule> = m
        .rules
        .iter()
        .filter(|r| r.state == s && &r.read == d)
        .collect();
    rules.sort();
    let summands: Vec<PiTerm> = rules
        .into_iter()
        .map(|r| {
            let handoff = PiTerm::input(
                "read",
                "f",
                PiTerm::poly_out(
                    &state_name(&r.next),
                    &[],
                    PiTerm::poly_out("f", &[], PiTerm::Nil),
                ),
            );
            let body = PiTerm::out(
                "write",
                &datum_name(&r.write),
                PiTerm::poly_out(move_name(r.mv), &[], handoff),
            );
            match &r.action {
                Some(a) => PiTerm::poly_out(&action_name(a), &[], body),
                None => PiTerm::tau(body),
            }
        })
        .collect();
    sum_of(summands)
}

/// The replicated control definition S: a sum over states, each receiving
/// the current datum next, then offering that (state, datum)'s rule menu.
pub fn control_template(m: &Rtm) -> PiTerm {
    let mut states: Vec<&String> = m.states.iter().collect();
    states.sort();
    let outer: Vec<PiTerm> = states
        .into_iter()
        .map(|s| {
            let inner: Vec<PiTerm> = symbol_alphabet(m)
                .iter()
                .map(|d| PiTerm::poly_in(&datum_name(d), &[], control_rules(m, s, d)))
                .collect();
            PiTerm::poly_in(&state_name(s), &[], sum_of(inner))
        })
        .collect();
    sum_of(outer)
}

/// Channel name of the cell at tape position `i` (positions are shifted by
/// one so the left generator's channel is index 0).
fn t_chan(i: usize) -> String {
    format!("tch{i}")
}

fn u_chan(i: usize) -> String {
    format!("uch{i}")
}

/// The cell chain for a tape instance: left generator, one cell per tape
/// position, right generator, plus the replicated cell and generator
/// definitions, under the creation channels (b_l, b_r, c).
fn cells_term(tape: &TapeInstance) -> PiTerm {
    let n = tape.cells.len();
    let mut parts = Vec::new();
    // Left generator at position -1: own channel tch0, right neighbour tch1;
    // its update channel and next-left channel are its own fresh names.
    parts.push(PiTerm::restrict_all(
        &["gu", "gl"],
        gen_left_body(&t_chan(0), "gl", &t_chan(1), "gu"),
    ));
    for (i, d) in tape.cells.iter().enumerate() {
        parts.push(cell_body(
            &t_chan(i + 1),
            &t_chan(i),
            &t_chan(i + 2),
            &u_chan(i),
            &datum_name(d),
        ));
    }
    parts.push(PiTerm::restrict_all(
        &["gu", "gr"],
        gen_right_body(&t_chan(n + 1), &t_chan(n), "gr", "gu"),
    ));
    parts.push(PiTerm::bang(cell_template()));
    parts.push(PiTerm::bang(generator_template()));
    PiTerm::restrict_all(&["b_l", "b_r", "c"], PiTerm::Par(parts))
}

/// The tape term for an arbitrary tape instance: head positioned on the
/// marked cell, composed with the cell chain, with all cell channels and
/// update channels restricted. The `state_datum` pair carried by machine
/// configurations does not influence the tape term and is ignored.
pub fn tape_snapshot(
    _m: &Rtm,
    tape: &TapeInstance,
    _state_datum: (&str, &TapeSym),
) -> PiTerm {
    let n = tape.cells.len();
    let i = tape.head;
    let head = PiTerm::restrict(
        "h",
        PiTerm::Par(vec![
            head_body(
                &t_chan(i + 1),
                &t_chan(i),
                &t_chan(i + 2),
                &u_chan(i),
                &datum_name(tape.under_head()),
            ),
            PiTerm::bang(head_template()),
        ]),
    );
    let mut binders: Vec<String> = (0..=n + 1).map(t_chan).collect();
    binders.extend((0..n).map(u_chan));
    let binder_refs: Vec<&str> = binders.iter().map(|s| s.as_str()).collect();
    PiTerm::restrict_all(&binder_refs, PiTerm::Par(vec![head, cells_term(tape)]))
}

/// The full configuration term for machine `m` in state `state` with the
/// given tape: active control menu, replicated control, and tape, under the
/// head-interface channels and all state/datum names.
pub fn config_snapshot(m: &Rtm, state: &str, tape: &TapeInstance) -> PiTerm {
    let d = tape.under_head().clone();
    let active = control_rules(m, state, &d);
    let tape_term = tape_snapshot(m, tape, (state, &d));
    let body = PiTerm::Par(vec![active, PiTerm::bang(control_template(m)), tape_term]);
    let mut binders: Vec<String> =
        vec!["read".into(), "write".into(), "left".into(), "right".into()];
    let mut states: Vec<&String> = m.states.iter().collect();
    states.sort();
    binders.extend(states.into_iter().map(|s| state_name(s)));
    binders.extend(symbol_alphabet(m).iter().map(datum_name));
    let binder_refs: Vec<&str> = binders.iter().map(|s| s.as_str()).collect();
    PiTerm::restrict_all(&binder_refs, body)
}

/// Compile a machine to the π-term of its initial configuration (initial
/// state, all-blank tape), normalized. The only free names of the result are
/// the π-names of the machine's visible actions.
pub fn compile(m: &Rtm) -> CompilationOutput {
    let tape = TapeInstance::empty();
    let raw = config_snapshot(m, &m.init, &tape);
    let term = normalize(&raw);

    let mut name_map = BTreeMap::new();
    for s in &m.states {
        name_map.insert(format!("state:{s}"), state_name(s));
    }
    name_map.insert("datum:_".to_string(), datum_name(&TapeSym::Blank));
    for d in &m.data {
        name_map.insert(format!("datum:{d}"), datum_name(&TapeSym::Data(d.clone())));
    }
    for a in &m.actions {
        name_map.insert(format!("action:{a}"), action_name(a));
    }

    let blank = TapeSym::Blank;
    let mut templates = BTreeMap::new();
    templates.insert("C".to_string(), cell_template());
    templates.insert("B".to_string(), generator_template());
    templates.insert("H".to_string(), head_template());
    templates.insert("S".to_string(), control_template(m));
    templates.insert("Cells".to_string(), cells_term(&tape));
    templates.insert("Tape".to_string(), tape_snapshot(m, &tape, (&m.init, &blank)));
    {
        let mut binders: Vec<String> = {
            let mut states: Vec<&String> = m.states.iter().collect();
            states.sort();
            states.into_iter().map(|s| state_name(s)).collect()
        };
        binders.extend(symbol_alphabet(m).iter().map(datum_name));
        let binder_refs: Vec<&str> = binders.iter().map(|s| s.as_str()).collect();
        let control = PiTerm::restrict_all(
            &binder_refs,
            PiTerm::Par(vec![
                control_rules(m, &m.init, &blank),
                PiTerm::bang(control_template(m)),
            ]),
        );
        templates.insert("Control".to_string(), control);
    }
    templates.insert("M".to_string(), raw);

    CompilationOutput { term, name_map, templates }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi::{alpha_eq, free_names, normalize, parse_pi};
    use crate::rtm::parse_rtm;

    fn one_rule_machine() -> Rtm {
        parse_rtm(
            "states: q\n\
             actions: a\n\
             data:\n\
             init: q\n\
             q a [_/_] R q\n",
        )
        .unwrap()
    }

    #[test]
    fn cell_template_shape() {
        let c = cell_template();
        assert_eq!(free_names(&c), ["c".to_string()].into_iter().collect());
        if let PiTerm::PolyIn(_, _, body) = &c {
            match body.as_ref() {
                PiTerm::Sum(summands) => assert_eq!(summands.len(), 2),
                other => panic!("expected a sum, got {}", other.render()),
            }
        } else {
            panic!("expected a polyadic input");
        }
        assert!(alpha_eq(&normalize(&c), &c));
    }

    #[test]
    fn generator_and_head_shape() {
        let b = generator_template();
        match &b {
            PiTerm::Sum(s) => assert_eq!(s.len(), 2),
            other => panic!("expected a sum, got {}", other.render()),
        }
        assert_eq!(
            free_names(&b),
            ["b_l", "b_r", "c", "dt__"].iter().map(|s| s.to_string()).collect()
        );
        let h = head_template();
        if let PiTerm::PolyIn(_, _, body) = &h {
            match body.as_ref() {
                PiTerm::Sum(s) => assert_eq!(s.len(), 4),
                other => panic!("expected a sum, got {}", other.render()),
            }
        } else {
            panic!("expected a polyadic input");
        }
        assert_eq!(
            free_names(&h),
            ["h", "read", "write", "left", "right"].iter().map(|s| s.to_string()).collect()
        );
        assert!(alpha_eq(&normalize(&b), &b));
        assert!(alpha_eq(&normalize(&h), &h));
    }

    #[test]
    fn gen_left_announces_blank_then_spawns() {
        let g = gen_left_body("t", "l", "r", "u");
        // A blank announcement on t, then cell recreation and generator
        // re-arming in parallel.
        match &g {
            PiTerm::PolyOut(t, ys, cont) => {
                assert_eq!(t, "t");
                assert_eq!(ys.last().unwrap(), "dt__");
                match cont.as_ref() {
                    PiTerm::Par(parts) => assert_eq!(parts.len(), 2),
                    other => panic!("expected parallel spawn, got {}", other.render()),
                }
            }
            other => panic!("expected an announcement output, got {}", other.render()),
        }
    }

    #[test]
    fn control_rule_counts() {
        let m = one_rule_machine();
        let menu = control_rules(&m, "q", &TapeSym::Blank);
        // Exactly one rule from (q, blank): the menu is that single summand.
        match &menu {
            PiTerm::PolyOut(a, _, _) => assert_eq!(a, "act_a"),
            other => panic!("expected the action prefix, got {}", other.render()),
        }
        let two = parse_rtm(
            "states: q\n\
             actions: a b\n\
             data:\n\
             init: q\n\
             q a [_/_] R q\n\
             q b [_/_] L q\n",
        )
        .unwrap();
        match control_rules(&two, "q", &TapeSym::Blank) {
            PiTerm::Sum(s) => assert_eq!(s.len(), 2),
            other => panic!("expected a 2-summand menu, got {}", other.render()),
        }
        // A τ rule yields a τ prefix.
        let silent = parse_rtm(
            "states: q\n\
             actions:\n\
             data:\n\
             init: q\n\
             q tau [_/_] R q\n",
        )
        .unwrap();
        match control_rules(&silent, "q", &TapeSym::Blank) {
            PiTerm::Tau(_) => {}
            other => panic!("expected a tau prefix, got {}", other.render()),
        }
    }

    #[test]
    fn compiled_term_free_names_are_actions() {
        let m = one_rule_machine();
        let out = compile(&m);
        assert_eq!(
            free_names(&out.term),
            ["act_a".to_string()].into_iter().collect()
        );
        // The deadlock machine has no rules and therefore no free names.
        let dead = parse_rtm("states: q\nactions:\ndata:\ninit: q\n").unwrap();
        assert!(free_names(&compile(&dead).term).is_empty());
    }

    #[test]
    fn name_map_is_injective() {
        let m = parse_rtm(
            "states: q r\n\
             actions: a\n\
             data: x y\n\
             init: q\n\
             q a [x/y] R r\n",
        )
        .unwrap();
        let out = compile(&m);
        let values: std::collections::BTreeSet<&String> = out.name_map.values().collect();
        assert_eq!(values.len(), out.name_map.len());
        for v in values {
            assert!(v.starts_with("st_") || v.starts_with("dt_") || v.starts_with("act_"));
        }
    }

    #[test]
    fn compiled_term_renders_and_reparses() {
        let m = one_rule_machine();
        let out = compile(&m);
        // The sugared assembly renders in plain surface syntax; its re-parse
        // normalizes back to the compiled term.
        let m_term = out.templates.get("M").unwrap();
        let reparsed = parse_pi(&m_term.render()).unwrap();
        assert!(alpha_eq(&reparsed, &out.term));
        assert!(alpha_eq(&normalize(m_term), &out.term));
    }

    #[test]
    fn snapshot_grows_with_tape() {
        let m = one_rule_machine();
        let t1 = TapeInstance::empty();
        let t3 = TapeInstance::new(
            vec![TapeSym::Data("x".into()), TapeSym::Blank, TapeSym::Data("x".into())],
            1,
        );
        let s1 = tape_snapshot(&m, &t1, ("q", &TapeSym::Blank));
        let s3 = tape_snapshot(&m, &t3, ("q", &TapeSym::Blank));
        assert!(s1.render().len() < s3.render().len());
        assert!(free_names(&s1).contains("read"));
        assert!(free_names(&s1).contains("write"));
    }
}
