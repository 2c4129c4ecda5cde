//! π-term syntax trees, name computations, capture-avoiding substitution,
//! and expansion of the polyadic abbreviations.

use std::rc::Rc;
use std::collections::BTreeSet;
use std::fmt;

/// Reserved prefix for machine-generated names. The surface parser rejects
/// identifiers starting with it, so generated names never collide with user
/// names.
pub const FRESH_PREFIX: char = '@';

/// The finite environment a π-term is explored in: which data names an
/// external observer may feed to free inputs.
#[derive(Clone, Debug, Default)]
pub struct NameUniverse {
    pub free_data: BTreeSet<String>,
}

impl NameUniverse {
    pub fn new(free_data: BTreeSet<String>) -> NameUniverse {
        NameUniverse { free_data }
    }

    pub fn empty() -> NameUniverse {
        NameUniverse { free_data: BTreeSet::new() }
    }
}

/// A π-calculus term. `PolyOut`/`PolyIn` are the polyadic abbreviations;
/// everything else is the core calculus. `In` is the monadic core input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PiTerm {
    Nil,
    Tau(Rc<PiTerm>),
    /// x!y.P
    Out(String, String, Rc<PiTerm>),
    /// x?(y).P — binder y scopes over the body
    In(String, String, Rc<PiTerm>),
    /// x!<y1,...,yn>.P (n ≥ 0), sugar
    PolyOut(String, Vec<String>, Rc<PiTerm>),
    /// x?(y1,...,yn).P (n = 0 or n ≥ 2), sugar
    PolyIn(String, Vec<String>, Rc<PiTerm>),
    Sum(Vec<PiTerm>),
    Par(Vec<PiTerm>),
    /// (v z)P
    Restrict(String, Rc<PiTerm>),
    /// !P
    Bang(Rc<PiTerm>),
}

impl PiTerm {
    pub fn tau(p: PiTerm) -> PiTerm {
        PiTerm::Tau(Rc::new(p))
    }
    pub fn out(x: &str, y: &str, p: PiTerm) -> PiTerm {
        PiTerm::Out(x.to_string(), y.to_string(), Rc::new(p))
    }
    pub fn input(x: &str, y: &str, p: PiTerm) -> PiTerm {
        PiTerm::In(x.to_string(), y.to_string(), Rc::new(p))
    }
    pub fn poly_out(x: &str, ys: &[&str], p: PiTerm) -> PiTerm {
        PiTerm::PolyOut(x.to_string(), ys.iter().map(|s| s.to_string()).collect(), Rc::new(p))
    }
    pub fn poly_in(x: &str, ys: &[&str], p: PiTerm) -> PiTerm {
        PiTerm::PolyIn(x.to_string(), ys.iter().map(|s| s.to_string()).collect(), Rc::new(p))
    }
    pub fn restrict(z: &str, p: PiTerm) -> PiTerm {
        PiTerm::Restrict(z.to_string(), Rc::new(p))
    }
    pub fn restrict_all(zs: &[&str], p: PiTerm) -> PiTerm {
        zs.iter().rev().fold(p, |acc, z| PiTerm::restrict(z, acc))
    }
    pub fn bang(p: PiTerm) -> PiTerm {
        PiTerm::Bang(Rc::new(p))
    }

    /// Canonical text rendering; injective on terms (full parenthesization of
    /// Sum/Par), and the inverse of the surface parser on core terms.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s);
        s
    }

    fn render_into(&self, s: &mut String) {
        match self {
            PiTerm::Nil => s.push('0'),
            PiTerm::Tau(p) => {
                s.push_str("tau.");
                p.render_into(s);
            }
            PiTerm::Out(x, y, p) => {
                s.push_str(x);
                s.push('!');
                s.push_str(y);
                s.push('.');
                p.render_into(s);
            }
            PiTerm::In(x, y, p) => {
                s.push_str(x);
                s.push_str("?(");
                s.push_str(y);
                s.push_str(").");
                p.render_into(s);
            }
            PiTerm::PolyOut(x, ys, p) => {
                s.push_str(x);
                s.push_str("!<");
                s.push_str(&ys.join(","));
                s.push_str(">.");
                p.render_into(s);
            }
            PiTerm::PolyIn(x, ys, p) => {
                s.push_str(x);
                s.push_str("?(");
                s.push_str(&ys.join(","));
                s.push_str(").");
                p.render_into(s);
            }
            PiTerm::Sum(ps) => {
                s.push('(');
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        s.push_str(" + ");
                    }
                    p.render_into(s);
                }
                s.push(')');
            }
            PiTerm::Par(ps) => {
                s.push('(');
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        s.push_str(" | ");
                    }
                    p.render_into(s);
                }
                s.push(')');
            }
            PiTerm::Restrict(z, p) => {
                s.push_str("(v ");
                s.push_str(z);
                s.push(')');
                p.render_into(s);
            }
            PiTerm::Bang(p) => {
                s.push('!');
                // Sums and prefixes are unambiguous operands; wrap the rest.
                match **p {
                    PiTerm::Par(_) | PiTerm::Sum(_) => p.render_into(s),
                    _ => {
                        s.push('(');
                        p.render_into(s);
                        s.push(')');
                    }
                }
            }
        }
    }
}

impl fmt::Display for PiTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render())
    }
}

/// Names occurring free in `p`.
pub fn free_names(p: &PiTerm) -> BTreeSet<String> {
    fn go(p: &PiTerm, out: &mut BTreeSet<String>, bound: &mut Vec<String>) {
        let note = |n: &String, bound: &Vec<String>, out: &mut BTreeSet<String>| {
            if !bound.contains(n) {
                out.insert(n.clone());
            }
        };
        match p {
            PiTerm::Nil => {}
            PiTerm::Tau(q) | PiTerm::Bang(q) => go(q, out, bound),
            PiTerm::Out(x, y, q) => {
                note(x, bound, out);
                note(y, bound, out);
                go(q, out, bound);
            }
            PiTerm::In(x, z, q) => {
                note(x, bound, out);
                bound.push(z.clone());
                go(q, out, bound);
                bound.pop();
            }
            PiTerm::PolyOut(x, ys, q) => {
                note(x, bound, out);
                for y in ys {
                    note(y, bound, out);
                }
                go(q, out, bound);
            }
            PiTerm::PolyIn(x, zs, q) => {
                note(x, bound, out);
                let n = zs.len();
                bound.extend(zs.iter().cloned());
                go(q, out, bound);
                bound.truncate(bound.len() - n);
            }
            PiTerm::Sum(ps) | PiTerm::Par(ps) => {
                for q in ps {
                    go(q, out, bound);
                }
            }
            PiTerm::Restrict(z, q) => {
                bound.push(z.clone());
                go(q, out, bound);
                bound.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    go(p, &mut out, &mut Vec::new());
    out
}

/// Names bound anywhere in `p` (input binders and restrictions).
pub fn bound_names(p: &PiTerm) -> BTreeSet<String> {
    fn go(p: &PiTerm, out: &mut BTreeSet<String>) {
        match p {
            PiTerm::Nil => {}
            PiTerm::Tau(q) | PiTerm::Bang(q) | PiTerm::Out(_, _, q) | PiTerm::PolyOut(_, _, q) => {
                go(q, out)
            }
            PiTerm::In(_, z, q) => {
                out.insert(z.clone());
                go(q, out);
            }
            PiTerm::PolyIn(_, zs, q) => {
                out.extend(zs.iter().cloned());
                go(q, out);
            }
            PiTerm::Sum(ps) | PiTerm::Par(ps) => {
                for q in ps {
                    go(q, out);
                }
            }
            PiTerm::Restrict(z, q) => {
                out.insert(z.clone());
                go(q, out);
            }
        }
    }
    let mut out = BTreeSet::new();
    go(p, &mut out);
    out
}

/// Pick a generated name `@{hint}{k}` with the smallest `k` avoiding `used`.
pub fn pick_fresh(hint: &str, used: &BTreeSet<String>) -> String {
    for k in 0.. {
        let cand = format!("{FRESH_PREFIX}{hint}{k}");
        if !used.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

/// Capture-avoiding substitution of `replacement` for free occurrences of
/// `target`; binders equal to `replacement` are α-renamed first.
pub fn substitute(p: &PiTerm, target: &str, replacement: &str) -> PiTerm {
    if target == replacement {
        return p.clone();
    }
    let sub = |n: &str| if n == target { replacement.to_string() } else { n.to_string() };
    match p {
        PiTerm::Nil => PiTerm::Nil,
        PiTerm::Tau(q) => PiTerm::tau(substitute(q, target, replacement)),
        PiTerm::Bang(q) => PiTerm::bang(substitute(q, target, replacement)),
        PiTerm::Out(x, y, q) => {
            PiTerm::Out(sub(x), sub(y), Rc::new(substitute(q, target, replacement)))
        }
        PiTerm::PolyOut(x, ys, q) => PiTerm::PolyOut(
            sub(x),
            ys.iter().map(|y| sub(y)).collect(),
            Rc::new(substitute(q, target, replacement)),
        ),
        PiTerm::In(x, z, q) => {
            let x = sub(x);
            if z == target {
                // target is shadowed; only the channel is affected.
                PiTerm::In(x, z.clone(), q.clone())
            } else if z == replacement {
                // α-rename the binder so it cannot capture the replacement.
                let mut used = free_names(q);
                used.insert(target.to_string());
                used.insert(replacement.to_string());
                let z2 = pick_fresh("s", &used);
                let body = substitute(q, z, &z2);
                PiTerm::In(x, z2, Rc::new(substitute(&body, target, replacement)))
            } else {
                PiTerm::In(x, z.clone(), Rc::new(substitute(q, target, replacement)))
            }
        }
        PiTerm::PolyIn(x, zs, q) => {
            let x = sub(x);
            if zs.iter().any(|z| z == target) {
                PiTerm::PolyIn(x, zs.clone(), q.clone())
            } else if zs.iter().any(|z| z == replacement) {
                let mut used = free_names(q);
                used.insert(target.to_string());
                used.insert(replacement.to_string());
                used.extend(zs.iter().cloned());
                let mut body = (**q).clone();
                let mut new_zs = Vec::with_capacity(zs.len());
                for z in zs {
                    if z == replacement {
                        let z2 = pick_fresh("s", &used);
                        used.insert(z2.clone());
                        body = substitute(&body, z, &z2);
                        new_zs.push(z2);
                    } else {
                        new_zs.push(z.clone());
                    }
                }
                PiTerm::PolyIn(x, new_zs, Rc::new(substitute(&body, target, replacement)))
            } else {
                PiTerm::PolyIn(x, zs.clone(), Rc::new(substitute(q, target, replacement)))
            }
        }
        PiTerm::Sum(ps) => PiTerm::Sum(ps.iter().map(|q| substitute(q, target, replacement)).collect()),
        PiTerm::Par(ps) => PiTerm::Par(ps.iter().map(|q| substitute(q, target, replacement)).collect()),
        PiTerm::Restrict(z, q) => {
            if z == target {
                p.clone()
            } else if z == replacement {
                let mut used = free_names(q);
                used.insert(target.to_string());
                used.insert(replacement.to_string());
                let z2 = pick_fresh("s", &used);
                let body = substitute(q, z, &z2);
                PiTerm::Restrict(z2, Rc::new(substitute(&body, target, replacement)))
            } else {
                PiTerm::Restrict(z.clone(), Rc::new(substitute(q, target, replacement)))
            }
        }
    }
}

/// Expand the polyadic abbreviations into the core calculus:
/// x!<y1..yn>.P ⇒ (w)(x!w.w!y1.…yn.P) with w fresh, x?(z1..zn).P ⇒
/// x?(w).w?(z1).…(zn).P.
pub fn expand_polyadic(p: &PiTerm) -> PiTerm {
    match p {
        PiTerm::Nil => PiTerm::Nil,
        PiTerm::Tau(q) => PiTerm::tau(expand_polyadic(q)),
        PiTerm::Bang(q) => PiTerm::bang(expand_polyadic(q)),
        PiTerm::Out(x, y, q) => PiTerm::Out(x.clone(), y.clone(), Rc::new(expand_polyadic(q))),
        PiTerm::In(x, z, q) => PiTerm::In(x.clone(), z.clone(), Rc::new(expand_polyadic(q))),
        PiTerm::Sum(ps) => PiTerm::Sum(ps.iter().map(expand_polyadic).collect()),
        PiTerm::Par(ps) => PiTerm::Par(ps.iter().map(expand_polyadic).collect()),
        PiTerm::Restrict(z, q) => PiTerm::Restrict(z.clone(), Rc::new(expand_polyadic(q))),
        PiTerm::PolyOut(x, ys, q) => {
            let cont = expand_polyadic(q);
            let mut used = free_names(&cont);
            used.insert(x.clone());
            used.extend(ys.iter().cloned());
            let w = pick_fresh("e", &used);
            let chain = ys
                .iter()
                .rev()
                .fold(cont, |acc, y| PiTerm::Out(w.clone(), y.clone(), Rc::new(acc)));
            PiTerm::restrict(&w, PiTerm::Out(x.clone(), w.clone(), Rc::new(chain)))
        }
        PiTerm::PolyIn(x, zs, q) => {
            let cont = expand_polyadic(q);
            let mut used = free_names(&cont);
            used.insert(x.clone());
            used.extend(zs.iter().cloned());
            let w = pick_fresh("e", &used);
            let chain = zs
                .iter()
                .rev()
                .fold(cont, |acc, z| PiTerm::In(w.clone(), z.clone(), Rc::new(acc)));
            PiTerm::In(x.clone(), w, Rc::new(chain))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(names: &[&str]) -> BTreeSet<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn free_and_bound() {
        // fn(x!y.0) = {x,y}
        let t = PiTerm::out("x", "y", PiTerm::Nil);
        assert_eq!(free_names(&t), set(&["x", "y"]));
        // fn((v y)x!y.0) = {x}
        let t = PiTerm::restrict("y", PiTerm::out("x", "y", PiTerm::Nil));
        assert_eq!(free_names(&t), set(&["x"]));
        // bn(x?(z).0) = {z}
        let t = PiTerm::input("x", "z", PiTerm::Nil);
        assert_eq!(bound_names(&t), set(&["z"]));
        assert_eq!(free_names(&t), set(&["x"]));
        // Polyadic sugar binds all its names.
        let t = PiTerm::poly_in("c", &["t", "l"], PiTerm::out("t", "l", PiTerm::Nil));
        assert_eq!(free_names(&t), set(&["c"]));
    }

    #[test]
    fn substitute_basic() {
        // (x?(y).y!z.0){w/z} = x?(y).y!w.0
        let t = PiTerm::input("x", "y", PiTerm::out("y", "z", PiTerm::Nil));
        let r = substitute(&t, "z", "w");
        assert_eq!(r, PiTerm::input("x", "y", PiTerm::out("y", "w", PiTerm::Nil)));
    }

    #[test]
    fn substitute_avoids_capture() {
        // ((v w)x!w.0){w/x}: binder w renamed before x becomes w.
        let t = PiTerm::restrict("w", PiTerm::out("x", "w", PiTerm::Nil));
        let r = substitute(&t, "x", "w");
        match &r {
            PiTerm::Restrict(z2, body) => {
                assert_ne!(z2, "w");
                assert_eq!(**body, PiTerm::out("w", z2, PiTerm::Nil));
            }
            other => panic!("unexpected shape: {other}"),
        }
        assert_eq!(free_names(&r), set(&["w"]));
    }

    #[test]
    fn substitute_respects_shadowing() {
        // Occurrences under a binder for the target stay untouched.
        let t = PiTerm::input("x", "y", PiTerm::out("y", "y", PiTerm::Nil));
        let r = substitute(&t, "y", "q");
        assert_eq!(r, t);
        // target absent => unchanged
        let t = PiTerm::out("a", "b", PiTerm::Nil);
        assert_eq!(substitute(&t, "zz", "q"), t);
    }

    #[test]
    fn expand_poly_out() {
        // x!<a,b>.0 => (v w)(x!w.w!a.w!b.0)
        let t = PiTerm::poly_out("x", &["a", "b"], PiTerm::Nil);
        let e = expand_polyadic(&t);
        match &e {
            PiTerm::Restrict(w, body) => {
                let expected = PiTerm::Out(
                    "x".into(),
                    w.clone(),
                    Rc::new(PiTerm::Out(
                        w.clone(),
                        "a".into(),
                        Rc::new(PiTerm::Out(w.clone(), "b".into(), Rc::new(PiTerm::Nil))),
                    )),
                );
                assert_eq!(**body, expected);
            }
            other => panic!("unexpected shape: {other}"),
        }
        assert_eq!(free_names(&e), set(&["x", "a", "b"]));
    }

    #[test]
    fn expand_poly_in_and_nullary() {
        // x?(z).P as a PolyIn node => x?(w).w?(z).P
        let t = PiTerm::poly_in("x", &["z"], PiTerm::out("z", "z", PiTerm::Nil));
        let e = expand_polyadic(&t);
        match &e {
            PiTerm::In(x, w, body) => {
                assert_eq!(x, "x");
                assert_eq!(
                    **body,
                    PiTerm::input(w, "z", PiTerm::out("z", "z", PiTerm::Nil))
                );
            }
            other => panic!("unexpected shape: {other}"),
        }
        // n = 0: x!<>.P => (v w)(x!w.P); x?().P => x?(w).P
        let o = expand_polyadic(&PiTerm::poly_out("x", &[], PiTerm::Nil));
        match &o {
            PiTerm::Restrict(w, body) => {
                assert_eq!(**body, PiTerm::Out("x".into(), w.clone(), Rc::new(PiTerm::Nil)))
            }
            other => panic!("unexpected shape: {other}"),
        }
        let i = expand_polyadic(&PiTerm::poly_in("x", &[], PiTerm::Nil));
        assert!(matches!(&i, PiTerm::In(x, _, body) if x == "x" && **body == PiTerm::Nil));
        // sugar-free terms unchanged
        let t = PiTerm::tau(PiTerm::out("a", "b", PiTerm::Nil));
        assert_eq!(expand_polyadic(&t), t);
    }

    #[test]
    fn render_reflects_structure() {
        let t = PiTerm::Par(vec![
            PiTerm::out("x", "y", PiTerm::Nil),
            PiTerm::Sum(vec![
                PiTerm::tau(PiTerm::Nil),
                PiTerm::input("x", "z", PiTerm::Nil),
            ]),
        ]);
        assert_eq!(t.render(), "(x!y.0 | (tau.0 + x?(z).0))");
        let t = PiTerm::bang(PiTerm::restrict("a", PiTerm::Nil));
        assert_eq!(t.render(), "!((v a)0)");
    }
}
