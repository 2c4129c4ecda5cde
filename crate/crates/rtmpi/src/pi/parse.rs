//! Surface syntax for π-terms.
//!
//! Grammar (ASCII): `0`; `tau.P`; `x!y.P`; `x!<y1,...,yn>.P` (n ≥ 0);
//! `x?(y).P`; `x?(y1,...,yn).P` (n = 0 or n ≥ 2); `P|Q`; `P+Q`; `(v x)P`;
//! `!P`; parentheses. `+` binds looser than prefixing, `|` loosest.
//! `#` starts a line comment. Summands of `+` must be `0` or prefixed terms.

use thiserror::Error;

use std::rc::Rc;
use super::term::{PiTerm, FRESH_PREFIX};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("parse error at {line}:{col}: {message}")]
pub struct PiParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Name(String),
    Zero,
    TauKw,
    VKw,
    Bang,
    Query,
    Dot,
    Plus,
    Pipe,
    LParen,
    RParen,
    LAngle,
    RAngle,
    Comma,
}

struct Lexer {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

fn lex(text: &str) -> Result<Lexer, PiParseError> {
    let mut toks = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let col = i + 1;
            let lno = li + 1;
            let err = |message: String| PiParseError { line: lno, col, message };
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            let tok = match c {
                '!' => Tok::Bang,
                '?' => Tok::Query,
                '.' => Tok::Dot,
                '+' => Tok::Plus,
                '|' => Tok::Pipe,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '<' => Tok::LAngle,
                '>' => Tok::RAngle,
                ',' => Tok::Comma,
                '0' => Tok::Zero,
                _ if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len()
                        && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'')
                    {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    let t = match word.as_str() {
                        "tau" => Tok::TauKw,
                        "v" => Tok::VKw,
                        _ => Tok::Name(word),
                    };
                    toks.push((t, lno, col));
                    continue;
                }
                _ if c == FRESH_PREFIX => {
                    return Err(err(format!("identifiers may not start with `{FRESH_PREFIX}` (reserved for generated names)")));
                }
                _ => return Err(err(format!("unexpected character `{c}`"))),
            };
            toks.push((tok, lno, col));
            i += 1;
        }
    }
    Ok(Lexer { toks, pos: 0 })
}

impl Lexer {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _, _)| t)
    }
    fn loc(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|(_, l, c)| (*l, *c))
            .unwrap_or((1, 1))
    }
    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }
    fn err(&self, message: impl Into<String>) -> PiParseError {
        let (line, col) = self.loc();
        PiParseError { line, col, message: message.into() }
    }
    fn expect(&mut self, want: Tok, what: &str) -> Result<(), PiParseError> {
        match self.next() {
            Some(t) if t == want => Ok(()),
            _ => {
                self.pos = self.pos.saturating_sub(1);
                Err(self.err(format!("expected {what}")))
            }
        }
    }
    fn name(&mut self, what: &str) -> Result<String, PiParseError> {
        match self.peek() {
            Some(Tok::Name(_)) => {
                if let Some(Tok::Name(n)) = self.next() {
                    Ok(n)
                } else {
                    unreachable!()
                }
            }
            _ => Err(self.err(format!("expected {what}"))),
        }
    }
}

/// Parse surface text into a `PiTerm` (polyadic sugar not yet expanded).
pub fn parse_pi(text: &str) -> Result<PiTerm, PiParseError> {
    let mut lx = lex(text)?;
    let term = parse_par(&mut lx)?;
    if lx.peek().is_some() {
        return Err(lx.err("trailing input after term"));
    }
    Ok(term)
}

fn parse_par(lx: &mut Lexer) -> Result<PiTerm, PiParseError> {
    let mut parts = vec![parse_sum(lx)?];
    while lx.peek() == Some(&Tok::Pipe) {
        lx.next();
        parts.push(parse_sum(lx)?);
    }
    Ok(if parts.len() == 1 { parts.pop().unwrap() } else { PiTerm::Par(parts) })
}

fn is_summand(t: &PiTerm) -> bool {
    matches!(
        t,
        PiTerm::Nil
            | PiTerm::Tau(_)
            | PiTerm::Out(..)
            | PiTerm::In(..)
            | PiTerm::PolyOut(..)
            | PiTerm::PolyIn(..)
    )
}

fn parse_sum(lx: &mut Lexer) -> Result<PiTerm, PiParseError> {
    let first = parse_unary(lx)?;
    if lx.peek() != Some(&Tok::Plus) {
        return Ok(first);
    }
    let mut parts = vec![first];
    while lx.peek() == Some(&Tok::Plus) {
        lx.next();
        parts.push(parse_unary(lx)?);
    }
    if let Some(bad) = parts.iter().find(|p| !is_summand(p)) {
        return Err(lx.err(format!(
            "sum alternatives must be 0 or prefixed terms, got `{bad}`"
        )));
    }
    Ok(PiTerm::Sum(parts))
}

fn parse_unary(lx: &mut Lexer) -> Result<PiTerm, PiParseError> {
    match lx.peek() {
        Some(Tok::Zero) => {
            lx.next();
            Ok(PiTerm::Nil)
        }
        Some(Tok::TauKw) => {
            lx.next();
            lx.expect(Tok::Dot, "`.` after tau")?;
            Ok(PiTerm::tau(parse_unary(lx)?))
        }
        Some(Tok::Bang) => {
            lx.next();
            Ok(PiTerm::bang(parse_unary(lx)?))
        }
        Some(Tok::LParen) => {
            lx.next();
            if lx.peek() == Some(&Tok::VKw) {
                lx.next();
                let z = lx.name("restricted name after `v`")?;
                lx.expect(Tok::RParen, "`)` closing restriction")?;
                return Ok(PiTerm::restrict(&z, parse_unary(lx)?));
            }
            let inner = parse_par(lx)?;
            lx.expect(Tok::RParen, "`)`")?;
            Ok(inner)
        }
        Some(Tok::Name(_)) => {
            let chan = lx.name("channel name")?;
            match lx.next() {
                Some(Tok::Bang) => {
                    if lx.peek() == Some(&Tok::LAngle) {
                        lx.next();
                        let mut data = Vec::new();
                        if lx.peek() != Some(&Tok::RAngle) {
                            loop {
                                data.push(lx.name("datum name")?);
                                if lx.peek() == Some(&Tok::Comma) {
                                    lx.next();
                                } else {
                                    break;
                                }
                            }
                        }
                        lx.expect(Tok::RAngle, "`>` closing polyadic output")?;
                        lx.expect(Tok::Dot, "`.` after output prefix")?;
                        Ok(PiTerm::PolyOut(chan, data, Rc::new(parse_unary(lx)?)))
                    } else {
                        let datum = lx.name("datum name")?;
                        lx.expect(Tok::Dot, "`.` after output prefix")?;
                        Ok(PiTerm::Out(chan, datum, Rc::new(parse_unary(lx)?)))
                    }
                }
                Some(Tok::Query) => {
                    lx.expect(Tok::LParen, "`(` opening input binders")?;
                    let mut binders = Vec::new();
                    if lx.peek() != Some(&Tok::RParen) {
                        loop {
                            binders.push(lx.name("binder name")?);
                            if lx.peek() == Some(&Tok::Comma) {
                                lx.next();
                            } else {
                                break;
                            }
                        }
                    }
                    lx.expect(Tok::RParen, "`)` closing input binders")?;
                    lx.expect(Tok::Dot, "`.` after input prefix")?;
                    let body = parse_unary(lx)?;
                    if binders.len() == 1 {
                        Ok(PiTerm::In(chan, binders.pop().unwrap(), Rc::new(body)))
                    } else {
                        let dup = binders
                            .iter()
                            .enumerate()
                            .any(|(i, b)| binders[..i].contains(b));
                        if dup {
                            return Err(lx.err("duplicate binder in polyadic input"));
                        }
                        Ok(PiTerm::PolyIn(chan, binders, Rc::new(body)))
                    }
                }
                _ => {
                    lx.pos = lx.pos.saturating_sub(1);
                    Err(lx.err("expected `!` or `?` after channel name"))
                }
            }
        }
        _ => Err(lx.err("expected a term")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi::term::{bound_names, free_names};

    #[test]
    fn basic_shapes() {
        assert_eq!(parse_pi("0").unwrap(), PiTerm::Nil);
        assert_eq!(parse_pi("tau.0").unwrap(), PiTerm::tau(PiTerm::Nil));
        assert_eq!(parse_pi("x!y.0").unwrap(), PiTerm::out("x", "y", PiTerm::Nil));
        assert_eq!(parse_pi("x?(y).0").unwrap(), PiTerm::input("x", "y", PiTerm::Nil));
        assert_eq!(
            parse_pi("x!<a,b>.0").unwrap(),
            PiTerm::poly_out("x", &["a", "b"], PiTerm::Nil)
        );
        assert_eq!(parse_pi("x!<>.0").unwrap(), PiTerm::poly_out("x", &[], PiTerm::Nil));
        assert_eq!(parse_pi("x?().0").unwrap(), PiTerm::poly_in("x", &[], PiTerm::Nil));
    }

    #[test]
    fn dataless_output_via_polyadic_sugar() {
        // x?(y) then output on the received channel with no datum.
        let t = parse_pi("x?(y).y!<>.0").unwrap();
        assert_eq!(t, PiTerm::input("x", "y", PiTerm::poly_out("y", &[], PiTerm::Nil)));
    }

    #[test]
    fn restriction_and_par() {
        let t = parse_pi("(v z)(x!z.0 | z?(w).0)").unwrap();
        assert_eq!(
            t,
            PiTerm::restrict(
                "z",
                PiTerm::Par(vec![
                    PiTerm::out("x", "z", PiTerm::Nil),
                    PiTerm::input("z", "w", PiTerm::Nil),
                ])
            )
        );
        assert_eq!(free_names(&t), ["x".to_string()].into());
    }

    #[test]
    fn bang_and_polyadic_input() {
        let t = parse_pi("!c?(t,l,r,u,d).0").unwrap();
        assert_eq!(t, PiTerm::bang(PiTerm::poly_in("c", &["t", "l", "r", "u", "d"], PiTerm::Nil)));
        assert_eq!(bound_names(&t).len(), 5);
    }

    #[test]
    fn precedence() {
        // `.` tighter than `+`, `+` tighter than `|`.
        let t = parse_pi("a!x.0 + tau.0 | b?(y).0").unwrap();
        assert_eq!(
            t,
            PiTerm::Par(vec![
                PiTerm::Sum(vec![
                    PiTerm::out("a", "x", PiTerm::Nil),
                    PiTerm::tau(PiTerm::Nil),
                ]),
                PiTerm::input("b", "y", PiTerm::Nil),
            ])
        );
    }

    #[test]
    fn comments_and_whitespace() {
        let t = parse_pi("# heading\n  x!y.0   # tail\n").unwrap();
        assert_eq!(t, PiTerm::out("x", "y", PiTerm::Nil));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse_pi("").is_err());
        assert!(parse_pi("x!y").is_err()); // missing continuation
        assert!(parse_pi("x .0").is_err());
        assert!(parse_pi("(v x").is_err());
        assert!(parse_pi("x!y.0 extra!z.0").is_err());
        assert!(parse_pi("x?(a,a).0").is_err()); // duplicate binder
        // Sum of non-prefixed terms is rejected.
        assert!(parse_pi("(a!x.0 | b!x.0) + tau.0").is_err());
        assert!(parse_pi("!a!x.0 + tau.0").is_err());
        // Reserved prefix for generated names.
        assert!(parse_pi("@f0!y.0").is_err());
        assert!(parse_pi("x!@f0.0").is_err());
    }

    #[test]
    fn render_parse_roundtrip() {
        for src in [
            "(x!y.0 | (tau.0 + x?(z).0))",
            "(v z)(x!z.0 | z?(w).0)",
            "!c?(t,l,r,u,d).(u?(e).c!<t,l,r,u,e>.0 + t!<l,r,u,d>.c!<t,l,r,u,d>.0)",
            "x?(y).y!<>.0",
        ] {
            let t = parse_pi(src).unwrap();
            assert_eq!(parse_pi(&t.render()).unwrap(), t);
        }
    }
}
