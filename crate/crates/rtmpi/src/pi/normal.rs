//! Structural-congruence normalization: the state-identity mechanism for
//! exploring π-terms. Two terms get the same canonical form when they are
//! α-convertible modulo flattening, Nil-garbage removal, scope narrowing,
//! commutativity of `|`/`+`, and reordering of adjacent restrictions.
//!
//! Normalization runs in the inner loop of state-space exploration (once per
//! generated transition), so the simplification pass mutates the term in
//! place and carries everything ordering decisions need — free-name sets,
//! first-occurrence positions, and sibling sort keys — bottom-up in one
//! walk; subtrees are never re-traversed on the already-canonical path.

use std::cell::RefCell;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use rustc_hash::{FxHashMap, FxHasher};

use super::term::{expand_polyadic, PiTerm};

/// Move out of a shared subterm pointer, cloning the node only when shared.
fn take(rc: Rc<PiTerm>) -> PiTerm {
    Rc::try_unwrap(rc).unwrap_or_else(|rc| (*rc).clone())
}

/// Canonical form. Polyadic sugar is expanded first, so the result is
/// always a core-calculus term.
///
/// A single simplification pass sorts parallel components and sum summands
/// by an α-invariant key and reorders adjacent restrictions; because those
/// two orders feed each other, the pass is iterated until it reports no
/// change. All passes are deterministic and α-invariant, so in the (rare)
/// event of an oscillation the lexicographically smallest form on the cycle
/// is a sound canonical representative.
pub fn normalize(p: &PiTerm) -> PiTerm {
    normalize_owned(p.clone())
}

/// Normalization consuming its input, so prebuilt successor terms are
/// canonicalized without another copy.
pub(crate) fn normalize_owned(mut q: PiTerm) -> PiTerm {
    if has_sugar(&q) {
        q = expand_polyadic(&q);
    }
    // Simplification decisions are spelling-independent for bound names
    // (sort keys and restriction ordering are α-invariant), so renaming
    // binders can never enable or disable a rewrite: iterate `simplify`
    // alone to its fixpoint, then renumber once. The result is still a
    // simplify fixpoint.
    let dump = std::env::var_os("RTMPI_PASSDUMP").is_some();
    let mut seen: Vec<PiTerm> = Vec::new();
    let mut iters = 0usize;
    loop {
        let changed = simplify(&mut q, &mut Vec::new()).changed;
        if dump {
            eprintln!("pass changed={changed}: {}", q.render());
        }
        if !changed {
            break;
        }
        // Oscillation is rare; avoid snapshot clones on the common
        // one-or-two-pass path. A cycle entered early is still caught one
        // period later, and `seen` then spans a full period.
        iters += 1;
        if iters >= 3 {
            // Snapshots are renumbered so that α-variants entering the same
            // cycle record identical members and pick the same minimum.
            renumber(&mut q);
            if let Some(at) = seen.iter().position(|s| *s == q) {
                return seen[at..].iter().min_by_key(|s| s.render()).cloned().unwrap();
            }
            seen.push(q.clone());
        }
    }
    renumber(&mut q);
    q
}

fn has_sugar(p: &PiTerm) -> bool {
    match p {
        PiTerm::Nil => false,
        PiTerm::PolyOut(..) | PiTerm::PolyIn(..) => true,
        PiTerm::Tau(q) | PiTerm::In(_, _, q) | PiTerm::Out(_, _, q) => has_sugar(q),
        PiTerm::Restrict(_, q) | PiTerm::Bang(q) => has_sugar(q),
        PiTerm::Sum(ps) | PiTerm::Par(ps) => ps.iter().any(has_sugar),
    }
}

/// Canonical-form equality: α-equivalence modulo the normalizing laws.
pub fn alpha_eq(p: &PiTerm, q: &PiTerm) -> bool {
    normalize(p) == normalize(q)
}

/// α-invariant rendering: bound names are printed as de Bruijn indices
/// (relative to `env`, the binders in scope), so the output is identical for
/// α-convertible terms in α-convertible contexts. Used as a sort key.
fn alpha_render<'a>(p: &'a PiTerm, env: &mut Vec<&'a str>, out: &mut String) {
    let name = |n: &str, env: &Vec<&str>, out: &mut String| {
        match env.iter().rev().position(|b| *b == n) {
            Some(i) => {
                out.push('%');
                push_index(i, out);
            }
            None => out.push_str(n),
        }
    };
    match p {
        PiTerm::Nil => out.push('0'),
        PiTerm::Tau(q) => {
            out.push_str("tau.");
            alpha_render(q, env, out);
        }
        PiTerm::Out(x, y, q) => {
            name(x, env, out);
            out.push('!');
            name(y, env, out);
            out.push('.');
            alpha_render(q, env, out);
        }
        PiTerm::In(x, z, q) => {
            name(x, env, out);
            out.push_str("?(%).");
            env.push(z);
            alpha_render(q, env, out);
            env.pop();
        }
        PiTerm::PolyOut(..) | PiTerm::PolyIn(..) => {
            unreachable!("normalize requires sugar-expanded terms")
        }
        PiTerm::Sum(ps) => {
            out.push('(');
            for (i, q) in ps.iter().enumerate() {
                if i > 0 {
                    out.push('+');
                }
                alpha_render(q, env, out);
            }
            out.push(')');
        }
        PiTerm::Par(ps) => {
            out.push('(');
            for (i, q) in ps.iter().enumerate() {
                if i > 0 {
                    out.push('|');
                }
                alpha_render(q, env, out);
            }
            out.push(')');
        }
        PiTerm::Restrict(z, q) => {
            out.push_str("(v%)");
            env.push(z);
            alpha_render(q, env, out);
            env.pop();
        }
        PiTerm::Bang(q) => {
            out.push_str("!{");
            alpha_render(q, env, out);
            out.push('}');
        }
    }
}

fn alpha_key<'a>(p: &'a PiTerm, env: &[&'a str]) -> String {
    let mut s = String::new();
    alpha_render(p, &mut env.to_vec(), &mut s);
    s
}

/// Append a decimal index without going through the formatting machinery.
fn push_index(i: usize, out: &mut String) {
    let mut buf = [0u8; 20];
    let mut k = buf.len();
    let mut i = i;
    loop {
        k -= 1;
        buf[k] = b'0' + (i % 10) as u8;
        i /= 10;
        if i == 0 {
            break;
        }
    }
    out.push_str(std::str::from_utf8(&buf[k..]).unwrap());
}

/// Append one name of the α-invariant rendering: bound names as de Bruijn
/// indices into `env`, free names by spelling.
fn push_name(n: &str, env: &[(u32, String)], out: &mut String) {
    match env.iter().rev().position(|b| b.1 == n) {
        Some(i) => {
            out.push('%');
            push_index(i, out);
        }
        None => out.push_str(n),
    }
}

/// Recompute a subterm's sort key by walking it. Only rewrite paths need
/// this; unchanged subterms carry their key bottom-up in [`Ann`].
fn fresh_key(p: &PiTerm, env: &[(u32, String)]) -> String {
    let env_strs: Vec<&str> = env.iter().map(|e| e.1.as_str()).collect();
    alpha_key(p, &env_strs)
}

thread_local! {
    /// Name interner: free-name bookkeeping runs on small integers. The
    /// table persists for the thread so interned sets stay comparable
    /// across passes (which the memo below relies on).
    static NAME_IDS: RefCell<FxHashMap<String, u32>> = RefCell::new(FxHashMap::default());

    /// Memo of already-simplified subterms (see `memo_lookup`).
    static MEMO: RefCell<FxHashMap<u64, Vec<MemoEntry>>> = RefCell::new(FxHashMap::default());
}

fn name_id(n: &str) -> u32 {
    NAME_IDS.with(|ids| {
        let mut ids = ids.borrow_mut();
        if let Some(i) = ids.get(n) {
            return *i;
        }
        let i = ids.len() as u32;
        ids.insert(n.to_string(), i);
        i
    })
}

/// Exploration re-normalizes terms whose large replication and summation
/// components are untouched copies from an already-canonical state, so
/// their simplification is pure repetition. The memo caches, per (subterm,
/// binder environment), the fact that the subterm is already canonical
/// together with its annotations. Only canonical (unchanged) outcomes are
/// stored, so a hit skips the subterm entirely.
struct MemoEntry {
    env: Vec<u32>,
    term: PiTerm,
    fns: NameSet,
    slots: u32,
    key: String,
}

const MEMO_CAP: usize = 0;

/// Bucketing fingerprint: a shallow structural hash. Collisions are fine —
/// entries verify full term and environment equality.
fn fingerprint(p: &PiTerm, env: &[(u32, String)]) -> u64 {
    fn shallow(p: &PiTerm, depth: usize, h: &mut FxHasher) {
        std::mem::discriminant(p).hash(h);
        if depth == 0 {
            return;
        }
        match p {
            PiTerm::Nil => {}
            PiTerm::Tau(q) | PiTerm::Bang(q) | PiTerm::Restrict(_, q) => {
                shallow(q, depth - 1, h)
            }
            PiTerm::Out(x, y, q) => {
                x.hash(h);
                y.hash(h);
                shallow(q, depth - 1, h);
            }
            PiTerm::In(x, _, q) => {
                x.hash(h);
                shallow(q, depth - 1, h);
            }
            PiTerm::PolyOut(x, ys, q) => {
                x.hash(h);
                ys.hash(h);
                shallow(q, depth - 1, h);
            }
            PiTerm::PolyIn(x, zs, q) => {
                x.hash(h);
                zs.len().hash(h);
                shallow(q, depth - 1, h);
            }
            PiTerm::Sum(ps) | PiTerm::Par(ps) => {
                ps.len().hash(h);
                for q in ps {
                    shallow(q, depth - 1, h);
                }
            }
        }
    }
    let mut h = FxHasher::default();
    env.len().hash(&mut h);
    for (id, _) in env {
        id.hash(&mut h);
    }
    shallow(p, 3, &mut h);
    h.finish()
}

fn memo_lookup(p: &PiTerm, env: &[(u32, String)]) -> Option<Ann> {
    let key = fingerprint(p, env);
    MEMO.with(|memo| {
        let memo = memo.borrow();
        let bucket = memo.get(&key)?;
        let same_env = |e: &&MemoEntry| {
            e.env.len() == env.len() && e.env.iter().zip(env).all(|(a, b)| *a == b.0)
        };
        bucket.iter().find(|e| same_env(e) && e.term == *p).map(|e| Ann {
            fns: e.fns.clone(),
            slots: e.slots,
            children: None,
            run: None,
            changed: false,
            key: e.key.clone(),
        })
    })
}

fn memo_store(p: &PiTerm, env: &[(u32, String)], fns: &NameSet, slots: u32, key: &str) {
    let key_fp = fingerprint(p, env);
    MEMO.with(|memo| {
        let mut memo = memo.borrow_mut();
        if memo.len() >= MEMO_CAP {
            return;
        }
        memo.entry(key_fp).or_default().push(MemoEntry {
            env: env.iter().map(|e| e.0).collect(),
            term: p.clone(),
            fns: fns.clone(),
            slots,
            key: key.to_string(),
        });
    });
}

/// Sorted-by-id set of interned free names, each paired with the pre-order
/// position (slot index) of its first free occurrence within the subterm.
/// Restriction runs are ordered by these positions, so they ride along with
/// the free-name sets instead of requiring a separate walk.
type NameSet = Vec<(u32, u32)>;

/// Insert an occurrence, keeping the earliest position per name.
fn set_insert(set: &mut NameSet, x: u32, pos: u32) {
    match set.binary_search_by_key(&x, |e| e.0) {
        Ok(at) => {
            if pos < set[at].1 {
                set[at].1 = pos;
            }
        }
        Err(at) => set.insert(at, (x, pos)),
    }
}

fn set_remove(set: &mut NameSet, x: u32) {
    if let Ok(at) = set.binary_search_by_key(&x, |e| e.0) {
        set.remove(at);
    }
}

fn set_contains(set: &NameSet, x: u32) -> bool {
    set.binary_search_by_key(&x, |e| e.0).is_ok()
}

fn set_first_occurrence(set: &NameSet, x: u32) -> Option<u32> {
    set.binary_search_by_key(&x, |e| e.0).ok().map(|at| set[at].1)
}

/// Shift all occurrence positions by `k` (the subterm now starts `k` slots
/// into its parent).
fn set_shift(set: &mut NameSet, k: u32) {
    for e in set.iter_mut() {
        e.1 += k;
    }
}

/// Merge `src` (a later sibling starting at slot `offset`) into `dst`.
fn set_union_into(dst: &mut NameSet, src: &NameSet, offset: u32) {
    if dst.is_empty() {
        dst.extend(src.iter().map(|&(id, pos)| (id, pos + offset)));
        return;
    }
    let mut merged = Vec::with_capacity(dst.len() + src.len());
    let (mut i, mut j) = (0, 0);
    while i < dst.len() && j < src.len() {
        match dst[i].0.cmp(&src[j].0) {
            std::cmp::Ordering::Less => {
                merged.push(dst[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                merged.push((src[j].0, src[j].1 + offset));
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                merged.push((dst[i].0, dst[i].1.min(src[j].1 + offset)));
                i += 1;
                j += 1;
            }
        }
    }
    merged.extend_from_slice(&dst[i..]);
    merged.extend(src[j..].iter().map(|&(id, pos)| (id, pos + offset)));
    *dst = merged;
}

/// Free names with first-occurrence positions, and the slot count, of an
/// arbitrary subterm. Fallback for rewrite paths that lose the bottom-up
/// annotations; the canonical path never calls this.
fn occurrences(p: &PiTerm) -> (NameSet, u32) {
    match p {
        PiTerm::Nil => (Vec::new(), 0),
        PiTerm::Tau(q) | PiTerm::Bang(q) => occurrences(q),
        PiTerm::Out(x, y, q) => {
            let (mut fns, slots) = occurrences(q);
            set_shift(&mut fns, 2);
            set_insert(&mut fns, name_id(x), 0);
            set_insert(&mut fns, name_id(y), 1);
            (fns, slots + 2)
        }
        PiTerm::In(x, z, q) => {
            let (mut fns, slots) = occurrences(q);
            set_shift(&mut fns, 1);
            set_remove(&mut fns, name_id(z));
            set_insert(&mut fns, name_id(x), 0);
            (fns, slots + 1)
        }
        PiTerm::PolyOut(..) | PiTerm::PolyIn(..) => {
            unreachable!("normalize requires sugar-expanded terms")
        }
        PiTerm::Sum(ps) | PiTerm::Par(ps) => {
            let mut fns: NameSet = Vec::new();
            let mut offset = 0;
            for q in ps {
                let (child, slots) = occurrences(q);
                set_union_into(&mut fns, &child, offset);
                offset += slots;
            }
            (fns, offset)
        }
        PiTerm::Restrict(z, q) => {
            let (mut fns, slots) = occurrences(q);
            set_remove(&mut fns, name_id(z));
            (fns, slots)
        }
    }
}

/// Per-child annotations of a parallel composition, kept so restriction
/// narrowing never re-traverses subterms.
struct ChildInfo {
    fns: NameSet,
    slots: u32,
}

/// Result of an in-place simplification.
struct Ann {
    /// Free names with first-occurrence slots (see [`NameSet`]). For a
    /// restriction-run interior (`in_run`), binder ids of the run are *not*
    /// removed: the run head consumes them for ordering and strips them.
    fns: NameSet,
    /// Name-occurrence slots in the subterm (binders are not slots).
    slots: u32,
    /// Per-child annotations when the node is a parallel composition.
    children: Option<Vec<ChildInfo>>,
    /// Binders of a restriction run, innermost first, reported upward by
    /// run interiors for the head to order in one step.
    run: Option<Vec<(String, u32)>>,
    changed: bool,
    /// α-invariant rendering of the (simplified) subterm — the sibling sort
    /// key — assembled bottom-up so sorting never re-walks subtrees.
    key: String,
}

impl Ann {
    fn plain(fns: NameSet, slots: u32, changed: bool, key: String) -> Ann {
        Ann { fns, slots, children: None, run: None, changed, key }
    }
}

/// A sibling component with its annotations and (lazily materialized) sort
/// key.
struct Part {
    term: PiTerm,
    fns: NameSet,
    slots: u32,
    key: Option<String>,
}

/// One bottom-up simplification pass, in place. `env` tracks the binders in
/// scope so that sibling ordering never depends on the spelling of bound
/// names.
fn simplify(p: &mut PiTerm, env: &mut Vec<(u32, String)>) -> Ann {
    simplify_at(p, env, false)
}

/// `in_run` marks a restriction that sits directly under another restriction:
/// interiors of a run report their binder upward and the head orders the
/// whole run at once from the first-occurrence positions in its annotations.
fn simplify_at(p: &mut PiTerm, env: &mut Vec<(u32, String)>, in_run: bool) -> Ann {
    match p {
        PiTerm::Nil => Ann::plain(Vec::new(), 0, false, String::from("0")),
        PiTerm::Tau(q) => {
            let ann = simplify(Rc::make_mut(q), env);
            let mut key = String::with_capacity(ann.key.len() + 4);
            key.push_str("tau.");
            key.push_str(&ann.key);
            Ann::plain(ann.fns, ann.slots, ann.changed, key)
        }
        PiTerm::Out(x, y, q) => {
            let ann = simplify(Rc::make_mut(q), env);
            let mut fns = ann.fns;
            set_shift(&mut fns, 2);
            set_insert(&mut fns, name_id(x), 0);
            set_insert(&mut fns, name_id(y), 1);
            let mut key = String::with_capacity(ann.key.len() + 12);
            push_name(x, env, &mut key);
            key.push('!');
            push_name(y, env, &mut key);
            key.push('.');
            key.push_str(&ann.key);
            Ann::plain(fns, ann.slots + 2, ann.changed, key)
        }
        PiTerm::In(x, z, q) => {
            let zid = name_id(z);
            env.push((zid, z.clone()));
            let ann = simplify(Rc::make_mut(q), env);
            env.pop();
            let mut fns = ann.fns;
            set_shift(&mut fns, 1);
            set_remove(&mut fns, zid);
            set_insert(&mut fns, name_id(x), 0);
            let mut key = String::with_capacity(ann.key.len() + 12);
            push_name(x, env, &mut key);
            key.push_str("?(%).");
            key.push_str(&ann.key);
            Ann::plain(fns, ann.slots + 1, ann.changed, key)
        }
        PiTerm::PolyOut(..) | PiTerm::PolyIn(..) => {
            unreachable!("normalize requires sugar-expanded terms")
        }
        PiTerm::Bang(_) => {
            if let Some(hit) = memo_lookup(p, env) {
                return hit;
            }
            let PiTerm::Bang(q) = p else { unreachable!() };
            let ann = simplify(Rc::make_mut(q), env);
            if **q == PiTerm::Nil {
                *p = PiTerm::Nil;
                return Ann::plain(Vec::new(), 0, true, String::from("0"));
            }
            let mut key = String::with_capacity(ann.key.len() + 3);
            key.push_str("!{");
            key.push_str(&ann.key);
            key.push('}');
            if !ann.changed {
                memo_store(p, env, &ann.fns, ann.slots, &key);
            }
            Ann::plain(ann.fns, ann.slots, ann.changed, key)
        }
        PiTerm::Sum(_) => {
            if let Some(hit) = memo_lookup(p, env) {
                return hit;
            }
            let PiTerm::Sum(ps) = std::mem::replace(p, PiTerm::Nil) else { unreachable!() };
            let mut changed = false;
            let mut parts: Vec<Part> = Vec::with_capacity(ps.len());
            for mut q in ps {
                let ann = simplify(&mut q, env);
                changed |= ann.changed;
                match q {
                    PiTerm::Sum(inner) => {
                        changed = true;
                        for c in inner {
                            let (fns, slots) = occurrences(&c);
                            parts.push(Part { term: c, fns, slots, key: None });
                        }
                    }
                    PiTerm::Nil => changed = true,
                    other => {
                        parts.push(Part { term: other, fns: ann.fns, slots: ann.slots, key: Some(ann.key) })
                    }
                }
            }
            changed |= sort_parts(&mut parts, env);
            let (fns, slots) = union_parts(&parts);
            match parts.len() {
                0 => {
                    *p = PiTerm::Nil;
                    Ann::plain(Vec::new(), 0, true, String::from("0"))
                }
                1 => {
                    let part = parts.pop().unwrap();
                    *p = part.term;
                    let key = part.key.expect("sort_parts materializes keys");
                    Ann::plain(fns, slots, true, key)
                }
                _ => {
                    let key = joined_key(&parts, '+');
                    *p = PiTerm::Sum(parts.into_iter().map(|part| part.term).collect());
                    if !changed {
                        memo_store(p, env, &fns, slots, &key);
                    }
                    Ann::plain(fns, slots, changed, key)
                }
            }
        }
        PiTerm::Par(_) => {
            let PiTerm::Par(ps) = std::mem::replace(p, PiTerm::Nil) else { unreachable!() };
            let (parts, changed) = simplify_par_children(ps, env);
            finish_par(p, parts, changed, env)
        }
        PiTerm::Restrict(..) => {
            let PiTerm::Restrict(z, mut q) = std::mem::replace(p, PiTerm::Nil) else {
                unreachable!()
            };
            let zid = name_id(&z);
            env.push((zid, z.clone()));
            let inner_run = matches!(&*q, PiTerm::Restrict(..));
            let mut ann = simplify_at(Rc::make_mut(&mut q), env, inner_run);
            env.pop();
            let q = take(q);

            // Scope narrowing: distribute over parallel components that do
            // not use the name. Children are already simplified and sorted,
            // so only local reassembly is needed; the next pass re-verifies
            // the rebuilt region.
            let q = match q {
                PiTerm::Par(children) => {
                    let narrows = ann
                        .children
                        .as_ref()
                        .expect("simplify always annotates parallel compositions")
                        .iter()
                        .any(|ci| !set_contains(&ci.fns, zid));
                    if !narrows {
                        // No narrowing; fall through with the composition
                        // intact. `ann` still describes it.
                        PiTerm::Par(children)
                    } else {
                        let infos = ann.children.take().unwrap();
                        let mut users: Vec<PiTerm> = Vec::new();
                        let mut rest: Vec<Part> = Vec::new();
                        for (c, ci) in children.into_iter().zip(infos) {
                            if set_contains(&ci.fns, zid) {
                                users.push(c);
                            } else {
                                rest.push(Part { term: c, fns: ci.fns, slots: ci.slots, key: None });
                            }
                        }
                        // With no user at all the restriction disappears.
                        if !users.is_empty() {
                            let body = match users.len() {
                                1 => users.pop().unwrap(),
                                _ => PiTerm::Par(users),
                            };
                            let restricted = PiTerm::Restrict(z, Rc::new(body));
                            let (fns, slots) = occurrences(&restricted);
                            rest.push(Part { term: restricted, fns, slots, key: None });
                        }
                        sort_parts(&mut rest, env);
                        return finish_par(p, rest, true, env);
                    }
                }
                other => other,
            };

            if in_run {
                // Interior of a run: report the binder upward; the head
                // orders the whole run. Binder ids stay in `fns` so the head
                // can read their first occurrences.
                let mut binders = ann.run.take().unwrap_or_default();
                binders.push((z.clone(), zid));
                *p = PiTerm::Restrict(z, Rc::new(q));
                let key = wrap_restrict_key(&ann.key);
                return Ann {
                    fns: ann.fns,
                    slots: ann.slots,
                    children: None,
                    run: Some(binders),
                    changed: ann.changed,
                    key,
                };
            }

            // Head of the run: order all binders by the first occurrence of
            // each in the body. First occurrences are pairwise distinct, so
            // they determine the order completely. Binders that bind nothing
            // (unused, or shadowed duplicates in the run) are dropped.
            let mut binders = ann.run.take().unwrap_or_default();
            binders.push((z, zid));
            let mut entries: Vec<(u32, String, u32)> = Vec::with_capacity(binders.len());
            let mut dropped = false;
            for (b, id) in binders {
                // Innermost first: a duplicate spelling keeps the inner binder.
                if entries.iter().any(|e| e.2 == id) {
                    dropped = true;
                    continue;
                }
                match set_first_occurrence(&ann.fns, id) {
                    Some(pos) => entries.push((pos, b, id)),
                    None => {
                        if std::env::var_os("RTMPI_PASSDUMP").is_some() {
                            eprintln!("DROP binder {b} (id {id}), fns has {} ids", ann.fns.len());
                        }
                        dropped = true;
                    }
                }
            }
            let before: Vec<u32> = entries.iter().map(|e| e.2).collect();
            entries.sort_by_key(|e| e.0);
            let run_changed = dropped || entries.iter().map(|e| e.2).ne(before.iter().copied());
            let mut fns = ann.fns;
            for (_, _, id) in &entries {
                set_remove(&mut fns, *id);
            }
            if entries.is_empty() {
                // Every binder vanished: the restriction disappears.
                *p = q;
                return Ann {
                    fns,
                    slots: ann.slots,
                    children: ann.children,
                    run: None,
                    changed: true,
                    key: fresh_key(p, env),
                };
            }
            let mut body = q;
            while let PiTerm::Restrict(_, inner) = body {
                body = take(inner);
            }
            let mut term = body;
            for (_, b, _) in &mut entries {
                term = PiTerm::Restrict(std::mem::take(b), Rc::new(term));
            }
            *p = term;
            let key = if run_changed { fresh_key(p, env) } else { wrap_restrict_key(&ann.key) };
            Ann::plain(fns, ann.slots, ann.changed || run_changed, key)
        }
    }
}

/// Simplify the children of a parallel composition, flattening nested
/// compositions and dropping Nil components.
fn simplify_par_children(ps: Vec<PiTerm>, env: &mut Vec<(u32, String)>) -> (Vec<Part>, bool) {
    let mut parts: Vec<Part> = Vec::with_capacity(ps.len());
    let mut changed = false;
    for mut q in ps {
        let ann = simplify(&mut q, env);
        changed |= ann.changed;
        match q {
            PiTerm::Par(inner) => {
                changed = true;
                match ann.children {
                    Some(infos) => parts.extend(inner.into_iter().zip(infos).map(|(c, ci)| {
                        Part { term: c, fns: ci.fns, slots: ci.slots, key: None }
                    })),
                    None => {
                        for c in inner {
                            let (fns, slots) = occurrences(&c);
                            parts.push(Part { term: c, fns, slots, key: None });
                        }
                    }
                }
            }
            PiTerm::Nil => changed = true,
            other => {
                parts.push(Part { term: other, fns: ann.fns, slots: ann.slots, key: Some(ann.key) })
            }
        }
    }
    changed |= sort_parts(&mut parts, env);
    (parts, changed)
}

/// Union the (sorted) parts' free names, offsetting occurrence positions by
/// the slots of earlier siblings.
fn union_parts(parts: &[Part]) -> (NameSet, u32) {
    let mut fns: NameSet = Vec::new();
    let mut offset = 0;
    for part in parts {
        set_union_into(&mut fns, &part.fns, offset);
        offset += part.slots;
    }
    (fns, offset)
}

/// Store sorted parts into `p` as a parallel composition, keeping the
/// per-child annotations for later narrowing.
fn finish_par(p: &mut PiTerm, mut parts: Vec<Part>, changed: bool, env: &[(u32, String)]) -> Ann {
    let (fns, slots) = union_parts(&parts);
    match parts.len() {
        0 => {
            *p = PiTerm::Nil;
            Ann::plain(Vec::new(), 0, true, String::from("0"))
        }
        1 => {
            let part = parts.pop().unwrap();
            *p = part.term;
            let key = part.key.unwrap_or_else(|| fresh_key(p, env));
            Ann::plain(fns, slots, true, key)
        }
        _ => {
            let key = joined_key(&parts, '|');
            let mut children = Vec::with_capacity(parts.len());
            let mut terms = Vec::with_capacity(parts.len());
            for part in parts {
                children.push(ChildInfo { fns: part.fns, slots: part.slots });
                terms.push(part.term);
            }
            *p = PiTerm::Par(terms);
            Ann { fns, slots, children: Some(children), run: None, changed, key }
        }
    }
}

/// Sort sibling components by their α-invariant keys, materializing missing
/// keys first; reports whether the order actually changed.
fn sort_parts(parts: &mut Vec<Part>, env: &[(u32, String)]) -> bool {
    for part in parts.iter_mut() {
        if part.key.is_none() {
            part.key = Some(fresh_key(&part.term, env));
        }
    }
    if parts.len() < 2 {
        return false;
    }
    let sorted = parts.windows(2).all(|w| w[0].key <= w[1].key);
    if !sorted {
        parts.sort_by(|a, b| a.key.cmp(&b.key));
    }
    !sorted
}

/// Assemble a Sum/Par sort key from already-materialized child keys.
fn joined_key(parts: &[Part], sep: char) -> String {
    let mut key = String::with_capacity(
        parts.iter().map(|p| p.key.as_ref().map_or(0, |k| k.len()) + 1).sum::<usize>() + 2,
    );
    key.push('(');
    for (i, part) in parts.iter().enumerate() {
        if i > 0 {
            key.push(sep);
        }
        key.push_str(part.key.as_ref().expect("sort_parts materializes keys"));
    }
    key.push(')');
    key
}

/// Wrap a body key as the key of a restriction around it.
fn wrap_restrict_key(body: &str) -> String {
    let mut key = String::with_capacity(body.len() + 4);
    key.push_str("(v%)");
    key.push_str(body);
    key
}

/// Rename every binder to `@0`, `@1`, … in pre-order, in place. The
/// replacement namespace (`@` + digits) is disjoint from user names and
/// other generated names, so plain environment-based renaming cannot
/// capture. Names already carrying their canonical spelling are left
/// untouched, so a stable term costs no allocation. Reports whether any
/// name was rewritten.
fn renumber(p: &mut PiTerm) -> bool {
    fn fresh_name(counter: &mut usize) -> String {
        let name = format!("@{counter}");
        *counter += 1;
        name
    }
    fn rename(n: &mut String, env: &[(String, String)], changed: &mut bool) {
        if let Some((_, new)) = env.iter().rev().find(|(old, _)| old == n) {
            if n != new {
                *n = new.clone();
                *changed = true;
            }
        }
    }
    fn go(
        p: &mut PiTerm,
        env: &mut Vec<(String, String)>,
        counter: &mut usize,
        changed: &mut bool,
    ) {
        match p {
            PiTerm::Nil => {}
            PiTerm::Tau(q) | PiTerm::Bang(q) => go(Rc::make_mut(q), env, counter, changed),
            PiTerm::Out(x, y, q) => {
                rename(x, env, changed);
                rename(y, env, changed);
                go(Rc::make_mut(q), env, counter, changed);
            }
            PiTerm::In(x, z, q) => {
                rename(x, env, changed);
                let fresh = fresh_name(counter);
                if *z != fresh {
                    *changed = true;
                }
                env.push((std::mem::replace(z, fresh.clone()), fresh));
                go(Rc::make_mut(q), env, counter, changed);
                env.pop();
            }
            PiTerm::PolyOut(..) | PiTerm::PolyIn(..) => unreachable!(),
            PiTerm::Sum(ps) | PiTerm::Par(ps) => {
                for q in ps {
                    go(q, env, counter, changed);
                }
            }
            PiTerm::Restrict(z, q) => {
                let fresh = fresh_name(counter);
                if *z != fresh {
                    *changed = true;
                }
                env.push((std::mem::replace(z, fresh.clone()), fresh));
                go(Rc::make_mut(q), env, counter, changed);
                env.pop();
            }
        }
    }
    let mut changed = false;
    go(p, &mut Vec::new(), &mut 0, &mut changed);
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pi::parse::parse_pi;

    fn norm(src: &str) -> PiTerm {
        normalize(&expand_polyadic(&parse_pi(src).unwrap()))
    }

    #[test]
    fn drops_nil_and_flattens() {
        // Par[Nil, x!a.0, Nil] -> x!a.0
        let t = PiTerm::Par(vec![PiTerm::Nil, PiTerm::out("x", "a", PiTerm::Nil), PiTerm::Nil]);
        assert_eq!(normalize(&t), PiTerm::out("x", "a", PiTerm::Nil));
        assert_eq!(norm("(x!a.0 | y!b.0) | z!c.0"), norm("x!a.0 | (y!b.0 | z!c.0)"));
        // Nested sums built programmatically flatten the same way.
        let ab = PiTerm::Sum(vec![
            PiTerm::Sum(vec![
                PiTerm::tau(PiTerm::Nil),
                PiTerm::out("x", "a", PiTerm::Nil),
            ]),
            PiTerm::input("y", "w", PiTerm::Nil),
        ]);
        let ba = PiTerm::Sum(vec![
            PiTerm::tau(PiTerm::Nil),
            PiTerm::Sum(vec![
                PiTerm::out("x", "a", PiTerm::Nil),
                PiTerm::input("y", "w", PiTerm::Nil),
            ]),
        ]);
        assert_eq!(normalize(&ab), normalize(&ba));
    }

    #[test]
    fn unused_restriction_dropped() {
        assert_eq!(norm("(v z)x!a.0"), norm("x!a.0"));
        assert_eq!(norm("(v z)0"), PiTerm::Nil);
    }

    #[test]
    fn scope_narrowing() {
        // (v z)(x!a.0 | z!b.0) -> x!a.0 | (v z)z!b.0
        assert_eq!(norm("(v z)(x!a.0 | z!b.0)"), norm("x!a.0 | (v z)z!b.0"));
    }

    #[test]
    fn commutativity() {
        assert_eq!(norm("x!a.0 | y!b.0"), norm("y!b.0 | x!a.0"));
        assert_eq!(norm("tau.0 + x!a.0"), norm("x!a.0 + tau.0"));
    }

    #[test]
    fn alpha_conversion_is_identified() {
        assert!(alpha_eq(&parse_pi("x?(y).y!<>.0").unwrap(), &parse_pi("x?(z).z!<>.0").unwrap()));
        assert!(!alpha_eq(&parse_pi("x!a.0").unwrap(), &parse_pi("x!b.0").unwrap()));
        let p = parse_pi("(v z)(x!z.0 | z?(w).w!a.0)").unwrap();
        assert!(alpha_eq(&p, &p));
        // Restriction order is canonicalized.
        assert_eq!(norm("(v a)(v b)(a!b.0 | b!a.0)"), norm("(v b)(v a)(a!b.0 | b!a.0)"));
        // Sibling order must not depend on how an outer binder is spelled.
        assert_eq!(norm("(v z)(x!z.0 | z?(w).0)"), norm("(v q)(x!q.0 | q?(w).0)"));
    }

    #[test]
    fn binders_renumbered_canonically() {
        let t = norm("x?(y).(v q)y!q.0");
        assert_eq!(t.render(), "x?(@0).(v @1)@0!@1.0");
    }

    #[test]
    fn idempotent() {
        for src in [
            "(v z)(x!z.0 | z?(w).0)",
            "!c?(t,l,r,u,d).(u?(e).c!<t,l,r,u,e>.0 + t!<l,r,u,d>.c!<t,l,r,u,d>.0)",
            "(v a)(v b)(a!b.0 | (b!a.0 | 0) | tau.0)",
            "x?(y).(y!<>.0 + tau.x!y.0)",
        ] {
            let once = norm(src);
            assert_eq!(normalize(&once), once, "not idempotent on {src}");
        }
    }

    #[test]
    fn shadowing_handled() {
        // Inner binder shadows outer: distinct canonical numbers, semantics kept.
        let t = norm("x?(y).y?(y).y!a.0");
        assert_eq!(t.render(), "x?(@0).@0?(@1).@1!a.0");
        // A restriction run with a duplicate name keeps only the inner binder.
        let dup = PiTerm::restrict("z", PiTerm::restrict("z", PiTerm::out("z", "a", PiTerm::Nil)));
        assert_eq!(normalize(&dup), norm("(v z)z!a.0"));
    }
}
