//! Branching bisimilarity and its divergence-preserving variant on finite
//! LTSs: a signature-refinement checker, a brute-force fixpoint oracle,
//! divergence detection, and branching-degree analysis.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::lts::{ActionLabel, Lts};

/// A partition of the disjoint union of one or two LTSs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    /// block index per combined state
    pub block_of: Vec<usize>,
    /// number of blocks
    pub num_blocks: usize,
}

impl Partition {
    pub fn same_block(&self, a: usize, b: usize) -> bool {
        self.block_of[a] == self.block_of[b]
    }
}

/// Verdict of an equivalence check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equivalent,
    Inequivalent,
    IndeterminateFrontier,
}

/// Outcome plus supporting data: a witness relation on success, a
/// distinguishing obligation on failure.
#[derive(Clone, Debug)]
pub struct EquivResult {
    pub verdict: Verdict,
    /// cross pairs (state in l1, state in l2) of the witness relation
    pub witness: Option<Vec<(usize, usize)>>,
    /// (side, state, action) that could not be matched by the other side
    pub evidence: Option<(usize, usize, ActionLabel)>,
}

#[derive(Debug, Error)]
pub enum EquivError {
    #[error("relation pair ({0}, {1}) out of range")]
    OutOfRange(usize, usize),
    #[error("inputs have frontier states; equivalence checks need complete explorations")]
    Frontier,
    #[error("oracle limit exceeded: |S1|*|S2| = {0} > {1}")]
    OracleLimit(usize, usize),
}

/// Combined view of two LTSs as one graph (indices of l2 shifted by
/// l1.num_states()).
struct Combined {
    n1: usize,
    n: usize,
    succ: Vec<Vec<(ActionLabel, usize)>>,
    frontier: BTreeSet<usize>,
}

impl Combined {
    fn new(l1: &Lts, l2: &Lts) -> Combined {
        let n1 = l1.num_states();
        let n = n1 + l2.num_states();
        let mut succ = vec![Vec::new(); n];
        for (s, a, t) in l1.transitions() {
            succ[*s].push((a.clone(), *t));
        }
        for (s, a, t) in l2.transitions() {
            succ[n1 + *s].push((a.clone(), n1 + *t));
        }
        let mut frontier: BTreeSet<usize> = l1.frontier().iter().copied().collect();
        frontier.extend(l2.frontier().iter().map(|s| n1 + s));
        Combined { n1, n, succ, frontier }
    }
}

/// States that can embark on an infinite τ-path never leaving their block:
/// iteratively strip states without an in-block τ-successor among the
/// remaining candidates; on a finite graph the survivors are exactly the
/// states from which an in-block τ-path can be prolonged forever.
fn divergent_states(succ: &[Vec<(ActionLabel, usize)>], block_of: &[usize]) -> Vec<bool> {
    let n = block_of.len();
    let mut alive = vec![true; n];
    loop {
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let has = succ[s]
                .iter()
                .any(|(a, t)| a.is_tau() && block_of[*t] == block_of[s] && alive[*t]);
            if !has {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    alive
}

/// Branching-step signature of a state: every (label, target block) pair
/// reachable by an in-block τ-path followed by a non-inert step, plus the
/// divergence flag when requested. Intermediate τ-states must stay in the
/// block.
fn signature(
    s: usize,
    succ: &[Vec<(ActionLabel, usize)>],
    block_of: &[usize],
    divergent: Option<&[bool]>,
) -> (BTreeSet<(ActionLabel, usize)>, bool) {
    let b = block_of[s];
    let mut sig = BTreeSet::new();
    let mut seen = BTreeSet::from([s]);
    let mut queue = VecDeque::from([s]);
    while let Some(v) = queue.pop_front() {
        for (a, t) in &succ[v] {
            if a.is_tau() && block_of[*t] == b {
                // inert within the block: extend the τ-path
                if seen.insert(*t) {
                    queue.push_back(*t);
                }
            } else {
                sig.insert((a.clone(), block_of[*t]));
            }
        }
    }
    let div = divergent.map(|d| d[s]).unwrap_or(false);
    (sig, div)
}

/// Signature refinement on the disjoint union until stable. Returns the
/// final partition. `touched_frontier` is set when a frontier state's
/// signature influenced any split decision (meaning verdicts are unsafe).
fn refine(c: &Combined, divergence: bool) -> Partition {
    let mut block_of = vec![0usize; c.n];
    let mut num_blocks = 1usize.min(c.n.max(1));
    if c.n == 0 {
        return Partition { block_of, num_blocks: 0 };
    }
    loop {
        let divergent = if divergence {
            Some(divergent_states(&c.succ, &block_of))
        } else {
            None
        };
        let mut table: BTreeMap<(usize, BTreeSet<(ActionLabel, usize)>, bool), usize> =
            BTreeMap::new();
        let mut next = vec![0usize; c.n];
        let mut count = 0usize;
        for s in 0..c.n {
            let (sig, div) = signature(s, &c.succ, &block_of, divergent.as_deref());
            let key = (block_of[s], sig, div);
            let id = *table.entry(key).or_insert_with(|| {
                let id = count;
                count += 1;
                id
            });
            next[s] = id;
        }
        if count == num_blocks && next == block_of {
            break;
        }
        let stable = count == num_blocks;
        block_of = next;
        num_blocks = count;
        if stable {
            break;
        }
    }
    Partition { block_of, num_blocks }
}

fn check_frontier_contact(c: &Combined, p: &Partition, initial_pair: (usize, usize)) -> bool {
    // A frontier state's unknown successors make its block assignments
    // unreliable; the verdict is only safe if no frontier state shares a
    // block with (or equals) anything relevant. We take the conservative
    // route: any frontier state in the blocks of the initial states, or in
    // any block at all, taints the verdict when the two initial states are
    // claimed equivalent. Simplest sound rule: any frontier state at all.
    let _ = (p, initial_pair);
    !c.frontier.is_empty()
}

/// Check whether `r` (pairs l1-state × l2-state) is a (divergence-preserving)
/// branching bisimulation between two frontier-free LTSs.
pub fn check_relation(
    l1: &Lts,
    l2: &Lts,
    r: &[(usize, usize)],
    divergence: bool,
) -> Result<bool, EquivError> {
    if !l1.is_frontier_free() || !l2.is_frontier_free() {
        return Err(EquivError::Frontier);
    }
    for (a, b) in r {
        if *a >= l1.num_states() || *b >= l2.num_states() {
            return Err(EquivError::OutOfRange(*a, *b));
        }
    }
    Ok(relation_holds(l1, l2, r, divergence))
}

fn tau_reach(succ: &[Vec<(ActionLabel, usize)>]) -> Vec<BTreeSet<usize>> {
    let n = succ.len();
    let mut reach = Vec::with_capacity(n);
    for s in 0..n {
        let mut seen = BTreeSet::from([s]);
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            for (a, t) in &succ[v] {
                if a.is_tau() && seen.insert(*t) {
                    queue.push_back(*t);
                }
            }
        }
        reach.push(seen);
    }
    reach
}

/// Core of `check_relation` / the oracle's deletion test, on a symmetric pair
/// of systems: every pair must satisfy the transfer clauses in both
/// directions and, when flagged, the divergence clauses.
fn relation_holds(l1: &Lts, l2: &Lts, r: &[(usize, usize)], divergence: bool) -> bool {
    let succ1 = successors_of(l1);
    let succ2 = successors_of(l2);
    let reach2 = tau_reach(&succ2);
    let reach1 = tau_reach(&succ1);
    let rel: BTreeSet<(usize, usize)> = r.iter().copied().collect();
    for &(s1, s2) in r {
        if !pair_ok(s1, s2, &succ1, &succ2, &reach2, &rel, false)
            || !pair_ok(s2, s1, &succ2, &succ1, &reach1, &rel, true)
        {
            return false;
        }
    }
    if divergence {
        for &(s1, s2) in r {
            if !divergence_ok(s1, s2, &succ1, &succ2, &rel, false)
                || !divergence_ok(s2, s1, &succ2, &succ1, &rel, true)
            {
                return false;
            }
        }
    }
    true
}

fn successors_of(l: &Lts) -> Vec<Vec<(ActionLabel, usize)>> {
    let mut succ = vec![Vec::new(); l.num_states()];
    for (s, a, t) in l.transitions() {
        succ[*s].push((a.clone(), *t));
    }
    succ
}

fn related(rel: &BTreeSet<(usize, usize)>, a: usize, b: usize, swapped: bool) -> bool {
    if swapped {
        rel.contains(&(b, a))
    } else {
        rel.contains(&(a, b))
    }
}

/// Transfer clauses 1–2: s1 --a--> t1 must be matched by s2 →* s2'' -(a)-> s2'
/// with (s1, s2'') and (t1, s2') in the relation.
fn pair_ok(
    s1: usize,
    s2: usize,
    succ1: &[Vec<(ActionLabel, usize)>],
    succ2: &[Vec<(ActionLabel, usize)>],
    reach2: &[BTreeSet<usize>],
    rel: &BTreeSet<(usize, usize)>,
    swapped: bool,
) -> bool {
    'trans: for (a, t1) in &succ1[s1] {
        for &s2pp in &reach2[s2] {
            if !related(rel, s1, s2pp, swapped) {
                continue;
            }
            // the (a) option: a = τ matched by staying put
            if a.is_tau() && related(rel, *t1, s2pp, swapped) {
                continue 'trans;
            }
            for (b, s2p) in &succ2[s2pp] {
                if b == a && related(rel, *t1, *s2p, swapped) {
                    continue 'trans;
                }
            }
        }
        return false;
    }
    true
}

/// Divergence clauses 3–4: if s1 has an infinite τ-path within the slice of
/// states related to s2, then s2 must have a τ-successor path reaching (in
/// one or more τ-steps) a state related to some state on such a path.
fn divergence_ok(
    s1: usize,
    s2: usize,
    succ1: &[Vec<(ActionLabel, usize)>],
    succ2: &[Vec<(ActionLabel, usize)>],
    rel: &BTreeSet<(usize, usize)>,
    swapped: bool,
) -> bool {
    // Slice: states of side 1 related to s2.
    let slice: BTreeSet<usize> = (0..succ1.len())
        .filter(|&u| related(rel, u, s2, swapped))
        .collect();
    // Infinite in-slice τ-path from s1? Strip states without an in-slice
    // τ-successor among survivors.
    let mut alive = slice.clone();
    loop {
        let dead: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|&u| {
                !succ1[u].iter().any(|(a, t)| a.is_tau() && alive.contains(t))
            })
            .collect();
        if dead.is_empty() {
            break;
        }
        for d in dead {
            alive.remove(&d);
        }
    }
    if !alive.contains(&s1) {
        return true; // no infinite τ-sequence within the related slice
    }
    // Clause 4: s2 must make at least one τ-step to a state related to some
    // state on the infinite path (any member of the surviving set reachable
    // from s1 within it).
    let mut path_states = BTreeSet::from([s1]);
    let mut queue = VecDeque::from([s1]);
    while let Some(v) = queue.pop_front() {
        for (a, t) in &succ1[v] {
            if a.is_tau() && alive.contains(t) && path_states.insert(*t) {
                queue.push_back(*t);
            }
        }
    }
    succ2[s2].iter().any(|(a, t2)| {
        a.is_tau() && path_states.iter().any(|&u| related(rel, u, *t2, swapped))
    })
}

/// Brute-force greatest-fixpoint oracle: start from the full cross relation
/// and delete violating pairs until stable.
pub fn oracle(l1: &Lts, l2: &Lts, divergence: bool) -> Result<EquivResult, EquivError> {
    const LIMIT: usize = 40_000;
    if !l1.is_frontier_free() || !l2.is_frontier_free() {
        return Err(EquivError::Frontier);
    }
    let size = l1.num_states() * l2.num_states();
    if size > LIMIT {
        return Err(EquivError::OracleLimit(size, LIMIT));
    }
    let succ1 = successors_of(l1);
    let succ2 = successors_of(l2);
    let reach1 = tau_reach(&succ1);
    let reach2 = tau_reach(&succ2);
    let mut rel: BTreeSet<(usize, usize)> = (0..l1.num_states())
        .flat_map(|a| (0..l2.num_states()).map(move |b| (a, b)))
        .collect();
    loop {
        let mut remove = Vec::new();
        for &(a, b) in &rel {
            let ok = pair_ok(a, b, &succ1, &succ2, &reach2, &rel, false)
                && pair_ok(b, a, &succ2, &succ1, &reach1, &rel, true)
                && (!divergence
                    || (divergence_ok(a, b, &succ1, &succ2, &rel, false)
                        && divergence_ok(b, a, &succ2, &succ1, &rel, true)));
            if !ok {
                remove.push((a, b));
            }
        }
        if remove.is_empty() {
            break;
        }
        for p in remove {
            rel.remove(&p);
        }
    }
    if rel.contains(&(l1.initial(), l2.initial())) {
        Ok(EquivResult {
            verdict: Verdict::Equivalent,
            witness: Some(rel.into_iter().collect()),
            evidence: None,
        })
    } else {
        Ok(EquivResult {
            verdict: Verdict::Inequivalent,
            witness: None,
            evidence: None,
        })
    }
}

/// Partition-refinement decision procedure for branching bisimilarity.
pub fn branching_bisim(l1: &Lts, l2: &Lts) -> EquivResult {
    decide(l1, l2, false)
}

/// Partition-refinement decision procedure for divergence-preserving
/// branching bisimilarity.
pub fn dp_branching_bisim(l1: &Lts, l2: &Lts) -> EquivResult {
    decide(l1, l2, true)
}

fn decide(l1: &Lts, l2: &Lts, divergence: bool) -> EquivResult {
    let c = Combined::new(l1, l2);
    let p = refine(&c, divergence);
    if check_frontier_contact(&c, &p, (l1.initial(), c.n1 + l2.initial())) {
        return EquivResult {
            verdict: Verdict::IndeterminateFrontier,
            witness: None,
            evidence: None,
        };
    }
    let i1 = l1.initial();
    let i2 = c.n1 + l2.initial();
    if p.same_block(i1, i2) {
        let mut witness = Vec::new();
        for a in 0..c.n1 {
            for b in c.n1..c.n {
                if p.same_block(a, b) {
                    witness.push((a, b - c.n1));
                }
            }
        }
        EquivResult { verdict: Verdict::Equivalent, witness: Some(witness), evidence: None }
    } else {
        // Distinguishing obligation: a non-inert option of one initial state's
        // block signature that the other cannot match.
        let divergent = if divergence {
            Some(divergent_states(&c.succ, &p.block_of))
        } else {
            None
        };
        let (sig1, _) = signature(i1, &c.succ, &p.block_of, divergent.as_deref());
        let (sig2, _) = signature(i2, &c.succ, &p.block_of, divergent.as_deref());
        let evidence = sig1
            .difference(&sig2)
            .next()
            .map(|(a, _)| (0usize, l1.initial(), a.clone()))
            .or_else(|| {
                sig2.difference(&sig1)
                    .next()
                    .map(|(a, _)| (1usize, l2.initial(), a.clone()))
            });
        EquivResult { verdict: Verdict::Inequivalent, witness: None, evidence }
    }
}

/// Equivalence partition of a single LTS against itself, in the requested
/// mode. Requires a frontier-free input.
pub fn self_partition(l: &Lts, divergence: bool) -> Partition {
    let succ = successors_of(l);
    let c = Combined { n1: l.num_states(), n: l.num_states(), succ, frontier: BTreeSet::new() };
    refine(&c, divergence)
}

/// States from which an infinite τ-path exists staying within single blocks
/// of `p`.
pub fn divergence_classes(l: &Lts, p: &Partition) -> BTreeSet<usize> {
    let succ = successors_of(l);
    divergent_states(&succ, &p.block_of)
        .into_iter()
        .enumerate()
        .filter(|(_, d)| *d)
        .map(|(s, _)| s)
        .collect()
}

/// Branching degree up to the divergence-preserving equivalence, per state,
/// plus the supremum over reachable states (all states of an explored LTS
/// are reachable).
pub fn branching_degree(l: &Lts) -> (Vec<usize>, usize) {
    let p = self_partition(l, true);
    let succ = successors_of(l);
    let divergent = divergent_states(&succ, &p.block_of);
    let mut degrees = Vec::with_capacity(l.num_states());
    for s in 0..l.num_states() {
        let (sig, _) = signature(s, &succ, &p.block_of, Some(&divergent));
        degrees.push(sig.len());
    }
    let sup = degrees.iter().copied().max().unwrap_or(0);
    (degrees, sup)
}
