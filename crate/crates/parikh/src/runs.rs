//! The algebraic run/cycle calculus: a derivation is abstracted to a multiset
//! of transitions, validity reduces to the Euler condition plus connectedness
//! from the anchor state, and derivation trees can be reconstructed from any
//! valid multiset by greedy expansion with cycle splicing.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::grammar::Grammar;
use crate::vecmath::LetterVec;
use crate::{Error, Result};

/// A multiset over a grammar's transitions, indexed by transition position.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RunMultiset {
    counts: Vec<u64>,
}

impl RunMultiset {
    pub fn zeros(num_transitions: usize) -> Self {
        RunMultiset {
            counts: vec![0; num_transitions],
        }
    }

    pub fn from_counts(counts: Vec<u64>) -> Self {
        RunMultiset { counts }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, t: usize) -> u64 {
        self.counts[t]
    }

    pub fn set(&mut self, t: usize, c: u64) {
        self.counts[t] = c;
    }

    pub fn add_assign(&mut self, other: &RunMultiset) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
    }

    pub fn add_scaled(&mut self, other: &RunMultiset, k: u64) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b * k;
        }
    }

    /// Total number of transition occurrences (the multiset size `|D|`).
    pub fn size(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Largest single multiplicity (`||D||`).
    pub fn max_count(&self) -> u64 {
        self.counts.iter().copied().max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.counts.iter().all(|&c| c == 0)
    }

    /// How many times each state is consumed as a source.
    pub fn source_counts(&self, g: &Grammar) -> Vec<u64> {
        let mut src = vec![0u64; g.num_states()];
        for (i, &c) in self.counts.iter().enumerate() {
            src[g.transitions()[i].source] += c;
        }
        src
    }

    /// How many times each state is produced as a target.
    pub fn target_counts(&self, g: &Grammar) -> Vec<u64> {
        let mut tgt = vec![0u64; g.num_states()];
        for (i, &c) in self.counts.iter().enumerate() {
            for &t in &g.transitions()[i].targets {
                tgt[t] += c;
            }
        }
        tgt
    }

    /// Total letter output.
    pub fn out(&self, g: &Grammar) -> LetterVec {
        let mut acc = LetterVec::zeros(g.dim());
        for (i, &c) in self.counts.iter().enumerate() {
            if c > 0 {
                acc = acc.add(&g.transitions()[i].output.scale(c as i64));
            }
        }
        acc
    }

    /// States used as sources.
    pub fn support(&self, g: &Grammar) -> BTreeSet<usize> {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, _)| g.transitions()[i].source)
            .collect()
    }

    /// States reachable from `s` along used transitions (including `s`).
    fn reachable_from(&self, g: &Grammar, s: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        seen.insert(s);
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for (i, &c) in self.counts.iter().enumerate() {
                if c > 0 && g.transitions()[i].source == u {
                    for &t in &g.transitions()[i].targets {
                        if seen.insert(t) {
                            queue.push_back(t);
                        }
                    }
                }
            }
        }
        seen
    }

    /// Connected from `s`: every support state is reachable from `s`.
    pub fn connected_from(&self, g: &Grammar, s: usize) -> bool {
        let reach = self.reachable_from(g, s);
        self.support(g).iter().all(|t| reach.contains(t))
    }
}

/// Why a multiset fails to be a run or a cycle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InvalidReason {
    /// The zero multiset is degenerate by convention.
    Empty,
    /// Consumption and production do not balance at this state.
    EulerMismatch { state: usize },
    /// The used transitions do not hang together from any single state.
    Disconnected { state: usize },
}

/// Classification of a transition multiset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunClass {
    Run,
    CycleFrom(usize),
    Invalid(InvalidReason),
}

/// Decides whether `d` is a run, a cycle from some state, or invalid.
///
/// A run consumes each state exactly as often as it is produced, except the
/// start state which is consumed once more, and is connected from the start.
/// A cycle balances exactly and is connected from its anchor. The anchor
/// reported is the smallest state index that works.
pub fn classify(g: &Grammar, d: &RunMultiset) -> RunClass {
    if d.counts.len() != g.transitions().len() {
        return RunClass::Invalid(InvalidReason::Empty);
    }
    if d.is_zero() {
        return RunClass::Invalid(InvalidReason::Empty);
    }
    let src = d.source_counts(g);
    let tgt = d.target_counts(g);
    let mut diff: Vec<i64> = Vec::with_capacity(src.len());
    for (s, t) in src.iter().zip(&tgt) {
        diff.push(*s as i64 - *t as i64);
    }

    let is_run_balance = (0..diff.len()).all(|s| diff[s] == i64::from(s == g.start()));
    if is_run_balance {
        if d.connected_from(g, g.start()) {
            return RunClass::Run;
        }
        let reach = d.reachable_from(g, g.start());
        let bad = d.support(g).into_iter().find(|s| !reach.contains(s)).unwrap();
        return RunClass::Invalid(InvalidReason::Disconnected { state: bad });
    }
    if diff.iter().all(|&x| x == 0) {
        for s in d.support(g) {
            if d.connected_from(g, s) {
                return RunClass::CycleFrom(s);
            }
        }
        let supp = d.support(g);
        let s0 = *supp.iter().next().unwrap();
        let reach = d.reachable_from(g, s0);
        let bad = supp.into_iter().find(|s| !reach.contains(s)).unwrap_or(s0);
        return RunClass::Invalid(InvalidReason::Disconnected { state: bad });
    }
    let bad = (0..diff.len())
        .find(|&s| diff[s] != i64::from(s == g.start()))
        .unwrap();
    RunClass::Invalid(InvalidReason::EulerMismatch { state: bad })
}

/// A derivation tree in arena form. A node without an expansion is an open
/// leaf; a complete run tree has no open leaves, a cyclic tree has exactly
/// one, labelled with the cycle's anchor state.
#[derive(Clone, Debug)]
pub struct DerivationTree {
    nodes: Vec<TreeNode>,
    root: usize,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub state: usize,
    /// Applied transition index plus one child node per produced state.
    pub expansion: Option<(usize, Vec<usize>)>,
}

impl DerivationTree {
    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn open_leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].expansion.is_none() && self.reachable_nodes().contains(&i))
            .collect()
    }

    fn reachable_nodes(&self) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.root];
        while let Some(n) = stack.pop() {
            if seen.insert(n) {
                if let Some((_, children)) = &self.nodes[n].expansion {
                    stack.extend(children.iter().copied());
                }
            }
        }
        seen
    }

    /// Counts transition applications over the tree.
    pub fn recount(&self, g: &Grammar) -> RunMultiset {
        let mut d = RunMultiset::zeros(g.transitions().len());
        for n in self.reachable_nodes() {
            if let Some((t, _)) = &self.nodes[n].expansion {
                d.counts[*t] += 1;
            }
        }
        d
    }
}

/// Rebuilds a derivation tree from a valid run or cycle multiset.
///
/// Greedy expansion first; whenever transitions remain unused after the tree
/// closes, the connected component of the remainder hanging off a state that
/// already occurs in the tree forms a cycle, which is built recursively and
/// spliced in at that state.
pub fn reconstruct_derivation(g: &Grammar, d: &RunMultiset) -> Result<DerivationTree> {
    match classify(g, d) {
        RunClass::Run => build_tree(g, d, g.start(), None),
        RunClass::CycleFrom(s) => build_tree(g, d, s, Some(s)),
        RunClass::Invalid(reason) => Err(Error::InvalidRun(format!("{reason:?}"))),
    }
}

/// Builds a tree from `root_state` consuming exactly `d`. When `open_state`
/// is set, exactly one branch stays open, ending in that state.
fn build_tree(
    g: &Grammar,
    d: &RunMultiset,
    root_state: usize,
    open_state: Option<usize>,
) -> Result<DerivationTree> {
    let mut nodes = vec![TreeNode {
        state: root_state,
        expansion: None,
    }];
    let root = 0usize;
    let mut remaining = d.clone();
    // In cycle mode, reserve one future leaf of the anchor state: track a
    // budget of anchor-state leaves we must leave unexpanded.
    let mut reserve_open = open_state.map(|s| (s, 1u64));

    loop {
        // Greedy phase: expand open leaves in creation order.
        let mut progressed = true;
        while progressed {
            progressed = false;
            let open: Vec<usize> = (0..nodes.len())
                .filter(|&i| nodes[i].expansion.is_none())
                .collect();
            for leaf in open {
                let state = nodes[leaf].state;
                // Leave the reserved anchor leaf open if this is the last
                // chance: only expand it when some transition from it remains
                // and the balance still allows another occurrence later.
                if let Some((anchor, _)) = reserve_open {
                    if state == anchor {
                        // Expand only if after using one transition from
                        // `anchor` the remainder still produces `anchor`
                        // somewhere, i.e. the anchor will reappear.
                        let can_spare = remaining
                            .counts
                            .iter()
                            .enumerate()
                            .any(|(i, &c)| c > 0 && g.transitions()[i].source == anchor)
                            && remaining_produces(g, &remaining, anchor);
                        if !can_spare {
                            continue;
                        }
                    }
                }
                let tau = (0..remaining.counts.len()).find(|&i| {
                    remaining.counts[i] > 0 && g.transitions()[i].source == state
                });
                if let Some(tau) = tau {
                    remaining.counts[tau] -= 1;
                    let mut children = Vec::new();
                    for &t in &g.transitions()[tau].targets {
                        nodes.push(TreeNode {
                            state: t,
                            expansion: None,
                        });
                        children.push(nodes.len() - 1);
                    }
                    nodes[leaf].expansion = Some((tau, children));
                    progressed = true;
                }
            }
        }

        if remaining.is_zero() {
            break;
        }

        // Splice phase: some state present in the tree must root a connected
        // component of the remainder; that component is a cycle from it.
        let tree_states: BTreeSet<usize> = nodes.iter().map(|n| n.state).collect();
        let splice_state = tree_states
            .iter()
            .copied()
            .find(|&s| {
                remaining
                    .counts
                    .iter()
                    .enumerate()
                    .any(|(i, &c)| c > 0 && g.transitions()[i].source == s)
            })
            .ok_or_else(|| {
                Error::InvalidRun("leftover transitions disconnected from the tree".into())
            })?;

        let component = remainder_component(g, &remaining, splice_state);
        let cycle_tree = build_tree(g, &component, splice_state, Some(splice_state))?;
        for (i, &c) in component.counts.iter().enumerate() {
            remaining.counts[i] -= c;
        }

        // Splice: pick a tree node with the state, graft the cyclic tree in
        // its place, and hang the node's old expansion on the open leaf.
        let host = (0..nodes.len())
            .find(|&i| nodes[i].state == splice_state)
            .unwrap();
        let offset = nodes.len();
        for n in cycle_tree.nodes.iter() {
            nodes.push(TreeNode {
                state: n.state,
                expansion: n
                    .expansion
                    .as_ref()
                    .map(|(t, ch)| (*t, ch.iter().map(|c| c + offset).collect())),
            });
        }
        let grafted_root = offset + cycle_tree.root;
        let open_leaf = (0..cycle_tree.nodes.len())
            .find(|&i| {
                cycle_tree.nodes[i].expansion.is_none()
                    && cycle_tree.reachable_nodes().contains(&i)
                    && cycle_tree.nodes[i].state == splice_state
            })
            .map(|i| i + offset)
            .expect("cyclic tree has an open anchor leaf");
        // Swap contents so references to `host` now see the cycle root.
        let host_expansion = nodes[host].expansion.take();
        nodes.swap(host, grafted_root);
        nodes[open_leaf].expansion = host_expansion;
        // After the swap the node at `grafted_root` is the old host (open);
        // it is now unreachable, which recount ignores.
        let _ = reserve_open.take();
        reserve_open = open_state.map(|s| (s, 1));
    }

    let tree = DerivationTree { nodes, root };
    debug_assert_eq!(&tree.recount(g), d);
    match open_state {
        None => debug_assert!(tree.open_leaves().is_empty()),
        Some(s) => {
            let open = tree.open_leaves();
            debug_assert_eq!(open.len(), 1);
            debug_assert_eq!(tree.nodes[open[0]].state, s);
        }
    }
    Ok(tree)
}

fn remaining_produces(g: &Grammar, remaining: &RunMultiset, state: usize) -> bool {
    remaining.counts.iter().enumerate().any(|(i, &c)| {
        c > 0 && g.transitions()[i].targets.contains(&state)
    })
}

/// The sub-multiset of `remaining` reachable from `s`; by the Euler balance
/// of the remainder it is a cycle from `s`.
fn remainder_component(g: &Grammar, remaining: &RunMultiset, s: usize) -> RunMultiset {
    let mut states = BTreeSet::new();
    states.insert(s);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for (i, &c) in remaining.counts.iter().enumerate() {
            if c > 0 && g.transitions()[i].source == u {
                for &t in &g.transitions()[i].targets {
                    if states.insert(t) {
                        queue.push_back(t);
                    }
                }
            }
        }
    }
    let mut comp = RunMultiset::zeros(remaining.counts.len());
    for (i, &c) in remaining.counts.iter().enumerate() {
        if c > 0 && states.contains(&g.transitions()[i].source) {
            comp.counts[i] = c;
        }
    }
    comp
}

/// Splits a regular run into a small skeleton plus extracted simple cycles.
///
/// While some transition is used at least `1 + n*|delta|` times, a cycle over
/// transitions with multiplicity greater than `n` passes through it; `n`
/// copies are extracted at a time (batched), preserving the support. The
/// returned skeleton satisfies `||D1|| <= n*|delta|`.
pub fn skeleton_decompose(
    g: &Grammar,
    d: &RunMultiset,
    n: u64,
) -> Result<(RunMultiset, Vec<(RunMultiset, u64)>)> {
    if !g.is_regular() {
        return Err(Error::NotRegular);
    }
    if classify(g, d) != RunClass::Run {
        return Err(Error::InvalidRun("skeleton_decompose needs a valid run".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("skeleton_decompose: n must be positive".into()));
    }
    let delta = g.transitions().len() as u64;
    let threshold = 1 + n * delta;
    let mut rest = d.clone();
    let mut extracted: Vec<(RunMultiset, u64)> = Vec::new();

    loop {
        let fat = (0..rest.counts.len()).find(|&i| rest.counts[i] >= threshold);
        let Some(fat) = fat else { break };
        let cycle = find_cycle_through(g, &rest, fat, n)?;
        // The batched multiplicity keeps every count on the cycle >= 1.
        let mut k = u64::MAX;
        for (i, &c) in cycle.counts.iter().enumerate() {
            if c > 0 {
                k = k.min((rest.counts[i] - 1) / (n * c));
            }
        }
        let k = k.max(1);
        for (i, &c) in cycle.counts.iter().enumerate() {
            rest.counts[i] -= c * n * k;
        }
        extracted.push((cycle, n * k));
    }

    debug_assert!(rest.max_count() <= n * delta);
    debug_assert_eq!(rest.support(g), d.support(g));
    debug_assert_eq!(classify(g, &rest), RunClass::Run);
    Ok((rest, extracted))
}

/// Finds a simple graph cycle through `fat`'s target using only transitions
/// with multiplicity above `n` (BFS, so a shortest one).
fn find_cycle_through(g: &Grammar, d: &RunMultiset, fat: usize, n: u64) -> Result<RunMultiset> {
    let tau = &g.transitions()[fat];
    let t = *tau
        .targets
        .first()
        .ok_or_else(|| Error::InvalidRun("final transition cannot be fat".into()))?;
    let goal = tau.source;
    // BFS from t to goal over transitions with count > n.
    let mut prev: BTreeMap<usize, usize> = BTreeMap::new(); // state -> transition used to reach it
    let mut queue = VecDeque::from([t]);
    let mut seen = BTreeSet::from([t]);
    while let Some(u) = queue.pop_front() {
        if u == goal {
            break;
        }
        for (i, &c) in d.counts.iter().enumerate() {
            if c > n && g.transitions()[i].source == u {
                if let Some(&w) = g.transitions()[i].targets.first() {
                    if seen.insert(w) {
                        prev.insert(w, i);
                        queue.push_back(w);
                    }
                }
            }
        }
    }
    if t != goal && !prev.contains_key(&goal) {
        return Err(Error::InvalidRun(
            "no cycle over heavy transitions; multiset is not a valid run".into(),
        ));
    }
    let mut cycle = RunMultiset::zeros(d.counts.len());
    cycle.counts[fat] += 1;
    let mut cur = goal;
    while cur != t {
        let i = prev[&cur];
        cycle.counts[i] += 1;
        cur = g.transitions()[i].source;
    }
    Ok(cycle)
}

/// Per-state sets of short-cycle outputs with representative cycles.
///
/// A cycle is short when its size is at most `|S|`; for regular grammars they
/// are closed walks, enumerated by dynamic programming over
/// (length, current state, accumulated output).
#[derive(Clone, Debug)]
pub struct CycleOutputSet {
    /// For each state, output -> representative cycle multiset.
    pub per_state: Vec<BTreeMap<LetterVec, RunMultiset>>,
}

impl CycleOutputSet {
    pub fn outputs(&self, s: usize) -> BTreeSet<LetterVec> {
        self.per_state[s].keys().cloned().collect()
    }
}

pub fn short_cycle_outputs(g: &Grammar) -> Result<CycleOutputSet> {
    if !g.is_regular() {
        return Err(Error::NotRegular);
    }
    let ns = g.num_states();
    let mut per_state = Vec::with_capacity(ns);
    for s in 0..ns {
        // frontier: (state, output) -> walk as transition multiset
        let mut frontier: BTreeMap<(usize, LetterVec), RunMultiset> = BTreeMap::new();
        frontier.insert(
            (s, LetterVec::zeros(g.dim())),
            RunMultiset::zeros(g.transitions().len()),
        );
        let mut found: BTreeMap<LetterVec, RunMultiset> = BTreeMap::new();
        for _step in 0..ns {
            let mut next: BTreeMap<(usize, LetterVec), RunMultiset> = BTreeMap::new();
            for ((u, out), walk) in &frontier {
                for (i, tr) in g.transitions().iter().enumerate() {
                    if tr.source != *u {
                        continue;
                    }
                    let Some(&w) = tr.targets.first() else { continue };
                    let nout = out.add(&tr.output);
                    let mut nwalk = walk.clone();
                    nwalk.counts[i] += 1;
                    if w == s {
                        found.entry(nout.clone()).or_insert_with(|| nwalk.clone());
                    }
                    next.entry((w, nout)).or_insert(nwalk);
                }
            }
            frontier = next;
        }
        per_state.push(found);
    }
    Ok(CycleOutputSet { per_state })
}

/// Outputs of cyclic derivations from `s` of size at most `size_bound`, for
/// arbitrary commutative grammars.
///
/// Enumerates cyclic derivation trees: a main branch from `s` back to an open
/// `s` leaf, side branches fully closed. States may repeat at most twice per
/// branch, which keeps every simple cycle while pruning the search.
pub fn cycle_outputs_cfg(g: &Grammar, s: usize, size_bound: u64) -> BTreeSet<LetterVec> {
    if size_bound == 0 {
        return BTreeSet::new();
    }
    let closed = closed_outputs_sized(g, size_bound);
    let mut results = BTreeSet::new();
    // DFS over the main branch.
    let mut occurrences = vec![0u32; g.num_states()];
    occurrences[s] += 1;
    main_branch(
        g,
        s,
        s,
        size_bound,
        &LetterVec::zeros(g.dim()),
        &mut occurrences,
        &closed,
        &mut results,
    );
    results.remove(&LetterVec::zeros(g.dim()));
    results
}

#[allow(clippy::too_many_arguments)]
fn main_branch(
    g: &Grammar,
    anchor: usize,
    cur: usize,
    budget: u64,
    out: &LetterVec,
    occurrences: &mut Vec<u32>,
    closed: &ClosedSized,
    results: &mut BTreeSet<LetterVec>,
) {
    if budget == 0 {
        return;
    }
    for tr in g.transitions().iter().filter(|t| t.source == cur) {
        // Choose which target continues the main branch.
        for (pick, &next) in tr.targets.iter().enumerate() {
            if occurrences[next] >= 2 && next != anchor {
                continue;
            }
            // Close the remaining targets with complete derivations.
            let others: Vec<usize> = tr
                .targets
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != pick)
                .map(|(_, &t)| t)
                .collect();
            let side = closed.combinations(&others, budget - 1);
            for (side_out, side_size) in side {
                let total = out.add(&tr.output).add(&side_out);
                let used = 1 + side_size;
                if next == anchor {
                    results.insert(total.clone());
                }
                if used < budget {
                    occurrences[next] += 1;
                    main_branch(
                        g,
                        anchor,
                        next,
                        budget - used,
                        &total,
                        occurrences,
                        closed,
                        results,
                    );
                    occurrences[next] -= 1;
                }
            }
        }
    }
}

/// Minimal sizes of closed-derivation outputs per state, up to a size budget.
struct ClosedSized {
    /// per state: output -> minimal derivation size
    per_state: Vec<BTreeMap<LetterVec, u64>>,
}

impl ClosedSized {
    /// All ways to close the given states within the budget: output ->
    /// minimal total size.
    fn combinations(&self, states: &[usize], budget: u64) -> BTreeMap<LetterVec, u64> {
        let dim = self
            .per_state
            .first()
            .and_then(|m| m.keys().next())
            .map(|v| v.dim())
            .unwrap_or(0);
        let mut acc: BTreeMap<LetterVec, u64> = BTreeMap::new();
        acc.insert(LetterVec::zeros(dim), 0);
        for &s in states {
            let mut next: BTreeMap<LetterVec, u64> = BTreeMap::new();
            for (o1, sz1) in &acc {
                for (o2, sz2) in &self.per_state[s] {
                    let sz = sz1 + sz2;
                    if sz <= budget {
                        let o = o1.add(o2);
                        next.entry(o)
                            .and_modify(|e| *e = (*e).min(sz))
                            .or_insert(sz);
                    }
                }
            }
            acc = next;
        }
        acc
    }
}

fn closed_outputs_sized(g: &Grammar, budget: u64) -> ClosedSized {
    let ns = g.num_states();
    let mut per_state: Vec<BTreeMap<LetterVec, u64>> = vec![BTreeMap::new(); ns];
    // Fixpoint: closed(s) gains out(tau) + sum of closed(targets).
    loop {
        let mut changed = false;
        for tr in g.transitions() {
            let mut combos: BTreeMap<LetterVec, u64> = BTreeMap::new();
            combos.insert(tr.output.clone(), 1);
            let mut feasible = true;
            for &t in &tr.targets {
                if per_state[t].is_empty() {
                    feasible = false;
                    break;
                }
                let mut next: BTreeMap<LetterVec, u64> = BTreeMap::new();
                for (o1, sz1) in &combos {
                    for (o2, sz2) in &per_state[t] {
                        let sz = sz1 + sz2;
                        if sz <= budget {
                            let o = o1.add(o2);
                            next.entry(o)
                                .and_modify(|e| *e = (*e).min(sz))
                                .or_insert(sz);
                        }
                    }
                }
                combos = next;
            }
            if !feasible {
                continue;
            }
            for (o, sz) in combos {
                match per_state[tr.source].get(&o) {
                    Some(&old) if old <= sz => {}
                    _ => {
                        per_state[tr.source].insert(o, sz);
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    ClosedSized { per_state }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn star_grammar() -> Grammar {
        Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap()
    }

    #[test]
    fn classify_run() {
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![2, 1]);
        assert_eq!(classify(&g, &d), RunClass::Run);
        assert_eq!(d.out(&g).entries(), &[2]);
    }

    #[test]
    fn classify_cycle() {
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![1, 0]);
        assert_eq!(classify(&g, &d), RunClass::CycleFrom(0));
    }

    #[test]
    fn classify_disconnected() {
        let g = Grammar::parse("alphabet: b\nstart: S\nS -> 0\nT -> b T\n").unwrap();
        // S->0 once plus the unreachable T loop once.
        let d = RunMultiset::from_counts(vec![1, 1]);
        let t = g.state_index("T").unwrap();
        assert_eq!(
            classify(&g, &d),
            RunClass::Invalid(InvalidReason::Disconnected { state: t })
        );
    }

    #[test]
    fn classify_zero_invalid() {
        let g = star_grammar();
        let d = RunMultiset::zeros(2);
        assert_eq!(classify(&g, &d), RunClass::Invalid(InvalidReason::Empty));
    }

    #[test]
    fn reconstruct_linear_run() {
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![1, 1]);
        let tree = reconstruct_derivation(&g, &d).unwrap();
        assert_eq!(tree.recount(&g), d);
        assert!(tree.open_leaves().is_empty());
    }

    #[test]
    fn reconstruct_binary_tree() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a T T | 0\nT -> 0\n").unwrap();
        let d = RunMultiset::from_counts(vec![1, 0, 2]);
        assert_eq!(classify(&g, &d), RunClass::Run);
        let tree = reconstruct_derivation(&g, &d).unwrap();
        assert_eq!(tree.recount(&g), d);
    }

    #[test]
    fn reconstruct_needs_splice() {
        // Greedy from S can close the tree early (S -> 0), leaving the loop
        // S -> a S unused; splicing repairs it.
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![3, 1]);
        let tree = reconstruct_derivation(&g, &d).unwrap();
        assert_eq!(tree.recount(&g), d);
    }

    #[test]
    fn reconstruct_cycle_tree() {
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![2, 0]);
        let tree = reconstruct_derivation(&g, &d).unwrap();
        assert_eq!(tree.recount(&g), d);
        let open = tree.open_leaves();
        assert_eq!(open.len(), 1);
        assert_eq!(tree.node(open[0]).state, g.start());
    }

    #[test]
    fn skeleton_below_threshold() {
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![1, 1]);
        let (d1, cycles) = skeleton_decompose(&g, &d, 1).unwrap();
        assert_eq!(d1, d);
        assert!(cycles.is_empty());
    }

    #[test]
    fn skeleton_extracts_loop() {
        let g = star_grammar();
        let d = RunMultiset::from_counts(vec![100, 1]);
        let (d1, cycles) = skeleton_decompose(&g, &d, 1).unwrap();
        let mut recomposed = d1.clone();
        for (c, k) in &cycles {
            recomposed.add_scaled(c, *k);
        }
        assert_eq!(recomposed, d);
        assert_eq!(d1.support(&g), d.support(&g));
        assert!(d1.max_count() <= g.transitions().len() as u64);
        assert!(!cycles.is_empty());
    }

    #[test]
    fn skeleton_two_loops() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | b S | 0\n").unwrap();
        let d = RunMultiset::from_counts(vec![50, 50, 1]);
        let (d1, cycles) = skeleton_decompose(&g, &d, 1).unwrap();
        let mut recomposed = d1.clone();
        for (c, k) in &cycles {
            recomposed.add_scaled(c, *k);
            assert!(matches!(classify(&g, c), RunClass::CycleFrom(_)));
        }
        assert_eq!(recomposed, d);
        assert_eq!(d1.support(&g), d.support(&g));
        let outs: BTreeSet<LetterVec> = cycles.iter().map(|(c, _)| c.out(&g)).collect();
        assert_eq!(outs.len(), 2);
    }

    #[test]
    fn short_cycles_two_state() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a T\nT -> b S\n").unwrap();
        let ys = short_cycle_outputs(&g).unwrap();
        let want: BTreeSet<LetterVec> = [LetterVec::from_vec(vec![1, 1])].into();
        assert_eq!(ys.outputs(0), want);
        assert_eq!(ys.outputs(1), want);
    }

    #[test]
    fn short_cycles_single_loop() {
        let g = star_grammar();
        let ys = short_cycle_outputs(&g).unwrap();
        assert_eq!(ys.outputs(0), [LetterVec::from_vec(vec![1])].into());
    }

    #[test]
    fn short_cycles_acyclic_state() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | a T | 0\nT -> 0\n").unwrap();
        let ys = short_cycle_outputs(&g).unwrap();
        // Walks of length <= 2 around the S loop give outputs 1 and 2.
        let want: BTreeSet<LetterVec> =
            [LetterVec::from_vec(vec![1]), LetterVec::from_vec(vec![2])].into();
        assert_eq!(ys.outputs(0), want);
        assert!(ys.outputs(1).is_empty());
    }

    #[test]
    fn cfg_cycles_regular_agree() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a T | 0\nT -> b S\n").unwrap();
        let ys = short_cycle_outputs(&g).unwrap();
        for s in 0..g.num_states() {
            let cfg = cycle_outputs_cfg(&g, s, g.num_states() as u64);
            assert_eq!(cfg, ys.outputs(s), "state {s}");
        }
    }

    #[test]
    fn cfg_cycles_no_recursion() {
        let g = Grammar::parse("alphabet: a\nstart: A\nA -> B B\nB -> a\n").unwrap();
        assert!(cycle_outputs_cfg(&g, 0, 4).is_empty());
    }

    #[test]
    fn cfg_cycles_branching() {
        // S -> a S S | 0: a cycle from S closes one child with S -> 0.
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S S | 0\n").unwrap();
        let outs = cycle_outputs_cfg(&g, 0, 4);
        assert!(outs.contains(&LetterVec::from_vec(vec![1])));
    }

    #[test]
    fn cfg_cycles_monotone_in_bound() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S S | b T | 0\nT -> a S\n")
            .unwrap();
        for s in 0..g.num_states() {
            let small = cycle_outputs_cfg(&g, s, 3);
            let large = cycle_outputs_cfg(&g, s, 6);
            assert!(small.is_subset(&large));
        }
    }
}
