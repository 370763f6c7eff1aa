//! Independent brute-force ground truth: exhaustive Parikh-image enumeration
//! within boxes, reference inclusion, and random valid-run sampling.
//!
//! Nothing here shares code with the decision procedures it checks.

use std::collections::{BTreeSet, VecDeque};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::Grammar;
use crate::runs::RunMultiset;
use crate::vecmath::LetterVec;
use crate::{Error, Result};

/// A finite per-letter box of output vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OutputBox {
    pub lo: LetterVec,
    pub hi: LetterVec,
}

impl OutputBox {
    /// `[0..hi]` per letter.
    pub fn nonneg(hi: LetterVec) -> Self {
        OutputBox {
            lo: LetterVec::zeros(hi.dim()),
            hi,
        }
    }

    pub fn signed(lo: LetterVec, hi: LetterVec) -> Self {
        assert_eq!(lo.dim(), hi.dim());
        OutputBox { lo, hi }
    }

    /// Uniform box `[0..n]^d`.
    pub fn cube(dim: usize, n: i64) -> Self {
        OutputBox::nonneg(LetterVec::from_vec(vec![n; dim]))
    }

    pub fn dim(&self) -> usize {
        self.hi.dim()
    }

    pub fn contains(&self, v: &LetterVec) -> bool {
        self.lo.leq(v) && v.leq(&self.hi)
    }

    pub fn point_count(&self) -> u64 {
        let mut n: u64 = 1;
        for i in 0..self.dim() {
            let side = (self.hi.entry(i) - self.lo.entry(i) + 1).max(0) as u64;
            n = n.saturating_mul(side);
        }
        n
    }
}

/// Options for the enumeration of grammars with negative outputs.
#[derive(Clone, Debug)]
pub struct EnumerateOpts {
    /// Extra slack, per letter, allowed on intermediate partial outputs
    /// beyond the requested box.
    pub slack: i64,
    /// Cap on explored configurations before giving up with an error.
    pub config_cap: usize,
}

impl Default for EnumerateOpts {
    fn default() -> Self {
        EnumerateOpts {
            slack: 64,
            config_cap: 4_000_000,
        }
    }
}

/// Exactly `{v in out(G) : v within box}`.
///
/// Nonnegative grammars use a monotone fixpoint over box-clipped output sets,
/// which is complete for the box since outputs only grow along a derivation.
/// Grammars with negative outputs fall back to an exhaustive derivation
/// search whose partial sums are confined to the box inflated by
/// `opts.slack`; the configuration cap fires as an error rather than
/// truncating silently.
pub fn enumerate_out(g: &Grammar, bx: &OutputBox) -> Result<BTreeSet<LetterVec>> {
    enumerate_out_opts(g, bx, &EnumerateOpts::default())
}

pub fn enumerate_out_opts(
    g: &Grammar,
    bx: &OutputBox,
    opts: &EnumerateOpts,
) -> Result<BTreeSet<LetterVec>> {
    if bx.dim() != g.dim() {
        return Err(Error::DimensionMismatch("enumerate_out box".into()));
    }
    if !g.has_negative_output() {
        let hi = bx.hi.clone();
        let closed = closed_fixpoint(g, &hi);
        Ok(closed[g.start()]
            .iter()
            .filter(|v| bx.contains(v))
            .cloned()
            .collect())
    } else if g.is_regular() {
        Ok(regular_signed_walk(g, bx, opts))
    } else {
        config_search(g, bx, opts)
    }
}

/// Per-state sets of complete-derivation outputs, clipped to `[0..hi]`.
/// Semi-naive fixpoint: each round only combines with at least one point
/// discovered in the previous round.
fn closed_fixpoint(g: &Grammar, hi: &LetterVec) -> Vec<BTreeSet<LetterVec>> {
    let ns = g.num_states();
    let mut full: Vec<BTreeSet<LetterVec>> = vec![BTreeSet::new(); ns];
    let mut delta: Vec<BTreeSet<LetterVec>> = vec![BTreeSet::new(); ns];

    // Seed with target-free transitions.
    for tr in g.transitions() {
        if tr.targets.is_empty() && tr.output.leq(hi) {
            delta[tr.source].insert(tr.output.clone());
        }
    }
    for s in 0..ns {
        for v in &delta[s] {
            full[s].insert(v.clone());
        }
    }

    while delta.iter().any(|d| !d.is_empty()) {
        let mut pending: Vec<BTreeSet<LetterVec>> = vec![BTreeSet::new(); ns];
        for tr in g.transitions() {
            if tr.targets.is_empty() {
                continue;
            }
            let k = tr.targets.len();
            // Position of the first factor drawn from the delta set; earlier
            // factors come from old = full \ delta, later from full.
            for j in 0..k {
                let mut acc: Vec<LetterVec> = vec![tr.output.clone()];
                let mut dead = false;
                for (i, &t) in tr.targets.iter().enumerate() {
                    let factor: Vec<&LetterVec> = if i < j {
                        full[t].iter().filter(|v| !delta[t].contains(*v)).collect()
                    } else if i == j {
                        delta[t].iter().collect()
                    } else {
                        full[t].iter().collect()
                    };
                    if factor.is_empty() {
                        dead = true;
                        break;
                    }
                    let mut next = Vec::new();
                    for a in &acc {
                        for f in &factor {
                            let s = a.add(f);
                            if s.leq(hi) {
                                next.push(s);
                            }
                        }
                    }
                    next.sort_unstable();
                    next.dedup();
                    acc = next;
                    if acc.is_empty() {
                        dead = true;
                        break;
                    }
                }
                if dead {
                    continue;
                }
                for v in acc {
                    if !full[tr.source].contains(&v) {
                        pending[tr.source].insert(v);
                    }
                }
            }
        }
        delta = pending;
        for s in 0..ns {
            for v in &delta[s] {
                full[s].insert(v.clone());
            }
        }
    }
    full
}

/// Regular grammars with signed outputs: walk the state graph keeping the
/// accumulated output inside the slack-inflated box.
fn regular_signed_walk(g: &Grammar, bx: &OutputBox, opts: &EnumerateOpts) -> BTreeSet<LetterVec> {
    let lo = LetterVec::from_vec(bx.lo.entries().iter().map(|&x| x - opts.slack).collect());
    let hi = LetterVec::from_vec(bx.hi.entries().iter().map(|&x| x + opts.slack).collect());
    let mut seen: BTreeSet<(usize, LetterVec)> = BTreeSet::new();
    let mut out = BTreeSet::new();
    let start = (g.start(), LetterVec::zeros(g.dim()));
    let mut queue = VecDeque::from([start.clone()]);
    seen.insert(start);
    while let Some((s, acc)) = queue.pop_front() {
        for tr in g.transitions().iter().filter(|t| t.source == s) {
            let nxt = acc.add(&tr.output);
            if !(lo.leq(&nxt) && nxt.leq(&hi)) {
                continue;
            }
            match tr.targets.first() {
                None => {
                    if bx.contains(&nxt) {
                        out.insert(nxt);
                    }
                }
                Some(&t) => {
                    let key = (t, nxt);
                    if !seen.contains(&key) {
                        seen.insert(key.clone());
                        queue.push_back(key);
                    }
                }
            }
        }
    }
    out
}

/// Exhaustive derivation search for general grammars with negative outputs.
/// Configurations are (multiset of open states, accumulated output); the
/// lowest-numbered open state is always expanded next, which is complete
/// because derivation order is irrelevant commutatively.
fn config_search(
    g: &Grammar,
    bx: &OutputBox,
    opts: &EnumerateOpts,
) -> Result<BTreeSet<LetterVec>> {
    let lo = LetterVec::from_vec(bx.lo.entries().iter().map(|&x| x - opts.slack).collect());
    let hi = LetterVec::from_vec(bx.hi.entries().iter().map(|&x| x + opts.slack).collect());
    let mut out = BTreeSet::new();
    let mut seen: BTreeSet<(Vec<usize>, LetterVec)> = BTreeSet::new();
    let root = (vec![g.start()], LetterVec::zeros(g.dim()));
    seen.insert(root.clone());
    let mut stack = vec![root];
    while let Some((open, acc)) = stack.pop() {
        if seen.len() > opts.config_cap {
            return Err(Error::CapExceeded(format!(
                "enumeration explored more than {} configurations",
                opts.config_cap
            )));
        }
        match open.first() {
            None => {
                if bx.contains(&acc) {
                    out.insert(acc);
                }
            }
            Some(&s) => {
                for tr in g.transitions().iter().filter(|t| t.source == s) {
                    let nxt = acc.add(&tr.output);
                    if !(lo.leq(&nxt) && nxt.leq(&hi)) {
                        continue;
                    }
                    let mut nopen: Vec<usize> = open[1..].to_vec();
                    nopen.extend_from_slice(&tr.targets);
                    nopen.sort_unstable();
                    let key = (nopen, nxt);
                    if seen.insert(key.clone()) {
                        stack.push(key);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Seeded random walk from the start state to a final transition, returned as
/// a run multiset. The walk is steered by shortest-distance-to-final so it
/// always terminates within `max_len` when a final transition is reachable.
pub fn sample_run(g: &Grammar, max_len: usize, seed: u64) -> Result<RunMultiset> {
    if !g.is_regular() {
        return Err(Error::NotRegular);
    }
    // dist[s]: fewest transitions to finish a run from s.
    let ns = g.num_states();
    let mut dist = vec![usize::MAX; ns];
    let mut changed = true;
    while changed {
        changed = false;
        for tr in g.transitions() {
            let cand = match tr.targets.first() {
                None => 1,
                Some(&t) => dist[t].saturating_add(1),
            };
            if cand < dist[tr.source] {
                dist[tr.source] = cand;
                changed = true;
            }
        }
    }
    if dist[g.start()] > max_len {
        return Err(Error::NoFinalReachable(max_len));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = RunMultiset::zeros(g.transitions().len());
    let mut state = g.start();
    let mut budget = max_len;
    loop {
        let feasible: Vec<usize> = g
            .transitions()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.source == state)
            .filter(|(_, t)| match t.targets.first() {
                None => budget >= 1,
                Some(&n) => dist[n].saturating_add(1) <= budget,
            })
            .map(|(i, _)| i)
            .collect();
        debug_assert!(!feasible.is_empty());
        let pick = feasible[rng.gen_range(0..feasible.len())];
        d.set(pick, d.count(pick) + 1);
        budget -= 1;
        match g.transitions()[pick].targets.first() {
            None => break,
            Some(&n) => state = n,
        }
    }
    Ok(d)
}

/// Reference inclusion on a box: enumerate both images and compare.
/// The first counterexample in lexicographic order is returned.
pub fn include_on_box(
    g1: &Grammar,
    g2: &Grammar,
    bx: &OutputBox,
) -> Result<(bool, Option<LetterVec>)> {
    let a = enumerate_out(g1, bx)?;
    let b = enumerate_out(g2, bx)?;
    for v in &a {
        if !b.contains(v) {
            return Ok((false, Some(v.clone())));
        }
    }
    Ok((true, None))
}

/// Exact convex hull vertices of a 2D integer point set, counterclockwise
/// starting from the lexicographically smallest point. Collinear boundary
/// points are not vertices.
pub fn convex_hull(points: &[(i64, i64)]) -> Vec<(i64, i64)> {
    let mut pts: Vec<(i64, i64)> = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i128 {
        (a.0 - o.0) as i128 * (b.1 - o.1) as i128 - (a.1 - o.1) as i128 * (b.0 - o.0) as i128
    }
    let mut lower: Vec<(i64, i64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(i64, i64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Convex hull helper for letter vectors over a two-letter alphabet.
pub fn convex_hull_vectors(points: &BTreeSet<LetterVec>) -> Vec<(i64, i64)> {
    let pts: Vec<(i64, i64)> = points.iter().map(|v| (v.entry(0), v.entry(1))).collect();
    convex_hull(&pts)
}

/// Memoized per-state sets of complete-derivation outputs; exposed for the
/// membership modules that need per-state ground truth.
pub fn closed_outputs(g: &Grammar, hi: &LetterVec) -> Result<Vec<BTreeSet<LetterVec>>> {
    if g.has_negative_output() {
        return Err(Error::NegativeEntry("closed_outputs input".into()));
    }
    Ok(closed_fixpoint(g, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::runs::{classify, RunClass};

    fn lv(v: &[i64]) -> LetterVec {
        LetterVec::from_vec(v.to_vec())
    }

    #[test]
    fn enumerate_unary_star() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        let out = enumerate_out(&g, &OutputBox::cube(1, 5)).unwrap();
        let want: BTreeSet<LetterVec> = (0..=5).map(|n| lv(&[n])).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn enumerate_even_cycle() {
        // Runs alternate S -> a T -> a S; only even counts close at S.
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a T | 0\nT -> a S\n").unwrap();
        let out = enumerate_out(&g, &OutputBox::cube(1, 7)).unwrap();
        let want: BTreeSet<LetterVec> = [0, 2, 4, 6].iter().map(|&n| lv(&[n])).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn enumerate_cfg_doubling() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S S | 0\n").unwrap();
        let out = enumerate_out(&g, &OutputBox::cube(1, 6)).unwrap();
        let want: BTreeSet<LetterVec> = (0..=6).map(|n| lv(&[n])).collect();
        assert_eq!(out, want);
    }

    #[test]
    fn enumerate_monotone_in_box() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | b T | 0\nT -> a b S\n")
            .unwrap();
        let small = enumerate_out(&g, &OutputBox::cube(2, 4)).unwrap();
        let large = enumerate_out(&g, &OutputBox::cube(2, 8)).unwrap();
        let restricted: BTreeSet<LetterVec> = large
            .iter()
            .filter(|v| OutputBox::cube(2, 4).contains(v))
            .cloned()
            .collect();
        assert_eq!(small, restricted);
    }

    #[test]
    fn enumerate_negative_regular() {
        let g = Grammar::parse(
            "alphabet: a\nstart: S\nflags: allow-negative\nS -> a S | a^-1 S | 0\n",
        )
        .unwrap();
        let bx = OutputBox::signed(lv(&[-3]), lv(&[3]));
        let out = enumerate_out(&g, &bx).unwrap();
        assert_eq!(out.len(), 7);
    }

    #[test]
    fn enumerate_negative_cfg() {
        let g = Grammar::parse(
            "alphabet: x\nstart: S\nflags: allow-negative\nS -> x x A | 0\nA -> x^-1\n",
        )
        .unwrap();
        let out = enumerate_out(&g, &OutputBox::cube(1, 5)).unwrap();
        let want: BTreeSet<LetterVec> = [lv(&[0]), lv(&[1])].into();
        assert_eq!(out, want);
    }

    #[test]
    fn sample_run_deterministic_and_valid() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | b T | 0\nT -> a S\n")
            .unwrap();
        let d1 = sample_run(&g, 40, 7).unwrap();
        let d2 = sample_run(&g, 40, 7).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(classify(&g, &d1), RunClass::Run);
    }

    #[test]
    fn sample_run_single_path() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a T\nT -> 0\n").unwrap();
        let d = sample_run(&g, 10, 3).unwrap();
        assert_eq!(d.counts(), &[1, 1]);
    }

    #[test]
    fn sample_run_unreachable_final() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S\nT -> 0\n").unwrap();
        assert!(matches!(
            sample_run(&g, 50, 0),
            Err(Error::NoFinalReachable(50))
        ));
    }

    #[test]
    fn include_on_box_basic() {
        let astar = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | 0\n").unwrap();
        let all = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | b S | 0\n").unwrap();
        let bx = OutputBox::cube(2, 4);
        assert_eq!(include_on_box(&astar, &all, &bx).unwrap(), (true, None));
        let (holds, ce) = include_on_box(&all, &astar, &bx).unwrap();
        assert!(!holds);
        assert_eq!(ce.unwrap(), lv(&[0, 1]));
    }

    #[test]
    fn hull_square() {
        let pts: Vec<(i64, i64)> = (0..=3)
            .flat_map(|x| (0..=3).map(move |y| (x, y)))
            .collect();
        let hull = convex_hull(&pts);
        assert_eq!(hull, vec![(0, 0), (3, 0), (3, 3), (0, 3)]);
    }
}
