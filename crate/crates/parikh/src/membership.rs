//! Membership and disjointness deciders.
//!
//! Regular membership follows the run-plus-cycles decomposition: a vector is
//! generated iff it splits into the output of a bounded run and a nonnegative
//! combination of short-cycle outputs anchored in the run's support. The
//! decider computes run outputs by dynamic programming over
//! (state, visited-support, clipped output) and then either closes over the
//! query box with cycle additions (small boxes) or solves exactly over
//! linearly independent cycle tuples (large queries). Every positive answer
//! carries a witness that recomposes to a valid run.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use crate::grammar::Grammar;
use crate::runs::{classify, short_cycle_outputs, RunClass, RunMultiset};
use crate::vecmath::{rank, LetterVec};
use crate::{Error, Result};

/// Volume guard for the per-box closure tables.
const CLOSURE_GUARD: u128 = 4_000_000;
/// Volume guard for run-output DP tables (nodes = states * masks * volume).
const DP_GUARD: u128 = 16_000_000;
/// Cap on enumerated linearly independent cycle tuples.
const TUPLE_GUARD: usize = 200_000;

/// A positive membership certificate: a base run plus cycles with
/// multiplicities; their recomposition is a run with the queried output.
#[derive(Clone, Debug)]
pub struct Witness {
    pub base: RunMultiset,
    pub cycles: Vec<(RunMultiset, u64)>,
}

impl Witness {
    pub fn recompose(&self) -> RunMultiset {
        let mut d = self.base.clone();
        for (c, k) in &self.cycles {
            d.add_scaled(c, *k);
        }
        d
    }
}

#[derive(Clone, Debug)]
pub struct MembershipAnswer {
    pub member: bool,
    pub witness: Option<Witness>,
}

impl MembershipAnswer {
    fn no() -> Self {
        MembershipAnswer {
            member: false,
            witness: None,
        }
    }

    fn yes(w: Witness) -> Self {
        MembershipAnswer {
            member: true,
            witness: Some(w),
        }
    }
}

/// Concrete instantiations of the polynomial bounds for regular grammars:
/// cycle-transfer threshold `L = d! * |S|^d + 1`, run multiplicity bound
/// `L_run = |delta| + L * (cycle output count)`, and the per-letter output
/// bound `L_out = |delta| * L_run` that a bounded run can reach.
#[derive(Clone, Copy, Debug)]
pub struct RegularBounds {
    pub l: i64,
    pub l_run: i64,
    pub l_out: i64,
}

pub fn regular_bounds(g: &Grammar) -> RegularBounds {
    let d = g.dim() as i64;
    let s = g.num_states() as i64;
    let delta = g.transitions().len() as i64;
    let mut fact: i64 = 1;
    for i in 1..=d {
        fact = fact.saturating_mul(i);
    }
    let mut s_pow: i64 = 1;
    let mut outs_pow: i64 = 1;
    let per_letter_range = if g.allow_negative() { 2 * s + 1 } else { s + 1 };
    for _ in 0..d {
        s_pow = s_pow.saturating_mul(s);
        outs_pow = outs_pow.saturating_mul(per_letter_range);
    }
    let l = fact.saturating_mul(s_pow).saturating_add(1);
    let l_run = delta.saturating_add(l.saturating_mul(outs_pow));
    let l_out = delta.saturating_mul(l_run);
    RegularBounds { l, l_run, l_out }
}

/// Mixed-radix encoding of output vectors within `[lo..hi]`.
#[derive(Clone, Debug)]
struct BoxCodec {
    lo: Vec<i64>,
    side: Vec<u128>,
    volume: u128,
}

impl BoxCodec {
    fn new(lo: &LetterVec, hi: &LetterVec) -> Self {
        let mut side = Vec::with_capacity(lo.dim());
        let mut volume: u128 = 1;
        for i in 0..lo.dim() {
            let s = (hi.entry(i) - lo.entry(i) + 1).max(0) as u128;
            side.push(s);
            volume = volume.saturating_mul(s);
        }
        BoxCodec {
            lo: lo.entries().to_vec(),
            side,
            volume,
        }
    }

    fn contains(&self, v: &LetterVec) -> bool {
        (0..v.dim()).all(|i| {
            let x = v.entry(i) - self.lo[i];
            x >= 0 && (x as u128) < self.side[i]
        })
    }

    fn encode(&self, v: &LetterVec) -> usize {
        let mut idx: u128 = 0;
        for i in 0..v.dim() {
            idx = idx * self.side[i] + (v.entry(i) - self.lo[i]) as u128;
        }
        idx as usize
    }

    fn decode(&self, mut idx: usize, dim: usize) -> LetterVec {
        let mut out = vec![0i64; dim];
        for i in (0..dim).rev() {
            let s = self.side[i] as usize;
            out[i] = (idx % s) as i64 + self.lo[i];
            idx /= s;
        }
        LetterVec::from_vec(out)
    }
}

const NO_PRED: u32 = u32::MAX;

/// Run-output DP over (state, cover mask, output index).
///
/// `anchor_sets` lists state sets that the run must touch as sources; the
/// cover mask tracks which sets are already hit. Finals are collected only at
/// full cover. Backpointers allow exact reconstruction of one witness run per
/// reachable output.
struct RunOutputs {
    codec: BoxCodec,
    num_masks: usize,
    pred_node: Vec<u32>,
    pred_tau: Vec<u16>,
    /// output -> (last node, final transition)
    finals: BTreeMap<LetterVec, (u32, u16)>,
}

impl RunOutputs {
    fn node(&self, state: usize, mask: usize, out_idx: usize) -> usize {
        (state * self.num_masks + mask) * self.codec.volume as usize + out_idx
    }

    fn run_for(&self, g: &Grammar, out: &LetterVec) -> RunMultiset {
        let &(mut node, tau) = self.finals.get(out).expect("known final output");
        let mut d = RunMultiset::zeros(g.transitions().len());
        d.set(tau as usize, 1);
        while self.pred_node[node as usize] != NO_PRED {
            let t = self.pred_tau[node as usize] as usize;
            d.set(t, d.count(t) + 1);
            node = self.pred_node[node as usize];
        }
        d
    }
}

fn run_outputs(
    g: &Grammar,
    lo: &LetterVec,
    hi: &LetterVec,
    anchor_sets: &[u64],
) -> Result<RunOutputs> {
    let codec = BoxCodec::new(lo, hi);
    let num_states = g.num_states();
    let num_masks = 1usize << anchor_sets.len();
    let nodes = codec
        .volume
        .saturating_mul(num_states as u128)
        .saturating_mul(num_masks as u128);
    if nodes > DP_GUARD {
        return Err(Error::InstanceTooLarge(format!(
            "run-output table needs {nodes} entries (limit {DP_GUARD}); \
             shrink the query or the partial-sum bound"
        )));
    }
    let nodes = nodes as usize;
    let mut dp = RunOutputs {
        codec,
        num_masks,
        pred_node: vec![NO_PRED; nodes],
        pred_tau: vec![0; nodes],
        finals: BTreeMap::new(),
    };
    let zero = LetterVec::zeros(g.dim());
    if !dp.codec.contains(&zero) {
        return Ok(dp);
    }
    let full = num_masks - 1;
    let start_node = dp.node(g.start(), 0, dp.codec.encode(&zero));
    let mut visited = vec![false; nodes];
    visited[start_node] = true;
    let mut queue = VecDeque::from([(g.start(), 0usize, zero)]);
    while let Some((state, mask, out)) = queue.pop_front() {
        let cur_node = dp.node(state, mask, dp.codec.encode(&out));
        let new_mask = mask
            | anchor_sets
                .iter()
                .enumerate()
                .filter(|(_, set)| *set & (1u64 << state) != 0)
                .fold(0usize, |m, (i, _)| m | (1 << i));
        for (ti, tr) in g.transitions().iter().enumerate() {
            if tr.source != state {
                continue;
            }
            let nout = out.add(&tr.output);
            if !dp.codec.contains(&nout) {
                continue;
            }
            match tr.targets.first() {
                None => {
                    if new_mask == full && !dp.finals.contains_key(&nout) {
                        dp.finals.insert(nout.clone(), (cur_node as u32, ti as u16));
                    }
                }
                Some(&next) => {
                    let nn = dp.node(next, new_mask, dp.codec.encode(&nout));
                    if !visited[nn] {
                        visited[nn] = true;
                        dp.pred_node[nn] = cur_node as u32;
                        dp.pred_tau[nn] = ti as u16;
                        queue.push_back((next, new_mask, nout));
                    }
                }
            }
        }
    }
    Ok(dp)
}

/// Nonzero short-cycle outputs with representatives, grouped per output.
struct CycleCatalog {
    /// output -> (anchor states bitset, per-anchor representative)
    by_output: BTreeMap<LetterVec, (u64, BTreeMap<usize, RunMultiset>)>,
}

fn cycle_catalog(g: &Grammar) -> Result<CycleCatalog> {
    let ys = short_cycle_outputs(g)?;
    let mut by_output: BTreeMap<LetterVec, (u64, BTreeMap<usize, RunMultiset>)> = BTreeMap::new();
    for s in 0..g.num_states() {
        for (out, rep) in &ys.per_state[s] {
            if out.is_zero() {
                continue;
            }
            let e = by_output
                .entry(out.clone())
                .or_insert_with(|| (0, BTreeMap::new()));
            e.0 |= 1 << s;
            e.1.insert(s, rep.clone());
        }
    }
    Ok(CycleCatalog { by_output })
}

/// Per-grammar, per-box decider for nonnegative regular grammars.
///
/// Precomputes run outputs keyed by exact support and the cycle-closure of
/// the box, so that every query inside the box is a lookup. The one-shot
/// [`member_regular`] delegates here whenever the query box is small.
pub struct BoxedRegularDecider {
    g: Grammar,
    box_hi: LetterVec,
    dp: RunOutputs,
    /// support mask -> run outputs with exactly that support
    outs_by_support: BTreeMap<u64, BTreeSet<LetterVec>>,
    /// support mask -> cycle list (output, anchor, representative)
    cycles_by_support: BTreeMap<u64, Vec<(LetterVec, usize, RunMultiset)>>,
    /// support mask -> closure backpointers over the box
    closures: BTreeMap<u64, Vec<ClosureBack>>,
    box_codec: BoxCodec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ClosureBack {
    Unreached,
    Base,
    Step { prev: u32, cycle: u16 },
}

impl BoxedRegularDecider {
    pub fn new(g: &Grammar, box_hi: &LetterVec) -> Result<Self> {
        if !g.is_regular() {
            return Err(Error::NotRegular);
        }
        if g.has_negative_output() {
            return Err(Error::NegativeEntry("grammar outputs".into()));
        }
        if !box_hi.is_nonneg() {
            return Err(Error::NegativeEntry("query box".into()));
        }
        if g.num_states() > 20 {
            return Err(Error::InstanceTooLarge(
                "support-indexed decider handles at most 20 states".into(),
            ));
        }
        let bounds = regular_bounds(g);
        let zero = LetterVec::zeros(g.dim());
        let dp_cap = LetterVec::from_vec(
            box_hi
                .entries()
                .iter()
                .map(|&k| k.min(bounds.l_out))
                .collect(),
        );
        let box_codec = BoxCodec::new(&zero, box_hi);
        if box_codec.volume > CLOSURE_GUARD {
            return Err(Error::InstanceTooLarge(format!(
                "closure box volume {} exceeds {CLOSURE_GUARD}",
                box_codec.volume
            )));
        }

        let dp = run_outputs_support_indexed(g, &zero, &dp_cap)?;

        let mut outs_by_support: BTreeMap<u64, BTreeSet<LetterVec>> = BTreeMap::new();
        for (out, &(_, _, mask)) in &dp.finals_masked {
            outs_by_support.entry(mask).or_default().insert(out.clone());
        }

        let catalog = cycle_catalog(g)?;
        let mut cycles_by_support: BTreeMap<u64, Vec<(LetterVec, usize, RunMultiset)>> =
            BTreeMap::new();
        let mut closures = BTreeMap::new();
        for (&mask, outs) in &outs_by_support {
            let mut cycles = Vec::new();
            for (y, (anchors, reps)) in &catalog.by_output {
                if anchors & mask != 0 && y.leq(box_hi) {
                    let anchor = (0..g.num_states())
                        .find(|s| (anchors & mask) & (1 << s) != 0)
                        .unwrap();
                    cycles.push((y.clone(), anchor, reps[&anchor].clone()));
                }
            }
            let mut table = vec![ClosureBack::Unreached; box_codec.volume as usize];
            let mut queue = VecDeque::new();
            for o in outs {
                let idx = box_codec.encode(o);
                if table[idx] == ClosureBack::Unreached {
                    table[idx] = ClosureBack::Base;
                    queue.push_back(o.clone());
                }
            }
            while let Some(p) = queue.pop_front() {
                let pidx = box_codec.encode(&p);
                for (ci, (y, _, _)) in cycles.iter().enumerate() {
                    let q = p.add(y);
                    if !q.leq(box_hi) {
                        continue;
                    }
                    let qidx = box_codec.encode(&q);
                    if table[qidx] == ClosureBack::Unreached {
                        table[qidx] = ClosureBack::Step {
                            prev: pidx as u32,
                            cycle: ci as u16,
                        };
                        queue.push_back(q);
                    }
                }
            }
            cycles_by_support.insert(mask, cycles);
            closures.insert(mask, table);
        }

        Ok(BoxedRegularDecider {
            g: g.clone(),
            box_hi: box_hi.clone(),
            dp: dp.inner,
            outs_by_support,
            cycles_by_support,
            closures,
            box_codec,
        })
    }

    /// All vectors of the box that belong to the Parikh image.
    pub fn members_in_box(&self) -> BTreeSet<LetterVec> {
        let mut all = BTreeSet::new();
        for table in self.closures.values() {
            for (idx, back) in table.iter().enumerate() {
                if *back != ClosureBack::Unreached {
                    all.insert(self.box_codec.decode(idx, self.g.dim()));
                }
            }
        }
        all
    }

    pub fn member(&self, k: &LetterVec) -> Result<MembershipAnswer> {
        if !k.is_nonneg() {
            return Err(Error::NegativeEntry("query vector".into()));
        }
        if !k.leq(&self.box_hi) {
            return Err(Error::InvalidInput(
                "query outside the decider's box".into(),
            ));
        }
        let kidx = self.box_codec.encode(k);
        for (mask, table) in &self.closures {
            if table[kidx] == ClosureBack::Unreached {
                continue;
            }
            // Trace cycle additions back to a base run output.
            let mut counts: BTreeMap<u16, u64> = BTreeMap::new();
            let mut idx = kidx;
            loop {
                match table[idx] {
                    ClosureBack::Base => break,
                    ClosureBack::Step { prev, cycle } => {
                        *counts.entry(cycle).or_insert(0) += 1;
                        idx = prev as usize;
                    }
                    ClosureBack::Unreached => unreachable!(),
                }
            }
            let base_out = self.box_codec.decode(idx, self.g.dim());
            debug_assert!(self.outs_by_support[mask].contains(&base_out));
            let base = self.dp.run_for(&self.g, &base_out);
            let cycles: Vec<(RunMultiset, u64)> = counts
                .into_iter()
                .map(|(ci, n)| {
                    let (_, _, rep) = &self.cycles_by_support[mask][ci as usize];
                    (rep.clone(), n)
                })
                .collect();
            let w = Witness { base, cycles };
            debug_assert_eq!(classify(&self.g, &w.recompose()), RunClass::Run);
            debug_assert_eq!(&w.recompose().out(&self.g), k);
            return Ok(MembershipAnswer::yes(w));
        }
        Ok(MembershipAnswer::no())
    }
}

/// Variant of the run-output DP that records, for every reachable final
/// output, the visited-source mask of the first run found (its support).
struct SupportIndexedOutputs {
    inner: RunOutputs,
    /// output -> (node, final transition, support mask)
    finals_masked: BTreeMap<LetterVec, (u32, u16, u64)>,
}

fn run_outputs_support_indexed(
    g: &Grammar,
    lo: &LetterVec,
    hi: &LetterVec,
) -> Result<SupportIndexedOutputs> {
    let codec = BoxCodec::new(lo, hi);
    let num_states = g.num_states();
    let num_masks = 1usize << num_states;
    let nodes = codec
        .volume
        .saturating_mul(num_states as u128)
        .saturating_mul(num_masks as u128);
    if nodes > DP_GUARD {
        return Err(Error::InstanceTooLarge(format!(
            "support-indexed table needs {nodes} entries (limit {DP_GUARD})"
        )));
    }
    let nodes = nodes as usize;
    let mut dp = RunOutputs {
        codec,
        num_masks,
        pred_node: vec![NO_PRED; nodes],
        pred_tau: vec![0; nodes],
        finals: BTreeMap::new(),
    };
    let mut finals_masked: BTreeMap<LetterVec, (u32, u16, u64)> = BTreeMap::new();
    let zero = LetterVec::zeros(g.dim());
    if dp.codec.contains(&zero) {
        let mut visited = vec![false; nodes];
        let start_node = dp.node(g.start(), 0, dp.codec.encode(&zero));
        visited[start_node] = true;
        let mut queue = VecDeque::from([(g.start(), 0usize, zero)]);
        while let Some((state, mask, out)) = queue.pop_front() {
            let cur_node = dp.node(state, mask, dp.codec.encode(&out));
            let new_mask = mask | (1usize << state);
            for (ti, tr) in g.transitions().iter().enumerate() {
                if tr.source != state {
                    continue;
                }
                let nout = out.add(&tr.output);
                if !dp.codec.contains(&nout) {
                    continue;
                }
                match tr.targets.first() {
                    None => {
                        finals_masked
                            .entry(nout.clone())
                            .or_insert((cur_node as u32, ti as u16, new_mask as u64));
                        dp.finals
                            .entry(nout)
                            .or_insert((cur_node as u32, ti as u16));
                    }
                    Some(&next) => {
                        let nn = dp.node(next, new_mask, dp.codec.encode(&nout));
                        if !visited[nn] {
                            visited[nn] = true;
                            dp.pred_node[nn] = cur_node as u32;
                            dp.pred_tau[nn] = ti as u16;
                            queue.push_back((next, new_mask, nout));
                        }
                    }
                }
            }
        }
    }
    Ok(SupportIndexedOutputs {
        inner: dp,
        finals_masked,
    })
}

/// Decides `k in out(G)` for a regular grammar with nonnegative outputs.
///
/// Small query boxes go through [`BoxedRegularDecider`]; larger queries use
/// the exact tuple route: run outputs capped by the polynomial bound, then a
/// nonnegative solve over every linearly independent tuple of short-cycle
/// outputs, with the anchoring re-checked by a covering run.
pub fn member_regular(g: &Grammar, k: &LetterVec) -> Result<MembershipAnswer> {
    if !g.is_regular() {
        return Err(Error::NotRegular);
    }
    if g.has_negative_output() {
        return Err(Error::NegativeEntry("grammar outputs".into()));
    }
    if !k.is_nonneg() {
        return Err(Error::NegativeEntry("query vector".into()));
    }
    if k.dim() != g.dim() {
        return Err(Error::DimensionMismatch("query vector".into()));
    }
    let zero = LetterVec::zeros(g.dim());
    let box_codec = BoxCodec::new(&zero, k);
    if box_codec.volume <= CLOSURE_GUARD && g.num_states() <= 20 {
        return BoxedRegularDecider::new(g, k)?.member(k);
    }
    let bounds = regular_bounds(g);
    let dp_cap =
        LetterVec::from_vec(k.entries().iter().map(|&x| x.min(bounds.l_out)).collect());
    member_tuple_route(g, k, &zero, &dp_cap)
}

/// Options for the integer-output membership decider.
#[derive(Clone, Debug, Default)]
pub struct IntegerMemberOpts {
    /// Per-letter bound on partial run outputs explored by the DP. Defaults
    /// to `max(24, 2*||K|| + 2*|S|)`, clipped by the polynomial bound.
    pub partial_bound: Option<i64>,
}

/// Decides `k in out(G)` for a regular grammar whose outputs may be negative.
///
/// Same algorithm as [`member_regular`]; the DP coordinates range over
/// `[-c..c]` per letter. Completeness holds for witnesses whose partial run
/// outputs stay within `c`; the bound is configurable.
pub fn member_regular_integer(
    g: &Grammar,
    k: &LetterVec,
    opts: &IntegerMemberOpts,
) -> Result<MembershipAnswer> {
    if !g.is_regular() {
        return Err(Error::NotRegular);
    }
    if k.dim() != g.dim() {
        return Err(Error::DimensionMismatch("query vector".into()));
    }
    let bounds = regular_bounds(g);
    let default_c = 24i64.max(2 * k.linf() + 2 * g.num_states() as i64);
    let c = opts
        .partial_bound
        .unwrap_or(default_c)
        .min(bounds.l_out)
        .max(k.linf());
    let lo = LetterVec::from_vec(vec![-c; g.dim()]);
    let hi = LetterVec::from_vec(vec![c; g.dim()]);
    member_tuple_route(g, k, &lo, &hi)
}

/// Shared tuple route: run-output DP without anchoring, direct hit check,
/// then independent cycle tuples with an exact nonnegative solve and a lazy
/// anchored re-check.
fn member_tuple_route(
    g: &Grammar,
    k: &LetterVec,
    lo: &LetterVec,
    hi: &LetterVec,
) -> Result<MembershipAnswer> {
    let plain = run_outputs(g, lo, hi, &[])?;
    if plain.finals.contains_key(k) {
        let base = plain.run_for(g, k);
        let w = Witness {
            base,
            cycles: Vec::new(),
        };
        debug_assert_eq!(classify(g, &w.recompose()), RunClass::Run);
        return Ok(MembershipAnswer::yes(w));
    }

    let catalog = cycle_catalog(g)?;
    let ys: Vec<(&LetterVec, u64)> = catalog
        .by_output
        .iter()
        .map(|(y, (anchors, _))| (y, *anchors))
        .collect();
    let tuples = independent_tuples(&ys, g.dim())?;

    // Cache anchored DPs by the anchor-set key.
    let mut anchored_cache: HashMap<Vec<u64>, RunOutputs> = HashMap::new();

    for (out, _) in &plain.finals {
        let rem = k.sub(out);
        // With nonnegative cycle outputs only, a negative remainder can never
        // be covered; in the signed case every remainder stays eligible.
        if !g.allow_negative() && !rem.is_nonneg() {
            continue;
        }
        if rem.is_zero() {
            continue; // direct case already handled
        }
        for tuple in &tuples {
            let cols: Vec<LetterVec> = tuple.iter().map(|&(y, _)| ys[y].0.clone()).collect();
            let Some(alpha) = solve_nonneg_small(&cols, &rem) else {
                continue;
            };
            let used: Vec<usize> = tuple
                .iter()
                .enumerate()
                .filter(|(i, _)| alpha[*i] > 0)
                .map(|(_, &(y, _))| y)
                .collect();
            if used.is_empty() {
                continue;
            }
            let mut anchor_sets: Vec<u64> = used.iter().map(|&y| ys[y].1).collect();
            anchor_sets.sort_unstable();
            anchor_sets.dedup();
            let anchored = match anchored_cache.entry(anchor_sets.clone()) {
                std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(run_outputs(g, lo, hi, &anchor_sets)?)
                }
            };
            if !anchored.finals.contains_key(out) {
                continue;
            }
            let base = anchored.run_for(g, out);
            let support = base.support(g);
            let mut cycles = Vec::new();
            for (i, &(yi, _)) in tuple.iter().enumerate() {
                if alpha[i] == 0 {
                    continue;
                }
                let (_, reps) = &catalog.by_output[ys[yi].0];
                let anchor = reps
                    .keys()
                    .find(|s| support.contains(s))
                    .expect("anchored run touches a representative state");
                cycles.push((reps[anchor].clone(), alpha[i]));
            }
            let w = Witness { base, cycles };
            debug_assert_eq!(classify(g, &w.recompose()), RunClass::Run);
            debug_assert_eq!(&w.recompose().out(g), k);
            return Ok(MembershipAnswer::yes(w));
        }
    }
    Ok(MembershipAnswer::no())
}

/// Enumerates linearly independent tuples of distinct cycle outputs, sizes 1
/// through `d`, in lexicographic order of index sequences.
fn independent_tuples(ys: &[(&LetterVec, u64)], d: usize) -> Result<Vec<Vec<(usize, u64)>>> {
    let mut tuples: Vec<Vec<(usize, u64)>> = Vec::new();
    let mut stack: Vec<Vec<usize>> = (0..ys.len()).map(|i| vec![i]).collect();
    stack.reverse();
    while let Some(t) = stack.pop() {
        let cols: Vec<LetterVec> = t.iter().map(|&i| ys[i].0.clone()).collect();
        if rank(&cols) != cols.len() {
            continue;
        }
        tuples.push(t.iter().map(|&i| (i, ys[i].1)).collect());
        if tuples.len() > TUPLE_GUARD {
            return Err(Error::InstanceTooLarge(format!(
                "more than {TUPLE_GUARD} independent cycle tuples"
            )));
        }
        if t.len() < d {
            for j in (t[t.len() - 1] + 1..ys.len()).rev() {
                let mut ext = t.clone();
                ext.push(j);
                stack.push(ext);
            }
        }
    }
    Ok(tuples)
}

/// Exact nonnegative-integer solve for a small independent column set
/// (dimension and column count at most 4), in 128-bit arithmetic.
///
/// Kept separate from the general rational solver so the two can be
/// cross-checked against each other.
fn solve_nonneg_small(cols: &[LetterVec], b: &LetterVec) -> Option<Vec<u64>> {
    let d = b.dim();
    let n = cols.len();
    debug_assert!(n <= d && d <= 4);
    // Select n rows with a nonzero n x n determinant, first subset in
    // lexicographic order.
    let rows = select_rows(cols, d, n)?;
    let det = minor_det(cols, &rows, None, b);
    debug_assert_ne!(det, 0);
    let mut alpha = Vec::with_capacity(n);
    for j in 0..n {
        let num = minor_det(cols, &rows, Some(j), b);
        if num % det != 0 {
            return None;
        }
        let a = num / det;
        if a < 0 {
            return None;
        }
        alpha.push(a as u64);
    }
    // Verify every row, including the unselected ones.
    for r in 0..d {
        let mut acc: i128 = 0;
        for (j, col) in cols.iter().enumerate() {
            acc += col.entry(r) as i128 * alpha[j] as i128;
        }
        if acc != b.entry(r) as i128 {
            return None;
        }
    }
    Some(alpha)
}

fn select_rows(cols: &[LetterVec], d: usize, n: usize) -> Option<Vec<usize>> {
    fn rec(start: usize, d: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in start..d {
            cur.push(i);
            rec(i + 1, d, n, cur, out);
            cur.pop();
        }
    }
    let mut combos = Vec::new();
    rec(0, d, n, &mut Vec::new(), &mut combos);
    combos
        .into_iter()
        .find(|rows| minor_det(cols, rows, None, cols.first().unwrap()) != 0)
}

/// Determinant of the n x n minor given by `rows`, with column `replace`
/// (if any) substituted by `b`.
fn minor_det(cols: &[LetterVec], rows: &[usize], replace: Option<usize>, b: &LetterVec) -> i128 {
    let n = rows.len();
    let entry = |i: usize, j: usize| -> i128 {
        let r = rows[i];
        match replace {
            Some(rj) if rj == j => b.entry(r) as i128,
            _ => cols[j].entry(r) as i128,
        }
    };
    match n {
        0 => 1,
        1 => entry(0, 0),
        2 => entry(0, 0) * entry(1, 1) - entry(0, 1) * entry(1, 0),
        3 => {
            entry(0, 0) * (entry(1, 1) * entry(2, 2) - entry(1, 2) * entry(2, 1))
                - entry(0, 1) * (entry(1, 0) * entry(2, 2) - entry(1, 2) * entry(2, 0))
                + entry(0, 2) * (entry(1, 0) * entry(2, 1) - entry(1, 1) * entry(2, 0))
        }
        4 => {
            // Laplace expansion along the first row.
            let mut acc: i128 = 0;
            for j in 0..n {
                let sub_rows: Vec<usize> = rows[1..].to_vec();
                let sub_cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
                let m3 = {
                    let e = |i: usize, jj: usize| -> i128 {
                        let r = sub_rows[i];
                        let c = sub_cols[jj];
                        match replace {
                            Some(rj) if rj == c => b.entry(r) as i128,
                            _ => cols[c].entry(r) as i128,
                        }
                    };
                    e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1))
                        - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                        + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
                };
                let sign = if j % 2 == 0 { 1 } else { -1 };
                acc += sign * entry(0, j) * m3;
            }
            acc
        }
        _ => unreachable!("solver limited to dimension 4"),
    }
}

/// Decides whether two nonnegative regular grammars have disjoint Parikh
/// images by checking whether 0 lies in the image of `G . H^-1`.
///
/// A non-disjoint verdict carries a common vector, extracted from the
/// witness run's G-side output and re-verified in both grammars.
pub fn disjoint_regular(
    g: &Grammar,
    h: &Grammar,
    opts: &IntegerMemberOpts,
) -> Result<(bool, Option<LetterVec>)> {
    if !g.is_regular() || !h.is_regular() {
        return Err(Error::NotRegular);
    }
    if g.has_negative_output() || h.has_negative_output() {
        return Err(Error::NegativeEntry("disjointness inputs".into()));
    }
    let gh = g.concat_regular(&h.negate_outputs())?;
    let zero = LetterVec::zeros(g.dim());
    let ans = member_regular_integer(&gh, &zero, opts)?;
    match ans.witness {
        None => Ok((true, None)),
        Some(w) => {
            let full = w.recompose();
            let mut common = LetterVec::zeros(g.dim());
            for i in 0..g.transitions().len() {
                let c = full.count(i);
                if c > 0 {
                    common = common.add(&gh.transitions()[i].output.scale(c as i64));
                }
            }
            let in_g = member_regular(g, &common)?;
            let in_h = member_regular(h, &common)?;
            if !in_g.member || !in_h.member {
                return Err(Error::InvalidRun(
                    "disjointness witness failed re-verification".into(),
                ));
            }
            Ok((false, Some(common)))
        }
    }
}

/// Options for the exact context-free membership search.
#[derive(Clone, Debug, Default)]
pub struct CfgMemberOpts {
    /// Cap on open states per configuration.
    pub open_cap: Option<usize>,
    /// Cap on explored configurations.
    pub config_cap: Option<usize>,
}

/// Desk-scale exact membership for commutative context-free grammars with
/// nonnegative outputs.
///
/// Searches derivations as configurations (multiset of open states, output
/// so far), always expanding the lowest-numbered open state; outputs are
/// clipped to the query, which is exact since they only grow. Positive
/// answers return the derivation's transition multiset, verified as a run.
/// The search is exponential by nature; caps fire as explicit errors rather
/// than silently truncating.
pub fn member_cfg(g: &Grammar, k: &LetterVec, opts: &CfgMemberOpts) -> Result<MembershipAnswer> {
    if g.has_negative_output() {
        return Err(Error::NegativeEntry("grammar outputs".into()));
    }
    if !k.is_nonneg() {
        return Err(Error::NegativeEntry("query vector".into()));
    }
    if k.dim() != g.dim() {
        return Err(Error::DimensionMismatch("query vector".into()));
    }
    if g.transitions().len() > 64 {
        return Err(Error::InstanceTooLarge(
            "context-free membership search handles at most 64 transitions".into(),
        ));
    }
    let open_cap = opts
        .open_cap
        .unwrap_or((k.l1() as usize) + 2 * g.num_states() + 4);
    let config_cap = opts.config_cap.unwrap_or(4_000_000);

    // Least letters any complete derivation from each state must emit.
    let min_close = min_closed_l1(g);
    let budget = k.l1();

    type Key = (Vec<usize>, LetterVec);
    let root: Key = (vec![g.start()], LetterVec::zeros(g.dim()));
    let mut parents: HashMap<Key, Option<(Key, usize)>> = HashMap::new();
    parents.insert(root.clone(), None);
    let mut queue = VecDeque::from([root]);
    let mut capped = false;

    while let Some(key) = queue.pop_front() {
        let (open, out) = &key;
        if open.is_empty() {
            if out == k {
                let mut d = RunMultiset::zeros(g.transitions().len());
                let mut cur = key.clone();
                while let Some(Some((parent, tau))) = parents.get(&cur).cloned() {
                    d.set(tau, d.count(tau) + 1);
                    cur = parent;
                }
                debug_assert_eq!(classify(g, &d), RunClass::Run);
                debug_assert_eq!(&d.out(g), k);
                return Ok(MembershipAnswer::yes(Witness {
                    base: d,
                    cycles: Vec::new(),
                }));
            }
            continue;
        }
        let s = open[0];
        for (ti, tr) in g.transitions().iter().enumerate() {
            if tr.source != s {
                continue;
            }
            let nout = out.add(&tr.output);
            if !nout.leq(k) {
                continue;
            }
            let mut nopen: Vec<usize> = open[1..].to_vec();
            nopen.extend_from_slice(&tr.targets);
            nopen.sort_unstable();
            if nopen.len() > open_cap {
                capped = true;
                continue;
            }
            // Feasibility: the open states must still be closable within the
            // remaining letter budget.
            let need: i64 = nopen.iter().map(|&st| min_close[st]).sum();
            if nout.l1().saturating_add(need) > budget {
                continue;
            }
            let nkey = (nopen, nout);
            if !parents.contains_key(&nkey) {
                if parents.len() >= config_cap {
                    return Err(Error::CapExceeded(format!(
                        "membership search exceeded {config_cap} configurations"
                    )));
                }
                parents.insert(nkey.clone(), Some((key.clone(), ti)));
                queue.push_back(nkey);
            }
        }
    }
    if capped {
        return Err(Error::CapExceeded(format!(
            "membership search hit the open-state cap {open_cap} without an answer"
        )));
    }
    Ok(MembershipAnswer::no())
}

/// Least l1 output over complete derivations per state; large sentinel for
/// states that cannot terminate.
fn min_closed_l1(g: &Grammar) -> Vec<i64> {
    const INF: i64 = i64::MAX / 4;
    let mut best = vec![INF; g.num_states()];
    let mut changed = true;
    while changed {
        changed = false;
        for tr in g.transitions() {
            let mut cost = tr.output.l1();
            for &t in &tr.targets {
                cost = cost.saturating_add(best[t]);
            }
            if cost < best[tr.source] {
                best[tr.source] = cost;
                changed = true;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_out, OutputBox};
    use crate::vecmath::solve_nonneg;

    fn lv(v: &[i64]) -> LetterVec {
        LetterVec::from_vec(v.to_vec())
    }

    #[test]
    fn full_plane_grammar() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | b S | 0\n").unwrap();
        for ka in 0..5 {
            for kb in 0..5 {
                let ans = member_regular(&g, &lv(&[ka, kb])).unwrap();
                assert!(ans.member, "({ka},{kb})");
                let w = ans.witness.unwrap();
                assert_eq!(w.recompose().out(&g), lv(&[ka, kb]));
            }
        }
    }

    #[test]
    fn even_cycle_membership() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a T | 0\nT -> a S\n").unwrap();
        assert!(member_regular(&g, &lv(&[4])).unwrap().member);
        assert!(!member_regular(&g, &lv(&[3])).unwrap().member);
        let outs = enumerate_out(&g, &OutputBox::cube(1, 10)).unwrap();
        for n in 0..=10 {
            assert_eq!(
                member_regular(&g, &lv(&[n])).unwrap().member,
                outs.contains(&lv(&[n])),
                "K={n}"
            );
        }
    }

    #[test]
    fn large_unary_query_uses_tuple_route() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a T | 0\nT -> a S\n").unwrap();
        let big_even = 40_000_000i64;
        let ans = member_regular(&g, &lv(&[big_even])).unwrap();
        assert!(ans.member);
        let w = ans.witness.unwrap();
        assert_eq!(w.recompose().out(&g), lv(&[big_even]));
        assert!(!member_regular(&g, &lv(&[big_even + 1])).unwrap().member);
    }

    #[test]
    fn integer_cancel_pair() {
        let g = Grammar::parse(
            "alphabet: a\nstart: S\nflags: allow-negative\nS -> a S | a^-1 S | 0\n",
        )
        .unwrap();
        let ans = member_regular_integer(&g, &lv(&[0]), &Default::default()).unwrap();
        assert!(ans.member);
    }

    #[test]
    fn integer_rejects_unreachable_negative() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        let ans = member_regular_integer(&g, &lv(&[-1]), &Default::default()).unwrap();
        assert!(!ans.member);
    }

    #[test]
    fn integer_concat_even_cancellation() {
        // Even counts of a, concatenated with its own negation: 0 is common.
        let ga = Grammar::parse("alphabet: a\nstart: S\nS -> a T | 0\nT -> a S\n").unwrap();
        let gh = ga.concat_regular(&ga.negate_outputs()).unwrap();
        let ans = member_regular_integer(&gh, &lv(&[0]), &Default::default()).unwrap();
        assert!(ans.member);
        let w = ans.witness.unwrap();
        assert_eq!(w.recompose().out(&gh), lv(&[0]));
    }

    #[test]
    fn disjoint_even_vs_odd() {
        let even = Grammar::parse("alphabet: a\nstart: S\nS -> a T | 0\nT -> a S\n").unwrap();
        let odd = Grammar::parse("alphabet: a\nstart: S\nS -> a T\nT -> a S | 0\n").unwrap();
        let (disjoint, w) = disjoint_regular(&even, &odd, &Default::default()).unwrap();
        assert!(disjoint);
        assert!(w.is_none());
    }

    #[test]
    fn not_disjoint_same_star() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        let (disjoint, w) = disjoint_regular(&g, &g, &Default::default()).unwrap();
        assert!(!disjoint);
        let w = w.unwrap();
        assert!(member_regular(&g, &w).unwrap().member);
    }

    #[test]
    fn disjoint_singletons() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a\n").unwrap();
        let h = Grammar::parse("alphabet: a b\nstart: S\nS -> b\n").unwrap();
        let (disjoint, _) = disjoint_regular(&g, &h, &Default::default()).unwrap();
        assert!(disjoint);
    }

    #[test]
    fn cfg_singleton_language() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> 0\n").unwrap();
        assert!(member_cfg(&g, &lv(&[0]), &Default::default()).unwrap().member);
        assert!(!member_cfg(&g, &lv(&[1]), &Default::default()).unwrap().member);
    }

    #[test]
    fn cfg_doubling() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S S | 0\n").unwrap();
        let ans = member_cfg(&g, &lv(&[2]), &Default::default()).unwrap();
        assert!(ans.member);
        let w = ans.witness.unwrap();
        assert_eq!(w.recompose().out(&g), lv(&[2]));
    }

    #[test]
    fn cfg_agrees_with_oracle_small() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S T | b | 0\nT -> b T | 0\n")
            .unwrap();
        let outs = enumerate_out(&g, &OutputBox::cube(2, 5)).unwrap();
        for ka in 0..=5 {
            for kb in 0..=5 {
                let k = lv(&[ka, kb]);
                assert_eq!(
                    member_cfg(&g, &k, &Default::default()).unwrap().member,
                    outs.contains(&k),
                    "K=({ka},{kb})"
                );
            }
        }
    }

    #[test]
    fn boxed_decider_matches_oracle() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a T | b S | 0\nT -> a S | b T\n")
            .unwrap();
        let hi = lv(&[6, 6]);
        let dec = BoxedRegularDecider::new(&g, &hi).unwrap();
        let outs = enumerate_out(&g, &OutputBox::nonneg(hi.clone())).unwrap();
        assert_eq!(dec.members_in_box(), outs);
    }

    #[test]
    fn small_solver_matches_rational_solver() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let d = rng.gen_range(1..=3usize);
            let n = rng.gen_range(1..=d);
            let cols: Vec<LetterVec> = (0..n)
                .map(|_| LetterVec::from_vec((0..d).map(|_| rng.gen_range(-6..=6i64)).collect()))
                .collect();
            if rank(&cols) != cols.len() {
                continue;
            }
            let b = LetterVec::from_vec((0..d).map(|_| rng.gen_range(-12..=12i64)).collect());
            let fast = solve_nonneg_small(&cols, &b);
            let slow = solve_nonneg(&cols, &b, None).unwrap();
            assert_eq!(fast, slow, "cols={cols:?} b={b:?}");
        }
    }
}
