//! The commutative-grammar data model, its text format, and the grammar
//! transformations used by disjointness checking and the convex-polygon
//! construction.
//!
//! A grammar produces multisets: each transition consumes its source state
//! and produces a multiset of letters (the output vector) plus a multiset of
//! states (the targets). Word order never exists. Token convention in the
//! text format: lowercase-initial identifiers are letters, uppercase-initial
//! identifiers are states.

use std::collections::BTreeMap;

use crate::vecmath::LetterVec;
use crate::{Error, Result};

/// One transition `source -> output targets`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Transition {
    pub source: usize,
    pub output: LetterVec,
    /// Target state multiset, kept sorted.
    pub targets: Vec<usize>,
}

impl Transition {
    pub fn is_final(&self) -> bool {
        self.targets.is_empty()
    }
}

/// A commutative grammar: alphabet, states, initial state, transitions.
///
/// Invariant: every state is the source of at least one transition.
#[derive(Clone, Debug)]
pub struct Grammar {
    letters: Vec<String>,
    states: Vec<String>,
    start: usize,
    transitions: Vec<Transition>,
    allow_negative: bool,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        if self.letters != other.letters
            || self.start != other.start
            || self.allow_negative != other.allow_negative
            || self.states != other.states
        {
            return false;
        }
        let mut a = self.transitions.clone();
        let mut b = other.transitions.clone();
        a.sort();
        b.sort();
        a == b
    }
}

impl Eq for Grammar {}

impl Grammar {
    pub fn new(
        letters: Vec<String>,
        states: Vec<String>,
        start: usize,
        transitions: Vec<Transition>,
        allow_negative: bool,
    ) -> Result<Self> {
        let g = Grammar {
            letters,
            states,
            start,
            transitions,
            allow_negative,
        };
        g.check_invariants()?;
        Ok(g)
    }

    fn check_invariants(&self) -> Result<()> {
        if self.start >= self.states.len() {
            return Err(Error::InvalidInput("start state out of range".into()));
        }
        for t in &self.transitions {
            if t.source >= self.states.len() {
                return Err(Error::InvalidInput("transition source out of range".into()));
            }
            if t.output.dim() != self.letters.len() {
                return Err(Error::DimensionMismatch("transition output".into()));
            }
            if t.targets.iter().any(|&s| s >= self.states.len()) {
                return Err(Error::InvalidInput("transition target out of range".into()));
            }
            if !self.allow_negative && !t.output.is_nonneg() {
                return Err(Error::NegativeEntry(
                    "transition output (grammar does not allow negative outputs)".into(),
                ));
            }
        }
        for s in 0..self.states.len() {
            if !self.transitions.iter().any(|t| t.source == s) {
                return Err(Error::InvalidInput(format!(
                    "state {} has no transition",
                    self.states[s]
                )));
            }
        }
        Ok(())
    }

    pub fn letters(&self) -> &[String] {
        &self.letters
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.letters.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn allow_negative(&self) -> bool {
        self.allow_negative
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn letter_name(&self, l: usize) -> &str {
        &self.letters[l]
    }

    pub fn letter_index(&self, name: &str) -> Option<usize> {
        self.letters.iter().position(|l| l == name)
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    /// Regular: every transition has at most one target.
    pub fn is_regular(&self) -> bool {
        self.transitions.iter().all(|t| t.targets.len() <= 1)
    }

    /// Limited form: `|output| <= 1` with nonnegative entries and at most two
    /// targets on every transition.
    pub fn is_limited(&self) -> bool {
        self.transitions
            .iter()
            .all(|t| t.output.is_nonneg() && t.output.l1() <= 1 && t.targets.len() <= 2)
    }

    pub fn has_negative_output(&self) -> bool {
        self.transitions.iter().any(|t| !t.output.is_nonneg())
    }

    /// Renders a Parikh vector using this grammar's letter names, `a=3,b=5`.
    pub fn format_vector(&self, v: &LetterVec) -> String {
        let parts: Vec<String> = self
            .letters
            .iter()
            .enumerate()
            .filter(|(i, _)| v.entry(*i) != 0)
            .map(|(i, name)| format!("{}={}", name, v.entry(i)))
            .collect();
        if parts.is_empty() {
            "0".to_string()
        } else {
            parts.join(",")
        }
    }

    /// Parses `a=3,b=5` (omitted letters are zero) or a JSON object.
    pub fn parse_vector(&self, text: &str) -> Result<LetterVec> {
        let text = text.trim();
        let mut v = LetterVec::zeros(self.dim());
        if text.is_empty() || text == "0" {
            return Ok(v);
        }
        if text.starts_with('{') {
            let obj: BTreeMap<String, i64> = serde_json::from_str(text)?;
            for (name, count) in obj {
                let i = self.letter_index(&name).ok_or_else(|| {
                    Error::InvalidInput(format!("undeclared letter {name} in vector"))
                })?;
                v.set(i, count);
            }
            return Ok(v);
        }
        for part in text.split(',') {
            let (name, count) = part.split_once('=').ok_or_else(|| {
                Error::InvalidInput(format!("bad vector component {part:?}, expected letter=count"))
            })?;
            let i = self.letter_index(name.trim()).ok_or_else(|| {
                Error::InvalidInput(format!("undeclared letter {} in vector", name.trim()))
            })?;
            let n: i64 = count
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad count {count:?} in vector")))?;
            v.set(i, n);
        }
        Ok(v)
    }

    /// Parses the grammar file format.
    pub fn parse(text: &str) -> Result<Grammar> {
        Parser::new(text).parse()
    }

    /// Serializes back to the file format; `parse(serialize(g)) == g`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str("alphabet:");
        for l in &self.letters {
            out.push(' ');
            out.push_str(l);
        }
        out.push('\n');
        out.push_str(&format!("start: {}\n", self.states[self.start]));
        if self.allow_negative {
            out.push_str("flags: allow-negative\n");
        }
        // Group transitions by source, in order of first appearance.
        let mut order: Vec<usize> = Vec::new();
        for t in &self.transitions {
            if !order.contains(&t.source) {
                order.push(t.source);
            }
        }
        for s in order {
            let alts: Vec<String> = self
                .transitions
                .iter()
                .filter(|t| t.source == s)
                .map(|t| self.format_rhs(t))
                .collect();
            out.push_str(&format!("{} -> {}\n", self.states[s], alts.join(" | ")));
        }
        out
    }

    fn format_rhs(&self, t: &Transition) -> String {
        let mut items: Vec<String> = Vec::new();
        for (i, name) in self.letters.iter().enumerate() {
            let k = t.output.entry(i);
            if k == 1 {
                items.push(name.clone());
            } else if k != 0 {
                items.push(format!("{name}^{k}"));
            }
        }
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &s in &t.targets {
            *counts.entry(s).or_insert(0) += 1;
        }
        for (s, k) in counts {
            if k == 1 {
                items.push(self.states[s].clone());
            } else {
                items.push(format!("{}^{}", self.states[s], k));
            }
        }
        if items.is_empty() {
            "0".to_string()
        } else {
            items.join(" ")
        }
    }

    /// Transforms a general-form grammar (nonnegative outputs) into limited
    /// form with the same Parikh image, chaining long right-hand sides
    /// through fresh states.
    ///
    /// Fresh states are named `<source>'1`, `<source>'2`, ... skipping any
    /// name already taken, so normalization never collides.
    pub fn normalize(&self) -> Result<Grammar> {
        if self.has_negative_output() {
            return Err(Error::NegativeEntry("normalize input output".into()));
        }
        let mut states = self.states.clone();
        let mut transitions: Vec<Transition> = Vec::new();
        let mut fresh_counter: BTreeMap<usize, usize> = BTreeMap::new();

        for t in &self.transitions {
            // Letters first, then target states, consumed left to right.
            let mut letters: Vec<usize> = Vec::new();
            for i in 0..self.dim() {
                for _ in 0..t.output.entry(i) {
                    letters.push(i);
                }
            }
            let mut targets = t.targets.clone();
            targets.sort_unstable();

            let mut cur = t.source;
            loop {
                if letters.len() <= 1 && targets.len() <= 2 && (letters.is_empty() || targets.len() <= 1 || true) {
                    // Fits limited form directly: |a| <= 1 and |t| <= 2.
                    if letters.len() <= 1 && targets.len() <= 2 {
                        let mut out = LetterVec::zeros(self.dim());
                        if let Some(&l) = letters.first() {
                            out.set(l, 1);
                        }
                        transitions.push(Transition {
                            source: cur,
                            output: out,
                            targets: targets.clone(),
                        });
                        break;
                    }
                }
                // Peel one item off and chain through a fresh state.
                let counter = fresh_counter.entry(t.source).or_insert(0);
                *counter += 1;
                let mut name = format!("{}'{}", self.states[t.source], counter);
                while states.contains(&name) {
                    *counter += 1;
                    name = format!("{}'{}", self.states[t.source], counter);
                }
                states.push(name);
                let next = states.len() - 1;
                if !letters.is_empty() {
                    let l = letters.remove(0);
                    let mut out = LetterVec::zeros(self.dim());
                    out.set(l, 1);
                    transitions.push(Transition {
                        source: cur,
                        output: out,
                        targets: vec![next],
                    });
                } else {
                    let s = targets.remove(0);
                    transitions.push(Transition {
                        source: cur,
                        output: LetterVec::zeros(self.dim()),
                        targets: {
                            let mut v = vec![s, next];
                            v.sort_unstable();
                            v
                        },
                    });
                }
                cur = next;
            }
        }

        Grammar::new(self.letters.clone(), states, self.start, transitions, false)
    }

    /// Negates every output entry; the result generates exactly the negated
    /// Parikh image. Involution.
    pub fn negate_outputs(&self) -> Grammar {
        let transitions = self
            .transitions
            .iter()
            .map(|t| Transition {
                source: t.source,
                output: t.output.neg(),
                targets: t.targets.clone(),
            })
            .collect();
        Grammar {
            letters: self.letters.clone(),
            states: self.states.clone(),
            start: self.start,
            transitions,
            allow_negative: true,
        }
    }

    /// Concatenation of two regular grammars: every final transition of
    /// `self` is redirected to `other`'s start state, so the result generates
    /// the pointwise sum of the two Parikh images.
    pub fn concat_regular(&self, other: &Grammar) -> Result<Grammar> {
        if !self.is_regular() || !other.is_regular() {
            return Err(Error::NotRegular);
        }
        if self.letters != other.letters {
            return Err(Error::DimensionMismatch(
                "concat_regular: grammars must share the alphabet".into(),
            ));
        }
        let mut states = self.states.clone();
        let mut other_index = Vec::with_capacity(other.states.len());
        for name in &other.states {
            let mut fresh = name.clone();
            let mut k = 1;
            while states.contains(&fresh) {
                k += 1;
                fresh = format!("{name}'{k}");
            }
            states.push(fresh);
            other_index.push(states.len() - 1);
        }
        let mut transitions: Vec<Transition> = Vec::new();
        for t in &self.transitions {
            let targets = if t.is_final() {
                vec![other_index[other.start]]
            } else {
                t.targets.clone()
            };
            transitions.push(Transition {
                source: t.source,
                output: t.output.clone(),
                targets,
            });
        }
        for t in &other.transitions {
            transitions.push(Transition {
                source: other_index[t.source],
                output: t.output.clone(),
                targets: t.targets.iter().map(|&s| other_index[s]).collect(),
            });
        }
        Grammar::new(
            self.letters.clone(),
            states,
            self.start,
            transitions,
            self.allow_negative || other.allow_negative,
        )
    }

    /// Topological order of the state dependency graph (source -> targets),
    /// or an error naming a state on a cycle.
    fn topo_order(&self) -> Result<Vec<usize>> {
        let n = self.states.len();
        let mut indeg = vec![0usize; n];
        let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        for t in &self.transitions {
            for &tgt in &t.targets {
                edges[t.source].push(tgt);
                indeg[tgt] += 1;
            }
        }
        let mut queue: Vec<usize> = (0..n).filter(|&s| indeg[s] == 0).collect();
        let mut order = Vec::new();
        while let Some(s) = queue.pop() {
            order.push(s);
            for &tgt in &edges[s] {
                indeg[tgt] -= 1;
                if indeg[tgt] == 0 {
                    queue.push(tgt);
                }
            }
        }
        if order.len() != n {
            let bad = (0..n).find(|&s| indeg[s] > 0).unwrap();
            return Err(Error::CyclicDependency(self.states[bad].clone()));
        }
        Ok(order)
    }

    /// Minimum net output per (state, letter) over complete derivations.
    /// Only defined for acyclic grammars.
    fn min_net_outputs(&self, order: &[usize]) -> Vec<LetterVec> {
        let n = self.states.len();
        let mut min_out: Vec<Option<LetterVec>> = vec![None; n];
        // Process in reverse topological order: targets before sources.
        for &s in order.iter().rev() {
            let mut best: Option<LetterVec> = None;
            for t in self.transitions.iter().filter(|t| t.source == s) {
                let mut net = t.output.clone();
                for &tgt in &t.targets {
                    net = net.add(min_out[tgt].as_ref().expect("topological order"));
                }
                best = Some(match best {
                    None => net,
                    Some(b) => LetterVec::from_vec(
                        (0..self.dim())
                            .map(|i| b.entry(i).min(net.entry(i)))
                            .collect(),
                    ),
                });
            }
            min_out[s] = best;
        }
        min_out.into_iter().map(|v| v.unwrap()).collect()
    }

    /// Removes negative output entries from an acyclic grammar whose start
    /// state never derives a negative total, preserving the Parikh image.
    ///
    /// Whenever a non-initial state can derive a net `-a` for some letter,
    /// that letter is added `a` times to each of the state's transitions and
    /// subtracted once per right-hand-side occurrence of the state.
    pub fn eliminate_negative(&self) -> Result<Grammar> {
        let order = self.topo_order()?;
        let mut g = self.clone();
        g.allow_negative = true;

        // One pass in reverse topological order settles every state: after a
        // state is fixed its minimum net output is zero or positive, so fixes
        // only propagate upward.
        loop {
            let mins = g.min_net_outputs(&order);
            // Check the start state first: it must never go net negative.
            for l in 0..g.dim() {
                if mins[g.start].entry(l) < 0 {
                    return Err(Error::StartDerivesNegative {
                        letter: g.letters[l].clone(),
                        detail: g.describe_min_derivation(&order, g.start, l),
                    });
                }
            }
            let mut fixed_any = false;
            for &s in order.iter().rev() {
                if s == g.start {
                    continue;
                }
                for l in 0..g.dim() {
                    let m = g.min_net_outputs(&order)[s].entry(l);
                    if m < 0 {
                        let a = -m;
                        for t in g.transitions.iter_mut() {
                            if t.source == s {
                                t.output.set(l, t.output.entry(l) + a);
                            }
                        }
                        for t in g.transitions.iter_mut() {
                            let occurrences =
                                t.targets.iter().filter(|&&x| x == s).count() as i64;
                            if occurrences > 0 {
                                t.output.set(l, t.output.entry(l) - a * occurrences);
                            }
                        }
                        fixed_any = true;
                    }
                }
            }
            if !fixed_any {
                break;
            }
        }

        if let Some(bad) = g.transitions.iter().find(|t| !t.output.is_nonneg()) {
            return Err(Error::ResidualNegative(format!(
                "transition from {} keeps a negative entry; its negativity is covered by \
                 sibling states rather than same-transition letters",
                g.states[bad.source]
            )));
        }
        g.allow_negative = false;
        Ok(g)
    }

    fn describe_min_derivation(&self, order: &[usize], state: usize, letter: usize) -> String {
        // Reconstruct one minimizing derivation, transition by transition.
        let mins = self.min_net_outputs(order);
        let mut steps: Vec<String> = Vec::new();
        let mut stack = vec![state];
        let mut guard = 0;
        while let Some(s) = stack.pop() {
            guard += 1;
            if guard > 200 {
                steps.push("...".into());
                break;
            }
            let t = self
                .transitions
                .iter()
                .filter(|t| t.source == s)
                .min_by_key(|t| {
                    let mut net = t.output.entry(letter);
                    for &tgt in &t.targets {
                        net += mins[tgt].entry(letter);
                    }
                    net
                })
                .unwrap();
            steps.push(format!("{} -> {}", self.states[s], self.format_rhs(t)));
            for &tgt in &t.targets {
                stack.push(tgt);
            }
        }
        steps.join("; ")
    }
}

struct Parser<'a> {
    lines: Vec<(usize, &'a str)>,
}

const RESERVED_EMPTY: &str = "0";

fn is_letter_token(tok: &str) -> bool {
    tok.chars().next().is_some_and(|c| c.is_ascii_lowercase())
}

fn is_state_token(tok: &str) -> bool {
    tok.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

fn valid_identifier(tok: &str) -> bool {
    !tok.is_empty()
        && tok.chars().next().unwrap().is_ascii_alphabetic()
        && tok
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '\'')
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| {
                let body = match l.find('#') {
                    Some(p) => &l[..p],
                    None => l,
                };
                (i + 1, body)
            })
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        Parser { lines }
    }

    fn err<T>(&self, line: usize, col: usize, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn parse(&self) -> Result<Grammar> {
        let mut it = self.lines.iter();

        let (ln, first) = match it.next() {
            Some(x) => *x,
            None => return self.err(1, 1, "empty grammar file"),
        };
        let rest = match first.trim().strip_prefix("alphabet:") {
            Some(r) => r,
            None => return self.err(ln, 1, "expected `alphabet: ...` on the first line"),
        };
        let mut letters: Vec<String> = Vec::new();
        for tok in rest.split_whitespace() {
            if !valid_identifier(tok) || !is_letter_token(tok) || tok.contains('\'') {
                return self.err(ln, 1, format!("bad letter name {tok:?}"));
            }
            if letters.iter().any(|l| l == tok) {
                return self.err(ln, 1, format!("duplicate letter {tok:?}"));
            }
            letters.push(tok.to_string());
        }
        if letters.is_empty() {
            return self.err(ln, 1, "alphabet must declare at least one letter");
        }

        let (ln2, second) = match it.next() {
            Some(x) => *x,
            None => return self.err(ln + 1, 1, "expected `start: S`"),
        };
        let start_name = match second.trim().strip_prefix("start:") {
            Some(r) => r.trim().to_string(),
            None => return self.err(ln2, 1, "expected `start: S` on the second line"),
        };
        if !valid_identifier(&start_name) || !is_state_token(&start_name) {
            return self.err(ln2, 1, format!("bad start state name {start_name:?}"));
        }

        let mut allow_negative = false;
        let mut rest_lines: Vec<(usize, &str)> = Vec::new();
        let mut saw_flags = false;
        for &(l, body) in it {
            if let Some(flags) = body.trim().strip_prefix("flags:") {
                if saw_flags || !rest_lines.is_empty() {
                    return self.err(l, 1, "flags line must come before productions");
                }
                saw_flags = true;
                for f in flags.split_whitespace() {
                    match f {
                        "allow-negative" => allow_negative = true,
                        other => return self.err(l, 1, format!("unknown flag {other:?}")),
                    }
                }
            } else {
                rest_lines.push((l, body));
            }
        }

        // First pass: collect state names from production sources.
        let mut states: Vec<String> = Vec::new();
        let mut prods: Vec<(usize, String, &str)> = Vec::new();
        for (l, body) in rest_lines {
            let (lhs, rhs) = match body.split_once("->") {
                Some(x) => x,
                None => return self.err(l, 1, "expected `State -> ...`"),
            };
            let name = lhs.trim().to_string();
            if !valid_identifier(&name) || !is_state_token(&name) || name.contains('\'') {
                return self.err(l, 1, format!("bad state name {name:?}"));
            }
            if !states.contains(&name) {
                states.push(name.clone());
            }
            prods.push((l, name, rhs));
        }
        if !states.contains(&start_name) {
            return self.err(ln2, 1, format!("state {start_name} has no transition"));
        }

        let mut transitions: Vec<Transition> = Vec::new();
        for (l, name, rhs) in prods {
            let source = states.iter().position(|s| *s == name).unwrap();
            for alt in rhs.split('|') {
                let items: Vec<&str> = alt.split_whitespace().collect();
                if items.is_empty() {
                    return self.err(l, 1, "empty alternative (use `0` for the empty right-hand side)");
                }
                let mut output = LetterVec::zeros(letters.len());
                let mut targets: Vec<usize> = Vec::new();
                if items == [RESERVED_EMPTY] {
                    transitions.push(Transition {
                        source,
                        output,
                        targets,
                    });
                    continue;
                }
                for item in items {
                    if item == RESERVED_EMPTY {
                        return self.err(l, 1, "`0` must stand alone in its alternative");
                    }
                    let (sym, exp) = match item.split_once('^') {
                        Some((s, e)) => {
                            let k: i64 = match e.parse() {
                                Ok(k) => k,
                                Err(_) => {
                                    return self.err(l, 1, format!("bad exponent in {item:?}"))
                                }
                            };
                            (s, k)
                        }
                        None => (item, 1),
                    };
                    if !valid_identifier(sym) || sym.contains('\'') {
                        return self.err(l, 1, format!("bad symbol {sym:?}"));
                    }
                    if is_letter_token(sym) {
                        let li = match letters.iter().position(|x| x == sym) {
                            Some(i) => i,
                            None => return self.err(l, 1, format!("undeclared letter {sym:?}")),
                        };
                        if exp < 0 && !allow_negative {
                            return self.err(
                                l,
                                1,
                                format!(
                                    "negative exponent on {sym:?} requires `flags: allow-negative`"
                                ),
                            );
                        }
                        output.set(li, output.entry(li) + exp);
                        if output.entry(li) < 0 && !allow_negative {
                            return self.err(l, 1, format!("negative total for letter {sym:?}"));
                        }
                    } else {
                        if exp < 0 {
                            return self.err(l, 1, "state exponents must be nonnegative");
                        }
                        let si = match states.iter().position(|x| x == sym) {
                            Some(i) => i,
                            None => {
                                return self.err(
                                    l,
                                    1,
                                    format!("state {sym} has no transition (undeclared state)"),
                                )
                            }
                        };
                        for _ in 0..exp {
                            targets.push(si);
                        }
                    }
                }
                targets.sort_unstable();
                transitions.push(Transition {
                    source,
                    output,
                    targets,
                });
            }
        }

        let start = states.iter().position(|s| *s == start_name).unwrap();
        Grammar::new(letters, states, start, transitions, allow_negative)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{enumerate_out, OutputBox};

    #[test]
    fn parse_minimal() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        assert!(g.is_regular());
        assert_eq!(g.transitions().len(), 2);
        assert_eq!(g.dim(), 1);
    }

    #[test]
    fn parse_exponent_expansion() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a^2 b T T | 0\nT -> 0\n").unwrap();
        assert!(!g.is_regular());
        let t = &g.transitions()[0];
        assert_eq!(t.output.entries(), &[2, 1]);
        assert_eq!(t.targets.len(), 2);
        assert!(!g.is_limited());
    }

    #[test]
    fn parse_missing_alphabet() {
        let e = Grammar::parse("S -> a\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn parse_undeclared_letter() {
        let e = Grammar::parse("alphabet: a\nstart: S\nS -> b | 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn parse_state_without_transition() {
        let e = Grammar::parse("alphabet: a\nstart: S\nS -> a T\n").unwrap_err();
        assert!(matches!(e, Error::Parse { .. }));
    }

    #[test]
    fn parse_negative_needs_flag() {
        assert!(Grammar::parse("alphabet: a\nstart: S\nS -> a^-1 | 0\n").is_err());
        let g =
            Grammar::parse("alphabet: a\nstart: S\nflags: allow-negative\nS -> a^-1 | 0\n")
                .unwrap();
        assert!(g.has_negative_output());
    }

    #[test]
    fn roundtrip_simple() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | b T | 0\nT -> a^3 T T | 0\n")
            .unwrap();
        let g2 = Grammar::parse(&g.serialize()).unwrap();
        assert_eq!(g, g2);
    }

    #[test]
    fn normalize_fixpoint() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        let n = g.normalize().unwrap();
        assert!(n.is_limited());
        assert_eq!(n, g);
    }

    #[test]
    fn normalize_preserves_image_chain() {
        // S -> a a b | 0 becomes a three-transition chain with the same image.
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a^2 b | 0\n").unwrap();
        let n = g.normalize().unwrap();
        assert!(n.is_limited());
        let bx = OutputBox::nonneg(LetterVec::from_vec(vec![5, 5]));
        assert_eq!(
            enumerate_out(&g, &bx).unwrap(),
            enumerate_out(&n, &bx).unwrap()
        );
    }

    #[test]
    fn normalize_preserves_image_targets() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> T T T | 0\nT -> a\n").unwrap();
        let n = g.normalize().unwrap();
        assert!(n.is_limited());
        let bx = OutputBox::nonneg(LetterVec::from_vec(vec![5]));
        assert_eq!(
            enumerate_out(&g, &bx).unwrap(),
            enumerate_out(&n, &bx).unwrap()
        );
    }

    #[test]
    fn negate_involution() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        let n = g.negate_outputs();
        assert!(n.transitions()[0].output.entries() == [-1]);
        let nn = n.negate_outputs();
        for (a, b) in g.transitions().iter().zip(nn.transitions()) {
            assert_eq!(a.output, b.output);
        }
    }

    #[test]
    fn negate_zero_fixpoint() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> S S | 0\n").unwrap();
        let n = g.negate_outputs();
        for (a, b) in g.transitions().iter().zip(n.transitions()) {
            assert_eq!(a.output, b.output);
        }
    }

    #[test]
    fn concat_sums_images() {
        let g = Grammar::parse("alphabet: a b\nstart: S\nS -> a S | 0\n").unwrap();
        let h = Grammar::parse("alphabet: a b\nstart: T\nT -> b T | 0\n").unwrap();
        let gh = g.concat_regular(&h).unwrap();
        assert!(gh.is_regular());
        let bx = OutputBox::nonneg(LetterVec::from_vec(vec![4, 4]));
        let got = enumerate_out(&gh, &bx).unwrap();
        // a* then b* = all of N^2 inside the box.
        assert_eq!(got.len(), 25);
    }

    #[test]
    fn concat_identity_element() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a S | 0\n").unwrap();
        let zero = Grammar::parse("alphabet: a\nstart: Z\nZ -> 0\n").unwrap();
        let gz = g.concat_regular(&zero).unwrap();
        let bx = OutputBox::nonneg(LetterVec::from_vec(vec![6]));
        assert_eq!(
            enumerate_out(&g, &bx).unwrap(),
            enumerate_out(&gz, &bx).unwrap()
        );
    }

    #[test]
    fn concat_with_negation_cancels() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a\n").unwrap();
        let h = Grammar::parse("alphabet: a\nstart: T\nT -> a\n").unwrap();
        let gh = g.concat_regular(&h.negate_outputs()).unwrap();
        let bx = OutputBox::signed(
            LetterVec::from_vec(vec![-3]),
            LetterVec::from_vec(vec![3]),
        );
        let out = enumerate_out(&gh, &bx).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out.contains(&LetterVec::zeros(1)));
    }

    #[test]
    fn eliminate_negative_cancels_one() {
        let g = Grammar::parse(
            "alphabet: x\nstart: S\nflags: allow-negative\nS -> x x A | 0\nA -> x^-1\n",
        )
        .unwrap();
        let e = g.eliminate_negative().unwrap();
        assert!(!e.has_negative_output());
        let bx = OutputBox::nonneg(LetterVec::from_vec(vec![6]));
        let want = enumerate_out(&g, &bx).unwrap();
        let got = enumerate_out(&e, &bx).unwrap();
        assert_eq!(want, got);
    }

    #[test]
    fn eliminate_negative_fixpoint() {
        let g = Grammar::parse("alphabet: a\nstart: S\nS -> a A | 0\nA -> a\n").unwrap();
        let e = g.eliminate_negative().unwrap();
        assert_eq!(e, g);
    }

    #[test]
    fn eliminate_negative_rejects_cyclic() {
        let g = Grammar::parse(
            "alphabet: x\nstart: S\nflags: allow-negative\nS -> x^-1 S | 0\n",
        )
        .unwrap();
        assert!(matches!(
            g.eliminate_negative(),
            Err(Error::CyclicDependency(_))
        ));
    }

    #[test]
    fn eliminate_negative_rejects_negative_start() {
        let g = Grammar::parse(
            "alphabet: x\nstart: S\nflags: allow-negative\nS -> x^-1 A\nA -> 0\n",
        )
        .unwrap();
        assert!(matches!(
            g.eliminate_negative(),
            Err(Error::StartDerivesNegative { .. })
        ));
    }
}
