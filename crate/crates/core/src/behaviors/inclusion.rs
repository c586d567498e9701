//! Bounded trace inclusion between transducers.
//!
//! The search walks the tree of observable prefixes `(x_0, o_0, x_1, o_1, ...)`
//! in canonical order while tracking, for the refined machine and the original
//! machine, the sets of states consistent with the prefix. The original
//! cannot produce the prefix exactly when its set becomes empty; the refined
//! machine's choice sets are nonempty, so such a prefix always extends to a
//! full-horizon witness. The first witness found is therefore the least one
//! in time-major order.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::{FxHashMap, FxHashSet};

use super::{IntervalTransducer, State};
use crate::error::{Error, Result};
use crate::rules::{Counterexample, Invariant};
use crate::streams::{Assignment, ChannelSet, EnumerationBounds, NamedStreamTuple};

/// Outcome of a bounded refinement check.
#[derive(Clone, Debug, PartialEq)]
pub enum Refinement {
    Holds,
    Violated(Counterexample),
}

impl Refinement {
    pub fn holds(&self) -> bool {
        matches!(self, Refinement::Holds)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        match self {
            Refinement::Holds => None,
            Refinement::Violated(c) => Some(c),
        }
    }
}

/// Groups one-step successors of a state set by emitted output.
pub(crate) fn successors(
    m: &IntervalTransducer,
    states: &[State],
    input: &Assignment,
    bounds: &EnumerationBounds,
) -> BTreeMap<Assignment, Vec<State>> {
    let mut map: BTreeMap<Assignment, BTreeSet<State>> = BTreeMap::new();
    for s in states {
        for (o, s2) in m.step(s, input, bounds) {
            map.entry(o).or_default().insert(s2);
        }
    }
    map.into_iter()
        .map(|(o, set)| (o, set.into_iter().collect()))
        .collect()
}

struct Search<'a> {
    refined: &'a IntervalTransducer,
    original: &'a IntervalTransducer,
    bounds: &'a EnumerationBounds,
    domain_slices: Vec<Assignment>,
    invariant: Option<&'a Invariant>,
    visited: FxHashSet<(usize, Vec<State>, Vec<State>, State)>,
    acceptable: FxHashMap<(usize, State), bool>,
    xs: Vec<Assignment>,
    os: Vec<Assignment>,
}

impl Search<'_> {
    fn horizon(&self) -> usize {
        self.bounds.horizon()
    }

    /// Whether some extension of the domain prefix from step `t` is accepted.
    fn can_accept(&mut self, t: usize, mon: &State) -> bool {
        let Some(inv) = self.invariant else {
            return true;
        };
        if t == self.horizon() {
            return inv.accepts(mon);
        }
        if let Some(&known) = self.acceptable.get(&(t, mon.clone())) {
            return known;
        }
        let mut found = false;
        for i in 0..self.domain_slices.len() {
            let next = inv.observe(mon, &self.domain_slices[i]);
            if !inv.is_dead(&next) && self.can_accept(t + 1, &next) {
                found = true;
                break;
            }
        }
        self.acceptable.insert((t, mon.clone()), found);
        found
    }

    /// Least accepted domain extension from step `t`.
    fn least_extension(&mut self, t: usize, mon: &State) -> Vec<Assignment> {
        let mut out = Vec::new();
        let mut mon = mon.clone();
        for step in t..self.horizon() {
            for i in 0..self.domain_slices.len() {
                let x = self.domain_slices[i].clone();
                let next = match self.invariant {
                    Some(inv) => inv.observe(&mon, &x),
                    None => State::Unit,
                };
                let ok = match self.invariant {
                    Some(inv) => !inv.is_dead(&next) && self.can_accept(step + 1, &next),
                    None => true,
                };
                if ok {
                    out.push(x);
                    mon = next;
                    break;
                }
            }
        }
        out
    }

    fn complete_outputs(&mut self, mut states: Vec<State>, ext: &[Assignment]) {
        for x in ext {
            let input = x.restrict(self.refined.inputs());
            let succ = successors(self.refined, &states, &input, self.bounds);
            let (o, next) = succ
                .into_iter()
                .next()
                .expect("refined machine has an empty choice set");
            self.xs.push(x.clone());
            self.os.push(o);
            states = next;
        }
    }

    fn dfs(&mut self, t: usize, refined: Vec<State>, original: Vec<State>, mon: State) -> bool {
        if t == self.horizon() {
            return false;
        }
        let key = (t, refined, original, mon);
        if self.visited.contains(&key) {
            return false;
        }
        self.visited.insert(key.clone());
        let (_, refined, original, mon) = key;

        for i in 0..self.domain_slices.len() {
            let x = self.domain_slices[i].clone();
            let next_mon = match self.invariant {
                Some(inv) => {
                    let n = inv.observe(&mon, &x);
                    if inv.is_dead(&n) || !self.can_accept(t + 1, &n) {
                        continue;
                    }
                    n
                }
                None => State::Unit,
            };
            let input = x.restrict(self.refined.inputs());
            let succ_refined = successors(self.refined, &refined, &input, self.bounds);
            let succ_original = successors(self.original, &original, &input, self.bounds);
            for (o, next_refined) in succ_refined {
                self.xs.push(x.clone());
                self.os.push(o.clone());
                match succ_original.get(&o) {
                    None => {
                        let ext = self.least_extension(t + 1, &next_mon);
                        self.complete_outputs(next_refined, &ext);
                        return true;
                    }
                    Some(next_original) => {
                        if self.dfs(t + 1, next_refined, next_original.clone(), next_mon.clone()) {
                            return true;
                        }
                    }
                }
                self.xs.pop();
                self.os.pop();
            }
        }
        false
    }
}

/// Searches for a domain tuple `x` (accepted by `invariant`, if given) and an
/// output `o` of `refined` on `x↾I` that `original` cannot produce.
///
/// Returns the witness as `(x, o)`, or `None` when inclusion holds.
pub(crate) fn find_excess(
    refined: &IntervalTransducer,
    original: &IntervalTransducer,
    bounds: &EnumerationBounds,
    domain: &ChannelSet,
    invariant: Option<&Invariant>,
) -> Result<Option<(NamedStreamTuple, NamedStreamTuple)>> {
    debug_assert!(refined.inputs().is_subset(domain));
    let mut search = Search {
        refined,
        original,
        bounds,
        domain_slices: bounds.assignments(domain)?,
        invariant,
        visited: FxHashSet::default(),
        acceptable: FxHashMap::default(),
        xs: Vec::new(),
        os: Vec::new(),
    };
    let start_mon = invariant.map_or(State::Unit, |inv| inv.start());
    if !search.can_accept(0, &start_mon) {
        return Ok(None);
    }
    if search.dfs(
        0,
        vec![refined.initial()],
        vec![original.initial()],
        start_mon,
    ) {
        Ok(Some((
            NamedStreamTuple::from_slices(domain, &search.xs),
            NamedStreamTuple::from_slices(refined.outputs(), &search.os),
        )))
    } else {
        Ok(None)
    }
}

fn same_interface(a: &IntervalTransducer, b: &IntervalTransducer) -> Result<()> {
    if a.inputs() != b.inputs() || a.outputs() != b.outputs() {
        return Err(Error::Interface(format!(
            "({:?} -> {:?}) vs ({:?} -> {:?})",
            a.inputs(),
            a.outputs(),
            b.inputs(),
            b.outputs()
        )));
    }
    Ok(())
}

/// Bounded behavioral refinement: every output `refined` can produce on an
/// in-bounds input is also producible by `original` on that input.
pub fn refines_behavior(
    refined: &IntervalTransducer,
    original: &IntervalTransducer,
    bounds: &EnumerationBounds,
) -> Result<Refinement> {
    same_interface(refined, original)?;
    Ok(
        match find_excess(refined, original, bounds, refined.inputs(), None)? {
            None => Refinement::Holds,
            Some((input, output)) => Refinement::Violated(Counterexample::Trace { input, output }),
        },
    )
}

/// Bounded behavioral equality, checked as mutual refinement.
pub fn equivalent(
    a: &IntervalTransducer,
    b: &IntervalTransducer,
    bounds: &EnumerationBounds,
) -> Result<Refinement> {
    match refines_behavior(a, b, bounds)? {
        Refinement::Holds => refines_behavior(b, a, bounds),
        violated => Ok(violated),
    }
}
