//! Executable behaviors.
//!
//! A behavior is represented by an [`IntervalTransducer`]: at every time step
//! the machine first *emits* one interval per output channel, chosen from a
//! nonempty set that depends only on its current state, and then *advances*
//! on the emitted outputs and the step's input intervals to one of a nonempty
//! set of successor states. Output at step `i` therefore only depends on input
//! strictly before `i`, so every transducer is time guarded.

mod inclusion;
mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rules::PremiseReport;
use crate::streams::{
    Assignment, ChannelId, ChannelSet, EnumerationBounds, Interval, Message, NamedStreamTuple,
};
use crate::system::System;

pub use inclusion::{equivalent, refines_behavior, Refinement};
pub(crate) use inclusion::{find_excess, successors};
pub use table::{binding, TableBuilder, TableMachine, TableState, Transition};

/// Opaque machine state.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum State {
    Unit,
    Index(u32),
    Seq(Arc<[Message]>),
    Tuple(Arc<[State]>),
}

impl State {
    pub fn seq(messages: Vec<Message>) -> State {
        State::Seq(messages.into())
    }

    pub fn tuple(parts: Vec<State>) -> State {
        State::Tuple(parts.into())
    }
}

/// A machine implemented natively, outside the table format.
///
/// `kind` and `params` identify the machine: two primitives with the same
/// kind and parameters must behave identically.
pub trait Primitive: Send + Sync + fmt::Debug {
    fn kind(&self) -> &str;
    fn params(&self) -> Vec<(String, String)>;
    fn inputs(&self) -> ChannelSet;
    fn outputs(&self) -> ChannelSet;
    fn initial(&self) -> State;
    fn emit(&self, state: &State, bounds: &EnumerationBounds) -> Vec<Assignment>;
    fn advance(
        &self,
        state: &State,
        out: &Assignment,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Vec<State>;
}

#[derive(Clone, Debug)]
pub enum Kind {
    Table(Arc<TableMachine>),
    /// Emits every in-bounds output assignment, ignores its inputs.
    Chaos,
    Primitive(Arc<dyn Primitive>),
    /// Ignores added inputs, hides removed outputs.
    Adapt(IntervalTransducer),
    Compose(Vec<IntervalTransducer>),
    /// `to_inner` maps outer channel names to the inner machine's names.
    Rename {
        inner: IntervalTransducer,
        to_inner: BTreeMap<ChannelId, ChannelId>,
        to_outer: BTreeMap<ChannelId, ChannelId>,
    },
    /// Feeds `<>` to the inner machine on `channel`, which is no longer an input.
    Unplug {
        inner: IntervalTransducer,
        channel: ChannelId,
    },
    /// Black box of a system.
    Subsystem {
        system: Arc<System>,
        compiled: IntervalTransducer,
    },
}

#[derive(Debug)]
struct Node {
    inputs: ChannelSet,
    outputs: ChannelSet,
    kind: Kind,
}

/// A nondeterministic emit-then-advance machine over an interface `(I, O)`.
#[derive(Clone)]
pub struct IntervalTransducer(Arc<Node>);

impl fmt::Debug for IntervalTransducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "IntervalTransducer({:?} -> {:?}, {})",
            self.0.inputs,
            self.0.outputs,
            self.kind_name()
        )
    }
}

impl PartialEq for IntervalTransducer {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.0, &other.0) {
            return true;
        }
        if self.0.inputs != other.0.inputs || self.0.outputs != other.0.outputs {
            return false;
        }
        match (&self.0.kind, &other.0.kind) {
            (Kind::Table(a), Kind::Table(b)) => a == b,
            (Kind::Chaos, Kind::Chaos) => true,
            (Kind::Primitive(a), Kind::Primitive(b)) => {
                a.kind() == b.kind() && a.params() == b.params()
            }
            (Kind::Adapt(a), Kind::Adapt(b)) => a == b,
            (Kind::Compose(a), Kind::Compose(b)) => a == b,
            (
                Kind::Rename {
                    inner: a,
                    to_inner: ma,
                    ..
                },
                Kind::Rename {
                    inner: b,
                    to_inner: mb,
                    ..
                },
            ) => a == b && ma == mb,
            (
                Kind::Unplug {
                    inner: a,
                    channel: ca,
                },
                Kind::Unplug {
                    inner: b,
                    channel: cb,
                },
            ) => a == b && ca == cb,
            (Kind::Subsystem { system: a, .. }, Kind::Subsystem { system: b, .. }) => a == b,
            _ => false,
        }
    }
}

impl Eq for IntervalTransducer {}

fn product(sets: &[Vec<Assignment>]) -> Vec<Assignment> {
    let mut acc = vec![Assignment::default()];
    for set in sets {
        if set.len() == 1 {
            for a in &mut acc {
                *a = a.union(&set[0]);
            }
            continue;
        }
        acc = acc
            .iter()
            .flat_map(|a| set.iter().map(move |b| a.union(b)))
            .collect();
    }
    acc
}

fn sorted_dedup<T: Ord>(mut v: Vec<T>) -> Vec<T> {
    v.sort();
    v.dedup();
    v
}

/// In-bounds assignments over `domain`; a channel without a declared
/// alphabet only admits `<>`.
fn lenient_assignments(bounds: &EnumerationBounds, domain: &ChannelSet) -> Vec<Assignment> {
    let per_channel: Vec<Vec<Assignment>> = domain
        .iter()
        .map(|c| {
            bounds
                .intervals(c)
                .unwrap_or_else(|_| vec![Interval::empty()])
                .into_iter()
                .map(|iv| Assignment::new([(c.clone(), iv)]))
                .collect()
        })
        .collect();
    product(&per_channel)
}

impl IntervalTransducer {
    fn from_node(inputs: ChannelSet, outputs: ChannelSet, kind: Kind) -> Self {
        Self(Arc::new(Node {
            inputs,
            outputs,
            kind,
        }))
    }

    pub fn table(machine: TableMachine) -> Self {
        Self::from_node(
            machine.inputs().clone(),
            machine.outputs().clone(),
            Kind::Table(Arc::new(machine)),
        )
    }

    pub fn primitive(p: Arc<dyn Primitive>) -> Self {
        Self::from_node(p.inputs(), p.outputs(), Kind::Primitive(p))
    }

    pub(crate) fn subsystem(system: Arc<System>, compiled: IntervalTransducer) -> Self {
        Self::from_node(
            compiled.inputs().clone(),
            compiled.outputs().clone(),
            Kind::Subsystem { system, compiled },
        )
    }

    pub fn inputs(&self) -> &ChannelSet {
        &self.0.inputs
    }

    pub fn outputs(&self) -> &ChannelSet {
        &self.0.outputs
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    fn kind_name(&self) -> &'static str {
        match self.kind() {
            Kind::Table(_) => "table",
            Kind::Chaos => "chaos",
            Kind::Primitive(_) => "primitive",
            Kind::Adapt(_) => "adapt",
            Kind::Compose(_) => "compose",
            Kind::Rename { .. } => "rename",
            Kind::Unplug { .. } => "unplug",
            Kind::Subsystem { .. } => "subsystem",
        }
    }

    pub fn initial(&self) -> State {
        match self.kind() {
            Kind::Table(t) => State::Index(t.initial() as u32),
            Kind::Chaos => State::Unit,
            Kind::Primitive(p) => p.initial(),
            Kind::Compose(parts) => State::tuple(parts.iter().map(|p| p.initial()).collect()),
            Kind::Adapt(inner)
            | Kind::Rename { inner, .. }
            | Kind::Unplug { inner, .. }
            | Kind::Subsystem {
                compiled: inner, ..
            } => inner.initial(),
        }
    }

    /// The emit choices at `state`, sorted and deduplicated.
    pub fn emit(&self, state: &State, bounds: &EnumerationBounds) -> Vec<Assignment> {
        match self.kind() {
            Kind::Table(t) => match state {
                State::Index(i) => t.emits(*i as usize).to_vec(),
                _ => Vec::new(),
            },
            Kind::Chaos => lenient_assignments(bounds, self.outputs()),
            Kind::Primitive(p) => sorted_dedup(p.emit(state, bounds)),
            Kind::Adapt(inner) => sorted_dedup(
                inner
                    .emit(state, bounds)
                    .iter()
                    .map(|o| o.restrict(self.outputs()))
                    .collect(),
            ),
            Kind::Compose(parts) => {
                let State::Tuple(states) = state else {
                    return Vec::new();
                };
                let sets: Vec<Vec<Assignment>> = parts
                    .iter()
                    .zip(states.iter())
                    .map(|(p, s)| p.emit(s, bounds))
                    .collect();
                sorted_dedup(product(&sets))
            }
            Kind::Rename {
                inner, to_outer, ..
            } => sorted_dedup(
                inner
                    .emit(state, bounds)
                    .iter()
                    .map(|o| o.rename(to_outer))
                    .collect(),
            ),
            Kind::Unplug { inner, .. } => inner.emit(state, bounds),
            Kind::Subsystem { compiled, .. } => compiled.emit(state, bounds),
        }
    }

    /// Successor states after emitting `out` and reading `input`, sorted and
    /// deduplicated. Empty when `out` is not an emit choice of `state`.
    pub fn advance(
        &self,
        state: &State,
        out: &Assignment,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Vec<State> {
        match self.kind() {
            Kind::Table(t) => match state {
                State::Index(i) => {
                    let i = *i as usize;
                    if !t.emits(i).contains(out) {
                        return Vec::new();
                    }
                    t.advance(i, out, input)
                        .into_iter()
                        .map(|j| State::Index(j as u32))
                        .collect()
                }
                _ => Vec::new(),
            },
            Kind::Chaos => vec![State::Unit],
            Kind::Primitive(p) => sorted_dedup(p.advance(state, out, input, bounds)),
            Kind::Adapt(inner) => {
                let inner_input = input.restrict(inner.inputs());
                let mut next = Vec::new();
                for o in inner.emit(state, bounds) {
                    if o.restrict(self.outputs()) == *out {
                        next.extend(inner.advance(state, &o, &inner_input, bounds));
                    }
                }
                sorted_dedup(next)
            }
            Kind::Compose(parts) => {
                let State::Tuple(states) = state else {
                    return Vec::new();
                };
                let slice = out.union(input);
                let mut acc: Vec<Vec<State>> = vec![Vec::with_capacity(parts.len())];
                for (p, s) in parts.iter().zip(states.iter()) {
                    let next = p.advance(
                        s,
                        &out.restrict(p.outputs()),
                        &slice.restrict(p.inputs()),
                        bounds,
                    );
                    if next.is_empty() {
                        return Vec::new();
                    }
                    if next.len() == 1 {
                        for a in &mut acc {
                            a.push(next[0].clone());
                        }
                    } else {
                        acc = acc
                            .iter()
                            .flat_map(|a| {
                                next.iter().map(move |n| {
                                    let mut b = a.clone();
                                    b.push(n.clone());
                                    b
                                })
                            })
                            .collect();
                    }
                }
                sorted_dedup(acc.into_iter().map(State::tuple).collect())
            }
            Kind::Rename {
                inner, to_inner, ..
            } => inner.advance(
                state,
                &out.rename(to_inner),
                &input.rename(to_inner),
                bounds,
            ),
            Kind::Unplug { inner, channel } => {
                let filled = input.union(&Assignment::new([(channel.clone(), Interval::empty())]));
                inner.advance(state, out, &filled.restrict(inner.inputs()), bounds)
            }
            Kind::Subsystem { compiled, .. } => compiled.advance(state, out, input, bounds),
        }
    }

    /// All `(output, successor)` pairs for one step from `state` on `input`.
    pub fn step(
        &self,
        state: &State,
        input: &Assignment,
        bounds: &EnumerationBounds,
    ) -> Vec<(Assignment, State)> {
        match self.kind() {
            Kind::Adapt(inner) => sorted_dedup(
                inner
                    .step(state, &input.restrict(inner.inputs()), bounds)
                    .into_iter()
                    .map(|(o, s)| (o.restrict(self.outputs()), s))
                    .collect(),
            ),
            Kind::Subsystem { compiled, .. } => compiled.step(state, input, bounds),
            Kind::Rename {
                inner,
                to_inner,
                to_outer,
            } => inner
                .step(state, &input.rename(to_inner), bounds)
                .into_iter()
                .map(|(o, s)| (o.rename(to_outer), s))
                .collect(),
            _ => {
                let mut out = Vec::new();
                for o in self.emit(state, bounds) {
                    for s in self.advance(state, &o, input, bounds) {
                        out.push((o.clone(), s));
                    }
                }
                out
            }
        }
    }
}

/// The maximally nondeterministic behavior on `(inputs, outputs)`: a single
/// state emitting every in-bounds output assignment and ignoring its input.
pub fn chaos(inputs: ChannelSet, outputs: ChannelSet) -> IntervalTransducer {
    IntervalTransducer::from_node(inputs, outputs, Kind::Chaos)
}

/// Interface adaption: extend the inputs to `inputs` (ignored) and restrict
/// the outputs to `outputs`. Requires `I ⊆ inputs` and `outputs ⊆ O`.
pub fn adapt(
    m: &IntervalTransducer,
    inputs: &ChannelSet,
    outputs: &ChannelSet,
) -> Result<IntervalTransducer> {
    if !m.inputs().is_subset(inputs) {
        return Err(Error::Interface(format!(
            "adaption must keep all inputs {:?}, got {:?}",
            m.inputs(),
            inputs
        )));
    }
    if !outputs.is_subset(m.outputs()) {
        return Err(Error::Interface(format!(
            "adaption may only remove outputs of {:?}, got {:?}",
            m.outputs(),
            outputs
        )));
    }
    if m.inputs() == inputs && m.outputs() == outputs {
        return Ok(m.clone());
    }
    // Adapting an adaption collapses into one.
    let inner = match m.kind() {
        Kind::Adapt(inner) => inner.clone(),
        _ => m.clone(),
    };
    if inner.inputs() == inputs && inner.outputs() == outputs {
        return Ok(inner);
    }
    Ok(IntervalTransducer::from_node(
        inputs.clone(),
        outputs.clone(),
        Kind::Adapt(inner),
    ))
}

/// Parallel composition with implicit feedback over shared channel names.
///
/// Outputs are the union of all part outputs; inputs are the part inputs not
/// produced by any part. Within one step every part emits first, then every
/// part advances on the combined slice, so feedback is visible in the same
/// step in which it is emitted.
pub fn compose(parts: Vec<IntervalTransducer>) -> Result<IntervalTransducer> {
    let mut outputs = ChannelSet::new();
    for p in &parts {
        if let Some(c) = p.outputs().intersection(&outputs).next() {
            return Err(Error::Composition(format!(
                "channel {c} is an output of more than one part"
            )));
        }
        outputs.extend(p.outputs().iter().cloned());
    }
    let inputs: ChannelSet = parts
        .iter()
        .flat_map(|p| p.inputs().iter())
        .filter(|c| !outputs.contains(*c))
        .cloned()
        .collect();
    Ok(IntervalTransducer::from_node(
        inputs,
        outputs,
        Kind::Compose(parts),
    ))
}

/// Renames interface channels of `m` through `renaming` (old name to new name).
pub fn rename(
    m: &IntervalTransducer,
    renaming: &BTreeMap<ChannelId, ChannelId>,
) -> Result<IntervalTransducer> {
    let apply = |set: &ChannelSet| -> ChannelSet {
        set.iter()
            .map(|c| renaming.get(c).cloned().unwrap_or_else(|| c.clone()))
            .collect()
    };
    let all: ChannelSet = m.inputs().union(m.outputs()).cloned().collect();
    let relevant: BTreeMap<ChannelId, ChannelId> = renaming
        .iter()
        .filter(|(old, new)| all.contains(*old) && old != new)
        .map(|(o, n)| (o.clone(), n.clone()))
        .collect();
    if relevant.is_empty() {
        return Ok(m.clone());
    }
    if apply(&all).len() != all.len() {
        return Err(Error::Interface(format!(
            "renaming {relevant:?} merges channels of {all:?}"
        )));
    }
    let to_inner: BTreeMap<ChannelId, ChannelId> = relevant
        .iter()
        .map(|(o, n)| (n.clone(), o.clone()))
        .collect();
    Ok(IntervalTransducer::from_node(
        apply(m.inputs()),
        apply(m.outputs()),
        Kind::Rename {
            inner: m.clone(),
            to_inner,
            to_outer: relevant,
        },
    ))
}

/// Drops input `channel`, feeding the inner machine `<>` on it at every step.
pub fn unplug(m: &IntervalTransducer, channel: &ChannelId) -> Result<IntervalTransducer> {
    if !m.inputs().contains(channel) {
        return Err(Error::Interface(format!("{channel} is not an input")));
    }
    // Removing an input that an adaption added just shrinks the adaption.
    if let Kind::Adapt(inner) = m.kind() {
        if !inner.inputs().contains(channel) {
            let mut inputs = m.inputs().clone();
            inputs.remove(channel);
            return adapt(inner, &inputs, m.outputs());
        }
    }
    let mut inputs = m.inputs().clone();
    inputs.remove(channel);
    Ok(IntervalTransducer::from_node(
        inputs,
        m.outputs().clone(),
        Kind::Unplug {
            inner: m.clone(),
            channel: channel.clone(),
        },
    ))
}

fn check_input(
    m: &IntervalTransducer,
    x: &NamedStreamTuple,
    bounds: &EnumerationBounds,
) -> Result<()> {
    if &x.domain() != m.inputs() {
        return Err(Error::Interface(format!(
            "input tuple over {:?} but machine reads {:?}",
            x.domain(),
            m.inputs()
        )));
    }
    bounds.check_tuple(x)
}

/// All output tuples `m` can produce on input `x`, over `x`'s horizon.
pub fn behavior_of(
    m: &IntervalTransducer,
    x: &NamedStreamTuple,
    bounds: &EnumerationBounds,
) -> Result<BTreeSet<NamedStreamTuple>> {
    check_input(m, x, bounds)?;
    let mut configs: BTreeSet<(State, Vec<Assignment>)> =
        [(m.initial(), Vec::new())].into_iter().collect();
    for t in 0..x.horizon() {
        let slice = x.slice(t);
        let mut next = BTreeSet::new();
        for (s, outs) in &configs {
            for (o, s2) in m.step(s, &slice, bounds) {
                let mut outs2 = outs.clone();
                outs2.push(o);
                next.insert((s2, outs2));
            }
        }
        configs = next;
    }
    Ok(configs
        .into_iter()
        .map(|(_, outs)| NamedStreamTuple::from_slices(m.outputs(), &outs))
        .collect())
}

const MAX_LISTED: usize = 8;

/// Checks, over all states reachable within the horizon, that every choice
/// set is nonempty and that every emitted interval respects the burst bound
/// and its channel alphabet.
pub fn validate_transducer(m: &IntervalTransducer, bounds: &EnumerationBounds) -> PremiseReport {
    let mut report = PremiseReport::new("validate-transducer");
    let mut empty_choice = Vec::new();
    let mut burst = Vec::new();
    let mut alphabet = Vec::new();
    let mut interface = Vec::new();
    let inputs = lenient_assignments(bounds, m.inputs());

    let mut frontier: BTreeSet<State> = [m.initial()].into_iter().collect();
    for t in 0..bounds.horizon() {
        let mut next = BTreeSet::new();
        for s in &frontier {
            let emits = m.emit(s, bounds);
            if emits.is_empty() {
                empty_choice.push(format!("step {t}: no emit choice in state {s:?}"));
            }
            for o in &emits {
                if !o.has_domain(m.outputs()) {
                    interface.push(format!("step {t}: emitted {o} over the wrong channels"));
                }
                for (c, iv) in o.bindings() {
                    if iv.len() > bounds.burst() {
                        burst.push(format!("step {t}: {c}={iv} has {} messages", iv.len()));
                    }
                    match bounds.alphabet(c) {
                        Some(a) => {
                            if let Some(bad) = iv.messages().iter().find(|msg| !a.contains(msg)) {
                                alphabet.push(format!("step {t}: {bad} not in alphabet of {c}"));
                            }
                        }
                        None if !iv.is_empty() => {
                            alphabet.push(format!("step {t}: channel {c} has no alphabet"))
                        }
                        None => {}
                    }
                }
                for x in &inputs {
                    let succ = m.advance(s, o, x, bounds);
                    if succ.is_empty() {
                        empty_choice.push(format!(
                            "step {t}: no successor in state {s:?} after emitting {{{o}}} on input {{{x}}}"
                        ));
                    }
                    next.extend(succ);
                }
            }
        }
        frontier = next;
    }

    let mut record = |tag: &str, premise: &str, found: Vec<String>| {
        if found.is_empty() {
            report.pass(tag, premise);
        } else {
            let total = found.len();
            let mut listed: Vec<String> = found.into_iter().take(MAX_LISTED).collect();
            if total > MAX_LISTED {
                listed.push(format!("... {} more", total - MAX_LISTED));
            }
            report.fail(tag, premise, listed.join("\n"));
        }
    };
    record(
        "empty choice set",
        "every emit and advance choice set is nonempty",
        empty_choice,
    );
    record(
        "interface",
        "emitted assignments cover exactly the output channels",
        interface,
    );
    record(
        "burst exceeded",
        "every emitted interval respects the burst bound",
        burst,
    );
    record(
        "alphabet",
        "every emitted message belongs to its channel alphabet",
        alphabet,
    );
    report.pass(
        "time guarded",
        "output at step i depends only on input before i (holds by construction)",
    );
    report
}

#[cfg(test)]
mod tests;
