//! Seeded random small systems, random rule applications, and a brute-force
//! black-box oracle that never touches the product machine.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use flowrefine::behaviors::{chaos, IntervalTransducer, Kind, TableMachine};
use flowrefine::rules::{Invariant, RefinementStep};
use flowrefine::streams::{
    Alphabet, Assignment, ChannelId, ChannelSet, EnumerationBounds, Interval, Message,
    NamedStreamTuple, TimedStream,
};
use flowrefine::system::{Component, System};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub const INPUTS: [&str; 2] = ["i0", "i1"];
pub const WIRES: [&str; 5] = ["c0", "c1", "c2", "c3", "c4"];
/// Channels no generated system uses, for rules that introduce channels.
pub const FRESH: [&str; 2] = ["n0", "n1"];

pub fn ch(c: &str) -> ChannelId {
    ChannelId::new(c).unwrap()
}

fn set(cs: &[ChannelId]) -> ChannelSet {
    cs.iter().cloned().collect()
}

/// Every pool channel gets an alphabet of one or two messages.
pub fn random_bounds(rng: &mut TestRng, horizon: usize) -> EnumerationBounds {
    let one = Arc::new(Alphabet::new("One", [Message::new("a").unwrap()]));
    let two = Arc::new(Alphabet::new(
        "Two",
        ["a", "b"].map(|m| Message::new(m).unwrap()),
    ));
    let map = INPUTS
        .iter()
        .chain(&WIRES)
        .chain(&FRESH)
        .map(|c| {
            let a = if rng.gen_bool(0.5) { &one } else { &two };
            (ch(c), a.clone())
        })
        .collect();
    EnumerationBounds::new(horizon, 1, map).unwrap()
}

fn random_interval(rng: &mut TestRng, c: &ChannelId, b: &EnumerationBounds) -> Interval {
    let msgs = b.alphabet(c).unwrap().messages();
    if rng.gen_bool(0.4) {
        Interval::empty()
    } else {
        Interval::from_messages(vec![msgs.choose(rng).unwrap().clone()])
    }
}

fn random_assignment(rng: &mut TestRng, cs: &ChannelSet, b: &EnumerationBounds) -> Assignment {
    Assignment::new(cs.iter().map(|c| (c.clone(), random_interval(rng, c, b))))
}

/// A table machine with one to three states. Every state has a catch-all
/// transition, so every choice set is nonempty.
pub fn random_table(
    rng: &mut TestRng,
    name: &str,
    inputs: &ChannelSet,
    outputs: &ChannelSet,
    b: &EnumerationBounds,
) -> TableMachine {
    let n = rng.gen_range(1..=3);
    let names: Vec<String> = (0..n).map(|i| format!("s{i}")).collect();
    let mut builder = TableMachine::builder(name, inputs.clone(), outputs.clone());
    for s in &names {
        builder = builder.state(s);
    }
    let targets = |rng: &mut TestRng| -> Vec<String> {
        let k = rng.gen_range(1..=2);
        names.choose_multiple(rng, k).cloned().collect()
    };
    for s in &names {
        let mut emits = Vec::new();
        for _ in 0..rng.gen_range(1..=2) {
            emits.push(random_assignment(rng, outputs, b));
        }
        for e in &emits {
            builder = builder.emit(s, e.clone());
        }
        let t = targets(rng);
        let t: Vec<&str> = t.iter().map(String::as_str).collect();
        builder = builder.transition(s, Assignment::default(), Assignment::default(), &t);
        for _ in 0..rng.gen_range(0..=2) {
            let out_guard = if rng.gen_bool(0.5) {
                emits.choose(rng).unwrap().clone()
            } else {
                Assignment::default()
            };
            let in_guard = match inputs.iter().collect::<Vec<_>>().choose(rng) {
                Some(&c) => Assignment::new([(c.clone(), random_interval(rng, c, b))]),
                None => Assignment::default(),
            };
            let t = targets(rng);
            let t: Vec<&str> = t.iter().map(String::as_str).collect();
            builder = builder.transition(s, out_guard, in_guard, &t);
        }
    }
    builder.build().unwrap()
}

pub fn random_behavior(
    rng: &mut TestRng,
    name: &str,
    inputs: &ChannelSet,
    outputs: &ChannelSet,
    b: &EnumerationBounds,
) -> IntervalTransducer {
    if rng.gen_bool(0.15) {
        chaos(inputs.clone(), outputs.clone())
    } else {
        IntervalTransducer::table(random_table(rng, name, inputs, outputs, b))
    }
}

/// A consistent system of one to `max_components` components whose run
/// domain has at most `max_channels` channels.
pub fn random_system(
    rng: &mut TestRng,
    horizon: usize,
    max_components: usize,
    max_channels: usize,
) -> System {
    let b = random_bounds(rng, horizon);
    let k = rng.gen_range(1..=max_components);
    let n_inputs = rng.gen_range(0..=INPUTS.len().min(max_channels - 1));
    let sys_inputs: Vec<ChannelId> = INPUTS[..n_inputs].iter().map(|c| ch(c)).collect();
    let mut wires: Vec<ChannelId> = WIRES.iter().map(|c| ch(c)).collect();
    wires.shuffle(rng);
    let budget = (max_channels - n_inputs).max(1);
    let mut outs: Vec<Vec<ChannelId>> = vec![Vec::new(); k];
    // the first `writers` components write at least one channel, the rest none
    let writers = if k >= 2 && rng.gen_bool(0.25) {
        k - 1
    } else {
        k
    };
    for (i, w) in wires.into_iter().take(budget).enumerate() {
        let j = if i < writers {
            i
        } else {
            rng.gen_range(0..writers)
        };
        outs[j].push(w);
    }
    let written: Vec<ChannelId> = outs.iter().flatten().cloned().collect();
    let readable: Vec<ChannelId> = sys_inputs.iter().chain(&written).cloned().collect();
    let mut components = Vec::new();
    for (j, o) in outs.iter().enumerate() {
        let n_in = rng.gen_range(0..=2.min(readable.len()));
        let inputs = set(&readable
            .choose_multiple(rng, n_in)
            .cloned()
            .collect::<Vec<_>>());
        let outputs = set(o);
        let name = ["A", "B", "C"][j];
        let m = random_behavior(rng, &format!("m{j}"), &inputs, &outputs, &b);
        components.push(Component::new(name, inputs, outputs, m).unwrap());
    }
    let n_out = rng.gen_range(0..=written.len().min(2));
    let sys_outputs = set(&written
        .choose_multiple(rng, n_out)
        .cloned()
        .collect::<Vec<_>>());
    System::new(set(&sys_inputs), sys_outputs, components, b)
}

/// Keeps a nonempty subset of each state's emit choices, so the result
/// refines the original.
fn restrict(rng: &mut TestRng, t: &TableMachine) -> TableMachine {
    let mut builder = TableMachine::builder(
        format!("{}r", t.name()),
        t.inputs().clone(),
        t.outputs().clone(),
    );
    for s in t.states() {
        builder = builder.state(&s.name);
    }
    builder = builder.initial(&t.states()[t.initial()].name);
    for s in t.states() {
        let k = rng.gen_range(1..=s.emits.len());
        for e in s.emits.choose_multiple(rng, k) {
            builder = builder.emit(&s.name, e.clone());
        }
        for tr in &s.transitions {
            let targets: Vec<&str> = tr
                .targets
                .iter()
                .map(|&i| t.states()[i].name.as_str())
                .collect();
            builder =
                builder.transition(&s.name, tr.on_output.clone(), tr.on_input.clone(), &targets);
        }
    }
    builder.build().unwrap()
}

/// A replacement behavior with the same interface: a restriction of a table,
/// any table for chaos, otherwise a fresh random machine.
fn replacement(rng: &mut TestRng, c: &Component, b: &EnumerationBounds) -> IntervalTransducer {
    match c.behavior().kind() {
        Kind::Table(t) if rng.gen_bool(0.6) => IntervalTransducer::table(restrict(rng, t)),
        _ if rng.gen_bool(0.15) => c.behavior().clone(),
        _ => IntervalTransducer::table(random_table(rng, "fresh", c.inputs(), c.outputs(), b)),
    }
}

fn pick<'a, T>(rng: &mut TestRng, items: &'a [T]) -> Option<&'a T> {
    items.choose(rng)
}

fn channels_of(s: &System) -> Vec<ChannelId> {
    s.used_channels().into_iter().collect()
}

fn random_invariant(rng: &mut TestRng, s: &System) -> Invariant {
    let outs: Vec<ChannelId> = s.component_outputs().into_iter().collect();
    let all = channels_of(s);
    match rng.gen_range(0..4) {
        0 => Invariant::True,
        1 if !outs.is_empty() => Invariant::Empty(pick(rng, &outs).unwrap().clone()),
        2 if all.len() >= 2 => {
            let two: Vec<&ChannelId> = all.choose_multiple(rng, 2).collect();
            Invariant::Prefix {
                follower: two[0].clone(),
                leader: two[1].clone(),
            }
        }
        _ => Invariant::True,
    }
}

/// A random rule application. Parameters are usually, not always, such that
/// the premises hold.
pub fn random_step(rng: &mut TestRng, s: &System) -> RefinementStep {
    let comps = s.components().to_vec();
    let c = pick(rng, &comps).unwrap().clone();
    let name = c.name().to_string();
    let b = s.bounds();
    let fresh_channel = |rng: &mut TestRng| -> ChannelId {
        if rng.gen_bool(0.85) {
            let unused: Vec<&str> = FRESH
                .iter()
                .chain(&WIRES)
                .copied()
                .filter(|n| !s.used_channels().contains(&ch(n)) && !s.inputs().contains(&ch(n)))
                .collect();
            ch(unused.choose(rng).copied().unwrap_or("n0"))
        } else {
            pick(rng, &channels_of(s))
                .cloned()
                .unwrap_or_else(|| ch("n0"))
        }
    };
    match rng.gen_range(0..11) {
        0 => RefinementStep::RefineBehavior {
            behavior: replacement(rng, &c, b),
            component: name,
        },
        1 => RefinementStep::RefineWithInvariant {
            behavior: replacement(rng, &c, b),
            invariant: random_invariant(rng, s),
            component: name,
        },
        2 => RefinementStep::AddOutput {
            component: name,
            channel: fresh_channel(rng),
        },
        3 => {
            let outs: Vec<ChannelId> = c.outputs().iter().cloned().collect();
            match pick(rng, &outs) {
                Some(p) => RefinementStep::RemoveOutput {
                    component: name,
                    channel: p.clone(),
                },
                None => RefinementStep::AddComponent { name: "N0".into() },
            }
        }
        4 => {
            let avail: Vec<ChannelId> = s
                .inputs()
                .iter()
                .chain(&s.component_outputs())
                .filter(|p| !c.inputs().contains(*p))
                .cloned()
                .collect();
            let channel = if rng.gen_bool(0.85) && !avail.is_empty() {
                pick(rng, &avail).unwrap().clone()
            } else {
                fresh_channel(rng)
            };
            RefinementStep::AddInput {
                component: name,
                channel,
            }
        }
        5 => {
            let ins: Vec<ChannelId> = c.inputs().iter().cloned().collect();
            match pick(rng, &ins) {
                Some(p) => RefinementStep::RemoveInput {
                    component: name,
                    channel: p.clone(),
                },
                None => RefinementStep::AddComponent { name: "N1".into() },
            }
        }
        6 => RefinementStep::AddComponent {
            name: if rng.gen_bool(0.85) {
                "N0".into()
            } else {
                name
            },
        },
        7 => RefinementStep::RemoveComponent { name },
        8 => RefinementStep::Expand {
            subsystem: expansion(rng, &c, s),
            component: name,
        },
        9 => fold_step(rng, s),
        _ => {
            let internal: Vec<ChannelId> = s
                .component_outputs()
                .difference(s.outputs())
                .cloned()
                .collect();
            let old = if rng.gen_bool(0.85) && !internal.is_empty() {
                pick(rng, &internal).unwrap().clone()
            } else {
                pick(rng, &channels_of(s))
                    .cloned()
                    .unwrap_or_else(|| ch("c0"))
            };
            RefinementStep::Rename {
                old,
                new: fresh_channel(rng),
            }
        }
    }
}

/// The folded subsystem for a folded component, otherwise a one-component
/// system wrapping the behavior (occasionally a different one).
fn expansion(rng: &mut TestRng, c: &Component, s: &System) -> System {
    if let Kind::Subsystem { system, .. } = c.behavior().kind() {
        return system.as_ref().clone();
    }
    let behavior = if rng.gen_bool(0.8) {
        c.behavior().clone()
    } else {
        random_behavior(rng, "other", c.inputs(), c.outputs(), s.bounds())
    };
    let inner = Component::new(
        format!("{}x", c.name()),
        c.inputs().clone(),
        c.outputs().clone(),
        behavior,
    )
    .unwrap();
    System::new(
        c.inputs().clone(),
        c.outputs().clone(),
        vec![inner],
        s.bounds().clone(),
    )
}

/// The least interface of the folded components `names` in `s`: the inputs
/// they do not produce themselves, and the outputs read elsewhere.
pub fn minimal_fold(s: &System, names: &BTreeSet<&str>) -> (ChannelSet, ChannelSet) {
    let folded: Vec<&Component> = s
        .components()
        .iter()
        .filter(|c| names.contains(c.name()))
        .collect();
    let outs: ChannelSet = folded
        .iter()
        .flat_map(|c| c.outputs().iter().cloned())
        .collect();
    let inputs = folded
        .iter()
        .flat_map(|c| c.inputs().iter().cloned())
        .filter(|p| !outs.contains(p))
        .collect();
    let used_outside: ChannelSet = s
        .components()
        .iter()
        .filter(|c| !names.contains(c.name()))
        .flat_map(|c| c.inputs().iter().cloned())
        .chain(s.outputs().iter().cloned())
        .collect();
    (inputs, outs.intersection(&used_outside).cloned().collect())
}

fn fold_step(rng: &mut TestRng, s: &System) -> RefinementStep {
    let comps = s.components();
    let k = rng.gen_range(1..=comps.len());
    let folded: Vec<&Component> = comps.choose_multiple(rng, k).collect();
    let names: BTreeSet<&str> = folded.iter().map(|c| c.name()).collect();
    let (mut inputs, mut outputs) = minimal_fold(s, &names);
    let outs: ChannelSet = folded
        .iter()
        .flat_map(|c| c.outputs().iter().cloned())
        .collect();
    if rng.gen_bool(0.15) {
        let extra: Vec<ChannelId> = outs.difference(&outputs).cloned().collect();
        if let Some(p) = extra.choose(rng) {
            outputs.insert(p.clone());
        }
    }
    if rng.gen_bool(0.1) {
        let dropped = outputs.iter().next().cloned();
        if let Some(p) = dropped {
            outputs.remove(&p);
        }
    }
    if rng.gen_bool(0.1) {
        inputs.insert(ch("n1"));
    }
    RefinementStep::Fold {
        name: if rng.gen_bool(0.9) {
            "F".into()
        } else {
            folded[0].name().into()
        },
        components: folded.iter().map(|c| c.name().to_string()).collect(),
        inputs,
        outputs,
    }
}

/// All in-bounds tuples over `domain` at the bounds' horizon.
pub fn all_tuples(domain: &ChannelSet, b: &EnumerationBounds) -> Vec<NamedStreamTuple> {
    let mut per_channel: Vec<Vec<Interval>> = Vec::new();
    for c in domain {
        let mut ivs = vec![Interval::empty()];
        for m in b.alphabet(c).unwrap().messages() {
            ivs.push(Interval::from_messages(vec![m.clone()]));
        }
        per_channel.push(ivs);
    }
    let h = b.horizon();
    let cells = domain.len() * h;
    let mut out = Vec::new();
    let mut idx = vec![0usize; cells];
    loop {
        let mut map = BTreeMap::new();
        for (ci, c) in domain.iter().enumerate() {
            let ivs = (0..h)
                .map(|t| per_channel[ci][idx[ci * h + t]].clone())
                .collect();
            map.insert(c.clone(), TimedStream::new(ivs));
        }
        out.push(NamedStreamTuple::new(h, map).unwrap());
        // odometer increment
        let mut k = 0;
        loop {
            if k == cells {
                return out;
            }
            let ci = k / h;
            idx[k] += 1;
            if idx[k] < per_channel[ci].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn guard_ok(guard: &Assignment, slice: &BTreeMap<ChannelId, Interval>) -> bool {
    guard
        .bindings()
        .iter()
        .all(|(c, iv)| slice.get(c).map_or(iv.is_empty(), |x| x == iv))
}

fn slice_at(l: &NamedStreamTuple, cs: &ChannelSet, t: usize) -> BTreeMap<ChannelId, Interval> {
    cs.iter()
        .map(|c| (c.clone(), l.get(c).unwrap().intervals()[t].clone()))
        .collect()
}

/// Whether `m` can emit `l↾outputs` while reading `l↾inputs`, simulated
/// directly from the state table.
pub fn table_accepts(m: &TableMachine, l: &NamedStreamTuple) -> bool {
    let mut current: BTreeSet<usize> = [m.initial()].into_iter().collect();
    for t in 0..l.horizon() {
        let out = slice_at(l, m.outputs(), t);
        let input = slice_at(l, m.inputs(), t);
        let mut next = BTreeSet::new();
        for &s in &current {
            let state = &m.states()[s];
            let emitted = state.emits.iter().any(|e| {
                e.bindings().len() == out.len()
                    && e.bindings().iter().all(|(c, iv)| out.get(c) == Some(iv))
            });
            if !emitted {
                continue;
            }
            for tr in &state.transitions {
                if guard_ok(&tr.on_output, &out) && guard_ok(&tr.on_input, &input) {
                    next.extend(tr.targets.iter().copied());
                }
            }
        }
        current = next;
    }
    !current.is_empty()
}

/// The black-box relation by the expanded characterization: all tuples `l`
/// over inputs and component outputs in which every component's output is
/// one its behavior allows on its input, projected to `(l↾I, l↾O)`.
/// Supports table and chaos components only.
pub fn oracle_relation(s: &System) -> BTreeSet<(NamedStreamTuple, NamedStreamTuple)> {
    let domain: ChannelSet = s.inputs().union(&s.component_outputs()).cloned().collect();
    let mut rel = BTreeSet::new();
    for l in all_tuples(&domain, s.bounds()) {
        let ok = s.components().iter().all(|c| match c.behavior().kind() {
            Kind::Table(t) => table_accepts(t, &l),
            Kind::Chaos => true,
            other => panic!("oracle cannot simulate {other:?}"),
        });
        if ok {
            rel.insert((
                l.restrict(s.inputs()).unwrap(),
                l.restrict(s.outputs()).unwrap(),
            ));
        }
    }
    rel
}
