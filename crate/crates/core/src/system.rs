//! Components, systems and their black-box semantics.

use std::collections::BTreeSet;
use std::sync::Arc;

use rustc_hash::FxHashSet;

use crate::behaviors::{adapt, compose, successors, IntervalTransducer, State};
use crate::error::{Error, Result};
use crate::rules::{Invariant, PremiseReport};
use crate::streams::{Assignment, ChannelId, ChannelSet, EnumerationBounds, NamedStreamTuple};

/// A named component `(n, I, O, β)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    name: String,
    inputs: ChannelSet,
    outputs: ChannelSet,
    behavior: IntervalTransducer,
}

impl Component {
    /// The behavior's interface must be exactly `(inputs, outputs)`.
    pub fn new(
        name: impl Into<String>,
        inputs: ChannelSet,
        outputs: ChannelSet,
        behavior: IntervalTransducer,
    ) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidToken(name));
        }
        if behavior.inputs() != &inputs || behavior.outputs() != &outputs {
            return Err(Error::Interface(format!(
                "component {name} declares ({inputs:?} -> {outputs:?}) but its behavior has ({:?} -> {:?})",
                behavior.inputs(),
                behavior.outputs()
            )));
        }
        Ok(Self {
            name,
            inputs,
            outputs,
            behavior,
        })
    }

    /// A component whose interface is taken from its behavior.
    pub fn from_behavior(name: impl Into<String>, behavior: IntervalTransducer) -> Result<Self> {
        let (i, o) = (behavior.inputs().clone(), behavior.outputs().clone());
        Self::new(name, i, o, behavior)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn inputs(&self) -> &ChannelSet {
        &self.inputs
    }

    pub fn outputs(&self) -> &ChannelSet {
        &self.outputs
    }

    pub fn behavior(&self) -> &IntervalTransducer {
        &self.behavior
    }

    /// Same name, new behavior (and the behavior's interface).
    pub fn with_behavior(&self, behavior: IntervalTransducer) -> Component {
        Component {
            name: self.name.clone(),
            inputs: behavior.inputs().clone(),
            outputs: behavior.outputs().clone(),
            behavior,
        }
    }
}

/// A system `(I, O, C)` together with the bounds used for every check on it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct System {
    inputs: ChannelSet,
    outputs: ChannelSet,
    components: Vec<Component>,
    bounds: EnumerationBounds,
}

impl System {
    pub fn new(
        inputs: ChannelSet,
        outputs: ChannelSet,
        components: Vec<Component>,
        bounds: EnumerationBounds,
    ) -> Self {
        Self {
            inputs,
            outputs,
            components,
            bounds,
        }
    }

    pub fn inputs(&self) -> &ChannelSet {
        &self.inputs
    }

    pub fn outputs(&self) -> &ChannelSet {
        &self.outputs
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn bounds(&self) -> &EnumerationBounds {
        &self.bounds
    }

    pub fn with_bounds(&self, bounds: EnumerationBounds) -> System {
        System {
            bounds,
            ..self.clone()
        }
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn component_names(&self) -> BTreeSet<String> {
        self.components.iter().map(|c| c.name.clone()).collect()
    }

    /// `in.C`: union of all component inputs.
    pub fn component_inputs(&self) -> ChannelSet {
        self.components
            .iter()
            .flat_map(|c| c.inputs.iter().cloned())
            .collect()
    }

    /// `out.C`: union of all component outputs.
    pub fn component_outputs(&self) -> ChannelSet {
        self.components
            .iter()
            .flat_map(|c| c.outputs.iter().cloned())
            .collect()
    }

    /// Every channel named anywhere in the architecture.
    pub fn used_channels(&self) -> ChannelSet {
        let mut all = self.inputs.clone();
        all.extend(self.outputs.iter().cloned());
        all.extend(self.component_inputs());
        all.extend(self.component_outputs());
        all
    }

    /// `I ∪ out.C`: the domain of system runs.
    pub fn run_domain(&self) -> ChannelSet {
        self.inputs
            .union(&self.component_outputs())
            .cloned()
            .collect()
    }

    /// `S WITH C := components`.
    pub fn with_components(&self, components: Vec<Component>) -> System {
        System {
            components,
            ..self.clone()
        }
    }

    /// `S WITH c := replacement`, where `c` is the component named `name`.
    pub fn with_component(&self, name: &str, replacement: Component) -> Result<System> {
        let idx = self
            .components
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownComponent(name.to_string()))?;
        let mut components = self.components.clone();
        components[idx] = replacement;
        Ok(self.with_components(components))
    }
}

/// Checks the five consistency conditions. The report lists only violations,
/// so it is empty exactly when the system is consistent.
pub fn validate_system(s: &System) -> PremiseReport {
    let mut report = PremiseReport::new("consistency");
    let cs = &s.components;
    for (i, c1) in cs.iter().enumerate() {
        for c2 in &cs[i + 1..] {
            if c1.name == c2.name {
                report.fail(
                    "(1)",
                    "different components have different names",
                    format!("two components are named {}", c1.name),
                );
            }
            let shared: Vec<&ChannelId> = c1.outputs.intersection(&c2.outputs).collect();
            if !shared.is_empty() {
                report.fail(
                    "(2)",
                    "each channel is controlled by only one component",
                    format!("{} and {} both write {shared:?}", c1.name, c2.name),
                );
            }
        }
    }
    for c in cs {
        let shared: Vec<&ChannelId> = s.inputs.intersection(&c.outputs).collect();
        if !shared.is_empty() {
            report.fail(
                "(3)",
                "system input channels are controlled by the environment",
                format!("{} writes system input {shared:?}", c.name),
            );
        }
    }
    let out_c = s.component_outputs();
    for c in cs {
        let dangling: Vec<&ChannelId> = c
            .inputs
            .iter()
            .filter(|p| !out_c.contains(*p) && !s.inputs.contains(*p))
            .collect();
        if !dangling.is_empty() {
            report.fail(
                "(4)",
                "each component input is controlled by a component or the environment",
                format!("{} reads unconnected {dangling:?}", c.name),
            );
        }
    }
    let uncontrolled: Vec<&ChannelId> = s.outputs.difference(&out_c).collect();
    if !uncontrolled.is_empty() {
        report.fail(
            "(5)",
            "each system output channel is controlled by a component",
            format!("no component writes {uncontrolled:?}"),
        );
    }
    for c in cs {
        let b = &c.behavior;
        if b.inputs() != &c.inputs || b.outputs() != &c.outputs {
            report.fail(
                "interface",
                "each component behavior matches its declared interface",
                format!("component {}", c.name),
            );
        }
    }
    let undeclared: Vec<ChannelId> = s
        .used_channels()
        .into_iter()
        .filter(|c| s.bounds.alphabet(c).is_none())
        .collect();
    if !undeclared.is_empty() {
        report.fail(
            "alphabet",
            "every channel has a declared alphabet",
            format!("undeclared {undeclared:?}"),
        );
    }
    report
}

fn ensure_consistent(s: &System) -> Result<()> {
    let report = validate_system(s);
    if report.holds() {
        Ok(())
    } else {
        Err(Error::Inconsistent(Box::new(report)))
    }
}

/// The product of all component behaviors, before interface adaption.
pub(crate) fn composite(s: &System) -> Result<IntervalTransducer> {
    compose(s.components.iter().map(|c| c.behavior.clone()).collect())
}

/// `⟦S⟧`: the composed component behaviors, internal channels hidden and
/// unused system inputs added.
pub fn black_box(s: &System) -> Result<IntervalTransducer> {
    ensure_consistent(s)?;
    let compiled = adapt(&composite(s)?, &s.inputs, &s.outputs)?;
    Ok(IntervalTransducer::subsystem(Arc::new(s.clone()), compiled))
}

/// The component `c_S = (n, in.S, out.S, ⟦S⟧)`.
pub fn as_component(s: &System, name: &str) -> Result<Component> {
    Component::new(name, s.inputs.clone(), s.outputs.clone(), black_box(s)?)
}

/// A witness tuple `l` over `I ∪ out.C`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SystemRun {
    pub channels: NamedStreamTuple,
}

/// All runs whose system-input part equals `env`, in canonical order.
pub fn system_runs(s: &System, env: &NamedStreamTuple) -> Result<Vec<SystemRun>> {
    ensure_consistent(s)?;
    if &env.domain() != s.inputs() {
        return Err(Error::Interface(format!(
            "environment over {:?} but system inputs are {:?}",
            env.domain(),
            s.inputs()
        )));
    }
    s.bounds.check_tuple(env)?;
    let product = composite(s)?;
    let domain = s.run_domain();
    let mut runs = Vec::new();
    let mut prefix = Vec::new();
    collect_runs(
        s,
        &product,
        env,
        0,
        vec![product.initial()],
        &mut prefix,
        &domain,
        &mut runs,
    );
    runs.sort();
    Ok(runs)
}

#[allow(clippy::too_many_arguments)]
fn collect_runs(
    s: &System,
    product: &IntervalTransducer,
    env: &NamedStreamTuple,
    t: usize,
    states: Vec<State>,
    prefix: &mut Vec<Assignment>,
    domain: &ChannelSet,
    runs: &mut Vec<SystemRun>,
) {
    if t == env.horizon() {
        runs.push(SystemRun {
            channels: NamedStreamTuple::from_slices(domain, prefix),
        });
        return;
    }
    let x = env.slice(t);
    let input = x.restrict(product.inputs());
    for (o, next) in successors(product, &states, &input, &s.bounds) {
        prefix.push(x.union(&o));
        collect_runs(s, product, env, t + 1, next, prefix, domain, runs);
        prefix.pop();
    }
}

/// Searches all runs, over all in-bounds environments, for one that violates
/// `invariant`. Returns the least such run.
pub(crate) fn find_violating_run(
    s: &System,
    invariant: &Invariant,
) -> Result<Option<NamedStreamTuple>> {
    ensure_consistent(s)?;
    let product = composite(s)?;
    let env_slices = s.bounds.assignments(&s.inputs)?;
    let mut search = RunSearch {
        system: s,
        product: &product,
        env_slices,
        invariant,
        visited: FxHashSet::default(),
        prefix: Vec::new(),
    };
    if search.dfs(0, vec![product.initial()], invariant.start()) {
        Ok(Some(NamedStreamTuple::from_slices(
            &s.run_domain(),
            &search.prefix,
        )))
    } else {
        Ok(None)
    }
}

struct RunSearch<'a> {
    system: &'a System,
    product: &'a IntervalTransducer,
    env_slices: Vec<Assignment>,
    invariant: &'a Invariant,
    visited: FxHashSet<(usize, Vec<State>, State)>,
    prefix: Vec<Assignment>,
}

impl RunSearch<'_> {
    fn extend_least(&mut self, mut states: Vec<State>) {
        let bounds = &self.system.bounds;
        while self.prefix.len() < bounds.horizon() {
            let x = self.env_slices[0].clone();
            let input = x.restrict(self.product.inputs());
            let (o, next) = successors(self.product, &states, &input, bounds)
                .into_iter()
                .next()
                .expect("component with an empty choice set");
            self.prefix.push(x.union(&o));
            states = next;
        }
    }

    fn dfs(&mut self, t: usize, states: Vec<State>, mon: State) -> bool {
        let bounds = &self.system.bounds;
        if t == bounds.horizon() {
            return !self.invariant.accepts(&mon);
        }
        let key = (t, states, mon);
        if !self.visited.insert(key.clone()) {
            return false;
        }
        let (_, states, mon) = key;
        for i in 0..self.env_slices.len() {
            let x = self.env_slices[i].clone();
            let input = x.restrict(self.product.inputs());
            for (o, next) in successors(self.product, &states, &input, bounds) {
                let slice = x.union(&o);
                let next_mon = self.invariant.observe(&mon, &slice);
                self.prefix.push(slice);
                if self.invariant.is_dead(&next_mon) {
                    self.extend_least(next);
                    return true;
                }
                if self.dfs(t + 1, next, next_mon) {
                    return true;
                }
                self.prefix.pop();
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behaviors::chaos;
    use crate::streams::{channels, Alphabet, Message};
    use std::collections::BTreeMap;

    fn bounds(chs: &[&'static str]) -> EnumerationBounds {
        let alph = Arc::new(Alphabet::new("M", [Message::from_static("m")]));
        let map: BTreeMap<_, _> = chs
            .iter()
            .map(|c| (ChannelId::from_static(c), alph.clone()))
            .collect();
        EnumerationBounds::new(2, 1, map).unwrap()
    }

    fn comp(name: &str, i: &[&'static str], o: &[&'static str]) -> Component {
        Component::from_behavior(name, chaos(channels(i), channels(o))).unwrap()
    }

    fn failed(s: &System) -> Vec<String> {
        validate_system(s)
            .failures()
            .map(|v| v.tag.clone())
            .collect()
    }

    #[test]
    fn broadcast_and_self_loop_are_admitted() {
        let b = bounds(&["a", "x", "y"]);
        let s = System::new(
            channels(&["a"]),
            channels(&["y"]),
            vec![
                comp("P", &["a", "x"], &["x"]),
                comp("Q", &["x"], &["y"]),
                comp("R", &["x", "a"], &[]),
            ],
            b,
        );
        assert!(validate_system(&s).holds());
        let bb = black_box(&s).unwrap();
        assert_eq!(bb.inputs(), s.inputs());
        assert_eq!(bb.outputs(), s.outputs());
    }

    #[test]
    fn each_condition_is_reported() {
        let b = bounds(&["a", "x", "y"]);
        let dup = System::new(
            channels(&["a"]),
            channels(&[]),
            vec![comp("P", &["a"], &[]), comp("P", &["a"], &[])],
            b.clone(),
        );
        assert_eq!(failed(&dup), ["(1)"]);
        let two_writers = System::new(
            channels(&["a"]),
            channels(&[]),
            vec![comp("P", &["a"], &["x"]), comp("Q", &["a"], &["x"])],
            b.clone(),
        );
        assert_eq!(failed(&two_writers), ["(2)"]);
        let writes_input = System::new(
            channels(&["a"]),
            channels(&[]),
            vec![comp("P", &[], &["a"])],
            b.clone(),
        );
        assert_eq!(failed(&writes_input), ["(3)"]);
        let dangling = System::new(
            channels(&[]),
            channels(&[]),
            vec![comp("P", &["x"], &[])],
            b.clone(),
        );
        assert_eq!(failed(&dangling), ["(4)"]);
        let uncontrolled = System::new(channels(&["a"]), channels(&["y"]), vec![], b);
        assert_eq!(failed(&uncontrolled), ["(5)"]);
        assert!(black_box(&uncontrolled).is_err());
    }

    #[test]
    fn unconnected_inputs_are_accepted() {
        let s = System::new(
            channels(&["a", "x"]),
            channels(&["y"]),
            vec![comp("P", &["a"], &["y"])],
            bounds(&["a", "x", "y"]),
        );
        assert!(validate_system(&s).holds());
        let bb = black_box(&s).unwrap();
        assert!(bb.inputs().contains(&ChannelId::from_static("x")));
    }

    #[test]
    fn with_component_replaces_exactly_one() {
        let s = System::new(
            channels(&["a"]),
            channels(&["y"]),
            vec![comp("P", &["a"], &["y"]), comp("Q", &["a"], &[])],
            bounds(&["a", "y"]),
        );
        let p = s.component("P").unwrap().clone();
        assert_eq!(s.with_component("P", p).unwrap(), s);
        let q2 = comp("Q2", &["a"], &[]);
        let s2 = s.with_component("Q", q2.clone()).unwrap();
        assert_eq!(s2.components()[0], s.components()[0]);
        assert_eq!(s2.components()[1], q2);
        assert!(matches!(
            s.with_component("Z", q2),
            Err(Error::UnknownComponent(_))
        ));
    }
}
