//! Explicit finite state tables.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::streams::{Assignment, ChannelSet, Interval};

/// A guarded transition. A guard binds some channels to exact intervals;
/// unmentioned channels match anything.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub on_output: Assignment,
    pub on_input: Assignment,
    pub targets: Vec<usize>,
}

impl Transition {
    fn matches(&self, out: &Assignment, input: &Assignment) -> bool {
        guard_matches(&self.on_output, out) && guard_matches(&self.on_input, input)
    }
}

fn guard_matches(guard: &Assignment, a: &Assignment) -> bool {
    guard
        .bindings()
        .iter()
        .all(|(c, iv)| a.get(c).map_or(iv.is_empty(), |x| x == iv))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableState {
    pub name: String,
    pub emits: Vec<Assignment>,
    pub transitions: Vec<Transition>,
}

/// An explicit machine: named states, per-state emit choices, and guarded
/// advance transitions. `advance` yields the union of the targets of every
/// matching transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableMachine {
    name: String,
    inputs: ChannelSet,
    outputs: ChannelSet,
    states: Vec<TableState>,
    initial: usize,
}

impl TableMachine {
    pub fn builder(
        name: impl Into<String>,
        inputs: ChannelSet,
        outputs: ChannelSet,
    ) -> TableBuilder {
        TableBuilder {
            name: name.into(),
            inputs,
            outputs,
            states: Vec::new(),
            index: BTreeMap::new(),
            initial: None,
            errors: Vec::new(),
        }
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

    pub fn states(&self) -> &[TableState] {
        &self.states
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn emits(&self, state: usize) -> &[Assignment] {
        &self.states[state].emits
    }

    pub fn advance(&self, state: usize, out: &Assignment, input: &Assignment) -> Vec<usize> {
        let set: BTreeSet<usize> = self.states[state]
            .transitions
            .iter()
            .filter(|t| t.matches(out, input))
            .flat_map(|t| t.targets.iter().copied())
            .collect();
        set.into_iter().collect()
    }

    pub fn with_name(&self, name: impl Into<String>) -> TableMachine {
        TableMachine {
            name: name.into(),
            ..self.clone()
        }
    }
}

pub struct TableBuilder {
    name: String,
    inputs: ChannelSet,
    outputs: ChannelSet,
    states: Vec<TableState>,
    index: BTreeMap<String, usize>,
    initial: Option<String>,
    errors: Vec<String>,
}

impl TableBuilder {
    pub fn state(mut self, name: &str) -> Self {
        if self.index.contains_key(name) {
            self.errors.push(format!("duplicate state {name}"));
        } else {
            self.index.insert(name.to_string(), self.states.len());
            self.states.push(TableState {
                name: name.to_string(),
                emits: Vec::new(),
                transitions: Vec::new(),
            });
        }
        self
    }

    pub fn initial(mut self, name: &str) -> Self {
        self.initial = Some(name.to_string());
        self
    }

    /// Adds an emit choice; output channels left out emit `<>`.
    pub fn emit(mut self, state: &str, out: Assignment) -> Self {
        if let Some(extra) = out.domain().difference(&self.outputs).next() {
            self.errors.push(format!(
                "emit in state {state} binds non-output channel {extra}"
            ));
            return self;
        }
        let full = out.union(&Assignment::silent(&self.outputs));
        match self.index.get(state) {
            Some(&i) => self.states[i].emits.push(full),
            None => self.errors.push(format!("emit in unknown state {state}")),
        }
        self
    }

    pub fn transition(
        mut self,
        state: &str,
        on_output: Assignment,
        on_input: Assignment,
        targets: &[&str],
    ) -> Self {
        if let Some(extra) = on_output.domain().difference(&self.outputs).next() {
            self.errors.push(format!(
                "output guard in state {state} names non-output channel {extra}"
            ));
        }
        if let Some(extra) = on_input.domain().difference(&self.inputs).next() {
            self.errors.push(format!(
                "input guard in state {state} names non-input channel {extra}"
            ));
        }
        let mut resolved = Vec::new();
        for t in targets {
            match self.index.get(*t) {
                Some(&i) => resolved.push(i),
                None => self.errors.push(format!("transition to unknown state {t}")),
            }
        }
        match self.index.get(state) {
            Some(&i) => self.states[i].transitions.push(Transition {
                on_output,
                on_input,
                targets: resolved,
            }),
            None => self
                .errors
                .push(format!("transition from unknown state {state}")),
        }
        self
    }

    /// States must be declared before transitions name them. Emit sets are
    /// sorted and deduplicated.
    pub fn build(mut self) -> Result<TableMachine> {
        let initial = match &self.initial {
            Some(n) => match self.index.get(n) {
                Some(&i) => i,
                None => {
                    self.errors.push(format!("unknown initial state {n}"));
                    0
                }
            },
            None if !self.states.is_empty() => 0,
            None => {
                self.errors.push("machine has no states".into());
                0
            }
        };
        if !self.errors.is_empty() {
            return Err(Error::Library(format!(
                "machine {}: {}",
                self.name,
                self.errors.join("; ")
            )));
        }
        for s in &mut self.states {
            let set: BTreeSet<Assignment> = s.emits.drain(..).collect();
            s.emits = set.into_iter().collect();
        }
        Ok(TableMachine {
            name: self.name,
            inputs: self.inputs,
            outputs: self.outputs,
            states: self.states,
            initial,
        })
    }
}

/// Convenience for guards and emits: `binding(&[("c", "<m>")])`.
pub fn binding(pairs: &[(&'static str, &str)]) -> Assignment {
    Assignment::new(pairs.iter().map(|(c, iv)| {
        (
            crate::streams::ChannelId::from_static(c),
            iv.parse::<Interval>().expect("invalid interval literal"),
        )
    }))
}
