//! Premise-checked refinement rules on systems.
//!
//! Every rule returns a [`RuleOutcome`]. When a premise fails, the outcome
//! carries the unchanged input system and a report naming the failed
//! premise, with a counterexample where one exists.

mod invariant;
mod report;
mod script;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::behaviors::{
    adapt, behavior_of, chaos, compose, equivalent, find_excess, refines_behavior, rename, unplug,
    validate_transducer, IntervalTransducer, Refinement,
};
use crate::error::{Error, Result};
use crate::streams::{
    Assignment, ChannelId, ChannelSet, EnumerationBounds, Interval, NamedStreamTuple,
};
use crate::system::{
    as_component, black_box, find_violating_run, validate_system, Component, System,
};

pub(crate) use invariant::find_constrained_env;
pub use invariant::Invariant;
pub use report::{Counterexample, PremiseReport, PremiseVerdict};
pub use script::{apply_script, Script, ScriptStep, StepRecord, Transcript};

/// One rule application with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum RefinementStep {
    RefineBehavior {
        component: String,
        behavior: IntervalTransducer,
    },
    RefineWithInvariant {
        component: String,
        behavior: IntervalTransducer,
        invariant: Invariant,
    },
    AddOutput {
        component: String,
        channel: ChannelId,
    },
    RemoveOutput {
        component: String,
        channel: ChannelId,
    },
    AddInput {
        component: String,
        channel: ChannelId,
    },
    RemoveInput {
        component: String,
        channel: ChannelId,
    },
    AddComponent {
        name: String,
    },
    RemoveComponent {
        name: String,
    },
    Expand {
        component: String,
        subsystem: System,
    },
    Fold {
        name: String,
        components: Vec<String>,
        inputs: ChannelSet,
        outputs: ChannelSet,
    },
    Rename {
        old: ChannelId,
        new: ChannelId,
    },
}

impl RefinementStep {
    pub fn rule_name(&self) -> &'static str {
        match self {
            RefinementStep::RefineBehavior { .. } => "refine-behavior",
            RefinementStep::RefineWithInvariant { .. } => "refine-with-invariant",
            RefinementStep::AddOutput { .. } => "add-output",
            RefinementStep::RemoveOutput { .. } => "remove-output",
            RefinementStep::AddInput { .. } => "add-input",
            RefinementStep::RemoveInput { .. } => "remove-input",
            RefinementStep::AddComponent { .. } => "add-component",
            RefinementStep::RemoveComponent { .. } => "remove-component",
            RefinementStep::Expand { .. } => "expand",
            RefinementStep::Fold { .. } => "fold",
            RefinementStep::Rename { .. } => "rename",
        }
    }

    /// Whether the rule leaves the black box unchanged.
    pub fn is_architectural(&self) -> bool {
        !matches!(
            self,
            RefinementStep::RefineBehavior { .. } | RefinementStep::RefineWithInvariant { .. }
        )
    }

    /// Component names the step refers to in the system it is applied to.
    pub fn referenced_components(&self) -> Vec<&str> {
        match self {
            RefinementStep::RefineBehavior { component, .. }
            | RefinementStep::RefineWithInvariant { component, .. }
            | RefinementStep::AddOutput { component, .. }
            | RefinementStep::RemoveOutput { component, .. }
            | RefinementStep::AddInput { component, .. }
            | RefinementStep::RemoveInput { component, .. }
            | RefinementStep::Expand { component, .. } => vec![component],
            RefinementStep::RemoveComponent { name } => vec![name],
            RefinementStep::Fold { components, .. } => {
                components.iter().map(String::as_str).collect()
            }
            RefinementStep::AddComponent { .. } | RefinementStep::Rename { .. } => Vec::new(),
        }
    }
}

fn join(set: &ChannelSet) -> String {
    set.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for RefinementStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = self.rule_name();
        match self {
            RefinementStep::RefineBehavior { component, .. } => write!(f, "{rule} {component}"),
            RefinementStep::RefineWithInvariant {
                component,
                invariant,
                ..
            } => write!(f, "{rule} {component} under {invariant}"),
            RefinementStep::AddOutput { component, channel }
            | RefinementStep::RemoveOutput { component, channel }
            | RefinementStep::AddInput { component, channel }
            | RefinementStep::RemoveInput { component, channel } => {
                write!(f, "{rule} {component} {channel}")
            }
            RefinementStep::AddComponent { name } | RefinementStep::RemoveComponent { name } => {
                write!(f, "{rule} {name}")
            }
            RefinementStep::Expand { component, .. } => write!(f, "{rule} {component}"),
            RefinementStep::Fold {
                name,
                components,
                inputs,
                outputs,
            } => write!(
                f,
                "{rule} {name} components {} in {} out {}",
                components.join(" "),
                join(inputs),
                join(outputs)
            ),
            RefinementStep::Rename { old, new } => write!(f, "{rule} {old} {new}"),
        }
    }
}

/// The result of one rule application.
#[derive(Clone, Debug)]
pub struct RuleOutcome {
    pub system: System,
    pub report: PremiseReport,
}

impl RuleOutcome {
    pub fn accepted(&self) -> bool {
        self.report.holds()
    }
}

fn begin(rule: &str, s: &System) -> PremiseReport {
    let mut report = PremiseReport::new(rule);
    let consistency = validate_system(s);
    report.check(
        "consistent",
        "the system is consistent",
        consistency.holds(),
        || consistency.to_string(),
    );
    report
}

/// Commits `after` if every premise held and the result is consistent.
fn finish(before: &System, after: Option<System>, mut report: PremiseReport) -> RuleOutcome {
    match after {
        Some(after) if report.holds() => {
            let consistency = validate_system(&after);
            report.check(
                "result consistent",
                "the refined system is consistent",
                consistency.holds(),
                || consistency.to_string(),
            );
            let system = if report.holds() {
                after
            } else {
                before.clone()
            };
            RuleOutcome { system, report }
        }
        _ => RuleOutcome {
            system: before.clone(),
            report,
        },
    }
}

fn component<'a>(s: &'a System, name: &str) -> Result<&'a Component> {
    s.component(name)
        .ok_or_else(|| Error::UnknownComponent(name.to_string()))
}

fn single(c: &ChannelId) -> ChannelSet {
    [c.clone()].into_iter().collect()
}

/// Bounds of `s` extended with every alphabet of `other` not declared in `s`.
fn merged_bounds(s: &EnumerationBounds, other: &EnumerationBounds) -> EnumerationBounds {
    let mut b = s.clone();
    for (c, a) in other.alphabets() {
        if s.alphabet(c).is_none() {
            b.declare(c.clone(), a.clone());
        }
    }
    b
}

fn check_well_formed(
    report: &mut PremiseReport,
    m: &IntervalTransducer,
    bounds: &EnumerationBounds,
) {
    let wf = validate_transducer(m, bounds);
    let failures: Vec<String> = wf
        .failures()
        .map(|v| format!("{}: {}", v.tag, v.detail.clone().unwrap_or_default()))
        .collect();
    report.check(
        "well-formed",
        "the new behavior has nonempty choice sets and respects the bounds",
        failures.is_empty(),
        || failures.join("\n"),
    );
}

/// Replaces the behavior of `name` by `behavior` after checking
/// `behavior ⊆ behav.c` on every in-bounds input.
pub fn refine_component_behavior(
    s: &System,
    name: &str,
    behavior: &IntervalTransducer,
) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    same_interface(c, behavior)?;
    let mut report = begin("refine-behavior", s);
    check_well_formed(&mut report, behavior, s.bounds());
    match refines_behavior(behavior, c.behavior(), s.bounds())? {
        Refinement::Holds => report.pass(
            "inclusion",
            "every output of the new behavior is allowed by the old one",
        ),
        Refinement::Violated(cex) => report.fail_with(
            "inclusion",
            "every output of the new behavior is allowed by the old one",
            format!("the new behavior of {name} produces an output the old one cannot"),
            cex,
        ),
    }
    let after = s.with_component(name, c.with_behavior(behavior.clone()))?;
    Ok(finish(s, Some(after), report))
}

fn same_interface(c: &Component, m: &IntervalTransducer) -> Result<()> {
    if m.inputs() != c.inputs() || m.outputs() != c.outputs() {
        return Err(Error::Interface(format!(
            "component {} has interface ({} -> {}), the new behavior ({} -> {})",
            c.name(),
            join(c.inputs()),
            join(c.outputs()),
            join(m.inputs()),
            join(m.outputs())
        )));
    }
    Ok(())
}

/// Replaces the behavior of `name` by `behavior`, requiring inclusion only on
/// histories that satisfy `invariant`, after checking that every run of the
/// system satisfies it.
pub fn refine_with_invariant(
    s: &System,
    name: &str,
    behavior: &IntervalTransducer,
    invariant: &Invariant,
) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    same_interface(c, behavior)?;
    let mut report = begin("refine-with-invariant", s);
    if !report.holds() {
        return Ok(finish(s, None, report));
    }
    check_well_formed(&mut report, behavior, s.bounds());
    let bounds = s.bounds();
    let history = s.run_domain();
    let support = invariant.support();
    let outside: ChannelSet = support.difference(&history).cloned().collect();
    if !outside.is_empty() {
        report.fail(
            "support",
            "the invariant ranges over system inputs and component outputs",
            format!("it reads {}", join(&outside)),
        );
        return Ok(finish(s, None, report));
    }
    report.pass(
        "support",
        "the invariant ranges over system inputs and component outputs",
    );

    const ENV: &str = "the invariant does not restrict the system inputs";
    match find_constrained_env(invariant, s.inputs(), bounds)? {
        None => report.pass("inputs unconstrained", ENV),
        Some(env) => report.fail_with(
            "inputs unconstrained",
            ENV,
            "no history extending this input satisfies the invariant",
            Counterexample::Unconstrained { env },
        ),
    }

    const VALID: &str = "every run of the system satisfies the invariant";
    match find_violating_run(s, invariant)? {
        None => report.pass("premise 1", VALID),
        Some(run) => report.fail_with(
            "premise 1",
            VALID,
            format!("a run violates {invariant}"),
            Counterexample::Run { run },
        ),
    }

    const LOCAL: &str =
        "on histories satisfying the invariant, every output of the new behavior is allowed by the old one";
    let domain: ChannelSet = c.inputs().union(&support).cloned().collect();
    match find_excess(behavior, c.behavior(), bounds, &domain, Some(invariant))? {
        None => report.pass("premise 2", LOCAL),
        Some((context, output)) => {
            let input = context.restrict(c.inputs())?;
            report.fail_with(
                "premise 2",
                LOCAL,
                format!("the new behavior of {name} produces an output the old one cannot"),
                Counterexample::Context {
                    context,
                    input,
                    output,
                },
            )
        }
    }
    let after = s.with_component(name, c.with_behavior(behavior.clone()))?;
    Ok(finish(s, Some(after), report))
}

/// Makes the fresh channel `p` an unconstrained output of `name`.
pub fn add_output_channel(s: &System, name: &str, p: &ChannelId) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    let mut report = begin("add-output", s);
    let fresh = !s.inputs().contains(p) && !s.component_outputs().contains(p);
    report.check(
        "fresh",
        "the channel is neither a system input nor a component output",
        fresh,
        || format!("{p} is already in use"),
    );
    let declared = s.bounds().alphabet(p).is_some();
    report.check(
        "alphabet",
        "the channel has a declared alphabet",
        declared,
        || format!("no alphabet for {p}"),
    );
    let after = if report.holds() {
        let m = compose(vec![
            c.behavior().clone(),
            chaos(ChannelSet::new(), single(p)),
        ])?;
        Some(s.with_component(name, c.with_behavior(m))?)
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Hides the unused output `p` of `name`.
pub fn remove_output_channel(s: &System, name: &str, p: &ChannelId) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    let mut report = begin("remove-output", s);
    report.check(
        "is output",
        "the channel is an output of the component",
        c.outputs().contains(p),
        || format!("{p} is not an output of {name}"),
    );
    let used = s.outputs().contains(p) || s.component_inputs().contains(p);
    report.check(
        "unused",
        "the channel is neither a system output nor read by any component",
        !used,
        || format!("{p} is still used"),
    );
    let after = if report.holds() {
        let mut outs = c.outputs().clone();
        outs.remove(p);
        let m = adapt(c.behavior(), c.inputs(), &outs)?;
        Some(s.with_component(name, c.with_behavior(m))?)
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Connects the existing channel `p` to `name`, which ignores it.
pub fn add_input_channel(s: &System, name: &str, p: &ChannelId) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    let mut report = begin("add-input", s);
    report.check(
        "not an input",
        "the channel is not yet an input of the component",
        !c.inputs().contains(p),
        || format!("{p} is already an input of {name}"),
    );
    let connected = s.inputs().contains(p) || s.component_outputs().contains(p);
    report.check(
        "connected",
        "the channel is a system input or a component output",
        connected,
        || format!("{p} is not connected"),
    );
    let after = if report.holds() {
        let mut ins = c.inputs().clone();
        ins.insert(p.clone());
        let m = adapt(c.behavior(), &ins, c.outputs())?;
        Some(s.with_component(name, c.with_behavior(m))?)
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Disconnects input `p` from `name` after checking that its behavior does
/// not depend on `p`.
pub fn remove_input_channel(s: &System, name: &str, p: &ChannelId) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    let mut report = begin("remove-input", s);
    if !c.inputs().contains(p) {
        report.fail(
            "is input",
            "the channel is an input of the component",
            format!("{p} is not an input of {name}"),
        );
        return Ok(finish(s, None, report));
    }
    report.pass("is input", "the channel is an input of the component");
    let m = c.behavior();
    let reduced = unplug(m, p)?;
    let widened = adapt(&reduced, m.inputs(), m.outputs())?;
    const INDEPENDENT: &str = "inputs that differ only on the channel yield the same output sets";
    match equivalent(m, &widened, s.bounds())? {
        Refinement::Holds => report.pass("independent", INDEPENDENT),
        Refinement::Violated(Counterexample::Trace { input, output }) => {
            let silenced = silence(&input, p);
            let (first, second) = if behavior_of(m, &input, s.bounds())?.contains(&output) {
                (input, silenced)
            } else {
                (silenced, input)
            };
            report.fail_with(
                "independent",
                INDEPENDENT,
                format!("the output of {name} depends on {p}"),
                Counterexample::Dependence {
                    first,
                    second,
                    output,
                },
            )
        }
        Refinement::Violated(other) => report.fail_with(
            "independent",
            INDEPENDENT,
            format!("the output of {name} depends on {p}"),
            other,
        ),
    }
    let after = if report.holds() {
        Some(s.with_component(name, c.with_behavior(reduced))?)
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// `x` with channel `p` silent at every step.
fn silence(x: &NamedStreamTuple, p: &ChannelId) -> NamedStreamTuple {
    let slices: Vec<_> = x
        .slices()
        .into_iter()
        .map(|a| Assignment::new([(p.clone(), Interval::empty())]).union(&a))
        .collect();
    NamedStreamTuple::from_slices(&x.domain(), &slices)
}

/// Adds the component `(n, ∅, ∅, α)`, where `α() = {()}`.
pub fn add_component(s: &System, n: &str) -> Result<RuleOutcome> {
    let mut report = begin("add-component", s);
    report.check(
        "fresh name",
        "no component has this name",
        s.component(n).is_none(),
        || format!("{n} is taken"),
    );
    let after = if report.holds() {
        let c = Component::new(
            n,
            ChannelSet::new(),
            ChannelSet::new(),
            chaos(ChannelSet::new(), ChannelSet::new()),
        )?;
        let mut cs = s.components().to_vec();
        cs.push(c);
        Some(s.with_components(cs))
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Removes a component that has no outputs.
pub fn remove_component(s: &System, n: &str) -> Result<RuleOutcome> {
    let c = component(s, n)?;
    let mut report = begin("remove-component", s);
    report.check(
        "no outputs",
        "the component has no output channels",
        c.outputs().is_empty(),
        || format!("{n} writes {}", join(c.outputs())),
    );
    let after = if report.holds() {
        Some(
            s.with_components(
                s.components()
                    .iter()
                    .filter(|x| x.name() != n)
                    .cloned()
                    .collect(),
            ),
        )
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Replaces `name` by the components of `t`, whose black box must equal the
/// component's behavior.
pub fn expand_component(s: &System, name: &str, t: &System) -> Result<RuleOutcome> {
    let c = component(s, name)?;
    let mut report = begin("expand", s);
    let bounds = merged_bounds(s.bounds(), t.bounds());
    let t = &t.with_bounds(bounds.clone());
    let t_consistency = validate_system(t);
    report.check(
        "subsystem consistent",
        "the subsystem is consistent",
        t_consistency.holds(),
        || t_consistency.to_string(),
    );
    let interface = c.inputs() == t.inputs() && c.outputs() == t.outputs();
    report.check(
        "interface",
        "the component interface equals the subsystem interface",
        interface,
        || {
            format!(
                "({} -> {}) vs ({} -> {})",
                join(c.inputs()),
                join(c.outputs()),
                join(t.inputs()),
                join(t.outputs())
            )
        },
    );
    let others: BTreeSet<String> = s
        .components()
        .iter()
        .filter(|x| x.name() != name)
        .map(|x| x.name().to_string())
        .collect();
    let clash: Vec<String> = t.component_names().intersection(&others).cloned().collect();
    report.check(
        "names",
        "subsystem component names are not used by the other components",
        clash.is_empty(),
        || format!("already used: {}", clash.join(" ")),
    );
    let t_out = t.component_outputs();
    let shared: ChannelSet = t_out
        .intersection(&s.component_outputs())
        .cloned()
        .collect();
    report.check(
        "outputs",
        "the subsystem shares exactly the component's outputs with the system",
        &shared == c.outputs(),
        || format!("shared outputs: {}", join(&shared)),
    );
    let reads_env: ChannelSet = t_out.intersection(s.inputs()).cloned().collect();
    report.check(
        "inputs",
        "the subsystem writes no system input",
        reads_env.is_empty(),
        || format!("writes {}", join(&reads_env)),
    );
    const BEHAVIOR: &str = "the component's behavior equals the subsystem's black box";
    if report.holds() {
        let bb = black_box(t)?;
        match equivalent(c.behavior(), &bb, &bounds)? {
            Refinement::Holds => report.pass("behavior", BEHAVIOR),
            Refinement::Violated(cex) => {
                report.fail_with("behavior", BEHAVIOR, "behaviors differ", cex)
            }
        }
    }
    let after = if report.holds() {
        let mut cs = Vec::new();
        for x in s.components() {
            if x.name() == name {
                cs.extend(t.components().iter().cloned());
            } else {
                cs.push(x.clone());
            }
        }
        Some(s.with_components(cs).with_bounds(bounds))
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Replaces the components named in `names` by one component `n` whose
/// behavior is the black box of the subsystem `(inputs, outputs, C_T)`.
pub fn fold_subsystem(
    s: &System,
    names: &[String],
    inputs: &ChannelSet,
    outputs: &ChannelSet,
    n: &str,
) -> Result<RuleOutcome> {
    let mut report = begin("fold", s);
    let unique: BTreeSet<&String> = names.iter().collect();
    let missing: Vec<&str> = names
        .iter()
        .filter(|x| s.component(x).is_none())
        .map(String::as_str)
        .collect();
    report.check(
        "C_T ⊆ C",
        "the folded components belong to the system",
        missing.is_empty() && unique.len() == names.len() && !names.is_empty(),
        || {
            if missing.is_empty() {
                "the component list is empty or repeats a name".to_string()
            } else {
                format!("unknown components: {}", missing.join(" "))
            }
        },
    );
    if !report.holds() {
        return Ok(finish(s, None, report));
    }
    let folded: Vec<Component> = s
        .components()
        .iter()
        .filter(|c| unique.contains(&c.name().to_string()))
        .cloned()
        .collect();
    let rest: Vec<&Component> = s
        .components()
        .iter()
        .filter(|c| !unique.contains(&c.name().to_string()))
        .collect();
    let t_in: ChannelSet = folded
        .iter()
        .flat_map(|c| c.inputs().iter().cloned())
        .collect();
    let t_out: ChannelSet = folded
        .iter()
        .flat_map(|c| c.outputs().iter().cloned())
        .collect();

    let needed: ChannelSet = t_in.difference(&t_out).cloned().collect();
    report.check(
        "inputs cover",
        "every channel the subsystem reads but does not write is a subsystem input",
        needed.is_subset(inputs),
        || {
            format!(
                "missing inputs: {}",
                join(&needed.difference(inputs).cloned().collect())
            )
        },
    );
    let available: ChannelSet = s
        .inputs()
        .union(&s.component_outputs())
        .filter(|c| !outputs.contains(*c))
        .cloned()
        .collect();
    report.check(
        "inputs available",
        "subsystem inputs are system inputs or component outputs, and not subsystem outputs",
        inputs.is_subset(&available),
        || {
            format!(
                "unavailable inputs: {}",
                join(&inputs.difference(&available).cloned().collect())
            )
        },
    );
    let mut consumers: ChannelSet = s.outputs().clone();
    consumers.extend(rest.iter().flat_map(|c| c.inputs().iter().cloned()));
    let exported: ChannelSet = t_out.intersection(&consumers).cloned().collect();
    report.check(
        "outputs cover",
        "every subsystem channel used outside the subsystem is a subsystem output",
        exported.is_subset(outputs),
        || {
            format!(
                "missing outputs: {}",
                join(&exported.difference(outputs).cloned().collect())
            )
        },
    );
    report.check(
        "outputs produced",
        "subsystem outputs are written by the folded components",
        outputs.is_subset(&t_out),
        || {
            format!(
                "not written: {}",
                join(&outputs.difference(&t_out).cloned().collect())
            )
        },
    );
    let name_ok = rest.iter().all(|c| c.name() != n);
    report.check(
        "fresh name",
        "no remaining component has the new name",
        name_ok,
        || format!("{n} is taken"),
    );
    let t = System::new(inputs.clone(), outputs.clone(), folded, s.bounds().clone());
    let t_consistency = validate_system(&t);
    report.check(
        "subsystem consistent",
        "the folded subsystem is consistent",
        t_consistency.holds(),
        || t_consistency.to_string(),
    );
    let after = if report.holds() {
        let c = as_component(&t, n)?;
        let mut cs = Vec::new();
        let mut placed = false;
        for x in s.components() {
            if unique.contains(&x.name().to_string()) {
                if !placed {
                    cs.push(c.clone());
                    placed = true;
                }
            } else {
                cs.push(x.clone());
            }
        }
        Some(s.with_components(cs))
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Renames the internal channel `old` to the unused name `new`.
pub fn rename_channel(s: &System, old: &ChannelId, new: &ChannelId) -> Result<RuleOutcome> {
    let mut report = begin("rename", s);
    let used = s.used_channels();
    report.check(
        "old in use",
        "the channel to rename is used by the system",
        used.contains(old),
        || format!("{old} is not used"),
    );
    let interface = s.inputs().contains(old) || s.outputs().contains(old);
    report.check(
        "internal",
        "the channel is not on the system interface",
        !interface,
        || format!("{old} is a system interface channel"),
    );
    report.check(
        "new unused",
        "the new name is not used by the system",
        !used.contains(new),
        || format!("{new} is already used"),
    );
    let after = if report.holds() {
        let map: BTreeMap<ChannelId, ChannelId> = [(old.clone(), new.clone())].into();
        let rn = |set: &ChannelSet| -> ChannelSet {
            set.iter()
                .map(|c| map.get(c).cloned().unwrap_or_else(|| c.clone()))
                .collect()
        };
        let mut cs = Vec::new();
        for c in s.components() {
            if c.inputs().contains(old) || c.outputs().contains(old) {
                cs.push(Component::new(
                    c.name(),
                    rn(c.inputs()),
                    rn(c.outputs()),
                    rename(c.behavior(), &map)?,
                )?);
            } else {
                cs.push(c.clone());
            }
        }
        let mut bounds = s.bounds().clone();
        if let Some(a) = bounds.alphabet(old).cloned() {
            bounds.remove(old);
            bounds.declare(new.clone(), a);
        }
        Some(s.with_components(cs).with_bounds(bounds))
    } else {
        None
    };
    Ok(finish(s, after, report))
}

/// Applies one rule.
pub fn apply_step(s: &System, step: &RefinementStep) -> Result<RuleOutcome> {
    match step {
        RefinementStep::RefineBehavior {
            component,
            behavior,
        } => refine_component_behavior(s, component, behavior),
        RefinementStep::RefineWithInvariant {
            component,
            behavior,
            invariant,
        } => refine_with_invariant(s, component, behavior, invariant),
        RefinementStep::AddOutput { component, channel } => {
            add_output_channel(s, component, channel)
        }
        RefinementStep::RemoveOutput { component, channel } => {
            remove_output_channel(s, component, channel)
        }
        RefinementStep::AddInput { component, channel } => add_input_channel(s, component, channel),
        RefinementStep::RemoveInput { component, channel } => {
            remove_input_channel(s, component, channel)
        }
        RefinementStep::AddComponent { name } => add_component(s, name),
        RefinementStep::RemoveComponent { name } => remove_component(s, name),
        RefinementStep::Expand {
            component,
            subsystem,
        } => expand_component(s, component, subsystem),
        RefinementStep::Fold {
            name,
            components,
            inputs,
            outputs,
        } => fold_subsystem(s, components, inputs, outputs, name),
        RefinementStep::Rename { old, new } => rename_channel(s, old, new),
    }
}

/// Bounded check that `refined` refines `original`: every black-box output
/// of `refined` on an in-bounds input is an output of `original`.
pub fn check_system_refinement(
    original: &System,
    refined: &System,
    bounds: &EnumerationBounds,
) -> Result<Refinement> {
    if original.inputs() != refined.inputs() || original.outputs() != refined.outputs() {
        return Err(Error::Interface(format!(
            "system interfaces differ: ({} -> {}) vs ({} -> {})",
            join(original.inputs()),
            join(original.outputs()),
            join(refined.inputs()),
            join(refined.outputs())
        )));
    }
    let b = merged_bounds(&merged_bounds(bounds, original.bounds()), refined.bounds());
    let a = black_box(&original.with_bounds(b.clone()))?;
    let r = black_box(&refined.with_bounds(b.clone()))?;
    refines_behavior(&r, &a, &b)
}

/// Bounded black-box equality of two systems with the same interface.
pub fn check_system_equivalence(
    a: &System,
    b: &System,
    bounds: &EnumerationBounds,
) -> Result<Refinement> {
    match check_system_refinement(a, b, bounds)? {
        Refinement::Holds => check_system_refinement(b, a, bounds),
        v => Ok(v),
    }
}

#[cfg(test)]
mod tests;
