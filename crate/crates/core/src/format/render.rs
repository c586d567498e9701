//! Canonical rendering. Parsing a rendered document and rendering it again
//! reproduces the same text.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::sync::Arc;

use crate::behaviors::{IntervalTransducer, Kind, TableMachine};
use crate::error::{Error, Result};
use crate::rules::{RefinementStep, Script};
use crate::streams::{
    Alphabet, Assignment, ChannelId, ChannelSet, EnumerationBounds, NamedStreamTuple,
};
use crate::system::{System, SystemRun};

fn words(set: &ChannelSet) -> String {
    set.iter()
        .map(ChannelId::as_str)
        .collect::<Vec<_>>()
        .join(" ")
}

fn keyword_line(out: &mut String, indent: usize, keyword: &str, rest: &str) {
    let pad = "  ".repeat(indent);
    if rest.is_empty() {
        let _ = writeln!(out, "{pad}{keyword}");
    } else {
        let _ = writeln!(out, "{pad}{keyword} {rest}");
    }
}

fn bindings(a: &Assignment) -> String {
    a.bindings()
        .iter()
        .map(|(c, iv)| format!("{c}={iv}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Table machines referenced anywhere in the documents being rendered,
/// keyed by name. Two different tables with one name cannot be rendered.
#[derive(Default)]
struct Tables(BTreeMap<String, TableMachine>);

impl Tables {
    fn collect(&mut self, m: &IntervalTransducer) -> Result<()> {
        match m.kind() {
            Kind::Table(t) => match self.0.get(t.name()) {
                Some(existing) if existing != t.as_ref() => {
                    return Err(Error::Library(format!(
                        "two different machines are named {}",
                        t.name()
                    )))
                }
                Some(_) => {}
                None => {
                    self.0.insert(t.name().to_string(), t.as_ref().clone());
                }
            },
            Kind::Chaos | Kind::Primitive(_) => {}
            Kind::Adapt(inner) | Kind::Rename { inner, .. } | Kind::Unplug { inner, .. } => {
                self.collect(inner)?
            }
            Kind::Compose(parts) => {
                for p in parts {
                    self.collect(p)?;
                }
            }
            Kind::Subsystem { system, .. } => self.collect_system(system)?,
        }
        Ok(())
    }

    fn collect_system(&mut self, s: &System) -> Result<()> {
        for c in s.components() {
            self.collect(c.behavior())?;
        }
        Ok(())
    }
}

fn render_machine(out: &mut String, m: &TableMachine) {
    keyword_line(out, 0, "machine", m.name());
    keyword_line(out, 1, "in", &words(m.inputs()));
    keyword_line(out, 1, "out", &words(m.outputs()));
    keyword_line(out, 1, "initial", &m.states()[m.initial()].name);
    for s in m.states() {
        keyword_line(out, 1, "state", &s.name);
        for e in &s.emits {
            let nonempty = Assignment::new(
                e.bindings()
                    .iter()
                    .filter(|(_, iv)| !iv.is_empty())
                    .cloned(),
            );
            keyword_line(out, 2, "emit", &bindings(&nonempty));
        }
        for t in &s.transitions {
            let mut rest = bindings(&t.on_output);
            rest.push_str(if rest.is_empty() { "/" } else { " /" });
            let input = bindings(&t.on_input);
            if !input.is_empty() {
                rest.push(' ');
                rest.push_str(&input);
            }
            rest.push_str(" ->");
            for &target in &t.targets {
                rest.push(' ');
                rest.push_str(&m.states()[target].name);
            }
            keyword_line(out, 2, "advance", &rest);
        }
        keyword_line(out, 1, "end", "");
    }
    keyword_line(out, 0, "end", "");
}

/// Writes `m` with its first line prefixed by `lead` at `indent`.
fn render_expr(out: &mut String, indent: usize, lead: &str, m: &IntervalTransducer) {
    let head = |kw: &str| {
        if lead.is_empty() {
            kw.to_string()
        } else {
            format!("{lead} {kw}")
        }
    };
    let arrow = |i: &ChannelSet, o: &ChannelSet| {
        [words(i), "->".into(), words(o)]
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    };
    match m.kind() {
        Kind::Table(t) => keyword_line(out, indent, &head("machine"), t.name()),
        Kind::Chaos => keyword_line(out, indent, &head("chaos"), &arrow(m.inputs(), m.outputs())),
        Kind::Primitive(p) => {
            let mut rest = p.kind().to_string();
            for (k, v) in p.params() {
                let _ = write!(rest, " {k}={v}");
            }
            keyword_line(out, indent, &head("library"), &rest);
        }
        Kind::Adapt(inner) => {
            keyword_line(out, indent, &head("adapt"), &arrow(m.inputs(), m.outputs()));
            render_expr(out, indent + 1, "", inner);
            keyword_line(out, indent, "end", "");
        }
        Kind::Compose(parts) => {
            keyword_line(out, indent, &head("compose"), "");
            for p in parts {
                render_expr(out, indent + 1, "", p);
            }
            keyword_line(out, indent, "end", "");
        }
        Kind::Rename {
            inner, to_outer, ..
        } => {
            let pairs = to_outer
                .iter()
                .map(|(a, b)| format!("{a}->{b}"))
                .collect::<Vec<_>>()
                .join(" ");
            keyword_line(out, indent, &head("rename"), &pairs);
            render_expr(out, indent + 1, "", inner);
            keyword_line(out, indent, "end", "");
        }
        Kind::Unplug { inner, channel } => {
            keyword_line(out, indent, &head("unplug"), channel.as_str());
            render_expr(out, indent + 1, "", inner);
            keyword_line(out, indent, "end", "");
        }
        Kind::Subsystem { system, .. } => {
            keyword_line(out, indent, &head("system"), "");
            render_system_body(out, indent + 1, system);
            keyword_line(out, indent, "end", "");
        }
    }
}

fn render_system_body(out: &mut String, indent: usize, s: &System) {
    keyword_line(out, indent, "in", &words(s.inputs()));
    keyword_line(out, indent, "out", &words(s.outputs()));
    for c in s.components() {
        keyword_line(out, indent, "component", c.name());
        keyword_line(out, indent + 1, "in", &words(c.inputs()));
        keyword_line(out, indent + 1, "out", &words(c.outputs()));
        render_expr(out, indent + 1, "behavior", c.behavior());
        keyword_line(out, indent, "end", "");
    }
}

/// Alphabet and channel declarations, grouped by alphabet in order of first
/// use over the given channel order.
fn render_declarations<'a>(
    out: &mut String,
    channels: impl Iterator<Item = (&'a ChannelId, &'a Arc<Alphabet>)>,
) -> Result<()> {
    let mut groups: Vec<(Arc<Alphabet>, Vec<&ChannelId>)> = Vec::new();
    for (c, a) in channels {
        match groups.iter_mut().find(|(g, _)| g.name() == a.name()) {
            Some((g, _)) if g.as_ref() != a.as_ref() => {
                return Err(Error::Library(format!(
                    "two different alphabets are named {}",
                    a.name()
                )))
            }
            Some((_, cs)) => cs.push(c),
            None => groups.push((a.clone(), vec![c])),
        }
    }
    if groups.is_empty() {
        return Ok(());
    }
    for (a, _) in &groups {
        let msgs: Vec<&str> = a.messages().iter().map(|m| m.as_str()).collect();
        let _ = writeln!(out, "alphabet {} = {}", a.name(), msgs.join(" "));
    }
    out.push('\n');
    for (a, cs) in &groups {
        let names: Vec<&str> = cs.iter().map(|c| c.as_str()).collect();
        let _ = writeln!(out, "channel {} : {}", names.join(" "), a.name());
    }
    out.push('\n');
    Ok(())
}

fn render_tables(out: &mut String, tables: &Tables) {
    for m in tables.0.values() {
        render_machine(out, m);
        out.push('\n');
    }
}

fn render_bounds(out: &mut String, b: &EnumerationBounds) {
    let _ = writeln!(out, "bounds horizon {} burst {}\n", b.horizon(), b.burst());
}

/// The architecture document of `s`: bounds, declarations of every channel
/// with an alphabet, the table machines its behaviors use, and the system.
pub fn render_architecture(s: &System) -> Result<String> {
    let mut tables = Tables::default();
    tables.collect_system(s)?;
    let mut out = String::new();
    render_bounds(&mut out, s.bounds());
    render_declarations(&mut out, s.bounds().alphabets().iter())?;
    render_tables(&mut out, &tables);
    out.push_str("system\n");
    render_system_body(&mut out, 1, s);
    out.push_str("end\n");
    Ok(out)
}

fn render_application(out: &mut String, a: &RefinementStep) {
    match a {
        RefinementStep::RefineBehavior { behavior, .. } => {
            keyword_line(out, 1, &a.to_string(), "");
            render_expr(out, 2, "", behavior);
            keyword_line(out, 1, "end", "");
        }
        RefinementStep::RefineWithInvariant {
            component,
            behavior,
            invariant,
        } => {
            keyword_line(out, 1, a.rule_name(), component);
            keyword_line(out, 2, "invariant", &invariant.to_string());
            render_expr(out, 2, "", behavior);
            keyword_line(out, 1, "end", "");
        }
        RefinementStep::Expand { subsystem, .. } => {
            keyword_line(out, 1, &a.to_string(), "");
            keyword_line(out, 2, "system", "");
            render_system_body(out, 3, subsystem);
            keyword_line(out, 2, "end", "");
            keyword_line(out, 1, "end", "");
        }
        _ => keyword_line(out, 1, &a.to_string(), ""),
    }
}

/// The script document: its channel declarations, the table machines its
/// behaviors use, and its steps.
pub fn render_script(script: &Script) -> Result<String> {
    let mut tables = Tables::default();
    for step in &script.steps {
        for a in &step.applications {
            match a {
                RefinementStep::RefineBehavior { behavior, .. }
                | RefinementStep::RefineWithInvariant { behavior, .. } => {
                    tables.collect(behavior)?
                }
                RefinementStep::Expand { subsystem, .. } => tables.collect_system(subsystem)?,
                _ => {}
            }
        }
    }
    let mut out = String::new();
    render_declarations(&mut out, script.channels.iter().map(|(c, a)| (c, a)))?;
    render_tables(&mut out, &tables);
    for (i, step) in script.steps.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        keyword_line(&mut out, 0, "step", &step.label);
        for a in &step.applications {
            render_application(&mut out, a);
        }
        keyword_line(&mut out, 0, "end", "");
    }
    Ok(out)
}

/// One `CHANNEL = <…> …` line per channel, in channel order.
pub fn render_env(x: &NamedStreamTuple) -> String {
    let mut out = String::new();
    for (c, s) in x.iter() {
        let _ = write!(out, "{c} =");
        for iv in s.intervals() {
            let _ = write!(out, " {iv}");
        }
        out.push('\n');
    }
    out
}

/// The run listing printed by `simulate`.
pub fn render_runs(runs: &[SystemRun]) -> String {
    let mut out = format!("runs {}\n", runs.len());
    for (i, r) in runs.iter().enumerate() {
        let _ = writeln!(out, "\nrun {}", i + 1);
        for line in render_env(&r.channels).lines() {
            let _ = writeln!(out, "  {line}");
        }
    }
    out
}
