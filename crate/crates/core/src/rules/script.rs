//! Replayable sequences of rule applications.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{apply_step, PremiseReport, RefinementStep};
use crate::error::{Error, Result};
use crate::streams::{Alphabet, ChannelId};
use crate::system::System;

/// A labelled group of applications, applied in order.
#[derive(Clone, Debug, PartialEq)]
pub struct ScriptStep {
    pub label: String,
    pub applications: Vec<RefinementStep>,
}

/// Channel declarations followed by steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Script {
    pub channels: Vec<(ChannelId, Arc<Alphabet>)>,
    pub steps: Vec<ScriptStep>,
}

impl Script {
    /// Tracks component names through the steps and reports the first
    /// reference to a component that does not exist at that point.
    pub fn resolve(&self, s: &System) -> Result<()> {
        let mut names: BTreeSet<String> = s.component_names();
        for (i, step) in self.steps.iter().enumerate() {
            for app in &step.applications {
                for n in app.referenced_components() {
                    if !names.contains(n) {
                        return Err(Error::UnknownComponent(format!(
                            "{n} (step {} {:?})",
                            i + 1,
                            step.label
                        )));
                    }
                }
                match app {
                    RefinementStep::AddComponent { name } => {
                        names.insert(name.clone());
                    }
                    RefinementStep::RemoveComponent { name } => {
                        names.remove(name);
                    }
                    RefinementStep::Expand {
                        component,
                        subsystem,
                    } => {
                        names.remove(component);
                        names.extend(subsystem.component_names());
                    }
                    RefinementStep::Fold {
                        name, components, ..
                    } => {
                        for c in components {
                            names.remove(c);
                        }
                        names.insert(name.clone());
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ApplicationRecord {
    pub application: String,
    pub report: PremiseReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub label: String,
    pub accepted: bool,
    pub applications: Vec<ApplicationRecord>,
}

/// What happened when a script was replayed.
#[derive(Clone, Debug, Serialize)]
pub struct Transcript {
    pub steps: Vec<StepRecord>,
    /// One-based index of the first step with a failed application.
    pub failed_step: Option<usize>,
    /// The system after the last accepted application.
    #[serde(skip)]
    pub system: System,
}

impl Transcript {
    pub fn accepted(&self) -> bool {
        self.failed_step.is_none()
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for step in &self.steps {
            let mark = if step.accepted {
                "accepted"
            } else {
                "REJECTED"
            };
            writeln!(f, "step {} {}: {mark}", step.index, step.label)?;
            for a in &step.applications {
                writeln!(f, "  {}", a.application)?;
                for line in a.report.to_string().lines() {
                    writeln!(f, "    {line}")?;
                }
            }
        }
        match self.failed_step {
            None => writeln!(f, "all {} steps accepted", self.steps.len()),
            Some(i) => writeln!(f, "stopped at step {i}"),
        }
    }
}

/// Applies the script's steps in order, stopping at the first failed
/// application. Rule errors (such as an interface mismatch) count as failures.
pub fn apply_script(s: &System, script: &Script) -> Result<Transcript> {
    let mut bounds = s.bounds().clone();
    for (c, a) in &script.channels {
        match bounds.alphabet(c) {
            Some(existing) if existing.as_ref() != a.as_ref() => {
                return Err(Error::Bounds(format!(
                    "channel {c} already has alphabet {}",
                    existing.name()
                )))
            }
            _ => bounds.declare(c.clone(), a.clone()),
        }
    }
    let mut current = s.with_bounds(bounds);
    let mut records = Vec::new();
    for (i, step) in script.steps.iter().enumerate() {
        let mut record = StepRecord {
            index: i + 1,
            label: step.label.clone(),
            accepted: true,
            applications: Vec::new(),
        };
        for app in &step.applications {
            let report = match apply_step(&current, app) {
                Ok(outcome) => {
                    current = outcome.system;
                    outcome.report
                }
                Err(e) => {
                    let mut r = PremiseReport::new(app.rule_name());
                    r.fail(
                        "applicable",
                        "the rule applies to the system",
                        e.to_string(),
                    );
                    r
                }
            };
            let ok = report.holds();
            record.applications.push(ApplicationRecord {
                application: app.to_string(),
                report,
            });
            if !ok {
                record.accepted = false;
                break;
            }
        }
        let ok = record.accepted;
        records.push(record);
        if !ok {
            return Ok(Transcript {
                steps: records,
                failed_step: Some(i + 1),
                system: current,
            });
        }
    }
    Ok(Transcript {
        steps: records,
        failed_step: None,
        system: current,
    })
}
