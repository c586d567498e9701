use std::fmt;

use serde::Serialize;

use crate::streams::NamedStreamTuple;

/// A concrete witness for a failed premise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Counterexample {
    /// The refined side produces `output` on `input`; the original cannot.
    Trace {
        input: NamedStreamTuple,
        output: NamedStreamTuple,
    },
    /// A system run that violates an invariant.
    Run { run: NamedStreamTuple },
    /// `context` satisfies the invariant, but on `input = context↾in.c` the
    /// new behavior produces `output`, which the old one cannot.
    Context {
        context: NamedStreamTuple,
        input: NamedStreamTuple,
        output: NamedStreamTuple,
    },
    /// Two inputs agreeing off the removed channel with different output
    /// sets; `output` is produced on `first` but not on `second`.
    Dependence {
        first: NamedStreamTuple,
        second: NamedStreamTuple,
        output: NamedStreamTuple,
    },
    /// An environment input with no extension satisfying the invariant.
    Unconstrained { env: NamedStreamTuple },
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterexample::Trace { input, output } => {
                write!(f, "input:\n{input}\nunmatched output:\n{output}")
            }
            Counterexample::Run { run } => write!(f, "violating run:\n{run}"),
            Counterexample::Context {
                context,
                input,
                output,
            } => write!(
                f,
                "context satisfying the invariant:\n{context}\ncomponent input:\n{input}\nunmatched output:\n{output}"
            ),
            Counterexample::Dependence {
                first,
                second,
                output,
            } => write!(
                f,
                "input:\n{first}\nproduces\n{output}\nbut input:\n{second}\ndoes not"
            ),
            Counterexample::Unconstrained { env } => {
                write!(f, "environment input with no admissible extension:\n{env}")
            }
        }
    }
}

/// One checked premise.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PremiseVerdict {
    pub tag: String,
    pub premise: String,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

/// The verdicts of every premise checked for one rule application.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PremiseReport {
    pub rule: String,
    pub verdicts: Vec<PremiseVerdict>,
}

impl PremiseReport {
    pub fn new(rule: impl Into<String>) -> Self {
        Self {
            rule: rule.into(),
            verdicts: Vec::new(),
        }
    }

    pub fn pass(&mut self, tag: &str, premise: &str) {
        self.push(tag, premise, true, None, None);
    }

    pub fn fail(&mut self, tag: &str, premise: &str, detail: impl Into<String>) {
        self.push(tag, premise, false, Some(detail.into()), None);
    }

    pub fn fail_with(
        &mut self,
        tag: &str,
        premise: &str,
        detail: impl Into<String>,
        counterexample: Counterexample,
    ) {
        self.push(
            tag,
            premise,
            false,
            Some(detail.into()),
            Some(counterexample),
        );
    }

    /// Records `holds` as a pass or a failure with `detail`.
    pub fn check(
        &mut self,
        tag: &str,
        premise: &str,
        holds: bool,
        detail: impl FnOnce() -> String,
    ) {
        if holds {
            self.pass(tag, premise);
        } else {
            self.fail(tag, premise, detail());
        }
    }

    fn push(
        &mut self,
        tag: &str,
        premise: &str,
        holds: bool,
        detail: Option<String>,
        counterexample: Option<Counterexample>,
    ) {
        self.verdicts.push(PremiseVerdict {
            tag: tag.to_string(),
            premise: premise.to_string(),
            holds,
            detail,
            counterexample,
        });
    }

    /// Appends another report's verdicts, prefixing their tags.
    pub fn absorb(&mut self, prefix: &str, other: PremiseReport) {
        for mut v in other.verdicts {
            v.tag = format!("{prefix}{}", v.tag);
            self.verdicts.push(v);
        }
    }

    pub fn holds(&self) -> bool {
        self.verdicts.iter().all(|v| v.holds)
    }

    pub fn failures(&self) -> impl Iterator<Item = &PremiseVerdict> {
        self.verdicts.iter().filter(|v| !v.holds)
    }

    pub fn counterexample(&self) -> Option<&Counterexample> {
        self.failures().find_map(|v| v.counterexample.as_ref())
    }
}

impl fmt::Display for PremiseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}:", self.rule)?;
        if self.verdicts.is_empty() {
            writeln!(f, "  (no violations)")?;
        }
        for v in &self.verdicts {
            let mark = if v.holds { "ok  " } else { "FAIL" };
            writeln!(f, "  [{mark}] {}: {}", v.tag, v.premise)?;
            if let Some(d) = &v.detail {
                for line in d.lines() {
                    writeln!(f, "         {line}")?;
                }
            }
            if let Some(c) = &v.counterexample {
                for line in c.to_string().lines() {
                    writeln!(f, "         {line}")?;
                }
            }
        }
        Ok(())
    }
}
