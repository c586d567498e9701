//! The data acquisition system: a preprocessor feeding a database, refined
//! in eight steps into a pipeline that transmits difference-encoded entries.
//!
//! Channels: `In` (raw entries), `Key` (queries), `Data` (answers), `I`
//! (preprocessed entries), `D` (encoded entries), `R` (restored entries).

pub mod codec;
mod machines;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use codec::{Codec, Data, Database, Entry, BOT};
pub use machines::{library, library_machine, Params, LIBRARY_KINDS};

use crate::behaviors::{adapt, Refinement};
use crate::error::Result;
use crate::rules::{
    apply_script, check_system_equivalence, check_system_refinement, Invariant, RefinementStep,
    Script, ScriptStep, Transcript,
};
use crate::streams::{channels, Alphabet, ChannelId, ChannelSet, EnumerationBounds, Message};
use crate::system::{Component, System};

/// Keys and data values of the case study.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Profile {
    pub keys: Vec<String>,
    pub modulus: u32,
}

impl Profile {
    /// One key `a`, data values `0 1 2`.
    pub fn tiny() -> Self {
        Self {
            keys: vec!["a".into()],
            modulus: 3,
        }
    }

    pub fn codec(&self) -> Codec {
        Codec::new(self.modulus).expect("profile modulus is positive")
    }

    pub fn entry_alphabet(&self) -> Alphabet {
        Alphabet::new(
            "Entry",
            self.keys.iter().flat_map(|k| {
                (0..self.modulus).map(move |v| Entry::new(k.clone(), v).to_message())
            }),
        )
    }

    pub fn key_alphabet(&self) -> Result<Alphabet> {
        let keys = self
            .keys
            .iter()
            .map(|k| Message::new(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Alphabet::new("Key", keys))
    }

    pub fn data_alphabet(&self) -> Alphabet {
        Alphabet::new(
            "Data",
            self.codec().data().into_iter().map(Data::to_message),
        )
    }

    /// Bounds declaring all six case-study channels.
    pub fn bounds(&self, horizon: usize, burst: usize) -> Result<EnumerationBounds> {
        let entry = Arc::new(self.entry_alphabet());
        let key = Arc::new(self.key_alphabet()?);
        let data = Arc::new(self.data_alphabet());
        let mut map = BTreeMap::new();
        for c in ["In", "I", "D", "R"] {
            map.insert(ChannelId::new(c)?, entry.clone());
        }
        map.insert(ChannelId::from_static("Key"), key);
        map.insert(ChannelId::from_static("Data"), data);
        EnumerationBounds::new(horizon, burst, map)
    }

    fn mod_param(&self) -> String {
        self.modulus.to_string()
    }
}

fn ch(s: &'static str) -> ChannelId {
    ChannelId::from_static(s)
}

/// `R` carries, at every time boundary, a prefix of `I` equal to the
/// encoded-then-decoded image of that prefix.
pub fn case_study_invariant(codec: Codec) -> Invariant {
    Invariant::CodecPrefix {
        follower: ch("R"),
        source: ch("I"),
        codec,
    }
}

/// `PRE: In → I` applying `f` (`id` or pairs like `0:1,1:2`) and
/// `RDB: I, Key → Data`.
pub fn original_system(profile: &Profile, bounds: EnumerationBounds, f: &str) -> Result<System> {
    let pre = library("pre", &[("in", "In"), ("out", "I"), ("f", f)])?;
    let rdb = library(
        "rdb",
        &[
            ("store", "I"),
            ("query", "Key"),
            ("answer", "Data"),
            ("mod", &profile.mod_param()),
        ],
    )?;
    Ok(System::new(
        channels(&["In", "Key"]),
        channels(&["Data"]),
        vec![
            Component::from_behavior("PRE", pre)?,
            Component::from_behavior("RDB", rdb)?,
        ],
        bounds,
    ))
}

/// The eight refinement steps. With `broken_decoder`, the decoder forwards
/// encoded entries without restoring them.
pub fn refinement_script(profile: &Profile, broken_decoder: bool) -> Result<Script> {
    let m = profile.mod_param();
    let name = |s: &str| s.to_string();
    let step = |label: &str, applications: Vec<RefinementStep>| ScriptStep {
        label: label.to_string(),
        applications,
    };
    let dec = library(
        "dec",
        &[
            ("in", "D"),
            ("out", "R"),
            ("mod", &m),
            ("raw", if broken_decoder { "true" } else { "false" }),
        ],
    )?;
    let new_rdb = adapt(
        &library(
            "rdb",
            &[
                ("store", "R"),
                ("query", "Key"),
                ("answer", "Data"),
                ("mod", &m),
            ],
        )?,
        &channels(&["I", "Key", "R"]),
        &channels(&["Data"]),
    )?;
    Ok(Script {
        channels: Vec::new(),
        steps: vec![
            step(
                "introduce-coders",
                vec![
                    RefinementStep::AddComponent { name: name("ENC") },
                    RefinementStep::AddComponent { name: name("DEC") },
                ],
            ),
            step(
                "coder-outputs",
                vec![
                    RefinementStep::AddOutput {
                        component: name("ENC"),
                        channel: ch("D"),
                    },
                    RefinementStep::AddOutput {
                        component: name("DEC"),
                        channel: ch("R"),
                    },
                ],
            ),
            step(
                "coder-inputs",
                vec![
                    RefinementStep::AddInput {
                        component: name("ENC"),
                        channel: ch("I"),
                    },
                    RefinementStep::AddInput {
                        component: name("DEC"),
                        channel: ch("D"),
                    },
                ],
            ),
            step(
                "coder-behaviors",
                vec![
                    RefinementStep::RefineBehavior {
                        component: name("ENC"),
                        behavior: library("enc", &[("in", "I"), ("out", "D"), ("mod", &m)])?,
                    },
                    RefinementStep::RefineBehavior {
                        component: name("DEC"),
                        behavior: dec,
                    },
                ],
            ),
            step(
                "connect-restored",
                vec![RefinementStep::AddInput {
                    component: name("RDB"),
                    channel: ch("R"),
                }],
            ),
            step(
                "store-restored",
                vec![RefinementStep::RefineWithInvariant {
                    component: name("RDB"),
                    behavior: new_rdb,
                    invariant: case_study_invariant(profile.codec()),
                }],
            ),
            step(
                "disconnect-raw",
                vec![RefinementStep::RemoveInput {
                    component: name("RDB"),
                    channel: ch("I"),
                }],
            ),
            step(
                "fold",
                vec![
                    RefinementStep::Fold {
                        name: name("PRE'"),
                        components: vec![name("PRE"), name("ENC")],
                        inputs: channels(&["In"]),
                        outputs: channels(&["D"]),
                    },
                    RefinementStep::Fold {
                        name: name("RDB'"),
                        components: vec![name("DEC"), name("RDB")],
                        inputs: channels(&["D", "Key"]),
                        outputs: channels(&["Data"]),
                    },
                ],
            ),
        ],
    })
}

/// A bounded black-box comparison between consecutive systems.
#[derive(Clone, Debug)]
pub struct StepCheck {
    pub label: String,
    /// Equality for architectural steps, inclusion otherwise.
    pub equality: bool,
    pub verdict: Refinement,
}

#[derive(Clone, Debug)]
pub struct CaseStudyRun {
    pub original: System,
    pub transcript: Transcript,
    /// Whether the final system refines the original; absent when a step failed.
    pub final_refinement: Option<Refinement>,
    pub step_checks: Vec<StepCheck>,
}

impl CaseStudyRun {
    pub fn accepted(&self) -> bool {
        self.transcript.accepted() && self.final_refinement.as_ref().is_some_and(|r| r.holds())
    }

    pub fn final_system(&self) -> &System {
        &self.transcript.system
    }

    /// Names of the final components and its internal channels.
    pub fn final_shape(&self) -> (Vec<String>, ChannelSet) {
        let s = self.final_system();
        let names = s
            .components()
            .iter()
            .map(|c| c.name().to_string())
            .collect();
        let internal = s
            .component_outputs()
            .difference(s.outputs())
            .cloned()
            .collect();
        (names, internal)
    }
}

/// Options for [`run_case_study`].
#[derive(Clone, Debug)]
pub struct CaseStudyOptions {
    pub profile: Profile,
    pub horizon: usize,
    pub burst: usize,
    pub f: String,
    pub broken_decoder: bool,
    /// Also compare the black boxes of consecutive systems.
    pub verify_steps: bool,
}

impl Default for CaseStudyOptions {
    fn default() -> Self {
        Self {
            profile: Profile::tiny(),
            horizon: 4,
            burst: 1,
            f: "id".into(),
            broken_decoder: false,
            verify_steps: false,
        }
    }
}

/// Builds the original system, replays the eight steps with every premise
/// checked, and checks that the final system refines the original.
pub fn run_case_study(opts: &CaseStudyOptions) -> Result<CaseStudyRun> {
    let bounds = opts.profile.bounds(opts.horizon, opts.burst)?;
    let original = original_system(&opts.profile, bounds.clone(), &opts.f)?;
    let script = refinement_script(&opts.profile, opts.broken_decoder)?;
    let transcript = apply_script(&original, &script)?;
    let mut step_checks = Vec::new();
    if opts.verify_steps && transcript.accepted() {
        let mut prev = original.clone();
        for step in &script.steps {
            let single = Script {
                channels: Vec::new(),
                steps: vec![step.clone()],
            };
            let next = apply_script(&prev, &single)?.system;
            let equality = step
                .applications
                .iter()
                .all(RefinementStep::is_architectural);
            let verdict = if equality {
                check_system_equivalence(&prev, &next, &bounds)?
            } else {
                check_system_refinement(&prev, &next, &bounds)?
            };
            step_checks.push(StepCheck {
                label: step.label.clone(),
                equality,
                verdict,
            });
            prev = next;
        }
    }
    let final_refinement = if transcript.accepted() {
        Some(check_system_refinement(
            &original,
            &transcript.system,
            &bounds,
        )?)
    } else {
        None
    };
    Ok(CaseStudyRun {
        original,
        transcript,
        final_refinement,
        step_checks,
    })
}
