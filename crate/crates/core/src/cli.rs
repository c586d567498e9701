//! The `flowrefine` command line.
//!
//! Exit status: 0 on success, 1 when a check or premise fails, 2 on usage,
//! input or parse errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::behaviors::Refinement;
use crate::case_study::{run_case_study, CaseStudyOptions, Profile};
use crate::error::Error;
use crate::format::{
    parse_architecture, parse_env, parse_script, render_architecture, render_runs, ParseErrors,
};
use crate::rules::{apply_script, check_system_refinement};
use crate::streams::EnumerationBounds;
use crate::system::{system_runs, validate_system, System};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILED: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "flowrefine",
    version,
    about = "Check refinements of data flow architectures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Overrides the horizon of the bounds.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Overrides the per-step burst bound.
    #[arg(long)]
    pub burst: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the consistency conditions of an architecture.
    Validate {
        arch: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// List every run of an architecture on an environment input.
    Simulate {
        arch: PathBuf,
        env: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Check that the second architecture refines the first.
    CheckRefine {
        original: PathBuf,
        refined: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Replay a refinement script, checking every premise.
    ApplyScript {
        arch: PathBuf,
        script: PathBuf,
        /// Where to write the refined architecture.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the built-in data acquisition refinement.
    CaseStudy {
        /// Use a decoder that forwards encoded entries unchanged.
        #[arg(long)]
        broken_decoder: bool,
        /// Also compare the black boxes of consecutive systems.
        #[arg(long)]
        verify_steps: bool,
        /// Preprocessing function: `id` or pairs like `0:1,1:2`.
        #[arg(long, default_value = "id")]
        f: String,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}:\n{errors}", path.display())]
    Parse { path: PathBuf, errors: ParseErrors },
    #[error(transparent)]
    Model(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

/// What a command reports: a verdict and its text and JSON renderings.
struct Outcome {
    ok: bool,
    text: String,
    json: Value,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_architecture(path: &Path) -> Result<System, CliError> {
    parse_architecture(&read(path)?)
        .map(|a| a.system)
        .map_err(|errors| CliError::Parse {
            path: path.to_path_buf(),
            errors,
        })
}

fn with_overrides(b: &EnumerationBounds, common: &Common) -> Result<EnumerationBounds, CliError> {
    let mut b = b.clone();
    if let Some(h) = common.horizon {
        b = b.with_horizon(h)?;
    }
    if let Some(n) = common.burst {
        b = b.with_burst(n)?;
    }
    Ok(b)
}

fn bounds_text(b: &EnumerationBounds) -> String {
    format!("horizon {}, burst {}", b.horizon(), b.burst())
}

fn validate(arch: &Path) -> Result<Outcome, CliError> {
    let text = read(arch)?;
    // Consistency violations are the verdict here, not a parse failure.
    let system = crate::format::parse_architecture_unchecked(&text)
        .map_err(|errors| CliError::Parse {
            path: arch.to_path_buf(),
            errors,
        })?
        .system;
    let report = validate_system(&system);
    let ok = report.holds();
    let verdict = if ok { "consistent" } else { "inconsistent" };
    Ok(Outcome {
        ok,
        text: format!("{report}{verdict}\n"),
        json: json!({ "command": "validate", "consistent": ok, "report": report }),
    })
}

fn simulate(arch: &Path, env: &Path, common: &Common) -> Result<Outcome, CliError> {
    let system = load_architecture(arch)?;
    // The environment fixes the horizon; only the burst bound is overridable.
    let mut bounds = system.bounds().clone();
    if let Some(n) = common.burst {
        bounds = bounds.with_burst(n)?;
    }
    let system = system.with_bounds(bounds);
    let mut x = parse_env(&read(env)?).map_err(|errors| CliError::Parse {
        path: env.to_path_buf(),
        errors,
    })?;
    if let Some(h) = common.horizon {
        if h > x.horizon() {
            return Err(CliError::Usage(format!(
                "horizon {h} exceeds the environment's {} intervals",
                x.horizon()
            )));
        }
        x = x.prefix(h)?;
    }
    let runs = system_runs(&system, &x)?;
    let json_runs: Vec<&_> = runs.iter().map(|r| &r.channels).collect();
    Ok(Outcome {
        ok: true,
        text: render_runs(&runs),
        json: json!({ "command": "simulate", "runs": json_runs }),
    })
}

fn refinement_json(r: &Refinement) -> Value {
    json!({ "holds": r.holds(), "counterexample": r.counterexample() })
}

fn check_refine(original: &Path, refined: &Path, common: &Common) -> Result<Outcome, CliError> {
    let a = load_architecture(original)?;
    let b = load_architecture(refined)?;
    let bounds = with_overrides(a.bounds(), common)?;
    let verdict = check_system_refinement(&a, &b, &bounds)?;
    let text = match verdict.counterexample() {
        None => format!("refinement holds ({})\n", bounds_text(&bounds)),
        Some(c) => format!("refinement violated ({})\n{c}\n", bounds_text(&bounds)),
    };
    Ok(Outcome {
        ok: verdict.holds(),
        text,
        json: json!({
            "command": "check-refine",
            "horizon": bounds.horizon(),
            "burst": bounds.burst(),
            "refinement": refinement_json(&verdict),
        }),
    })
}

fn apply(
    arch: &Path,
    script: &Path,
    output: Option<&Path>,
    common: &Common,
) -> Result<Outcome, CliError> {
    let system = load_architecture(arch)?;
    let parsed = parse_script(&read(script)?).map_err(|errors| CliError::Parse {
        path: script.to_path_buf(),
        errors,
    })?;
    parsed.resolve(&system)?;
    let file_bounds = system.bounds().clone();
    let working = system.with_bounds(with_overrides(&file_bounds, common)?);
    let transcript = apply_script(&working, &parsed)?;
    let ok = transcript.accepted();
    let mut text = transcript.to_string();
    if ok {
        if let Some(path) = output {
            let b = transcript.system.bounds();
            let restored = EnumerationBounds::new(
                file_bounds.horizon(),
                file_bounds.burst(),
                b.alphabets().clone(),
            )?;
            let rendered = render_architecture(&transcript.system.with_bounds(restored))?;
            fs::write(path, rendered).map_err(|source| CliError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            text.push_str(&format!("wrote {}\n", path.display()));
        }
    }
    Ok(Outcome {
        ok,
        text,
        json: json!({ "command": "apply-script", "accepted": ok, "transcript": transcript }),
    })
}

fn case_study(
    broken_decoder: bool,
    verify_steps: bool,
    f: &str,
    common: &Common,
) -> Result<Outcome, CliError> {
    let defaults = CaseStudyOptions::default();
    let opts = CaseStudyOptions {
        profile: Profile::tiny(),
        horizon: common.horizon.unwrap_or(defaults.horizon),
        burst: common.burst.unwrap_or(defaults.burst),
        f: f.to_string(),
        broken_decoder,
        verify_steps,
    };
    let run = run_case_study(&opts)?;
    let mut text = format!("case study ({})\n", bounds_text(run.original.bounds()));
    text.push_str(&run.transcript.to_string());
    for c in &run.step_checks {
        let relation = if c.equality { "equal to" } else { "refines" };
        let mark = if c.verdict.holds() { "ok" } else { "FAILED" };
        text.push_str(&format!(
            "black box after {} {relation} the previous one: {mark}\n",
            c.label
        ));
    }
    match &run.final_refinement {
        Some(r) if r.holds() => text.push_str("final system refines the original\n"),
        Some(r) => text.push_str(&format!(
            "final system does not refine the original\n{}\n",
            r.counterexample()
                .map(ToString::to_string)
                .unwrap_or_default()
        )),
        None => {}
    }
    let checks: Vec<Value> = run
        .step_checks
        .iter()
        .map(|c| json!({ "label": c.label, "equality": c.equality, "refinement": refinement_json(&c.verdict) }))
        .collect();
    Ok(Outcome {
        ok: run.accepted(),
        text,
        json: json!({
            "command": "case-study",
            "accepted": run.accepted(),
            "transcript": run.transcript,
            "step_checks": checks,
            "final_refinement": run.final_refinement.as_ref().map(refinement_json),
        }),
    })
}

fn dispatch(command: &Command) -> Result<(Outcome, Format), CliError> {
    Ok(match command {
        Command::Validate { arch, common } => (validate(arch)?, common.format),
        Command::Simulate { arch, env, common } => (simulate(arch, env, common)?, common.format),
        Command::CheckRefine {
            original,
            refined,
            common,
        } => (check_refine(original, refined, common)?, common.format),
        Command::ApplyScript {
            arch,
            script,
            output,
            common,
        } => (
            apply(arch, script, output.as_deref(), common)?,
            common.format,
        ),
        Command::CaseStudy {
            broken_decoder,
            verify_steps,
            f,
            common,
        } => (
            case_study(*broken_decoder, *verify_steps, f, common)?,
            common.format,
        ),
    })
}

/// Runs one command, writing the report to `out` and errors to `err`.
/// Returns the exit status.
pub fn run(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    match dispatch(&cli.command) {
        Ok((outcome, format)) => {
            let written = match format {
                Format::Text => out.write_all(outcome.text.as_bytes()),
                Format::Json => serde_json::to_writer_pretty(&mut *out, &outcome.json)
                    .map_err(std::io::Error::from)
                    .and_then(|()| writeln!(out)),
            };
            if let Err(e) = written {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
            if outcome.ok {
                EXIT_OK
            } else {
                EXIT_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}
