//! `acteach` command line.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, ParsedRun, SweepParam};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUN_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "acteach",
    about = "Actor-critic training with teacher ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one run. Accepts `--config FILE`, `--out FILE` and any
    /// `--key value` override.
    Train {
        #[arg(allow_hyphen_values = true, trailing_var_arg = true, num_args = 0..)]
        args: Vec<String>,
    },
    /// Train the product of `--param key=v1,v2` lists over `--seeds N`
    /// seeds, `--jobs J` at a time. Other `--key value` pairs set the base.
    Sweep {
        #[arg(allow_hyphen_values = true, trailing_var_arg = true, num_args = 0..)]
        args: Vec<String>,
    },
    /// Classify tabular teacher policies.
    Audit {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long = "policy")]
        policies: Vec<PathBuf>,
    },
    /// Mean and std across runs per step.
    Report {
        /// Run CSVs or directories of them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "eval")]
        kind: String,
        #[arg(long, default_value = "eval_return_mean")]
        column: String,
    },
}

fn is_usage(e: &Error) -> bool {
    matches!(
        e,
        Error::UnknownKey(_)
            | Error::InvalidValue { .. }
            | Error::InvalidConfig(_)
            | Error::Parse { .. }
    )
}

/// Remove every `--name value` (or `--name=value`) from `args`.
fn take_option(args: &mut Vec<String>, name: &str) -> Result<Vec<String>> {
    let flag = format!("--{name}");
    let prefix = format!("--{name}=");
    let mut found = Vec::new();
    let mut rest = Vec::with_capacity(args.len());
    let mut it = std::mem::take(args).into_iter();
    while let Some(a) = it.next() {
        if a == flag {
            let v = it.next().ok_or_else(|| Error::InvalidValue {
                key: name.into(),
                value: String::new(),
                reason: "missing value".into(),
            })?;
            found.push(v);
        } else if let Some(v) = a.strip_prefix(&prefix) {
            found.push(v.to_string());
        } else {
            rest.push(a);
        }
    }
    *args = rest;
    Ok(found)
}

fn single(values: Vec<String>, name: &str) -> Result<Option<String>> {
    if values.len() > 1 {
        return Err(Error::InvalidValue {
            key: name.into(),
            value: values.join(","),
            reason: "given more than once".into(),
        });
    }
    Ok(values.into_iter().next())
}

fn base_config(args: &mut Vec<String>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = single(take_option(args, "config")?, "config")? {
        cfg.parse_text(&fs::read_to_string(path)?)?;
    }
    Ok(cfg)
}

fn parse_count(name: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|e: std::num::ParseIntError| Error::InvalidValue {
            key: name.into(),
            value: v.into(),
            reason: e.to_string(),
        })
}

fn report_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .filter(|f| f.extension().is_some_and(|x| x == "csv"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    Ok(files)
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Train { mut args } => {
            let mut cfg = base_config(&mut args)?;
            let out_file = single(take_option(&mut args, "out")?, "out")?;
            cfg.apply_args(&args)?;
            cfg.validate()?;
            let path = match out_file {
                Some(f) => {
                    let f = PathBuf::from(f);
                    harness::train_to_file(&cfg, &f)?;
                    f
                }
                None => harness::train(&cfg)?,
            };
            writeln!(out, "{}", path.display())?;
        }
        Command::Sweep { mut args } => {
            let mut base = base_config(&mut args)?;
            let params = take_option(&mut args, "param")?
                .iter()
                .map(|p| SweepParam::parse(p))
                .collect::<Result<Vec<_>>>()?;
            let n_seeds = match single(take_option(&mut args, "seeds")?, "seeds")? {
                Some(v) => parse_count("seeds", &v)?,
                None => 5,
            };
            let jobs = match single(take_option(&mut args, "jobs")?, "jobs")? {
                Some(v) => parse_count("jobs", &v)?,
                None => 1,
            };
            base.apply_args(&args)?;
            let seeds: Vec<u64> = (0..n_seeds as u64).collect();
            let configs = harness::sweep_configs(&base, &params, &seeds)?;
            for path in harness::run_all(&configs, jobs)? {
                writeln!(out, "{}", path.display())?;
            }
        }
        Command::Audit { mdp, policies } => {
            let report = harness::audit_files(&mdp, &policies)?;
            out.write_all(report.render().as_bytes())?;
        }
        Command::Report {
            inputs,
            kind,
            column,
        } => {
            let files = report_inputs(&inputs)?;
            if files.is_empty() {
                return Err(Error::InvalidConfig("no run CSVs found".into()));
            }
            let runs = files
                .iter()
                .map(|f| ParsedRun::read(f))
                .collect::<Result<Vec<_>>>()?;
            let rows = harness::aggregate(&runs, &kind, &column)?;
            out.write_all(harness::render_report(&rows).as_bytes())?;
        }
    }
    Ok(())
}

/// Run the command line, writing results to `out` and diagnostics to
/// `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) if is_usage(&e) => {
            let _ = writeln!(err, "usage error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUN_FAILURE
        }
    }
}
