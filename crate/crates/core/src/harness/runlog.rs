//! Run log CSV: `#` comment lines carrying the configuration, then one
//! header row and train/eval rows in step order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::training::{EvalRow, LogRecord, TrainRow};

pub const SCHEMA_VERSION: u32 = 1;

/// Column names for a run with `n_teachers` teachers.
pub fn columns(n_teachers: usize) -> Vec<String> {
    let mut c: Vec<String> = [
        "kind",
        "step",
        "round",
        "mean_critic_loss",
        "mean_actor_loss",
        "behavioral_return",
        "frac_choice_agent",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    c.extend((1..=n_teachers).map(|i| format!("frac_choice_teacher_{i}")));
    c.extend(
        [
            "switch_count",
            "retain_count",
            "eval_return_mean",
            "eval_return_std",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    c
}

/// Streams rows to a CSV sink.
pub struct RunLogWriter<W: Write> {
    out: csv::Writer<W>,
    n_teachers: usize,
}

impl<W: Write> RunLogWriter<W> {
    /// Write the comment block and header row.
    pub fn new(mut sink: W, cfg: &ExperimentConfig, n_teachers: usize) -> Result<Self> {
        writeln!(sink, "# acteach run log")?;
        writeln!(sink, "# schema = {SCHEMA_VERSION}")?;
        for (k, v) in cfg.entries() {
            writeln!(sink, "# {k} = {v}")?;
        }
        for (k, v) in &cfg.overrides {
            writeln!(sink, "# override {k} = {v}")?;
        }
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(sink);
        out.write_record(columns(n_teachers))?;
        Ok(RunLogWriter { out, n_teachers })
    }

    pub fn write(&mut self, record: LogRecord<'_>) -> Result<()> {
        match record {
            LogRecord::Train(r) => self.write_train(r),
            LogRecord::Eval(r) => self.write_eval(r),
        }
    }

    fn write_train(&mut self, r: &TrainRow) -> Result<()> {
        if r.choice_fractions.len() != self.n_teachers + 1 {
            return Err(Error::Shape(format!(
                "{} choice fractions for {} teachers",
                r.choice_fractions.len(),
                self.n_teachers
            )));
        }
        let mut rec = vec![
            "train".to_string(),
            r.step.to_string(),
            r.round.to_string(),
            r.mean_critic_loss.to_string(),
            r.mean_actor_loss.to_string(),
            r.behavioral_return.to_string(),
        ];
        rec.extend(r.choice_fractions.iter().map(|f| f.to_string()));
        rec.push(r.switch_count.to_string());
        rec.push(r.retain_count.to_string());
        rec.extend([String::new(), String::new()]);
        self.out.write_record(&rec)?;
        self.out.flush()?;
        Ok(())
    }

    fn write_eval(&mut self, r: &EvalRow) -> Result<()> {
        let mut rec = vec!["eval".to_string(), r.step.to_string()];
        rec.extend(std::iter::repeat_n(String::new(), 4 + self.n_teachers + 3));
        rec.push(r.mean.to_string());
        rec.push(r.std.to_string());
        self.out.write_record(&rec)?;
        self.out.flush()?;
        Ok(())
    }

    pub fn into_inner(self) -> Result<W> {
        self.out.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

/// A parsed run log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedRun {
    /// `# key = value` entries from the comment block.
    pub config: BTreeMap<String, String>,
    pub columns: Vec<String>,
    pub rows: Vec<BTreeMap<String, String>>,
}

impl ParsedRun {
    pub fn read(path: &Path) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut config = BTreeMap::new();
        let mut body = String::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once('=') {
                    let k = k.trim();
                    if !k.starts_with("override ") {
                        config.insert(k.to_string(), v.trim().to_string());
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "blank line in run log".into(),
                });
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut rdr = csv::Reader::from_reader(body.as_bytes());
        let columns: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(
                columns
                    .iter()
                    .cloned()
                    .zip(rec.iter().map(String::from))
                    .collect(),
            );
        }
        Ok(ParsedRun {
            config,
            columns,
            rows,
        })
    }

    fn rows_of<'a>(
        &'a self,
        kind: &'a str,
    ) -> impl Iterator<Item = &'a BTreeMap<String, String>> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.get("kind").map(String::as_str) == Some(kind))
    }

    /// `(step, value)` for column `col` on rows of `kind`.
    pub fn series(&self, kind: &str, col: &str) -> Result<Vec<(usize, f64)>> {
        self.rows_of(kind)
            .map(|r| {
                let field = |name: &str| {
                    r.get(name).ok_or_else(|| Error::Parse {
                        line: 0,
                        msg: format!("missing column `{name}`"),
                    })
                };
                let step = field("step")?;
                let value = field(col)?;
                let step = step.parse::<usize>().map_err(|e| Error::Parse {
                    line: 0,
                    msg: format!("bad step `{step}`: {e}"),
                })?;
                let value = value.parse::<f64>().map_err(|e| Error::Parse {
                    line: 0,
                    msg: format!("bad `{col}` value `{value}`: {e}"),
                })?;
                Ok((step, value))
            })
            .collect()
    }

    pub fn eval_means(&self) -> Result<Vec<(usize, f64)>> {
        self.series("eval", "eval_return_mean")
    }
}
