//! Command-line harness: configuration, seeding, CSV logs, experiment
//! suites, aggregation and the attribute audit.

pub mod cli;
pub mod config;
pub mod runlog;
pub mod seeds;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use crate::attributes::{audit, AuditReport};
use crate::envs::tabular::{TabularMdp, TabularPolicy};
use crate::error::{Error, Result};
use crate::training::{RunLog, Trainer};

pub use config::ExperimentConfig;
pub use runlog::{ParsedRun, RunLogWriter};

/// Train one run and write its CSV to `path`.
pub fn train_to_file(cfg: &ExperimentConfig, path: &Path) -> Result<RunLog> {
    cfg.validate()?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut trainer = Trainer::new(cfg.train.clone())?;
    let file = BufWriter::new(File::create(path)?);
    let mut writer = RunLogWriter::new(file, cfg, trainer.teachers().len())?;
    let log = trainer.run_with(|rec| writer.write(rec))?;
    writer.into_inner()?;
    Ok(log)
}

/// Train one run into `cfg.out_dir`, returning the CSV path.
pub fn train(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let path = cfg.out_dir.join(format!("{}.csv", cfg.run_name()));
    train_to_file(cfg, &path)?;
    Ok(path)
}

/// One axis of a sweep: a key and the values it takes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepParam {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepParam {
    /// Parse `key=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self> {
        let (key, values) = text.split_once('=').ok_or_else(|| Error::InvalidValue {
            key: "param".into(),
            value: text.into(),
            reason: "expected key=v1,v2,...".into(),
        })?;
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.iter().any(String::is_empty) {
            return Err(Error::InvalidValue {
                key: "param".into(),
                value: text.into(),
                reason: "empty value in list".into(),
            });
        }
        Ok(SweepParam {
            key: key.trim().replace('-', "_"),
            values,
        })
    }
}

/// Cartesian product of `params` times `seeds`, each applied on top of
/// `base`. The seed varies fastest.
pub fn sweep_configs(
    base: &ExperimentConfig,
    params: &[SweepParam],
    seeds: &[u64],
) -> Result<Vec<ExperimentConfig>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for p in params {
        let mut next = Vec::with_capacity(combos.len() * p.values.len());
        for c in &combos {
            for v in &p.values {
                let mut c = c.clone();
                c.push((p.key.clone(), v.clone()));
                next.push(c);
            }
        }
        combos = next;
    }
    let mut out = Vec::with_capacity(combos.len() * seeds.len());
    for combo in &combos {
        for &seed in seeds {
            let mut cfg = base.clone();
            for (k, v) in combo {
                cfg.apply(k, v)?;
            }
            cfg.apply("seed", &seed.to_string())?;
            cfg.validate()?;
            out.push(cfg);
        }
    }
    Ok(out)
}

/// Run every configuration, `jobs` at a time, returning the CSV paths in
/// input order.
pub fn run_all(configs: &[ExperimentConfig], jobs: usize) -> Result<Vec<PathBuf>> {
    let jobs = jobs.max(1);
    let mut paths = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(jobs) {
        let results: Vec<Result<PathBuf>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|c| s.spawn(move || train(c))).collect();
            handles
                .into_iter()
                .map(|h| {
                    h.join()
                        .unwrap_or_else(|_| Err(Error::InvalidConfig("worker panicked".into())))
                })
                .collect()
        });
        for r in results {
            paths.push(r?);
        }
    }
    Ok(paths)
}

/// Aggregate of one column across runs at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateRow {
    pub step: usize,
    pub runs: usize,
    pub mean: f64,
    /// Population standard deviation across runs.
    pub std: f64,
}

/// Mean and population std across runs of column `col` on `kind` rows,
/// one row per step present in any run.
pub fn aggregate(runs: &[ParsedRun], kind: &str, col: &str) -> Result<Vec<AggregateRow>> {
    let mut by_step: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for run in runs {
        for (step, v) in run.series(kind, col)? {
            by_step.entry(step).or_default().push(v);
        }
    }
    Ok(by_step
        .into_iter()
        .map(|(step, vals)| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            AggregateRow {
                step,
                runs: vals.len(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect())
}

/// CSV rendering of [`aggregate`].
pub fn render_report(rows: &[AggregateRow]) -> String {
    let mut out = String::from("step,runs,mean,std\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.runs, r.mean, r.std));
    }
    out
}

/// Load an MDP and teacher policies from text files and audit them.
pub fn audit_files(mdp_path: &Path, policy_paths: &[PathBuf]) -> Result<AuditReport> {
    let mdp = TabularMdp::parse(&fs::read_to_string(mdp_path)?)?;
    let policies = policy_paths
        .iter()
        .map(|p| {
            let policy = TabularPolicy::parse(&fs::read_to_string(p)?, mdp.n_actions())?;
            policy.validate(&mdp)?;
            Ok(policy)
        })
        .collect::<Result<Vec<_>>>()?;
    audit(&mdp, &policies)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_product_size() {
        let base = ExperimentConfig::default();
        let params = [SweepParam::parse("beta=0.2,0.4,0.6,0.8").unwrap()];
        let seeds: Vec<u64> = (0..5).collect();
        let cfgs = sweep_configs(&base, &params, &seeds).unwrap();
        assert_eq!(cfgs.len(), 20);
        assert_eq!(cfgs[0].train.behavior.beta, 0.2);
        assert_eq!(cfgs[4].train.seed, 4);
        assert_eq!(cfgs[5].train.behavior.beta, 0.4);
        let names: std::collections::BTreeSet<String> = cfgs.iter().map(|c| c.run_name()).collect();
        assert_eq!(names.len(), 20);
    }

    #[test]
    fn bad_param_spec() {
        assert!(SweepParam::parse("beta").is_err());
        assert!(SweepParam::parse("beta=0.2,,0.4").is_err());
    }
}
