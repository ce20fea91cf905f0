use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use acteach::harness::cli::{self, EXIT_OK, EXIT_RUN_FAILURE, EXIT_USAGE};
use acteach::harness::seeds::{self, SeedStreams};
use acteach::harness::{sweep_configs, train_to_file, ExperimentConfig, ParsedRun, SweepParam};
use rand::RngCore;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["acteach"];
    argv.extend_from_slice(args);
    let code = cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

/// Overrides that keep a run to a fraction of a second.
const TINY: &[&str] = &[
    "--hidden",
    "8,8",
    "--k",
    "2",
    "--steps_per_round",
    "50",
    "--updates_per_round",
    "2",
    "--batch_size",
    "16",
    "--eval_every",
    "100",
    "--eval_episodes",
    "2",
];

fn tiny_config(seed: u64, teachers: &str, total_steps: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    let args: Vec<String> = TINY.iter().map(|s| s.to_string()).collect();
    cfg.apply_args(&args).unwrap();
    cfg.apply("teachers", teachers).unwrap();
    cfg.apply("seed", &seed.to_string()).unwrap();
    cfg.apply("total_steps", &total_steps.to_string()).unwrap();
    cfg
}

fn csv_files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn train_writes_one_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut args = vec![
        "train",
        "--out_dir",
        out_dir,
        "--teachers",
        "set_A",
        "--total_steps",
        "200",
    ];
    args.extend_from_slice(TINY);
    let (code, out, err) = cli(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 1);
    assert_eq!(out.trim(), files[0].display().to_string());
    let run = ParsedRun::read(&files[0]).unwrap();
    assert_eq!(run.series("train", "switch_count").unwrap().len(), 4);
    assert_eq!(run.series("eval", "eval_return_mean").unwrap().len(), 3);
}

#[test]
fn usage_errors_exit_two() {
    let (code, _, err) = cli(&["train", "--bogus_key", "1"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("bogus_key"), "{err}");

    let (code, _, _) = cli(&["train", "--beta", "high"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = cli(&["frobnicate"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = cli(&["sweep", "--param", "beta"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = cli(&["train", "--teachers", "set_Z", "--total_steps", "10"]);
    assert_eq!(code, EXIT_USAGE);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cfg");
    fs::write(&bad, "beta = 0.5\nthis line has no separator\n").unwrap();
    let (code, _, err) = cli(&["train", "--config", bad.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn run_failures_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let (code, _, err) = cli(&["report", missing.to_str().unwrap()]);
    assert_eq!(code, EXIT_RUN_FAILURE, "{err}");
}

#[test]
fn sweep_runs_the_full_product() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let mut args = vec![
        "sweep",
        "--param",
        "beta=0.2,0.4,0.6,0.8",
        "--seeds",
        "5",
        "--jobs",
        "2",
        "--out_dir",
        out_dir,
        "--total_steps",
        "50",
    ];
    args.extend_from_slice(TINY);
    let (code, out, err) = cli(&args);
    assert_eq!(code, EXIT_OK, "{err}");
    assert_eq!(out.lines().count(), 20);
    let files = csv_files(dir.path());
    assert_eq!(files.len(), 20);
    let mut seen = BTreeMap::new();
    for f in &files {
        let run = ParsedRun::read(f).unwrap();
        *seen
            .entry((run.config["beta"].clone(), run.config["seed"].clone()))
            .or_insert(0) += 1;
    }
    assert_eq!(seen.len(), 20);

    let base = ExperimentConfig::default();
    let params = [SweepParam::parse("beta=0.2,0.4,0.6,0.8").unwrap()];
    let cfgs = sweep_configs(&base, &params, &[0, 1, 2, 3, 4]).unwrap();
    assert_eq!(cfgs.len(), 20);
}

/// Eval means per step read straight from the CSV text.
fn raw_eval_means(path: &Path) -> BTreeMap<usize, f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let step_col = header.iter().position(|c| *c == "step").unwrap();
    let mean_col = header
        .iter()
        .position(|c| *c == "eval_return_mean")
        .unwrap();
    lines
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|f| f[0] == "eval")
        .map(|f| (f[step_col].parse().unwrap(), f[mean_col].parse().unwrap()))
        .collect()
}

#[test]
fn report_matches_an_independent_recomputation() {
    let dir = tempfile::tempdir().unwrap();
    for seed in 0..5 {
        let cfg = tiny_config(seed, "set_B", 300);
        train_to_file(&cfg, &dir.path().join(format!("run{seed}.csv"))).unwrap();
    }
    let (code, out, err) = cli(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");

    let raw: Vec<BTreeMap<usize, f64>> = csv_files(dir.path())
        .iter()
        .map(|p| raw_eval_means(p))
        .collect();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("step,runs,mean,std"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), raw[0].len());
    for row in rows {
        let step = row[0] as usize;
        let vals: Vec<f64> = raw.iter().map(|r| r[&step]).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let mut ss = 0.0;
        for v in &vals {
            ss += (v - mean) * (v - mean);
        }
        assert_eq!(row[1], 5.0);
        assert!((row[2] - mean).abs() < 1e-12, "step {step}");
        assert!((row[3] - (ss / n).sqrt()).abs() < 1e-12, "step {step}");
    }
}

fn first_draws(master: u64, name: &str, n: usize) -> Vec<u64> {
    let mut r = SeedStreams::new(master).stream(name);
    (0..n).map(|_| r.next_u64()).collect()
}

/// Draws recomputed outside Rust from SHA-256 and xoshiro256++.
#[test]
fn seed_stream_regression() {
    let expected: [(&str, [u64; 3]); 4] = [
        (
            seeds::ENV,
            [
                12988148625741122903,
                13113594924635289076,
                4899742217439283065,
            ],
        ),
        (
            seeds::ACTOR_INIT,
            [
                17374289569473297143,
                8499181981511878058,
                3432707527086989448,
            ],
        ),
        (
            seeds::EVAL,
            [
                9807117310332401257,
                17406009225921157338,
                8717883458673765387,
            ],
        ),
        (
            "teacher[0]",
            [
                13528114292154628640,
                3663895840762951927,
                10697933972148559950,
            ],
        ),
    ];
    for (name, draws) in expected {
        assert_eq!(first_draws(7, name, 3), draws.to_vec(), "{name}");
    }
    let mut t = SeedStreams::new(7).teacher(0);
    assert_eq!(t.next_u64(), expected[3].1[0]);
}

#[test]
fn named_streams_do_not_collide() {
    let names = [
        seeds::ENV,
        seeds::ACTOR_INIT,
        seeds::CRITIC_INIT,
        seeds::SELECTOR_INIT,
        seeds::DROPOUT,
        seeds::EXPLORATION,
        seeds::BUFFER,
        seeds::EVAL,
        seeds::TARGET,
        seeds::SELECTOR,
        "teacher[0]",
        "teacher[1]",
    ];
    let draws: Vec<Vec<u64>> = names.iter().map(|n| first_draws(11, n, 1000)).collect();
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            let same = draws[i]
                .iter()
                .zip(&draws[j])
                .filter(|(a, b)| a == b)
                .count();
            assert_eq!(same, 0, "{} vs {}", names[i], names[j]);
        }
    }
    assert_ne!(
        first_draws(11, seeds::ENV, 4),
        first_draws(12, seeds::ENV, 4)
    );
}

#[test]
fn header_records_every_setting_and_override() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let mut cfg = tiny_config(3, "set_A", 100);
    cfg.apply("beta", "0.4").unwrap();
    train_to_file(&cfg, &path).unwrap();
    let run = ParsedRun::read(&path).unwrap();
    for (k, v) in cfg.entries() {
        assert_eq!(run.config.get(&k), Some(&v), "{k}");
    }
    assert_eq!(ExperimentConfig::keys().len(), cfg.entries().len());
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.contains("# override beta = 0.4"));
    assert!(text.contains("# override hidden = 8,8"));

    let mut rebuilt = ExperimentConfig::default();
    for (k, v) in &run.config {
        if k != "schema" {
            rebuilt.set(k, v).unwrap();
        }
    }
    assert_eq!(rebuilt.entries(), cfg.entries());
}

#[test]
fn identical_configs_write_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(7, "set_A", 300);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    train_to_file(&cfg, &a).unwrap();
    train_to_file(&cfg, &b).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = dir.path().join("c.csv");
    train_to_file(&tiny_config(8, "set_A", 300), &c).unwrap();
    assert_ne!(raw_eval_means(&a).len(), 0);
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn train_rows_are_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let cfg = tiny_config(5, "set_G", 300);
    train_to_file(&cfg, &path).unwrap();
    let run = ParsedRun::read(&path).unwrap();
    let frac_cols: Vec<&String> = run
        .columns
        .iter()
        .filter(|c| c.starts_with("frac_choice_"))
        .collect();
    assert_eq!(frac_cols.len(), 9);
    let per_round = cfg.train.schedule.steps_per_round as f64;
    for row in run.rows.iter().filter(|r| r["kind"] == "train") {
        let sum: f64 = frac_cols
            .iter()
            .map(|c| row[*c].parse::<f64>().unwrap())
            .sum();
        assert!((sum - 1.0).abs() < 1e-9);
        let switches: f64 = row["switch_count"].parse().unwrap();
        assert!(switches <= per_round);
    }
    let evals = run.series("eval", "eval_return_mean").unwrap();
    assert_eq!(
        evals.iter().map(|e| e.0).collect::<Vec<_>>(),
        vec![0, 100, 200, 300]
    );
    assert!(evals.iter().all(|e| (0.0..=4.0).contains(&e.1)));
}

#[test]
fn audit_command_classifies_teachers() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = dir.path().join("chain.mdp");
    fs::write(
        &mdp,
        "3 2 0.9\nG: 2\nrho0: 1 0 0\n0 0 -> 0\n0 1 -> 1\n1 0 -> 0\n1 1 -> 2\n2 0 -> 2\n2 1 -> 2\n",
    )
    .unwrap();
    let good = dir.path().join("good.pol");
    fs::write(&good, "1\n1\n1\n").unwrap();
    let bad = dir.path().join("bad.pol");
    fs::write(&bad, "0\n0\n0\n").unwrap();
    let (code, out, err) = cli(&[
        "audit",
        "--mdp",
        mdp.to_str().unwrap(),
        "--policy",
        good.to_str().unwrap(),
        "--policy",
        bad.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(
        out.contains("teacher 0: start value") && out.contains("teacher set: sufficient"),
        "{out}"
    );
    let t1 = out.lines().find(|l| l.starts_with("teacher 1:")).unwrap();
    assert!(t1.contains("insufficient"), "{out}");

    fs::write(&bad, "0\n2\n0\n").unwrap();
    let (code, _, _) = cli(&[
        "audit",
        "--mdp",
        mdp.to_str().unwrap(),
        "--policy",
        bad.to_str().unwrap(),
    ]);
    assert_ne!(code, EXIT_OK);
}
