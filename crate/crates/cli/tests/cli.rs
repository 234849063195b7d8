use std::path::Path;
use std::process::{Command, Output};

use vvc_core::bench::ExperimentConfig;
use vvc_core::cases;
use vvc_core::grid::parse_case;

const TINY: &str = r#"
case = "builtin:toy6"
seed = 1

[profiles]
duration_s = 150

[predictor]
history_s = 30.0

[delay]
n = 2

[env]
episode_len = 5

[train]
episodes = 2
policy_hidden = [8]
critic_hidden = [8, 8]
batch_size = 4

[eval]
test_steps = 10
"#;

fn vvclab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vvclab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(&path, TINY).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("run");
    let out = run.to_str().unwrap();

    let train = vvclab(&["--config", &cfg, "--out", out, "--seed", "11", "train"]);
    assert_eq!(
        code(&train),
        0,
        "{}",
        String::from_utf8_lossy(&train.stderr)
    );
    assert_eq!(stdout(&train).lines().count(), 2);

    let eval = vvclab(&["--config", &cfg, "--out", out, "--seed", "11", "eval"]);
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(stdout(&eval).contains("AverObjValue"));
    assert!(stdout(&eval).contains("no-control"));

    let report = vvclab(&["report", out]);
    assert_eq!(code(&report), 0);
    assert!(run.join("report/summary.txt").exists());
    assert!(run.join("report/curves.csv").exists());

    let bf = vvclab(&[
        "--config",
        &cfg,
        "--out",
        out,
        "bruteforce",
        "--resolution",
        "3",
        "--steps",
        "2",
    ]);
    assert_eq!(code(&bf), 0, "{}", String::from_utf8_lossy(&bf.stderr));
    assert_eq!(stdout(&bf).lines().count(), 3);

    let gp = vvclab(&["--config", &cfg, "--out", out, "gen-profiles"]);
    assert_eq!(code(&gp), 0);
    assert!(run.join("profiles/train.csv").exists() && run.join("profiles/test.csv").exists());

    // overrides are part of the recorded provenance
    let recorded = ExperimentConfig::load(&run.join("config.toml")).unwrap();
    assert_eq!(recorded.seed, 11);
    assert_eq!(recorded.out_dir, run);
    assert_eq!(recorded.train.episodes, 2);
}

#[test]
fn show_config_prints_the_resolved_defaults() {
    let o = vvclab(&["--seed", "5", "show-config"]);
    assert_eq!(code(&o), 0);
    let cfg = ExperimentConfig::from_toml(&stdout(&o)).unwrap();
    let mut expected = ExperimentConfig::default();
    expected.seed = 5;
    assert_eq!(cfg, expected);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "[delay]\nnn = 3\n").unwrap();
    let o = vvclab(&["--config", bad.to_str().unwrap(), "train"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("nn"));

    assert_eq!(
        code(&vvclab(&["--config", "/definitely/missing.toml", "eval"])),
        2
    );
    assert_eq!(code(&vvclab(&["report", dir.path().to_str().unwrap()])), 2);
    assert_eq!(code(&vvclab(&["no-such-verb"])), 2);

    let cfg = tiny_config(dir.path());
    let out = dir.path().join("r");
    let o = vvclab(&[
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "bruteforce",
        "--resolution",
        "22",
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("combinatorial budget exceeded"));
    // evaluating before training: missing checkpoints
    assert_eq!(
        code(&vvclab(&[
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "eval"
        ])),
        2
    );
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heavy.toml");
    // a load far beyond the feeder's transfer capability: no power flow converges
    std::fs::write(
        &path,
        format!("{TINY}\n[profiles.params]\nload_scale = 200.0\n"),
    )
    .unwrap();
    let out = dir.path().join("r");
    let o = vvclab(&[
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "bruteforce",
        "--resolution",
        "3",
        "--steps",
        "1",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn import_case_round_trips_the_shipped_tables() {
    let dir = tempfile::tempdir().unwrap();
    let bus = dir.path().join("bus.tbl");
    let branch = dir.path().join("branch.tbl");
    std::fs::write(&bus, cases::IEEE33_BUS_TABLE).unwrap();
    std::fs::write(&branch, cases::IEEE33_BRANCH_TABLE).unwrap();
    let out = dir.path().join("feeder.case");
    let o = vvclab(&[
        "import-case",
        "--bus",
        bus.to_str().unwrap(),
        "--branch",
        branch.to_str().unwrap(),
        "--name",
        "feeder",
        "--pv",
        "18,0.5,0.4,0,0.6",
        "--region",
        "1,2,3",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let net = parse_case(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(net.n_buses(), 33);
    assert_eq!(net.inverters.len(), 1);
    assert_eq!(net.inverters[0].bus, 18);

    let o = vvclab(&[
        "import-case",
        "--bus",
        bus.to_str().unwrap(),
        "--branch",
        branch.to_str().unwrap(),
        "--pv",
        "1,2",
    ]);
    assert_eq!(code(&o), 2);
}
