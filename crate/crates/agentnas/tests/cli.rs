use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use agentnas::artifacts::read_trace_csv;
use agentnas::core::runner::{run_single, Algorithm, ExperimentConfig};
use agentnas::core::environment::{EnvironmentSpec, LinearEnvConfig};
use agentnas::core::Topology;

const MINIMAL: &str = r#"
seed = 3
repeats = 2
horizon = 120

[topology]
num_agents = 2
num_actions = 2

[algorithm]
name = "manas"

[environment]
kind = "linear"
noise_std = 0.05
beta_schedule = { kind = "stationary", beta = [0.1, 0.9, 0.2, 0.8] }
"#;

fn agentnas(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agentnas"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    let res = agentnas(&["run", "--config", path(&cfg), "--out", path(&out), "--quiet"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["trace.csv", "regret.csv", "report.json", "resolved-config.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }

    // the resolved config reproduces the run
    let again = dir.path().join("again");
    let res = agentnas(&[
        "run",
        "--config",
        path(&out.join("resolved-config.json")),
        "--out",
        path(&again),
        "--quiet",
    ]);
    assert!(res.status.success());
    assert_eq!(
        std::fs::read(out.join("trace.csv")).unwrap(),
        std::fs::read(again.join("trace.csv")).unwrap()
    );
}

#[test]
fn trace_csv_round_trips_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("out");
    assert!(agentnas(&["run", "--config", path(&cfg), "--out", path(&out), "--quiet"])
        .status
        .success());
    let parsed = read_trace_csv(&out.join("trace.csv")).unwrap();
    assert_eq!(parsed.iter().map(|(s, _)| *s).collect::<Vec<_>>(), [3, 4]);

    let topo = Topology::new(2, 2).unwrap();
    for (seed, rounds) in parsed {
        let mut exp = ExperimentConfig::new(
            topo,
            Algorithm::manas_default(&topo, 120).unwrap(),
            120,
            EnvironmentSpec::Linear(LinearEnvConfig::stationary(vec![0.1, 0.9, 0.2, 0.8], 0.05)),
        );
        exp.seed = seed;
        assert_eq!(run_single(&exp).unwrap().output.trace.rounds, rounds);
    }
}

#[test]
fn seed_flag_and_override_supersede_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let traces: Vec<Vec<u8>> = [
        vec!["--seed", "7"],
        vec!["--set", "seed=7"],
        vec![],
    ]
    .iter()
    .enumerate()
    .map(|(i, extra)| {
        let out = dir.path().join(format!("o{i}"));
        let mut args = vec!["run", "--config", path(&cfg), "--out", path(&out), "--quiet"];
        args.extend(extra);
        assert!(agentnas(&args).status.success());
        std::fs::read(out.join("trace.csv")).unwrap()
    })
    .collect();
    assert_eq!(traces[0], traces[1]);
    assert_ne!(traces[0], traces[2]);
    assert!(String::from_utf8_lossy(&traces[0]).lines().nth(1).unwrap().starts_with("7,"));
}

#[test]
fn missing_environment_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = MINIMAL.split("[environment]").next().unwrap();
    let cfg = write_config(dir.path(), body);
    let res = agentnas(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("o"))]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("environment"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("horizont = 5\n{MINIMAL}"));
    let res = agentnas(&["validate-config", "--config", path(&cfg)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("horizont"));
}

#[test]
fn gsd_writes_curves_and_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gsd");
    let res = agentnas(&[
        "gsd", "--out", path(&out), "--agents", "6", "--actions", "3", "--mu", "4", "--sigma", "3",
        "--horizon", "60", "--repeats", "2", "--quiet",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for f in ["manas.csv", "manas_ls.csv", "random.csv", "bound.csv"] {
        let text = std::fs::read_to_string(out.join(f)).unwrap();
        assert_eq!(text.lines().count(), 61, "{f}");
    }
}

#[test]
fn gen_tabular_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let res = agentnas(&["gen-tabular", "--agents", "2", "--actions", "2", "--seed", "4", "--out", path(p)]);
        assert!(res.status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 4);

    // the generated file plugs into a tabular run
    let cfg = write_config(
        dir.path(),
        &format!(
            "horizon = 50\n[topology]\nnum_agents = 2\nnum_actions = 2\n[algorithm]\nname = \"random_search\"\n\
             [environment]\nkind = \"tabular\"\nbenchmark = \"{}\"\n",
            path(&a)
        ),
    );
    let res = agentnas(&["run", "--config", path(&cfg), "--out", path(&dir.path().join("o")), "--quiet"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn example_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "toml") {
            let res = agentnas(&["validate-config", "--config", path(&p)]);
            assert!(res.status.success(), "{}: {}", p.display(), String::from_utf8_lossy(&res.stderr));
            seen += 1;
        }
    }
    assert!(seen >= 5);
}

#[test]
fn sweep_writes_one_row_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("sweep");
    let res = agentnas(&[
        "sweep", "--config", path(&cfg), "--param", "horizon", "--values", "20,40", "--out", path(&out),
        "--quiet",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
}
