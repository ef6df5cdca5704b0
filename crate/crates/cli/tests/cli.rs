use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn crmb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crmb"))
        .args(args)
        .env_remove("CRMB_OUT_DIR")
        .env_remove("CRMB_JOBS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn runs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir.join("runs"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

const ONLINE: &str = r#"
[experiment]
episodes = 40
seeds = [1, 2, 3, 4]

[instance]
generator = "online_hard"
actions = 3
horizon = 4

[model_class]
generator = "structured"

[[algorithm]]
name = "cr_omle"
corruption_level = 4.0

[[algorithm]]
name = "omle_unweighted"

[adversary]
strategy = "online_hard"
budget = 4.0
"#;

const OFFLINE: &str = r#"
[experiment]
episodes = 100
seeds = [8]

[instance]
generator = "offline_hard"
actions = 4
horizon = 3
eta = 0.2
epsilon = 0.5

[model_class]
generator = "structured"

[[algorithm]]
name = "cr_pmle"

[measure]
epsilons = [0.1]
dataset_episodes = 200
"#;

#[test]
fn jobs_do_not_change_per_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", ONLINE);
    let cfg = cfg.to_str().unwrap();
    let mut outputs = Vec::new();
    for (name, jobs) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = dir.path().join(name);
        let o = crmb(&["run", "--config", cfg, "--jobs", jobs, "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(runs(&out));
    }
    assert_eq!(outputs[0].len(), 8);
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn env_overrides_output_dir_and_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", OFFLINE);
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_crmb"))
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env("CRMB_OUT_DIR", &out)
        .env("CRMB_JOBS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("runs/cr_pmle_seed8.csv").exists());
    assert!(out.join("aggregate.csv").exists());
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"][0]["algorithm"], "cr_pmle");
}

#[test]
fn default_output_dir_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", OFFLINE);
    let o = crmb(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn measure_and_gen_instance_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", OFFLINE);
    let out = dir.path().join("m");
    let o = crmb(&["measure", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("measure.json")).unwrap()).unwrap();
    assert_eq!(report["epsilons"], serde_json::json!([0.1]));
    assert_eq!(report["seeds"], serde_json::json!([8]));

    let out = dir.path().join("g");
    let o = crmb(&["gen-instance", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["instance.json", "model_class.json", "dataset.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let header = std::fs::read_to_string(out.join("dataset.csv")).unwrap();
    assert!(header.starts_with("episode,stage,state,action,reward,next_state\n"));
}

#[test]
fn validate_config_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", ONLINE);
    let o = crmb(&["validate-config", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("4 seeds, 2 algorithms"));

    let bad = write_config(dir.path(), "bad.toml", &ONLINE.replace("budget = 4.0", "budgte = 4.0"));
    let o = crmb(&["validate-config", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("budgte") && err.contains("bad.toml"), "{err}");

    let o = crmb(&["validate-config", "--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = crmb(&["run", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    let o = crmb(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn runtime_errors_exit_with_two_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    // 5^6 candidate policies exceed the exhaustive-search limit.
    let text = OFFLINE.replace("actions = 4", "actions = 5").replace("horizon = 3", "horizon = 6");
    let cfg = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("o");
    let o = crmb(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--exhaustive-policies",
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let o = crmb(&["validate-config", "--config", path.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        count += 1;
    }
    assert!(count >= 3);
}
