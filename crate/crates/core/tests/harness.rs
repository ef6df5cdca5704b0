//! End-to-end checks of the experiment runner and its file formats.

use std::path::Path;

use crmb_core::harness::config::ExperimentConfig;
use crmb_core::harness::measure::{generate_instance_files, measure_complexity};
use crmb_core::harness::output::{read_dataset_csv, ONLINE_RUN_HEADER};
use crmb_core::harness::{run_and_write, run_experiment};
use crmb_core::Error;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(text, None).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(!text.contains('\r'));
    let mut lines = text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

const MINIMAL: &str = r#"
[experiment]
episodes = 1
seeds = [7]

[instance]
generator = "online_hard"
actions = 2
horizon = 3

[model_class]
generator = "structured"

[[algorithm]]
name = "cr_omle"

[adversary]
strategy = "null"
"#;

#[test]
fn minimal_run_writes_three_well_formed_files() {
    let dir = tempfile::tempdir().unwrap();
    let written = run_and_write(&config(MINIMAL), dir.path(), 1, false).unwrap();
    assert_eq!(written.len(), 3);
    let (header, rows) = read_csv(&dir.path().join("runs/cr_omle_seed7.csv"));
    assert_eq!(header, ONLINE_RUN_HEADER);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "1");
    let (agg_header, agg) = read_csv(&dir.path().join("aggregate.csv"));
    assert_eq!(agg_header, ["algorithm", "t", "mean_regret_cum", "stderr_regret_cum", "runs"]);
    assert_eq!(agg.len(), 1);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 1);
    assert_eq!(summary["config"]["experiment"]["episodes"], 1);
    // C = 0 gives α = ∞, written as null.
    assert!(summary["runs"][0]["params"]["alpha"].is_null());
    assert!(summary["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

const BUDGETED: &str = r#"
[experiment]
episodes = 40
first_seed = 3
seed_count = 4
checkpoints = [10, 40]

[instance]
generator = "random"
states = 3
actions = 2
horizon = 3

[model_class]
generator = "perturbations_of_true"
count = 4
p_min = 0.05

[[algorithm]]
name = "cr_omle"
corruption_level = 1.5

[[algorithm]]
name = "omle_unweighted"

[adversary]
strategy = "budgeted_random"
budget = 1.5
magnitude = 0.7
"#;

#[test]
fn aggregate_means_are_per_run_averages() {
    let dir = tempfile::tempdir().unwrap();
    run_and_write(&config(BUDGETED), dir.path(), 3, false).unwrap();
    let (_, agg) = read_csv(&dir.path().join("aggregate.csv"));
    assert_eq!(agg.len(), 4);
    for row in &agg {
        let t: usize = row[1].parse().unwrap();
        let values: Vec<f64> = (3..7)
            .map(|seed| {
                let (_, rows) = read_csv(&dir.path().join(format!("runs/{}_seed{seed}.csv", row[0])));
                let r = rows.iter().find(|r| r[0] == t.to_string()).unwrap();
                r[2].parse().unwrap()
            })
            .collect();
        let mean = values.iter().sum::<f64>() / 4.0;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0).sqrt();
        let got_mean: f64 = row[2].parse().unwrap();
        let got_se: f64 = row[3].parse().unwrap();
        assert!((got_mean - mean).abs() <= 1e-12 * (1.0 + mean.abs()));
        assert!((got_se - sd / 2.0).abs() <= 1e-12 * (1.0 + sd));
        assert_eq!(row[4], "4");
    }
}

#[test]
fn realized_corruption_never_exceeds_budget() {
    let out = run_experiment(&config(BUDGETED), 2, false).unwrap();
    for cell in &out.cells {
        let realized = cell.realized_corruption.as_ref().unwrap();
        assert!(realized.per_stage.iter().all(|&c| c <= 1.5));
        assert!(realized.max_stage > 0.0);
    }
}

#[test]
fn jobs_do_not_change_results() {
    let cfg = config(BUDGETED);
    let a = run_experiment(&cfg, 1, false).unwrap();
    let b = run_experiment(&cfg, 4, false).unwrap();
    assert_eq!(a.cells, b.cells);
}

const GOLDEN_CONFIG: &str = r#"
[experiment]
episodes = 12
seeds = [42]

[instance]
generator = "online_hard"
actions = 3
horizon = 4

[model_class]
generator = "structured"

[[algorithm]]
name = "cr_omle"
corruption_level = 4.0

[adversary]
strategy = "online_hard"
budget = 4.0
"#;

#[test]
fn golden_per_run_csv() {
    let dir = tempfile::tempdir().unwrap();
    run_and_write(&config(GOLDEN_CONFIG), dir.path(), 1, false).unwrap();
    let got = std::fs::read_to_string(dir.path().join("runs/cr_omle_seed42.csv")).unwrap();
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/cr_omle_seed42.csv");
    if std::env::var_os("CRMB_UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(golden.parent().unwrap()).unwrap();
        std::fs::write(&golden, &got).unwrap();
    }
    assert_eq!(got, std::fs::read_to_string(&golden).unwrap());
}

const OFFLINE: &str = r#"
[experiment]
episodes = 150
seeds = [5]
checkpoints = [50, 150]

[instance]
generator = "offline_hard"
actions = 4
horizon = 3
eta = 0.2
epsilon = 0.6

[model_class]
generator = "structured"

[[algorithm]]
name = "cr_pmle"
corruption_level = 0.5

[adversary]
strategy = "offline_hard"
budget = 0.5
"#;

#[test]
fn generated_files_reproduce_the_offline_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(OFFLINE);
    let files = generate_instance_files(&cfg, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    assert_eq!(read_dataset_csv(&files[2]).unwrap().len(), 150);

    let direct = run_experiment(&cfg, 1, false).unwrap();
    let from_files = config(&format!(
        r#"
[experiment]
episodes = 150
seeds = [5]
checkpoints = [50, 150]
dataset = "{}"

[instance]
generator = "file"
path = "{}"

[model_class]
generator = "file"
path = "{}"

[[algorithm]]
name = "cr_pmle"
corruption_level = 0.5
"#,
        files[2].display(),
        files[0].display(),
        files[1].display()
    ));
    let replayed = run_experiment(&from_files, 1, false).unwrap();
    let (crmb_core::harness::CellTable::Offline(a), crmb_core::harness::CellTable::Offline(b)) =
        (&direct.cells[0].table, &replayed.cells[0].table)
    else {
        panic!("offline tables expected");
    };
    for (x, y) in a.iter().zip(b) {
        assert_eq!(x.suboptimality, y.suboptimality);
        assert_eq!(x.conf_set_size, y.conf_set_size);
        assert_eq!(x.max_sigma, y.max_sigma);
        assert!(x.c_realized_max_stage.is_some());
        assert!(y.c_realized_max_stage.is_none());
    }
}

#[test]
fn config_errors_name_the_field() {
    let err = ExperimentConfig::from_toml_str(&MINIMAL.replace("horizon = 3", "horizn = 3"), None).unwrap_err();
    let Error::Config(msg) = err else { panic!("config error expected") };
    assert!(msg.contains("horizn"), "{msg}");

    let bad = config(&MINIMAL.replace("actions = 2", "actions = 1"));
    assert!(matches!(run_experiment(&bad, 1, false), Err(Error::Config(_))));
}

#[test]
fn failed_runs_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let bad = config(&MINIMAL.replace("actions = 2", "actions = 1"));
    assert!(run_and_write(&bad, dir.path(), 1, false).is_err());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn singleton_class_measures_are_degenerate() {
    let cfg = config(
        r#"
[experiment]
episodes = 10
seeds = [1, 2]

[instance]
generator = "random"
states = 2
actions = 2
horizon = 2

[model_class]
generator = "perturbations_of_true"
count = 1

[[algorithm]]
name = "cr_omle"

[measure]
epsilons = [0.1, 0.3]
exact = true
dataset_episodes = 50
"#,
    );
    let report = measure_complexity(&cfg).unwrap();
    assert_eq!(report.epsilons, [0.1, 0.3]);
    assert_eq!(report.seeds, [1, 2]);
    for m in &report.measurements {
        assert_eq!(m.class_size, 1);
        assert!(m.coverage.is_none());
        assert_eq!(m.information_coefficient, 0.0);
        for row in &m.eluder {
            assert_eq!(row.greedy_max, 0);
            assert_eq!(row.exact_per_stage.as_deref(), Some(&[0, 0][..]));
        }
    }
}

#[test]
fn random_class_eluder_estimate_is_small() {
    let cfg = config(
        r#"
[experiment]
episodes = 10
seeds = [9]

[instance]
generator = "random"
states = 2
actions = 2
horizon = 1

[model_class]
generator = "perturbations_of_true"
count = 5

[[algorithm]]
name = "cr_omle"

[measure]
epsilons = [0.1]
exact = true
dataset_episodes = 100
"#,
    );
    let m = &measure_complexity(&cfg).unwrap().measurements[0];
    let row = &m.eluder[0];
    assert!((row.tabular_bound - 192.0 * 3201f64.ln()).abs() < 1e-9);
    assert!(row.exact_per_stage.as_ref().unwrap()[0] <= 4);
    assert!(row.greedy_max <= row.exact_per_stage.as_ref().unwrap()[0]);
    let cov = m.coverage.unwrap();
    assert!(cov > 0.0 && cov <= 1.0);
}
