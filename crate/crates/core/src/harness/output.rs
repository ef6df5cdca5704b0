//! File formats: per-run and aggregate CSV, `summary.json`, dataset CSV.
//!
//! Floats are written with 17 significant digits; missing values as `NA`.
//! Every file is written to a temporary sibling and renamed into place.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::mdp::{Step, Trajectory};

use super::config::AlgorithmName;
use super::{CellOutput, CellTable, ExperimentOutput};

pub const ONLINE_RUN_HEADER: [&str; 6] = ["t", "regret_inc", "regret_cum", "c_realized_max_stage", "conf_set_size", "max_sigma"];
pub const OFFLINE_RUN_HEADER: [&str; 7] = [
    "episodes",
    "suboptimality",
    "c_realized_max_stage",
    "conf_set_size",
    "max_sigma",
    "coverage",
    "information_coefficient",
];
pub const ONLINE_AGGREGATE_HEADER: [&str; 5] = ["algorithm", "t", "mean_regret_cum", "stderr_regret_cum", "runs"];
pub const OFFLINE_AGGREGATE_HEADER: [&str; 5] = ["algorithm", "episodes", "mean_suboptimality", "stderr_suboptimality", "runs"];
pub const DATASET_HEADER: [&str; 6] = ["episode", "stage", "state", "action", "reward", "next_state"];

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), fmt_f64)
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let err = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

pub fn run_file_name(algorithm: AlgorithmName, seed: u64) -> String {
    format!("{}_seed{seed}.csv", algorithm.as_str())
}

/// The per-run table of one cell as CSV.
pub fn run_csv(cell: &CellOutput) -> Result<Vec<u8>> {
    match &cell.table {
        CellTable::Online(rows) => csv_bytes(
            &ONLINE_RUN_HEADER,
            rows.iter().map(|r| {
                vec![
                    r.t.to_string(),
                    fmt_f64(r.regret_inc),
                    fmt_f64(r.regret_cum),
                    fmt_f64(r.c_realized_max_stage),
                    r.conf_set_size.to_string(),
                    fmt_f64(r.max_sigma),
                ]
            }),
        ),
        CellTable::Offline(rows) => csv_bytes(
            &OFFLINE_RUN_HEADER,
            rows.iter().map(|r| {
                vec![
                    r.episodes.to_string(),
                    fmt_f64(r.suboptimality),
                    fmt_opt(r.c_realized_max_stage),
                    r.conf_set_size.to_string(),
                    fmt_f64(r.max_sigma),
                    fmt_opt(r.coverage),
                    fmt_f64(r.information_coefficient),
                ]
            }),
        ),
    }
}

/// Mean and standard error (sample standard deviation over `√n`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One aggregate row: algorithm, checkpoint, mean, stderr, run count.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub algorithm: AlgorithmName,
    pub checkpoint: usize,
    pub mean: f64,
    pub stderr: f64,
    pub runs: usize,
}

/// Aggregates cumulative regret (online) or suboptimality (offline) across
/// seeds, per algorithm and checkpoint.
pub fn aggregate(cells: &[CellOutput], offline: bool) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(AlgorithmName, usize), Vec<f64>> = BTreeMap::new();
    for cell in cells {
        match &cell.table {
            CellTable::Online(rows) if !offline => {
                for r in rows {
                    groups.entry((cell.algorithm, r.t)).or_default().push(r.regret_cum);
                }
            }
            CellTable::Offline(rows) if offline => {
                for r in rows {
                    groups.entry((cell.algorithm, r.episodes)).or_default().push(r.suboptimality);
                }
            }
            _ => {}
        }
    }
    groups
        .into_iter()
        .map(|((algorithm, checkpoint), values)| {
            let (mean, stderr) = mean_stderr(&values);
            AggregateRow {
                algorithm,
                checkpoint,
                mean,
                stderr,
                runs: values.len(),
            }
        })
        .collect()
}

fn aggregate_csv(rows: &[AggregateRow], header: &[&str]) -> Result<Vec<u8>> {
    csv_bytes(
        header,
        rows.iter().map(|r| {
            vec![
                r.algorithm.as_str().to_string(),
                r.checkpoint.to_string(),
                fmt_f64(r.mean),
                fmt_f64(r.stderr),
                r.runs.to_string(),
            ]
        }),
    )
}

/// The `summary.json` document. Infinite parameters become `null`.
pub fn summary_json(result: &ExperimentOutput) -> serde_json::Value {
    let runs: Vec<_> = result
        .cells
        .iter()
        .map(|c| {
            let last = match &c.table {
                CellTable::Online(rows) => json!({ "regret_cum": rows.last().map(|r| r.regret_cum) }),
                CellTable::Offline(rows) => json!({ "suboptimality": rows.last().map(|r| r.suboptimality) }),
            };
            json!({
                "algorithm": c.algorithm,
                "seed": c.seed,
                "file": format!("runs/{}", run_file_name(c.algorithm, c.seed)),
                "params": c.params,
                "class_size": c.class_size,
                "ratio_bound": c.ratio_bound,
                "budget": c.budget,
                "realized_corruption": c.realized_corruption,
                "truth_always_in_set": c.truth_retained,
                "final": last,
            })
        })
        .collect();
    json!({
        "config": result.config,
        "runs": runs,
        "truth_always_in_set": result.cells.iter().all(|c| c.truth_retained),
        "wall_time_seconds": result.wall_time_seconds,
    })
}

/// Writes `runs/*.csv`, `aggregate.csv` and `summary.json` into `out_dir`.
pub fn write_experiment(result: &ExperimentOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for cell in &result.cells {
        files.push((out_dir.join("runs").join(run_file_name(cell.algorithm, cell.seed)), run_csv(cell)?));
    }
    let online = aggregate(&result.cells, false);
    let offline = aggregate(&result.cells, true);
    let agg = match (online.is_empty(), offline.is_empty()) {
        (false, true) => aggregate_csv(&online, &ONLINE_AGGREGATE_HEADER)?,
        (true, false) => aggregate_csv(&offline, &OFFLINE_AGGREGATE_HEADER)?,
        (true, true) => aggregate_csv(&[], &ONLINE_AGGREGATE_HEADER)?,
        (false, false) => {
            files.push((out_dir.join("aggregate_offline.csv"), aggregate_csv(&offline, &OFFLINE_AGGREGATE_HEADER)?));
            aggregate_csv(&online, &ONLINE_AGGREGATE_HEADER)?
        }
    };
    files.push((out_dir.join("aggregate.csv"), agg));
    let mut summary = serde_json::to_string_pretty(&summary_json(result)).map_err(|e| Error::Io(e.to_string()))?;
    summary.push('\n');
    files.push((out_dir.join("summary.json"), summary.into_bytes()));
    for (path, bytes) in &files {
        write_atomic(path, bytes)?;
    }
    Ok(files.into_iter().map(|f| f.0).collect())
}

/// Dataset CSV with one row per step; `episode` is 1-based, `stage` 0-based.
pub fn dataset_csv(trajectories: &[Trajectory]) -> Result<Vec<u8>> {
    csv_bytes(
        &DATASET_HEADER,
        trajectories.iter().enumerate().flat_map(|(i, tr)| {
            tr.steps.iter().enumerate().map(move |(h, s)| {
                vec![
                    (i + 1).to_string(),
                    h.to_string(),
                    s.state.to_string(),
                    s.action.to_string(),
                    fmt_f64(s.reward),
                    s.next_state.to_string(),
                ]
            })
        }),
    )
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<Trajectory>> {
    let bad = |line: u64, msg: &str| Error::Config(format!("{}:{line}: {msg}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let header = reader.headers().map_err(|e| bad(1, &e.to_string()))?.clone();
    if header.iter().ne(DATASET_HEADER.iter().copied()) {
        return Err(bad(1, &format!("expected header {}", DATASET_HEADER.join(","))));
    }
    let mut trajectories: Vec<Trajectory> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let int = |i: usize| record[i].trim().parse::<usize>().map_err(|_| bad(line, &format!("bad {}", DATASET_HEADER[i])));
        let (episode, stage) = (int(0)?, int(1)?);
        let reward: f64 = record[4].trim().parse().map_err(|_| bad(line, "bad reward"))?;
        let step = Step {
            state: int(2)?,
            action: int(3)?,
            reward,
            next_state: int(5)?,
        };
        match trajectories.last_mut() {
            Some(tr) if tr.episode + 1 == episode => {
                if stage != tr.steps.len() {
                    return Err(bad(line, "stages must be consecutive from 0"));
                }
                tr.steps.push(step);
            }
            _ => {
                if episode != trajectories.len() + 1 || stage != 0 {
                    return Err(bad(line, "episodes must be consecutive from 1 and start at stage 0"));
                }
                trajectories.push(Trajectory {
                    episode: episode - 1,
                    steps: vec![step],
                });
            }
        }
    }
    if trajectories.is_empty() {
        return Err(Error::Config(format!("{}: empty dataset", path.display())));
    }
    Ok(trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 12345.678, 0.0, -2.5e-9] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn mean_stderr_small() {
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_round_trip() {
        let trs: Vec<Trajectory> = (0..3)
            .map(|e| Trajectory {
                episode: e,
                steps: (0..2)
                    .map(|h| Step {
                        state: h,
                        action: e % 2,
                        reward: 0.25 * h as f64,
                        next_state: 1,
                    })
                    .collect(),
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_atomic(&path, &dataset_csv(&trs).unwrap()).unwrap();
        assert_eq!(read_dataset_csv(&path).unwrap(), trs);
    }
}
