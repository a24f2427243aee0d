//! Run execution and sweep orchestration: the cartesian product of sweep
//! value, baseline and traffic mode, one run per seed, resumable through
//! per-run JSON files.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::Result;
use fdsb_core::engine::{run_simulation, RunConfig, RunMetrics};

use crate::config::{SimulationConfig, SweepFile, SweepParam, TrafficMode};
use crate::output::{
    aggregate_mode_usage, aggregate_rows, mode_usage_to_csv, rows_to_csv, write_file,
    write_json, AggregateRow,
};

/// Runs every config, reusing any result file already on disk, and returns
/// the metrics in input order. Failures are reported to stderr and left as
/// `None`.
fn execute(items: Vec<(PathBuf, RunConfig)>, jobs: usize) -> Vec<Option<RunMetrics>> {
    let total = items.len();
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<RunMetrics>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let worker = |_id: usize| loop {
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= total {
            break;
        }
        let (path, config) = &items[i];
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(metrics) = serde_json::from_str::<RunMetrics>(&text) {
                eprintln!("[{}/{total}] {} (cached)", i + 1, path.display());
                *results[i].lock().unwrap() = Some(metrics);
                continue;
            }
        }
        eprintln!(
            "[{}/{total}] {} seed {}",
            i + 1,
            config.baseline.name(),
            config.seed
        );
        match run_simulation(config) {
            Ok(metrics) => {
                if let Err(e) = write_json(path, &metrics) {
                    eprintln!("warning: {e:#}");
                }
                *results[i].lock().unwrap() = Some(metrics);
            }
            Err(e) => eprintln!("error: {} seed {}: {e}", config.baseline.name(), config.seed),
        }
    };
    if jobs <= 1 {
        worker(0);
    } else {
        std::thread::scope(|s| {
            for id in 0..jobs.min(total.max(1)) {
                s.spawn(move || worker(id));
            }
        });
    }
    results.into_iter().map(|m| m.into_inner().unwrap()).collect()
}

fn run_path(dir: &Path, point: &str, baseline: &str, traffic: &str, seed: u64) -> PathBuf {
    dir.join(format!("run_{point}_{baseline}_{traffic}_seed{seed}.json"))
}

fn traffic_name(symmetric: bool) -> &'static str {
    if symmetric {
        "symmetric"
    } else {
        "asymmetric"
    }
}

/// Executes a single experiment over its seeds and writes per-seed metrics,
/// a summary table (CSV and JSON) and the mode-usage histogram.
pub fn run_single(config: &SimulationConfig, out_dir: &Path, jobs: usize) -> Result<()> {
    let traffic = traffic_name(config.traffic.symmetric);
    let runs_dir = out_dir.join("runs");
    let mut items = Vec::new();
    for &seed in &config.seeds {
        let path = run_path(&runs_dir, "single", &config.baseline, traffic, seed);
        items.push((path, config.run_config(seed)?));
    }
    let results = execute(items, jobs);
    let runs: Vec<RunMetrics> = results.into_iter().flatten().collect();
    if runs.is_empty() {
        anyhow::bail!("all runs failed");
    }
    let rows = aggregate_rows("d1", config.scenario.d1_m, &config.baseline, traffic, &runs);
    emit(out_dir, &rows, &[(config.baseline.clone(), traffic, runs)])
}

/// Executes the full sweep matrix and writes the aggregate tables. Already
/// completed runs found under `out_dir/runs` are not re-run.
pub fn run_sweep(file: &SweepFile, out_dir: &Path, jobs: usize) -> Result<()> {
    let spec = &file.sweep;
    let runs_dir = out_dir.join("runs");
    let mut points = Vec::new();
    let mut items = Vec::new();
    for &value in &spec.values_m {
        for baseline in &spec.baselines {
            for &traffic in &spec.traffic {
                let mut base = file.base.clone();
                base.baseline = baseline.clone();
                base.traffic.symmetric = matches!(traffic, TrafficMode::Symmetric);
                match spec.parameter {
                    SweepParam::D1 => base.scenario.d1_m = value,
                    SweepParam::D2 => base.scenario.d2_m = value,
                }
                let point = format!("{}{}", spec.parameter.name(), value);
                let range = items.len()..items.len() + base.seeds.len();
                for &seed in &base.seeds {
                    let path = run_path(&runs_dir, &point, baseline, traffic.name(), seed);
                    items.push((path, base.run_config(seed)?));
                }
                points.push((value, baseline.clone(), traffic, range));
            }
        }
    }
    let results = execute(items, jobs);

    let mut rows: Vec<AggregateRow> = Vec::new();
    let mut by_matrix: Vec<(String, &'static str, Vec<RunMetrics>)> = Vec::new();
    for (value, baseline, traffic, range) in points {
        let runs: Vec<RunMetrics> = results[range].iter().flatten().cloned().collect();
        if runs.is_empty() {
            eprintln!("warning: no completed runs for {baseline} at {value}");
            continue;
        }
        rows.extend(aggregate_rows(
            spec.parameter.name(),
            value,
            &baseline,
            traffic.name(),
            &runs,
        ));
        match by_matrix
            .iter_mut()
            .find(|(b, t, _)| *b == baseline && *t == traffic.name())
        {
            Some((_, _, all)) => all.extend(runs),
            None => by_matrix.push((baseline, traffic.name(), runs)),
        }
    }
    emit(out_dir, &rows, &by_matrix)
}

fn emit(
    out_dir: &Path,
    rows: &[AggregateRow],
    by_matrix: &[(String, &'static str, Vec<RunMetrics>)],
) -> Result<()> {
    write_file(&out_dir.join("results.csv"), &rows_to_csv(rows))?;
    write_json(&out_dir.join("results.json"), &rows)?;
    for (baseline, traffic, runs) in by_matrix {
        let usage = aggregate_mode_usage(runs);
        write_file(
            &out_dir.join(format!("mode_usage_{baseline}_{traffic}.csv")),
            &mode_usage_to_csv(&usage),
        )?;
    }
    Ok(())
}
