//! Result aggregation and CSV/JSON emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use fdsb_core::engine::{mean_stderr, RunMetrics};

/// One aggregate line: a sweep point, baseline, traffic mode and direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_param: String,
    pub value: f64,
    pub baseline: String,
    pub traffic: String,
    pub direction: String,
    pub mean_mbps: f64,
    pub stderr_mbps: f64,
    pub n_seeds: usize,
}

/// DL and UL aggregate rows for one group of per-seed runs.
pub fn aggregate_rows(
    sweep_param: &str,
    value: f64,
    baseline: &str,
    traffic: &str,
    runs: &[RunMetrics],
) -> Vec<AggregateRow> {
    assert!(!runs.is_empty());
    let make = |direction: &str, values: Vec<f64>| {
        let (mean, stderr) = mean_stderr(&values);
        AggregateRow {
            sweep_param: sweep_param.to_string(),
            value,
            baseline: baseline.to_string(),
            traffic: traffic.to_string(),
            direction: direction.to_string(),
            mean_mbps: mean,
            stderr_mbps: stderr,
            n_seeds: values.len(),
        }
    };
    vec![
        make("DL", runs.iter().map(|r| r.total_dl_mbps).collect()),
        make("UL", runs.iter().map(|r| r.total_ul_mbps).collect()),
    ]
}

pub fn rows_to_csv(rows: &[AggregateRow]) -> String {
    let mut out = String::from(
        "sweep_param,value,baseline,traffic,direction,mean_mbps,stderr_mbps,n_seeds\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.sweep_param,
            r.value,
            r.baseline,
            r.traffic,
            r.direction,
            r.mean_mbps,
            r.stderr_mbps,
            r.n_seeds
        )
        .unwrap();
    }
    out
}

/// Mode-usage histogram over a group of runs, weighted by active slots.
/// Fractions sum to one when any slot was active.
pub fn aggregate_mode_usage(runs: &[RunMetrics]) -> Vec<(String, f64)> {
    let mut counts: BTreeMap<String, f64> = BTreeMap::new();
    let mut total_active = 0.0;
    for r in runs {
        let active = (r.slots - r.idle_slots) as f64;
        total_active += active;
        for (mode, frac) in &r.mode_usage {
            *counts.entry(mode.clone()).or_insert(0.0) += frac * active;
        }
    }
    if total_active == 0.0 {
        return Vec::new();
    }
    let mut usage: Vec<(String, f64)> = counts
        .into_iter()
        .map(|(m, c)| (m, c / total_active))
        .collect();
    usage.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    usage
}

pub fn mode_usage_to_csv(usage: &[(String, f64)]) -> String {
    let mut out = String::from("mode,fraction\n");
    for (mode, frac) in usage {
        writeln!(out, "{mode},{frac}").unwrap();
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(dl: f64, ul: f64, usage: Vec<(String, f64)>) -> RunMetrics {
        RunMetrics {
            baseline: "FD-SDMA".into(),
            seed: 0,
            slots: 100,
            idle_slots: 10,
            duration_s: 0.1,
            per_cell_dl_mbps: vec![dl],
            per_cell_ul_mbps: vec![ul],
            total_dl_mbps: dl,
            total_ul_mbps: ul,
            injected_dl_bits: 0,
            injected_ul_bits: 0,
            delivered_dl_bits: 0,
            delivered_ul_bits: 0,
            mode_usage: usage,
            solver_warning_slots: 0,
            flows: Vec::new(),
            conservation_ok: true,
            queue_series: None,
            trace: None,
        }
    }

    #[test]
    fn csv_has_header_and_one_line_per_row() {
        let runs = [metrics(10.0, 5.0, vec![]), metrics(12.0, 7.0, vec![])];
        let rows = aggregate_rows("d1", 212.06, "FD-SDMA", "symmetric", &runs);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mean_mbps, 11.0);
        assert_eq!(rows[1].mean_mbps, 6.0);
        let csv = rows_to_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("sweep_param,value,"));
        assert!(csv.contains("d1,212.06,FD-SDMA,symmetric,DL,11,"));
    }

    #[test]
    fn mode_usage_fractions_sum_to_one() {
        let runs = [
            metrics(0.0, 0.0, vec![("FDD-FDD".into(), 0.75), ("FDU-FDD".into(), 0.25)]),
            metrics(0.0, 0.0, vec![("FDU-FDD".into(), 1.0)]),
        ];
        let usage = aggregate_mode_usage(&runs);
        let total: f64 = usage.iter().map(|(_, f)| f).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert_eq!(usage[0].0, "FDU-FDD");
        assert!((usage[0].1 - 0.625).abs() < 1e-12);
    }
}
