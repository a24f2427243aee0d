use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

fn fdsb() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdsb"))
}

const SMALL_RUN: &str = r#"
baseline = "FD-SDMA-MP"
seeds = [1, 2]

[scenario]
ues_per_cell = 2
num_antennas = 4

[traffic]
dl_file_bits = 500000
ul_file_bits = 100000

[engine]
sim_duration_s = 0.1
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

/// All regular files under a directory, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

#[test]
fn validate_accepts_good_config_and_names_bad_keys() {
    let dir = tempfile::tempdir().unwrap();
    let good = write_config(dir.path(), "good.toml", SMALL_RUN);
    let ok = fdsb().arg("validate").arg(&good).output().unwrap();
    assert!(ok.status.success(), "{ok:?}");

    let bad = write_config(dir.path(), "bad.toml", "mbs_powerr = 3\n");
    let err = fdsb().arg("validate").arg(&bad).output().unwrap();
    assert!(!err.status.success());
    let stderr = String::from_utf8(err.stderr).unwrap();
    assert!(stderr.contains("mbs_powerr"), "{stderr}");
    // Machine-parsable error record.
    let record: serde_json::Value = serde_json::from_str(stderr.trim()).unwrap();
    assert!(record["error"].is_string());
}

#[test]
fn run_emits_the_documented_schema() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", SMALL_RUN);
    let out_dir = dir.path().join("out");
    let status = fdsb()
        .args(["run"])
        .arg(&config)
        .arg("--out-dir")
        .arg(&out_dir)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_param,value,baseline,traffic,direction,mean_mbps,stderr_mbps,n_seeds"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][..5], ["d1", "212.06", "FD-SDMA-MP", "asymmetric", "DL"]);
    assert_eq!(rows[1][4], "UL");
    assert_eq!(rows[0][7], "2");

    // JSON mirrors the CSV values.
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("results.json")).unwrap()).unwrap();
    let arr = json.as_array().unwrap();
    assert_eq!(arr.len(), 2);
    for (row, rec) in rows.iter().zip(arr) {
        assert_eq!(rec["direction"].as_str().unwrap(), row[4]);
        let csv_mean: f64 = row[5].parse().unwrap();
        assert_eq!(rec["mean_mbps"].as_f64().unwrap(), csv_mean);
    }

    // Mode-usage fractions sum to one.
    let usage =
        fs::read_to_string(out_dir.join("mode_usage_FD-SDMA-MP_asymmetric.csv")).unwrap();
    let mut lines = usage.lines();
    assert_eq!(lines.next().unwrap(), "mode,fraction");
    let total: f64 = lines
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-9, "fractions sum to {total}");

    // Per-seed result files exist.
    assert!(out_dir
        .join("runs/run_single_FD-SDMA-MP_asymmetric_seed1.json")
        .exists());
}

#[test]
fn identical_seeds_give_byte_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "run.toml", SMALL_RUN);
    for out in ["a", "b"] {
        let status = fdsb()
            .arg("run")
            .arg(&config)
            .arg("--out-dir")
            .arg(dir.path().join(out))
            .status()
            .unwrap();
        assert!(status.success());
    }
    let a = snapshot(&dir.path().join("a"));
    let b = snapshot(&dir.path().join("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn interrupted_sweep_resumes_without_rerunning() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_config(
        dir.path(),
        "sweep.toml",
        r#"
[sweep]
parameter = "d2"
values_m = [55.36, 180.0]
baselines = ["HD-SDMA"]
traffic = ["symmetric"]

[base]
seeds = [3]

[base.scenario]
ues_per_cell = 2
num_antennas = 4

[base.traffic]
dl_file_bits = 500000
ul_file_bits = 100000

[base.engine]
sim_duration_s = 0.1
"#,
    );
    let out_dir = dir.path().join("out");
    let run = || {
        let output = fdsb()
            .arg("sweep")
            .arg(&spec)
            .arg("--out-dir")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(output.status.success());
        String::from_utf8(output.stderr).unwrap()
    };
    run();
    let first = snapshot(&out_dir);
    assert!(first.contains_key("results.csv"));

    // Simulate an interrupted aggregate and resume; runs come from cache.
    fs::remove_file(out_dir.join("results.csv")).unwrap();
    let stderr = run();
    assert_eq!(stderr.matches("(cached)").count(), 2, "{stderr}");
    assert_eq!(snapshot(&out_dir), first);
}
