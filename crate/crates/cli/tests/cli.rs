use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn idmcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_idmcal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Trajectory at 10 Hz with a constant 1.5 s time gap at 20 m/s.
fn write_trajectory(path: &Path, seconds: f64, gap: f64) {
    let mut text = String::from("time_s,lead_pos_m,lead_speed_mps,foll_pos_m,foll_speed_mps,lead_length_m\n");
    let n = (seconds * 10.0).round() as usize;
    for i in 0..=n {
        let t = i as f64 * 0.1;
        text.push_str(&format!("{t},{},20,{},20,4.5\n", 20.0 * t + gap + 4.5, 20.0 * t));
    }
    std::fs::write(path, text).unwrap();
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn extract_in_band_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("run1.csv");
    write_trajectory(&input, 25.0, 30.0);
    let out = dir.path().join("ev");
    let o = idmcal(&["extract", p(&input), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["schema_version"], 1);
    let events = m["events"].as_array().unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!(events[0]["id"], "run1-0");
    assert_eq!(events[0]["source"], "drone");
    assert!((events[0]["duration"].as_f64().unwrap() - 25.0).abs() < 1e-9);
    assert!(out.join("events/run1-0.csv").exists());
}

#[test]
fn extract_out_of_band_gives_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("far.csv");
    write_trajectory(&input, 25.0, 100.0);
    let out = dir.path().join("ev");
    let o = idmcal(&["extract", p(&input), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(manifest(&out)["events"].as_array().unwrap().is_empty());
}

#[test]
fn extract_reports_malformed_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(
        &input,
        "time_s,lead_pos_m,lead_speed_mps,foll_pos_m,foll_speed_mps,lead_length_m\n0,30,20,0,20,4\n0.1,32,20,2,abc,4\n",
    )
    .unwrap();
    let o = idmcal(&["extract", p(&input), "--out", p(&dir.path().join("ev"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("row 2"), "{err}");
    assert!(err.contains("bad.csv"), "{err}");
}

fn synth(dir: &Path, name: &str, extra: &[&str]) -> (std::path::PathBuf, String) {
    let out = dir.join(name);
    let mut args = vec!["synth", "--out", p(&out)];
    args.extend_from_slice(extra);
    let o = idmcal(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let hash = stdout.split_whitespace().last().unwrap().to_string();
    (out, hash)
}

#[test]
fn synth_default_benchmark_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, hash_a) = synth(dir.path(), "a", &["--seed", "7"]);
    let (_, hash_b) = synth(dir.path(), "b", &["--seed", "7"]);
    assert_eq!(hash_a, hash_b);
    assert_eq!(manifest(&a)["events"].as_array().unwrap().len(), 50);
    let (c, hash_c) = synth(dir.path(), "c", &["--seed", "8"]);
    assert_ne!(hash_a, hash_c);
    let keys = |v: &Value| -> Vec<String> {
        let mut k: Vec<String> = v["events"][0].as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    assert_eq!(keys(&manifest(&a)), keys(&manifest(&c)));
}

#[test]
fn zero_noise_events_regenerate_from_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let (out, _) = synth(dir.path(), "s", &["--count", "4"]);
    let m = manifest(&out);
    for entry in m["events"].as_array().unwrap() {
        let case: idmcal::synth::BenchmarkCase = serde_json::from_value(entry["case"].clone()).unwrap();
        let regenerated = case.generate().unwrap();
        let mut buf = Vec::new();
        idmcal::trajectory::write_trajectory_csv(&mut buf, &regenerated.samples).unwrap();
        let on_disk = std::fs::read(out.join(entry["file"].as_str().unwrap())).unwrap();
        assert_eq!(buf, on_disk);
        assert_eq!(
            serde_json::to_value(case.p_true).unwrap(),
            entry["truth"]["params"]
        );
    }
}

const RESULT_KEYS: [&str; 9] = [
    "compliance",
    "diagnostics",
    "errors",
    "event_id",
    "model",
    "objective",
    "objective_value",
    "params",
    "space",
];

#[test]
fn calibrate_writes_records_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _) = synth(dir.path(), "s", &["--count", "3"]);
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let o = idmcal(&["calibrate", p(&events), "--out", p(&out), "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let first = run("r1", "1");
    let second = run("r2", "3");
    let bytes = std::fs::read(first.join("results.jsonl")).unwrap();
    assert_eq!(bytes, std::fs::read(second.join("results.jsonl")).unwrap());
    assert_eq!(
        std::fs::read(first.join("summary.csv")).unwrap().len(),
        std::fs::read(second.join("summary.csv")).unwrap().len()
    );

    let lines: Vec<Value> = String::from_utf8(bytes)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 3);
    for line in &lines {
        assert_eq!(line["schema_version"], 1);
        assert_eq!(line["status"], "ok");
        let mut keys: Vec<&str> = line["result"].as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, RESULT_KEYS);
        for k in ["a", "b", "v0", "delta", "s0", "s1", "T"] {
            assert!(line["result"]["params"][k].is_number());
        }
        for k in ["nrmse_spacing", "nrmse_speed", "nrmse_timegap", "nrmse_sstar"] {
            assert!(line["result"]["errors"][k].is_number());
        }
        let c = line["result"]["compliance"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&c));
    }
    let summary = std::fs::read_to_string(first.join("summary.csv")).unwrap();
    assert!(summary.starts_with("schema_version,run,group,name,n,min,q1,median,q3,max"));
    assert!(summary.contains(",metric,compliance,3,"));
    assert!(summary.contains(",parameter,T,3,"));
}

#[test]
fn weights_without_combined_objective_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _) = synth(dir.path(), "s", &["--count", "1"]);
    let out = dir.path().join("r");
    let o = idmcal(&["calibrate", p(&events), "--out", p(&out), "--objective", "spacing", "--beta", "0.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());

    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[objective]\nmop = \"speed\"\nalpha = 2.0\n").unwrap();
    let o = idmcal(&["calibrate", p(&events), "--out", p(&out), "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_and_custom_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _) = synth(dir.path(), "s", &["--count", "1"]);
    let bounds = dir.path().join("bounds.toml");
    std::fs::write(
        &bounds,
        "[lower]\na = 0.5\nb = 0.5\nv0 = 25.0\ndelta = 4.0\ns0 = 2.0\ns1 = 0.0\nT = 0.8\n\
         [upper]\na = 3.0\nb = 3.0\nv0 = 25.0\ndelta = 4.0\ns0 = 2.0\ns1 = 0.0\nT = 2.5\n",
    )
    .unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "model = \"idm+\"\n[objective]\nmop = \"combined\"\nbeta = 0.5\n[optimizer]\nmax_function_evaluations = 400\n",
    )
    .unwrap();
    let out = dir.path().join("r");
    let o = idmcal(&[
        "calibrate", p(&events), "--out", p(&out), "--config", p(&cfg), "--bounds", p(&bounds),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let line: Value = serde_json::from_str(
        std::fs::read_to_string(out.join("results.jsonl")).unwrap().lines().next().unwrap(),
    )
    .unwrap();
    let r = &line["result"];
    assert_eq!(r["model"], "idm+");
    assert_eq!(r["space"], "custom");
    assert_eq!(r["objective"]["beta"], 0.5);
    assert_eq!(r["params"]["v0"], 25.0);
    assert!(r["diagnostics"]["evaluations"].as_u64().unwrap() <= 400);

    let o = idmcal(&["calibrate", p(&events), "--out", p(&out), "--space", "custom"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn calibrate_missing_input_is_a_parse_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = idmcal(&[
        "calibrate",
        p(&dir.path().join("nothing.csv")),
        "--out",
        p(&dir.path().join("r")),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn report_pairs_and_warns_on_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let (events, _) = synth(dir.path(), "s", &["--count", "3"]);
    let (fewer, _) = synth(dir.path(), "f", &["--count", "2"]);
    let calibrate = |input: &Path, name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["calibrate", p(input), "--out", p(&out)];
        args.extend_from_slice(extra);
        let o = idmcal(&args);
        assert!(o.status.success(), "{}", stderr(&o));
        out
    };
    let spacing = calibrate(&events, "spacing", &[]);
    let combined = calibrate(&events, "combined", &["--objective", "combined"]);
    let partial = calibrate(&fewer, "partial", &["--model", "idm+"]);

    let rep = dir.path().join("rep");
    let o = idmcal(&["report", p(&spacing), p(&combined), "--out", p(&rep)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let paired = std::fs::read_to_string(rep.join("paired.csv")).unwrap();
    let rows: Vec<&str> = paired.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let cols: Vec<&str> = row.split(',').collect();
        let (b, r, d): (f64, f64, f64) = (cols[4].parse().unwrap(), cols[5].parse().unwrap(), cols[6].parse().unwrap());
        assert_eq!(d, r - b);
    }

    let single = dir.path().join("single");
    let o = idmcal(&["report", p(&spacing), "--out", p(&single)]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(single.join("paired.csv")).unwrap().lines().count(), 1);
    let summary = std::fs::read_to_string(single.join("summary.csv")).unwrap();
    assert!(summary.lines().skip(1).all(|l| l.split(',').nth(1) == Some("spacing")));

    let o = idmcal(&["report", p(&spacing), p(&partial), "--out", p(&dir.path().join("mix"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("pairing the 2 shared events"), "{}", stderr(&o));
}
