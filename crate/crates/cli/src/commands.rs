use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use idmcal::calibration::{calibrate_batch, summarize, BatchSummary, CalibrationResult, ParameterSpace, SpaceMode};
use idmcal::objectives::ObjectiveSpec;
use idmcal::optimizer::OptimizerConfig;
use idmcal::stats::BoxPlot;
use idmcal::synth::{benchmark_cases, BenchmarkCase, BenchmarkSpec};
use idmcal::trajectory::{extract_cf_events, parse_trajectory_csv, CfEvent, ColumnSchema, SelectionCriteria, Source};
use idmcal::{ModelKind, ParameterSet};
use serde::Serialize;

use crate::io::{
    load_events, read_results, sha256_hex, write_events, write_json_pretty, write_results, EventManifest,
    Outcome, ResultRecord, MANIFEST_FILE, RESULTS_FILE, SCHEMA_VERSION,
};
use crate::Failure;

fn create_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Runtime)
}

pub struct ExtractArgs {
    pub inputs: Vec<PathBuf>,
    pub source: Source,
    pub criteria: SelectionCriteria,
    pub out: PathBuf,
}

/// Returns the number of events written. Files that fail to parse are
/// reported and skipped; any such failure makes the command fail after
/// the remaining files are processed.
pub fn extract(args: &ExtractArgs) -> Result<usize, Failure> {
    let mut events: Vec<CfEvent> = Vec::new();
    let mut errors = Vec::new();
    for input in &args.inputs {
        let traj = match parse_trajectory_csv(input, &ColumnSchema::default()) {
            Ok(t) => t,
            Err(e) => {
                errors.push(format!("{}: {e}", input.display()));
                continue;
            }
        };
        let prefix = input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trajectory".into());
        events.extend(extract_cf_events(&traj, &args.criteria, args.source, &prefix));
    }
    create_out(&args.out)?;
    let entries = write_events(&args.out, &events, None).map_err(Failure::Runtime)?;
    let manifest = EventManifest {
        schema_version: SCHEMA_VERSION,
        benchmark: None,
        events: entries,
        errors: errors.clone(),
    };
    write_json_pretty(&args.out.join(MANIFEST_FILE), &manifest).map_err(Failure::Runtime)?;
    if !errors.is_empty() {
        return Err(Failure::Parse(anyhow::anyhow!(errors.join("\n"))));
    }
    Ok(events.len())
}

/// Writes the benchmark corpus and returns the manifest's SHA-256.
pub fn synth(spec: &BenchmarkSpec, out: &Path) -> Result<String, Failure> {
    let cases: Vec<BenchmarkCase> = benchmark_cases(spec).map_err(|e| Failure::Runtime(e.into()))?;
    let mut events = Vec::with_capacity(cases.len());
    let mut kept = Vec::with_capacity(cases.len());
    let mut errors = Vec::new();
    for case in &cases {
        match case.generate() {
            Ok(ev) => {
                events.push(ev);
                kept.push(case.clone());
            }
            Err(e) => errors.push(format!("{}: {e}", case.id)),
        }
    }
    create_out(out)?;
    let entries = write_events(out, &events, Some(&kept)).map_err(Failure::Runtime)?;
    let manifest = EventManifest {
        schema_version: SCHEMA_VERSION,
        benchmark: Some(*spec),
        events: entries,
        errors,
    };
    let bytes = write_json_pretty(&out.join(MANIFEST_FILE), &manifest).map_err(Failure::Runtime)?;
    Ok(sha256_hex(&bytes))
}

pub struct CalibrateArgs {
    pub inputs: Vec<PathBuf>,
    pub source: Source,
    pub model: ModelKind,
    pub space: ParameterSpace,
    pub objective: ObjectiveSpec,
    pub optimizer: OptimizerConfig,
    pub jobs: usize,
    pub out: PathBuf,
}

/// Description of a calibration run, written next to its results.
#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    schema_version: u32,
    model: ModelKind,
    space: &'a ParameterSpace,
    objective: &'a ObjectiveSpec,
    optimizer: &'a OptimizerConfig,
    events: usize,
    calibrated: usize,
    failed: usize,
    results_sha256: String,
}

pub struct CalibrateOutcome {
    pub calibrated: usize,
    pub failures: Vec<(String, String)>,
}

pub fn calibrate(args: &CalibrateArgs) -> Result<CalibrateOutcome, Failure> {
    let events = load_events(&args.inputs, args.source).map_err(Failure::Parse)?;
    if events.is_empty() {
        return Err(Failure::Config(anyhow::anyhow!("no events found in the given inputs")));
    }
    let outcome = calibrate_batch(&events, args.model, &args.space, &args.objective, &args.optimizer, args.jobs)
        .map_err(|e| Failure::Runtime(e.into()))?;

    let records: Vec<ResultRecord> = outcome
        .results
        .iter()
        .map(|r| match r {
            Ok(res) => ResultRecord {
                schema_version: SCHEMA_VERSION,
                event_id: res.event_id.clone(),
                outcome: Outcome::Ok { result: res.clone() },
            },
            Err(f) => ResultRecord {
                schema_version: SCHEMA_VERSION,
                event_id: f.event_id.clone(),
                outcome: Outcome::Failed { error: f.error.clone() },
            },
        })
        .collect();

    create_out(&args.out)?;
    let bytes = write_results(&args.out.join(RESULTS_FILE), &records).map_err(Failure::Runtime)?;
    let label = run_label(&args.out);
    write_summary_csv(&args.out.join("summary.csv"), &[(label.clone(), &outcome.summary)])
        .map_err(Failure::Runtime)?;
    let failures: Vec<(String, String)> =
        outcome.failures().map(|f| (f.event_id.clone(), f.error.clone())).collect();
    let text = summary_text(&label, &outcome.summary, &failures);
    std::fs::write(args.out.join("summary.txt"), text).map_err(|e| Failure::Runtime(e.into()))?;
    let run = RunRecord {
        schema_version: SCHEMA_VERSION,
        model: args.model,
        space: &args.space,
        objective: &args.objective,
        optimizer: &args.optimizer,
        events: events.len(),
        calibrated: outcome.summary.calibrated,
        failed: outcome.summary.failed,
        results_sha256: sha256_hex(&bytes),
    };
    write_json_pretty(&args.out.join("run.json"), &run).map_err(Failure::Runtime)?;
    Ok(CalibrateOutcome {
        calibrated: outcome.summary.calibrated,
        failures,
    })
}

fn run_label(path: &Path) -> String {
    let dir = if path.is_file() { path.parent().unwrap_or(path) } else { path };
    dir.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "run".into())
}

fn fmt_list(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn write_summary_csv(path: &Path, runs: &[(String, &BatchSummary)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record([
        "schema_version", "run", "group", "name", "n", "min", "q1", "median", "q3", "max", "whisker_low",
        "whisker_high", "outliers",
    ])?;
    for (label, summary) in runs {
        let groups: [(&str, &BTreeMap<String, BoxPlot>); 2] =
            [("metric", &summary.metrics), ("parameter", &summary.parameters)];
        for (group, plots) in groups {
            for (name, b) in plots {
                let s = &b.summary;
                w.write_record([
                    SCHEMA_VERSION.to_string(),
                    label.clone(),
                    group.to_string(),
                    name.clone(),
                    b.n.to_string(),
                    s.min.to_string(),
                    s.q1.to_string(),
                    s.median.to_string(),
                    s.q3.to_string(),
                    s.max.to_string(),
                    b.whisker_low.to_string(),
                    b.whisker_high.to_string(),
                    fmt_list(&b.outliers),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn summary_text(label: &str, summary: &BatchSummary, failures: &[(String, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "run {label}: {} calibrated, {} failed", summary.calibrated, summary.failed);
    let _ = writeln!(
        out,
        "{:<16} {:>4} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "", "n", "min", "q1", "median", "q3", "max"
    );
    for plots in [&summary.metrics, &summary.parameters] {
        for (name, b) in plots {
            let s = &b.summary;
            let _ = writeln!(
                out,
                "{name:<16} {:>4} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
                b.n, s.min, s.q1, s.median, s.q3, s.max
            );
        }
    }
    for (id, err) in failures {
        let _ = writeln!(out, "failed {id}: {err}");
    }
    out
}

pub struct ReportArgs {
    pub inputs: Vec<PathBuf>,
    pub labels: Vec<String>,
    pub out: PathBuf,
}

pub struct ReportOutcome {
    pub runs: usize,
    pub paired_rows: usize,
    pub warnings: Vec<String>,
}

struct Run {
    label: String,
    results: Vec<CalibrationResult>,
    failed: usize,
}

fn parameter_names(results: &[CalibrationResult]) -> Vec<&'static str> {
    let modes: BTreeSet<&str> = results.iter().map(|r| r.space.as_str()).collect();
    let mode = if modes.len() == 1 { results[0].space } else { SpaceMode::Custom };
    match ParameterSpace::for_mode(mode) {
        Some(space) => space.free_names(),
        None => ParameterSet::NAMES.to_vec(),
    }
}

pub fn report(args: &ReportArgs) -> Result<ReportOutcome, Failure> {
    let mut runs = Vec::with_capacity(args.inputs.len());
    let mut seen = BTreeMap::<String, usize>::new();
    for (i, input) in args.inputs.iter().enumerate() {
        let records = read_results(input).map_err(Failure::Parse)?;
        let base = args.labels.get(i).cloned().unwrap_or_else(|| run_label(input));
        let count = seen.entry(base.clone()).or_insert(0);
        *count += 1;
        let label = if *count > 1 { format!("{base}-{count}") } else { base };
        let failed = records.iter().filter(|r| r.result().is_none()).count();
        let results = records.iter().filter_map(|r| r.result().cloned()).collect();
        runs.push(Run { label, results, failed });
    }

    let summaries: Vec<(String, BatchSummary)> = runs
        .iter()
        .map(|run| {
            let refs: Vec<&CalibrationResult> = run.results.iter().collect();
            let names = if run.results.is_empty() { Vec::new() } else { parameter_names(&run.results) };
            (run.label.clone(), summarize(&refs, &names, run.failed))
        })
        .collect();
    create_out(&args.out)?;
    let borrowed: Vec<(String, &BatchSummary)> = summaries.iter().map(|(l, s)| (l.clone(), s)).collect();
    write_summary_csv(&args.out.join("summary.csv"), &borrowed).map_err(Failure::Runtime)?;

    let mut warnings = Vec::new();
    let mut text = String::new();
    for (label, s) in &summaries {
        text.push_str(&summary_text(label, s, &[]));
        text.push('\n');
    }
    let paired_path = args.out.join("paired.csv");
    let mut w = csv::Writer::from_path(&paired_path).map_err(|e| Failure::Runtime(e.into()))?;
    let mut paired_rows = 0;
    let mut write = || -> Result<()> {
        w.write_record([
            "schema_version", "event_id", "baseline", "run", "compliance_baseline", "compliance_run",
            "compliance_delta", "nrmse_spacing_baseline", "nrmse_spacing_run",
        ])?;
        let Some((baseline, others)) = runs.split_first() else {
            return Ok(());
        };
        let base_map: BTreeMap<&str, &CalibrationResult> =
            baseline.results.iter().map(|r| (r.event_id.as_str(), r)).collect();
        for run in others {
            let run_ids: BTreeSet<&str> = run.results.iter().map(|r| r.event_id.as_str()).collect();
            let base_ids: BTreeSet<&str> = base_map.keys().copied().collect();
            let common: Vec<&str> = base_ids.intersection(&run_ids).copied().collect();
            if common.len() != base_ids.len() || common.len() != run_ids.len() {
                warnings.push(format!(
                    "event ids of {} and {} differ; pairing the {} shared events",
                    baseline.label,
                    run.label,
                    common.len()
                ));
            }
            let mut improved = 0;
            for r in run.results.iter().filter(|r| base_map.contains_key(r.event_id.as_str())) {
                let b = base_map[r.event_id.as_str()];
                let delta = r.compliance - b.compliance;
                improved += usize::from(delta >= 0.0);
                w.write_record([
                    SCHEMA_VERSION.to_string(),
                    r.event_id.clone(),
                    baseline.label.clone(),
                    run.label.clone(),
                    b.compliance.to_string(),
                    r.compliance.to_string(),
                    delta.to_string(),
                    opt(b.errors.nrmse_spacing),
                    opt(r.errors.nrmse_spacing),
                ])?;
                paired_rows += 1;
            }
            let _ = writeln!(
                text,
                "{} vs {}: compliance delta >= 0 on {improved} of {} shared events",
                run.label,
                baseline.label,
                common.len()
            );
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(Failure::Runtime)?;
    for warning in &warnings {
        let _ = writeln!(text, "warning: {warning}");
    }
    std::fs::write(args.out.join("report.txt"), text).map_err(|e| Failure::Runtime(e.into()))?;
    Ok(ReportOutcome {
        runs: runs.len(),
        paired_rows,
        warnings,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
