use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use idmcal::calibration::CalibrationResult;
use idmcal::synth::{BenchmarkCase, BenchmarkSpec};
use idmcal::trajectory::{
    parse_trajectory_csv, write_trajectory_csv, CfEvent, ColumnSchema, GroundTruth, Source,
    DEFAULT_V_EPS,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RESULTS_FILE: &str = "results.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEntry {
    pub id: String,
    pub source: Source,
    /// Relative to the manifest's directory.
    pub file: String,
    pub samples: usize,
    pub dt: f64,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<GroundTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<BenchmarkCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventManifest {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSpec>,
    pub events: Vec<EventEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn write_json_pretty<T: Serialize>(path: &Path, value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, &bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(bytes)
}

/// Writes each event as `events/<id>.csv` under `dir`, returning the
/// manifest entries.
pub fn write_events(
    dir: &Path,
    events: &[CfEvent],
    cases: Option<&[BenchmarkCase]>,
) -> Result<Vec<EventEntry>> {
    let events_dir = dir.join("events");
    std::fs::create_dir_all(&events_dir)
        .with_context(|| format!("creating {}", events_dir.display()))?;
    let mut entries = Vec::with_capacity(events.len());
    for (i, ev) in events.iter().enumerate() {
        let file = format!("events/{}.csv", ev.id);
        let path = dir.join(&file);
        let out = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_trajectory_csv(BufWriter::new(out), &ev.samples)
            .with_context(|| format!("writing {}", path.display()))?;
        entries.push(EventEntry {
            id: ev.id.clone(),
            source: ev.source,
            file,
            samples: ev.len(),
            dt: ev.dt,
            duration: ev.duration(),
            truth: ev.truth.clone(),
            case: cases.map(|c| c[i].clone()),
        });
    }
    Ok(entries)
}

pub fn read_manifest(path: &Path) -> Result<EventManifest> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let m: EventManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    if m.schema_version != SCHEMA_VERSION {
        bail!(
            "{}: unsupported schema version {} (expected {SCHEMA_VERSION})",
            path.display(),
            m.schema_version
        );
    }
    Ok(m)
}

/// Loads events from a manifest, a directory holding one, or single CSV
/// files (id = file stem, tagged with `source`).
pub fn load_events(inputs: &[PathBuf], source: Source) -> Result<Vec<CfEvent>> {
    let mut events = Vec::new();
    for input in inputs {
        let manifest_path = if input.is_dir() {
            Some(input.join(MANIFEST_FILE))
        } else if input.extension().is_some_and(|e| e == "json") {
            Some(input.clone())
        } else {
            None
        };
        match manifest_path {
            Some(mp) => {
                let manifest = read_manifest(&mp)?;
                let base = mp.parent().unwrap_or(Path::new("."));
                for entry in &manifest.events {
                    let mut ev = read_event(&base.join(&entry.file), &entry.id, entry.source)?;
                    ev.truth = entry.truth.clone();
                    events.push(ev);
                }
            }
            None => {
                let id = input
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "event".into());
                events.push(read_event(input, &id, source)?);
            }
        }
    }
    Ok(events)
}

fn read_event(path: &Path, id: &str, source: Source) -> Result<CfEvent> {
    let traj = parse_trajectory_csv(path, &ColumnSchema::default())
        .with_context(|| format!("{}", path.display()))?;
    CfEvent::from_trajectory(id, source, &traj, DEFAULT_V_EPS)
        .with_context(|| format!("{}", path.display()))
}

/// One line of `results.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub event_id: String,
    #[serde(flatten)]
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { result: CalibrationResult },
    Failed { error: String },
}

impl ResultRecord {
    pub fn result(&self) -> Option<&CalibrationResult> {
        match &self.outcome {
            Outcome::Ok { result } => Some(result),
            Outcome::Failed { .. } => None,
        }
    }
}

pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    for r in records {
        serde_json::to_writer(&mut bytes, r)?;
        bytes.push(b'\n');
    }
    let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&bytes)?;
    Ok(bytes)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let path = if path.is_dir() { path.join(RESULTS_FILE) } else { path.to_path_buf() };
    let f = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ResultRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}: line {}", path.display(), i + 1))?;
        if rec.schema_version != SCHEMA_VERSION {
            bail!(
                "{}: line {}: unsupported schema version {}",
                path.display(),
                i + 1,
                rec.schema_version
            );
        }
        out.push(rec);
    }
    Ok(out)
}
