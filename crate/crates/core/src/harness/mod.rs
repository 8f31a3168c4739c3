//! Experiment harness: configuration, good-scale certification, probe
//! dispatch and the on-disk artifact bundle.
//!
//! A run writes `manifest.json` plus `<probe>.csv` and `<probe>.summary.json`
//! for each selected probe. CSV and summary bodies depend only on the
//! effective configuration, so repeating a run reproduces them byte for byte;
//! only the manifest carries a timestamp.

pub mod certify;
pub mod config;
pub mod probes;

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;

pub use certify::{
    certify_good_scale, certify_interval, GoodScaleCertificate, IntervalCertificate, Verdict,
};
pub use config::{ExperimentConfig, OverrideEntry, ProbeKind, SCHEMA_VERSION};
pub use probes::{run_probe, ProbeOutput};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeStatus {
    Ok,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub probe: ProbeKind,
    pub status: ProbeStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub rows: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub version: String,
    pub schema_version: u32,
    pub name: String,
    pub master_seed: u64,
    pub samples: usize,
    pub config_sha256: String,
    pub config: ExperimentConfig,
    /// Derived constants, or the reason they could not be derived.
    pub ledger: serde_json::Value,
    /// `key=value` pairs given on the command line.
    pub cli_overrides: Vec<String>,
    /// Every desk-scale setting that differs from its default.
    pub overrides: Vec<OverrideEntry>,
    pub timestamp_unix: u64,
    pub probes: Vec<ProbeRecord>,
}

impl Manifest {
    pub fn failed(&self) -> bool {
        self.probes.iter().any(|p| p.status == ProbeStatus::Error)
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_csv(path: &Path, out: &ProbeOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    w.write_record(&out.header).map_err(std::io::Error::from)?;
    for row in &out.rows {
        w.write_record(row).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

/// Run every selected probe and write the artifact bundle into `out_dir`.
/// A failing probe is recorded and the remaining probes still run.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    cli_overrides: &[String],
) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut records = Vec::new();
    for &kind in &config.probes {
        let start = std::time::Instant::now();
        let record = match run_probe(kind, config)
            .and_then(|out| write_probe(out_dir, kind, &out).map(|p| (p, out.rows.len())))
        {
            Ok(((csv, summary), rows)) => ProbeRecord {
                probe: kind,
                status: ProbeStatus::Ok,
                message: None,
                csv: Some(file_name(&csv)),
                summary: Some(file_name(&summary)),
                rows,
                seconds: start.elapsed().as_secs_f64(),
            },
            Err(e) => ProbeRecord {
                probe: kind,
                status: ProbeStatus::Error,
                message: Some(e.to_string()),
                csv: None,
                summary: None,
                rows: 0,
                seconds: start.elapsed().as_secs_f64(),
            },
        };
        records.push(record);
    }
    let ledger = match config.ledger() {
        Ok(l) => serde_json::to_value(l)?,
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    };
    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        master_seed: config.seeds.master,
        samples: config.seeds.samples,
        config_sha256: config.hash(),
        config: config.clone(),
        ledger,
        cli_overrides: cli_overrides.to_vec(),
        overrides: config.desk_overrides(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        probes: records,
    };
    std::fs::write(
        out_dir.join(MANIFEST_FILE),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    Ok(manifest)
}

fn write_probe(out_dir: &Path, kind: ProbeKind, out: &ProbeOutput) -> Result<(PathBuf, PathBuf)> {
    let csv = out_dir.join(format!("{}.csv", kind.name()));
    let summary = out_dir.join(format!("{}.summary.json", kind.name()));
    write_csv(&csv, out)?;
    std::fs::write(&summary, serde_json::to_string_pretty(&out.summary)? + "\n")?;
    Ok((csv, summary))
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}
