//! Deterministic CSV and manifest emission.
//!
//! Every CSV opens with a `#` comment line declaring column units. Data
//! rows are written in sweep order with shortest-roundtrip float formatting,
//! so a rerun with the same manifest reproduces the files byte for byte.
//! Timings live in the manifest only; they are the one thing allowed to
//! differ between reruns.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::sweep::{Engine, SweepResult, SweepRow};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reproducibility record written next to every output set.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub master_seed: u64,
    pub n_trials: u64,
    pub probes_per_trial: u32,
    pub estimator_mode: String,
    pub scenario_path: String,
    pub scenario_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_path: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_sha256: Option<String>,
    pub outputs: Vec<String>,
    pub failures: Vec<String>,
    /// Wall-clock per (value, metric, engine); informational only.
    pub runtime_ms: Vec<RuntimeEntry>,
}

#[derive(Debug, Serialize)]
pub struct RuntimeEntry {
    pub value: f64,
    pub metric: String,
    pub engine: String,
    pub ms: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, n_trials: u64, probes: u32, mode: &str) -> Self {
        Self {
            tool: "dude",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            master_seed: seed,
            n_trials,
            probes_per_trial: probes,
            estimator_mode: mode.to_string(),
            scenario_path: String::new(),
            scenario_sha256: String::new(),
            sweep_path: None,
            sweep_sha256: None,
            outputs: Vec::new(),
            failures: Vec::new(),
            runtime_ms: Vec::new(),
        }
    }

    pub fn write(&self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn ensure_out_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(dir: &Path, name: &str) -> anyhow::Result<fs::File> {
    let path = dir.join(name);
    fs::File::create(&path).with_context(|| format!("creating {}", path.display()))
}

/// Pivot scalar rows into one CSV per metric family. Returns the file names
/// written.
pub fn write_metric_csvs(
    result: &SweepResult,
    variable_label: &str,
    out_dir: &Path,
) -> anyhow::Result<Vec<String>> {
    let mut written = Vec::new();

    let case_rows: Vec<&SweepRow> = result
        .rows
        .iter()
        .filter(|r| r.metric.starts_with('p'))
        .collect();
    if !case_rows.is_empty() {
        let mut f = create(out_dir, "case_probs.csv")?;
        writeln!(
            f,
            "# {variable_label} [-], engine [-], p1..p4 [probability], ci columns [95% halfwidth]"
        )?;
        writeln!(
            f,
            "{variable_label},engine,p1,p1_ci,p2,p2_ci,p3,p3_ci,p4,p4_ci"
        )?;
        for ((value, engine), group) in group_rows(&case_rows) {
            let mut cols = BTreeMap::new();
            for r in group {
                cols.insert(r.metric.clone(), (r.result, r.error));
            }
            let get = |m: &str| cols.get(m).copied().unwrap_or((f64::NAN, f64::NAN));
            let (p1, c1) = get("p1");
            let (p2, c2) = get("p2");
            let (p3, c3) = get("p3");
            let (p4, c4) = get("p4");
            writeln!(
                f,
                "{value},{},{p1},{c1},{p2},{c2},{p3},{c3},{p4},{c4}",
                engine.label()
            )?;
        }
        written.push("case_probs.csv".to_string());
    }

    for (prefix, name, unit) in [
        ("se_", "spectral_efficiency.csv", "bits/s/Hz"),
        ("throughput_", "throughput.csv", "kbps"),
        ("mean_distance_", "mean_distance.csv", "m"),
    ] {
        let rows: Vec<&SweepRow> = result
            .rows
            .iter()
            .filter(|r| r.metric.starts_with(prefix))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let mut f = create(out_dir, name)?;
        writeln!(
            f,
            "# {variable_label} [-], metric [-], engine [-], value [{unit}], error [{unit}]"
        )?;
        writeln!(f, "{variable_label},metric,engine,value,error")?;
        for r in &rows {
            writeln!(
                f,
                "{},{},{},{},{}",
                r.value,
                r.metric,
                r.engine.label(),
                r.result,
                r.error
            )?;
        }
        written.push(name.to_string());
    }

    if !result.curves.is_empty() {
        let mut f = create(out_dir, "distance_pdf.csv")?;
        writeln!(
            f,
            "# {variable_label} [-], policy [-], engine [-], x [m], density [1/m]"
        )?;
        writeln!(f, "{variable_label},policy,engine,x_m,density_per_m")?;
        for c in &result.curves {
            writeln!(
                f,
                "{},{},{},{},{}",
                c.value,
                c.policy.label(),
                c.engine.label(),
                c.x_m,
                c.density_per_m
            )?;
        }
        written.push("distance_pdf.csv".to_string());
    }

    Ok(written)
}

/// Group scalar rows by (value, engine), preserving sweep order.
fn group_rows<'a>(
    rows: &[&'a SweepRow],
) -> Vec<((f64, Engine), Vec<&'a SweepRow>)> {
    let mut grouped: Vec<((f64, Engine), Vec<&SweepRow>)> = Vec::new();
    for r in rows {
        match grouped
            .iter_mut()
            .find(|((v, e), _)| *v == r.value && *e == r.engine)
        {
            Some((_, g)) => g.push(r),
            None => grouped.push(((r.value, r.engine), vec![r])),
        }
    }
    grouped
}
