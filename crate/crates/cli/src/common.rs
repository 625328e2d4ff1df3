use std::path::Path;
use std::sync::Arc;

use anyhow::anyhow;
use clap::ValueEnum;
use navmetrics::metrics::MetricName;
use navmetrics::simworld::success_threshold;
use navmetrics::{DistanceOracle, NavWorld};

use crate::errors::{CliError, CliResult};
use crate::manifest::RunManifest;

/// Distance mode flag shared by the scoring commands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Geodesic,
    Euclidean,
    GridApprox,
}

impl ModeArg {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeArg::Geodesic => "geodesic",
            ModeArg::Euclidean => "euclidean",
            ModeArg::GridApprox => "grid-approx",
        }
    }
}

/// Builds the oracle for `mode`. Geodesic oracles precompute the all-pairs
/// table when `precompute` is set, which pays off as soon as more than a
/// handful of episodes are scored.
pub fn build_oracle(
    world: Arc<NavWorld>,
    mode: ModeArg,
    grid_spacing: f64,
    precompute: bool,
) -> CliResult<DistanceOracle> {
    match mode {
        ModeArg::Geodesic if precompute => Ok(DistanceOracle::all_pairs(world)),
        ModeArg::Geodesic => Ok(DistanceOracle::geodesic(world)),
        ModeArg::Euclidean => Ok(DistanceOracle::euclidean(world)),
        ModeArg::GridApprox => DistanceOracle::grid_approx(world, grid_spacing)
            .map_err(|e| CliError::Validation(anyhow!("grid-approx mode: {e}"))),
    }
}

pub fn read_to_string(path: &Path, manifest: &mut RunManifest) -> CliResult<String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(anyhow!("cannot read {}: {e}", path.display())))?;
    manifest.record_input(path, text.as_bytes());
    Ok(text)
}

pub fn load_world(path: &Path, manifest: &mut RunManifest) -> CliResult<Arc<NavWorld>> {
    let text = read_to_string(path, manifest)?;
    let world = NavWorld::from_json_str(&text)
        .map_err(|e| CliError::Validation(anyhow!("world file {}: {e}", path.display())))?;
    Ok(Arc::new(world))
}

/// The explicit threshold if given, otherwise the world's success threshold.
pub fn resolve_dth(dth: Option<f64>, world: &NavWorld) -> CliResult<f64> {
    match dth {
        Some(v) if v.is_finite() && v > 0.0 => Ok(v),
        Some(v) => Err(CliError::Validation(anyhow!(
            "--dth must be a positive finite number, got {v}"
        ))),
        None => success_threshold(world).map_err(|e| {
            CliError::Validation(anyhow!("cannot derive a default threshold: {e}; pass --dth"))
        }),
    }
}

/// Writes via a sibling temp file plus rename, so readers never observe a
/// half-written output.
pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let write = std::fs::write(&tmp, text).and_then(|_| std::fs::rename(&tmp, path));
    write.map_err(|e| CliError::Validation(anyhow!("cannot write {}: {e}", path.display())))
}

/// Shortest decimal form that parses back to exactly `v`, matching how the
/// JSON reports serialise numbers. Keeps CSV and JSON output comparable.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        serde_json::to_string(&v).expect("finite floats serialise")
    } else {
        v.to_string()
    }
}

/// CSV field with RFC 4180 quoting where needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn parse_metric(name: &str) -> CliResult<MetricName> {
    name.parse::<MetricName>().map_err(|_| {
        let valid: Vec<&str> = MetricName::ALL.iter().map(|m| m.as_str()).collect();
        CliError::Validation(anyhow!(
            "unknown metric {name:?}; valid names: {}",
            valid.join(", ")
        ))
    })
}

/// Parses a comma-separated metric selection; empty means every metric.
pub fn parse_metrics(names: &[String]) -> CliResult<Vec<MetricName>> {
    if names.is_empty() {
        return Ok(MetricName::ALL.to_vec());
    }
    let mut out = Vec::new();
    for name in names {
        let metric = parse_metric(name)?;
        if !out.contains(&metric) {
            out.push(metric);
        }
    }
    Ok(out)
}
