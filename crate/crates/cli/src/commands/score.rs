use std::path::PathBuf;

use clap::{Args, ValueEnum};
use navmetrics::metrics::{self, parse_episodes_jsonl, MetricName, MetricReport};
use navmetrics::MetricConfig;
use serde_json::json;

use crate::common::{
    build_oracle, csv_field, fmt_f64, load_world, parse_metrics, read_to_string, resolve_dth,
    write_text, ModeArg,
};
use crate::errors::{bail_invalid, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct ScoreArgs {
    /// World file the episodes live in
    #[arg(long, value_name = "FILE")]
    world: PathBuf,
    /// Episodes in JSON lines form: {"reference": [...], "query": [...]}
    #[arg(long, value_name = "FILE")]
    episodes: PathBuf,
    /// Report destination
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Report format; defaults to json when --out ends in .json, csv otherwise
    #[arg(long, value_enum)]
    format: Option<ReportFormat>,
    /// Success threshold; defaults to the world's success threshold
    #[arg(long)]
    dth: Option<f64>,
    /// Distance mode behind every metric
    #[arg(long, value_enum, default_value_t = ModeArg::Geodesic)]
    mode: ModeArg,
    /// Lattice spacing for grid-approx mode
    #[arg(long, default_value_t = 0.5)]
    grid_spacing: f64,
    /// Comma-separated metric subset, e.g. ndtw,sdtw,spl (default: all)
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Json,
}

enum Row {
    Ok { report: MetricReport },
    Invalid { message: String },
}

impl Row {
    fn status(&self) -> String {
        match self {
            Row::Ok { .. } => "ok".to_string(),
            Row::Invalid { message } => format!("invalid: {message}"),
        }
    }

    fn flags(&self) -> Vec<&'static str> {
        match self {
            Row::Ok { report } if report.spl_start_at_goal => vec!["spl-start-at-goal"],
            _ => Vec::new(),
        }
    }
}

pub fn run(args: ScoreArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("score", serde_json::Value::Null);
    let world = load_world(&args.world, &mut manifest)?;
    let episodes_text = read_to_string(&args.episodes, &mut manifest)?;
    let episodes = match parse_episodes_jsonl(&episodes_text) {
        Ok(eps) => eps,
        Err(e) => bail_invalid!("episodes file {}: {e}", args.episodes.display()),
    };
    let selected = parse_metrics(&args.metrics)?;
    let d_th = resolve_dth(args.dth, &world)?;
    let format = args.format.unwrap_or_else(|| {
        match args.out.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    });

    let oracle = build_oracle(world, args.mode, args.grid_spacing, true)?;
    let cfg = MetricConfig::new(d_th)
        .map_err(|e| CliError::Internal(anyhow::anyhow!("resolved threshold rejected: {e}")))?;

    let rows: Vec<Row> = episodes
        .iter()
        .map(|ep| match metrics::full_report(ep, &oracle, &cfg) {
            Ok(report) => Row::Ok { report },
            Err(e) => Row::Invalid { message: e.to_string() },
        })
        .collect();
    let invalid = rows.iter().filter(|r| matches!(r, Row::Invalid { .. })).count();

    let text = match format {
        ReportFormat::Csv => render_csv(&rows, &selected),
        ReportFormat::Json => render_json(&rows, &selected, d_th, args.mode),
    };
    write_text(&args.out, &text)?;

    *manifest.config_mut() = json!({
        "world": args.world,
        "episodes": args.episodes,
        "out": args.out,
        "format": match format { ReportFormat::Csv => "csv", ReportFormat::Json => "json" },
        "dth": d_th,
        "mode": args.mode.as_str(),
        "grid_spacing": args.grid_spacing,
        "metrics": selected.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
    });
    manifest.write_beside(&args.out, false)?;

    println!(
        "scored {} episode(s), {} invalid -> {}",
        rows.len(),
        invalid,
        args.out.display()
    );
    Ok(())
}

fn columns(selected: &[MetricName]) -> (Vec<MetricName>, bool) {
    let with_cls_parts = selected.contains(&MetricName::Cls);
    (selected.to_vec(), with_cls_parts)
}

fn render_csv(rows: &[Row], selected: &[MetricName]) -> String {
    let (metrics, cls_parts) = columns(selected);
    let mut header: Vec<String> = vec!["episode".into(), "status".into()];
    header.extend(metrics.iter().map(|m| m.as_str().to_string()));
    if cls_parts {
        header.push("cls_coverage".into());
        header.push("cls_length_score".into());
    }
    header.push("flags".into());

    let mut out = header.join(",");
    out.push('\n');
    for (i, row) in rows.iter().enumerate() {
        let mut fields: Vec<String> = vec![i.to_string(), csv_field(&row.status())];
        match row {
            Row::Ok { report } => {
                fields.extend(metrics.iter().map(|&m| fmt_f64(report.get(m))));
                if cls_parts {
                    fields.push(fmt_f64(report.cls_coverage));
                    fields.push(fmt_f64(report.cls_length_score));
                }
            }
            Row::Invalid { .. } => {
                let blanks = metrics.len() + if cls_parts { 2 } else { 0 };
                fields.extend(std::iter::repeat_n(String::new(), blanks));
            }
        }
        fields.push(row.flags().join(";"));
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

fn render_json(rows: &[Row], selected: &[MetricName], d_th: f64, mode: ModeArg) -> String {
    let (metrics, cls_parts) = columns(selected);
    let episodes: Vec<serde_json::Value> = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let values = match row {
                Row::Ok { report } => {
                    let mut map = serde_json::Map::new();
                    for &m in &metrics {
                        map.insert(m.as_str().to_string(), json!(report.get(m)));
                    }
                    if cls_parts {
                        map.insert("cls_coverage".into(), json!(report.cls_coverage));
                        map.insert("cls_length_score".into(), json!(report.cls_length_score));
                    }
                    serde_json::Value::Object(map)
                }
                Row::Invalid { .. } => serde_json::Value::Null,
            };
            json!({
                "episode": i,
                "status": row.status(),
                "metrics": values,
                "flags": row.flags(),
            })
        })
        .collect();
    let report = json!({
        "d_th": d_th,
        "mode": mode.as_str(),
        "episodes": episodes,
    });
    let mut text = serde_json::to_string_pretty(&report).expect("report serialisation cannot fail");
    text.push('\n');
    text
}
