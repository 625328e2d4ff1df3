use std::path::PathBuf;

use clap::{Args, ValueEnum};
use navmetrics::analysis::{compare_metrics, parse_ranking_sets, sign_test_one_sided};
use navmetrics::metrics::MetricName;
use navmetrics::MetricConfig;
use serde::Deserialize;
use serde_json::json;

use crate::common::{
    build_oracle, csv_field, load_world, parse_metric, read_to_string, resolve_dth, write_text,
    ModeArg,
};
use crate::errors::{bail_invalid, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct StudyArgs {
    /// World file behind the ranking sets
    #[arg(long, value_name = "FILE", required_unless_present = "replay", conflicts_with = "replay")]
    world: Option<PathBuf>,
    /// Ranking sets to study
    #[arg(long, value_name = "FILE", required_unless_present = "replay", conflicts_with = "replay")]
    sets: Option<PathBuf>,
    /// Recompute p-values from recorded win/loss counts instead
    #[arg(long, value_name = "FILE")]
    replay: Option<PathBuf>,
    /// Metric defending the gold rankings
    #[arg(long, default_value = "ndtw")]
    champion: String,
    /// Comma-separated rivals (default: every other metric)
    #[arg(long, value_delimiter = ',')]
    rivals: Vec<String>,
    /// Result table destination
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Sidedness of the reported sign-test p-values
    #[arg(long, value_enum, default_value_t = Sided::One)]
    sided: Sided,
    /// Success threshold; defaults to the world's success threshold
    #[arg(long)]
    dth: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Geodesic)]
    mode: ModeArg,
    /// Lattice spacing for grid-approx mode
    #[arg(long, default_value_t = 0.5)]
    grid_spacing: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sided {
    One,
    Two,
}

impl Sided {
    fn as_str(self) -> &'static str {
        match self {
            Sided::One => "one",
            Sided::Two => "two",
        }
    }
}

#[derive(Deserialize)]
struct ReplayRow {
    rival: String,
    positives: usize,
    negatives: usize,
    #[serde(default)]
    ties: usize,
}

struct StudyRow {
    rival: MetricName,
    positives: usize,
    negatives: usize,
    ties: usize,
    p_value: f64,
}

pub fn run(args: StudyArgs) -> CliResult<()> {
    let champion = parse_metric(&args.champion)?;
    let rivals = resolve_rivals(&args.rivals, champion)?;
    let mut manifest = RunManifest::new("study", serde_json::Value::Null);

    let rows = match &args.replay {
        Some(path) => replay_rows(path, &args, &mut manifest)?,
        None => live_rows(&args, champion, &rivals, &mut manifest)?,
    };

    let text = if args.out.extension().and_then(|e| e.to_str()) == Some("json") {
        render_json(&rows)
    } else {
        render_csv(&rows)
    };
    write_text(&args.out, &text)?;

    *manifest.config_mut() = json!({
        "world": args.world,
        "sets": args.sets,
        "replay": args.replay,
        "champion": champion.as_str(),
        "rivals": rows.iter().map(|r| r.rival.as_str()).collect::<Vec<_>>(),
        "sided": args.sided.as_str(),
        "dth": args.dth,
        "mode": args.mode.as_str(),
        "grid_spacing": args.grid_spacing,
        "out": args.out,
    });
    manifest.write_beside(&args.out, false)?;

    println!(
        "champion {} vs {} rival(s), {}-sided sign test -> {}",
        champion.as_str(),
        rows.len(),
        args.sided.as_str(),
        args.out.display()
    );
    println!("{:<6} {:>9} {:>9} {:>5} {:>10}", "rival", "positives", "negatives", "ties", "p-value");
    for row in &rows {
        println!(
            "{:<6} {:>9} {:>9} {:>5} {:>10}",
            row.rival.as_str(),
            row.positives,
            row.negatives,
            row.ties,
            format_p(row.p_value)
        );
    }
    Ok(())
}

fn resolve_rivals(names: &[String], champion: MetricName) -> CliResult<Vec<MetricName>> {
    if names.is_empty() {
        return Ok(MetricName::ALL.iter().copied().filter(|&m| m != champion).collect());
    }
    let mut out = Vec::new();
    for name in names {
        let rival = parse_metric(name)?;
        if rival == champion {
            bail_invalid!("{} cannot rival itself", rival.as_str());
        }
        if !out.contains(&rival) {
            out.push(rival);
        }
    }
    Ok(out)
}

fn live_rows(
    args: &StudyArgs,
    champion: MetricName,
    rivals: &[MetricName],
    manifest: &mut RunManifest,
) -> CliResult<Vec<StudyRow>> {
    let world_path = args.world.as_ref().expect("clap enforces --world without --replay");
    let sets_path = args.sets.as_ref().expect("clap enforces --sets without --replay");
    let world = load_world(world_path, manifest)?;
    let sets_text = read_to_string(sets_path, manifest)?;
    let sets = parse_ranking_sets(&sets_text)
        .map_err(|e| CliError::Validation(anyhow::anyhow!("sets file {}: {e}", sets_path.display())))?;
    if sets.is_empty() {
        bail_invalid!("sets file {} holds no ranking sets", sets_path.display());
    }
    let d_th = resolve_dth(args.dth, &world)?;
    let cfg = MetricConfig::new(d_th)
        .map_err(|e| CliError::Internal(anyhow::anyhow!("resolved threshold rejected: {e}")))?;
    let oracle = build_oracle(world, args.mode, args.grid_spacing, true)?;

    let comparisons = compare_metrics(&sets, champion, rivals, &oracle, &cfg)
        .map_err(|e| CliError::Validation(anyhow::anyhow!(e)))?;
    Ok(comparisons
        .into_iter()
        .map(|c| StudyRow {
            rival: c.rival,
            positives: c.positives,
            negatives: c.negatives,
            ties: c.ties,
            p_value: match args.sided {
                Sided::One => c.p_one_sided,
                Sided::Two => c.p_two_sided(),
            },
        })
        .collect())
}

fn replay_rows(
    path: &std::path::Path,
    args: &StudyArgs,
    manifest: &mut RunManifest,
) -> CliResult<Vec<StudyRow>> {
    let text = read_to_string(path, manifest)?;
    let records: Vec<ReplayRow> = serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(anyhow::anyhow!("replay file {}: {e}", path.display())))?;
    if records.is_empty() {
        bail_invalid!("replay file {} holds no rows", path.display());
    }
    records
        .into_iter()
        .map(|r| {
            let rival = parse_metric(&r.rival)?;
            let p_one = sign_test_one_sided(r.positives, r.negatives).map_err(|e| {
                CliError::Validation(anyhow::anyhow!("rival {}: {e}", rival.as_str()))
            })?;
            Ok(StudyRow {
                rival,
                positives: r.positives,
                negatives: r.negatives,
                ties: r.ties,
                p_value: match args.sided {
                    Sided::One => p_one,
                    Sided::Two => (2.0 * p_one).min(1.0),
                },
            })
        })
        .collect()
}

/// Two significant digits in scientific notation, the usual way these
/// p-values are quoted.
fn format_p(p: f64) -> String {
    format!("{p:.1e}")
}

/// Transposed table: one column per rival, a `+/-` counts row and a
/// `sign test` p-value row.
fn render_csv(rows: &[StudyRow]) -> String {
    let mut header = String::new();
    let mut counts = String::from("+/-");
    let mut pvals = String::from("sign test");
    for row in rows {
        header.push(',');
        header.push_str(&csv_field(row.rival.as_str()));
        counts.push_str(&format!(",{}/{}", row.positives, row.negatives));
        pvals.push_str(&format!(",{}", format_p(row.p_value)));
    }
    format!("{header}\n{counts}\n{pvals}\n")
}

fn render_json(rows: &[StudyRow]) -> String {
    let body: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            json!({
                "rival": r.rival.as_str(),
                "positives": r.positives,
                "negatives": r.negatives,
                "ties": r.ties,
                "p_value": r.p_value,
            })
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&body).expect("row serialisation cannot fail");
    text.push('\n');
    text
}
