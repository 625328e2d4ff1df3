use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use navmetrics::metrics::{self, parse_episodes_jsonl};
use navmetrics::MetricConfig;
use serde_json::json;

use crate::common::{build_oracle, load_world, read_to_string, resolve_dth, write_text, ModeArg};
use crate::errors::{bail_invalid, CliError, CliResult};
use crate::manifest::RunManifest;
use crate::svg;

#[derive(Args)]
pub struct RenderArgs {
    /// World file the episodes live in
    #[arg(long, value_name = "FILE")]
    world: PathBuf,
    /// Episodes in JSON lines form
    #[arg(long, value_name = "FILE")]
    episodes: PathBuf,
    /// Directory for the SVG files and the index
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Success threshold; defaults to the world's success threshold
    #[arg(long)]
    dth: Option<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Geodesic)]
    mode: ModeArg,
    /// Lattice spacing for grid-approx mode
    #[arg(long, default_value_t = 0.5)]
    grid_spacing: f64,
}

struct Entry {
    episode: usize,
    svg: String,
    ndtw: f64,
}

pub fn run(args: RenderArgs) -> CliResult<()> {
    let mut manifest = RunManifest::new("render", serde_json::Value::Null);
    let world = load_world(&args.world, &mut manifest)?;
    let episodes_text = read_to_string(&args.episodes, &mut manifest)?;
    let episodes = match parse_episodes_jsonl(&episodes_text) {
        Ok(eps) => eps,
        Err(e) => bail_invalid!("episodes file {}: {e}", args.episodes.display()),
    };
    if episodes.is_empty() {
        bail_invalid!("episodes file {} holds no episodes", args.episodes.display());
    }
    let d_th = resolve_dth(args.dth, &world)?;
    let cfg = MetricConfig::new(d_th)
        .map_err(|e| CliError::Internal(anyhow::anyhow!("resolved threshold rejected: {e}")))?;
    let oracle = build_oracle(world.clone(), args.mode, args.grid_spacing, true)?;

    std::fs::create_dir_all(&args.out).map_err(|e| {
        CliError::Validation(anyhow::anyhow!("cannot create {}: {e}", args.out.display()))
    })?;

    let mut entries = Vec::with_capacity(episodes.len());
    for (i, ep) in episodes.iter().enumerate() {
        let ndtw = metrics::ndtw(ep, &oracle, &cfg)
            .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {i}: {e}")))?;
        let name = format!("episode_{i:04}.svg");
        write_text(&args.out.join(&name), &svg::episode_svg(&world, ep, ndtw))?;
        entries.push(Entry { episode: i, svg: name, ndtw });
    }
    entries.sort_by(|a, b| b.ndtw.total_cmp(&a.ndtw).then(a.episode.cmp(&b.episode)));

    let index: Vec<serde_json::Value> = entries
        .iter()
        .map(|e| json!({ "episode": e.episode, "svg": e.svg, "ndtw": e.ndtw }))
        .collect();
    let mut index_text =
        serde_json::to_string_pretty(&index).expect("index serialisation cannot fail");
    index_text.push('\n');
    write_text(&args.out.join("index.json"), &index_text)?;
    write_text(&args.out.join("index.html"), &index_html(&entries))?;

    *manifest.config_mut() = json!({
        "world": args.world,
        "episodes": args.episodes,
        "out": args.out,
        "dth": d_th,
        "mode": args.mode.as_str(),
        "grid_spacing": args.grid_spacing,
    });
    manifest.write_beside(&args.out, true)?;

    println!("rendered {} episode(s) -> {}", entries.len(), args.out.display());
    Ok(())
}

/// Gallery of every episode, best nDTW first.
fn index_html(entries: &[Entry]) -> String {
    let mut out = String::from(
        "<!doctype html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n\
         <title>episodes</title>\n\
         <style>body{font-family:sans-serif;margin:2em}figure{display:inline-block;margin:1em}\
         figcaption{text-align:center}</style>\n</head>\n<body>\n\
         <h1>Episodes by nDTW</h1>\n",
    );
    for e in entries {
        writeln!(
            out,
            "<figure><img src=\"{}\" width=\"300\" height=\"300\" alt=\"episode {}\">\
             <figcaption>episode {}: nDTW = {:.3}</figcaption></figure>",
            e.svg, e.episode, e.episode, e.ndtw
        )
        .unwrap();
    }
    out.push_str("</body>\n</html>\n");
    out
}
