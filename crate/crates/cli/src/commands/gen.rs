use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Subcommand};
use navmetrics::analysis::{ranking_sets_to_json, ranking_value, RankingSet};
use navmetrics::metrics::episodes_to_jsonl;
use navmetrics::simworld::{
    derive_seed, generate_path_with_rng, generate_world, success_threshold, WorldConfig,
};
use navmetrics::{DistanceOracle, EpisodePair, MetricConfig, NavWorld, Path};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::common::{load_world, parse_metric, resolve_dth, write_text};
use crate::errors::{bail_invalid, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Subcommand)]
pub enum GenCommand {
    /// Generate a jittered lattice world
    World(WorldArgs),
    /// Generate episodes or ranking sets on an existing world
    Paths(PathsArgs),
}

#[derive(Args)]
pub struct WorldArgs {
    #[arg(long)]
    seed: u64,
    /// World file to write
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Nodes per side of the lattice
    #[arg(long, default_value_t = 15)]
    grid_size: usize,
    /// Half-width of the positional jitter
    #[arg(long, default_value_t = 0.3)]
    zeta: f64,
    /// Maximum edge length
    #[arg(long, default_value_t = 1.4)]
    edge_threshold: f64,
}

#[derive(Args)]
pub struct PathsArgs {
    /// World file to walk on
    #[arg(long, value_name = "FILE")]
    world: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Number of episodes (or ranking sets) to generate
    #[arg(long)]
    count: usize,
    /// Destination: JSON lines of episodes, or a JSON array with --ranking-sets
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Waypoints per generated path
    #[arg(long, default_value_t = 4)]
    waypoints: usize,
    /// Queries per reference
    #[arg(long, default_value_t = 1)]
    queries: usize,
    /// Keep only queries that stop within the success threshold of the goal
    #[arg(long)]
    success_constrained: bool,
    /// Success threshold; defaults to the world's success threshold
    #[arg(long)]
    dth: Option<f64>,
    /// Emit ranking sets (reference, queries, gold order) instead of episodes
    #[arg(long)]
    ranking_sets: bool,
    /// Metric that defines the gold order of a ranking set
    #[arg(long, default_value = "ndtw")]
    gold_metric: String,
}

pub fn run(cmd: GenCommand) -> CliResult<()> {
    match cmd {
        GenCommand::World(args) => run_world(args),
        GenCommand::Paths(args) => run_paths(args),
    }
}

fn run_world(args: WorldArgs) -> CliResult<()> {
    let config = WorldConfig {
        grid_size: args.grid_size,
        zeta: args.zeta,
        edge_threshold: args.edge_threshold,
        seed: args.seed,
    };
    let world = generate_world(&config).map_err(|e| CliError::Validation(anyhow::anyhow!(e)))?;
    let mut text = world.to_json_string();
    text.push('\n');
    write_text(&args.out, &text)?;

    let manifest = RunManifest::new("gen world", json!({
        "seed": args.seed,
        "grid_size": args.grid_size,
        "zeta": args.zeta,
        "edge_threshold": args.edge_threshold,
        "out": args.out,
    }));
    manifest.write_beside(&args.out, false)?;

    match success_threshold(&world) {
        Ok(th) => println!(
            "world: {} nodes, {} edges, success threshold {:.3} -> {}",
            world.num_nodes(),
            world.num_edges(),
            th,
            args.out.display()
        ),
        Err(_) => println!(
            "world: {} nodes, no edges -> {}",
            world.num_nodes(),
            args.out.display()
        ),
    }
    Ok(())
}

/// Max attempts at drawing one success-constrained query before giving up.
const QUERY_ATTEMPTS: usize = 1000;

fn run_paths(args: PathsArgs) -> CliResult<()> {
    if args.count == 0 {
        bail_invalid!("--count must be at least 1");
    }
    if args.queries == 0 {
        bail_invalid!("--queries must be at least 1");
    }
    if args.ranking_sets && args.queries < 2 {
        bail_invalid!("--ranking-sets needs --queries of at least 2");
    }
    let gold_metric = parse_metric(&args.gold_metric)?;

    let mut manifest = RunManifest::new("gen paths", serde_json::Value::Null);
    let world = load_world(&args.world, &mut manifest)?;
    let d_th = resolve_dth(args.dth, &world)?;
    let cfg = MetricConfig::new(d_th)
        .map_err(|e| CliError::Internal(anyhow::anyhow!("resolved threshold rejected: {e}")))?;
    let oracle = DistanceOracle::all_pairs(world.clone());

    let mut episodes = Vec::new();
    let mut sets = Vec::new();
    for i in 0..args.count {
        // One derived seed per unit, so a prefix of the run is stable under
        // a larger --count.
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, i as u64));
        let reference = generate_path_with_rng(&world, &mut rng, args.waypoints, None)
            .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {i}: {e}")))?
            .path;
        let start = reference[0];
        let goal = *reference.last().expect("generated paths are non-empty");

        let mut queries: Vec<Path> = Vec::with_capacity(args.queries);
        for _ in 0..args.queries {
            queries.push(draw_query(
                &world, &oracle, &mut rng, &args, i, start, goal, d_th,
            )?);
        }

        if args.ranking_sets {
            sets.push(build_set(&reference, queries, gold_metric, &oracle, &cfg, i)?);
        } else {
            for query in queries {
                let ep = EpisodePair::new(reference.clone(), query)
                    .map_err(|e| CliError::Internal(anyhow::anyhow!("episode {i}: {e}")))?;
                episodes.push(ep);
            }
        }
    }

    let text = if args.ranking_sets {
        let mut t = ranking_sets_to_json(&sets);
        t.push('\n');
        t
    } else {
        episodes_to_jsonl(&episodes)
    };
    write_text(&args.out, &text)?;

    *manifest.config_mut() = json!({
        "world": args.world,
        "seed": args.seed,
        "count": args.count,
        "waypoints": args.waypoints,
        "queries": args.queries,
        "success_constrained": args.success_constrained,
        "dth": d_th,
        "ranking_sets": args.ranking_sets,
        "gold_metric": gold_metric.as_str(),
        "out": args.out,
    });
    manifest.write_beside(&args.out, false)?;

    if args.ranking_sets {
        println!(
            "generated {} ranking set(s) with {} queries each -> {}",
            sets.len(),
            args.queries,
            args.out.display()
        );
    } else {
        println!("generated {} episode(s) -> {}", episodes.len(), args.out.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn draw_query(
    world: &Arc<NavWorld>,
    oracle: &DistanceOracle,
    rng: &mut ChaCha8Rng,
    args: &PathsArgs,
    episode: usize,
    start: navmetrics::NodeId,
    goal: navmetrics::NodeId,
    d_th: f64,
) -> CliResult<Path> {
    for _ in 0..QUERY_ATTEMPTS {
        let query = generate_path_with_rng(world, rng, args.waypoints, Some(start))
            .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {episode}: {e}")))?
            .path;
        if !args.success_constrained {
            return Ok(query);
        }
        let stop = *query.last().expect("generated paths are non-empty");
        let d = oracle
            .distance(stop, goal)
            .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {episode}: {e}")))?;
        if d <= d_th {
            return Ok(query);
        }
    }
    bail_invalid!(
        "episode {episode}: no query stopped within {d_th} of the goal after {QUERY_ATTEMPTS} attempts; \
         raise --dth or drop --success-constrained"
    )
}

fn build_set(
    reference: &Path,
    queries: Vec<Path>,
    gold_metric: navmetrics::metrics::MetricName,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
    episode: usize,
) -> CliResult<RankingSet> {
    let mut values = Vec::with_capacity(queries.len());
    for query in &queries {
        let ep = EpisodePair::new(reference.clone(), query.clone())
            .map_err(|e| CliError::Internal(anyhow::anyhow!("set {episode}: {e}")))?;
        let v = ranking_value(gold_metric, &ep, oracle, cfg)
            .map_err(|e| CliError::Validation(anyhow::anyhow!("set {episode}: {e}")))?;
        values.push(v);
    }
    let mut gold: Vec<usize> = (0..queries.len()).collect();
    gold.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    RankingSet::new(reference.clone(), queries, gold)
        .map_err(|e| CliError::Internal(anyhow::anyhow!("set {episode}: {e}")))
}
