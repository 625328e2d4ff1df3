use std::path::PathBuf;

use clap::{Args, ValueEnum};
use navmetrics::metrics::{self, MetricName};
use navmetrics::simworld::{
    derive_seed, generate_loop_path_with_rng, generate_path_with_rng, greedy_policy_rollout,
    random_policy_rollout, EpisodeSpec, RewardKind, Rollout,
};
use navmetrics::{DistanceOracle, EpisodePair, MetricConfig, Path};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::common::{fmt_f64, load_world, resolve_dth, write_text};
use crate::errors::{bail_invalid, CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Args)]
pub struct PolicyArgs {
    /// World file to roll out in
    #[arg(long, value_name = "FILE")]
    world: PathBuf,
    /// Number of episodes
    #[arg(long)]
    episodes: usize,
    #[arg(long)]
    seed: u64,
    /// Which arm to run: greedy on goal reward, greedy on fidelity
    /// reward, or the random-walk baseline
    #[arg(long, value_enum)]
    reward: RewardArg,
    /// Summary JSON destination (stdout only when omitted)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Step budget for the greedy agents
    #[arg(long, default_value_t = 64)]
    horizon: usize,
    /// Waypoints per generated reference
    #[arg(long, default_value_t = 4)]
    waypoints: usize,
    /// Close every reference back to its start
    #[arg(long)]
    looped: bool,
    /// Success threshold; defaults to the world's success threshold
    #[arg(long)]
    dth: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RewardArg {
    /// Greedy agent on goal progress
    Goal,
    /// Greedy agent on prefix fidelity gain
    Fidelity,
    /// Uniform random walk; rewards reported under the goal scheme
    Random,
}

impl RewardArg {
    fn as_str(self) -> &'static str {
        match self {
            RewardArg::Goal => "goal",
            RewardArg::Fidelity => "fidelity",
            RewardArg::Random => "random",
        }
    }
}

/// Offset separating rollout seeds from reference seeds in the derived
/// stream, so the two never collide for realistic episode counts.
const ROLLOUT_SEED_OFFSET: u64 = 1 << 32;

pub fn run(args: PolicyArgs) -> CliResult<()> {
    if args.episodes == 0 {
        bail_invalid!("--episodes must be at least 1");
    }
    let mut manifest = RunManifest::new("policy", serde_json::Value::Null);
    let world = load_world(&args.world, &mut manifest)?;
    let d_th = resolve_dth(args.dth, &world)?;
    let cfg = MetricConfig::new(d_th)
        .map_err(|e| CliError::Internal(anyhow::anyhow!("resolved threshold rejected: {e}")))?;
    let oracle = DistanceOracle::all_pairs(world.clone());

    let mut references: Vec<Path> = Vec::with_capacity(args.episodes);
    for i in 0..args.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(args.seed, i as u64));
        let sample = if args.looped {
            generate_loop_path_with_rng(&world, &mut rng, args.waypoints, None)
        } else {
            generate_path_with_rng(&world, &mut rng, args.waypoints, None)
        };
        references.push(
            sample
                .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {i}: {e}")))?
                .path,
        );
    }
    // Random walks draw their move count from the reference step counts, so
    // all three agents face the same length distribution.
    let step_counts: Vec<usize> = references.iter().map(|r| r.len() - 1).collect();

    let mut mean = MeanAccumulator::default();
    for (i, reference) in references.iter().enumerate() {
        let spec = EpisodeSpec::new(reference.clone(), d_th)
            .map_err(|e| CliError::Internal(anyhow::anyhow!("episode {i}: {e}")))?;
        let rollout = roll(&args, &oracle, &spec, &step_counts, i)
            .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {i}: {e}")))?;
        let ep = EpisodePair::new(reference.clone(), rollout.trajectory.clone())
            .map_err(|e| CliError::Internal(anyhow::anyhow!("episode {i}: {e}")))?;
        let report = metrics::full_report(&ep, &oracle, &cfg)
            .map_err(|e| CliError::Validation(anyhow::anyhow!("episode {i}: {e}")))?;
        mean.add(&report, rollout.total_reward());
    }
    let summary = mean.finish();

    println!("reward {} over {} episode(s), d_th {:.3}:", args.reward.as_str(), args.episodes, d_th);
    for &m in MetricName::ALL.iter() {
        let v = summary.metric(m);
        if is_normalised(m) {
            println!("  {:<4} {:>6.1}%", m.as_str(), v * 100.0);
        } else {
            println!("  {:<4} {:>8.3}", m.as_str(), v);
        }
    }
    println!("  mean total reward {}", fmt_f64(summary.total_reward));

    *manifest.config_mut() = json!({
        "world": args.world,
        "episodes": args.episodes,
        "seed": args.seed,
        "reward": args.reward.as_str(),
        "horizon": args.horizon,
        "waypoints": args.waypoints,
        "looped": args.looped,
        "dth": d_th,
        "out": args.out,
    });
    if let Some(out) = &args.out {
        let mut metrics_map = serde_json::Map::new();
        for &m in MetricName::ALL.iter() {
            metrics_map.insert(m.as_str().to_string(), json!(summary.metric(m)));
        }
        let body = json!({
            "reward": args.reward.as_str(),
            "episodes": args.episodes,
            "seed": args.seed,
            "horizon": args.horizon,
            "waypoints": args.waypoints,
            "looped": args.looped,
            "d_th": d_th,
            "mean_metrics": metrics_map,
            "mean_total_reward": summary.total_reward,
        });
        let mut text = serde_json::to_string_pretty(&body).expect("summary serialisation cannot fail");
        text.push('\n');
        write_text(out, &text)?;
        manifest.write_beside(out, false)?;
        println!("summary -> {}", out.display());
    }
    Ok(())
}

fn roll(
    args: &PolicyArgs,
    oracle: &DistanceOracle,
    spec: &EpisodeSpec,
    step_counts: &[usize],
    index: usize,
) -> Result<Rollout, navmetrics::simworld::SimError> {
    match args.reward {
        RewardArg::Goal => greedy_policy_rollout(oracle, spec, RewardKind::Goal, args.horizon),
        RewardArg::Fidelity => {
            greedy_policy_rollout(oracle, spec, RewardKind::Fidelity, args.horizon)
        }
        RewardArg::Random => random_policy_rollout(
            oracle,
            spec,
            step_counts,
            RewardKind::Goal,
            derive_seed(args.seed, ROLLOUT_SEED_OFFSET + index as u64),
        ),
    }
}

fn is_normalised(m: MetricName) -> bool {
    matches!(
        m,
        MetricName::Sr
            | MetricName::Osr
            | MetricName::Spl
            | MetricName::Sed
            | MetricName::Cls
            | MetricName::Ndtw
            | MetricName::Sdtw
    )
}

#[derive(Default)]
struct MeanAccumulator {
    sums: [f64; 12],
    total_reward: f64,
    count: usize,
}

struct MeanSummary {
    means: [f64; 12],
    total_reward: f64,
}

impl MeanAccumulator {
    fn add(&mut self, report: &metrics::MetricReport, total_reward: f64) {
        for (slot, &m) in self.sums.iter_mut().zip(MetricName::ALL.iter()) {
            *slot += report.get(m);
        }
        self.total_reward += total_reward;
        self.count += 1;
    }

    fn finish(self) -> MeanSummary {
        let n = self.count.max(1) as f64;
        let mut means = self.sums;
        for slot in &mut means {
            *slot /= n;
        }
        MeanSummary { means, total_reward: self.total_reward / n }
    }
}

impl MeanSummary {
    fn metric(&self, m: MetricName) -> f64 {
        let pos = MetricName::ALL.iter().position(|&x| x == m).expect("every metric is listed");
        self.means[pos]
    }
}
