//! Synthetic worlds, reference paths and policy rollouts.
//!
//! Worlds are jittered square lattices: node `(i, j)` of a `g x g` grid sits
//! at `(i, j)` plus independent uniform noise of half-width `zeta` per axis,
//! and any two nodes at most `edge_threshold` apart are joined. With
//! `zeta = 0` this degenerates to the exact lattice, which at the default
//! threshold of 1.4 is 4-connected. Reference paths are random waypoint
//! walks: from the current node, sample a waypoint uniformly among nodes 2
//! or 3 hops away and connect to it by a shortest path, repeating for a
//! fixed number of waypoints.
//!
//! The rest of the module turns a reference path into a reinforcement-style
//! episode: an [`EpisodeSpec`] fixes the goal (the final reference node) and
//! success threshold, reward functions score single moves under either a
//! goal-distance or a path-fidelity shaping, and two toy policies (greedy
//! one-step maximisation and a uniform random walk) produce trajectories
//! for comparing those shapings.
//!
//! Everything here is deterministic given its seed. World generation draws
//! node jitter row-major (`i` outer, `j` inner, `x` before `y`) from a
//! ChaCha8 stream and derives nothing else from the generator, so a config
//! pins the world byte for byte. [`derive_seed`] gives independent
//! per-episode seeds from one master seed.

use std::fmt;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{DistanceError, DistanceOracle, NavWorld, NodeId, Path, WorldError};
use crate::warp::{PrefixScorer, WarpError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("grid size must be at least 2, got {0}")]
    BadGridSize(usize),
    #[error("jitter half-width must be finite and non-negative, got {0}")]
    BadJitter(f64),
    #[error("edge threshold must be positive and finite, got {0}")]
    BadEdgeThreshold(f64),
    #[error("world has no edges")]
    NoEdges,
    #[error("no nodes 2 or 3 hops away from {0}")]
    NoWaypointCandidates(NodeId),
    #[error("cannot roll out from {0}: it has no neighbours")]
    DeadEnd(NodeId),
    #[error("the step-count distribution is empty")]
    EmptyLengthDistribution,
    #[error("reference path is empty")]
    EmptyReference,
    #[error("success threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Warp(#[from] WarpError),
}

/// Parameters of the jittered-lattice world generator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WorldConfig {
    pub grid_size: usize,
    /// Half-width of the uniform positional jitter per axis.
    pub zeta: f64,
    /// Nodes at most this far apart (inclusive) are joined by an edge.
    pub edge_threshold: f64,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig { grid_size: 15, zeta: 0.3, edge_threshold: 1.4, seed: 0 }
    }
}

impl WorldConfig {
    fn validate(&self) -> Result<(), SimError> {
        if self.grid_size < 2 {
            return Err(SimError::BadGridSize(self.grid_size));
        }
        if !(self.zeta.is_finite() && self.zeta >= 0.0) {
            return Err(SimError::BadJitter(self.zeta));
        }
        if !(self.edge_threshold.is_finite() && self.edge_threshold > 0.0) {
            return Err(SimError::BadEdgeThreshold(self.edge_threshold));
        }
        Ok(())
    }
}

/// Generates the jittered lattice described by `config`.
///
/// Node `(i, j)` gets id `i * grid_size + j`. Jitter is drawn as
/// `coord + zeta * (2u - 1)` with `u` uniform in `[0, 1)`, so `zeta = 0`
/// yields the exact lattice from any seed.
pub fn generate_world(config: &WorldConfig) -> Result<NavWorld, SimError> {
    config.validate()?;
    let g = config.grid_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut nodes = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let id = NodeId((i * g + j) as i64);
            let x = i as f64 + config.zeta * (2.0 * rng.random::<f64>() - 1.0);
            let y = j as f64 + config.zeta * (2.0 * rng.random::<f64>() - 1.0);
            nodes.push((id, x, y));
        }
    }
    let mut edges = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let (dx, dy) = (nodes[a].1 - nodes[b].1, nodes[a].2 - nodes[b].2);
            if dx.hypot(dy) <= config.edge_threshold {
                edges.push((nodes[a].0, nodes[b].0));
            }
        }
    }
    Ok(NavWorld::new(nodes, edges)?)
}

/// Success threshold tuned to the world scale: 1.33 times the mean edge
/// length. Errors on edgeless worlds.
pub fn success_threshold(world: &NavWorld) -> Result<f64, SimError> {
    if world.num_edges() == 0 {
        return Err(SimError::NoEdges);
    }
    let mut total = 0.0;
    for &(a, b) in world.edges() {
        let (pa, pb) = (world.coord(a)?, world.coord(b)?);
        total += (pa.0 - pb.0).hypot(pa.1 - pb.1);
    }
    Ok(1.33 * total / world.num_edges() as f64)
}

/// A generated reference path plus the waypoints it was built through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSample {
    pub path: Path,
    pub waypoints: Vec<NodeId>,
}

/// Random waypoint walk from a fresh seed; see
/// [`generate_path_with_rng`].
pub fn generate_path(
    world: &NavWorld,
    seed: u64,
    num_waypoints: usize,
) -> Result<Path, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(generate_path_with_rng(world, &mut rng, num_waypoints, None)?.path)
}

/// Random waypoint walk: starting from `start` (or a uniformly drawn node),
/// repeatedly samples a waypoint uniformly among the nodes exactly 2 or 3
/// hops away and appends the shortest path to it.
///
/// The result visits `num_waypoints` waypoints; consecutive path nodes are
/// always joined by a world edge. Worlds too small to offer a node 2 hops
/// from some anchor produce [`SimError::NoWaypointCandidates`].
pub fn generate_path_with_rng(
    world: &NavWorld,
    rng: &mut impl Rng,
    num_waypoints: usize,
    start: Option<NodeId>,
) -> Result<PathSample, SimError> {
    let start = match start {
        Some(id) => {
            world.coord(id)?;
            id
        }
        None => world.node_ids()[rng.random_range(0..world.num_nodes())],
    };
    let mut path = vec![start];
    let mut waypoints = Vec::with_capacity(num_waypoints);
    for _ in 0..num_waypoints {
        let anchor = *path.last().expect("path starts non-empty");
        let candidates: Vec<NodeId> = world
            .hop_distances(anchor)?
            .into_iter()
            .filter(|&(_, h)| h == 2 || h == 3)
            .map(|(id, _)| id)
            .collect();
        if candidates.is_empty() {
            return Err(SimError::NoWaypointCandidates(anchor));
        }
        let wp = candidates[rng.random_range(0..candidates.len())];
        let segment = world.shortest_path(anchor, wp)?;
        path.extend_from_slice(&segment[1..]);
        waypoints.push(wp);
    }
    Ok(PathSample { path, waypoints })
}

/// Like [`generate_path_with_rng`], then walks back to the start by a
/// shortest path, so the goal coincides with the first node.
pub fn generate_loop_path_with_rng(
    world: &NavWorld,
    rng: &mut impl Rng,
    num_waypoints: usize,
    start: Option<NodeId>,
) -> Result<PathSample, SimError> {
    let mut sample = generate_path_with_rng(world, rng, num_waypoints, start)?;
    let last = *sample.path.last().expect("path starts non-empty");
    let home = sample.path[0];
    if last != home {
        let segment = world.shortest_path(last, home)?;
        sample.path.extend_from_slice(&segment[1..]);
    }
    Ok(sample)
}

/// A navigation episode for a policy: the reference to follow, the goal it
/// ends at and the success threshold.
#[derive(Clone, Debug)]
pub struct EpisodeSpec {
    reference: Path,
    goal: NodeId,
    d_th: f64,
}

impl EpisodeSpec {
    pub fn new(reference: Path, d_th: f64) -> Result<Self, SimError> {
        let goal = *reference.last().ok_or(SimError::EmptyReference)?;
        if !(d_th.is_finite() && d_th > 0.0) {
            return Err(SimError::BadThreshold(d_th));
        }
        Ok(EpisodeSpec { reference, goal, d_th })
    }

    pub fn reference(&self) -> &[NodeId] {
        &self.reference
    }

    pub fn start(&self) -> NodeId {
        self.reference[0]
    }

    pub fn goal(&self) -> NodeId {
        self.goal
    }

    pub fn d_th(&self) -> f64 {
        self.d_th
    }

    /// A prefix scorer against this episode's reference.
    pub fn scorer(&self, oracle: &DistanceOracle) -> Result<PrefixScorer, SimError> {
        Ok(PrefixScorer::new(self.reference.clone(), oracle.clone(), self.d_th)?)
    }
}

/// Which shaping the step and terminal rewards use.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RewardKind {
    /// Progress towards the goal, blind to the reference shape.
    Goal,
    /// Gain in prefix fidelity against the reference.
    Fidelity,
}

impl fmt::Display for RewardKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RewardKind::Goal => "goal",
            RewardKind::Fidelity => "fidelity",
        })
    }
}

/// Goal-distance reduction achieved by moving `from -> to`.
pub fn goal_reward_step(
    spec: &EpisodeSpec,
    oracle: &DistanceOracle,
    from: NodeId,
    to: NodeId,
) -> Result<f64, SimError> {
    Ok(oracle.distance(from, spec.goal)? - oracle.distance(to, spec.goal)?)
}

/// Terminal goal reward: +1 within the success threshold, -1 outside.
pub fn goal_reward_terminal(
    spec: &EpisodeSpec,
    oracle: &DistanceOracle,
    stop: NodeId,
) -> Result<f64, SimError> {
    let d = oracle.distance(stop, spec.goal)?;
    Ok(if d <= spec.d_th { 1.0 } else { -1.0 })
}

/// Fidelity gain from consuming `to`: the change in the prefix score. The
/// scorer must already have consumed the trajectory so far.
pub fn fidelity_reward_step(scorer: &mut PrefixScorer, to: NodeId) -> Result<f64, SimError> {
    let before = scorer.score();
    Ok(scorer.step(to)? - before)
}

/// Terminal fidelity reward: residual goal proximity on success, 0 on
/// failure.
pub fn fidelity_reward_terminal(
    spec: &EpisodeSpec,
    oracle: &DistanceOracle,
    stop: NodeId,
) -> Result<f64, SimError> {
    let d = oracle.distance(stop, spec.goal)?;
    Ok(if d <= spec.d_th { 1.0 - d / spec.d_th } else { 0.0 })
}

/// One policy run: where the agent went and what it earned.
#[derive(Clone, Debug)]
pub struct Rollout {
    pub trajectory: Path,
    /// Reward of each move, aligned with `trajectory.windows(2)`.
    pub step_rewards: Vec<f64>,
    pub terminal_reward: f64,
    pub policy: String,
}

impl Rollout {
    pub fn total_reward(&self) -> f64 {
        self.step_rewards.iter().sum::<f64>() + self.terminal_reward
    }
}

/// Uniform random walk from the reference start.
///
/// The number of moves is drawn uniformly from `step_counts` (typically the
/// empirical reference step counts, so the walk length distribution matches
/// the references); each move then picks a neighbour uniformly. Rewards are
/// scored under `kind` exactly as for any other agent.
pub fn random_policy_rollout(
    oracle: &DistanceOracle,
    spec: &EpisodeSpec,
    step_counts: &[usize],
    kind: RewardKind,
    seed: u64,
) -> Result<Rollout, SimError> {
    if step_counts.is_empty() {
        return Err(SimError::EmptyLengthDistribution);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = step_counts[rng.random_range(0..step_counts.len())];
    let world = oracle.world().clone();

    let mut scorer = spec.scorer(oracle)?;
    let mut trajectory = vec![spec.start()];
    scorer.step(spec.start())?;
    let mut step_rewards = Vec::with_capacity(steps);
    for _ in 0..steps {
        let cur = *trajectory.last().expect("trajectory starts non-empty");
        let neighbours = world.neighbors(cur)?;
        if neighbours.is_empty() {
            return Err(SimError::DeadEnd(cur));
        }
        let next = neighbours[rng.random_range(0..neighbours.len())];
        let reward = match kind {
            RewardKind::Goal => goal_reward_step(spec, oracle, cur, next)?,
            RewardKind::Fidelity => fidelity_reward_step(&mut scorer, next)?,
        };
        trajectory.push(next);
        step_rewards.push(reward);
    }
    let stop = *trajectory.last().expect("trajectory starts non-empty");
    let terminal_reward = match kind {
        RewardKind::Goal => goal_reward_terminal(spec, oracle, stop)?,
        RewardKind::Fidelity => fidelity_reward_terminal(spec, oracle, stop)?,
    };
    Ok(Rollout { trajectory, step_rewards, terminal_reward, policy: "random".to_string() })
}

/// Greedy one-step maximiser: from the current node, evaluates the step
/// reward of every neighbour and moves to the best one, stopping as soon as
/// no move is strictly positive (staying put earns 0, so a non-positive
/// best means stopping is optimal) or the horizon is reached. Ties go to
/// the smallest node id; the policy has no randomness.
pub fn greedy_policy_rollout(
    oracle: &DistanceOracle,
    spec: &EpisodeSpec,
    kind: RewardKind,
    horizon: usize,
) -> Result<Rollout, SimError> {
    let world = oracle.world().clone();
    let mut scorer = spec.scorer(oracle)?;
    let mut trajectory = vec![spec.start()];
    scorer.step(spec.start())?;
    let mut step_rewards = Vec::new();

    while trajectory.len() - 1 < horizon {
        let cur = *trajectory.last().expect("trajectory starts non-empty");
        let mut best: Option<(NodeId, f64)> = None;
        for n in world.neighbors(cur)? {
            let reward = match kind {
                RewardKind::Goal => goal_reward_step(spec, oracle, cur, n)?,
                RewardKind::Fidelity => scorer.peek(n)? - scorer.score(),
            };
            if best.is_none_or(|(_, r)| reward > r) {
                best = Some((n, reward));
            }
        }
        match best {
            Some((n, reward)) if reward > 0.0 => {
                trajectory.push(n);
                step_rewards.push(reward);
                if kind == RewardKind::Fidelity {
                    scorer.step(n)?;
                }
            }
            _ => break,
        }
    }

    let stop = *trajectory.last().expect("trajectory starts non-empty");
    let terminal_reward = match kind {
        RewardKind::Goal => goal_reward_terminal(spec, oracle, stop)?,
        RewardKind::Fidelity => fidelity_reward_terminal(spec, oracle, stop)?,
    };
    Ok(Rollout {
        trajectory,
        step_rewards,
        terminal_reward,
        policy: format!("greedy-{kind}"),
    })
}

/// The `index`-th output of a SplitMix64 stream seeded with `master`:
/// independent, reproducible per-episode seeds from one master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let gamma = 0x9E37_79B9_7F4A_7C15u64;
    let mut z = master.wrapping_add(gamma.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
