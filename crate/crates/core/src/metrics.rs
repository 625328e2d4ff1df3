//! The navigation metric family.
//!
//! Every metric scores an [`EpisodePair`], a reference path `R` and a query
//! path `Q` over the same world, under a caller-supplied [`DistanceOracle`]
//! and a [`MetricConfig`] holding the success threshold `d_th`. The goal of
//! an episode is the final reference node; the intended behaviour is to
//! reach it along `R`.
//!
//! The family splits into goal-oriented scores (navigation and oracle
//! navigation error, success rates, SPL), path-shape scores (average and
//! maximum deviation, edit distance on action sequences, coverage-weighted
//! length score) and the warping-based fidelity scores `nDTW` and `SDTW`
//! from [`crate::warp`]. [`full_report`] evaluates all of them at once;
//! [`score`] dispatches on a [`MetricName`] for callers configured by
//! strings.
//!
//! Queries are not required to traverse world edges: a query is any node
//! sequence, so trajectories recorded under different action spaces (or
//! deliberately corrupted ones) can be scored as-is.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{DistanceError, DistanceOracle, NodeId, Path};
use crate::warp::{self, WarpError};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("paths must be non-empty")]
    EmptyPath,
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("distance threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("unknown metric {0:?}")]
    UnknownMetric(String),
}

fn warp_to_metric(e: WarpError) -> MetricError {
    match e {
        WarpError::Distance(d) => MetricError::Distance(d),
        WarpError::EmptyPath => MetricError::EmptyPath,
        WarpError::InvalidThreshold(t) => MetricError::InvalidThreshold(t),
        WarpError::TooLargeToEnumerate { .. } => {
            unreachable!("metrics never enumerate warpings")
        }
    }
}

/// Success threshold shared by the thresholded metrics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricConfig {
    d_th: f64,
}

impl MetricConfig {
    pub fn new(d_th: f64) -> Result<Self, MetricError> {
        if !(d_th.is_finite() && d_th > 0.0) {
            return Err(MetricError::InvalidThreshold(d_th));
        }
        Ok(MetricConfig { d_th })
    }

    pub fn d_th(&self) -> f64 {
        self.d_th
    }
}

/// A reference path and a query trajectory to score against it.
///
/// Both must be non-empty; single-node paths are fine and describe an agent
/// that never moved.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodePair {
    reference: Path,
    query: Path,
}

impl EpisodePair {
    pub fn new(reference: Path, query: Path) -> Result<Self, MetricError> {
        if reference.is_empty() || query.is_empty() {
            return Err(MetricError::EmptyPath);
        }
        Ok(EpisodePair { reference, query })
    }

    pub fn reference(&self) -> &[NodeId] {
        &self.reference
    }

    pub fn query(&self) -> &[NodeId] {
        &self.query
    }

    /// The episode goal: the final reference node.
    pub fn goal(&self) -> NodeId {
        *self.reference.last().expect("validated non-empty")
    }

    /// Where the agent stopped: the final query node.
    pub fn stop(&self) -> NodeId {
        *self.query.last().expect("validated non-empty")
    }
}

/// Total length of a path: the sum of oracle distances over consecutive
/// nodes. A single-node path has length 0.
pub fn path_length(path: &[NodeId], oracle: &DistanceOracle) -> Result<f64, MetricError> {
    if path.is_empty() {
        return Err(MetricError::EmptyPath);
    }
    let mut total = 0.0;
    for pair in path.windows(2) {
        total += oracle.distance(pair[0], pair[1])?;
    }
    Ok(total)
}

/// Distance from the agent's stop position to the goal.
pub fn navigation_error(ep: &EpisodePair, oracle: &DistanceOracle) -> Result<f64, MetricError> {
    Ok(oracle.distance(ep.stop(), ep.goal())?)
}

/// Smallest distance to the goal reached anywhere along the query.
pub fn oracle_navigation_error(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
) -> Result<f64, MetricError> {
    Ok(oracle.point_to_path_distance(ep.goal(), ep.query())?)
}

/// Whether the agent stopped within `d_th` of the goal (inclusive).
pub fn is_success(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<bool, MetricError> {
    Ok(navigation_error(ep, oracle)? <= cfg.d_th)
}

/// Whether the agent ever came within `d_th` of the goal (inclusive).
pub fn is_oracle_success(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<bool, MetricError> {
    Ok(oracle_navigation_error(ep, oracle)? <= cfg.d_th)
}

/// Mean distance from query nodes to the reference path.
pub fn average_deviation(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
) -> Result<f64, MetricError> {
    let mut total = 0.0;
    for &q in ep.query() {
        total += oracle.point_to_path_distance(q, ep.reference())?;
    }
    Ok(total / ep.query().len() as f64)
}

/// Largest distance from any query node to the reference path.
pub fn max_deviation(ep: &EpisodePair, oracle: &DistanceOracle) -> Result<f64, MetricError> {
    let mut worst = 0.0f64;
    for &q in ep.query() {
        worst = worst.max(oracle.point_to_path_distance(q, ep.reference())?);
    }
    Ok(worst)
}

/// Success weighted by path length: success scaled by the ratio of the
/// shortest start-to-goal distance to the length actually walked.
///
/// When the query already starts at the goal the ratio is undefined; the
/// value degrades to plain success and [`full_report`] flags the episode.
pub fn spl(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    Ok(spl_detailed(ep, oracle, cfg)?.0)
}

fn spl_detailed(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<(f64, bool), MetricError> {
    let success = is_success(ep, oracle, cfg)?;
    let sr = if success { 1.0 } else { 0.0 };
    let ideal = oracle.distance(ep.query()[0], ep.goal())?;
    if ideal == 0.0 {
        return Ok((sr, true));
    }
    let walked = path_length(ep.query(), oracle)?;
    Ok((sr * ideal / ideal.max(walked), false))
}

/// Directed node pairs traversed by a path; empty for a single node.
pub fn action_sequence(path: &[NodeId]) -> Vec<(NodeId, NodeId)> {
    path.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Levenshtein distance under exact element equality.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Success weighted by edit distance between the action sequences of the
/// two paths. When both paths are single nodes there are no actions to
/// compare and the value degrades to plain success.
pub fn sed(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    let success = is_success(ep, oracle, cfg)?;
    let sr = if success { 1.0 } else { 0.0 };
    let ar = action_sequence(ep.reference());
    let aq = action_sequence(ep.query());
    let longest = ar.len().max(aq.len());
    if longest == 0 {
        return Ok(sr);
    }
    let ed = edit_distance(&ar, &aq);
    Ok(sr * (1.0 - ed as f64 / longest as f64))
}

/// Coverage and length-score factors behind [`cls`].
#[derive(Clone, Copy, Debug)]
pub struct ClsBreakdown {
    /// Mean exponential proximity of reference nodes to the query.
    pub coverage: f64,
    /// Agreement between expected and actual query length.
    pub length_score: f64,
    pub score: f64,
}

/// Coverage-weighted length score.
pub fn cls_breakdown(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<ClsBreakdown, MetricError> {
    let mut total = 0.0;
    for &r in ep.reference() {
        let d = oracle.point_to_path_distance(r, ep.query())?;
        total += (-d / cfg.d_th).exp();
    }
    let coverage = total / ep.reference().len() as f64;
    let expected = coverage * path_length(ep.reference(), oracle)?;
    let actual = path_length(ep.query(), oracle)?;
    let denom = expected + (expected - actual).abs();
    // Zero denominator means both paths are stationary; their lengths agree
    // perfectly.
    let length_score = if denom == 0.0 { 1.0 } else { expected / denom };
    Ok(ClsBreakdown { coverage, length_score, score: coverage * length_score })
}

pub fn cls(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    Ok(cls_breakdown(ep, oracle, cfg)?.score)
}

/// Normalised dynamic time warping score in `(0, 1]`.
pub fn ndtw(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    let cost = warp::dtw_cost(ep.reference(), ep.query(), oracle).map_err(warp_to_metric)?;
    Ok(warp::ndtw_from_cost(cost, ep.reference().len(), cfg.d_th))
}

/// Success-gated nDTW: the nDTW score when the episode succeeded, else 0.
pub fn sdtw(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    if is_success(ep, oracle, cfg)? {
        ndtw(ep, oracle, cfg)
    } else {
        Ok(0.0)
    }
}

/// Whether larger or smaller values of a metric are better.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Maximize,
    Minimize,
    /// Neither: the value describes the episode rather than ranking it.
    Informational,
}

/// Names for every metric in the family, for string-configured callers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MetricName {
    Pl,
    Ne,
    One,
    Sr,
    Osr,
    Ad,
    Md,
    Spl,
    Sed,
    Cls,
    Ndtw,
    Sdtw,
}

impl MetricName {
    pub const ALL: [MetricName; 12] = [
        MetricName::Pl,
        MetricName::Ne,
        MetricName::One,
        MetricName::Sr,
        MetricName::Osr,
        MetricName::Ad,
        MetricName::Md,
        MetricName::Spl,
        MetricName::Sed,
        MetricName::Cls,
        MetricName::Ndtw,
        MetricName::Sdtw,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MetricName::Pl => "pl",
            MetricName::Ne => "ne",
            MetricName::One => "one",
            MetricName::Sr => "sr",
            MetricName::Osr => "osr",
            MetricName::Ad => "ad",
            MetricName::Md => "md",
            MetricName::Spl => "spl",
            MetricName::Sed => "sed",
            MetricName::Cls => "cls",
            MetricName::Ndtw => "ndtw",
            MetricName::Sdtw => "sdtw",
        }
    }

    pub fn direction(&self) -> Direction {
        match self {
            MetricName::Pl => Direction::Informational,
            MetricName::Ne | MetricName::One | MetricName::Ad | MetricName::Md => {
                Direction::Minimize
            }
            _ => Direction::Maximize,
        }
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricName {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        MetricName::ALL
            .into_iter()
            .find(|m| m.as_str() == lower)
            .ok_or_else(|| MetricError::UnknownMetric(s.to_string()))
    }
}

/// One metric by name. Boolean metrics come back as 0 or 1.
pub fn score(
    name: MetricName,
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, MetricError> {
    let as_f = |b: bool| if b { 1.0 } else { 0.0 };
    match name {
        MetricName::Pl => path_length(ep.query(), oracle),
        MetricName::Ne => navigation_error(ep, oracle),
        MetricName::One => oracle_navigation_error(ep, oracle),
        MetricName::Sr => is_success(ep, oracle, cfg).map(as_f),
        MetricName::Osr => is_oracle_success(ep, oracle, cfg).map(as_f),
        MetricName::Ad => average_deviation(ep, oracle),
        MetricName::Md => max_deviation(ep, oracle),
        MetricName::Spl => spl(ep, oracle, cfg),
        MetricName::Sed => sed(ep, oracle, cfg),
        MetricName::Cls => cls(ep, oracle, cfg),
        MetricName::Ndtw => ndtw(ep, oracle, cfg),
        MetricName::Sdtw => sdtw(ep, oracle, cfg),
    }
}

/// Every metric for one episode, plus the CLS factors and degeneracy flags.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MetricReport {
    pub pl: f64,
    pub ne: f64,
    pub one: f64,
    pub sr: f64,
    pub osr: f64,
    pub ad: f64,
    pub md: f64,
    pub spl: f64,
    pub sed: f64,
    pub cls: f64,
    pub ndtw: f64,
    pub sdtw: f64,
    pub cls_coverage: f64,
    pub cls_length_score: f64,
    /// The query starts at the goal, so SPL degraded to plain success.
    pub spl_start_at_goal: bool,
}

impl MetricReport {
    pub fn get(&self, name: MetricName) -> f64 {
        match name {
            MetricName::Pl => self.pl,
            MetricName::Ne => self.ne,
            MetricName::One => self.one,
            MetricName::Sr => self.sr,
            MetricName::Osr => self.osr,
            MetricName::Ad => self.ad,
            MetricName::Md => self.md,
            MetricName::Spl => self.spl,
            MetricName::Sed => self.sed,
            MetricName::Cls => self.cls,
            MetricName::Ndtw => self.ndtw,
            MetricName::Sdtw => self.sdtw,
        }
    }
}

pub fn full_report(
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    let (spl_value, spl_start_at_goal) = spl_detailed(ep, oracle, cfg)?;
    let cls_parts = cls_breakdown(ep, oracle, cfg)?;
    Ok(MetricReport {
        pl: path_length(ep.query(), oracle)?,
        ne: navigation_error(ep, oracle)?,
        one: oracle_navigation_error(ep, oracle)?,
        sr: score(MetricName::Sr, ep, oracle, cfg)?,
        osr: score(MetricName::Osr, ep, oracle, cfg)?,
        ad: average_deviation(ep, oracle)?,
        md: max_deviation(ep, oracle)?,
        spl: spl_value,
        sed: sed(ep, oracle, cfg)?,
        cls: cls_parts.score,
        ndtw: ndtw(ep, oracle, cfg)?,
        sdtw: sdtw(ep, oracle, cfg)?,
        cls_coverage: cls_parts.coverage,
        cls_length_score: cls_parts.length_score,
        spl_start_at_goal,
    })
}

#[derive(Serialize, Deserialize)]
struct EpisodeRecord {
    reference: Vec<NodeId>,
    query: Vec<NodeId>,
}

#[derive(Debug, Error)]
#[error("line {line}: {message}")]
pub struct EpisodeParseError {
    pub line: usize,
    pub message: String,
}

/// Parses episodes from JSON lines, one object per line. Blank lines are
/// skipped; any malformed line fails the whole parse and the error names it.
pub fn parse_episodes_jsonl(text: &str) -> Result<Vec<EpisodePair>, EpisodeParseError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| EpisodeParseError { line: idx + 1, message };
        let record: EpisodeRecord =
            serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
        let pair = EpisodePair::new(record.reference, record.query)
            .map_err(|e| fail(e.to_string()))?;
        out.push(pair);
    }
    Ok(out)
}

pub fn episodes_to_jsonl(episodes: &[EpisodePair]) -> String {
    let mut out = String::new();
    for ep in episodes {
        let record = EpisodeRecord {
            reference: ep.reference().to_vec(),
            query: ep.query().to_vec(),
        };
        out.push_str(&serde_json::to_string(&record).expect("record serialisation cannot fail"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NavWorld;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn chain_oracle(n: usize) -> DistanceOracle {
        let world = NavWorld::new(
            (0..n).map(|i| (NodeId(i as i64), i as f64, 0.0)),
            (1..n).map(|i| (NodeId(i as i64 - 1), NodeId(i as i64))),
        )
        .unwrap();
        DistanceOracle::geodesic(Arc::new(world))
    }

    fn ids(xs: &[i64]) -> Path {
        xs.iter().copied().map(NodeId).collect()
    }

    fn ep(r: &[i64], q: &[i64]) -> EpisodePair {
        EpisodePair::new(ids(r), ids(q)).unwrap()
    }

    #[test]
    fn rejects_empty_paths() {
        assert!(matches!(
            EpisodePair::new(vec![], ids(&[0])),
            Err(MetricError::EmptyPath)
        ));
        assert!(matches!(
            EpisodePair::new(ids(&[0]), vec![]),
            Err(MetricError::EmptyPath)
        ));
        assert!(MetricConfig::new(0.0).is_err());
        assert!(MetricConfig::new(f64::INFINITY).is_err());
    }

    #[test]
    fn goal_metrics_on_a_chain() {
        let oracle = chain_oracle(4);
        let cfg = MetricConfig::new(1.0).unwrap();
        let e = ep(&[0, 1, 2, 3], &[0, 2]);

        assert_relative_eq!(path_length(e.query(), &oracle).unwrap(), 2.0);
        assert_relative_eq!(navigation_error(&e, &oracle).unwrap(), 1.0);
        assert_relative_eq!(oracle_navigation_error(&e, &oracle).unwrap(), 1.0);
        // Stopping exactly at the threshold still counts.
        assert!(is_success(&e, &oracle, &cfg).unwrap());
        assert!(is_oracle_success(&e, &oracle, &cfg).unwrap());
        assert_relative_eq!(average_deviation(&e, &oracle).unwrap(), 0.0);
        assert_relative_eq!(max_deviation(&e, &oracle).unwrap(), 0.0);

        let tight = MetricConfig::new(0.5).unwrap();
        assert!(!is_success(&e, &oracle, &tight).unwrap());
    }

    #[test]
    fn oracle_error_looks_at_the_whole_query() {
        let oracle = chain_oracle(6);
        // Walks past the goal (node 3) and keeps going.
        let e = ep(&[0, 1, 2, 3], &[0, 1, 2, 3, 4, 5]);
        assert_relative_eq!(navigation_error(&e, &oracle).unwrap(), 2.0);
        assert_relative_eq!(oracle_navigation_error(&e, &oracle).unwrap(), 0.0);
        let cfg = MetricConfig::new(1.0).unwrap();
        assert!(!is_success(&e, &oracle, &cfg).unwrap());
        assert!(is_oracle_success(&e, &oracle, &cfg).unwrap());
    }

    #[test]
    fn deviations_average_and_max() {
        let oracle = chain_oracle(6);
        let e = ep(&[0, 1], &[0, 3, 5]);
        // Distances to the reference: 0, 2, 4.
        assert_relative_eq!(average_deviation(&e, &oracle).unwrap(), 2.0);
        assert_relative_eq!(max_deviation(&e, &oracle).unwrap(), 4.0);
    }

    #[test]
    fn spl_penalises_detours() {
        let oracle = chain_oracle(6);
        let cfg = MetricConfig::new(1.0).unwrap();

        // Direct walk: full score.
        let direct = ep(&[0, 1, 2], &[0, 1, 2]);
        assert_relative_eq!(spl(&direct, &oracle, &cfg).unwrap(), 1.0);

        // Overshoot and come back: walked 4 for an ideal 2.
        let detour = ep(&[0, 1, 2], &[0, 1, 2, 3, 2]);
        assert_relative_eq!(spl(&detour, &oracle, &cfg).unwrap(), 0.5);

        // Failure zeroes the score no matter the length.
        let lost = ep(&[0, 1, 2, 3, 4], &[0]);
        assert_relative_eq!(spl(&lost, &oracle, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn spl_flags_start_at_goal() {
        let oracle = chain_oracle(4);
        let cfg = MetricConfig::new(1.0).unwrap();
        let e = ep(&[0, 1, 2], &[2, 3, 2]);
        let report = full_report(&e, &oracle, &cfg).unwrap();
        assert!(report.spl_start_at_goal);
        assert_relative_eq!(report.spl, 1.0);

        let normal = ep(&[0, 1, 2], &[0, 1, 2]);
        assert!(!full_report(&normal, &oracle, &cfg).unwrap().spl_start_at_goal);
    }

    #[test]
    fn edit_distance_reference_values() {
        let a: Vec<char> = "kitten".chars().collect();
        let b: Vec<char> = "sitting".chars().collect();
        assert_eq!(edit_distance(&a, &b), 3);
        assert_eq!(edit_distance(&a, &[]), 6);
        assert_eq!(edit_distance::<char>(&[], &[]), 0);
        assert_eq!(edit_distance(&a, &a), 0);
    }

    #[test]
    fn edit_distance_matches_naive_recursion() {
        fn naive(a: &[u8], b: &[u8]) -> usize {
            match (a.split_first(), b.split_first()) {
                (None, _) => b.len(),
                (_, None) => a.len(),
                (Some((x, ra)), Some((y, rb))) => {
                    let sub = naive(ra, rb) + usize::from(x != y);
                    sub.min(naive(ra, b) + 1).min(naive(a, rb) + 1)
                }
            }
        }
        let words: [&[u8]; 5] = [b"", b"ab", b"ba", b"abcd", b"cabd"];
        for a in words {
            for b in words {
                assert_eq!(edit_distance(a, b), naive(a, b), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn sed_compares_actions_not_nodes() {
        let oracle = chain_oracle(4);
        let cfg = MetricConfig::new(1.0).unwrap();

        // One inserted dwell action out of three.
        let dwell = ep(&[0, 1, 2], &[0, 1, 1, 2]);
        assert_relative_eq!(sed(&dwell, &oracle, &cfg).unwrap(), 2.0 / 3.0);

        // Same nodes, opposite direction: every action differs.
        let reversed = ep(&[0, 1], &[1, 0]);
        assert_relative_eq!(sed(&reversed, &oracle, &cfg).unwrap(), 0.0);

        // Single-node reference, moving query: one action against none.
        let moved = ep(&[1], &[1, 2]);
        assert_relative_eq!(sed(&moved, &oracle, &cfg).unwrap(), 0.0);

        // Two stationary paths have no actions at all.
        let still = ep(&[1], &[1]);
        assert_relative_eq!(sed(&still, &oracle, &cfg).unwrap(), 1.0);
        let still_far = ep(&[3], &[0]);
        assert_relative_eq!(sed(&still_far, &oracle, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn cls_worked_examples() {
        let oracle = chain_oracle(5);
        let cfg = MetricConfig::new(1.0).unwrap();

        // Query covers the first three of five reference nodes.
        let partial = ep(&[0, 1, 2, 3, 4], &[0, 1, 2]);
        let parts = cls_breakdown(&partial, &oracle, &cfg).unwrap();
        assert_relative_eq!(parts.coverage, 0.700642944881611, epsilon = 1e-12);
        assert_relative_eq!(parts.length_score, 0.777381464460381, epsilon = 1e-12);
        assert_relative_eq!(parts.score, 0.544666838555901, epsilon = 1e-12);

        // Sparser query against a shorter reference.
        let sparse = ep(&[0, 1, 2, 3], &[1, 3]);
        assert_relative_eq!(
            cls(&sparse, &oracle, &cfg).unwrap(),
            0.667092155765751,
            epsilon = 1e-12
        );

        // Perfect retrace.
        let perfect = ep(&[0, 1, 2], &[0, 1, 2]);
        assert_relative_eq!(cls(&perfect, &oracle, &cfg).unwrap(), 1.0);

        // Both stationary: coverage decides everything.
        let still = ep(&[2], &[2]);
        assert_relative_eq!(cls(&still, &oracle, &cfg).unwrap(), 1.0);
    }

    #[test]
    fn ndtw_and_sdtw() {
        let oracle = chain_oracle(3);
        let cfg = MetricConfig::new(0.5).unwrap();
        let e = ep(&[0, 1, 2], &[0, 2]);
        // Warping cost 1 normalised by 3 * 0.5.
        assert_relative_eq!(ndtw(&e, &oracle, &cfg).unwrap(), 0.513417119032592, epsilon = 1e-12);
        // Ends exactly at the goal, so the gate passes.
        assert_relative_eq!(
            sdtw(&e, &oracle, &cfg).unwrap(),
            ndtw(&e, &oracle, &cfg).unwrap()
        );

        // Stops one short: gate fails at d_th = 0.5.
        let short = ep(&[0, 1, 2], &[0, 1]);
        assert!(ndtw(&short, &oracle, &cfg).unwrap() > 0.0);
        assert_relative_eq!(sdtw(&short, &oracle, &cfg).unwrap(), 0.0);

        // At d_th = 1 the same stop is inside the gate.
        let loose = MetricConfig::new(1.0).unwrap();
        assert!(sdtw(&short, &oracle, &loose).unwrap() > 0.0);
    }

    #[test]
    fn identity_episode_scores_perfectly() {
        let oracle = chain_oracle(5);
        let cfg = MetricConfig::new(1.0).unwrap();
        let e = ep(&[0, 1, 2, 3, 4], &[0, 1, 2, 3, 4]);
        let r = full_report(&e, &oracle, &cfg).unwrap();
        for name in [
            MetricName::Sr,
            MetricName::Osr,
            MetricName::Spl,
            MetricName::Sed,
            MetricName::Cls,
            MetricName::Ndtw,
            MetricName::Sdtw,
        ] {
            assert_relative_eq!(r.get(name), 1.0);
        }
        assert_relative_eq!(r.ne, 0.0);
        assert_relative_eq!(r.ad, 0.0);
    }

    #[test]
    fn report_matches_individual_metrics() {
        let oracle = chain_oracle(6);
        let cfg = MetricConfig::new(1.2).unwrap();
        let e = ep(&[0, 1, 2, 3], &[0, 2, 2, 4]);
        let r = full_report(&e, &oracle, &cfg).unwrap();
        for name in MetricName::ALL {
            assert_eq!(r.get(name), score(name, &e, &oracle, &cfg).unwrap(), "{name}");
        }
    }

    #[test]
    fn metric_names_round_trip() {
        for name in MetricName::ALL {
            assert_eq!(name.as_str().parse::<MetricName>().unwrap(), name);
        }
        assert_eq!("NDTW".parse::<MetricName>().unwrap(), MetricName::Ndtw);
        assert!(matches!(
            "warpiness".parse::<MetricName>(),
            Err(MetricError::UnknownMetric(_))
        ));
        assert_eq!(MetricName::Pl.direction(), Direction::Informational);
        assert_eq!(MetricName::Ne.direction(), Direction::Minimize);
        assert_eq!(MetricName::Sdtw.direction(), Direction::Maximize);
    }

    #[test]
    fn jsonl_round_trip_and_diagnostics() {
        let episodes = vec![ep(&[0, 1, 2], &[0, 2]), ep(&[3], &[3])];
        let text = episodes_to_jsonl(&episodes);
        assert_eq!(parse_episodes_jsonl(&text).unwrap(), episodes);

        let with_blank = format!("\n{text}\n");
        assert_eq!(parse_episodes_jsonl(&with_blank).unwrap(), episodes);

        let bad = "{\"reference\": [0], \"query\": [0]}\n\nnot json\n";
        let err = parse_episodes_jsonl(bad).unwrap_err();
        assert_eq!(err.line, 3);

        let empty_query = "{\"reference\": [0], \"query\": []}";
        let err = parse_episodes_jsonl(empty_query).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.to_string().contains("non-empty"));
    }
}
