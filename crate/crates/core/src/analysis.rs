//! Ranking candidate trajectories and comparing metrics statistically.
//!
//! The experimental question: which metric, used to rank several candidate
//! trajectories against one reference, agrees best with a known gold
//! ranking? A [`RankingSet`] holds one reference, its candidate queries and
//! the gold order. For every set each metric induces a ranking; Spearman
//! correlation against the gold measures agreement; and across many sets a
//! paired sign test says whether a champion metric beats a rival more often
//! than chance. The sign test is computed exactly in log space, so the
//! minuscule p-values that hundreds of sets produce survive rather than
//! flushing to zero.

use thiserror::Error;

use crate::geometry::{DistanceOracle, NodeId, Path};
use crate::metrics::{
    self, Direction, EpisodePair, MetricConfig, MetricError, MetricName,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("need inputs of equal length, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 observations, got {0}")]
    TooFew(usize),
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("correlation is undefined for constant input")]
    ConstantInput,
    #[error("sign test needs at least one informative pair")]
    NoInformativePairs,
    #[error("a ranking set needs at least 2 queries, got {0}")]
    TooFewQueries(usize),
    #[error("gold ranking has {gold} entries for {queries} queries")]
    GoldSizeMismatch { queries: usize, gold: usize },
    #[error("gold ranking is not a permutation of the query indices")]
    GoldNotPermutation,
    #[error("ranking set {index}: {message}")]
    InvalidSet { index: usize, message: String },
    #[error("invalid ranking-set JSON: {0}")]
    Json(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Ranks with ties averaged: the smallest value gets rank 1, equal values
/// share the mean of the ranks they occupy.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let shared = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = shared;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
///
/// Errors rather than guesses when the correlation is undefined: mismatched
/// or too-short inputs, non-finite values, or an input whose values are all
/// equal.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() {
        return Err(AnalysisError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(AnalysisError::TooFew(xs.len()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(AnalysisError::NonFiniteInput);
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in rx.iter().zip(&ry) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(AnalysisError::ConstantInput);
    }
    Ok(cov / (vx.sqrt() * vy.sqrt()))
}

/// Exact one-sided sign test: the probability of at least `positives`
/// successes in `positives + negatives` fair coin flips.
///
/// Computed in log space from cumulative log-factorials, so results stay
/// meaningful far below the smallest subnormal ratio a naive product would
/// survive (hundreds of observations put p-values near 1e-60).
pub fn sign_test_one_sided(positives: usize, negatives: usize) -> Result<f64, AnalysisError> {
    let n = positives + negatives;
    if n == 0 {
        return Err(AnalysisError::NoInformativePairs);
    }
    // ln_fact[i] = ln(i!)
    let mut ln_fact = vec![0.0f64; n + 1];
    for i in 1..=n {
        ln_fact[i] = ln_fact[i - 1] + (i as f64).ln();
    }
    let ln_choose = |k: usize| ln_fact[n] - ln_fact[k] - ln_fact[n - k];
    let terms: Vec<f64> = (positives..=n).map(ln_choose).collect();
    let peak = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = peak + terms.iter().map(|t| (t - peak).exp()).sum::<f64>().ln();
    let ln_p = lse - n as f64 * 2f64.ln();
    Ok(ln_p.exp().min(1.0))
}

/// Two-sided companion of [`sign_test_one_sided`]: doubled and capped at 1.
pub fn sign_test_two_sided(positives: usize, negatives: usize) -> Result<f64, AnalysisError> {
    Ok((2.0 * sign_test_one_sided(positives, negatives)?).min(1.0))
}

/// One reference, its candidate queries, and the gold ranking of those
/// queries (best first, as indices into `queries`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RankingSetRecord", into = "RankingSetRecord")]
pub struct RankingSet {
    reference: Path,
    queries: Vec<Path>,
    gold: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RankingSetRecord {
    reference: Vec<NodeId>,
    queries: Vec<Vec<NodeId>>,
    gold: Vec<usize>,
}

impl TryFrom<RankingSetRecord> for RankingSet {
    type Error = AnalysisError;

    fn try_from(r: RankingSetRecord) -> Result<Self, Self::Error> {
        RankingSet::new(r.reference, r.queries, r.gold)
    }
}

impl From<RankingSet> for RankingSetRecord {
    fn from(s: RankingSet) -> Self {
        RankingSetRecord { reference: s.reference, queries: s.queries, gold: s.gold }
    }
}

impl RankingSet {
    pub fn new(
        reference: Path,
        queries: Vec<Path>,
        gold: Vec<usize>,
    ) -> Result<Self, AnalysisError> {
        if queries.len() < 2 {
            return Err(AnalysisError::TooFewQueries(queries.len()));
        }
        if gold.len() != queries.len() {
            return Err(AnalysisError::GoldSizeMismatch {
                queries: queries.len(),
                gold: gold.len(),
            });
        }
        let mut seen = vec![false; queries.len()];
        for &g in &gold {
            if g >= queries.len() || seen[g] {
                return Err(AnalysisError::GoldNotPermutation);
            }
            seen[g] = true;
        }
        if reference.is_empty() || queries.iter().any(|q| q.is_empty()) {
            return Err(AnalysisError::Metric(MetricError::EmptyPath));
        }
        Ok(RankingSet { reference, queries, gold })
    }

    pub fn reference(&self) -> &[NodeId] {
        &self.reference
    }

    pub fn queries(&self) -> &[Path] {
        &self.queries
    }

    /// Gold ordering, best first.
    pub fn gold(&self) -> &[usize] {
        &self.gold
    }

    /// Gold rank per query: `gold_ranks()[q]` is 1 for the best query.
    pub fn gold_ranks(&self) -> Vec<f64> {
        let mut ranks = vec![0.0; self.gold.len()];
        for (pos, &q) in self.gold.iter().enumerate() {
            ranks[q] = pos as f64 + 1.0;
        }
        ranks
    }
}

/// Parses a JSON array of ranking sets, validating each one.
pub fn parse_ranking_sets(text: &str) -> Result<Vec<RankingSet>, AnalysisError> {
    let records: Vec<RankingSetRecord> =
        serde_json::from_str(text).map_err(|e| AnalysisError::Json(e.to_string()))?;
    records
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            RankingSet::try_from(r)
                .map_err(|e| AnalysisError::InvalidSet { index, message: e.to_string() })
        })
        .collect()
}

pub fn ranking_sets_to_json(sets: &[RankingSet]) -> String {
    let records: Vec<RankingSetRecord> = sets.iter().cloned().map(Into::into).collect();
    serde_json::to_string_pretty(&records).expect("record serialisation cannot fail")
}

/// Value of one query under a metric, oriented so that larger is better.
///
/// Minimised metrics are negated. Path length carries no preferred
/// direction of its own, so a query ranks by how closely its length matches
/// the reference length: the negated absolute difference.
pub fn ranking_value(
    metric: MetricName,
    ep: &EpisodePair,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, AnalysisError> {
    let value = metrics::score(metric, ep, oracle, cfg)?;
    Ok(match metric.direction() {
        Direction::Maximize => value,
        Direction::Minimize => -value,
        Direction::Informational => {
            let ref_value = match metric {
                MetricName::Pl => metrics::path_length(ep.reference(), oracle)?,
                _ => unreachable!("pl is the only informational metric"),
            };
            -(value - ref_value).abs()
        }
    })
}

fn set_values(
    set: &RankingSet,
    metric: MetricName,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<Vec<f64>, AnalysisError> {
    set.queries()
        .iter()
        .map(|q| {
            let ep = EpisodePair::new(set.reference().to_vec(), q.clone())?;
            ranking_value(metric, &ep, oracle, cfg)
        })
        .collect()
}

/// Orders a set's queries under a metric, best first. Equal values keep
/// their query order, so the result is deterministic.
pub fn rank_queries(
    set: &RankingSet,
    metric: MetricName,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<Vec<usize>, AnalysisError> {
    let values = set_values(set, metric, oracle, cfg)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    Ok(order)
}

/// How well a metric's ranking of one set agrees with the gold ranking, as
/// Spearman correlation. A metric that scores every query of the set the
/// same carries no ranking information and is assigned 0.
pub fn gold_agreement(
    set: &RankingSet,
    metric: MetricName,
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<f64, AnalysisError> {
    let values = set_values(set, metric, oracle, cfg)?;
    // Negating makes the best query the smallest value, i.e. rank 1, the
    // same orientation as the gold ranks.
    let negated: Vec<f64> = values.iter().map(|v| -v).collect();
    match spearman(&negated, &set.gold_ranks()) {
        Ok(rho) => Ok(rho),
        Err(AnalysisError::ConstantInput) => Ok(0.0),
        Err(e) => Err(e),
    }
}

/// Outcome of pitting the champion against one rival across many sets.
#[derive(Clone, Debug)]
pub struct RivalComparison {
    pub rival: MetricName,
    /// Sets where the champion tracked the gold ranking more closely.
    pub positives: usize,
    /// Sets where the rival did.
    pub negatives: usize,
    /// Sets discarded because the two agreed exactly.
    pub ties: usize,
    /// One-sided sign-test p-value for "the champion wins more often".
    pub p_one_sided: f64,
}

impl RivalComparison {
    pub fn p_two_sided(&self) -> f64 {
        (2.0 * self.p_one_sided).min(1.0)
    }
}

/// Compares a champion metric against each rival over the given sets.
///
/// Per set and metric the gold agreement is computed once; a rival
/// comparison then counts the sets where each side agreed more closely and
/// runs the sign test on those counts. Rivals that tie the champion on
/// every single set yield [`AnalysisError::NoInformativePairs`].
pub fn compare_metrics(
    sets: &[RankingSet],
    champion: MetricName,
    rivals: &[MetricName],
    oracle: &DistanceOracle,
    cfg: &MetricConfig,
) -> Result<Vec<RivalComparison>, AnalysisError> {
    let champion_rhos: Vec<f64> = sets
        .iter()
        .map(|s| gold_agreement(s, champion, oracle, cfg))
        .collect::<Result<_, _>>()?;

    let mut out = Vec::with_capacity(rivals.len());
    for &rival in rivals {
        let mut positives = 0;
        let mut negatives = 0;
        let mut ties = 0;
        for (set, &champ_rho) in sets.iter().zip(&champion_rhos) {
            let rival_rho = gold_agreement(set, rival, oracle, cfg)?;
            if champ_rho > rival_rho {
                positives += 1;
            } else if rival_rho > champ_rho {
                negatives += 1;
            } else {
                ties += 1;
            }
        }
        let p_one_sided = sign_test_one_sided(positives, negatives)?;
        out.push(RivalComparison { rival, positives, negatives, ties, p_one_sided });
    }
    Ok(out)
}
