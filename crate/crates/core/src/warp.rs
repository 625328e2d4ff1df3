//! Dynamic time warping between node paths.
//!
//! A warping between a reference `R` (length `m`) and a query `Q` (length
//! `n`) is a sequence of index pairs that starts at `(1, 1)`, ends at
//! `(m, n)` and advances one index or both by one at each step. Its cost is
//! the sum of node distances over the visited pairs, and the DTW cost is the
//! minimum over all warpings, computed by the usual dynamic program.
//!
//! Three entry points trade memory for detail: [`dtw_cost`] keeps two rows
//! and returns the cost alone, [`dtw_exact`] backtracks the optimal warping,
//! and [`dtw_fast`] runs the multiscale approximation (coarsen, solve, then
//! refine inside a widened corridor) whose cost can exceed but never
//! undercut the exact one. [`PrefixScorer`] maintains the same dynamic
//! program column by column so an agent can be scored while it moves.
//!
//! All costs use the distance definition of the supplied
//! [`DistanceOracle`], so warping against geodesic, Euclidean and
//! grid-approximate distances are all available through one code path.

use thiserror::Error;

use crate::geometry::{DistanceError, DistanceOracle, NodeId, Path};

#[derive(Debug, Error)]
pub enum WarpError {
    #[error("cannot warp an empty path")]
    EmptyPath,
    #[error(transparent)]
    Distance(#[from] DistanceError),
    #[error("{len_r}x{len_q} warpings cannot be enumerated; the limit is {max} index pairs")]
    TooLargeToEnumerate { len_r: usize, len_q: usize, max: usize },
    #[error("distance threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
}

const ENUMERATION_LIMIT: usize = 64;

/// A warping as 1-based `(reference, query)` index pairs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Warping {
    steps: Vec<(usize, usize)>,
}

impl Warping {
    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Checks boundary and step constraints against the given path lengths.
    pub fn is_valid_for(&self, len_r: usize, len_q: usize) -> bool {
        if self.steps.first() != Some(&(1, 1)) || self.steps.last() != Some(&(len_r, len_q)) {
            return false;
        }
        self.steps.windows(2).all(|w| {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            matches!((di, dj), (1, 1) | (1, 0) | (0, 1))
        })
    }

    /// Sum of node distances over the visited index pairs.
    pub fn cost(
        &self,
        reference: &[NodeId],
        query: &[NodeId],
        oracle: &DistanceOracle,
    ) -> Result<f64, WarpError> {
        let mut total = 0.0;
        for &(i, j) in &self.steps {
            total += oracle.distance(reference[i - 1], query[j - 1])?;
        }
        Ok(total)
    }
}

/// Outcome of an alignment: minimum cost, one optimal warping and, on
/// request, the full cost table (`table[i][j]` covers prefixes of lengths
/// `i` and `j`; row and column 0 are the infinite border).
#[derive(Clone, Debug)]
pub struct AlignmentResult {
    pub cost: f64,
    pub warping: Warping,
    pub table: Option<Vec<Vec<f64>>>,
}

/// Normalised DTW score in `(0, 1]`: `exp(-cost / (ref_len * d_th))`.
pub fn ndtw_from_cost(cost: f64, ref_len: usize, d_th: f64) -> f64 {
    debug_assert!(ref_len > 0 && d_th > 0.0);
    (-cost / (ref_len as f64 * d_th)).exp()
}

/// DTW cost alone, in O(min row) memory.
pub fn dtw_cost(
    reference: &[NodeId],
    query: &[NodeId],
    oracle: &DistanceOracle,
) -> Result<f64, WarpError> {
    if reference.is_empty() || query.is_empty() {
        return Err(WarpError::EmptyPath);
    }
    let n = query.len();
    let mut prev = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    let mut cur = vec![f64::INFINITY; n + 1];
    for &r in reference {
        cur[0] = f64::INFINITY;
        for (j, &q) in query.iter().enumerate() {
            let d = oracle.distance(r, q)?;
            cur[j + 1] = d + prev[j].min(prev[j + 1]).min(cur[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n])
}

/// Exact DTW with the optimal warping recovered by backtracking.
pub fn dtw_exact(
    reference: &[NodeId],
    query: &[NodeId],
    oracle: &DistanceOracle,
) -> Result<AlignmentResult, WarpError> {
    let mut res = dtw_exact_with_table(reference, query, oracle)?;
    res.table = None;
    Ok(res)
}

/// Like [`dtw_exact`], keeping the full cost table in the result.
pub fn dtw_exact_with_table(
    reference: &[NodeId],
    query: &[NodeId],
    oracle: &DistanceOracle,
) -> Result<AlignmentResult, WarpError> {
    if reference.is_empty() || query.is_empty() {
        return Err(WarpError::EmptyPath);
    }
    let (m, n) = (reference.len(), query.len());
    let mut table = vec![vec![f64::INFINITY; n + 1]; m + 1];
    table[0][0] = 0.0;
    for i in 1..=m {
        for j in 1..=n {
            let d = oracle.distance(reference[i - 1], query[j - 1])?;
            let best = table[i - 1][j - 1].min(table[i - 1][j]).min(table[i][j - 1]);
            table[i][j] = d + best;
        }
    }

    let mut steps = vec![(m, n)];
    let (mut i, mut j) = (m, n);
    while (i, j) != (1, 1) {
        // Preference among equally cheap predecessors: diagonal, then
        // advancing the reference, then advancing the query.
        let candidates = [(i - 1, j - 1), (i - 1, j), (i, j - 1)];
        let (mut bi, mut bj) = candidates[0];
        for &(ci, cj) in &candidates[1..] {
            if table[ci][cj] < table[bi][bj] {
                (bi, bj) = (ci, cj);
            }
        }
        (i, j) = (bi, bj);
        steps.push((i, j));
    }
    steps.reverse();

    Ok(AlignmentResult { cost: table[m][n], warping: Warping { steps }, table: Some(table) })
}

/// Every valid warping between paths of the given lengths, for brute-force
/// verification. Refuses products of lengths above a small limit; the count
/// grows like the Delannoy numbers.
pub fn enumerate_warpings(len_r: usize, len_q: usize) -> Result<Vec<Warping>, WarpError> {
    if len_r == 0 || len_q == 0 {
        return Err(WarpError::EmptyPath);
    }
    if len_r * len_q > ENUMERATION_LIMIT {
        return Err(WarpError::TooLargeToEnumerate {
            len_r,
            len_q,
            max: ENUMERATION_LIMIT,
        });
    }
    let mut out = Vec::new();
    let mut prefix = vec![(1, 1)];
    fn recurse(
        prefix: &mut Vec<(usize, usize)>,
        len_r: usize,
        len_q: usize,
        out: &mut Vec<Warping>,
    ) {
        let &(i, j) = prefix.last().expect("prefix starts non-empty");
        if (i, j) == (len_r, len_q) {
            out.push(Warping { steps: prefix.clone() });
            return;
        }
        let moves = [(i + 1, j + 1), (i + 1, j), (i, j + 1)];
        for (ni, nj) in moves {
            if ni <= len_r && nj <= len_q {
                prefix.push((ni, nj));
                recurse(prefix, len_r, len_q, out);
                prefix.pop();
            }
        }
    }
    recurse(&mut prefix, len_r, len_q, &mut out);
    Ok(out)
}

/// Multiscale approximate DTW.
///
/// Paths longer than `radius + 2` are downsampled by keeping every second
/// node (the final node survives when the length is odd), aligned
/// recursively, and the coarse warping is projected back up and widened by
/// `radius` cells in every direction; the exact dynamic program then runs
/// inside that corridor only. Runtime and memory are linear in the path
/// lengths for fixed `radius`. Because the corridor restricts the search,
/// the reported cost is an upper bound on the exact cost; at large enough
/// radius the two agree.
pub fn dtw_fast(
    reference: &[NodeId],
    query: &[NodeId],
    oracle: &DistanceOracle,
    radius: usize,
) -> Result<AlignmentResult, WarpError> {
    if reference.is_empty() || query.is_empty() {
        return Err(WarpError::EmptyPath);
    }
    if reference.len() < radius + 2 || query.len() < radius + 2 {
        return dtw_exact(reference, query, oracle);
    }
    let coarse_r = downsample(reference);
    let coarse_q = downsample(query);
    let coarse = dtw_fast(&coarse_r, &coarse_q, oracle, radius)?;
    let window = expand_window(&coarse.warping, reference.len(), query.len(), radius);
    dtw_windowed(reference, query, oracle, &window)
}

fn downsample(path: &[NodeId]) -> Path {
    path.iter().copied().step_by(2).collect()
}

/// Per-reference-row inclusive query-index bounds, 1-based; row `i` lives at
/// `lo[i-1]..=hi[i-1]`.
struct Window {
    lo: Vec<usize>,
    hi: Vec<usize>,
}

/// Projects a coarse warping onto the fine grid (each coarse cell covers the
/// 2x2 block of fine cells it was sampled from) and widens the result by
/// `radius` in both directions.
fn expand_window(coarse: &Warping, len_r: usize, len_q: usize, radius: usize) -> Window {
    let mut lo = vec![usize::MAX; len_r];
    let mut hi = vec![0usize; len_r];
    for &(ci, cj) in coarse.steps() {
        let cols = (2 * cj - 1, (2 * cj).min(len_q));
        for fi in [2 * ci - 1, 2 * ci] {
            if fi <= len_r {
                lo[fi - 1] = lo[fi - 1].min(cols.0);
                hi[fi - 1] = hi[fi - 1].max(cols.1);
            }
        }
    }

    let mut wide_lo = vec![0usize; len_r];
    let mut wide_hi = vec![0usize; len_r];
    for i in 0..len_r {
        let from = i.saturating_sub(radius);
        let to = (i + radius).min(len_r - 1);
        let row_lo = lo[from..=to].iter().copied().min().expect("window rows are covered");
        let row_hi = hi[from..=to].iter().copied().max().expect("window rows are covered");
        wide_lo[i] = row_lo.saturating_sub(radius).max(1);
        wide_hi[i] = (row_hi + radius).min(len_q);
    }
    Window { lo: wide_lo, hi: wide_hi }
}

/// The exact dynamic program restricted to a corridor; cells outside count
/// as infinite.
fn dtw_windowed(
    reference: &[NodeId],
    query: &[NodeId],
    oracle: &DistanceOracle,
    window: &Window,
) -> Result<AlignmentResult, WarpError> {
    let (m, n) = (reference.len(), query.len());
    // rows[i-1] holds costs for j in lo..=hi of row i.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let get = |rows: &[Vec<f64>], i: usize, j: usize| -> f64 {
        if i == 0 || j == 0 {
            return if i == 0 && j == 0 { 0.0 } else { f64::INFINITY };
        }
        let (lo, hi) = (window.lo[i - 1], window.hi[i - 1]);
        if i > rows.len() || j < lo || j > hi {
            f64::INFINITY
        } else {
            rows[i - 1][j - lo]
        }
    };

    for i in 1..=m {
        let (lo, hi) = (window.lo[i - 1], window.hi[i - 1]);
        let mut row = Vec::with_capacity(hi - lo + 1);
        for j in lo..=hi {
            let d = oracle.distance(reference[i - 1], query[j - 1])?;
            // The left neighbour at j == lo is the border or out of the
            // corridor, either way infinite.
            let left = if j > lo { row[j - lo - 1] } else { f64::INFINITY };
            let best = get(&rows, i - 1, j - 1).min(get(&rows, i - 1, j)).min(left);
            row.push(d + best);
        }
        rows.push(row);
    }

    let cost = get(&rows, m, n);
    debug_assert!(cost.is_finite(), "projected corridor always connects the corners");

    let mut steps = vec![(m, n)];
    let (mut i, mut j) = (m, n);
    while (i, j) != (1, 1) {
        let candidates = [(i - 1, j - 1), (i - 1, j), (i, j - 1)];
        let (mut bi, mut bj) = candidates[0];
        for &(ci, cj) in &candidates[1..] {
            if get(&rows, ci, cj) < get(&rows, bi, bj) {
                (bi, bj) = (ci, cj);
            }
        }
        (i, j) = (bi, bj);
        steps.push((i, j));
    }
    steps.reverse();

    Ok(AlignmentResult { cost, warping: Warping { steps }, table: None })
}

/// Incremental prefix scorer: feeds agent positions one at a time and keeps
/// the normalised DTW score of the consumed prefix against a fixed
/// reference.
///
/// Internally this is one column of the DTW table, updated in O(|R|) per
/// consumed node, so after `k` steps [`PrefixScorer::score`] equals the
/// batch score of the first `k` query nodes exactly, not approximately.
/// Before any node is consumed the score is 0.
pub struct PrefixScorer {
    reference: Path,
    oracle: DistanceOracle,
    d_th: f64,
    /// `col[k]` is the DTW cost of `reference[..k]` against the consumed
    /// prefix; `col[0]` is the border cell.
    col: Vec<f64>,
    consumed: usize,
}

impl PrefixScorer {
    pub fn new(
        reference: Path,
        oracle: DistanceOracle,
        d_th: f64,
    ) -> Result<Self, WarpError> {
        if reference.is_empty() {
            return Err(WarpError::EmptyPath);
        }
        if !(d_th.is_finite() && d_th > 0.0) {
            return Err(WarpError::InvalidThreshold(d_th));
        }
        let mut col = vec![f64::INFINITY; reference.len() + 1];
        col[0] = 0.0;
        Ok(PrefixScorer { reference, oracle, d_th, col, consumed: 0 })
    }

    pub fn reference(&self) -> &[NodeId] {
        &self.reference
    }

    pub fn threshold(&self) -> f64 {
        self.d_th
    }

    pub fn steps_consumed(&self) -> usize {
        self.consumed
    }

    /// Consumes the next query node and returns the updated score.
    pub fn step(&mut self, q: NodeId) -> Result<f64, WarpError> {
        self.col = self.next_column(q)?;
        self.consumed += 1;
        Ok(self.score())
    }

    /// Score as if `q` were consumed next, without consuming it.
    pub fn peek(&self, q: NodeId) -> Result<f64, WarpError> {
        let col = self.next_column(q)?;
        Ok(self.score_of(&col))
    }

    /// Normalised DTW score of the consumed prefix; 0 when nothing has been
    /// consumed yet.
    pub fn score(&self) -> f64 {
        if self.consumed == 0 {
            return 0.0;
        }
        self.score_of(&self.col)
    }

    fn score_of(&self, col: &[f64]) -> f64 {
        ndtw_from_cost(col[self.reference.len()], self.reference.len(), self.d_th)
    }

    fn next_column(&self, q: NodeId) -> Result<Vec<f64>, WarpError> {
        let mut next = vec![f64::INFINITY; self.col.len()];
        for (k, &r) in self.reference.iter().enumerate() {
            let d = self.oracle.distance(r, q)?;
            let best = self.col[k].min(self.col[k + 1]).min(next[k]);
            next[k + 1] = d + best;
        }
        Ok(next)
    }
}
