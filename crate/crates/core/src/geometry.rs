//! World graphs and distance oracles.
//!
//! A [`NavWorld`] is an undirected graph embedded in the plane: every node has
//! an id and 2D coordinates, every edge is weighted by the Euclidean distance
//! between its endpoints. A [`DistanceOracle`] wraps a world together with one
//! of three notions of node-to-node distance:
//!
//! * geodesic: shortest-path distance along the graph, optionally backed by a
//!   precomputed all-pairs table;
//! * Euclidean: straight-line distance that ignores the edges entirely;
//! * grid-approximate: both nodes are snapped to a synthetic square lattice
//!   laid over the world's bounding box and the distance is the straight-line
//!   distance between the snapped lattice points, emulating evaluation
//!   against a coarse occupancy map rather than the true graph.
//!
//! Oracles are cheap to clone and hand out; the world and any precomputed
//! tables are shared behind [`Arc`]s.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path as FsPath;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a world node.
///
/// Ids are arbitrary integers chosen by whoever built the world; they are
/// dense `i*size + j` values for generated lattice worlds but nothing relies
/// on that. Serialises as a bare integer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub i64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// An ordered sequence of nodes. Paths of length one are legal and denote a
/// stationary agent.
pub type Path = Vec<NodeId>;

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("edge endpoint {0} is not a node")]
    UnknownEndpoint(NodeId),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("non-finite coordinate on node {0}")]
    NonFiniteCoordinate(NodeId),
}

#[derive(Debug, Error)]
pub enum WorldFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid world JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path between {0} and {1}")]
    Unreachable(NodeId, NodeId),
    #[error("point ({0}, {1}) lies outside the world bounding box")]
    OutOfBounds(f64, f64),
    #[error("point distances are only defined in grid-approximate mode")]
    PointsUnsupported,
    #[error("grid spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("cannot build a grid over an empty world")]
    EmptyWorld,
    #[error("empty path")]
    EmptyPath,
}

#[derive(Serialize, Deserialize)]
struct NodeRecord {
    id: i64,
    x: f64,
    y: f64,
}

#[derive(Serialize, Deserialize)]
struct WorldFile {
    nodes: Vec<NodeRecord>,
    edges: Vec<(i64, i64)>,
}

/// An undirected spatial graph.
///
/// Nodes are stored sorted by id and edges in normalised `(low, high)` form,
/// so two worlds built from the same node and edge sets compare and serialise
/// identically regardless of input order. Parallel edges collapse to one.
#[derive(Debug, Clone, PartialEq)]
pub struct NavWorld {
    ids: Vec<NodeId>,
    coords: Vec<(f64, f64)>,
    index: BTreeMap<NodeId, usize>,
    /// Adjacency by dense index, each list sorted by neighbour id.
    adj: Vec<Vec<(usize, f64)>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl NavWorld {
    /// Builds a world from `(id, x, y)` nodes and id pairs for edges.
    ///
    /// Rejects duplicate ids, non-finite coordinates, self-loops and edges
    /// naming a missing node.
    pub fn new(
        nodes: impl IntoIterator<Item = (NodeId, f64, f64)>,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, WorldError> {
        let mut pairs: Vec<(NodeId, (f64, f64))> = Vec::new();
        for (id, x, y) in nodes {
            if !x.is_finite() || !y.is_finite() {
                return Err(WorldError::NonFiniteCoordinate(id));
            }
            pairs.push((id, (x, y)));
        }
        pairs.sort_by_key(|&(id, _)| id);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(WorldError::DuplicateNode(w[0].0));
            }
        }
        let ids: Vec<NodeId> = pairs.iter().map(|&(id, _)| id).collect();
        let coords: Vec<(f64, f64)> = pairs.iter().map(|&(_, c)| c).collect();
        let index: BTreeMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

        let mut normalised: Vec<(NodeId, NodeId)> = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(WorldError::SelfLoop(a));
            }
            for end in [a, b] {
                if !index.contains_key(&end) {
                    return Err(WorldError::UnknownEndpoint(end));
                }
            }
            normalised.push(if a < b { (a, b) } else { (b, a) });
        }
        normalised.sort();
        normalised.dedup();

        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); ids.len()];
        for &(a, b) in &normalised {
            let (ia, ib) = (index[&a], index[&b]);
            let w = euclid(coords[ia], coords[ib]);
            adj[ia].push((ib, w));
            adj[ib].push((ia, w));
        }
        for list in &mut adj {
            list.sort_by_key(|&(i, _)| ids[i]);
        }

        Ok(NavWorld { ids, coords, index, adj, edges: normalised })
    }

    pub fn num_nodes(&self) -> usize {
        self.ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Node ids in ascending order.
    pub fn node_ids(&self) -> &[NodeId] {
        &self.ids
    }

    /// Normalised `(low, high)` edges in ascending order.
    pub fn edges(&self) -> &[(NodeId, NodeId)] {
        &self.edges
    }

    pub fn coord(&self, id: NodeId) -> Result<(f64, f64), DistanceError> {
        self.idx(id).map(|i| self.coords[i])
    }

    /// Neighbours of `id` in ascending id order.
    pub fn neighbors(&self, id: NodeId) -> Result<Vec<NodeId>, DistanceError> {
        let i = self.idx(id)?;
        Ok(self.adj[i].iter().map(|&(j, _)| self.ids[j]).collect())
    }

    pub fn degree(&self, id: NodeId) -> Result<usize, DistanceError> {
        Ok(self.adj[self.idx(id)?].len())
    }

    /// `(xmin, ymin, xmax, ymax)` over all nodes. `None` for an empty world.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        let (&(x0, y0), rest) = self.coords.split_first()?;
        let mut bb = (x0, y0, x0, y0);
        for &(x, y) in rest {
            bb.0 = bb.0.min(x);
            bb.1 = bb.1.min(y);
            bb.2 = bb.2.max(x);
            bb.3 = bb.3.max(y);
        }
        Some(bb)
    }

    /// Whether every node can reach every other node.
    pub fn is_connected(&self) -> bool {
        let n = self.num_nodes();
        if n <= 1 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &(j, _) in &self.adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }

    /// Shortest-path distance along edges, by Dijkstra.
    ///
    /// Always searched from the lower-indexed endpoint, so `d(a,b)` and
    /// `d(b,a)` are the same computation and agree bit for bit, not merely
    /// up to summation order.
    pub fn geodesic_distance(&self, a: NodeId, b: NodeId) -> Result<f64, DistanceError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        let (src, dst) = if ia <= ib { (ia, ib) } else { (ib, ia) };
        let d = self.dijkstra(src, Some(dst))[dst];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(DistanceError::Unreachable(a, b))
        }
    }

    /// A minimum-length path from `a` to `b`, endpoints included.
    ///
    /// Ties between equal-length paths are broken deterministically (lowest
    /// predecessor id wins), so the result is a pure function of the world.
    pub fn shortest_path(&self, a: NodeId, b: NodeId) -> Result<Path, DistanceError> {
        let (ia, ib) = (self.idx(a)?, self.idx(b)?);
        if ia == ib {
            return Ok(vec![a]);
        }
        let (dist, pred) = self.dijkstra_with_pred(ia);
        if !dist[ib].is_finite() {
            return Err(DistanceError::Unreachable(a, b));
        }
        let mut out = vec![self.ids[ib]];
        let mut cur = ib;
        while cur != ia {
            cur = pred[cur].expect("finite distance implies a predecessor chain");
            out.push(self.ids[cur]);
        }
        out.reverse();
        Ok(out)
    }

    /// Fewest-edges distance from `a` to every reachable node, as hop counts.
    pub fn hop_distances(&self, a: NodeId) -> Result<Vec<(NodeId, usize)>, DistanceError> {
        let ia = self.idx(a)?;
        let mut hops: Vec<Option<usize>> = vec![None; self.num_nodes()];
        hops[ia] = Some(0);
        let mut frontier = vec![ia];
        let mut h = 0;
        while !frontier.is_empty() {
            h += 1;
            let mut next = Vec::new();
            for &i in &frontier {
                for &(j, _) in &self.adj[i] {
                    if hops[j].is_none() {
                        hops[j] = Some(h);
                        next.push(j);
                    }
                }
            }
            frontier = next;
        }
        Ok(hops
            .iter()
            .enumerate()
            .filter_map(|(i, h)| h.map(|h| (self.ids[i], h)))
            .collect())
    }

    pub fn to_json_string(&self) -> String {
        let file = WorldFile {
            nodes: self
                .ids
                .iter()
                .zip(&self.coords)
                .map(|(&NodeId(id), &(x, y))| NodeRecord { id, x, y })
                .collect(),
            edges: self.edges.iter().map(|&(NodeId(a), NodeId(b))| (a, b)).collect(),
        };
        serde_json::to_string_pretty(&file).expect("world serialisation cannot fail")
    }

    pub fn from_json_str(text: &str) -> Result<Self, WorldFileError> {
        let file: WorldFile = serde_json::from_str(text)?;
        let world = NavWorld::new(
            file.nodes.iter().map(|n| (NodeId(n.id), n.x, n.y)),
            file.edges.iter().map(|&(a, b)| (NodeId(a), NodeId(b))),
        )?;
        Ok(world)
    }

    pub fn save(&self, path: impl AsRef<FsPath>) -> Result<(), WorldFileError> {
        let mut text = self.to_json_string();
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<FsPath>) -> Result<Self, WorldFileError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    fn idx(&self, id: NodeId) -> Result<usize, DistanceError> {
        self.index.get(&id).copied().ok_or(DistanceError::UnknownNode(id))
    }

    /// Single-source Dijkstra over dense indices; `target` allows early exit.
    fn dijkstra(&self, source: usize, target: Option<usize>) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.num_nodes()];
        dist[source] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(Reverse(HeapEntry { dist: 0.0, node: source }));
        while let Some(Reverse(HeapEntry { dist: d, node: i })) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            if target == Some(i) {
                break;
            }
            for &(j, w) in &self.adj[i] {
                let nd = d + w;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Reverse(HeapEntry { dist: nd, node: j }));
                }
            }
        }
        dist
    }

    fn dijkstra_with_pred(&self, source: usize) -> (Vec<f64>, Vec<Option<usize>>) {
        let n = self.num_nodes();
        let mut dist = vec![f64::INFINITY; n];
        let mut pred: Vec<Option<usize>> = vec![None; n];
        dist[source] = 0.0;
        let mut heap = std::collections::BinaryHeap::new();
        heap.push(Reverse(HeapEntry { dist: 0.0, node: source }));
        while let Some(Reverse(HeapEntry { dist: d, node: i })) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            for &(j, w) in &self.adj[i] {
                let nd = d + w;
                // Strict improvement only: with neighbours visited in id
                // order, equal-length routes resolve to the lowest-id
                // predecessor discovered first.
                if nd < dist[j] {
                    dist[j] = nd;
                    pred[j] = Some(i);
                    heap.push(Reverse(HeapEntry { dist: nd, node: j }));
                }
            }
        }
        (dist, pred)
    }
}

/// Heap key ordered by distance, then node index for determinism.
#[derive(PartialEq)]
struct HeapEntry {
    dist: f64,
    node: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist.total_cmp(&other.dist).then(self.node.cmp(&other.node))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// How an oracle turns a pair of nodes into a distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceMode {
    Geodesic,
    Euclidean,
    GridApprox,
}

impl fmt::Display for DistanceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMode::Geodesic => "geodesic",
            DistanceMode::Euclidean => "euclidean",
            DistanceMode::GridApprox => "grid-approx",
        })
    }
}

/// Synthetic square lattice over a bounding box, for grid-approximate mode.
#[derive(Debug)]
struct GridIndex {
    x0: f64,
    y0: f64,
    spacing: f64,
    nx: usize,
    ny: usize,
}

impl GridIndex {
    fn new(bb: (f64, f64, f64, f64), spacing: f64) -> Self {
        let cells = |lo: f64, hi: f64| ((hi - lo) / spacing).ceil() as usize + 1;
        GridIndex {
            x0: bb.0,
            y0: bb.1,
            spacing,
            nx: cells(bb.0, bb.2),
            ny: cells(bb.1, bb.3),
        }
    }

    /// Nearest lattice point; ties snap toward the lattice origin.
    fn snap(&self, x: f64, y: f64) -> Result<(f64, f64), DistanceError> {
        let xmax = self.x0 + (self.nx - 1) as f64 * self.spacing;
        let ymax = self.y0 + (self.ny - 1) as f64 * self.spacing;
        if !x.is_finite() || !y.is_finite() || x < self.x0 || x > xmax || y < self.y0 || y > ymax {
            return Err(DistanceError::OutOfBounds(x, y));
        }
        let cell = |v: f64, lo: f64, n: usize| {
            let i = ((v - lo) / self.spacing - 0.5).ceil() as isize;
            (i.clamp(0, n as isize - 1)) as f64
        };
        Ok((
            self.x0 + cell(x, self.x0, self.nx) * self.spacing,
            self.y0 + cell(y, self.y0, self.ny) * self.spacing,
        ))
    }
}

/// A world paired with a distance definition. Cloning is cheap.
#[derive(Clone)]
pub struct DistanceOracle {
    world: Arc<NavWorld>,
    mode: DistanceMode,
    table: Option<Arc<Vec<Vec<f64>>>>,
    grid: Option<Arc<GridIndex>>,
}

impl fmt::Debug for DistanceOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistanceOracle")
            .field("mode", &self.mode)
            .field("nodes", &self.world.num_nodes())
            .field("precomputed", &self.table.is_some())
            .finish()
    }
}

impl DistanceOracle {
    /// Geodesic distances, one Dijkstra run per query.
    pub fn geodesic(world: Arc<NavWorld>) -> Self {
        DistanceOracle { world, mode: DistanceMode::Geodesic, table: None, grid: None }
    }

    /// Geodesic distances backed by an all-pairs table.
    ///
    /// Runs Dijkstra from every node up front; lookups are then constant time
    /// and agree exactly with [`DistanceOracle::geodesic`]. Unreachable pairs
    /// stay unreachable and still surface as errors.
    pub fn all_pairs(world: Arc<NavWorld>) -> Self {
        let table: Vec<Vec<f64>> =
            (0..world.num_nodes()).map(|i| world.dijkstra(i, None)).collect();
        DistanceOracle {
            world,
            mode: DistanceMode::Geodesic,
            table: Some(Arc::new(table)),
            grid: None,
        }
    }

    /// Straight-line distances between node coordinates.
    pub fn euclidean(world: Arc<NavWorld>) -> Self {
        DistanceOracle { world, mode: DistanceMode::Euclidean, table: None, grid: None }
    }

    /// Distances between lattice points after snapping, `spacing` apart.
    ///
    /// The lattice is anchored at the lower-left corner of the world's
    /// bounding box and extends just far enough to cover it. Snapped points
    /// are compared by straight-line distance, so obstacles and connectivity
    /// are invisible in this mode. Requires a non-empty world and a positive
    /// finite spacing.
    pub fn grid_approx(world: Arc<NavWorld>, spacing: f64) -> Result<Self, DistanceError> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(DistanceError::InvalidSpacing(spacing));
        }
        let bb = world.bounding_box().ok_or(DistanceError::EmptyWorld)?;
        let grid = GridIndex::new(bb, spacing);
        Ok(DistanceOracle {
            world,
            mode: DistanceMode::GridApprox,
            table: None,
            grid: Some(Arc::new(grid)),
        })
    }

    pub fn mode(&self) -> DistanceMode {
        self.mode
    }

    pub fn world(&self) -> &Arc<NavWorld> {
        &self.world
    }

    /// Distance between two nodes under this oracle's mode.
    pub fn distance(&self, a: NodeId, b: NodeId) -> Result<f64, DistanceError> {
        match self.mode {
            DistanceMode::Geodesic => {
                if let Some(table) = &self.table {
                    let (ia, ib) = (self.world.idx(a)?, self.world.idx(b)?);
                    // Read the lower-indexed source's row: the same entry
                    // `geodesic_distance` would compute, whichever way round
                    // the pair is asked.
                    let (lo, hi) = if ia <= ib { (ia, ib) } else { (ib, ia) };
                    let d = table[lo][hi];
                    if d.is_finite() {
                        Ok(d)
                    } else {
                        Err(DistanceError::Unreachable(a, b))
                    }
                } else {
                    self.world.geodesic_distance(a, b)
                }
            }
            DistanceMode::Euclidean => {
                Ok(euclid(self.world.coord(a)?, self.world.coord(b)?))
            }
            DistanceMode::GridApprox => {
                let (pa, pb) = (self.world.coord(a)?, self.world.coord(b)?);
                self.point_distance(pa, pb)
            }
        }
    }

    /// Distance between two free points. Grid-approximate mode only; other
    /// modes have no meaningful notion of an off-graph point.
    pub fn point_distance(&self, a: (f64, f64), b: (f64, f64)) -> Result<f64, DistanceError> {
        let grid = self.grid.as_ref().ok_or(DistanceError::PointsUnsupported)?;
        let sa = grid.snap(a.0, a.1)?;
        let sb = grid.snap(b.0, b.1)?;
        Ok(euclid(sa, sb))
    }

    /// Distance from `n` to the nearest node of `path`.
    pub fn point_to_path_distance(&self, n: NodeId, path: &[NodeId]) -> Result<f64, DistanceError> {
        if path.is_empty() {
            return Err(DistanceError::EmptyPath);
        }
        let mut best = f64::INFINITY;
        for &p in path {
            match self.distance(n, p) {
                Ok(d) => best = best.min(d),
                // One unreachable waypoint does not matter if another one is
                // reachable; the distance to the set is still defined.
                Err(DistanceError::Unreachable(..)) => {}
                Err(e) => return Err(e),
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(DistanceError::Unreachable(n, path[0]))
        }
    }
}
