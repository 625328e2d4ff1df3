//! Evaluation toolkit for agent navigation on spatial graphs.
//!
//! The crate is organised around one question: given a reference path and the
//! trajectory an agent actually took, how faithfully did the agent follow the
//! reference? The [`warp`] module answers it with dynamic time warping and the
//! normalised scores built on top of it; [`metrics`] adds the wider family of
//! navigation metrics (success rate, SPL, coverage scores, edit distance and
//! friends) so the warping-based scores can be compared against them;
//! [`analysis`] ranks candidate trajectories and runs the statistical
//! comparisons; [`simworld`] generates the synthetic worlds, reference paths
//! and policy rollouts those experiments run on. [`geometry`] underpins all of
//! it with the world graph and pluggable node-to-node distances.

pub mod analysis;
pub mod geometry;
pub mod metrics;
pub mod simworld;
pub mod warp;

pub use geometry::{DistanceMode, DistanceOracle, NavWorld, NodeId, Path};
pub use metrics::{EpisodePair, MetricConfig, MetricName, MetricReport};
