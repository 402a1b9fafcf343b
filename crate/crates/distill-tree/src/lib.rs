//! Statistically stabilized decision-tree distillation.
//!
//! A subsampled random-forest teacher is distilled into a single decision
//! tree whose split choices are protected by hypothesis tests: at each node
//! enough teacher-labeled pseudo data is generated that rebuilding the tree
//! from fresh pseudo data would pick the same split with high probability.
//! Tree depth can additionally be gated by a chi-squared test that the
//! teacher is statistically non-constant within the node.
//!
//! The crate surface, bottom up:
//!
//! * [`model`] — schemas, datasets, regions, split rules, and the distilled
//!   tree with its JSON and DOT serializations.
//! * [`forest`] — the subsampled forest teacher with per-tree subsample
//!   bookkeeping and infinitesimal-jackknife covariance estimates.
//! * [`sampler`] — kernel-smoothed pseudo-covariate generation restricted to
//!   a node's region.
//! * [`stabilizer`] — Gini statistics on soft labels, the CLT variance of a
//!   Gini-gain difference, sequential sample-size growth, and familywise
//!   aggregation over candidate splits.
//! * [`builder`] — recursive stabilized tree construction with audit logs.
//! * [`node_test`] — the teacher-is-constant stopping test.
//! * [`sim`] and [`report`] — simulation generators, stability audits, and
//!   teacher-agreement metrics.
//!
//! See the `examples/` directory for runnable end-to-end walkthroughs of
//! each capability, and the `distill-tree` binary for the command-line
//! surface.

pub mod builder;
pub mod error;
pub mod forest;
pub mod model;
pub mod report;
pub mod sampler;
pub mod sim;
pub mod stabilizer;
pub mod util;

pub use error::{Error, Result};
