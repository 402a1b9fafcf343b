//! Shared domain types: schemas, datasets, class distributions, split rules,
//! regions and the distilled tree itself.

mod data;
mod distribution;
mod region;
mod tree;

pub use data::{Column, ColumnKind, CovariateSchema, Dataset};
pub use distribution::ClassDistribution;
pub use region::{Dim, Region, Side, SplitCut, SplitRule};
pub use tree::{ApproxTree, NodeAnnotation, TreeNode, DEFAULT_FINGERPRINT_PRECISION};
