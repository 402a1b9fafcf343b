//! Stability audits and teacher-agreement metrics.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::builder::{build_tree, BuildConfig};
use crate::error::Result;
use crate::forest::ForestModel;
use crate::model::{ApproxTree, Dataset, DEFAULT_FINGERPRINT_PRECISION};
use crate::util::mix_seed;

/// Distinct-structure counts per requested depth over repeated rebuilds
/// against one fixed teacher.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub replications: usize,
    /// depth -> (distinct structure count, occurrence histogram sorted
    /// descending).
    pub per_depth: Vec<DepthStability>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthStability {
    pub depth: usize,
    pub distinct: usize,
    pub histogram: Vec<usize>,
}

impl StabilityReport {
    /// Occurrence count of the most frequent structure at `depth`.
    pub fn dominant_count(&self, depth: usize) -> Option<usize> {
        self.per_depth
            .iter()
            .find(|d| d.depth == depth)
            .and_then(|d| d.histogram.first().copied())
    }

    pub fn distinct_at(&self, depth: usize) -> Option<usize> {
        self.per_depth.iter().find(|d| d.depth == depth).map(|d| d.distinct)
    }

    /// Plain-text table: one row per depth with the distinct count and the
    /// top three occurrence counts.
    pub fn to_table(&self) -> String {
        let mut out = format!("replications: {}\n", self.replications);
        let _ = writeln!(out, "{:>6} {:>8} {:>12}", "depth", "#struct", "top 3 cnt");
        for d in &self.per_depth {
            let top: Vec<String> =
                d.histogram.iter().take(3).map(|c| c.to_string()).collect();
            let _ = writeln!(out, "{:>6} {:>8} {:>12}", d.depth, d.distinct, top.join(", "));
        }
        out
    }
}

/// How closely the distilled tree tracks its teacher on evaluation points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgreementReport {
    /// Fraction of points where tree and teacher pick the same class.
    pub class_agreement: f64,
    /// Mean L1 distance between predicted class-probability vectors.
    pub l1_prob_distance: f64,
    pub evaluation_n: usize,
}

/// Rebuild the approximation tree `replications` times with distinct seeds
/// against the same fixed teacher and count distinct structures at each
/// requested depth.
pub fn stability_audit(
    teacher: &ForestModel,
    data: &Dataset,
    cfg: &BuildConfig,
    replications: usize,
    depths: &[usize],
) -> Result<StabilityReport> {
    assert!(replications >= 2, "need at least two replications");
    let base_seed = cfg.sampler.seed;
    let trees: Vec<ApproxTree> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let run_cfg = cfg.clone().with_seed(mix_seed(base_seed, 0xa0d1_7000 + r as u64));
            build_tree(data, teacher, &run_cfg).map(|(tree, _)| tree)
        })
        .collect::<Result<_>>()?;

    let per_depth = depths
        .iter()
        .map(|&depth| {
            let mut counts: HashMap<Vec<u8>, usize> = HashMap::new();
            for tree in &trees {
                *counts
                    .entry(tree.fingerprint(depth, DEFAULT_FINGERPRINT_PRECISION))
                    .or_default() += 1;
            }
            let mut histogram: Vec<usize> = counts.values().copied().collect();
            histogram.sort_unstable_by(|a, b| b.cmp(a));
            DepthStability { depth, distinct: counts.len(), histogram }
        })
        .collect();

    Ok(StabilityReport { replications, per_depth })
}

/// Class agreement and mean L1 probability distance between tree and
/// teacher over the given evaluation points.
pub fn agreement(
    tree: &ApproxTree,
    teacher: &ForestModel,
    eval_points: &[Vec<f64>],
) -> Result<AgreementReport> {
    let mut matches = 0usize;
    let mut l1_sum = 0.0;
    for x in eval_points {
        let tree_dist = tree.predict(x);
        let teacher_dist = teacher.predict_proba(x)?;
        if tree_dist.argmax() == teacher_dist.argmax() {
            matches += 1;
        }
        l1_sum += tree_dist.l1_distance(&teacher_dist);
    }
    let n = eval_points.len();
    Ok(AgreementReport {
        class_agreement: matches as f64 / n as f64,
        l1_prob_distance: l1_sum / n as f64,
        evaluation_n: n,
    })
}
