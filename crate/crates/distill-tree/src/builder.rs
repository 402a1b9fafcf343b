//! Recursive stabilized tree construction.
//!
//! Candidate splits come from midpoints of adjacent distinct values of the
//! original training rows inside each node region, never from pseudo
//! samples. Each split is selected by the stabilizer; stopping combines a
//! depth cap, a minimum original-row support, and an optional
//! teacher-is-constant gate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{default_channel, ForestModel};
use crate::model::{
    ApproxTree, ClassDistribution, ColumnKind, Dataset, NodeAnnotation, Region, Side, SplitCut,
    SplitRule, TreeNode,
};
use crate::node_test::{test_node, NodeTestConfig};
use crate::sampler::{draw_pseudo, SamplerConfig, SoftSample};
use crate::stabilizer::{
    one_shot_verdict, select_split, RoundRecord, SplitMode, StabilizerConfig, TestVerdict,
};
use crate::util::mix_seed;

/// A candidate split plus the number of in-node training rows carrying the
/// two adjacent values that define its midpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSplit {
    pub rule: SplitRule,
    pub source_count: usize,
}

/// Behavior of the teacher-is-constant gate during construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopGate {
    /// No node tests.
    Off,
    /// Annotate every split node with its p-value but never truncate.
    Annotate,
    /// Stop splitting when the averaged p-value reaches the threshold.
    Enforce { threshold: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildConfig {
    /// Maximum layers including the root.
    pub max_depth: usize,
    /// Minimum original training rows in a node to attempt a split.
    pub min_support: usize,
    pub stabilizer: StabilizerConfig,
    pub sampler: SamplerConfig,
    /// One-shot root batch size as a multiple of the training sample size.
    pub one_shot_multiplier: f64,
    pub stop_gate: StopGate,
    pub node_test: NodeTestConfig,
}

impl BuildConfig {
    pub fn new(max_depth: usize) -> Self {
        Self {
            max_depth,
            min_support: 10,
            stabilizer: StabilizerConfig::default(),
            sampler: SamplerConfig::default(),
            one_shot_multiplier: 9.0,
            stop_gate: StopGate::Annotate,
            node_test: NodeTestConfig::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.sampler.seed = seed;
        self.node_test.seed = mix_seed(seed, 0x5eed);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.max_depth < 1 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if !(self.stabilizer.alpha > 0.0 && self.stabilizer.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        if let StopGate::Enforce { threshold } = self.stop_gate {
            if !(threshold > 0.0 && threshold < 1.0) {
                return Err(Error::InvalidConfig("stop threshold must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// Why a node became a leaf, or that it split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOutcome {
    Split,
    MaxDepth,
    NoValidSplit,
    InsufficientSupport,
    StopGate,
    NoPseudoSupport,
}

/// One JSON-lines record per constructed node.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeLogRecord {
    pub node_id: usize,
    pub depth: usize,
    pub support: usize,
    pub outcome: NodeOutcome,
    pub n_candidates: usize,
    pub rounds: Vec<RoundRecord>,
    pub verdict: Option<TestVerdict>,
    pub stop_pvalue: Option<f64>,
}

/// Enumerate candidate splits from the original data restricted to `region`.
///
/// Continuous covariates yield midpoints of adjacent distinct in-region
/// values; categorical covariates yield cuts between adjacent present
/// levels. The candidate set never depends on pseudo samples.
pub fn enumerate_candidates(data: &Dataset, region: &Region) -> Result<Vec<CandidateSplit>> {
    let support = data.rows_in_region(region);
    if support.len() < 2 {
        return Err(Error::NoValidSplit);
    }
    let mut out = Vec::new();
    for j in 0..data.schema().len() {
        let mut values: Vec<f64> = support.iter().map(|&i| data.row(i)[j]).collect();
        values.sort_by(f64::total_cmp);

        // (value, multiplicity) runs
        let mut runs: Vec<(f64, usize)> = Vec::new();
        for v in values {
            match runs.last_mut() {
                Some((last, c)) if *last == v => *c += 1,
                _ => runs.push((v, 1)),
            }
        }
        let categorical = matches!(data.schema().column(j).kind, ColumnKind::Categorical { .. });
        for w in runs.windows(2) {
            let ((a, ca), (b, cb)) = (w[0], w[1]);
            let cut = if categorical {
                SplitCut::LevelCut(a as usize)
            } else {
                SplitCut::Threshold(0.5 * (a + b))
            };
            out.push(CandidateSplit {
                rule: SplitRule { covariate: j, cut },
                source_count: ca + cb,
            });
        }
    }
    if out.is_empty() {
        return Err(Error::NoValidSplit);
    }
    Ok(out)
}

/// Build a stabilized approximation tree of the teacher.
pub fn build_tree(
    data: &Dataset,
    teacher: &ForestModel,
    cfg: &BuildConfig,
) -> Result<(ApproxTree, Vec<NodeLogRecord>)> {
    cfg.validate()?;
    let root_region = Region::full(data.schema());
    let root_batch = match cfg.stabilizer.mode {
        SplitMode::OneShot => {
            let size = ((cfg.one_shot_multiplier * data.n() as f64).ceil() as usize).max(1);
            draw_pseudo(data, &root_region, teacher, size, &cfg.sampler)?
        }
        SplitMode::Adaptive => Vec::new(),
    };

    let mut builder = Builder { data, teacher, cfg, nodes: Vec::new(), log: Vec::new() };
    builder.grow(root_region, 1, root_batch, None)?;
    Ok((ApproxTree::new(builder.nodes, data.k()), builder.log))
}

struct Builder<'a> {
    data: &'a Dataset,
    teacher: &'a ForestModel,
    cfg: &'a BuildConfig,
    nodes: Vec<TreeNode>,
    log: Vec<NodeLogRecord>,
}

impl Builder<'_> {
    fn grow(
        &mut self,
        region: Region,
        depth: usize,
        inherited: Vec<SoftSample>,
        parent_estimate: Option<&ClassDistribution>,
    ) -> Result<usize> {
        let cfg = self.cfg;
        let id = self.nodes.len();
        let support = self.data.rows_in_region(&region);
        let node_seed = mix_seed(cfg.sampler.seed, id as u64 + 1);

        let stop_pvalue = if cfg.stop_gate != StopGate::Off && !support.is_empty() {
            let channel = self.node_channel(&region, &inherited)?;
            let test_cfg =
                NodeTestConfig { seed: mix_seed(cfg.node_test.seed, id as u64), ..cfg.node_test.clone() };
            Some(
                test_node(self.teacher, self.data, &region, &cfg.sampler, &test_cfg, channel)?
                    .averaged_p,
            )
        } else {
            None
        };

        let gate_stops = match cfg.stop_gate {
            StopGate::Enforce { threshold } => stop_pvalue.is_some_and(|p| p >= threshold),
            _ => false,
        };

        let leaf_outcome = if depth >= cfg.max_depth {
            Some(NodeOutcome::MaxDepth)
        } else if support.len() < cfg.min_support {
            Some(NodeOutcome::InsufficientSupport)
        } else if gate_stops {
            Some(NodeOutcome::StopGate)
        } else {
            None
        };

        if let Some(outcome) = leaf_outcome {
            return self.finish_leaf(region, depth, inherited, parent_estimate, outcome, stop_pvalue, node_seed);
        }

        let candidates = match enumerate_candidates(self.data, &region) {
            Ok(c) => c,
            Err(Error::NoValidSplit) => {
                return self.finish_leaf(
                    region,
                    depth,
                    inherited,
                    parent_estimate,
                    NodeOutcome::NoValidSplit,
                    stop_pvalue,
                    node_seed,
                )
            }
            Err(e) => return Err(e),
        };
        let rules: Vec<SplitRule> = candidates.iter().map(|c| c.rule).collect();

        let (verdict, batch, rounds) = match cfg.stabilizer.mode {
            SplitMode::Adaptive => {
                let sampler = cfg.sampler.with_seed(node_seed);
                select_split(&rules, &region, self.data, self.teacher, &sampler, &cfg.stabilizer)?
            }
            SplitMode::OneShot => {
                if inherited.is_empty() {
                    return self.finish_leaf(
                        region,
                        depth,
                        inherited,
                        parent_estimate,
                        NodeOutcome::NoPseudoSupport,
                        stop_pvalue,
                        node_seed,
                    );
                }
                let verdict = one_shot_verdict(&inherited, &rules)?;
                (verdict, inherited, Vec::new())
            }
        };

        let rule = rules[verdict.winner];
        let class_estimate =
            ClassDistribution::mean(batch.iter().map(|s| &s.y), self.data.k());
        let left_region = region.refine(&rule, Side::Left)?;
        let right_region = region.refine(&rule, Side::Right)?;

        self.nodes.push(TreeNode {
            rule: Some(rule),
            children: None,
            region,
            depth,
            stat: NodeAnnotation {
                pseudo_samples_used: verdict.n_used,
                split_pvalue: Some(verdict.aggregated_p),
                stop_pvalue,
                capped: verdict.capped,
                class_estimate: class_estimate.clone(),
            },
        });
        self.log.push(NodeLogRecord {
            node_id: id,
            depth,
            support: support.len(),
            outcome: NodeOutcome::Split,
            n_candidates: rules.len(),
            rounds,
            verdict: Some(verdict),
            stop_pvalue,
        });

        let (left_batch, right_batch): (Vec<SoftSample>, Vec<SoftSample>) =
            batch.into_iter().partition(|s| !rule.goes_right(&s.x));
        let left = self.grow(left_region, depth + 1, left_batch, Some(&class_estimate))?;
        let right = self.grow(right_region, depth + 1, right_batch, Some(&class_estimate))?;
        self.nodes[id].children = Some((left, right));
        Ok(id)
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_leaf(
        &mut self,
        region: Region,
        depth: usize,
        inherited: Vec<SoftSample>,
        parent_estimate: Option<&ClassDistribution>,
        outcome: NodeOutcome,
        stop_pvalue: Option<f64>,
        node_seed: u64,
    ) -> Result<usize> {
        let id = self.nodes.len();
        let support = self.data.rows_in_region(&region);

        // Leaves estimate their class distribution from the pseudo batch that
        // reached them; adaptive leaves with no inherited samples draw a
        // fresh batch when the region still has original support.
        let batch = if !inherited.is_empty() {
            inherited
        } else if !support.is_empty() && self.cfg.stabilizer.mode == SplitMode::Adaptive {
            let sampler = self.cfg.sampler.with_seed(node_seed);
            draw_pseudo(self.data, &region, self.teacher, self.cfg.stabilizer.n_init, &sampler)?
        } else {
            Vec::new()
        };

        let class_estimate = if batch.is_empty() {
            parent_estimate
                .cloned()
                .unwrap_or_else(|| ClassDistribution::uniform(self.data.k()))
        } else {
            ClassDistribution::mean(batch.iter().map(|s| &s.y), self.data.k())
        };

        self.nodes.push(TreeNode {
            rule: None,
            children: None,
            region,
            depth,
            stat: NodeAnnotation {
                pseudo_samples_used: batch.len(),
                split_pvalue: None,
                stop_pvalue,
                capped: false,
                class_estimate,
            },
        });
        self.log.push(NodeLogRecord {
            node_id: id,
            depth,
            support: support.len(),
            outcome,
            n_candidates: 0,
            rounds: Vec::new(),
            verdict: None,
            stop_pvalue,
        });
        Ok(id)
    }

    /// Scalar teacher channel for the stopping test: class 1 for binary,
    /// otherwise the teacher's majority class over the node's support.
    fn node_channel(&self, region: &Region, inherited: &[SoftSample]) -> Result<usize> {
        let k = self.data.k();
        if k == 2 {
            return Ok(default_channel(k));
        }
        if !inherited.is_empty() {
            return Ok(ClassDistribution::mean(inherited.iter().map(|s| &s.y), k).argmax());
        }
        let support = self.data.rows_in_region(region);
        let dists: Vec<ClassDistribution> = support
            .iter()
            .take(64)
            .map(|&i| self.teacher.predict_proba(self.data.row(i)))
            .collect::<Result<_>>()?;
        Ok(ClassDistribution::mean(dists.iter(), k).argmax())
    }
}

/// Serialize build-log records as JSON lines.
pub fn log_to_jsonl(log: &[NodeLogRecord]) -> Result<String> {
    let mut out = String::new();
    for record in log {
        out.push_str(&serde_json::to_string(record)?);
        out.push('\n');
    }
    Ok(out)
}
