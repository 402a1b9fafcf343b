use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{ClassDistribution, CovariateSchema, Region, SplitCut, SplitRule};
use crate::error::Result;

/// Decimal digits kept when rounding thresholds into a structure fingerprint.
pub const DEFAULT_FINGERPRINT_PRECISION: usize = 10;

/// Statistical evidence attached to each node during construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NodeAnnotation {
    pub pseudo_samples_used: usize,
    /// Aggregated familywise p-value of the chosen split (internal nodes).
    pub split_pvalue: Option<f64>,
    /// Averaged p-value of the teacher-is-constant test, when run.
    pub stop_pvalue: Option<f64>,
    /// Whether split selection halted at the pseudo-sample cap.
    pub capped: bool,
    pub class_estimate: ClassDistribution,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub rule: Option<SplitRule>,
    /// Arena indices of (left, right) children.
    pub children: Option<(usize, usize)>,
    pub region: Region,
    pub depth: usize,
    pub stat: NodeAnnotation,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

/// The distilled tree, stored as a node arena with the root at index 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApproxTree {
    nodes: Vec<TreeNode>,
    k: usize,
}

impl ApproxTree {
    pub fn new(nodes: Vec<TreeNode>, k: usize) -> Self {
        assert!(!nodes.is_empty(), "tree needs at least a root");
        Self { nodes, k }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(1)
    }

    /// Route a point to its leaf and return that leaf's class estimate.
    pub fn predict(&self, x: &[f64]) -> &ClassDistribution {
        let mut i = 0;
        while let (Some(rule), Some((l, r))) = (&self.nodes[i].rule, self.nodes[i].children) {
            i = if rule.goes_right(x) { r } else { l };
        }
        &self.nodes[i].stat.class_estimate
    }

    /// Canonical byte string identifying the tree structure down to `depth`
    /// layers (root = layer 1). Thresholds are rounded to `precision` decimal
    /// digits; trees compare structurally equal iff fingerprints are
    /// byte-equal.
    pub fn fingerprint(&self, depth: usize, precision: usize) -> Vec<u8> {
        assert!(depth >= 1);
        let mut out = String::new();
        let mut frontier: VecDeque<Option<usize>> = VecDeque::from([Some(0)]);
        for layer in 0..depth {
            if frontier.iter().all(Option::is_none) {
                break;
            }
            if layer > 0 {
                out.push('|');
            }
            let mut next = VecDeque::new();
            for slot in frontier {
                match slot {
                    Some(i) => {
                        let node = &self.nodes[i];
                        match (&node.rule, node.children) {
                            (Some(rule), Some((l, r))) => {
                                match rule.cut {
                                    SplitCut::Threshold(t) => {
                                        let _ = write!(out, "{}:{:.*};", rule.covariate, precision, t);
                                    }
                                    SplitCut::LevelCut(c) => {
                                        let _ = write!(out, "{}:#{};", rule.covariate, c);
                                    }
                                }
                                next.push_back(Some(l));
                                next.push_back(Some(r));
                            }
                            _ => {
                                out.push_str("L;");
                                next.push_back(None);
                                next.push_back(None);
                            }
                        }
                    }
                    None => {
                        out.push_str("_;");
                        next.push_back(None);
                        next.push_back(None);
                    }
                }
            }
            frontier = next;
        }
        out.into_bytes()
    }

    /// Overwrite a node's stopping-test p-value (used when re-annotating a
    /// built tree).
    pub fn set_stop_pvalue(&mut self, id: usize, p: f64) {
        self.nodes[id].stat.stop_pvalue = Some(p);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Graphviz rendering: internal nodes show their rule and p-values,
    /// leaves show the class estimate.
    pub fn to_dot(&self, schema: &CovariateSchema) -> String {
        let mut out = String::from("digraph approx_tree {\n  node [fontname=\"Helvetica\"];\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let mut label = match &node.rule {
                Some(rule) => format!("{}\\n", rule.describe(schema)),
                None => String::new(),
            };
            if let Some(p) = node.stat.split_pvalue {
                // .max(0.0) normalizes negative zero out of the label
                let _ = write!(label, "split p = {:.3e}\\n", p.max(0.0));
            }
            if let Some(p) = node.stat.stop_pvalue {
                let _ = write!(label, "stop p = {:.3e}\\n", p.max(0.0));
            }
            let probs: Vec<String> =
                node.stat.class_estimate.probs().iter().map(|p| format!("{p:.3}")).collect();
            let _ = write!(label, "[{}]\\nn_ps = {}", probs.join(", "), node.stat.pseudo_samples_used);
            let shape = if node.is_leaf() { "box" } else { "ellipse" };
            let _ = writeln!(out, "  n{i} [shape={shape}, label=\"{label}\"];");
        }
        for (i, node) in self.nodes.iter().enumerate() {
            if let Some((l, r)) = node.children {
                let _ = writeln!(out, "  n{i} -> n{l} [label=\"no\"];");
                let _ = writeln!(out, "  n{i} -> n{r} [label=\"yes\"];");
            }
        }
        out.push_str("}\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Column, ColumnKind, Side};

    fn leaf_stat(k: usize) -> NodeAnnotation {
        NodeAnnotation {
            pseudo_samples_used: 0,
            split_pvalue: None,
            stop_pvalue: None,
            capped: false,
            class_estimate: ClassDistribution::uniform(k),
        }
    }

    fn schema2d() -> CovariateSchema {
        CovariateSchema::new(vec![
            Column { name: "x1".into(), kind: ColumnKind::Continuous { min: 0.0, max: 1.0 } },
            Column { name: "x2".into(), kind: ColumnKind::Continuous { min: 0.0, max: 1.0 } },
        ])
        .unwrap()
    }

    fn stump(threshold: f64) -> ApproxTree {
        let schema = schema2d();
        let region = Region::full(&schema);
        let rule = SplitRule { covariate: 0, cut: SplitCut::Threshold(threshold) };
        let left = region.refine(&rule, Side::Left).unwrap();
        let right = region.refine(&rule, Side::Right).unwrap();
        ApproxTree::new(
            vec![
                TreeNode { rule: Some(rule), children: Some((1, 2)), region, depth: 1, stat: leaf_stat(2) },
                TreeNode { rule: None, children: None, region: left, depth: 2, stat: leaf_stat(2) },
                TreeNode { rule: None, children: None, region: right, depth: 2, stat: leaf_stat(2) },
            ],
            2,
        )
    }

    #[test]
    fn identical_trees_share_fingerprints() {
        let a = stump(0.5);
        let b = stump(0.5);
        assert_eq!(a.fingerprint(4, 10), b.fingerprint(4, 10));
    }

    #[test]
    fn threshold_difference_beyond_precision_distinguishes() {
        let a = stump(0.5);
        let b = stump(0.5 + 1e-6);
        assert_ne!(a.fingerprint(4, 10), b.fingerprint(4, 10));
        // within rounding precision the two collapse
        let c = stump(0.5 + 1e-12);
        assert_eq!(a.fingerprint(4, 10), c.fingerprint(4, 10));
    }

    #[test]
    fn single_leaf_fingerprint_is_depth_independent() {
        let schema = schema2d();
        let tree = ApproxTree::new(
            vec![TreeNode {
                rule: None,
                children: None,
                region: Region::full(&schema),
                depth: 1,
                stat: leaf_stat(2),
            }],
            2,
        );
        assert_eq!(tree.fingerprint(1, 10), b"L;".to_vec());
        assert_eq!(tree.fingerprint(5, 10), b"L;".to_vec());
    }

    #[test]
    fn predict_routes_by_rule() {
        let tree = stump(0.5);
        // both leaves are uniform here; just check routing terminates
        assert_eq!(tree.predict(&[0.2, 0.9]).k(), 2);
        let json = tree.to_json().unwrap();
        let back = ApproxTree::from_json(&json).unwrap();
        assert_eq!(back.fingerprint(4, 10), tree.fingerprint(4, 10));
    }
}
