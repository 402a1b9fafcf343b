//! Subsampled random-forest teacher.
//!
//! Trees are standard CART grown on hard labels over subsamples drawn
//! without replacement. The per-tree subsample membership is retained so the
//! infinitesimal-jackknife covariance of forest predictions can be estimated
//! after fitting.

use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassDistribution, CovariateSchema, Dataset, SplitCut};
use crate::util::mix_seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestConfig {
    /// Number of trees.
    pub m_n: usize,
    /// Subsample size per tree, drawn without replacement.
    pub k_n: usize,
    /// Candidate covariates considered per split.
    pub mtry: usize,
    /// Minimum samples in a leaf.
    pub min_leaf: usize,
    pub seed: u64,
}

impl ForestConfig {
    /// Standard defaults: mtry = ceil(sqrt(m)), min_leaf = 5, k_n = n / 5.
    pub fn default_for(n: usize, m: usize, seed: u64) -> Self {
        Self {
            m_n: 100,
            k_n: (n / 5).max(2),
            mtry: (m as f64).sqrt().ceil() as usize,
            min_leaf: 5,
            seed,
        }
    }

    fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.k_n >= n {
            return Err(Error::DatasetTooSmall { n, k_n: self.k_n });
        }
        if self.m_n == 0 || self.mtry == 0 || self.mtry > m || self.min_leaf == 0 {
            return Err(Error::InvalidConfig("invalid forest configuration".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CartNode {
    covariate: usize,
    cut: SplitCut,
    children: Option<(usize, usize)>,
    /// Class counts of subsample rows in this node, turned into a
    /// distribution at prediction time.
    probs: Vec<f64>,
}

/// One Gini-grown classification tree over a subsample.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CartTree {
    nodes: Vec<CartNode>,
}

impl CartTree {
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut i = 0;
        while let Some((l, r)) = self.nodes[i].children {
            let node = &self.nodes[i];
            let right = match node.cut {
                SplitCut::Threshold(t) => x[node.covariate] > t,
                SplitCut::LevelCut(c) => x[node.covariate] as usize > c,
            };
            i = if right { r } else { l };
        }
        &self.nodes[i].probs
    }
}

/// A fitted subsampled forest with per-tree subsample bookkeeping.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    format_version: u32,
    trees: Vec<CartTree>,
    /// Row indices of each tree's subsample; each has exactly `k_n` entries.
    subsamples: Vec<Vec<u32>>,
    pub config: ForestConfig,
    pub schema: CovariateSchema,
    pub k: usize,
    /// Size of the training sample the forest was fitted on.
    pub n_train: usize,
}

/// Covariance estimates of the forest prediction channel at a set of query
/// points.
///
/// The asymptotic covariance decomposes as (k_n^2/n) zeta_1 + (1/m_n)
/// zeta_kk in terms of the true tree covariances. The infinitesimal
/// jackknife Gram in `zeta1` already estimates the full first term — its
/// per-row covariances carry a k_n/n membership factor each — so the
/// combination is tau2 = zeta1 + (1/m_n) zetakk. (Scaling the Gram by a
/// further k_n^2/n deflates the stopping statistic by that factor and
/// drives the test's power to zero at practical sizes.)
#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub zeta1: DMatrix<f64>,
    pub zetakk: DMatrix<f64>,
    pub tau2: DMatrix<f64>,
    pub query_points: Vec<Vec<f64>>,
    /// The class whose predicted probability is the scalar channel.
    pub channel: usize,
}

/// Default scalar channel tested for a k-class forest: class 1 for binary
/// problems, otherwise the caller supplies the majority class of the node.
pub fn default_channel(k: usize) -> usize {
    if k == 2 {
        1
    } else {
        0
    }
}

pub fn fit_forest(data: &Dataset, cfg: &ForestConfig) -> Result<ForestModel> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::InvalidConfig("fit_forest needs a labeled dataset".into()))?;
    cfg.validate(data.n(), data.schema().len())?;

    let fitted: Vec<(CartTree, Vec<u32>)> = (0..cfg.m_n)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, b as u64));
            let mut subsample: Vec<u32> =
                sample(&mut rng, data.n(), cfg.k_n).iter().map(|i| i as u32).collect();
            subsample.sort_unstable();
            let tree = grow_tree(data, labels, &subsample, cfg, &mut rng);
            (tree, subsample)
        })
        .collect();

    let (trees, subsamples) = fitted.into_iter().unzip();
    Ok(ForestModel {
        format_version: 1,
        trees,
        subsamples,
        config: cfg.clone(),
        schema: data.schema().clone(),
        k: data.k(),
        n_train: data.n(),
    })
}

fn grow_tree(
    data: &Dataset,
    labels: &[usize],
    subsample: &[u32],
    cfg: &ForestConfig,
    rng: &mut ChaCha8Rng,
) -> CartTree {
    let mut nodes = Vec::new();
    let rows: Vec<u32> = subsample.to_vec();
    grow_node(data, labels, rows, cfg, rng, &mut nodes);
    CartTree { nodes }
}

fn class_counts(labels: &[usize], rows: &[u32], k: usize) -> Vec<f64> {
    let mut counts = vec![0.0; k];
    for &i in rows {
        counts[labels[i as usize]] += 1.0;
    }
    counts
}

fn grow_node(
    data: &Dataset,
    labels: &[usize],
    rows: Vec<u32>,
    cfg: &ForestConfig,
    rng: &mut ChaCha8Rng,
    nodes: &mut Vec<CartNode>,
) -> usize {
    let k = data.k();
    let counts = class_counts(labels, &rows, k);
    let probs = ClassDistribution::from_weights(&counts).probs().to_vec();
    let id = nodes.len();
    nodes.push(CartNode { covariate: 0, cut: SplitCut::Threshold(0.0), children: None, probs });

    let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
    if pure || rows.len() < 2 * cfg.min_leaf {
        return id;
    }

    let m = data.schema().len();
    let mut covariates: Vec<usize> = (0..m).collect();
    covariates.shuffle(rng);
    covariates.truncate(cfg.mtry);

    let best = covariates
        .iter()
        .filter_map(|&j| best_cut(data, labels, &rows, j, cfg.min_leaf).map(|(c, s)| (j, c, s)))
        .min_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));

    let Some((covariate, cut, _)) = best else { return id };

    let (left_rows, right_rows): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(|&i| {
        let v = data.row(i as usize)[covariate];
        match cut {
            SplitCut::Threshold(t) => v <= t,
            SplitCut::LevelCut(c) => v as usize <= c,
        }
    });

    let l = grow_node(data, labels, left_rows, cfg, rng, nodes);
    let r = grow_node(data, labels, right_rows, cfg, rng, nodes);
    nodes[id].covariate = covariate;
    nodes[id].cut = cut;
    nodes[id].children = Some((l, r));
    id
}

/// Minimum weighted child Gini over all midpoint cuts of covariate `j`,
/// honoring the min_leaf constraint. Returns None when no valid cut exists.
fn best_cut(
    data: &Dataset,
    labels: &[usize],
    rows: &[u32],
    j: usize,
    min_leaf: usize,
) -> Option<(SplitCut, f64)> {
    let k = data.k();
    let n = rows.len();
    let mut order: Vec<u32> = rows.to_vec();
    order.sort_by(|&a, &b| data.row(a as usize)[j].total_cmp(&data.row(b as usize)[j]));

    let mut left = vec![0.0f64; k];
    let mut right = class_counts(labels, rows, k);
    let mut best: Option<(SplitCut, f64)> = None;
    let categorical = matches!(
        data.schema().column(j).kind,
        crate::model::ColumnKind::Categorical { .. }
    );

    for (pos, &i) in order.iter().enumerate().take(n - 1) {
        let c = labels[i as usize];
        left[c] += 1.0;
        right[c] -= 1.0;
        let v = data.row(i as usize)[j];
        let v_next = data.row(order[pos + 1] as usize)[j];
        if v == v_next {
            continue;
        }
        let n_l = pos + 1;
        let n_r = n - n_l;
        if n_l < min_leaf || n_r < min_leaf {
            continue;
        }
        let gini = |counts: &[f64], total: f64| {
            1.0 - counts.iter().map(|c| (c / total) * (c / total)).sum::<f64>()
        };
        let score = (n_l as f64 * gini(&left, n_l as f64) + n_r as f64 * gini(&right, n_r as f64))
            / n as f64;
        let cut = if categorical {
            SplitCut::LevelCut(v as usize)
        } else {
            SplitCut::Threshold(0.5 * (v + v_next))
        };
        if best.as_ref().map_or(true, |(_, s)| score < *s) {
            best = Some((cut, score));
        }
    }
    best
}

impl ForestModel {
    pub fn m_n(&self) -> usize {
        self.trees.len()
    }

    pub fn subsamples(&self) -> &[Vec<u32>] {
        &self.subsamples
    }

    /// Average of per-tree class distributions at `x`.
    pub fn predict_proba(&self, x: &[f64]) -> Result<ClassDistribution> {
        self.schema.check_point(x)?;
        let mut acc = vec![0.0; self.k];
        for tree in &self.trees {
            for (a, p) in acc.iter_mut().zip(tree.predict(x)) {
                *a += p;
            }
        }
        let m = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= m);
        ClassDistribution::new(acc)
    }

    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax())
    }

    /// Per-tree channel values at the query points: entry (b, j) is tree b's
    /// predicted probability of class `channel` at point j.
    pub fn per_tree_predictions(&self, points: &[Vec<f64>], channel: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.trees.len(), points.len(), |b, j| {
            self.trees[b].predict(&points[j])[channel]
        })
    }

    /// Infinitesimal-jackknife estimate of zeta_{1,k_n} at the query points.
    ///
    /// C^i_k is the covariance, over trees, between the channel value at
    /// point k and the subsample-membership indicator of row i, with the
    /// population (1/m_n) normalization; the estimate is the Gram matrix
    /// sum_i C^i C^i^T.
    pub fn estimate_zeta1(&self, points: &[Vec<f64>], channel: usize) -> DMatrix<f64> {
        let m_n = self.trees.len();
        let q = points.len();
        let n = self.n_train;
        let preds = self.per_tree_predictions(points, channel);
        let tree_means: Vec<f64> = (0..q).map(|k| preds.column(k).mean()).collect();

        // sum over trees containing row i of the tree's channel value
        let mut member_sums = DMatrix::<f64>::zeros(n, q);
        let mut member_counts = vec![0.0f64; n];
        for (b, sub) in self.subsamples.iter().enumerate() {
            for &i in sub {
                let i = i as usize;
                member_counts[i] += 1.0;
                for k in 0..q {
                    member_sums[(i, k)] += preds[(b, k)];
                }
            }
        }

        let mut c = DMatrix::<f64>::zeros(n, q);
        for i in 0..n {
            let mean_membership = member_counts[i] / m_n as f64;
            for k in 0..q {
                c[(i, k)] = member_sums[(i, k)] / m_n as f64 - tree_means[k] * mean_membership;
            }
        }
        c.transpose() * c
    }

    /// Empirical covariance of per-tree channel values (population
    /// normalization): the zeta_{k_n,k_n} estimate.
    pub fn estimate_zetakk(&self, points: &[Vec<f64>], channel: usize) -> DMatrix<f64> {
        let m_n = self.trees.len();
        let preds = self.per_tree_predictions(points, channel);
        let means: Vec<f64> = (0..points.len()).map(|k| preds.column(k).mean()).collect();
        let mut centered = preds;
        for k in 0..points.len() {
            centered.column_mut(k).add_scalar_mut(-means[k]);
        }
        (centered.transpose() * centered) / m_n as f64
    }

    /// Combined asymptotic covariance of the forest channel at the points.
    pub fn forest_covariance(&self, points: &[Vec<f64>], channel: usize) -> CovarianceEstimate {
        let zeta1 = self.estimate_zeta1(points, channel);
        let zetakk = self.estimate_zetakk(points, channel);
        let tau2 = &zeta1 + &zetakk * (1.0 / self.trees.len() as f64);
        CovarianceEstimate { zeta1, zetakk, tau2, query_points: points.to_vec(), channel }
    }

    /// Fraction of labeled rows whose predicted class matches the label.
    pub fn accuracy(&self, data: &Dataset) -> Result<f64> {
        let labels = data
            .labels()
            .ok_or_else(|| Error::InvalidConfig("accuracy needs labels".into()))?;
        let mut hits = 0usize;
        for (row, &label) in data.rows().iter().zip(labels) {
            if self.predict_class(row)? == label {
                hits += 1;
            }
        }
        Ok(hits as f64 / data.n() as f64)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, self)?;
        Ok(())
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::io::BufReader::new(std::fs::File::open(path)?);
        Ok(serde_json::from_reader(file)?)
    }
}

/// Draw `count` uniform points from the schema's declared ranges; categorical
/// covariates draw a uniform level. Used for evaluation grids.
pub fn uniform_points<R: Rng>(schema: &CovariateSchema, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| {
            schema
                .columns()
                .iter()
                .map(|c| match &c.kind {
                    crate::model::ColumnKind::Continuous { min, max } => {
                        rng.random_range(*min..=*max)
                    }
                    crate::model::ColumnKind::Categorical { levels } => {
                        rng.random_range(0..levels.len()) as f64
                    }
                })
                .collect()
        })
        .collect()
}
