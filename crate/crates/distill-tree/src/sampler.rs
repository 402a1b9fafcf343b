//! Pseudo-covariate generation.
//!
//! Samples are drawn from a kernel-smoothed empirical distribution of the
//! original rows that reached a node, constrained to the node's region, and
//! labeled with the teacher's predicted class probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::ForestModel;
use crate::model::{ClassDistribution, ColumnKind, Dataset, Dim, Region};

const REJECTION_LIMIT: usize = 1000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Gaussian kernel sd as a fraction of each covariate's declared range.
    pub bandwidth_fraction: f64,
    /// Probability of moving a categorical value to a neighboring level.
    pub jump_prob: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { bandwidth_fraction: 1.0 / 50.0, jump_prob: 1.0 / 7.0, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_fraction >= 0.0) || !(0.0..1.0).contains(&self.jump_prob) {
            return Err(Error::InvalidConfig("invalid sampler configuration".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// A pseudo covariate vector with its teacher soft label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SoftSample {
    pub x: Vec<f64>,
    pub y: ClassDistribution,
}

/// Draw `count` pseudo samples inside `region`, labeled by `teacher`.
///
/// Each draw perturbs a uniformly chosen in-region training row: continuous
/// coordinates get centered Gaussian noise with sd = bandwidth_fraction x
/// column range, categorical coordinates jump to an adjacent level with
/// probability jump_prob. A coordinate falling outside the region is
/// redrawn on its own; more than 1000 consecutive rejections on one
/// coordinate signal a degenerate sliver region.
pub fn draw_pseudo(
    data: &Dataset,
    region: &Region,
    teacher: &ForestModel,
    count: usize,
    cfg: &SamplerConfig,
) -> Result<Vec<SoftSample>> {
    cfg.validate()?;
    let support = data.rows_in_region(region);
    if support.is_empty() {
        return Err(Error::EmptyNodeSupport);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let base = data.row(support[rng.random_range(0..support.len())]);
        let x = perturb_row(data, region, base, cfg, &mut rng)?;
        let y = teacher.predict_proba(&x)?;
        out.push(SoftSample { x, y });
    }
    Ok(out)
}

fn perturb_row(
    data: &Dataset,
    region: &Region,
    base: &[f64],
    cfg: &SamplerConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let schema = data.schema();
    let mut x = Vec::with_capacity(base.len());
    for (j, &v) in base.iter().enumerate() {
        let value = match (&schema.column(j).kind, region.dim(j)) {
            (ColumnKind::Continuous { .. }, dim) => {
                let sd = cfg.bandwidth_fraction * schema.range_width(j);
                resample_coordinate(
                    rng,
                    |r: &mut ChaCha8Rng| v + sd * r.sample::<f64, _>(StandardNormal),
                    dim,
                )?
            }
            (ColumnKind::Categorical { levels }, dim) => {
                let n_levels = levels.len();
                resample_coordinate(
                    rng,
                    |r: &mut ChaCha8Rng| jump_level(v as usize, n_levels, cfg.jump_prob, r) as f64,
                    dim,
                )?
            }
        };
        x.push(value);
    }
    Ok(x)
}

// Per-coordinate rejection: redraw only the offending coordinate so the
// other coordinates keep their smoothed-empirical distribution.
fn resample_coordinate<F>(rng: &mut ChaCha8Rng, mut draw: F, dim: &Dim) -> Result<f64>
where
    F: FnMut(&mut ChaCha8Rng) -> f64,
{
    for _ in 0..REJECTION_LIMIT {
        let v = draw(rng);
        if dim_contains(dim, v) {
            return Ok(v);
        }
    }
    Err(Error::RejectionOverflow { limit: REJECTION_LIMIT })
}

fn dim_contains(dim: &Dim, v: f64) -> bool {
    match *dim {
        Dim::Continuous { lo, lo_strict, hi } => {
            (if lo_strict { v > lo } else { v >= lo }) && v <= hi
        }
        Dim::Categorical { lo, hi } => {
            let l = v as usize;
            l >= lo && l <= hi
        }
    }
}

/// Move to an adjacent level with probability `jump_prob`; interior levels
/// pick either neighbor with equal odds, endpoints have a single neighbor.
fn jump_level<R: Rng>(level: usize, n_levels: usize, jump_prob: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() >= jump_prob {
        return level;
    }
    if level == 0 {
        1
    } else if level == n_levels - 1 {
        level - 1
    } else if rng.random::<bool>() {
        level + 1
    } else {
        level - 1
    }
}
