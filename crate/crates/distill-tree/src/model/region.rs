use serde::{Deserialize, Serialize};

use super::{ColumnKind, CovariateSchema};
use crate::error::{Error, Result};

/// Where a split sends a point: `G(x) = 1` (value strictly greater than the
/// cut) routes right, ties route left.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Cut position of a split rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SplitCut {
    /// Continuous: right iff value > threshold.
    Threshold(f64),
    /// Categorical: right iff level index > cut, in schema level order.
    LevelCut(usize),
}

/// A single binary split rule on one covariate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub covariate: usize,
    pub cut: SplitCut,
}

impl SplitRule {
    pub fn goes_right(&self, x: &[f64]) -> bool {
        match self.cut {
            SplitCut::Threshold(t) => x[self.covariate] > t,
            SplitCut::LevelCut(c) => x[self.covariate] as usize > c,
        }
    }

    /// Lexicographic order on (covariate, cut) used for tie-breaking.
    pub fn lexicographic_key(&self) -> (usize, f64) {
        let c = match self.cut {
            SplitCut::Threshold(t) => t,
            SplitCut::LevelCut(l) => l as f64,
        };
        (self.covariate, c)
    }

    pub fn describe(&self, schema: &CovariateSchema) -> String {
        let col = schema.column(self.covariate);
        match self.cut {
            SplitCut::Threshold(t) => format!("{} > {:.6}", col.name, t),
            SplitCut::LevelCut(c) => match &col.kind {
                ColumnKind::Categorical { levels } => {
                    format!("{} > {}", col.name, levels[c])
                }
                ColumnKind::Continuous { .. } => format!("{} > level {}", col.name, c),
            },
        }
    }
}

/// One covariate's admissible range inside a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Dim {
    /// `lo < x <= hi` when `lo_strict`, else `lo <= x <= hi`.
    Continuous { lo: f64, lo_strict: bool, hi: f64 },
    /// Contiguous inclusive range of level indices.
    Categorical { lo: usize, hi: usize },
}

impl Dim {
    fn contains(&self, v: f64) -> bool {
        match *self {
            Dim::Continuous { lo, lo_strict, hi } => {
                (if lo_strict { v > lo } else { v >= lo }) && v <= hi
            }
            Dim::Categorical { lo, hi } => {
                let l = v as usize;
                l >= lo && l <= hi
            }
        }
    }
}

/// An axis-aligned subset of the covariate space, as carved out by the split
/// rules along a tree path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    dims: Vec<Dim>,
}

impl Region {
    /// The whole covariate space declared by the schema.
    pub fn full(schema: &CovariateSchema) -> Self {
        let dims = schema
            .columns()
            .iter()
            .map(|c| match &c.kind {
                ColumnKind::Continuous { min, max } => {
                    Dim::Continuous { lo: *min, lo_strict: false, hi: *max }
                }
                ColumnKind::Categorical { levels } => {
                    Dim::Categorical { lo: 0, hi: levels.len() - 1 }
                }
            })
            .collect();
        Self { dims }
    }

    pub fn dims(&self) -> &[Dim] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> &Dim {
        &self.dims[i]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dims.iter().zip(x).all(|(d, &v)| d.contains(v))
    }

    /// Cut this region at `rule` and keep the requested side.
    ///
    /// Left is the `G = 0` child (values <= cut), right the `G = 1` child.
    /// Fails when the cut would leave one child empty.
    pub fn refine(&self, rule: &SplitRule, side: Side) -> Result<Region> {
        let j = rule.covariate;
        if j >= self.dims.len() {
            return Err(Error::SchemaViolation(format!("covariate index {j} out of range")));
        }
        let mut dims = self.dims.clone();
        match (&self.dims[j], rule.cut) {
            (&Dim::Continuous { lo, lo_strict, hi }, SplitCut::Threshold(t)) => {
                if t <= lo || t >= hi {
                    return Err(Error::ThresholdOutsideRegion { covariate: j });
                }
                dims[j] = match side {
                    Side::Left => Dim::Continuous { lo, lo_strict, hi: t },
                    Side::Right => Dim::Continuous { lo: t, lo_strict: true, hi },
                };
            }
            (&Dim::Categorical { lo, hi }, SplitCut::LevelCut(c)) => {
                if c < lo || c >= hi {
                    return Err(Error::ThresholdOutsideRegion { covariate: j });
                }
                dims[j] = match side {
                    Side::Left => Dim::Categorical { lo, hi: c },
                    Side::Right => Dim::Categorical { lo: c + 1, hi },
                };
            }
            _ => {
                return Err(Error::SchemaViolation(format!(
                    "cut kind does not match column kind for covariate {j}"
                )))
            }
        }
        Ok(Region { dims })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Column;

    fn schema1d() -> CovariateSchema {
        CovariateSchema::new(vec![Column {
            name: "x1".into(),
            kind: ColumnKind::Continuous { min: 0.0, max: 1.0 },
        }])
        .unwrap()
    }

    #[test]
    fn continuous_cut_left() {
        let parent = Region::full(&schema1d());
        let rule = SplitRule { covariate: 0, cut: SplitCut::Threshold(0.5) };
        let left = parent.refine(&rule, Side::Left).unwrap();
        assert_eq!(left.dim(0), &Dim::Continuous { lo: 0.0, lo_strict: false, hi: 0.5 });
        assert!(left.contains(&[0.5]));
        assert!(!left.contains(&[0.51]));
    }

    #[test]
    fn threshold_at_boundary_rejected() {
        let parent = Region::full(&schema1d())
            .refine(&SplitRule { covariate: 0, cut: SplitCut::Threshold(0.5) }, Side::Left)
            .unwrap();
        let err = parent
            .refine(&SplitRule { covariate: 0, cut: SplitCut::Threshold(0.5) }, Side::Right)
            .unwrap_err();
        assert!(matches!(err, Error::ThresholdOutsideRegion { covariate: 0 }));
    }

    #[test]
    fn categorical_cut_after_second_level() {
        let schema = CovariateSchema::new(vec![Column {
            name: "c".into(),
            kind: ColumnKind::Categorical { levels: vec!["a".into(), "b".into(), "c".into()] },
        }])
        .unwrap();
        let parent = Region::full(&schema);
        let rule = SplitRule { covariate: 0, cut: SplitCut::LevelCut(1) };
        let right = parent.refine(&rule, Side::Right).unwrap();
        assert_eq!(right.dim(0), &Dim::Categorical { lo: 2, hi: 2 });
    }

    #[test]
    fn ties_route_left() {
        let rule = SplitRule { covariate: 0, cut: SplitCut::Threshold(0.5) };
        assert!(!rule.goes_right(&[0.5]));
        assert!(rule.goes_right(&[0.5 + 1e-12]));
    }
}
