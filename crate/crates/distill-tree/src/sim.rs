//! Simulated data generators used by the experiment harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{Column, ColumnKind, CovariateSchema, Dataset};

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn unit_schema(names: &[&str]) -> CovariateSchema {
    CovariateSchema::new(
        names
            .iter()
            .map(|n| Column {
                name: (*n).to_owned(),
                kind: ColumnKind::Continuous { min: 0.0, max: 1.0 },
            })
            .collect(),
    )
    .expect("static schema")
}

/// Log-odds of class 1 for the five-covariate piecewise generator: an almost
/// tree-structured surface over Unif[0,1]^5.
pub fn tree5_logit(x: &[f64]) -> f64 {
    if x[0] > 0.5 {
        if x[1] > 0.7 {
            2.0
        } else if x[1] > 0.2 {
            -3.0
        } else {
            -4.0
        }
    } else if x[4] <= 0.5 {
        let t = x[2] + x[3] * x[3];
        if t >= 1.4 {
            3.0
        } else if t >= 0.5 {
            2.0
        } else {
            -2.0
        }
    } else {
        2.0
    }
}

/// Binary dataset: X ~ Unif[0,1]^5, Y ~ Bernoulli(sigmoid(tree5_logit(X))).
pub fn gen_sim_tree5(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let p = sigmoid(tree5_logit(&x));
        labels.push((rng.random::<f64>() < p) as usize);
        rows.push(x);
    }
    Dataset::new(unit_schema(&["x1", "x2", "x3", "x4", "x5"]), rows, Some(labels), 2, vec![
        "0".into(),
        "1".into(),
    ])
    .expect("generator output conforms")
}

/// Step generator for the stopping-rule study: X ~ Unif[0,1]^2, raw response
/// -1 or +1 by the sign of X1 - 0.5, plus unit Gaussian noise. The dataset
/// carries the sign-binarized labels; the raw noisy responses are returned
/// alongside for reference.
pub fn gen_sim_step2(n: usize, seed: u64) -> (Dataset, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let mut raw = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..2).map(|_| rng.random::<f64>()).collect();
        let mean = if x[0] < 0.5 { -1.0 } else { 1.0 };
        let y = mean + rng.sample::<f64, _>(StandardNormal);
        labels.push((y >= 0.0) as usize);
        raw.push(y);
        rows.push(x);
    }
    let data = Dataset::new(unit_schema(&["x1", "x2"]), rows, Some(labels), 2, vec![
        "neg".into(),
        "pos".into(),
    ])
    .expect("generator output conforms");
    (data, raw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree5_table_values() {
        assert_eq!(tree5_logit(&[0.9, 0.9, 0.0, 0.0, 0.0]), 2.0);
        assert_eq!(tree5_logit(&[0.6, 0.1, 0.0, 0.0, 0.0]), -4.0);
        assert_eq!(tree5_logit(&[0.6, 0.5, 0.0, 0.0, 0.0]), -3.0);
        assert_eq!(tree5_logit(&[0.2, 0.0, 0.9, 0.8, 0.3]), 3.0);
        assert_eq!(tree5_logit(&[0.2, 0.0, 0.5, 0.5, 0.3]), 2.0);
        assert_eq!(tree5_logit(&[0.2, 0.0, 0.1, 0.1, 0.3]), -2.0);
        assert_eq!(tree5_logit(&[0.2, 0.0, 0.0, 0.0, 0.9]), 2.0);
        assert!((sigmoid(2.0) - 0.8808).abs() < 5e-5);
        assert!((sigmoid(-4.0) - 0.0180).abs() < 5e-5);
    }

    #[test]
    fn tree5_class_rate_matches_quadrature() {
        // Analytic P(Y=1): integrate sigmoid(logit) over the partition. The
        // only non-rectangular piece is the x3 + x4^2 surface, handled by
        // Simpson quadrature over x4.
        let p_region_high = {
            // P(x3 + x4^2 >= 1.4) on the unit square
            simpson(0.0, 1.0, 2000, |x4| (1.0 - (1.4 - x4 * x4)).clamp(0.0, 1.0))
        };
        let p_region_low = simpson(0.0, 1.0, 2000, |x4| (0.5 - x4 * x4).clamp(0.0, 1.0));
        let p_region_mid = 1.0 - p_region_high - p_region_low;

        let analytic = 0.5 * 0.3 * sigmoid(2.0)
            + 0.5 * 0.5 * sigmoid(-3.0)
            + 0.5 * 0.2 * sigmoid(-4.0)
            + 0.25 * (p_region_high * sigmoid(3.0)
                + p_region_mid * sigmoid(2.0)
                + p_region_low * sigmoid(-2.0))
            + 0.25 * sigmoid(2.0);

        let data = gen_sim_tree5(1_000_000, 42);
        let rate = data.labels().unwrap().iter().sum::<usize>() as f64 / data.n() as f64;
        assert!((rate - analytic).abs() < 0.005, "rate {rate} vs analytic {analytic}");
    }

    fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn step2_moments() {
        let (data, raw) = gen_sim_step2(100_000, 7);
        let mut low = Vec::new();
        let mut noise = Vec::new();
        for (row, &y) in data.rows().iter().zip(&raw) {
            let mean = if row[0] < 0.5 { -1.0 } else { 1.0 };
            noise.push(y - mean);
            if row[0] < 0.5 {
                low.push(y);
            }
        }
        let mean_low: f64 = low.iter().sum::<f64>() / low.len() as f64;
        let se = 1.0 / (low.len() as f64).sqrt();
        assert!((mean_low + 1.0).abs() < 3.0 * se, "mean on X1<0.5 = {mean_low}");

        let sd = {
            let m: f64 = noise.iter().sum::<f64>() / noise.len() as f64;
            (noise.iter().map(|v| (v - m).powi(2)).sum::<f64>() / noise.len() as f64).sqrt()
        };
        assert!((sd - 1.0).abs() < 0.05, "noise sd = {sd}");

        // P(label flips sign | X1 < 0.5) = Phi(-1)
        let flips = data
            .rows()
            .iter()
            .zip(data.labels().unwrap())
            .filter(|(row, _)| row[0] < 0.5)
            .filter(|(_, l)| **l == 1)
            .count();
        let frac = flips as f64 / low.len() as f64;
        assert!((frac - 0.1587).abs() < 0.01, "flip fraction {frac}");
    }
}
