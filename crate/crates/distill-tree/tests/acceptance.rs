//! Acceptance gate: one test per release criterion, each printing a single
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).

use distill_tree::builder::{build_tree, BuildConfig, StopGate};
use distill_tree::forest::{fit_forest, uniform_points, ForestConfig, ForestModel};
use distill_tree::model::{
    ClassDistribution, Column, ColumnKind, CovariateSchema, Dataset, Region, Side, SplitCut,
    SplitRule,
};
use distill_tree::node_test::{centered_statistic, test_node, DfMode, NodeTestConfig};
use distill_tree::report::{agreement, stability_audit};
use distill_tree::sampler::{SamplerConfig, SoftSample};
use distill_tree::sim::{gen_sim_step2, gen_sim_tree5};
use distill_tree::stabilizer::{
    fwer_aggregate, gini_of, next_sample_size, pair_pvalue, pair_variance, select_split,
    split_stats, SplitMode, StabilizerConfig,
};
use distill_tree::util::mix_seed;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn report(num: usize, name: &str, pass: bool, detail: String) {
    println!("acceptance {num} ({name}): {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {num} ({name}) failed: {detail}");
}

fn rule(covariate: usize, t: f64) -> SplitRule {
    SplitRule { covariate, cut: SplitCut::Threshold(t) }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Criterion 1: the delta-method plug-in variance of the Gini difference
/// matches the empirical variance over 5000 independent batches of n = 2000
/// within 10% relative error.
#[test]
fn c1_clt_variance_oracle() {
    let n = 2000usize;
    let batches = 5000usize;
    let r1 = rule(0, 0.45);
    let r2 = rule(1, 0.55);

    let results: Vec<(f64, f64)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(0xc1, b as u64));
            let batch: Vec<SoftSample> = (0..n)
                .map(|_| {
                    let x = vec![rng.random::<f64>(), rng.random::<f64>()];
                    let p1 = sigmoid(3.0 * (x[0] - 0.5) + (x[1] - 0.5));
                    SoftSample { x, y: ClassDistribution::new(vec![1.0 - p1, p1]).unwrap() }
                })
                .collect();
            let delta = split_stats(&batch, &r1).gini - split_stats(&batch, &r2).gini;
            let plug_in = pair_variance(&batch, &r1, &r2) / n as f64;
            (delta, plug_in)
        })
        .collect();

    let mean_delta = results.iter().map(|r| r.0).sum::<f64>() / batches as f64;
    let empirical = results.iter().map(|r| (r.0 - mean_delta).powi(2)).sum::<f64>()
        / (batches - 1) as f64;
    let mean_plug_in = results.iter().map(|r| r.1).sum::<f64>() / batches as f64;
    let rel = (empirical - mean_plug_in).abs() / empirical;
    report(
        1,
        "clt-variance",
        rel <= 0.10,
        format!("empirical {empirical:.3e} vs plug-in {mean_plug_in:.3e} (rel {rel:.3})"),
    );
}

/// Criterion 2: uncapped accepted nodes re-select the same winner in at
/// least 84 of 100 fresh-seed reruns (90 with binomial tolerance 6).
#[test]
fn c2_split_reproducibility() {
    let data = gen_sim_tree5(1000, 0xc2);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 0xc2)).unwrap();
    let region = Region::full(data.schema());
    // decile thresholds on each covariate
    let candidates: Vec<SplitRule> = (0..5)
        .flat_map(|j| (1..10).map(move |d| rule(j, d as f64 / 10.0)))
        .collect();
    let cfg = StabilizerConfig { alpha: 0.1, n_init: 1000, n_ps: 100_000, mode: SplitMode::Adaptive };

    let runs: Vec<(usize, bool)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let sampler = SamplerConfig { seed: mix_seed(0x5eed_c2, r), ..Default::default() };
            let (verdict, _, _) =
                select_split(&candidates, &region, &data, &teacher, &sampler, &cfg).unwrap();
            (verdict.winner, verdict.capped)
        })
        .collect();

    let mut counts = std::collections::HashMap::new();
    for &(w, capped) in &runs {
        if !capped {
            *counts.entry(w).or_insert(0usize) += 1;
        }
    }
    let modal = counts.values().copied().max().unwrap_or(0);
    report(2, "split-reproducibility", modal >= 84, format!("modal winner count {modal}/100"));
}

fn stability_teacher() -> (Dataset, ForestModel) {
    let data = gen_sim_tree5(1000, 0xc3);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 0xc3)).unwrap();
    (data, teacher)
}

fn stability_build_config(n_ps: usize, mode: SplitMode) -> BuildConfig {
    let mut cfg = BuildConfig::new(4);
    cfg.stabilizer = StabilizerConfig { alpha: 0.1, n_init: 1000, n_ps, mode };
    cfg.stop_gate = StopGate::Off;
    cfg
}

/// Criterion 3: with a fixed teacher, the dominant depth-4 structure
/// frequency over 20 rebuilds is non-decreasing moving the pseudo-sample
/// cap from 1e3 to 1e5 (one-count slack).
#[test]
fn c3_stability_improves_with_cap() {
    let (data, teacher) = stability_teacher();
    let small = stability_audit(
        &teacher,
        &data,
        &stability_build_config(1_000, SplitMode::Adaptive).with_seed(0x51),
        20,
        &[4],
    )
    .unwrap();
    let large = stability_audit(
        &teacher,
        &data,
        &stability_build_config(100_000, SplitMode::Adaptive).with_seed(0x52),
        20,
        &[4],
    )
    .unwrap();
    let (lo, hi) = (small.dominant_count(4).unwrap(), large.dominant_count(4).unwrap());
    report(3, "stability-vs-cap", hi + 1 >= lo, format!("dominant 1e3: {lo}, 1e5: {hi}"));
}

/// Criterion 4: adaptive growth yields no more distinct depth-4 structures
/// than the one-shot baseline with multiplier 9 over 20 rebuilds.
#[test]
fn c4_adaptive_beats_one_shot() {
    let (data, teacher) = stability_teacher();
    let adaptive = stability_audit(
        &teacher,
        &data,
        &stability_build_config(100_000, SplitMode::Adaptive).with_seed(0x53),
        20,
        &[4],
    )
    .unwrap();
    let one_shot = stability_audit(
        &teacher,
        &data,
        &stability_build_config(100_000, SplitMode::OneShot).with_seed(0x54),
        20,
        &[4],
    )
    .unwrap();
    let (a, o) = (adaptive.distinct_at(4).unwrap(), one_shot.distinct_at(4).unwrap());
    report(4, "adaptive-vs-one-shot", a <= o, format!("adaptive {a} distinct vs one-shot {o}"));
}

/// Criterion 5: a depth-5 adaptive tree agrees with its teacher on at least
/// 90% of 1e4 fresh evaluation points.
#[test]
fn c5_teacher_agreement() {
    let data = gen_sim_tree5(1000, 0xc5);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 0xc5)).unwrap();
    let mut cfg = BuildConfig::new(5).with_seed(0x55);
    cfg.stabilizer.n_ps = 100_000;
    cfg.stop_gate = StopGate::Off;
    let (tree, _) = build_tree(&data, &teacher, &cfg).unwrap();
    let eval = gen_sim_tree5(10_000, 0x55ea);
    let rep = agreement(&tree, &teacher, eval.rows()).unwrap();
    report(
        5,
        "teacher-agreement",
        rep.class_agreement >= 0.90,
        format!("agreement {:.4}, L1 {:.4}", rep.class_agreement, rep.l1_prob_distance),
    );
}

fn step2_forest(seed: u64) -> (Dataset, ForestModel) {
    let (data, _) = gen_sim_step2(500, seed);
    let cfg = ForestConfig { m_n: 1000, k_n: 100, mtry: 2, min_leaf: 5, seed };
    let teacher = fit_forest(&data, &cfg).unwrap();
    (data, teacher)
}

/// Criterion 6: stopping-rule power at desk scale. Root region: averaged
/// p < 0.05 in at least 90 of 100 runs; the flat child region (X1 < 0.5):
/// averaged p >= 0.05 in at least 80 of 100 runs.
#[test]
fn c6_stopping_rule_power() {
    let outcomes: Vec<(bool, bool)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let (data, teacher) = step2_forest(mix_seed(0xc6, r));
            let sampler = SamplerConfig { seed: mix_seed(0xc6_5a, r), ..Default::default() };
            let test_cfg = NodeTestConfig { seed: mix_seed(0xc6_7e, r), ..Default::default() };
            let root = Region::full(data.schema());
            let child = root.refine(&rule(0, 0.5), Side::Left).unwrap();
            let root_p =
                test_node(&teacher, &data, &root, &sampler, &test_cfg, 1).unwrap().averaged_p;
            let child_p =
                test_node(&teacher, &data, &child, &sampler, &test_cfg, 1).unwrap().averaged_p;
            (root_p < 0.05, child_p >= 0.05)
        })
        .collect();
    let root_power = outcomes.iter().filter(|o| o.0).count();
    let child_hold = outcomes.iter().filter(|o| o.1).count();
    report(
        6,
        "stopping-rule-power",
        root_power >= 90 && child_hold >= 80,
        format!("root rejections {root_power}/100, child non-rejections {child_hold}/100"),
    );
}

/// Criterion 7: under a constant-signal teacher the averaged p rejects at
/// nominal 0.05 in at most 10 of 100 replications.
#[test]
fn c7_null_calibration() {
    let schema = CovariateSchema::new(
        (0..2)
            .map(|i| Column {
                name: format!("x{i}"),
                kind: ColumnKind::Continuous { min: 0.0, max: 1.0 },
            })
            .collect(),
    )
    .unwrap();
    let rejections: usize = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(0xc7, r));
            let rows = uniform_points(&schema, 500, &mut rng);
            // labels carry no covariate signal at all
            let labels: Vec<usize> = (0..500).map(|_| rng.random::<bool>() as usize).collect();
            let data = Dataset::new(
                schema.clone(),
                rows,
                Some(labels),
                2,
                vec!["0".into(), "1".into()],
            )
            .unwrap();
            let cfg = ForestConfig { m_n: 1000, k_n: 100, mtry: 2, min_leaf: 5, seed: r };
            let teacher = fit_forest(&data, &cfg).unwrap();
            let sampler = SamplerConfig { seed: mix_seed(0xc7_5a, r), ..Default::default() };
            let test_cfg = NodeTestConfig { seed: mix_seed(0xc7_7e, r), ..Default::default() };
            let p = test_node(&teacher, &data, &Region::full(&schema), &sampler, &test_cfg, 1)
                .unwrap()
                .averaged_p;
            (p < 0.05) as usize
        })
        .sum();
    report(7, "null-calibration", rejections <= 10, format!("{rejections}/100 rejections"));
}

/// Criterion 8: the infinitesimal-jackknife Gram matches the definitional
/// double-loop oracle entrywise to 1e-12 on a 50-tree, n=30, q=2 forest.
#[test]
fn c8_ij_brute_force_equivalence() {
    let data = gen_sim_tree5(30, 0xc8);
    let cfg = ForestConfig { m_n: 50, k_n: 10, mtry: 2, min_leaf: 2, seed: 0xc8 };
    let forest = fit_forest(&data, &cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc8_99);
    let pts = uniform_points(data.schema(), 2, &mut rng);
    let preds = forest.per_tree_predictions(&pts, 1);
    let (m, n, q) = (forest.m_n(), data.n(), pts.len());

    let mut c = vec![vec![0.0f64; q]; n];
    for (i, row) in c.iter_mut().enumerate() {
        let member: Vec<f64> = forest
            .subsamples()
            .iter()
            .map(|s| s.contains(&(i as u32)) as usize as f64)
            .collect();
        let mem_mean = member.iter().sum::<f64>() / m as f64;
        for (k, cell) in row.iter_mut().enumerate() {
            let pred_mean = preds.column(k).mean();
            let mut cov = 0.0;
            for b in 0..m {
                cov += (preds[(b, k)] - pred_mean) * (member[b] - mem_mean);
            }
            *cell = cov / m as f64;
        }
    }
    let est = forest.estimate_zeta1(&pts, 1);
    let mut max_err: f64 = 0.0;
    for a in 0..q {
        for b in 0..q {
            let oracle: f64 = (0..n).map(|i| c[i][a] * c[i][b]).sum();
            max_err = max_err.max((est[(a, b)] - oracle).abs());
        }
    }
    report(8, "ij-brute-force", max_err <= 1e-12, format!("max entry error {max_err:.3e}"));
}

/// Criterion 9: the analytic examples hold at their stated tolerances and
/// the randomized invariants pass over more than 1e3 cases.
#[test]
fn c9_analytic_unit_suite() {
    let mut ok = true;
    let mut detail = String::new();
    let mut check = |cond: bool, what: &str| {
        if !cond {
            ok = false;
            detail.push_str(what);
            detail.push(';');
        }
    };

    // gini
    check(
        (gini_of(&ClassDistribution::new(vec![0.2, 0.3, 0.5]).unwrap()) - 0.62).abs() < 1e-12,
        "gini(0.2,0.3,0.5)",
    );
    check(gini_of(&ClassDistribution::new(vec![1.0, 0.0]).unwrap()) == 0.0, "gini pure");

    // pair_pvalue
    check(pair_pvalue(0.0, 1.0, 100).unwrap() == 0.5, "p(0)");
    check(pair_pvalue(-0.1, 0.0, 100).unwrap() == 0.0, "p(var=0)");
    let delta = -1.6449 * (2.0 * 0.3 / 400.0f64).sqrt();
    check((pair_pvalue(delta, 0.3, 400).unwrap() - 0.05).abs() < 1e-4, "p quantile");

    // next_sample_size
    let n = next_sample_size(1000, 0.3, 0.05).unwrap();
    check((n as i64 - 9838).abs() <= 1, "growth 9838");
    check(next_sample_size(1000, 0.6, 0.05).unwrap() == 2000, "doubling");

    // fwer_aggregate
    check((fwer_aggregate(&[0.01, 0.02, 0.03]) - 0.06).abs() < 1e-15, "fwer sum");
    check(fwer_aggregate(&[0.7, 0.8]) == 1.0, "fwer clip");

    // centered_statistic hand case
    let (t, df) =
        centered_statistic(&[0.0, 1.0], &DMatrix::identity(2, 2), DfMode::RankAdjusted).unwrap();
    check((t - 0.5).abs() < 1e-12 && df == 1, "chi2 hand case");

    // randomized invariants, > 1e3 cases total
    let mut rng = ChaCha8Rng::seed_from_u64(0xc9);
    let schema = CovariateSchema::new(
        (0..3)
            .map(|i| Column {
                name: format!("x{i}"),
                kind: ColumnKind::Continuous { min: 0.0, max: 1.0 },
            })
            .collect(),
    )
    .unwrap();
    for _ in 0..400 {
        // region partition: each point lands in exactly one refined child
        let r = rule(rng.random_range(0..3), rng.random_range(0.05..0.95));
        let region = Region::full(&schema);
        let left = region.refine(&r, Side::Left).unwrap();
        let right = region.refine(&r, Side::Right).unwrap();
        let p: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        check(left.contains(&p) != right.contains(&p), "region partition");
    }
    for _ in 0..400 {
        // pair variance PSD-ness and determinism
        let batch: Vec<SoftSample> = (0..40)
            .map(|_| {
                let p1 = rng.random::<f64>();
                SoftSample {
                    x: vec![rng.random(), rng.random(), rng.random()],
                    y: ClassDistribution::new(vec![1.0 - p1, p1]).unwrap(),
                }
            })
            .collect();
        let (r1, r2) = (rule(0, rng.random()), rule(1, rng.random()));
        let v = pair_variance(&batch, &r1, &r2);
        check(v >= -1e-12, "pair variance PSD");
        check(v == pair_variance(&batch, &r1, &r2), "pair variance determinism");
    }
    for _ in 0..400 {
        // chi-squared statistic location invariance and scale equivariance
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let sigma = &a * a.transpose() + DMatrix::identity(4, 4) * 0.1;
        let mu: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (t0, _) = centered_statistic(&mu, &sigma, DfMode::RankAdjusted).unwrap();
        let shift = rng.random_range(-5.0..5.0);
        let shifted: Vec<f64> = mu.iter().map(|m| m + shift).collect();
        let (t1, _) = centered_statistic(&shifted, &sigma, DfMode::RankAdjusted).unwrap();
        check((t1 - t0).abs() <= 1e-10 * t0.abs().max(1.0), "location invariance");
        let c = rng.random_range(0.5..2.0);
        let scaled: Vec<f64> = mu.iter().map(|m| m * c).collect();
        let (t2, _) =
            centered_statistic(&scaled, &(&sigma * (c * c)), DfMode::RankAdjusted).unwrap();
        check((t2 - t0).abs() <= 1e-8 * t0.abs().max(1.0), "scale equivariance");
    }

    report(9, "analytic-unit-suite", ok, detail);
}
