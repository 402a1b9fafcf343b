//! The teacher-is-constant stopping test: strong evidence for a split at the
//! root of a step function, none inside its flat halves.
//!
//! ```sh
//! cargo run --release --example node_stopping
//! ```

use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::model::{Region, Side, SplitCut, SplitRule};
use distill_tree::node_test::{test_node, NodeTestConfig};
use distill_tree::sampler::SamplerConfig;
use distill_tree::sim::gen_sim_step2;

fn main() -> distill_tree::Result<()> {
    let (data, _) = gen_sim_step2(500, 5);
    let cfg = ForestConfig { m_n: 1000, k_n: 100, mtry: 2, min_leaf: 5, seed: 5 };
    let teacher = fit_forest(&data, &cfg)?;

    let sampler = SamplerConfig { seed: 17, ..Default::default() };
    let test_cfg = NodeTestConfig { seed: 23, ..Default::default() };

    let root = Region::full(data.schema());
    let step = SplitRule { covariate: 0, cut: SplitCut::Threshold(0.5) };
    let left = root.refine(&step, Side::Left)?;
    let right = root.refine(&step, Side::Right)?;

    for (label, region) in [("root", &root), ("left half", &left), ("right half", &right)] {
        let report = test_node(&teacher, &data, region, &sampler, &test_cfg, 1)?;
        println!(
            "{label:10} averaged p = {:.4}  (per-set t: {})",
            report.averaged_p,
            report
                .per_set
                .iter()
                .map(|s| format!("{:.1}", s.statistic))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    println!("\nsmall p at the root: the teacher varies there, keep splitting;");
    println!("large p in the halves: the teacher is flat, stop.");
    Ok(())
}
