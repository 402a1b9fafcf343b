//! End-to-end distillation: simulate data, fit a forest teacher, and build a
//! statistically stabilized approximation tree.
//!
//! ```sh
//! cargo run --release --example distill_simulated
//! ```

use distill_tree::builder::{build_tree, BuildConfig};
use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::sim::gen_sim_tree5;

fn main() -> distill_tree::Result<()> {
    let data = gen_sim_tree5(1000, 42);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 42))?;
    println!("teacher training accuracy: {:.4}", teacher.accuracy(&data)?);

    let mut cfg = BuildConfig::new(4).with_seed(7);
    cfg.stabilizer.n_ps = 50_000;
    let (tree, log) = build_tree(&data, &teacher, &cfg)?;

    println!("tree: {} nodes, depth {}", tree.nodes().len(), tree.depth());
    for rec in &log {
        let p = rec
            .verdict
            .as_ref()
            .map(|v| format!("p = {:.4}, n = {}", v.aggregated_p, v.n_used))
            .unwrap_or_else(|| "-".into());
        println!(
            "  node {:2} depth {} support {:4} outcome {:?} ({p})",
            rec.node_id, rec.depth, rec.support, rec.outcome
        );
    }
    Ok(())
}
