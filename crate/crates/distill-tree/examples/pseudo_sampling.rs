//! Kernel-smoothed pseudo-sampling: draws stay inside the node region,
//! hug the empirical distribution, and carry the teacher's soft labels.
//!
//! ```sh
//! cargo run --release --example pseudo_sampling
//! ```

use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::model::{Region, Side, SplitCut, SplitRule};
use distill_tree::sampler::{draw_pseudo, SamplerConfig};
use distill_tree::sim::gen_sim_tree5;

fn main() -> distill_tree::Result<()> {
    let data = gen_sim_tree5(500, 8);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 8))?;

    // restrict to the half-space x1 > 0.5
    let rule = SplitRule { covariate: 0, cut: SplitCut::Threshold(0.5) };
    let region = Region::full(data.schema()).refine(&rule, Side::Right)?;

    let cfg = SamplerConfig { seed: 4, ..Default::default() };
    let batch = draw_pseudo(&data, &region, &teacher, 5000, &cfg)?;

    let inside = batch.iter().filter(|s| region.contains(&s.x)).count();
    println!("{} of {} draws inside the region", inside, batch.len());

    let mean_x1 = batch.iter().map(|s| s.x[0]).sum::<f64>() / batch.len() as f64;
    println!("mean x1 of draws: {mean_x1:.3} (training rows in region would give ~0.75)");

    println!("\nfirst five soft-labeled pseudo samples:");
    for s in &batch[..5] {
        let x: Vec<String> = s.x.iter().map(|v| format!("{v:.3}")).collect();
        println!("  x = [{}]  teacher p = {:?}", x.join(", "), s.y.probs());
    }
    Ok(())
}
