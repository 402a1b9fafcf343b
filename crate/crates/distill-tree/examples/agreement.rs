//! How faithfully the distilled tree reproduces its teacher, measured on
//! fresh evaluation points at several depths.
//!
//! ```sh
//! cargo run --release --example agreement
//! ```

use distill_tree::builder::{build_tree, BuildConfig};
use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::report::agreement;
use distill_tree::sim::gen_sim_tree5;

fn main() -> distill_tree::Result<()> {
    let data = gen_sim_tree5(1000, 21);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 21))?;
    let eval = gen_sim_tree5(10_000, 22);

    println!("{:>5} {:>10} {:>8}", "depth", "agreement", "L1");
    for depth in 1..=5 {
        let mut cfg = BuildConfig::new(depth).with_seed(31);
        cfg.stabilizer.n_ps = 50_000;
        let (tree, _) = build_tree(&data, &teacher, &cfg)?;
        let rep = agreement(&tree, &teacher, eval.rows())?;
        println!("{depth:>5} {:>10.4} {:>8.4}", rep.class_agreement, rep.l1_prob_distance);
    }
    Ok(())
}
