//! Structure stability: rebuild the tree 20 times against one fixed teacher
//! and compare the adaptive stabilizer with the one-shot baseline.
//!
//! ```sh
//! cargo run --release --example stability_audit
//! ```

use distill_tree::builder::{BuildConfig, StopGate};
use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::report::stability_audit;
use distill_tree::sim::gen_sim_tree5;
use distill_tree::stabilizer::SplitMode;

fn main() -> distill_tree::Result<()> {
    let data = gen_sim_tree5(1000, 3);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 3))?;

    for (label, mode, n_ps) in [
        ("one-shot (multiplier 9)", SplitMode::OneShot, 50_000),
        ("adaptive, cap 1e3", SplitMode::Adaptive, 1_000),
        ("adaptive, cap 5e4", SplitMode::Adaptive, 50_000),
    ] {
        let mut cfg = BuildConfig::new(4).with_seed(11);
        cfg.stabilizer.mode = mode;
        cfg.stabilizer.n_ps = n_ps;
        cfg.stop_gate = StopGate::Off;
        let report = stability_audit(&teacher, &data, &cfg, 20, &[2, 3, 4])?;
        println!("== {label}");
        print!("{}", report.to_table());
    }
    Ok(())
}
