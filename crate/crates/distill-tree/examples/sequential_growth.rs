//! The sequential stabilizer at work: watch the pseudo-batch grow until the
//! familywise p-value certifies the winning split.
//!
//! ```sh
//! cargo run --release --example sequential_growth
//! ```

use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::model::{Region, SplitCut, SplitRule};
use distill_tree::sampler::SamplerConfig;
use distill_tree::sim::gen_sim_tree5;
use distill_tree::stabilizer::{select_split, SplitMode, StabilizerConfig};

fn main() -> distill_tree::Result<()> {
    let data = gen_sim_tree5(1000, 12);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 12))?;
    let region = Region::full(data.schema());

    // decile thresholds on every covariate compete against each other
    let candidates: Vec<SplitRule> = (0..5)
        .flat_map(|j| {
            (1..10).map(move |d| SplitRule {
                covariate: j,
                cut: SplitCut::Threshold(d as f64 / 10.0),
            })
        })
        .collect();

    let cfg = StabilizerConfig {
        alpha: 0.1,
        n_init: 1000,
        n_ps: 200_000,
        mode: SplitMode::Adaptive,
    };
    let sampler = SamplerConfig { seed: 99, ..Default::default() };
    let (verdict, _, rounds) =
        select_split(&candidates, &region, &data, &teacher, &sampler, &cfg)?;

    println!("{:>10} {:>10} {:>12}", "n", "survivors", "aggregated p");
    for r in &rounds {
        println!("{:>10} {:>10} {:>12.4}", r.n, r.survivors, r.aggregated_p.max(0.0));
    }
    println!(
        "\nwinner: {} (p = {:.4}, n = {}, capped = {})",
        candidates[verdict.winner].describe(data.schema()),
        verdict.aggregated_p.max(0.0),
        verdict.n_used,
        verdict.capped
    );
    Ok(())
}
