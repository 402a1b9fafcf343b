//! Serialization surfaces: JSON round-trip, structure fingerprints, and
//! Graphviz DOT export of a distilled tree.
//!
//! ```sh
//! cargo run --release --example export_formats > tree.dot
//! dot -Tpng tree.dot -o tree.png   # if graphviz is installed
//! ```

use distill_tree::builder::{build_tree, BuildConfig};
use distill_tree::forest::{fit_forest, ForestConfig};
use distill_tree::model::{ApproxTree, DEFAULT_FINGERPRINT_PRECISION};
use distill_tree::sim::gen_sim_tree5;

fn main() -> distill_tree::Result<()> {
    let data = gen_sim_tree5(600, 17);
    let teacher = fit_forest(&data, &ForestConfig::default_for(data.n(), 5, 17))?;
    let mut cfg = BuildConfig::new(3).with_seed(19);
    cfg.stabilizer.n_ps = 20_000;
    let (tree, _) = build_tree(&data, &teacher, &cfg)?;

    let json = tree.to_json()?;
    let restored = ApproxTree::from_json(&json)?;
    eprintln!("JSON round-trip: {} bytes, {} nodes", json.len(), restored.nodes().len());
    eprintln!(
        "depth-3 fingerprint: {}",
        String::from_utf8_lossy(&tree.fingerprint(3, DEFAULT_FINGERPRINT_PRECISION))
    );

    // DOT goes to stdout so it can be piped straight into graphviz
    println!("{}", tree.to_dot(data.schema()));
    Ok(())
}
