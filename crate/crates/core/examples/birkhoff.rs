//! Cone-averaged Birkhoff sums: Lebesgue seeds, a stable-leaf seed and the basin fraction.
//!
//! `cargo run --example birkhoff`

use cartan_lab::birkhoff::{basin_fraction_of, physical_measure_estimate_many, stable_leaf_average_many};
use cartan_lab::reports::Context;
use std::path::Path;

fn main() -> cartan_lab::Result<()> {
    let ctx = Context::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/cat_map.json"), &[])?;
    let fs: Vec<_> = ctx.observables.iter().map(|(_, f)| f.clone()).collect();
    let seed = ctx.config.rng_seed;
    for t in [25.0, 50.0, 100.0, 200.0] {
        let est = physical_measure_estimate_many(&ctx.model, &ctx.cone, 200, seed, t, &fs)?;
        let leaf = stable_leaf_average_many(&ctx.model, &ctx.chamber, &ctx.cone, &[0.0, 0.0], 64, 0.1, seed, t, &fs)?;
        println!("T = {t}");
        for (i, (name, f)) in ctx.observables.iter().enumerate() {
            println!(
                "  {name:<8} Lebesgue {:+.4} ± {:.4}  leaf {:+.4}  basin(0.15) {:.3}",
                est.values[i].re,
                est.std_error[i],
                leaf.values[i].re,
                basin_fraction_of(&est, i, f.haar(), 0.15)
            );
        }
    }
    Ok(())
}
