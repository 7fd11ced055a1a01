//! Periodic-orbit (Bowen) estimates of Haar averages on growing slabs.
//!
//! `cargo run --example bowen`

use cartan_lab::bowen::bowen_estimate_many;
use cartan_lab::geometry::int;
use cartan_lab::reports::Context;
use std::path::Path;

fn main() -> cartan_lab::Result<()> {
    for (config, ns) in [("cat_map", [20i64, 40, 80]), ("cubic_rank2", [5, 10, 20])] {
        let ctx = Context::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{config}.json")), &[])?;
        let fs: Vec<_> = ctx.observables.iter().map(|(_, f)| f.clone()).collect();
        println!("{config}");
        for n in ns {
            let est = bowen_estimate_many(&ctx.model, &ctx.chamber, &ctx.cone, &int(n), &int(2 * n), &fs)?;
            print!("  [{n}, {}] {} points:", 2 * n, est.n_points);
            for ((name, f), v) in ctx.observables.iter().zip(&est.values) {
                print!(" {name} {:+.4} (err {:.1e})", v.re, (v - f.haar()).norm());
            }
            println!();
        }
    }
    Ok(())
}
