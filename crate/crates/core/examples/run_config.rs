//! Run every report section for a bundled config and write the files.
//!
//! `cargo run --example run_config -- configs/cubic_rank2.json out/`

use cartan_lab::reports::{run, Context, Subcommand};
use std::path::PathBuf;

fn main() -> cartan_lab::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/cat_map.json"), PathBuf::from);
    let out = args.next().map_or_else(|| std::env::temp_dir().join("cartan-lab-example"), PathBuf::from);
    let ctx = Context::load(&config, &[])?;
    let report = run(Subcommand::All, &ctx)?;
    report.write(&out)?;
    for c in &report.criteria {
        println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.name);
    }
    println!("run {} wrote {} files to {}", ctx.run_id, report.files.len(), out.display());
    Ok(())
}
