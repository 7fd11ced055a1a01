//! Validate the bundled models and list their Weyl chambers.
//!
//! `cargo run --example chambers`

use cartan_lab::action::{models, validate_model};

fn main() -> cartan_lab::Result<()> {
    for model in [models::cat_map(), models::cubic_rank2()] {
        println!("{} (n = {}, kappa = {})", model.name(), model.n(), model.kappa());
        for c in &validate_model(&model, None).0 {
            println!("  {:<5} {}: {}", if c.pass { "ok" } else { "FAIL" }, c.check, c.detail);
        }
        for chamber in model.weyl_chambers()? {
            println!(
                "  chamber {:?}: representative {:.3?}, stable dim {}, M_model {:.4}",
                chamber.signs(),
                chamber.representative(),
                chamber.stable_indices().len(),
                chamber.m_model()
            );
        }
    }
    Ok(())
}
