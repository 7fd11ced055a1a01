//! Zeta coefficients, the dominant pole and the flat determinant.
//!
//! `cargo run --example zeta`

use cartan_lab::reports::Context;
use cartan_lab::zeta::{dominant_pole_extraction, flat_determinant, zeta_coefficients};
use num_complex::Complex64;
use std::path::Path;

fn main() -> cartan_lab::Result<()> {
    let ctx = Context::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/cubic_rank2.json"), &[])?;
    let zero = vec![Complex64::new(0.0, 0.0); 2];
    for (name, f) in &ctx.observables {
        let c = zeta_coefficients(&ctx.model, &ctx.chamber, &ctx.window, &zero, f, 12)?;
        let pole = dominant_pole_extraction(&c)?;
        println!(
            "{name:<9} c_1..3 = {:.4?}  s0 = {:.6}  residue = {:.6}  vanishing tail {}",
            c.coeffs[..3].iter().map(|z| z.re).collect::<Vec<_>>(),
            pole.s0,
            pole.residue,
            pole.vanishing_tail
        );
    }
    let grid: Vec<Vec<f64>> = [0.05, 0.1, 0.2, 0.4].iter().map(|&t| vec![t, t]).collect();
    for k in [6, 12, 24] {
        let pts = flat_determinant(&ctx.model, &ctx.chamber, &ctx.window, &grid, k)?;
        let comp: Vec<String> = pts.iter().map(|p| format!("{:.6}", p.compensated.unwrap_or(f64::NAN))).collect();
        println!("K = {k:>2}: d / (1 - psi_hat) = {}", comp.join(", "));
    }
    Ok(())
}
