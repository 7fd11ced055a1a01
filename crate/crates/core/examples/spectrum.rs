//! Truncated transfer operator: leading pair, projector iteration and rank.
//!
//! `cargo run --example spectrum`

use cartan_lab::action::models;
use cartan_lab::geometry::WindowFunction;
use cartan_lab::observable::TrigObservable;
use cartan_lab::spectrum::{
    iterate_to_projector, koopman_matrix, leading_spectrum, mode_escape_time, projector_rank, weights_of, FourierBox,
    KoopmanOperator,
};
use num_complex::Complex64;

fn main() -> cartan_lab::Result<()> {
    let cat = models::cat_map();
    let chamber = cat.chamber_by_signs(&[1, -1])?;
    let psi = WindowFunction::uniform(&[vec![1], vec![2]])?;
    let fb = FourierBox::new(&cat, &chamber, 30, 4.0)?;
    for t in [0.0, 0.1, 0.5] {
        let op = koopman_matrix(&cat, &chamber, &psi, &[Complex64::new(t, 0.0)], &fb)?;
        let rep = leading_spectrum(&op, &weights_of(&[&fb]), 1e-12, 2000)?;
        println!(
            "t = {t}: psi_hat {:.6}, leading {:.6}, second modulus {}, transient rate {:.4}, nnz {}",
            op.psi_hat().re,
            rep.eigenvalue.re,
            rep.second_modulus,
            rep.transient_rate,
            op.nnz()
        );
    }
    let op = koopman_matrix(&cat, &chamber, &psi, &[Complex64::new(0.0, 0.0)], &fb)?;
    let f = TrigObservable::constant(2, 0.5).add(&TrigObservable::mode(&[1, 0]))?;
    let table = iterate_to_projector(&op, &fb.embed(&f)?, 8)?;
    let escape = mode_escape_time(&cat, &psi, 30, &[vec![1, 0]])?;
    let distances: Vec<String> = table.distances.iter().map(|d| format!("{d:.3e}")).collect();
    println!("distances {}", distances.join(" "));
    println!("settles at {:?}, escape oracle {escape}, limit {}", table.settled_at, table.limit_coefficients[0]);
    println!("projector rank {}", projector_rank(&op, 4, 7, 2000)?);
    let union = KoopmanOperator::direct_sum(&op, &op)?;
    println!("rank on two disjoint copies {}", projector_rank(&union, 4, 7, 2000)?);
    Ok(())
}
