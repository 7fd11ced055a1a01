//! Exact fixed-point counts and periodic-torus decomposition.
//!
//! `cargo run --example census`

use cartan_lab::action::models;
use cartan_lab::periodic::{fixed_points, format_point, orbit_decomposition, periodic_census};

fn main() -> cartan_lab::Result<()> {
    let cat = models::cat_map();
    let window: Vec<Vec<i64>> = (1..=6).map(|a| vec![a]).collect();
    println!("cat map: a, |Fix|, |det(M^a - I)|, orbits");
    for row in periodic_census(&cat, &window)? {
        println!("  {:?} {} {} {:?}", row.a, row.fix_count, row.det_abs, row.n_orbits);
    }
    println!("Fix(M^2) = {:?}", fixed_points(&cat, &[2])?.iter().map(format_point).collect::<Vec<_>>());

    let chamber = cat.chamber_by_signs(&[1, -1])?;
    for torus in orbit_decomposition(&cat, Some(&chamber), &[vec![1], vec![2]])? {
        println!(
            "  torus through {:?}: {} points, stabilizer {:?}",
            format_point(&torus.representative),
            torus.len(),
            torus.stabilizer
        );
    }

    let cubic = models::cubic_rank2();
    let window = vec![vec![1, 1], vec![1, 2], vec![2, 3]];
    for row in periodic_census(&cubic, &window)? {
        println!("cubic a = {:?}: |Fix| = {}, orbits {:?}", row.a, row.fix_count, row.n_orbits);
    }
    Ok(())
}
