//! Growth of periodic counts, fixed-point separation, near-periodic volume and tori.
//!
//! `cargo run --example counting`

use cartan_lab::action::models;
use cartan_lab::counting::{
    calibrate_separation, chamber_ball, near_periodic_volume, periodic_count_growth, separation_bound_holds,
    separation_check, tori_count,
};

fn main() -> cartan_lab::Result<()> {
    for model in [models::cat_map(), models::cubic_rank2()] {
        let chamber = model.weyl_chambers()?.remove(0);
        let m = chamber.m_model();
        let growth = periodic_count_growth(&model, &chamber, 8)?;
        println!(
            "{}: slopes raw {:.3}, compensated {:.3}, tail {:.3}; bound {:.3}",
            model.name(),
            growth.raw_slope,
            growth.compensated_slope,
            growth.tail_slope,
            growth.bound
        );
        let delta = calibrate_separation(&model, &chamber, &chamber_ball(&chamber, 3.0)?)?;
        for a in chamber_ball(&chamber, 5.0)?.iter().take(6) {
            let s = separation_check(&model, &chamber, a)?;
            println!(
                "  a = {a:?}: {} points, separation {:.4e}, bound holds {}",
                s.n_points,
                s.min_distance_f64(),
                separation_bound_holds(&s, delta, m)
            );
        }
        for eps in [0.2, 0.1, 0.05] {
            let v = near_periodic_volume(&model, &chamber, eps, 3.0, 20_000, 1)?;
            println!("  eps = {eps}: near-periodic volume {:.4e} ± {:.1e}", v.value, v.std_error);
        }
        println!("  tori with period length <= 3: {}", tori_count(&model, &chamber, 3.0)?.tori);
    }
    Ok(())
}
