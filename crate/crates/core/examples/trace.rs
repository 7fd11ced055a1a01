//! Guillemin sums, the alternating forms identity and mollified traces.
//!
//! `cargo run --example trace`

use cartan_lab::action::models;
use cartan_lab::observable::TrigObservable;
use cartan_lab::trace::{
    forms_alternating_check, guillemin_sum, mollified_trace, mollified_trace_closed_form,
};

fn main() -> cartan_lab::Result<()> {
    let cat = models::cat_map();
    let chamber = cat.chamber_by_signs(&[1, -1])?;
    let bump = TrigObservable::constant(2, 1.0).add(&TrigObservable::cosine(&[1, 0]).scale(0.5.into()))?;
    for a in 1..=4 {
        let g = guillemin_sum(&cat, &chamber, &[a], &bump)?;
        let m = mollified_trace(&cat, &[a], &bump, 0.02, 400)?;
        let forms = forms_alternating_check(&cat, &chamber, &[a])?;
        println!(
            "a = {a}: guillemin {:.6}, mollified {:.6}, forms residual {:.1e}, separation {:?}",
            g.re, m.value.re, forms.residual, m.min_separation
        );
    }

    // A character of Fix(M^a), k = (M^a - I)^T m, is damped by
    // exp(-2π² eps² |M^{aT} m|²): the mollified value reaches the Guillemin
    // value only once eps is well below the fixed-point spacing scale.
    let a = 2;
    let shifted = cat.shifted_power(&[a])?.to_i64_rows().unwrap();
    let k = [shifted[0][0], shifted[0][1]];
    let f = TrigObservable::mode(&k);
    let g = guillemin_sum(&cat, &chamber, &[a], &f)?;
    println!("a = {a}, k = {k:?}: guillemin {:.6}", g.re);
    for eps in [0.1, 0.05, 0.02, 0.01] {
        let q = mollified_trace(&cat, &[a], &f, eps, 800)?;
        let c = mollified_trace_closed_form(&cat, &[a], &f, eps)?;
        println!(
            "  eps = {eps}: quadrature {:.6}, closed form {:.6}, warning {}",
            q.value.re, c.re, q.separation_warning
        );
    }
    Ok(())
}
