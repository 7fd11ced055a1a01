//! Flat traces of pullback operators against exact periodic-point sums.
//!
//! For `(U_a f)(x) = f(M^{-a} x)` the flat trace localises on `Fix(M^a)`:
//!
//! `Tr♭(f U_a) = Σ_{x ∈ Fix(M^a)} f(x) / |det(I - M^{-a})|`.
//!
//! [`mollified_trace`] approaches it by pairing `f(y)` with a periodised
//! Gaussian `G_ε(y - M^{-a} y)` of unit mass. With `B = I - M^{-a}` the pairing
//! has the closed form `Σ_k c_k ĝ_ε(j_k)`, `B^T j_k = -k`, `ĝ_ε(j) = e^{-2π²ε²|j|²}`,
//! restricted to integral `j_k`; [`mollified_trace_closed_form`] evaluates it.

use crate::action::{poincare_determinant, ActionModel, WeylChamber};
use crate::linalg::{solve_rational, IntMatrix};
use crate::numerics::ComplexSum;
use crate::observable::TrigObservable;
use crate::periodic::{fixed_points_with_budget, orbit_sum_parts};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::f64::consts::PI;

/// The exact size factor `|det(M^a - I)| / |det(I - M^{-a})|` (`= |det M^a|`)
/// and the per-mode character hits for one chamber element.
#[derive(Clone, Debug)]
pub struct GuilleminTerm {
    pub a: Vec<i64>,
    pub ratio: BigRational,
    /// `hits[i]` is true iff the i-th frequency of `f` lies in `(M^a - I)^T Z^n`.
    pub hits: Vec<bool>,
}

impl GuilleminTerm {
    pub fn value(&self, f: &TrigObservable) -> Complex64 {
        let s: Complex64 = f.iter().zip(&self.hits).filter(|(_, &h)| h).map(|((_, c), _)| *c).sum();
        s * self.ratio.to_f64().unwrap_or(f64::NAN)
    }
}

pub fn guillemin_term(model: &ActionModel, chamber: &WeylChamber, a: &[i64], f: &TrigObservable) -> Result<GuilleminTerm> {
    let pd = poincare_determinant(model, chamber, a)?;
    let shifted = model.shifted_power(a)?;
    let at = shifted.transpose();
    let count = BigRational::from_integer(shifted.det().abs());
    let hits = f
        .iter()
        .map(|(k, _)| {
            let kb: Vec<BigInt> = k.iter().map(|&x| BigInt::from(x)).collect();
            crate::linalg::in_image_lattice(&at, &kb).expect("nonsingular on chamber")
        })
        .collect();
    Ok(GuilleminTerm { a: a.to_vec(), ratio: count / pd, hits })
}

/// `Σ_{x ∈ Fix(M^a)} f(x) / |det(I - M^{-a})|`.
pub fn guillemin_sum(model: &ActionModel, chamber: &WeylChamber, a: &[i64], f: &TrigObservable) -> Result<Complex64> {
    Ok(guillemin_term(model, chamber, a, f)?.value(f))
}

/// Same value through [`orbit_sum_parts`] followed by division; used as a
/// cross-check of the factored route.
pub fn guillemin_sum_via_orbit_sum(
    model: &ActionModel,
    chamber: &WeylChamber,
    a: &[i64],
    f: &TrigObservable,
) -> Result<Complex64> {
    let pd = poincare_determinant(model, chamber, a)?;
    let (count, hit) = orbit_sum_parts(model, a, f)?;
    Ok(hit * (BigRational::from_integer(count) / pd).to_f64().unwrap_or(f64::NAN))
}

/// Quadrature result of [`mollified_trace`].
#[derive(Clone, Debug)]
pub struct MollifiedTrace {
    pub value: Complex64,
    pub eps: f64,
    pub grid: usize,
    /// Minimal torus distance between distinct fixed points, when enumerable.
    pub min_separation: Option<f64>,
    /// Raised when `eps` is not below the fixed-point spacing.
    pub separation_warning: bool,
}

/// Unit-mass periodised Gaussian at displacement `d ∈ [-1/2, 1/2)^n`.
fn periodized_gaussian(d: &[f64], eps: f64, images: i64) -> f64 {
    let n = d.len();
    let norm = (2.0 * PI * eps * eps).powf(-(n as f64) / 2.0);
    let inv = 1.0 / (2.0 * eps * eps);
    let mut total = 0.0;
    let width = (2 * images + 1) as usize;
    for idx in 0..width.pow(n as u32) {
        let mut r2 = 0.0;
        let mut rem = idx;
        for di in d {
            let shift = (rem % width) as i64 - images;
            rem /= width;
            let x = di + shift as f64;
            r2 += x * x;
        }
        total += (-r2 * inv).exp();
    }
    norm * total
}

/// Minimal torus max-distance between distinct points of `Fix(M^a)`.
/// `Fix` is a group, so this is the least nonzero element's distance to 0.
pub fn fixed_point_separation(model: &ActionModel, a: &[i64], budget: u64) -> Result<Option<BigRational>> {
    let pts = fixed_points_with_budget(model, a, budget)?;
    let zero = crate::periodic::RationalPoint::origin(model.n());
    Ok(pts.iter().filter(|x| **x != zero).map(|x| x.torus_distance(&zero)).min())
}

/// `∫ f(y) G_ε(y - M^{-a} y) dy` on a uniform `grid^n` torus grid.
///
/// The grid spacing must not exceed `eps / 8`; the nearest periodic image
/// is used for `eps < 0.05` and the `3^n` nearest otherwise.
pub fn mollified_trace(model: &ActionModel, a: &[i64], f: &TrigObservable, eps: f64, grid: usize) -> Result<MollifiedTrace> {
    if !(eps > 0.0 && eps < 0.2) {
        return Err(Error::InvalidInput(format!("eps = {eps} outside (0, 0.2)")));
    }
    if (grid as f64) * eps < 8.0 {
        return Err(Error::InvalidInput(format!(
            "grid {grid} too coarse for eps = {eps}: spacing must be at most eps/8"
        )));
    }
    let n = model.n();
    if f.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.dim() });
    }
    let points = (grid as u128).pow(n as u32);
    if points > 1u128 << 32 {
        return Err(Error::Budget(format!("{points} quadrature points")));
    }
    let minv = model.matrix_power(&a.iter().map(|x| -x).collect::<Vec<_>>())?;
    // entries reduced mod grid: the map is evaluated exactly on grid indices
    let g = grid as i64;
    let b_mod: Vec<Vec<i64>> = minv
        .to_rows()
        .iter()
        .map(|r| r.iter().map(|x| (x % BigInt::from(g)).to_i64().unwrap().rem_euclid(g)).collect())
        .collect();
    let images = if eps < 0.05 { 0 } else { 1 };
    let h = 1.0 / grid as f64;
    let measure = h.powi(n as i32);
    let modes: Vec<(Vec<i64>, Complex64)> = f.iter().map(|(k, c)| (k.clone(), *c)).collect();

    // one tile per value of the first coordinate; tiles reduced in index order
    let tiles: Vec<ComplexSum> = (0..grid)
        .into_par_iter()
        .map(|i0| {
            let mut acc = ComplexSum::default();
            let inner = (grid as u64).pow(n as u32 - 1);
            let mut idx = vec![0i64; n];
            idx[0] = i0 as i64;
            for t in 0..inner {
                let mut rem = t;
                for d in (1..n).rev() {
                    idx[d] = (rem % grid as u64) as i64;
                    rem /= grid as u64;
                }
                let disp: Vec<f64> = (0..n)
                    .map(|r| {
                        let img: i64 = (0..n).map(|c| b_mod[r][c] * idx[c]).sum::<i64>().rem_euclid(g);
                        let mut d = (idx[r] - img).rem_euclid(g);
                        if 2 * d >= g {
                            d -= g;
                        }
                        d as f64 * h
                    })
                    .collect();
                let kernel = periodized_gaussian(&disp, eps, images);
                if kernel == 0.0 {
                    continue;
                }
                let mut fy = Complex64::zero();
                for (k, c) in &modes {
                    let phase: i64 = k.iter().zip(&idx).map(|(ki, xi)| ki * xi).sum::<i64>().rem_euclid(g);
                    fy += c * Complex64::from_polar(1.0, 2.0 * PI * phase as f64 * h);
                }
                acc.add(fy * kernel * measure);
            }
            acc
        })
        .collect();
    let mut total = ComplexSum::default();
    for t in &tiles {
        total.merge(t);
    }

    // a single fixed point never warns; an unenumerable set always does
    let (min_separation, separation_warning) = match fixed_point_separation(model, a, 100_000) {
        Ok(Some(q)) => {
            let s = q.to_f64().unwrap();
            (Some(s), eps >= s)
        }
        Ok(None) => (None, false),
        Err(Error::Budget(_)) => (None, true),
        Err(e) => return Err(e),
    };
    Ok(MollifiedTrace { value: total.value(), eps, grid, min_separation, separation_warning })
}

/// Fourier-side value of the mollified pairing (no quadrature).
pub fn mollified_trace_closed_form(model: &ActionModel, a: &[i64], f: &TrigObservable, eps: f64) -> Result<Complex64> {
    let minv = model.matrix_power(&a.iter().map(|x| -x).collect::<Vec<_>>())?;
    let b = IntMatrix::identity(model.n()).sub_matrix(&minv);
    let bt = b.transpose();
    let mut total = Complex64::zero();
    for (k, c) in f.iter() {
        let rhs: Vec<BigInt> = k.iter().map(|&x| BigInt::from(-x)).collect();
        let j = solve_rational(&bt, &rhs).ok_or_else(|| Error::NotHyperbolic {
            a: a.to_vec(),
            detail: "I - M^{-a} is singular".into(),
        })?;
        if j.iter().all(|q| q.is_integer()) {
            let j2: f64 = j.iter().map(|q| q.to_f64().unwrap().powi(2)).sum();
            total += c * (-2.0 * PI * PI * eps * eps * j2).exp();
        }
    }
    Ok(total)
}

/// Result of [`forms_alternating_check`].
#[derive(Clone, Debug)]
pub struct FormsCheck {
    /// Exact `det(I - M^{-a})`.
    pub det_exact: BigRational,
    /// `Σ_m (-1)^m Tr Λ^m M^{-a}` from eigenvalue symmetric functions.
    pub alternating_sum: f64,
    /// `|det_exact - alternating_sum|`.
    pub residual: f64,
    /// Same alternating sum from the exact characteristic polynomial.
    pub exact_alternating_sum: BigInt,
    /// `sign det(I - P) = (-1)^{dim E_s} sign det(P|E_s)` with `P = M^{-a}`.
    pub sign_relation: bool,
    pub dim_stable: usize,
}

/// Elementary symmetric functions `e_0..e_n` of the given values.
fn elementary_symmetric(vals: &[Complex64]) -> Vec<Complex64> {
    let mut e = vec![Complex64::zero(); vals.len() + 1];
    e[0] = Complex64::one();
    for (i, v) in vals.iter().enumerate() {
        for m in (1..=i + 1).rev() {
            let prev = e[m - 1];
            e[m] += prev * v;
        }
    }
    e
}

pub fn forms_alternating_check(model: &ActionModel, chamber: &WeylChamber, a: &[i64]) -> Result<FormsCheck> {
    if a.iter().all(|&x| x == 0) {
        return Err(Error::NotHyperbolic { a: a.to_vec(), detail: "the identity element".into() });
    }
    if !chamber.contains_lattice(a)? {
        return Err(Error::NotHyperbolic { a: a.to_vec(), detail: format!("outside chamber {:?}", chamber.signs()) });
    }
    let n = model.n();
    let minus: Vec<i64> = a.iter().map(|x| -x).collect();
    let p = model.matrix_power(&minus)?;
    let det_exact = BigRational::from_integer(IntMatrix::identity(n).sub_matrix(&p).det());

    let nu: Vec<Complex64> = model.eigenvalues_at(&minus)?;
    let e = elementary_symmetric(&nu);
    let mut alt = ComplexSum::default();
    for (m, em) in e.iter().enumerate() {
        alt.add(if m % 2 == 0 { *em } else { -*em });
    }
    let alternating_sum = alt.value().re;
    let residual = (det_exact.to_f64().unwrap() - alternating_sum).abs();

    // charpoly χ(t) = det(tI - P) gives Σ(-1)^m e_m = χ(1)
    let exact_alternating_sum: BigInt = p.charpoly().iter().sum();

    let stable = chamber.stable_indices();
    let det_ps: Complex64 = stable.iter().map(|&i| nu[i]).product();
    let expected_sign = if stable.len().is_multiple_of(2) { 1.0 } else { -1.0 } * det_ps.re.signum();
    let actual_sign = if det_exact.is_positive() { 1.0 } else { -1.0 };
    Ok(FormsCheck {
        det_exact,
        alternating_sum,
        residual,
        exact_alternating_sum,
        sign_relation: expected_sign == actual_sign,
        dim_stable: stable.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{box_points, models};

    #[test]
    fn guillemin_values() {
        let cat = models::cat_map();
        let ch = cat.chamber_of(&[1]).unwrap();
        let one = TrigObservable::constant(2, 1.0);
        for a in 1..=6 {
            assert_eq!(guillemin_sum(&cat, &ch, &[a], &one).unwrap(), Complex64::new(1.0, 0.0));
        }
        assert_eq!(guillemin_sum(&cat, &ch, &[2], &TrigObservable::mode(&[1, 0])).unwrap(), Complex64::zero());
        assert_eq!(guillemin_sum(&cat, &ch, &[2], &TrigObservable::mode(&[4, 3])).unwrap(), Complex64::new(1.0, 0.0));
        let f = TrigObservable::mode(&[4, 3]).add(&TrigObservable::cosine(&[1, 1])).unwrap();
        assert_eq!(
            guillemin_sum(&cat, &ch, &[2], &f).unwrap(),
            guillemin_sum_via_orbit_sum(&cat, &ch, &[2], &f).unwrap()
        );
        assert!(guillemin_sum(&cat, &ch, &[-1], &one).is_err());
    }

    #[test]
    fn guillemin_of_one_is_one_on_cubic_chambers() {
        let m = models::cubic_rank2();
        let one = TrigObservable::constant(3, 1.0);
        for ch in m.weyl_chambers().unwrap() {
            for a in box_points(2, 4) {
                if ch.contains_lattice(&a).unwrap() {
                    assert_eq!(guillemin_sum(&m, &ch, &a, &one).unwrap(), Complex64::new(1.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn mollified_trace_of_one() {
        let cat = models::cat_map();
        let one = TrigObservable::constant(2, 1.0);
        let t = mollified_trace(&cat, &[2], &one, 0.02, 400).unwrap();
        assert!((t.value - 1.0).norm() < 0.05, "{:?}", t.value);
        assert!(!t.separation_warning);
        assert!((t.min_separation.unwrap() - 0.4).abs() < 1e-15);
        assert!(mollified_trace(&cat, &[2], &one, 0.02, 100).is_err());
    }

    #[test]
    fn quadrature_matches_closed_form() {
        let cat = models::cat_map();
        let a = [2i64];
        let at = cat.shifted_power(&a).unwrap().transpose();
        let k: Vec<i64> = at.mul_vec(&[1.into(), 0.into()]).iter().map(|x| x.to_i64().unwrap()).collect();
        let f = TrigObservable::mode(&k).add(&TrigObservable::constant(2, 0.5)).unwrap();
        for eps in [0.1f64, 0.05] {
            let grid = (8.0 / eps).ceil() as usize * 2;
            let q = mollified_trace(&cat, &a, &f, eps, grid).unwrap().value;
            let c = mollified_trace_closed_form(&cat, &a, &f, eps).unwrap();
            assert!((q - c).norm() < 1e-6, "eps={eps}: {q} vs {c}");
        }
    }

    #[test]
    fn forms_identity_cat_map() {
        let cat = models::cat_map();
        let ch = cat.chamber_of(&[1]).unwrap();
        let c = forms_alternating_check(&cat, &ch, &[1]).unwrap();
        // 1 - Tr M^{-1} + det M^{-1} = 1 - 3 + 1
        assert_eq!(c.det_exact, BigRational::from_integer((-1).into()));
        assert_eq!(c.exact_alternating_sum, BigInt::from(-1));
        assert!(c.residual < 1e-12);
        assert!(c.sign_relation);
        assert!(forms_alternating_check(&cat, &ch, &[0]).is_err());
    }

    #[test]
    fn forms_identity_cubic() {
        let m = models::cubic_rank2();
        for ch in m.weyl_chambers().unwrap() {
            for a in box_points(2, 4) {
                if !ch.contains_lattice(&a).unwrap() {
                    continue;
                }
                let c = forms_alternating_check(&m, &ch, &a).unwrap();
                assert!(c.residual <= 1e-9, "a={a:?} residual {}", c.residual);
                assert_eq!(BigRational::from_integer(c.exact_alternating_sum.clone()), c.det_exact);
                assert!(c.sign_relation, "a={a:?}");
            }
        }
    }
}
