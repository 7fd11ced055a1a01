//! Bowen-type averages of periodic data over cone slabs.
//!
//! `(1/|C_{lo,hi}|) Σ_{a ∈ Z^κ ∩ C, lo <= e1(a) <= hi} Σ_{Fix(M^a)} f / |det(I - M^{-a})|`
//! converges to the physical-measure integral of `f` as the slab grows.

use crate::action::{ActionModel, WeylChamber};
use crate::geometry::{format_rational, ConeSpec};
use crate::numerics::ComplexSum;
use crate::observable::TrigObservable;
use crate::trace::guillemin_term;
use crate::{Error, Result};
use num_complex::Complex64;
use num_rational::BigRational;
use rayon::prelude::*;

#[derive(Clone, Debug)]
pub struct BowenEstimate {
    pub lo: BigRational,
    pub hi: BigRational,
    pub volume: f64,
    pub n_points: usize,
    /// One value per requested observable.
    pub values: Vec<Complex64>,
    /// Slab-boundary points skipped because they are not hyperbolic.
    pub skipped: Vec<Vec<i64>>,
}

/// Estimates for several observables sharing one slab enumeration.
pub fn bowen_estimate_many(
    model: &ActionModel,
    chamber: &WeylChamber,
    cone: &ConeSpec,
    lo: &BigRational,
    hi: &BigRational,
    fs: &[TrigObservable],
) -> Result<BowenEstimate> {
    let points = cone.slab_lattice_points(lo, hi)?;
    if points.is_empty() {
        return Err(Error::EmptySlab { lo: format_rational(lo), hi: format_rational(hi) });
    }
    let volume = cone.slab_volume(lo, hi)?;
    let terms: Vec<Option<Vec<Complex64>>> = points
        .par_iter()
        .map(|a| {
            if !chamber.contains_lattice(a)? {
                let e = cone.e1_of_lattice(a);
                if &e == lo || &e == hi {
                    return Ok(None);
                }
                return Err(Error::NotHyperbolic {
                    a: a.clone(),
                    detail: format!("slab point outside chamber {:?}", chamber.signs()),
                });
            }
            fs.iter()
                .map(|f| Ok(guillemin_term(model, chamber, a, f)?.value(f)))
                .collect::<Result<Vec<_>>>()
                .map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sums = vec![ComplexSum::default(); fs.len()];
    let mut skipped = Vec::new();
    for (a, t) in points.iter().zip(&terms) {
        match t {
            Some(vals) => sums.iter_mut().zip(vals).for_each(|(s, v)| s.add(*v)),
            None => skipped.push(a.clone()),
        }
    }
    Ok(BowenEstimate {
        lo: lo.clone(),
        hi: hi.clone(),
        volume,
        n_points: points.len() - skipped.len(),
        values: sums.iter().map(|s| s.value() / volume).collect(),
        skipped,
    })
}

pub fn bowen_estimate(
    model: &ActionModel,
    chamber: &WeylChamber,
    cone: &ConeSpec,
    lo: &BigRational,
    hi: &BigRational,
    f: &TrigObservable,
) -> Result<Complex64> {
    Ok(bowen_estimate_many(model, chamber, cone, lo, hi, std::slice::from_ref(f))?.values[0])
}

/// Nonzero `a` in the slab whose term for `e_k` is nonzero.
pub fn contributing_points(
    model: &ActionModel,
    chamber: &WeylChamber,
    cone: &ConeSpec,
    lo: &BigRational,
    hi: &BigRational,
    k: &[i64],
) -> Result<Vec<Vec<i64>>> {
    let f = TrigObservable::mode(k);
    let mut out = Vec::new();
    for a in cone.slab_lattice_points(lo, hi)? {
        if guillemin_term(model, chamber, &a, &f)?.hits[0] {
            out.push(a);
        }
    }
    Ok(out)
}
