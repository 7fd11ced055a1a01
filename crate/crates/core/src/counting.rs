//! Desk-scale growth checks: periodic lattice points, separation of fixed
//! points, near-periodic phase-space volume and periodic tori.
//!
//! The constants `C`, `δ` in the bounds are not canonical. They are fitted
//! once on small parameters and then frozen; only exponents are asserted.

use crate::action::{box_points, ActionModel, WeylChamber};
use crate::numerics::RealSum;
use crate::periodic::orbit_decomposition;
use crate::periodic::{fixed_points_with_budget, RationalPoint};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Full enumeration budget for [`separation_check`].
pub const SEPARATION_BUDGET: u64 = 100_000;
/// Largest `|a|∞` for which tori are counted.
pub const TORI_RADIUS: i64 = 3;

/// Chamber lattice points with Euclidean `|a| <= ell`, in lexicographic order.
pub fn chamber_ball(chamber: &WeylChamber, ell: f64) -> Result<Vec<Vec<i64>>> {
    let r = ell.floor() as i64;
    let mut out = Vec::new();
    for a in box_points(chamber.kappa(), r) {
        let norm2: i64 = a.iter().map(|v| v * v).sum();
        if norm2 as f64 <= ell * ell && chamber.contains_lattice(&a)? {
            out.push(a);
        }
    }
    Ok(out)
}

fn euclid(a: &[i64]) -> f64 {
    (a.iter().map(|v| (v * v) as f64).sum::<f64>()).sqrt()
}

#[derive(Clone, Debug)]
pub struct GrowthRow {
    pub ell: u32,
    pub lattice_points: usize,
    pub total_fixed: BigInt,
}

#[derive(Clone, Debug)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
    /// Least-squares slope of `log total` against `ℓ`.
    pub raw_slope: f64,
    /// Slope of `log total − κ log ℓ`, removing the polynomial prefactor.
    pub compensated_slope: f64,
    /// Raw slope over the upper half `ℓ >= ell_max / 2`, tracking the limit.
    pub tail_slope: f64,
    pub m_model: f64,
    /// `(n − κ) M_model + 0.1`.
    pub bound: f64,
    pub pass: bool,
}

fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn ln_big(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits < 1000 {
        return v.to_f64().unwrap().ln();
    }
    let shift = bits - 60;
    (v >> shift as usize).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// Rows `ℓ = 0..=ell_max`; slopes are fitted on the rows with a positive total.
pub fn periodic_count_growth(model: &ActionModel, chamber: &WeylChamber, ell_max: u32) -> Result<GrowthTable> {
    if ell_max > 40 {
        return Err(Error::Budget(format!("ell_max = {ell_max} exceeds the enumeration budget of 40")));
    }
    let points = chamber_ball(chamber, ell_max as f64)?;
    let dets: Vec<BigInt> = points
        .par_iter()
        .map(|a| model.fixed_point_determinant(a).map(|d| d.abs()))
        .collect::<Result<_>>()?;
    let rows: Vec<GrowthRow> = (0..=ell_max)
        .map(|ell| {
            let mut total = BigInt::zero();
            let mut count = 0;
            for (a, d) in points.iter().zip(&dets) {
                if euclid(a) <= ell as f64 {
                    total += d;
                    count += 1;
                }
            }
            GrowthRow { ell, lattice_points: count, total_fixed: total }
        })
        .collect();
    let fit: Vec<&GrowthRow> = rows.iter().filter(|r| r.ell > 0 && r.total_fixed > BigInt::zero()).collect();
    let xs: Vec<f64> = fit.iter().map(|r| r.ell as f64).collect();
    let logs: Vec<f64> = fit.iter().map(|r| ln_big(&r.total_fixed)).collect();
    let kappa = model.kappa() as f64;
    let comp: Vec<f64> = logs.iter().zip(&xs).map(|(l, x)| l - kappa * x.ln()).collect();
    let raw_slope = ls_slope(&xs, &logs);
    let compensated_slope = ls_slope(&xs, &comp);
    let half = xs.iter().position(|&x| x >= ell_max as f64 / 2.0).unwrap_or(0);
    let tail_slope = ls_slope(&xs[half..], &logs[half..]);
    let m_model = chamber.m_model();
    let bound = (model.n() - model.kappa()) as f64 * m_model + 0.1;
    Ok(GrowthTable {
        rows,
        raw_slope,
        compensated_slope,
        tail_slope,
        m_model,
        bound,
        pass: !(compensated_slope > bound),
    })
}

#[derive(Clone, Debug)]
pub struct Separation {
    pub a: Vec<i64>,
    pub n_points: usize,
    /// `None` for a single fixed point (infinite separation).
    pub min_distance: Option<BigRational>,
}

impl Separation {
    pub fn min_distance_f64(&self) -> f64 {
        self.min_distance.as_ref().map_or(f64::INFINITY, |d| d.to_f64().unwrap())
    }
}

/// Minimal max-metric distance between distinct points of `Fix(M^a)`.
///
/// `Fix(M^a)` is a subgroup, so the minimum is the least distance from a
/// nonzero point to the origin.
pub fn separation_check(model: &ActionModel, chamber: &WeylChamber, a: &[i64]) -> Result<Separation> {
    if !chamber.contains_lattice(a)? {
        return Err(Error::NotHyperbolic { a: a.to_vec(), detail: format!("outside chamber {:?}", chamber.signs()) });
    }
    let pts = fixed_points_with_budget(model, a, SEPARATION_BUDGET)?;
    let zero = RationalPoint::origin(model.n());
    let min_distance = pts.iter().filter(|x| **x != zero).map(|x| x.torus_distance(&zero)).min();
    Ok(Separation { a: a.to_vec(), n_points: pts.len(), min_distance })
}

/// `δ_fit = min_a d(a) e^{M |a|}` over the calibration points with more than one fixed point.
pub fn calibrate_separation(model: &ActionModel, chamber: &WeylChamber, calibration: &[Vec<i64>]) -> Result<f64> {
    let m = chamber.m_model();
    let mut delta = f64::INFINITY;
    for a in calibration {
        let s = separation_check(model, chamber, a)?;
        if s.min_distance.is_some() {
            delta = delta.min(s.min_distance_f64() * (m * euclid(a)).exp());
        }
    }
    if delta.is_infinite() {
        return Err(Error::InvalidInput("calibration points all have a single fixed point".into()));
    }
    Ok(delta)
}

/// `d(a) >= δ_fit e^{-M |a|}`.
pub fn separation_bound_holds(s: &Separation, delta_fit: f64, m_model: f64) -> bool {
    s.min_distance_f64() >= delta_fit * (-m_model * euclid(&s.a)).exp()
}

#[derive(Clone, Debug)]
pub struct NearPeriodic {
    pub eps: f64,
    pub ell: f64,
    pub n_samples: usize,
    pub rng_seed: u64,
    /// `Σ_a` fraction of samples with `d(x, M^{-a}x) < eps`.
    pub value: f64,
    pub std_error: f64,
    pub per_a: Vec<(Vec<i64>, f64)>,
}

/// Stream index of a lattice point, independent of the enclosing ball so that
/// estimates for nested balls share samples.
fn stream_of(a: &[i64]) -> u64 {
    a.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &v| (h ^ (v as u64)).wrapping_mul(0x0100_0000_01b3))
}

fn max_torus_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = (a - b).rem_euclid(1.0);
            d.min(1.0 - d)
        })
        .fold(0.0, f64::max)
}

pub fn near_periodic_volume(
    model: &ActionModel,
    chamber: &WeylChamber,
    eps: f64,
    ell: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<NearPeriodic> {
    if n_samples < 1000 {
        return Err(Error::InvalidInput(format!("n_samples = {n_samples} is below 1000")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidInput(format!("eps = {eps} must be positive")));
    }
    let points = chamber_ball(chamber, ell)?;
    let n = model.n();
    let per_a: Vec<(Vec<i64>, f64)> = points
        .par_iter()
        .map(|a| {
            let minus: Vec<i64> = a.iter().map(|v| -v).collect();
            let b = model
                .matrix_power(&minus)?
                .to_i64_rows()
                .filter(|rows| rows.iter().flatten().all(|v| v.abs() < 1 << 40))
                .ok_or_else(|| Error::Budget(format!("entries of M^-{a:?} are too large for sampling")))?;
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(stream_of(a));
            let mut hits = 0usize;
            let mut x = vec![0.0; n];
            for _ in 0..n_samples {
                x.iter_mut().for_each(|v| *v = rng.gen::<f64>());
                let y: Vec<f64> = b.iter().map(|row| row.iter().zip(&x).map(|(&c, v)| c as f64 * v).sum()).collect();
                if max_torus_distance(&x, &y) < eps {
                    hits += 1;
                }
            }
            Ok((a.clone(), hits as f64 / n_samples as f64))
        })
        .collect::<Result<_>>()?;
    let mut value = RealSum::default();
    let mut var = RealSum::default();
    for (_, p) in &per_a {
        value.add(*p);
        var.add(p * (1.0 - p) / n_samples as f64);
    }
    Ok(NearPeriodic { eps, ell, n_samples, rng_seed, value: value.value(), std_error: var.value().sqrt(), per_a })
}

/// `C_fit = V(eps0, ell0) / (eps0^n e^{n M ell0})`.
pub fn calibrate_near_periodic(model: &ActionModel, m_model: f64, calibration: &NearPeriodic) -> f64 {
    let n = model.n() as f64;
    calibration.value / (calibration.eps.powf(n) * (n * m_model * calibration.ell).exp())
}

/// `V − 3 se <= C_fit eps^n e^{n M ell}`; the margin absorbs Monte Carlo noise.
pub fn near_periodic_bound_holds(model: &ActionModel, v: &NearPeriodic, c_fit: f64, m_model: f64) -> bool {
    let n = model.n() as f64;
    v.value - 3.0 * v.std_error <= c_fit * v.eps.powf(n) * (n * m_model * v.ell).exp()
}

#[derive(Clone, Debug)]
pub struct ToriCount {
    pub ell: f64,
    pub lattice_points: usize,
    pub tori: usize,
}

/// Number of periodic tori with a period of Euclidean length `<= ell`.
pub fn tori_count(model: &ActionModel, chamber: &WeylChamber, ell: f64) -> Result<ToriCount> {
    let points = chamber_ball(chamber, ell)?;
    if let Some(a) = points.iter().find(|a| a.iter().any(|v| v.abs() > TORI_RADIUS)) {
        return Err(Error::Budget(format!("torus count needs |a|∞ <= {TORI_RADIUS}; {a:?} is out of budget")));
    }
    if points.is_empty() {
        return Ok(ToriCount { ell, lattice_points: 0, tori: 0 });
    }
    let tori = orbit_decomposition(model, Some(chamber), &points)?;
    Ok(ToriCount { ell, lattice_points: points.len(), tori: tori.len() })
}
