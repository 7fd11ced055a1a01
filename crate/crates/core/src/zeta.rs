//! Zeta-series coefficients built from convolution powers of a window.
//!
//! `c_k(λ) = Σ_a ψ^(k)(a) e^{-λ·a} Σ_{Fix(M^a)} f / |det(I - M^{-a})|`
//!
//! For a unimodular model and `f = 1` every inner sum is exactly 1, so
//! `c_k = ψ̂(λ)^k`; in general `c_k ≈ μ(f) ψ̂(λ)^k` with a faster-decaying
//! remainder, which [`dominant_pole_extraction`] reads off from tail ratios.

use crate::action::{ActionModel, WeylChamber};
use crate::geometry::WindowFunction;
use crate::numerics::ComplexSum;
use crate::observable::TrigObservable;
use crate::trace::{guillemin_term, GuilleminTerm};
use crate::{Error, Result};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Clone, Debug)]
pub struct ZetaCoefficients {
    pub lambda: Vec<Complex64>,
    /// `coeffs[k-1] = c_k`.
    pub coeffs: Vec<Complex64>,
    /// `ψ̂(λ)` when the coefficients come from a window.
    pub psi_hat: Option<Complex64>,
}

impl ZetaCoefficients {
    /// Coefficients supplied directly (no window).
    pub fn from_values(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidInput("at least two coefficients are required".into()));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        Ok(Self { lambda: Vec::new(), coeffs, psi_hat: None })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `c_k`, one-based.
    pub fn get(&self, k: usize) -> Complex64 {
        self.coeffs[k - 1]
    }
}

/// Guillemin terms for every point in the union of the supports.
fn terms_for(
    model: &ActionModel,
    chamber: &WeylChamber,
    powers: &[WindowFunction],
    f: &TrigObservable,
) -> Result<BTreeMap<Vec<i64>, GuilleminTerm>> {
    let support: BTreeSet<Vec<i64>> = powers.iter().flat_map(|p| p.support().cloned()).collect();
    for a in &support {
        if !chamber.contains_lattice(a)? {
            return Err(Error::InvalidWindow(format!(
                "convolution support point {a:?} escapes chamber {:?}",
                chamber.signs()
            )));
        }
    }
    let support: Vec<Vec<i64>> = support.into_iter().collect();
    let terms = support
        .par_iter()
        .map(|a| guillemin_term(model, chamber, a, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(support.into_iter().zip(terms).collect())
}

/// `c_1, ..., c_K` for one `λ`.
///
/// At `λ = 0` each coefficient is `Σ_modes c_mode · q_mode` with `q_mode` an
/// exact rational, so integer-valued sums are reproduced exactly.
pub fn zeta_coefficients(
    model: &ActionModel,
    chamber: &WeylChamber,
    psi: &WindowFunction,
    lambda: &[Complex64],
    f: &TrigObservable,
    k_max: u32,
) -> Result<ZetaCoefficients> {
    if k_max == 0 {
        return Err(Error::InvalidInput("K must be at least 1".into()));
    }
    if lambda.len() != model.kappa() {
        return Err(Error::DimensionMismatch { expected: model.kappa(), got: lambda.len() });
    }
    let powers = psi.convolution_powers(k_max)?;
    let terms = terms_for(model, chamber, &powers, f)?;
    let coeffs = zeta_from_terms(&powers, &terms, lambda, f);
    Ok(ZetaCoefficients { lambda: lambda.to_vec(), coeffs, psi_hat: Some(psi.laplace_transform(lambda)?) })
}

fn zeta_from_terms(
    powers: &[WindowFunction],
    terms: &BTreeMap<Vec<i64>, GuilleminTerm>,
    lambda: &[Complex64],
    f: &TrigObservable,
) -> Vec<Complex64> {
    let modes: Vec<Complex64> = f.iter().map(|(_, c)| *c).collect();
    let real_zero = lambda.iter().all(|l| l.is_zero());
    powers
        .iter()
        .map(|p| {
            if real_zero {
                let mut q = vec![BigRational::zero(); modes.len()];
                for (a, w) in p.iter() {
                    let t = &terms[a];
                    for (i, hit) in t.hits.iter().enumerate() {
                        if *hit {
                            q[i] += w * &t.ratio;
                        }
                    }
                }
                let mut acc = ComplexSum::default();
                for (c, qi) in modes.iter().zip(&q) {
                    acc.add(c * qi.to_f64().unwrap_or(f64::NAN));
                }
                acc.value()
            } else {
                let mut acc = ComplexSum::default();
                for (a, w) in p.iter() {
                    let t = &terms[a];
                    let exponent: Complex64 = lambda.iter().zip(a).map(|(l, &x)| l * x as f64).sum();
                    let weight = (-exponent).exp() * w.to_f64().unwrap_or(f64::NAN);
                    acc.add(t.value(f) * weight);
                }
                acc.value()
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct PoleEstimate {
    pub s0: Complex64,
    /// `μ(f)`, the mean of `c_k / s0^k` over the last three indices.
    pub residue: Complex64,
    /// `c_{k+1} / c_k` for `k = 1..K-1` (NaN where `c_k = 0`).
    pub ratios: Vec<Complex64>,
    /// Largest relative deviation of the last three `c_k` from `residue·s0^k`.
    pub fit_residual: f64,
    /// The tail is zero to `1e-12 |ψ̂|^k`; `s0 = ψ̂(λ)` and the residue is 0.
    pub vanishing_tail: bool,
}

pub const RATIO_TOLERANCE: f64 = 0.1;

pub fn dominant_pole_extraction(coeffs: &ZetaCoefficients) -> Result<PoleEstimate> {
    let kk = coeffs.len();
    if kk < 6 {
        return Err(Error::InvalidInput(format!("K = {kk} < 6 coefficients")));
    }
    let c = &coeffs.coeffs;
    let ratios: Vec<Complex64> = (0..kk - 1)
        .map(|i| if c[i].is_zero() { Complex64::new(f64::NAN, f64::NAN) } else { c[i + 1] / c[i] })
        .collect();
    let scale = coeffs.psi_hat.map_or(1.0, |p| p.norm());
    let vanishing = (kk - 4..kk).all(|i| c[i].norm() <= 1e-12 * scale.powi(i as i32 + 1));
    if vanishing {
        let s0 = coeffs
            .psi_hat
            .ok_or_else(|| Error::NonConvergence("vanishing tail without a window scale".into()))?;
        return Ok(PoleEstimate { s0, residue: Complex64::zero(), ratios, fit_residual: 0.0, vanishing_tail: true });
    }
    // the last three ratios c_{k+1}/c_k
    let tail = &ratios[kk - 4..];
    if tail.iter().any(|r| !r.re.is_finite()) {
        return Err(Error::NonConvergence("zero coefficient inside the tail".into()));
    }
    let s0 = tail.iter().sum::<Complex64>() / 3.0;
    let spread = tail.iter().map(|r| (r - s0).norm()).fold(0.0, f64::max) / s0.norm();
    if !(spread <= RATIO_TOLERANCE) {
        return Err(Error::NonConvergence(format!(
            "tail ratios spread {spread:.3} exceeds {RATIO_TOLERANCE}"
        )));
    }
    let idx = kk - 3..kk;
    let residue = idx.clone().map(|i| c[i] / s0.powi(i as i32 + 1)).sum::<Complex64>() / 3.0;
    let fit_residual = idx
        .map(|i| (c[i] - residue * s0.powi(i as i32 + 1)).norm() / c[i].norm())
        .fold(0.0, f64::max);
    Ok(PoleEstimate { s0, residue, ratios, fit_residual, vanishing_tail: false })
}

#[derive(Clone, Debug)]
pub struct FlatDeterminantPoint {
    pub lambda: Vec<f64>,
    pub psi_hat: f64,
    /// `−Σ_{k<=K} c_k / k`; `None` when flagged divergent.
    pub log_d: Option<f64>,
    pub d: Option<f64>,
    /// `d / (1 - ψ̂)`.
    pub compensated: Option<f64>,
    pub divergent: bool,
}

/// Truncated flat determinant `d_ψ(λ) = exp(−Σ_{k<=K} c_k(λ, 1)/k)` on a grid.
pub fn flat_determinant(
    model: &ActionModel,
    chamber: &WeylChamber,
    psi: &WindowFunction,
    lambda_grid: &[Vec<f64>],
    k_max: u32,
) -> Result<Vec<FlatDeterminantPoint>> {
    let one = TrigObservable::constant(model.n(), 1.0);
    let powers = psi.convolution_powers(k_max)?;
    let terms = terms_for(model, chamber, &powers, &one)?;
    lambda_grid
        .iter()
        .map(|lam| {
            if lam.len() != model.kappa() {
                return Err(Error::DimensionMismatch { expected: model.kappa(), got: lam.len() });
            }
            let lc: Vec<Complex64> = lam.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            let psi_hat = psi.laplace_transform(&lc)?.re;
            if psi_hat >= 1.0 - 1e-12 {
                return Ok(FlatDeterminantPoint {
                    lambda: lam.clone(),
                    psi_hat,
                    log_d: None,
                    d: None,
                    compensated: None,
                    divergent: true,
                });
            }
            let c = zeta_from_terms(&powers, &terms, &lc, &one);
            let mut acc = crate::numerics::RealSum::default();
            for (k, ck) in c.iter().enumerate() {
                acc.add(-ck.re / (k + 1) as f64);
            }
            let log_d = acc.value();
            let d = log_d.exp();
            Ok(FlatDeterminantPoint {
                lambda: lam.clone(),
                psi_hat,
                log_d: Some(log_d),
                d: Some(d),
                compensated: Some(d / (1.0 - psi_hat)),
                divergent: false,
            })
        })
        .collect()
}
