//! Periodic points of `M^a` on the torus and sums of observables over them.
//!
//! `Fix(M^a)` is the finite group `(M^a - I)^{-1} Z^n / Z^n`, isomorphic to
//! `Z^n / (M^a - I) Z^n`. It is enumerated from the Smith normal form, and an
//! observable sums over it through the character identity
//!
//! `Σ_{x ∈ Fix} e_k(x) = |Fix|` if `k ∈ (M^a - I)^T Z^n`, else `0`.
//!
//! In the suspension picture every fixed point of `M^a` is one coset of a
//! periodic torus whose return lattice contains `a`; `∫_T f` along that coset
//! is the point value `f(x)` (Haar weight 1 per orbit point).

mod orbits;

pub use orbits::{orbit_decomposition, periodic_census, CensusRow, PeriodicTorus};

use crate::action::ActionModel;
use crate::linalg::{in_image_lattice, smith_normal_form, IntMatrix};
use crate::observable::TrigObservable;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;

/// Default cap on explicitly listed points.
pub const POINT_BUDGET: u64 = 10_000_000;

/// A rational point of `[0,1)^n` stored as `num / den` with `0 <= num_i < den`
/// and `den` minimal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RationalPoint {
    num: Vec<i64>,
    den: i64,
}

impl RationalPoint {
    pub fn new(num: Vec<i64>, den: i64) -> Self {
        assert!(den > 0);
        let num: Vec<i64> = num.into_iter().map(|x| x.rem_euclid(den)).collect();
        let g = num.iter().fold(den, |g, &x| g.gcd(&x));
        Self { num: num.into_iter().map(|x| x / g).collect(), den: den / g }
    }

    pub fn origin(n: usize) -> Self {
        Self { num: vec![0; n], den: 1 }
    }

    pub fn from_rationals(x: &[BigRational]) -> Result<Self> {
        let den = x.iter().fold(BigInt::one(), |l, q| l.lcm(q.denom()));
        let den_i = den.to_i64().ok_or_else(|| Error::Budget("point denominator exceeds i64".into()))?;
        let num = x
            .iter()
            .map(|q| (q.numer() * (&den / q.denom())).mod_floor(&den).to_i64().expect("reduced below den"))
            .collect();
        Ok(Self::new(num, den_i))
    }

    pub fn dim(&self) -> usize {
        self.num.len()
    }

    pub fn numerators(&self) -> &[i64] {
        &self.num
    }

    pub fn denominator(&self) -> i64 {
        self.den
    }

    pub fn to_rationals(&self) -> Vec<BigRational> {
        self.num.iter().map(|&x| BigRational::new(x.into(), self.den.into())).collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.num.iter().map(|&x| x as f64 / self.den as f64).collect()
    }

    /// `m x mod 1` for an integer matrix with small entries.
    pub fn apply(&self, m: &[Vec<i64>]) -> Self {
        let d = self.den as i128;
        let num = m
            .iter()
            .map(|row| {
                let s: i128 = row.iter().zip(&self.num).map(|(&a, &x)| (a as i128 % d) * x as i128).sum();
                s.rem_euclid(d) as i64
            })
            .collect();
        Self { num, den: self.den }
    }

    /// `m x mod 1` for an arbitrary-precision matrix.
    pub fn apply_big(&self, m: &IntMatrix) -> Self {
        let d = BigInt::from(self.den);
        let xs: Vec<BigInt> = self.num.iter().map(|&x| BigInt::from(x)).collect();
        let num = m.mul_vec(&xs).iter().map(|v| v.mod_floor(&d).to_i64().unwrap()).collect();
        Self { num, den: self.den }
    }

    /// Max-metric distance on the torus: `max_i min(|x_i - y_i|, 1 - |x_i - y_i|)`.
    pub fn torus_distance(&self, other: &Self) -> BigRational {
        let mut best = BigRational::zero();
        for (a, b) in self.to_rationals().iter().zip(other.to_rationals()) {
            let d = (a - &b).abs();
            let w = (BigRational::one() - &d).min(d);
            if w > best {
                best = w;
            }
        }
        best
    }
}

impl Ord for RationalPoint {
    /// Lexicographic order of coordinate values.
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.num.iter().zip(&other.num) {
            let lhs = *a as i128 * other.den as i128;
            let rhs = *b as i128 * self.den as i128;
            match lhs.cmp(&rhs) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for RationalPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

pub fn format_point(x: &RationalPoint) -> Vec<String> {
    x.num
        .iter()
        .map(|&v| {
            let q = BigRational::new(v.into(), x.den.into());
            format!("{}/{}", q.numer(), q.denom())
        })
        .collect()
}

fn singular_error(a: &[i64], kernel: Vec<BigInt>) -> Error {
    Error::NotHyperbolic {
        a: a.to_vec(),
        detail: format!(
            "M^a - I is singular; eigenvalue 1 along {:?}",
            kernel.iter().map(ToString::to_string).collect::<Vec<_>>()
        ),
    }
}

/// `|Fix(M^a)|` as the product of Smith invariant factors of `M^a - I`.
pub fn fixed_point_count(model: &ActionModel, a: &[i64]) -> Result<BigInt> {
    let shifted = model.shifted_power(a)?;
    let snf = smith_normal_form(&shifted);
    if let Some(i) = snf.diagonal.iter().position(Zero::is_zero) {
        let q = &snf.right;
        return Err(singular_error(a, (0..q.rows()).map(|r| q[(r, i)].clone()).collect()));
    }
    Ok(snf.order())
}

/// All `x ∈ [0,1)^n` with `(M^a - I) x ∈ Z^n`, sorted lexicographically.
pub fn fixed_points(model: &ActionModel, a: &[i64]) -> Result<Vec<RationalPoint>> {
    fixed_points_with_budget(model, a, POINT_BUDGET)
}

pub fn fixed_points_with_budget(model: &ActionModel, a: &[i64], budget: u64) -> Result<Vec<RationalPoint>> {
    let shifted = model.shifted_power(a)?;
    let snf = smith_normal_form(&shifted);
    let n = model.n();
    if let Some(i) = snf.diagonal.iter().position(Zero::is_zero) {
        let q = &snf.right;
        return Err(singular_error(a, (0..n).map(|r| q[(r, i)].clone()).collect()));
    }
    let order = snf.order();
    if order > BigInt::from(budget) {
        return Err(Error::Budget(format!("|Fix(M^{a:?})| = {order} exceeds the listing budget {budget}")));
    }
    // (M^a - I) x ∈ Z^n  <=>  D Q^{-1} x ∈ Z^n, so x = Q y with y_i ∈ d_i^{-1} Z
    let d: Vec<i64> = snf.diagonal.iter().map(|x| x.to_i64().unwrap()).collect();
    let top = *d.last().unwrap();
    let q_mod: Vec<Vec<i64>> = (0..n)
        .map(|r| (0..n).map(|c| snf.right[(r, c)].mod_floor(&BigInt::from(top)).to_i64().unwrap()).collect())
        .collect();
    let mut out = Vec::with_capacity(order.to_usize().unwrap());
    let mut idx = vec![0i64; n];
    loop {
        // y_i = idx_i / d_i = idx_i (top / d_i) / top
        let y: Vec<i64> = (0..n).map(|i| idx[i] * (top / d[i])).collect();
        let num: Vec<i64> = (0..n)
            .map(|r| {
                let s: i128 = (0..n).map(|c| q_mod[r][c] as i128 * y[c] as i128).sum();
                s.rem_euclid(top as i128) as i64
            })
            .collect();
        out.push(RationalPoint::new(num, top));
        let mut i = n;
        loop {
            if i == 0 {
                out.sort();
                return Ok(out);
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < d[i] {
                break;
            }
            idx[i] = 0;
        }
    }
}

/// `Σ_{x ∈ Fix(M^a)} f(x)` through the character identity.
pub fn orbit_sum(model: &ActionModel, a: &[i64], f: &TrigObservable) -> Result<Complex64> {
    let (count, hit) = orbit_sum_parts(model, a, f)?;
    Ok(hit * count.to_f64().unwrap_or(f64::INFINITY))
}

/// `(|det(M^a - I)|, Σ_{k ∈ (M^a - I)^T Z^n} c_k)`; the orbit sum is the product.
pub fn orbit_sum_parts(model: &ActionModel, a: &[i64], f: &TrigObservable) -> Result<(BigInt, Complex64)> {
    check_dim(model, f)?;
    let shifted = model.shifted_power(a)?;
    let det = shifted.det();
    if det.is_zero() {
        let snf = smith_normal_form(&shifted);
        let i = snf.diagonal.iter().position(Zero::is_zero).unwrap();
        return Err(singular_error(a, (0..model.n()).map(|r| snf.right[(r, i)].clone()).collect()));
    }
    let at = shifted.transpose();
    let mut hit = Complex64::zero();
    for (k, c) in f.iter() {
        let kb: Vec<BigInt> = k.iter().map(|&x| BigInt::from(x)).collect();
        if in_image_lattice(&at, &kb).expect("nonsingular") {
            hit += c;
        }
    }
    Ok((det.abs(), hit))
}

/// Direct `Σ_{x ∈ Fix(M^a)} f(x)` over the enumerated points (compensated sum).
pub fn orbit_sum_direct(model: &ActionModel, a: &[i64], f: &TrigObservable) -> Result<Complex64> {
    check_dim(model, f)?;
    let pts = fixed_points(model, a)?;
    let mut acc = crate::numerics::ComplexSum::default();
    for x in &pts {
        acc.add(f.eval_rational(&x.to_rationals()));
    }
    Ok(acc.value())
}

fn check_dim(model: &ActionModel, f: &TrigObservable) -> Result<()> {
    if f.dim() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: f.dim() });
    }
    Ok(())
}
