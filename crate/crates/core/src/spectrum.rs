//! Finite Fourier-mode model of the averaged transfer operator
//! `R_ψ(λ) = Σ_a ψ(a) e^{-λ(a)} U_a`, `(U_a f)(x) = f(M^{-a} x)`.
//!
//! `U_a` sends the mode `e_k` to `e_{(M^{-a})^T k}`. Modes leaving the box
//! `|k|∞ <= Kmax` are dropped. The operator is stored in weighted coordinates
//! `u_k = w(k) f_k`, so the weighted norm is the Euclidean norm of `u`.
//!
//! This is an analogy layer: a truncated, weighted `ℓ²` model of the
//! anisotropic spaces, not those spaces themselves. On nonzero modes the
//! truncation is nilpotent, so its spectrum is `{ψ̂(λ), 0}`.

use crate::action::{ActionModel, WeylChamber};
use crate::geometry::WindowFunction;
use crate::numerics::{fmt_f64, RealSum};
use crate::observable::TrigObservable;
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use std::io::Write;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Modes `|k|∞ <= Kmax` in lexicographic order with anisotropic weights.
#[derive(Clone, Debug)]
pub struct FourierBox {
    n: usize,
    kmax: i64,
    weight_exponent: f64,
    signs: Vec<i8>,
    weights: Vec<f64>,
    /// `|π_u k|`, `|π_s k|` per mode.
    projections: Vec<(f64, f64)>,
}

impl FourierBox {
    pub fn new(model: &ActionModel, chamber: &WeylChamber, kmax: i64, weight_exponent: f64) -> Result<Self> {
        if kmax < 1 {
            return Err(Error::InvalidInput(format!("Kmax = {kmax} must be at least 1")));
        }
        if !(weight_exponent > 0.0 && weight_exponent.is_finite()) {
            return Err(Error::InvalidInput(format!("weight exponent N = {weight_exponent} must be positive")));
        }
        let n = model.n();
        let side = (2 * kmax + 1) as u64;
        let total = side.checked_pow(n as u32).filter(|&t| t <= 5_000_000).ok_or_else(|| {
            Error::Budget(format!("Fourier box with Kmax = {kmax} in dimension {n} is too large"))
        })? as usize;
        let s = model.spectral()?;
        let unstable = chamber.unstable_indices();
        let stable = chamber.stable_indices();
        let mut weights = Vec::with_capacity(total);
        let mut projections = Vec::with_capacity(total);
        for idx in 0..total {
            let k = Self::decode(n, kmax, idx);
            // k = Σ_i c_i W_i with c = V^T k and W_i the dual rows
            let coeff: Vec<Complex64> =
                (0..n).map(|i| (0..n).map(|r| s.vectors[(r, i)] * k[r] as f64).sum()).collect();
            let part = |set: &[usize]| -> f64 {
                (0..n)
                    .map(|col| set.iter().map(|&i| coeff[i] * s.dual[(i, col)]).sum::<Complex64>().norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            };
            let (pu, ps) = if idx == Self::zero_index(n, kmax) { (0.0, 0.0) } else { (part(&unstable), part(&stable)) };
            weights.push(((1.0 + pu) / (1.0 + ps)).powf(weight_exponent));
            projections.push((pu, ps));
        }
        Ok(Self { n, kmax, weight_exponent, signs: chamber.signs().to_vec(), weights, projections })
    }

    fn decode(n: usize, kmax: i64, mut idx: usize) -> Vec<i64> {
        let side = (2 * kmax + 1) as usize;
        let mut k = vec![0i64; n];
        for c in (0..n).rev() {
            k[c] = (idx % side) as i64 - kmax;
            idx /= side;
        }
        k
    }

    fn zero_index(n: usize, kmax: i64) -> usize {
        let side = (2 * kmax + 1) as usize;
        (0..n).fold(0, |acc, _| acc * side + kmax as usize)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kmax(&self) -> i64 {
        self.kmax
    }

    pub fn weight_exponent(&self) -> f64 {
        self.weight_exponent
    }

    pub fn chamber_signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn mode(&self, idx: usize) -> Vec<i64> {
        Self::decode(self.n, self.kmax, idx)
    }

    pub fn index_of(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.n || k.iter().any(|c| c.abs() > self.kmax) {
            return None;
        }
        let side = (2 * self.kmax + 1) as usize;
        Some(k.iter().fold(0, |acc, &c| acc * side + (c + self.kmax) as usize))
    }

    pub fn zero(&self) -> usize {
        Self::zero_index(self.n, self.kmax)
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.weights[idx]
    }

    pub fn projections(&self, idx: usize) -> (f64, f64) {
        self.projections[idx]
    }

    /// Weighted coordinates of `f`; errors if a mode lies outside the box.
    pub fn embed(&self, f: &TrigObservable) -> Result<Vec<Complex64>> {
        if f.dim() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: f.dim() });
        }
        let mut u = vec![ZERO; self.len()];
        for (k, c) in f.iter() {
            let i = self
                .index_of(k)
                .ok_or_else(|| Error::InvalidInput(format!("mode {k:?} lies outside the box |k| <= {}", self.kmax)))?;
            u[i] = c * self.weights[i];
        }
        Ok(u)
    }
}

/// Sparse operator in weighted coordinates, stored row-compressed.
#[derive(Clone, Debug)]
pub struct KoopmanOperator {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
    /// `(block, k)` per coordinate; the block index separates direct summands.
    labels: Vec<(usize, Vec<i64>)>,
    /// Coordinates of the constant modes, one per block.
    constants: Vec<usize>,
    psi_hat: Complex64,
    /// `Σ_a |ψ(a) e^{-λ(a)}| max_{edges of a, k != 0} w(k')/w(k)`.
    edge_bound: f64,
    warning: Option<String>,
}

pub fn koopman_matrix(
    model: &ActionModel,
    chamber: &WeylChamber,
    psi: &WindowFunction,
    lambda: &[Complex64],
    fbox: &FourierBox,
) -> Result<KoopmanOperator> {
    if psi.dim() != model.kappa() {
        return Err(Error::DimensionMismatch { expected: model.kappa(), got: psi.dim() });
    }
    if fbox.dim() != model.n() || fbox.chamber_signs() != chamber.signs() {
        return Err(Error::InvalidInput("Fourier box was built for a different model or chamber".into()));
    }
    if lambda.len() != model.kappa() {
        return Err(Error::DimensionMismatch { expected: model.kappa(), got: lambda.len() });
    }
    if lambda.iter().any(|l| l.im.abs() > 50.0) {
        return Err(Error::InvalidInput("|Im λ| is capped at 50".into()));
    }
    let mut maps = Vec::new();
    for (a, w) in psi.iter() {
        if !chamber.contains_lattice(a)? {
            return Err(Error::InvalidWindow(format!("window point {a:?} is outside chamber {:?}", chamber.signs())));
        }
        let minus: Vec<i64> = a.iter().map(|v| -v).collect();
        let b = model
            .matrix_power(&minus)?
            .transpose()
            .to_i64_rows()
            .ok_or_else(|| Error::Budget(format!("entries of M^-{a:?} exceed i64")))?;
        let phase: Complex64 = a.iter().zip(lambda).map(|(&ai, l)| l * ai as f64).sum();
        let coef = w.to_f64().unwrap_or(f64::NAN) * (-phase).exp();
        maps.push((b, coef));
    }
    let psi_hat: Complex64 = maps.iter().map(|(_, c)| *c).sum();
    let zero = fbox.zero();
    // per source column: (row, value) pairs and the largest weight ratio per map
    type Column = (Vec<(usize, Complex64)>, Vec<f64>);
    let columns: Vec<Column> = (0..fbox.len())
        .into_par_iter()
        .map(|j| {
            let k = fbox.mode(j);
            let mut out = Vec::with_capacity(maps.len());
            let mut ratios = vec![0.0f64; maps.len()];
            for (m, (b, coef)) in maps.iter().enumerate() {
                let img: Vec<i64> = b.iter().map(|row| row.iter().zip(&k).map(|(x, y)| x * y).sum()).collect();
                if let Some(i) = fbox.index_of(&img) {
                    let r = fbox.weight(i) / fbox.weight(j);
                    if j != zero {
                        ratios[m] = ratios[m].max(r);
                    }
                    out.push((i, coef * r));
                }
            }
            (out, ratios)
        })
        .collect();
    let mut triples: Vec<(usize, usize, Complex64)> = Vec::new();
    let mut max_ratio = vec![0.0f64; maps.len()];
    for (j, (col, ratios)) in columns.into_iter().enumerate() {
        triples.extend(col.into_iter().map(|(i, v)| (i, j, v)));
        max_ratio.iter_mut().zip(ratios).for_each(|(m, r)| *m = m.max(r));
    }
    let edge_bound = maps.iter().zip(&max_ratio).map(|((_, c), r)| c.norm() * r).sum();
    let warning = if triples.iter().all(|&(_, j, _)| j == zero) {
        Some(format!("Kmax = {} keeps no image of any nonzero mode", fbox.kmax()))
    } else {
        None
    };
    let labels = (0..fbox.len()).map(|i| (0, fbox.mode(i))).collect();
    let mut op = KoopmanOperator::from_triples(fbox.len(), triples, labels, vec![zero], psi_hat, edge_bound);
    op.warning = warning;
    Ok(op)
}

impl KoopmanOperator {
    fn from_triples(
        dim: usize,
        mut triples: Vec<(usize, usize, Complex64)>,
        labels: Vec<(usize, Vec<i64>)>,
        constants: Vec<usize>,
        psi_hat: Complex64,
        edge_bound: f64,
    ) -> Self {
        triples.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(triples.len());
        let mut vals: Vec<Complex64> = Vec::with_capacity(triples.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in triples {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((i, j));
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { row_ptr, cols, vals, labels, constants, psi_hat, edge_bound, warning: None }
    }

    /// Block-diagonal sum; models a disjoint union of tori.
    pub fn direct_sum(a: &Self, b: &Self) -> Result<Self> {
        if (a.psi_hat - b.psi_hat).norm() > 1e-15 {
            return Err(Error::InvalidInput("direct summands need the same window transform".into()));
        }
        let off = a.dim();
        let blocks = a.labels.iter().map(|l| l.0).max().unwrap_or(0) + 1;
        let mut triples: Vec<(usize, usize, Complex64)> = a.triples().collect();
        triples.extend(b.triples().map(|(i, j, v)| (i + off, j + off, v)));
        let labels =
            a.labels.iter().cloned().chain(b.labels.iter().map(|(blk, k)| (blk + blocks, k.clone()))).collect();
        let constants = a.constants.iter().copied().chain(b.constants.iter().map(|c| c + off)).collect();
        let mut op =
            Self::from_triples(off + b.dim(), triples, labels, constants, a.psi_hat, a.edge_bound.max(b.edge_bound));
        op.warning = a.warning.clone().or_else(|| b.warning.clone());
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn psi_hat(&self) -> Complex64 {
        self.psi_hat
    }

    pub fn edge_bound(&self) -> f64 {
        self.edge_bound
    }

    pub fn warning(&self) -> Option<&str> {
        self.warning.as_deref()
    }

    pub fn labels(&self) -> &[(usize, Vec<i64>)] {
        &self.labels
    }

    pub fn constant_modes(&self) -> &[usize] {
        &self.constants
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.cols[s..e].binary_search(&j) {
            Ok(p) => self.vals[s + p],
            Err(_) => ZERO,
        }
    }

    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim()).flat_map(move |i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.cols[p], self.vals[p])))
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|p| self.vals[p] * x[self.cols[p]]).sum())
            .collect()
    }

    pub fn apply_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.dim()];
        for (i, j, v) in self.triples() {
            y[j] += v.conj() * x[i];
        }
        y
    }

    /// Coordinate text: one `row col re im` line per stored entry.
    pub fn write_coo<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "% {} {} {}", self.dim(), self.dim(), self.nnz())?;
        for (i, j, v) in self.triples() {
            writeln!(w, "{} {} {} {}", i, j, fmt_f64(v.re), fmt_f64(v.im))?;
        }
        Ok(())
    }

    /// Largest singular value of `R` restricted to non-constant modes, by
    /// power iteration on `R* R`.
    pub fn nonconstant_norm(&self, iters: usize) -> f64 {
        let mut x: Vec<Complex64> = (0..self.dim()).map(|i| Complex64::new(1.0 + (i % 7) as f64, 0.0)).collect();
        let strip = |v: &mut Vec<Complex64>| self.constants.iter().for_each(|&c| v[c] = ZERO);
        strip(&mut x);
        let mut sigma = 0.0;
        for _ in 0..iters {
            let nx = norm(&x);
            if nx == 0.0 {
                return 0.0;
            }
            x.iter_mut().for_each(|v| *v /= nx);
            let mut y = self.apply(&x);
            strip(&mut y);
            let mut z = self.apply_adjoint(&y);
            strip(&mut z);
            sigma = norm(&y);
            x = z;
        }
        sigma
    }
}

fn norm(x: &[Complex64]) -> f64 {
    let mut s = RealSum::default();
    x.iter().for_each(|v| s.add(v.norm_sqr()));
    s.value().sqrt()
}

fn inner(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct ModeCoefficient {
    pub block: usize,
    pub k: Vec<i64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub eigenvalue: Complex64,
    /// Weighted coordinates, unit norm, largest entry real positive.
    #[serde(skip)]
    pub eigenvector: Vec<Complex64>,
    /// Nonzero entries of the eigenvector as plain mode coefficients.
    pub eigenvector_modes: Vec<ModeCoefficient>,
    pub residual: f64,
    /// Spectral radius estimate of the deflated operator; 0 when it is nilpotent on the probe.
    pub second_modulus: f64,
    /// `max_j (|D^j x| / |x|)^{1/j}` of the deflated iteration.
    pub transient_rate: f64,
    pub iterations: usize,
    pub deflated_iterations: usize,
}

fn power_iteration(
    apply: impl Fn(&[Complex64]) -> Vec<Complex64>,
    mut x: Vec<Complex64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Complex64, Vec<Complex64>, f64, usize)> {
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    for it in 1..=max_iter {
        let y = apply(&x);
        let mu = inner(&x, &y);
        let resid = norm(&y.iter().zip(&x).map(|(a, b)| a - mu * b).collect::<Vec<_>>());
        let ny = norm(&y);
        if ny == 0.0 {
            return Err(Error::Degenerate("power iteration reached the zero vector".into()));
        }
        if resid <= tol * mu.norm().max(f64::MIN_POSITIVE) {
            return Ok(polish(&apply, x, mu, resid, it));
        }
        x = y.into_iter().map(|v| v / ny).collect();
    }
    Err(Error::NonConvergence(format!("power iteration did not reach tol {tol:e} in {max_iter} steps")))
}

/// Extra steps after convergence while the residual still shrinks, so that a
/// nilpotent remainder is flushed to exact zeros.
fn polish(
    apply: &impl Fn(&[Complex64]) -> Vec<Complex64>,
    mut x: Vec<Complex64>,
    mut mu: Complex64,
    mut resid: f64,
    mut it: usize,
) -> (Complex64, Vec<Complex64>, f64, usize) {
    for _ in 0..64 {
        if resid == 0.0 {
            break;
        }
        let y = apply(&x);
        let ny = norm(&y);
        if ny == 0.0 {
            break;
        }
        let nx: Vec<Complex64> = y.into_iter().map(|v| v / ny).collect();
        let y2 = apply(&nx);
        let mu2 = inner(&nx, &y2);
        let r2 = norm(&y2.iter().zip(&nx).map(|(a, b)| a - mu2 * b).collect::<Vec<_>>());
        if !(r2 < resid) {
            break;
        }
        (x, mu, resid, it) = (nx, mu2, r2, it + 1);
    }
    (mu, x, resid, it)
}

fn normalize_phase(v: &mut [Complex64]) {
    let big = v.iter().copied().fold(ZERO, |b, z| if z.norm() > b.norm() { z } else { b });
    if big.norm() > 0.0 {
        let p = big.conj() / big.norm();
        v.iter_mut().for_each(|z| *z *= p);
    }
}

/// Leading eigenpair by power iteration from the all-ones vector, plus a
/// deflated power iteration for the rest of the spectrum.
pub fn leading_spectrum(op: &KoopmanOperator, fbox_weights: &[f64], tol: f64, max_iter: usize) -> Result<SpectralReport> {
    if fbox_weights.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: fbox_weights.len() });
    }
    let ones = vec![Complex64::new(1.0, 0.0); op.dim()];
    let (mu, mut v, residual, iterations) = power_iteration(|x| op.apply(x), ones.clone(), tol, max_iter)?;
    normalize_phase(&mut v);
    let (_, left, _, _) = power_iteration(|x| op.apply_adjoint(x), ones, tol, max_iter)?;
    let lv = inner(&left, &v);
    if lv.norm() < 1e-12 {
        return Err(Error::Degenerate("left and right leading eigenvectors are orthogonal".into()));
    }
    let deflate = |x: &mut Vec<Complex64>| {
        let c = inner(&left, x) / lv;
        x.iter_mut().zip(&v).for_each(|(xi, vi)| *xi -= c * vi);
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut x: Vec<Complex64> = (0..op.dim()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    deflate(&mut x);
    let n0 = norm(&x);
    let mut ratios: Vec<f64> = Vec::new();
    let mut transient: f64 = 0.0;
    let mut growth = 1.0;
    let mut vanished = n0 == 0.0;
    let mut deflated_iterations = 0;
    if !vanished {
        x.iter_mut().for_each(|z| *z /= n0);
        for j in 1..=max_iter {
            deflated_iterations = j;
            let mut y = op.apply(&x);
            deflate(&mut y);
            let ny = norm(&y);
            // below this the remainder is round-off left by the deflation
            if ny <= 1e-14 {
                vanished = true;
                break;
            }
            ratios.push(ny);
            growth *= ny;
            transient = transient.max(growth.powf(1.0 / j as f64));
            x = y.into_iter().map(|z| z / ny).collect();
            if ratios.len() >= 20 {
                let tail = &ratios[ratios.len() - 10..];
                let spread = tail.iter().cloned().fold(f64::MIN, f64::max) - tail.iter().cloned().fold(f64::MAX, f64::min);
                if spread <= tol.max(1e-9) * tail[9].max(1e-300) {
                    break;
                }
            }
        }
    }
    let second_modulus = if vanished {
        0.0
    } else {
        let tail = &ratios[ratios.len().saturating_sub(10)..];
        (tail.iter().map(|r| r.ln()).sum::<f64>() / tail.len() as f64).exp()
    };
    let eigenvector_modes = v
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 0.0)
        .map(|(i, c)| {
            let plain = c / fbox_weights[i];
            ModeCoefficient { block: op.labels[i].0, k: op.labels[i].1.clone(), re: plain.re, im: plain.im }
        })
        .collect();
    Ok(SpectralReport {
        eigenvalue: mu,
        eigenvector: v,
        eigenvector_modes,
        residual,
        second_modulus,
        transient_rate: transient,
        iterations,
        deflated_iterations,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectorTable {
    /// `‖R^j f − Σ_c f_c e_c‖` for `j = 0..=kmax`, `c` over constant modes.
    pub distances: Vec<f64>,
    /// Constant-mode coefficients of `R^kmax f`.
    pub limit_coefficients: Vec<Complex64>,
    /// First `j` with distance exactly zero.
    pub settled_at: Option<usize>,
}

pub fn iterate_to_projector(op: &KoopmanOperator, f: &[Complex64], kmax: usize) -> Result<ProjectorTable> {
    if f.len() != op.dim() {
        return Err(Error::DimensionMismatch { expected: op.dim(), got: f.len() });
    }
    let target: Vec<(usize, Complex64)> = op.constants.iter().map(|&c| (c, f[c])).collect();
    let dist = |x: &[Complex64]| {
        let mut d: Vec<Complex64> = x.to_vec();
        target.iter().for_each(|&(c, v)| d[c] -= v);
        norm(&d)
    };
    let mut x = f.to_vec();
    let mut distances = vec![dist(&x)];
    for _ in 0..kmax {
        x = op.apply(&x);
        distances.push(dist(&x));
    }
    let settled_at = distances.iter().position(|&d| d == 0.0);
    let limit_coefficients = op.constants.iter().map(|&c| x[c]).collect();
    Ok(ProjectorTable { distances, limit_coefficients, settled_at })
}

/// Steps until every image word of the nonzero `modes` has left the box,
/// computed on mode sets without the matrix.
pub fn mode_escape_time(
    model: &ActionModel,
    psi: &WindowFunction,
    kmax: i64,
    modes: &[Vec<i64>],
) -> Result<usize> {
    let maps: Vec<Vec<Vec<i64>>> = psi
        .support()
        .map(|a| {
            let minus: Vec<i64> = a.iter().map(|v| -v).collect();
            model.matrix_power(&minus)?.transpose().to_i64_rows().ok_or_else(|| Error::Budget("entries exceed i64".into()))
        })
        .collect::<Result<_>>()?;
    let mut current: BTreeSet<Vec<i64>> = modes.iter().filter(|k| k.iter().any(|&c| c != 0)).cloned().collect();
    let mut steps = 0;
    let cap = (2 * kmax as usize + 1).pow(model.n() as u32) + 1;
    while !current.is_empty() {
        if steps > cap {
            return Err(Error::NonConvergence("mode orbit did not leave the box".into()));
        }
        let mut next = BTreeSet::new();
        for k in &current {
            for b in &maps {
                let img: Vec<i64> = b.iter().map(|row| row.iter().zip(k).map(|(x, y)| x * y).sum()).collect();
                if img.iter().all(|c| c.abs() <= kmax) {
                    next.insert(img);
                }
            }
        }
        current = next;
        steps += 1;
    }
    Ok(steps)
}

/// Numerical rank of `lim R^j` on random probes; needs `ψ̂(λ) = 1`.
pub fn projector_rank(op: &KoopmanOperator, probes: usize, rng_seed: u64, max_iter: usize) -> Result<usize> {
    if (op.psi_hat - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
        return Err(Error::InvalidInput(format!("projector rank needs ψ̂(λ) = 1, got {}", op.psi_hat)));
    }
    if probes == 0 {
        return Err(Error::InvalidInput("at least one probe is needed".into()));
    }
    let settled: Vec<Vec<Complex64>> = (0..probes as u64)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(p);
            let mut x: Vec<Complex64> =
                (0..op.dim()).map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
            let nx = norm(&x);
            x.iter_mut().for_each(|v| *v /= nx);
            for _ in 0..max_iter {
                let y = op.apply(&x);
                let step = norm(&y.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
                x = y;
                if step <= 1e-13 {
                    return Ok(x);
                }
            }
            Err(Error::NonConvergence(format!("R^j did not settle within {max_iter} steps")))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<usize> = (0..op.dim()).filter(|&i| settled.iter().any(|x| x[i].norm() > 0.0)).collect();
    if rows.is_empty() {
        return Ok(0);
    }
    let m = DMatrix::from_fn(rows.len(), probes, |r, c| settled[c][rows[r]]);
    let sv = m.svd(false, false).singular_values;
    Ok(sv.iter().filter(|&&s| s > 1e-8).count())
}

/// Plain box weights of an operator built by [`koopman_matrix`], or the
/// concatenation for a direct sum.
pub fn weights_of(boxes: &[&FourierBox]) -> Vec<f64> {
    boxes.iter().flat_map(|b| (0..b.len()).map(move |i| b.weight(i))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::models;

    fn cat_setup(kmax: i64) -> (ActionModel, WeylChamber, WindowFunction, FourierBox) {
        let m = models::cat_map();
        let ch = m.chamber_of(&[1]).unwrap();
        let psi = WindowFunction::uniform(&[vec![1], vec![2]]).unwrap();
        let fb = FourierBox::new(&m, &ch, kmax, 4.0).unwrap();
        (m, ch, psi, fb)
    }

    #[test]
    fn box_weights() {
        let (_, _, _, fb) = cat_setup(5);
        assert_eq!(fb.len(), 121);
        assert_eq!(fb.weight(fb.zero()), 1.0);
        assert!((0..fb.len()).all(|i| fb.weight(i) > 0.0));
        for i in 0..fb.len() {
            assert_eq!(fb.index_of(&fb.mode(i)), Some(i));
        }
        // π_u + π_s reproduces k: for n = 2 the parts are orthogonal-free lines, check |k| ≤ |π_u k| + |π_s k|
        for i in 0..fb.len() {
            let k = fb.mode(i);
            let (pu, ps) = fb.projections(i);
            let nk = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt();
            assert!(nk <= pu + ps + 1e-9);
        }
    }

    #[test]
    fn pattern_matches_brute_force() {
        let (m, ch, psi, fb) = cat_setup(30);
        let op = koopman_matrix(&m, &ch, &psi, &[Complex64::new(0.0, 0.0)], &fb).unwrap();
        assert_eq!(op.entry(fb.zero(), fb.zero()), Complex64::new(1.0, 0.0));
        // oracle: images from the inverse powers written out by hand
        let inv = [[[1i64, -1], [-1, 2]], [[2, -3], [-3, 5]]];
        let mut expected = BTreeSet::new();
        for i in 0..fb.len() {
            let k = fb.mode(i);
            for b in &inv {
                let img = vec![b[0][0] * k[0] + b[1][0] * k[1], b[0][1] * k[0] + b[1][1] * k[1]];
                if let Some(j) = fb.index_of(&img) {
                    expected.insert((j, i));
                }
            }
        }
        let got: BTreeSet<(usize, usize)> = op.triples().map(|(i, j, _)| (i, j)).collect();
        assert_eq!(got, expected);
        assert!(op.warning().is_none());
    }

    #[test]
    fn dirac_is_scaled_subpermutation() {
        let (m, ch, _, fb) = cat_setup(10);
        let op = koopman_matrix(&m, &ch, &WindowFunction::dirac(vec![1]), &[Complex64::new(0.3, 0.0)], &fb).unwrap();
        let s = (-0.3f64).exp();
        let mut rows = BTreeSet::new();
        let mut cols = BTreeSet::new();
        for (i, j, v) in op.triples() {
            assert!(rows.insert(i) && cols.insert(j));
            let r = fb.weight(i) / fb.weight(j);
            assert!((v - Complex64::new(s * r, 0.0)).norm() < 1e-12 * s * r.max(1.0));
        }
        assert_eq!(op.entry(fb.zero(), fb.zero()), Complex64::new(s, 0.0));
    }

    #[test]
    fn leading_pair_at_zero() {
        let (m, ch, psi, fb) = cat_setup(30);
        let op = koopman_matrix(&m, &ch, &psi, &[Complex64::new(0.0, 0.0)], &fb).unwrap();
        let rep = leading_spectrum(&op, &weights_of(&[&fb]), 1e-12, 500).unwrap();
        assert!((rep.eigenvalue - 1.0).norm() <= 1e-12);
        let r = op.apply(&rep.eigenvector);
        assert!(norm(&r.iter().zip(&rep.eigenvector).map(|(a, b)| a - rep.eigenvalue * b).collect::<Vec<_>>()) <= 1e-12);
        assert!(rep.second_modulus <= 0.5);
        assert_eq!(rep.eigenvector_modes.len(), 1);
        assert_eq!(rep.residual, 0.0);
        assert!(rep.second_modulus < rep.eigenvalue.norm());
        let dirac = koopman_matrix(&m, &ch, &WindowFunction::dirac(vec![1]), &[Complex64::new(0.0, 0.0)], &fb).unwrap();
        let rd = leading_spectrum(&dirac, &weights_of(&[&fb]), 1e-12, 500).unwrap();
        assert!((rd.eigenvalue - 1.0).norm() <= 1e-12);
        assert_eq!(rd.eigenvector_modes.len(), 1);
        assert_eq!(rd.eigenvector_modes[0].k, vec![0, 0]);
    }

    #[test]
    fn escape_matches_projector_table() {
        let (m, ch, psi, fb) = cat_setup(30);
        let op = koopman_matrix(&m, &ch, &psi, &[Complex64::new(0.0, 0.0)], &fb).unwrap();
        for k in [vec![1i64, 0], vec![3, -2], vec![0, 7]] {
            let f = TrigObservable::mode(&k).add(&TrigObservable::constant(2, 1.0)).unwrap();
            let table = iterate_to_projector(&op, &fb.embed(&f).unwrap(), 30).unwrap();
            let esc = mode_escape_time(&m, &psi, 30, std::slice::from_ref(&k)).unwrap();
            assert_eq!(table.settled_at, Some(esc), "k = {k:?}");
            assert!(table.distances[..esc].iter().all(|&d| d > 0.0));
            assert_eq!(table.limit_coefficients, vec![Complex64::new(1.0, 0.0)]);
        }
        let one = fb.embed(&TrigObservable::constant(2, 1.0)).unwrap();
        assert!(iterate_to_projector(&op, &one, 5).unwrap().distances.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn contraction_bound_and_ranks() {
        let (m, ch, psi, fb) = cat_setup(20);
        let op = koopman_matrix(&m, &ch, &psi, &[Complex64::new(0.0, 0.0)], &fb).unwrap();
        assert!(op.nonconstant_norm(200) <= op.edge_bound() * (1.0 + 1e-9));
        assert_eq!(projector_rank(&op, 4, 9, 1000).unwrap(), 1);
        let sum = KoopmanOperator::direct_sum(&op, &op).unwrap();
        assert_eq!(projector_rank(&sum, 4, 9, 1000).unwrap(), 2);
        let mut sink = Vec::new();
        op.write_coo(&mut sink).unwrap();
        assert_eq!(String::from_utf8(sink).unwrap().lines().count(), op.nnz() + 1);
    }

    #[test]
    fn cubic_leading_pair_is_box_independent() {
        let m = models::cubic_rank2();
        let ch = m.chamber_of(&[1, 1]).unwrap();
        let psi = WindowFunction::uniform(&[vec![2, 3], vec![3, 3]]).unwrap();
        let lam = [Complex64::new(0.05, 0.0), Complex64::new(-0.02, 0.0)];
        let mut values = Vec::new();
        for kmax in [4, 8] {
            let fb = FourierBox::new(&m, &ch, kmax, 4.0).unwrap();
            let op = koopman_matrix(&m, &ch, &psi, &lam, &fb).unwrap();
            let rep = leading_spectrum(&op, &weights_of(&[&fb]), 1e-12, 500).unwrap();
            assert!((rep.eigenvalue - op.psi_hat()).norm() <= 1e-12);
            values.push(rep.eigenvalue);
            if kmax == 4 {
                assert_eq!(projector_rank(&koopman_matrix(&m, &ch, &psi, &[ZERO, ZERO], &fb).unwrap(), 3, 1, 1000).unwrap(), 1);
            }
        }
        assert!((values[0] - values[1]).norm() <= 1e-10);
    }
}
