//! Cone-averaged Birkhoff sums `(1/#) Σ_{a ∈ Z^κ ∩ C, e1(a) <= T} f(M^{-a} x)`.
//!
//! Orbits are iterated in double precision with reduction mod 1 after every
//! generator step; the computed orbit shadows a true orbit, which is all a
//! space-average statement needs.

use crate::action::{ActionModel, WeylChamber};
use crate::geometry::ConeSpec;
use crate::numerics::{ComplexSum, RealSum};
use crate::observable::TrigObservable;
use crate::{Error, Result};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Slab points `e1(a) <= T` with their `e1` values, shared across seeds.
#[derive(Clone, Debug)]
pub struct ConeWindow {
    points: Vec<Vec<i64>>,
    e1: Vec<f64>,
    t: f64,
}

impl ConeWindow {
    pub fn new(cone: &ConeSpec, t: f64) -> Result<Self> {
        let hi = BigRational::from_f64(t).ok_or_else(|| Error::InvalidInput(format!("T = {t}")))?;
        let points = cone.slab_lattice_points(&BigRational::zero(), &hi)?;
        if points.is_empty() {
            return Err(Error::EmptySlab { lo: "0".into(), hi: format!("{t}") });
        }
        let e1 = points
            .iter()
            .map(|a| num_traits::ToPrimitive::to_f64(&cone.e1_of_lattice(a)).unwrap())
            .collect();
        Ok(Self { points, e1, t })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicPoint {
    pub t: f64,
    pub count: usize,
    pub average: Complex64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitAverageResult {
    pub seed: Vec<f64>,
    pub t: f64,
    pub count: usize,
    pub average: Complex64,
    /// Averages at `T/2^j` for every `j` leaving a nonempty slab, ascending in `T`.
    pub trace: Vec<DyadicPoint>,
}

/// Step matrices: `M_j^{-1}` for positive exponents, `M_j` for negative ones.
struct Steps {
    inv: Vec<Vec<Vec<i64>>>,
    fwd: Vec<Vec<Vec<i64>>>,
}

impl Steps {
    fn new(model: &ActionModel) -> Result<Self> {
        let conv = |m: &crate::linalg::IntMatrix| {
            m.to_i64_rows().ok_or_else(|| Error::Budget("generator entries exceed i64".into()))
        };
        Ok(Self {
            inv: model.inverses()?.iter().map(conv).collect::<Result<_>>()?,
            fwd: model.generators().iter().map(conv).collect::<Result<_>>()?,
        })
    }

    /// `M^{-a} x mod 1`, one generator step at a time.
    fn pull_back(&self, a: &[i64], x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        let mut tmp = vec![0.0; y.len()];
        for (j, &e) in a.iter().enumerate() {
            let m = if e >= 0 { &self.inv[j] } else { &self.fwd[j] };
            for _ in 0..e.unsigned_abs() {
                for (t, row) in tmp.iter_mut().zip(m) {
                    let s: f64 = row.iter().zip(&y).map(|(&c, v)| c as f64 * v).sum();
                    *t = s - s.floor();
                }
                std::mem::swap(&mut y, &mut tmp);
            }
        }
        y
    }
}

fn averages(window: &ConeWindow, values: &[Vec<Complex64>], nf: usize, seed: &[f64]) -> Vec<OrbitAverageResult> {
    let mut thresholds = vec![window.t];
    let min_e1 = window.e1.iter().cloned().fold(f64::INFINITY, f64::min);
    while thresholds.last().unwrap() / 2.0 >= min_e1 {
        let next = thresholds.last().unwrap() / 2.0;
        thresholds.push(next);
    }
    thresholds.reverse();
    (0..nf)
        .map(|fi| {
            let trace: Vec<DyadicPoint> = thresholds
                .iter()
                .map(|&t| {
                    let mut acc = ComplexSum::default();
                    let mut count = 0;
                    for (e, v) in window.e1.iter().zip(values) {
                        if *e <= t {
                            acc.add(v[fi]);
                            count += 1;
                        }
                    }
                    DyadicPoint { t, count, average: acc.value() / count as f64 }
                })
                .collect();
            let last = trace.last().unwrap();
            OrbitAverageResult {
                seed: seed.to_vec(),
                t: window.t,
                count: last.count,
                average: last.average,
                trace,
            }
        })
        .collect()
}

/// Cone averages of several observables along one seed.
pub fn cone_average_many(
    model: &ActionModel,
    window: &ConeWindow,
    x0: &[f64],
    fs: &[TrigObservable],
) -> Result<Vec<OrbitAverageResult>> {
    if x0.len() != model.n() {
        return Err(Error::DimensionMismatch { expected: model.n(), got: x0.len() });
    }
    let steps = Steps::new(model)?;
    let values: Vec<Vec<Complex64>> = window
        .points
        .iter()
        .map(|a| {
            let y = steps.pull_back(a, x0);
            fs.iter().map(|f| f.eval(&y)).collect()
        })
        .collect();
    Ok(averages(window, &values, fs.len(), x0))
}

pub fn cone_average(
    model: &ActionModel,
    cone: &ConeSpec,
    x0: &[f64],
    t: f64,
    f: &TrigObservable,
) -> Result<OrbitAverageResult> {
    let window = ConeWindow::new(cone, t)?;
    Ok(cone_average_many(model, &window, x0, std::slice::from_ref(f))?.remove(0))
}

/// `i`-th pseudo-random seed of stream `rng_seed`, uniform on `[0,1)^n`.
pub fn seed_point(rng_seed: u64, index: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    rng.set_stream(index);
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

#[derive(Clone, Debug)]
pub struct PhysicalEstimate {
    pub rng_seed: u64,
    /// Mean over seeds, per observable.
    pub values: Vec<Complex64>,
    /// Standard error of the mean, per observable.
    pub std_error: Vec<f64>,
    /// `per_seed[s][f]`.
    pub per_seed: Vec<Vec<OrbitAverageResult>>,
}

pub fn physical_measure_estimate_many(
    model: &ActionModel,
    cone: &ConeSpec,
    n_seeds: usize,
    rng_seed: u64,
    t: f64,
    fs: &[TrigObservable],
) -> Result<PhysicalEstimate> {
    if n_seeds == 0 {
        return Err(Error::InvalidInput("n_seeds must be at least 1".into()));
    }
    let window = ConeWindow::new(cone, t)?;
    let per_seed: Vec<Vec<OrbitAverageResult>> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|i| cone_average_many(model, &window, &seed_point(rng_seed, i, model.n()), fs))
        .collect::<Result<_>>()?;
    Ok(summarize(rng_seed, per_seed, fs.len()))
}

fn summarize(rng_seed: u64, per_seed: Vec<Vec<OrbitAverageResult>>, nf: usize) -> PhysicalEstimate {
    let ns = per_seed.len() as f64;
    let mut values = Vec::with_capacity(nf);
    let mut std_error = Vec::with_capacity(nf);
    for fi in 0..nf {
        let mut acc = ComplexSum::default();
        for s in &per_seed {
            acc.add(s[fi].average);
        }
        let mean = acc.value() / ns;
        let mut var = RealSum::default();
        for s in &per_seed {
            var.add((s[fi].average - mean).norm_sqr());
        }
        let sd = if ns > 1.0 { (var.value() / (ns - 1.0)).sqrt() } else { 0.0 };
        values.push(mean);
        std_error.push(sd / ns.sqrt());
    }
    PhysicalEstimate { rng_seed, values, std_error, per_seed }
}

pub fn physical_measure_estimate(
    model: &ActionModel,
    cone: &ConeSpec,
    n_seeds: usize,
    rng_seed: u64,
    t: f64,
    f: &TrigObservable,
) -> Result<Complex64> {
    Ok(physical_measure_estimate_many(model, cone, n_seeds, rng_seed, t, std::slice::from_ref(f))?.values[0])
}

#[derive(Clone, Debug)]
pub struct StableLeafEstimate {
    pub values: Vec<Complex64>,
    pub std_error: Vec<f64>,
    /// Orthonormal basis of the real stable subspace used for sampling.
    pub basis: Vec<Vec<f64>>,
    pub n_samples: usize,
}

/// Seeds `x0 + Σ_i t_i b_i` with `t_i` uniform on `[-L/2, L/2)` along the
/// real stable subspace of the chamber, averaged through [`cone_average_many`].
#[allow(clippy::too_many_arguments)]
pub fn stable_leaf_average_many(
    model: &ActionModel,
    chamber: &WeylChamber,
    cone: &ConeSpec,
    x0: &[f64],
    n_leaf_samples: usize,
    segment_length: f64,
    rng_seed: u64,
    t: f64,
    fs: &[TrigObservable],
) -> Result<StableLeafEstimate> {
    if !(segment_length > 0.0 && segment_length < 0.5) {
        return Err(Error::InvalidInput(format!("leaf segment length {segment_length} outside (0, 0.5)")));
    }
    if n_leaf_samples == 0 {
        return Err(Error::InvalidInput("n_leaf_samples must be at least 1".into()));
    }
    let stable = chamber.stable_indices();
    if stable.is_empty() {
        return Err(Error::Degenerate("chamber has a zero-dimensional stable subspace".into()));
    }
    let basis = model.real_subspace_basis(&stable)?;
    let window = ConeWindow::new(cone, t)?;
    let per_seed: Vec<Vec<OrbitAverageResult>> = (0..n_leaf_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i);
            let mut x = x0.to_vec();
            for b in &basis {
                let s = segment_length * (rng.gen::<f64>() - 0.5);
                x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += s * bi);
            }
            let x: Vec<f64> = x.iter().map(|v| v - v.floor()).collect();
            cone_average_many(model, &window, &x, fs)
        })
        .collect::<Result<_>>()?;
    let summary = summarize(rng_seed, per_seed, fs.len());
    Ok(StableLeafEstimate { values: summary.values, std_error: summary.std_error, basis, n_samples: n_leaf_samples })
}

#[allow(clippy::too_many_arguments)]
pub fn stable_leaf_average(
    model: &ActionModel,
    chamber: &WeylChamber,
    cone: &ConeSpec,
    x0: &[f64],
    n_leaf_samples: usize,
    rng_seed: u64,
    t: f64,
    f: &TrigObservable,
) -> Result<Complex64> {
    let est =
        stable_leaf_average_many(model, chamber, cone, x0, n_leaf_samples, 0.1, rng_seed, t, std::slice::from_ref(f))?;
    Ok(est.values[0])
}

/// Fraction of seeds whose cone average lies within `tol` of the Haar value.
pub fn basin_fraction(
    model: &ActionModel,
    cone: &ConeSpec,
    n_seeds: usize,
    rng_seed: u64,
    t: f64,
    f: &TrigObservable,
    tol: f64,
) -> Result<f64> {
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tol = {tol}")));
    }
    let est = physical_measure_estimate_many(model, cone, n_seeds, rng_seed, t, std::slice::from_ref(f))?;
    Ok(basin_fraction_of(&est, 0, f.haar(), tol))
}

pub fn basin_fraction_of(est: &PhysicalEstimate, fi: usize, target: Complex64, tol: f64) -> f64 {
    let inside = est.per_seed.iter().filter(|s| (s[fi].average - target).norm() <= tol).count();
    inside as f64 / est.per_seed.len() as f64
}

/// `Π_{j=1}^K J(M^{-j a0} y) / J(M^{-j a0} x)` with `J = |det(M^{-a0}|E_s)|`.
///
/// The Jacobian of a linear map is the same at every point, so each factor
/// is `J / J = 1`.
pub fn stable_density_ratio(
    model: &ActionModel,
    chamber: &WeylChamber,
    a0: &[i64],
    x: &[f64],
    y: &[f64],
    k: usize,
) -> Result<f64> {
    if !chamber.contains_lattice(a0)? {
        return Err(Error::NotHyperbolic { a: a0.to_vec(), detail: format!("outside chamber {:?}", chamber.signs()) });
    }
    let n = model.n();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len().max(y.len()) });
    }
    let s = model.spectral()?;
    let diff: Vec<Complex64> = x.iter().zip(y).map(|(a, b)| Complex64::new(a - b, 0.0)).collect();
    let scale = diff.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    for i in chamber.unstable_indices() {
        let c: Complex64 = (0..n).map(|j| s.dual[(i, j)] * diff[j]).sum();
        if c.norm() > 1e-8 * scale {
            return Err(Error::InvalidInput(format!(
                "x - y has unstable component {:.3e}; the points are not on one stable leaf",
                c.norm()
            )));
        }
    }
    let minus: Vec<i64> = a0.iter().map(|v| -v).collect();
    let nu = model.eigenvalues_at(&minus)?;
    let jac = |_p: &[f64]| -> f64 { chamber.stable_indices().iter().map(|&i| nu[i].norm()).product() };
    let steps = Steps::new(model)?;
    let (mut px, mut py) = (x.to_vec(), y.to_vec());
    let mut ratio = 1.0;
    for _ in 0..k {
        px = steps.pull_back(a0, &px);
        py = steps.pull_back(a0, &py);
        ratio *= jac(&py) / jac(&px);
    }
    Ok(ratio)
}
