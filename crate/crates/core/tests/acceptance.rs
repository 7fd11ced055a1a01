//! Acceptance suite: one test per criterion, each printing a single
//! `criterion N <name>: PASS|FAIL` line (written straight to stdout so it
//! survives output capture). Every numeric claim is checked against an oracle
//! written here, independent of the library route it guards.

use cartan_lab::action::{box_points, models, ActionModel, WeylChamber};
use cartan_lab::birkhoff::{
    basin_fraction_of, physical_measure_estimate_many, seed_point, stable_density_ratio, stable_leaf_average_many,
    ConeWindow,
};
use cartan_lab::bowen::bowen_estimate_many;
use cartan_lab::counting::{
    calibrate_separation, chamber_ball, near_periodic_volume, periodic_count_growth, separation_bound_holds,
    separation_check,
};
use cartan_lab::geometry::int;
use cartan_lab::observable::TrigObservable;
use cartan_lab::periodic::{fixed_point_count, fixed_points, RationalPoint};
use cartan_lab::reports::{run, Context, Subcommand};
use cartan_lab::spectrum::{
    iterate_to_projector, koopman_matrix, leading_spectrum, projector_rank, weights_of, FourierBox, KoopmanOperator,
};
use cartan_lab::trace::{forms_alternating_check, guillemin_sum, mollified_trace};
use cartan_lab::zeta::{dominant_pole_extraction, flat_determinant, zeta_coefficients};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

// ---------------------------------------------------------------- harness

struct Verdict {
    checks: Vec<(bool, String)>,
    info: Vec<String>,
}

impl Verdict {
    fn new() -> Self {
        Self { checks: Vec::new(), info: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        self.checks.push((ok, what.into()));
    }

    fn info(&mut self, what: impl Into<String>) {
        self.info.push(what.into());
    }

    fn finish(mut self, id: u32, name: &str, limit_s: Option<f64>, start: Instant) {
        let elapsed = start.elapsed().as_secs_f64();
        if let Some(limit) = limit_s {
            self.check(elapsed < limit, format!("runtime {elapsed:.2} s, limit {limit} s"));
        }
        let failed: Vec<&String> = self.checks.iter().filter(|(ok, _)| !ok).map(|(_, w)| w).collect();
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        let limit = limit_s.map_or(String::new(), |l| format!(", limit {l} s"));
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion {id:>2} {name}: {status} ({} checks, {elapsed:.2} s{limit})", self.checks.len());
        for f in &failed {
            let _ = writeln!(out, "    failed: {f}");
        }
        for i in &self.info {
            let _ = writeln!(out, "    info: {i}");
        }
        drop(out);
        assert!(failed.is_empty(), "criterion {id} {name} failed: {failed:?}");
    }
}

fn context(name: &str) -> Context {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"));
    Context::load(&path, &[]).expect("bundled config loads")
}

fn chamber_points(chamber: &WeylChamber, kappa: usize, radius: i64) -> Vec<Vec<i64>> {
    box_points(kappa, radius)
        .into_iter()
        .filter(|a| chamber.contains_lattice(a).unwrap_or(false))
        .collect()
}

fn both_models() -> [ActionModel; 2] {
    [models::cat_map(), models::cubic_rank2()]
}

// ---------------------------------------------------------------- oracles

type Mat = Vec<Vec<i128>>;

/// Generators written out by hand, independent of the bundled model files.
fn oracle_generators(model: &ActionModel) -> Vec<Mat> {
    match model.n() {
        2 => vec![vec![vec![2, 1], vec![1, 1]]],
        3 => vec![
            vec![vec![0, 0, 1], vec![1, 0, 3], vec![0, 1, 0]],
            vec![vec![1, 0, 1], vec![1, 1, 3], vec![0, 1, 1]],
        ],
        n => panic!("no oracle for n = {n}"),
    }
}

fn identity(n: usize) -> Mat {
    (0..n).map(|i| (0..n).map(|j| i128::from(i == j)).collect()).collect()
}

fn mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
}

fn det(m: &Mat) -> i128 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|j| {
            let minor: Mat = m[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect()).collect();
            let s = if j % 2 == 0 { 1 } else { -1 };
            s * m[0][j] * det(&minor)
        })
        .sum()
}

/// Inverse of a unimodular matrix via the adjugate.
fn unimodular_inverse(m: &Mat) -> Mat {
    let n = m.len();
    let d = det(m);
    assert!(d.abs() == 1, "generator not unimodular");
    let cof = |i: usize, j: usize| -> i128 {
        if n == 1 {
            return 1;
        }
        let minor: Mat = (0..n)
            .filter(|&r| r != i)
            .map(|r| (0..n).filter(|&c| c != j).map(|c| m[r][c]).collect())
            .collect();
        let s = if (i + j).is_multiple_of(2) { 1 } else { -1 };
        s * det(&minor)
    };
    (0..n).map(|i| (0..n).map(|j| cof(j, i) * d).collect()).collect()
}

fn oracle_power(model: &ActionModel, a: &[i64]) -> Mat {
    let gens = oracle_generators(model);
    let mut m = identity(model.n());
    for (g, &e) in gens.iter().zip(a) {
        let step = if e >= 0 { g.clone() } else { unimodular_inverse(g) };
        for _ in 0..e.unsigned_abs() {
            m = mul(&m, &step);
        }
    }
    m
}

/// `|det(M^a - I)|` in 128-bit integers.
fn oracle_fix_count(model: &ActionModel, a: &[i64]) -> i128 {
    let mut m = oracle_power(model, a);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] -= 1;
    }
    det(&m).abs()
}

/// Minimal torus max-distance over all pairs, by exhaustive scan.
fn oracle_min_separation(pts: &[RationalPoint]) -> Option<BigRational> {
    let mut best: Option<BigRational> = None;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d = pts[i].torus_distance(&pts[j]);
            if best.as_ref().is_none_or(|b| d < *b) {
                best = Some(d);
            }
        }
    }
    best
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Exact cat-map orbit of a dyadic seed `m / 2^53` under `M^{-1}`, one step at
/// a time with integer arithmetic mod `2^53`; returns the cone average of `f`
/// over `a = 1..=t`.
fn exact_dyadic_cat_average(x0: &[f64], t: usize, f: &TrigObservable) -> Complex64 {
    const SCALE: f64 = 9_007_199_254_740_992.0;
    const MASK: u64 = (1 << 53) - 1;
    let mut m: Vec<u64> = x0.iter().map(|x| (x * SCALE) as u64).collect();
    assert!(x0.iter().zip(&m).all(|(x, &v)| (v as f64) / SCALE == *x), "seed is not a 53-bit dyadic");
    let mut acc = Complex64::zero();
    for _ in 0..t {
        // M^{-1} = [[1, -1], [-1, 2]]
        let (u, v) = (m[0], m[1]);
        m = vec![u.wrapping_sub(v) & MASK, v.wrapping_mul(2).wrapping_sub(u) & MASK];
        let x: Vec<f64> = m.iter().map(|&v| v as f64 / SCALE).collect();
        acc += f.eval(&x);
    }
    acc / t as f64
}

// ---------------------------------------------------------------- criteria

#[test]
fn criterion_01_census_exactness() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for model in both_models() {
        let mut n_points = 0;
        for chamber in model.weyl_chambers().unwrap() {
            for a in chamber_points(&chamber, model.kappa(), 6) {
                n_points += 1;
                let lib = fixed_point_count(&model, &a).unwrap();
                let oracle = BigInt::from(oracle_fix_count(&model, &a));
                v.check(lib == oracle, format!("{} a = {a:?}: |Fix| {lib} vs det oracle {oracle}", model.name()));
                if oracle <= BigInt::from(20_000) {
                    let n = fixed_points(&model, &a).unwrap().len();
                    v.check(BigInt::from(n) == oracle, format!("{} a = {a:?}: enumerated {n} points", model.name()));
                }
            }
        }
        v.info(format!("{}: {n_points} chamber points with |a|∞ <= 6", model.name()));
    }
    let cat = models::cat_map();
    let lambda = (3.0 + 5f64.sqrt()) / 2.0;
    let pinned = [1i64, 5, 16, 45, 121, 320];
    for (i, &p) in pinned.iter().enumerate() {
        let a = (i + 1) as i64;
        let closed = lambda.powi(a as i32) + lambda.powi(-(a as i32)) - 2.0;
        for s in [a, -a] {
            let lib = fixed_point_count(&cat, &[s]).unwrap();
            v.check(lib == BigInt::from(p), format!("cat a = {s}: {lib} vs pinned {p}"));
        }
        v.check((closed - p as f64).abs() < 1e-9, format!("closed form at a = {a}: {closed}"));
    }
    v.finish(1, "fixed-point census", Some(10.0), start);
}

#[test]
fn criterion_02_guillemin_identity() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for model in both_models() {
        let one = TrigObservable::constant(model.n(), 1.0);
        for chamber in model.weyl_chambers().unwrap() {
            for a in chamber_points(&chamber, model.kappa(), 6) {
                let g = guillemin_sum(&model, &chamber, &a, &one).unwrap();
                v.check(g == Complex64::new(1.0, 0.0), format!("{} a = {a:?}: guillemin_sum(1) = {g}", model.name()));
                // |det(I - M^{-a})| = |det(M^a - I)| for unimodular M.
                let mut p = unimodular_inverse(&oracle_power(&model, &a));
                for (i, row) in p.iter_mut().enumerate() {
                    row[i] -= 1;
                }
                v.check(det(&p).abs() == oracle_fix_count(&model, &a), format!("{} a = {a:?}: determinant ratio", model.name()));
            }
        }
    }
    let ctx = context("cat_map");
    let bump = ctx.observables.iter().find(|(n, _)| n == "bump").map(|(_, f)| f.clone()).unwrap();
    let one = TrigObservable::constant(2, 1.0);
    for a in [1i64, 2, 3] {
        for (name, f) in [("one", &one), ("bump", &bump)] {
            let g = guillemin_sum(&ctx.model, &ctx.chamber, &[a], f).unwrap();
            let m = mollified_trace(&ctx.model, &[a], f, 0.02, 400).unwrap();
            let rel = (m.value - g).norm() / g.norm();
            v.check(rel <= 0.05, format!("mollified {name} at a = {a}: {} vs {g}, rel {rel:.3e}", m.value));
            v.check(!m.separation_warning, format!("separation warning at a = {a}"));
        }
    }
    v.finish(2, "guillemin identity", Some(60.0), start);
}

#[test]
fn criterion_03_forms_identity() {
    let start = Instant::now();
    let mut v = Verdict::new();
    let mut worst: f64 = 0.0;
    for model in both_models() {
        for chamber in model.weyl_chambers().unwrap() {
            for a in chamber_points(&chamber, model.kappa(), 4) {
                let c = forms_alternating_check(&model, &chamber, &a).unwrap();
                worst = worst.max(c.residual);
                v.check(c.residual <= 1e-9, format!("{} a = {a:?}: residual {:.3e}", model.name(), c.residual));
                let exact = BigRational::from_integer(c.exact_alternating_sum.clone());
                v.check(exact == c.det_exact, format!("{} a = {a:?}: exact alternating sum", model.name()));
                // det(I - M^{-a}) in 128-bit integers.
                let mut p = unimodular_inverse(&oracle_power(&model, &a));
                for row in p.iter_mut() {
                    row.iter_mut().for_each(|x| *x = -*x);
                }
                for (i, row) in p.iter_mut().enumerate() {
                    row[i] += 1;
                }
                v.check(
                    c.det_exact == BigRational::from_integer(BigInt::from(det(&p))),
                    format!("{} a = {a:?}: det(I - P) oracle", model.name()),
                );
            }
        }
    }
    v.info(format!("largest residual {worst:.3e}"));
    v.finish(3, "forms identity", Some(5.0), start);
}

#[test]
fn criterion_04_bowen_formula() {
    const C_LATTICE: f64 = 1.5;
    let start = Instant::now();
    let mut v = Verdict::new();
    for (config, ns) in [("cat_map", vec![20i64, 40, 80]), ("cubic_rank2", vec![10, 20])] {
        let ctx = context(config);
        let fs: Vec<TrigObservable> = ctx.observables.iter().map(|(_, f)| f.clone()).collect();
        let largest = *ns.last().unwrap();
        for &n in &ns {
            let est = bowen_estimate_many(&ctx.model, &ctx.chamber, &ctx.cone, &int(n), &int(2 * n), &fs).unwrap();
            // Every term of f = 1 is exactly 1: the estimate is #points / volume,
            // points taken in the open cone.
            let (count, vol) = if ctx.model.kappa() == 1 {
                ((n + 1) as f64, n as f64)
            } else {
                let pts = (-20 * n..=20 * n)
                    .flat_map(|a1| (0..=4 * n).map(move |a2| (a1, a2)))
                    .filter(|&(a1, a2)| 4 * a1 + a2 > 0 && 5 * a2 - 4 * a1 > 0)
                    .filter(|&(a1, a2)| (3 * n..=6 * n).contains(&(a1 + 3 * a2)))
                    .count();
                (pts as f64, (3 * n * n) as f64 * 108.0 / 187.0)
            };
            for ((name, f), val) in ctx.observables.iter().zip(&est.values) {
                if f.len() == 1 && f.coefficient(&vec![0; ctx.model.n()]) != Complex64::zero() {
                    let err = (val - 1.0).norm();
                    v.check(err <= C_LATTICE / n as f64, format!("{config} [{n}, {}] {name}: |est - 1| = {err:.3e}", 2 * n));
                    let oracle = count / vol;
                    v.check((val.re - oracle).abs() <= 1e-12 * oracle, format!("{config} [{n}, {}]: {val} vs count/volume {oracle}", 2 * n));
                } else if n == largest && f.haar() == Complex64::zero() {
                    v.check(val.norm() <= 0.05, format!("{config} [{n}, {}] {name}: |est| = {:.3e}", 2 * n, val.norm()));
                }
            }
        }
        let modes = ctx.observables.iter().filter(|(_, f)| f.len() == 1 && f.haar() == Complex64::zero()).count();
        v.check(modes >= 3, format!("{config}: {modes} nonzero single modes"));
    }
    v.finish(4, "bowen formula", Some(120.0), start);
}

#[test]
fn criterion_05_physical_measure() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for (config, t) in [("cat_map", 200.0), ("cubic_rank2", 40.0)] {
        let ctx = context(config);
        let fs: Vec<TrigObservable> = ctx.observables.iter().map(|(_, f)| f.clone()).collect();
        let seed = ctx.config.rng_seed;
        let est = physical_measure_estimate_many(&ctx.model, &ctx.cone, 200, seed, t, &fs).unwrap();
        let zero = vec![0.0; ctx.model.n()];
        let bc = &ctx.config.birkhoff;
        let leaf = stable_leaf_average_many(
            &ctx.model,
            &ctx.chamber,
            &ctx.cone,
            &zero,
            bc.leaf_samples,
            bc.leaf_length,
            seed ^ 0x1eaf,
            t,
            &fs,
        )
        .unwrap();
        for (fi, (name, f)) in ctx.observables.iter().enumerate() {
            let haar = f.haar();
            let mean_err = est.per_seed.iter().map(|s| (s[fi].average - haar).norm()).sum::<f64>() / 200.0;
            v.check(mean_err <= 0.1, format!("{config} {name}: mean |estimate - haar| = {mean_err:.3e}"));
            let gap = (leaf.values[fi] - est.values[fi]).norm();
            v.check(gap <= 0.1, format!("{config} {name}: leaf vs Lebesgue {gap:.3e}"));
            let basin = basin_fraction_of(&est, fi, haar, 0.15);
            v.check(basin >= 0.95, format!("{config} {name}: basin fraction {basin}"));
        }
        if ctx.model.n() == 2 {
            // Exact dyadic orbits as an independent sampler of the same averages.
            let window = ConeWindow::new(&ctx.cone, t).unwrap();
            v.check(window.len() == 200, format!("cat window holds {} points", window.len()));
            for (fi, (name, f)) in ctx.observables.iter().enumerate() {
                let haar = f.haar();
                let exact: Vec<Complex64> =
                    (0..200).map(|i| exact_dyadic_cat_average(&seed_point(seed, i, 2), 200, f)).collect();
                let mean_err = exact.iter().map(|z| (z - haar).norm()).sum::<f64>() / 200.0;
                v.check(mean_err <= 0.1, format!("exact orbits {name}: mean error {mean_err:.3e}"));
                let mean = exact.iter().sum::<Complex64>() / 200.0;
                let gap = (mean - est.values[fi]).norm();
                v.check(gap <= 0.1, format!("exact vs floating mean {name}: {gap:.3e}"));
            }
        }
    }
    v.finish(5, "physical measure", Some(300.0), start);
}

#[test]
fn criterion_06_cross_method() {
    let start = Instant::now();
    let mut v = Verdict::new();
    let mut worst: f64 = 0.0;
    for (config, largest, t) in [("cat_map", 80i64, 200.0), ("cubic_rank2", 20, 40.0)] {
        let ctx = context(config);
        let fs: Vec<TrigObservable> = ctx.observables.iter().map(|(_, f)| f.clone()).collect();
        let bowen = bowen_estimate_many(&ctx.model, &ctx.chamber, &ctx.cone, &int(largest), &int(2 * largest), &fs).unwrap();
        let birk = physical_measure_estimate_many(&ctx.model, &ctx.cone, 200, ctx.config.rng_seed, t, &fs).unwrap();
        let zero = vec![Complex64::zero(); ctx.model.kappa()];
        for (fi, (name, f)) in ctx.observables.iter().enumerate() {
            let c = zeta_coefficients(&ctx.model, &ctx.chamber, &ctx.window, &zero, f, 12).unwrap();
            let residue = dominant_pole_extraction(&c).unwrap().residue;
            let est = [bowen.values[fi], birk.values[fi], residue];
            for i in 0..3 {
                for j in i + 1..3 {
                    let d = (est[i] - est[j]).norm();
                    worst = worst.max(d);
                    v.check(d <= 0.15, format!("{config} {name}: estimators {i} and {j} differ by {d:.3e}"));
                }
            }
        }
    }
    v.info(format!("largest pairwise difference {worst:.3e}"));
    v.finish(6, "cross-method uniqueness", Some(420.0), start);
}

#[test]
fn criterion_07_spectral_model() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for (config, kmax) in [("cat_map", 30i64), ("cubic_rank2", 12)] {
        let ctx = context(config);
        let sc = &ctx.config.spectrum;
        let fb = FourierBox::new(&ctx.model, &ctx.chamber, kmax, 4.0).unwrap();
        let zero = vec![Complex64::zero(); ctx.model.kappa()];
        let op = koopman_matrix(&ctx.model, &ctx.chamber, &ctx.window, &zero, &fb).unwrap();
        let rep = leading_spectrum(&op, &weights_of(&[&fb]), sc.tol, sc.max_iter).unwrap();
        let dev = (rep.eigenvalue - 1.0).norm();
        v.check(dev <= 1e-10, format!("{config}: |eigenvalue - 1| = {dev:.3e}"));
        let only_zero = rep.eigenvector_modes.len() == 1 && rep.eigenvector_modes[0].k.iter().all(|&c| c == 0);
        v.check(only_zero, format!("{config}: eigenvector modes {:?}", rep.eigenvector_modes.iter().map(|m| &m.k).collect::<Vec<_>>()));
        let rank = projector_rank(&op, sc.probes, ctx.config.rng_seed, sc.max_iter).unwrap();
        v.check(rank == 1, format!("{config}: projector rank {rank}"));
        if ctx.model.n() != 2 {
            continue;
        }
        v.check(rep.second_modulus <= 0.5, format!("cat second modulus {}", rep.second_modulus));
        v.info(format!("cat second modulus {}, transient rate {:.4}", rep.second_modulus, rep.transient_rate));

        // Orbit of frequencies under k -> (M^{-a})^T k, a in the window support,
        // dropped once outside the box.
        let maps: Vec<Mat> = ctx
            .window
            .support()
            .map(|a| {
                let minus: Vec<i64> = a.iter().map(|x| -x).collect();
                let p = oracle_power(&ctx.model, &minus);
                (0..2).map(|i| (0..2).map(|j| p[j][i]).collect()).collect()
            })
            .collect();
        let mut set: BTreeSet<Vec<i128>> = [vec![1, 0]].into_iter().collect();
        let mut escape = 0;
        while !set.is_empty() {
            set = set
                .iter()
                .flat_map(|k| maps.iter().map(move |m| vec![m[0][0] * k[0] + m[0][1] * k[1], m[1][0] * k[0] + m[1][1] * k[1]]))
                .filter(|k| k.iter().all(|c| c.abs() <= kmax as i128))
                .collect();
            escape += 1;
        }
        let u = fb.embed(&TrigObservable::mode(&[1, 0])).unwrap();
        let table = iterate_to_projector(&op, &u, escape + 2).unwrap();
        v.check(
            table.settled_at.is_some_and(|s| s <= escape),
            format!("e_(1,0) distance reaches 0 at {:?}, escape oracle {escape}", table.settled_at),
        );
        let sum = KoopmanOperator::direct_sum(&op, &op).unwrap();
        let r2 = projector_rank(&sum, sc.probes, ctx.config.rng_seed, sc.max_iter).unwrap();
        v.check(r2 == 2, format!("diagnostic disjoint union rank {r2}"));
    }
    v.finish(7, "spectral model", Some(60.0), start);
}

#[test]
fn criterion_08_zeta_and_pole() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for config in ["cat_map", "cubic_rank2"] {
        let ctx = context(config);
        let zero = vec![Complex64::zero(); ctx.model.kappa()];
        let one = TrigObservable::constant(ctx.model.n(), 1.0);
        let c = zeta_coefficients(&ctx.model, &ctx.chamber, &ctx.window, &zero, &one, 12).unwrap();
        v.check(c.coeffs.iter().all(|&x| x == Complex64::new(1.0, 0.0)), format!("{config}: c_k(0, 1) = {:?}", c.coeffs));
        let pole = dominant_pole_extraction(&c).unwrap();
        v.check((pole.s0 - 1.0).norm() <= 1e-9, format!("{config}: s0 = {}", pole.s0));
        v.check((pole.residue - 1.0).norm() <= 1e-9, format!("{config}: μ(1) = {}", pole.residue));
        for (name, f) in ctx.observables.iter().filter(|(_, f)| f.len() == 1 && f.haar() == Complex64::zero()) {
            let cf = zeta_coefficients(&ctx.model, &ctx.chamber, &ctx.window, &zero, f, 12).unwrap();
            let mu = dominant_pole_extraction(&cf).unwrap().residue;
            v.check(mu.norm() <= 0.05, format!("{config} {name}: μ = {mu}"));
        }

        let grid: Vec<Vec<f64>> = [0.05, 0.1, 0.2].iter().map(|&t| vec![t; ctx.model.kappa()]).collect();
        let d12 = flat_determinant(&ctx.model, &ctx.chamber, &ctx.window, &grid, 12).unwrap();
        let d24 = flat_determinant(&ctx.model, &ctx.chamber, &ctx.window, &grid, 24).unwrap();
        for (p, q) in d12.iter().zip(&d24) {
            let (a, b) = (p.compensated.unwrap(), q.compensated.unwrap());
            let change = (b / a - 1.0).abs();
            let t = p.lambda[0];
            if ctx.model.n() == 2 {
                // c_k = ψ̂^k here, so d_K / (1 - ψ̂) = exp(Σ_{k>K} ψ̂^k / k).
                let psi = ((-t).exp() + (-2.0 * t).exp()) / 2.0;
                let tail = |k0: i32| (k0 + 1..4000).map(|k| psi.powi(k) / k as f64).sum::<f64>().exp();
                v.check((a / tail(12) - 1.0).abs() <= 1e-9, format!("cat K = 12 at t = {t}: {a} vs closed form {}", tail(12)));
                v.check((b / tail(24) - 1.0).abs() <= 1e-9, format!("cat K = 24 at t = {t}: {b} vs closed form {}", tail(24)));
            }
            v.check(change <= 0.02, format!("{config} flat-determinant change at t = {t}: {:.4}%", 100.0 * change));
        }
    }
    v.finish(8, "zeta coefficients and dominant pole", Some(60.0), start);
}

#[test]
fn criterion_09_counting() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for config in ["cat_map", "cubic_rank2"] {
        let ctx = context(config);
        let cc = &ctx.config.count;
        let (model, chamber) = (&ctx.model, &ctx.chamber);
        let table = periodic_count_growth(model, chamber, cc.ell_max).unwrap();
        let m = chamber.m_model();
        let bound = (model.n() - model.kappa()) as f64 * m + 0.1;
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for row in &table.rows {
            let pts = chamber_ball(chamber, row.ell as f64).unwrap();
            let total: i128 = pts.iter().map(|a| oracle_fix_count(model, a)).sum();
            v.check(row.total_fixed == BigInt::from(total), format!("{config} ℓ = {}: total {} vs oracle {total}", row.ell, row.total_fixed));
            if total > 0 {
                xs.push(row.ell as f64);
                ys.push((total as f64).ln() - model.kappa() as f64 * (row.ell as f64).ln());
            }
        }
        let slope = least_squares_slope(&xs, &ys);
        v.check((slope - table.compensated_slope).abs() <= 1e-9, format!("{config}: slope {} vs oracle fit {slope}", table.compensated_slope));
        v.check(slope <= bound, format!("{config}: compensated slope {slope:.4} vs bound {bound:.4}"));
        v.info(format!("{config}: raw slope {:.4}, compensated {slope:.4}, tail {:.4}, bound {bound:.4}", table.raw_slope, table.tail_slope));

        let calib = chamber_ball(chamber, cc.calibration_radius).unwrap();
        let delta = calibrate_separation(model, chamber, &calib).unwrap();
        let mut checked = 0;
        for a in chamber_ball(chamber, 6.0).unwrap() {
            let s = separation_check(model, chamber, &a).unwrap();
            checked += 1;
            v.check(separation_bound_holds(&s, delta, m), format!("{config} a = {a:?}: separation {:.4e}", s.min_distance_f64()));
            if s.n_points <= 400 {
                let pts = fixed_points(model, &a).unwrap();
                let oracle = oracle_min_separation(&pts);
                v.check(oracle == s.min_distance, format!("{config} a = {a:?}: exhaustive separation {oracle:?}"));
            }
        }
        v.info(format!("{config}: δ_fit = {delta:.4}, {checked} points with |a| <= 6"));

        let n = model.n() as i32;
        let target = 2f64.powi(-n);
        for (hi, lo) in [(0.2, 0.1), (0.1, 0.05)] {
            let vh = near_periodic_volume(model, chamber, hi, 3.0, cc.n_samples, ctx.config.rng_seed).unwrap();
            let vl = near_periodic_volume(model, chamber, lo, 3.0, cc.n_samples, ctx.config.rng_seed).unwrap();
            let ratio = vl.value / vh.value;
            v.check(
                ratio >= target / 1.5 && ratio <= 1.5 * target,
                format!("{config} eps {hi} -> {lo}: ratio {ratio:.4} vs 2^-{n} = {target}"),
            );
        }
    }
    v.finish(9, "counting", Some(120.0), start);
}

#[test]
fn criterion_10_density_ratio() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for config in ["cat_map", "cubic_rank2"] {
        let ctx = context(config);
        let basis = ctx.model.real_subspace_basis(&ctx.chamber.stable_indices()).unwrap();
        let a0 = ctx.window.support().next().unwrap().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.rng_seed);
        rng.set_stream(0xd5);
        for pair in 0..50 {
            let x: Vec<f64> = (0..ctx.model.n()).map(|_| rng.gen::<f64>()).collect();
            let mut y = x.clone();
            for b in &basis {
                let s = rng.gen::<f64>() - 0.5;
                y.iter_mut().zip(b).for_each(|(yi, bi)| *yi += s * bi);
            }
            for k in [1usize, 10, 50] {
                let r = stable_density_ratio(&ctx.model, &ctx.chamber, &a0, &x, &y, k).unwrap();
                v.check((r - 1.0).abs() <= 1e-15, format!("{config} pair {pair} K = {k}: ratio {r}"));
            }
        }
    }
    v.finish(10, "density ratio", Some(2.0), start);
}

#[test]
fn criterion_11_determinism() {
    let start = Instant::now();
    let mut v = Verdict::new();
    for config in ["cat_map", "cubic_rank2"] {
        let ctx = context(config);
        let in_pool = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| run(Subcommand::All, &ctx).unwrap())
        };
        let serial = in_pool(1);
        let wide = in_pool(8);
        let again = in_pool(8);
        let names = |r: &cartan_lab::reports::RunOutput| r.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
        v.check(names(&serial) == names(&wide), format!("{config}: file lists differ"));
        for (name, bytes) in &serial.files {
            v.check(wide.file(name) == Some(bytes.as_slice()), format!("{config} {name}: 1 vs 8 threads"));
            v.check(again.file(name) == Some(bytes.as_slice()), format!("{config} {name}: repeated 8-thread run"));
        }
        v.check(serial.failures().is_empty(), format!("{config}: failing report criteria {:?}", serial.failures()));
        v.info(format!("{config}: {} files compared", serial.files.len()));
    }
    v.finish(11, "determinism", None, start);
}

#[test]
fn oracles_agree_with_library_matrices() {
    for model in both_models() {
        for a in box_points(model.kappa(), 3) {
            let lib = model.matrix_power(&a).unwrap().to_i64_rows().unwrap();
            let oracle = oracle_power(&model, &a);
            let same = lib.iter().zip(&oracle).all(|(r, s)| r.iter().zip(s).all(|(&x, &y)| x as i128 == y));
            assert!(same, "{} a = {a:?}", model.name());
        }
    }
}
