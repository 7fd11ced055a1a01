//! Experiment orchestration: every subcommand computes a [`Section`] of
//! tables, summary values and pass/fail criteria; [`RunOutput::write`] is the
//! single writer of all report files.
//!
//! Nothing in a report depends on the thread count or the wall clock, so
//! identical configs give byte-identical files.

pub mod config;

pub use config::{apply_override, ChamberSelector, Context, ExperimentConfig};

use crate::action::{box_points, validate_model};
use crate::birkhoff::{
    basin_fraction_of, physical_measure_estimate_many, stable_density_ratio, stable_leaf_average_many,
};
use crate::bowen::bowen_estimate_many;
use crate::counting::{
    calibrate_near_periodic, calibrate_separation, chamber_ball, near_periodic_bound_holds, near_periodic_volume,
    periodic_count_growth, separation_bound_holds, separation_check, tori_count,
};
use crate::geometry::format_rational;
use crate::numerics::fmt_f64;
use crate::observable::TrigObservable;
use crate::periodic::periodic_census;
use crate::spectrum::{
    iterate_to_projector, koopman_matrix, leading_spectrum, mode_escape_time, projector_rank, weights_of, FourierBox,
    KoopmanOperator,
};
use crate::trace::{forms_alternating_check, guillemin_sum, mollified_trace, mollified_trace_closed_form};
use crate::zeta::{dominant_pole_extraction, flat_determinant, zeta_coefficients};
use crate::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subcommand {
    Validate,
    Census,
    Bowen,
    Birkhoff,
    Spectrum,
    Trace,
    Zeta,
    Count,
    All,
}

impl Subcommand {
    pub const SECTIONS: [Subcommand; 8] = [
        Subcommand::Validate,
        Subcommand::Census,
        Subcommand::Bowen,
        Subcommand::Birkhoff,
        Subcommand::Spectrum,
        Subcommand::Trace,
        Subcommand::Zeta,
        Subcommand::Count,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Validate => "validate",
            Subcommand::Census => "census",
            Subcommand::Bowen => "bowen",
            Subcommand::Birkhoff => "birkhoff",
            Subcommand::Spectrum => "spectrum",
            Subcommand::Trace => "trace",
            Subcommand::Zeta => "zeta",
            Subcommand::Count => "count",
            Subcommand::All => "all",
        }
    }
}

impl FromStr for Subcommand {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Subcommand::SECTIONS
            .iter()
            .chain(std::iter::once(&Subcommand::All))
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown subcommand {s:?}")))
    }
}

/// Process exit status for an error: 3 for budgets, 2 for config and input
/// problems, 1 for numerical failures.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Budget(_) => 3,
        Error::NonConvergence(_) | Error::Eigen(_) | Error::Degenerate(_) => 1,
        _ => 2,
    }
}

/// JSON number carrying the same 17 significant digits as the CSV output.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        serde_json::from_str(&fmt_f64(x)).expect("formatted float parses as JSON")
    } else {
        Value::String(format!("{x}"))
    }
}

pub fn cnum(z: Complex64) -> Value {
    json!([num(z.re), num(z.im)])
}

#[derive(Clone, Debug)]
pub struct Table {
    /// Empty for the main table of a section.
    pub part: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(part: &str, header: &[&str]) -> Self {
        Self { part: part.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Criterion {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

fn criterion(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Criterion {
    Criterion { name: name.into(), pass, detail: detail.into() }
}

#[derive(Clone, Debug)]
pub struct Section {
    pub command: Subcommand,
    pub tables: Vec<Table>,
    pub summary: Value,
    pub criteria: Vec<Criterion>,
    /// Extra non-CSV files: `(file name, bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Section {
    fn new(command: Subcommand) -> Self {
        Self { command, tables: Vec::new(), summary: Value::Object(Map::new()), criteria: Vec::new(), files: Vec::new() }
    }

    fn set(&mut self, key: &str, v: Value) {
        self.summary.as_object_mut().unwrap().insert(key.into(), v);
    }
}

fn f(x: f64) -> String {
    fmt_f64(x)
}

fn vec_str(a: &[i64]) -> String {
    a.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn is_constant(obs: &TrigObservable) -> bool {
    obs.iter().all(|(k, _)| k.iter().all(|&c| c == 0))
}

fn chamber_box(ctx: &Context, radius: i64) -> Result<Vec<Vec<i64>>> {
    let mut out = Vec::new();
    for a in box_points(ctx.model.kappa(), radius) {
        if ctx.chamber.contains_lattice(&a)? {
            out.push(a);
        }
    }
    Ok(out)
}

pub fn run_validate(ctx: &Context) -> Result<Section> {
    let mut s = Section::new(Subcommand::Validate);
    let report = validate_model(&ctx.model, None);
    let mut t = Table::new("", &["check", "pass", "detail"]);
    for c in &report.0 {
        t.push(vec![c.check.clone(), c.pass.to_string(), c.detail.clone()]);
        s.criteria.push(criterion(format!("validate:{}", c.check), c.pass, c.detail.clone()));
    }
    s.set("checks", json!(report.0.iter().map(|c| json!({"check": c.check, "pass": c.pass})).collect::<Vec<_>>()));
    s.set("chambers", json!(ctx.model.weyl_chambers()?.iter().map(|c| c.signs().to_vec()).collect::<Vec<_>>()));
    s.tables.push(t);
    Ok(s)
}

pub fn run_census(ctx: &Context) -> Result<Section> {
    let mut s = Section::new(Subcommand::Census);
    let points = chamber_box(ctx, ctx.config.census.radius)?;
    let rows = periodic_census(&ctx.model, &points)?;
    let mut t = Table::new("", &["a", "fix_count", "det_abs", "n_orbits"]);
    let mut mismatches = Vec::new();
    for r in &rows {
        if r.fix_count != r.det_abs {
            mismatches.push(vec_str(&r.a));
        }
        t.push(vec![
            vec_str(&r.a),
            r.fix_count.to_string(),
            r.det_abs.to_string(),
            r.n_orbits.map_or("out-of-budget".into(), |n| n.to_string()),
        ]);
    }
    s.criteria.push(criterion(
        "census:fix_equals_det",
        mismatches.is_empty(),
        if mismatches.is_empty() { format!("{} chamber points", rows.len()) } else { format!("mismatch at {mismatches:?}") },
    ));
    s.set("n_points", json!(rows.len()));
    s.set("radius", json!(ctx.config.census.radius));
    s.tables.push(t);
    Ok(s)
}

pub fn run_bowen(ctx: &Context) -> Result<Section> {
    let cfg = &ctx.config.bowen;
    let mut s = Section::new(Subcommand::Bowen);
    let fs: Vec<TrigObservable> = ctx.observables.iter().map(|(_, o)| o.clone()).collect();
    let mut t = Table::new("", &["lo", "hi", "n_points", "volume", "observable", "re", "im", "abs_err_vs_haar"]);
    let mut last = Vec::new();
    for (si, slab) in cfg.slabs.iter().enumerate() {
        let lo = slab[0].to_rational()?;
        let hi = slab[1].to_rational()?;
        let est = bowen_estimate_many(&ctx.model, &ctx.chamber, &ctx.cone, &lo, &hi, &fs)?;
        let lo_f = num_traits::ToPrimitive::to_f64(&lo).unwrap();
        for ((name, obs), v) in ctx.observables.iter().zip(&est.values) {
            let err = (v - obs.haar()).norm();
            t.push(vec![
                format_rational(&lo),
                format_rational(&hi),
                est.n_points.to_string(),
                f(est.volume),
                name.clone(),
                f(v.re),
                f(v.im),
                f(err),
            ]);
            if is_constant(obs) {
                let tol = obs.haar().norm() * cfg.c_lattice / lo_f;
                s.criteria.push(criterion(
                    format!("bowen:{name}:slab{si}"),
                    err <= tol,
                    format!("|est - haar| = {err:.3e} vs C/N = {tol:.3e}"),
                ));
            } else if si + 1 == cfg.slabs.len() {
                s.criteria.push(criterion(
                    format!("bowen:{name}"),
                    err <= cfg.mode_tol,
                    format!("|est - haar| = {err:.3e} at the largest slab, tol {}", cfg.mode_tol),
                ));
            }
        }
        if si + 1 == cfg.slabs.len() {
            last = est.values.clone();
            s.set("skipped_boundary_points", json!(est.skipped));
        }
    }
    let mut values = Map::new();
    for ((name, _), v) in ctx.observables.iter().zip(&last) {
        values.insert(name.clone(), cnum(*v));
    }
    s.set("values", Value::Object(values));
    s.tables.push(t);
    Ok(s)
}

pub fn run_birkhoff(ctx: &Context) -> Result<Section> {
    let cfg = &ctx.config.birkhoff;
    let mut s = Section::new(Subcommand::Birkhoff);
    let n = ctx.model.n();
    let fs: Vec<TrigObservable> = ctx.observables.iter().map(|(_, o)| o.clone()).collect();
    let t_final = *cfg.t_ladder.last().unwrap();

    let mut ladder = Table::new("ladder", &["T", "observable", "re", "im", "abs_err_vs_haar", "mean_seed_abs_err"]);
    let mut est = None;
    for &t in &cfg.t_ladder {
        let e = physical_measure_estimate_many(&ctx.model, &ctx.cone, cfg.n_seeds, ctx.config.rng_seed, t, &fs)?;
        for (fi, (name, obs)) in ctx.observables.iter().enumerate() {
            let mean_err = e.per_seed.iter().map(|r| (r[fi].average - obs.haar()).norm()).sum::<f64>() / cfg.n_seeds as f64;
            ladder.push(vec![
                f(t),
                name.clone(),
                f(e.values[fi].re),
                f(e.values[fi].im),
                f((e.values[fi] - obs.haar()).norm()),
                f(mean_err),
            ]);
        }
        est = Some(e);
    }
    let est = est.unwrap();

    let mut header = vec!["seed_index".to_string()];
    header.extend((0..n).map(|i| format!("x0_{i}")));
    header.extend(["T", "count", "observable", "avg_re", "avg_im", "abs_err_vs_haar"].iter().map(|h| h.to_string()));
    let mut per_seed = Table { part: String::new(), header, rows: Vec::new() };
    for (si, results) in est.per_seed.iter().enumerate() {
        for ((name, obs), r) in ctx.observables.iter().zip(results) {
            let mut row = vec![si.to_string()];
            row.extend(r.seed.iter().map(|&x| f(x)));
            row.extend([f(r.t), r.count.to_string(), name.clone(), f(r.average.re), f(r.average.im), f((r.average - obs.haar()).norm())]);
            per_seed.push(row);
        }
    }

    let leaf = stable_leaf_average_many(
        &ctx.model,
        &ctx.chamber,
        &ctx.cone,
        &vec![0.0; n],
        cfg.leaf_samples,
        cfg.leaf_length,
        ctx.config.rng_seed ^ 0x1eaf,
        t_final,
        &fs,
    )?;

    let mut physical = Map::new();
    let mut leaf_values = Map::new();
    let mut basins = Map::new();
    let mut std_errors = Map::new();
    for (fi, (name, obs)) in ctx.observables.iter().enumerate() {
        let haar = obs.haar();
        let mean_err = est.per_seed.iter().map(|r| (r[fi].average - haar).norm()).sum::<f64>() / cfg.n_seeds as f64;
        s.criteria.push(criterion(
            format!("birkhoff:{name}:mean_error"),
            mean_err <= cfg.mean_error_tol,
            format!("mean |avg - haar| = {mean_err:.3e}, tol {}", cfg.mean_error_tol),
        ));
        let gap = (leaf.values[fi] - est.values[fi]).norm();
        s.criteria.push(criterion(
            format!("birkhoff:{name}:stable_leaf"),
            gap <= cfg.leaf_tol,
            format!("|leaf - lebesgue| = {gap:.3e}, tol {}", cfg.leaf_tol),
        ));
        let basin = basin_fraction_of(&est, fi, haar, cfg.basin_tol);
        s.criteria.push(criterion(
            format!("birkhoff:{name}:basin"),
            basin >= cfg.basin_min,
            format!("basin fraction {basin} at tol {}, need {}", cfg.basin_tol, cfg.basin_min),
        ));
        physical.insert(name.clone(), cnum(est.values[fi]));
        std_errors.insert(name.clone(), num(est.std_error[fi]));
        leaf_values.insert(name.clone(), cnum(leaf.values[fi]));
        basins.insert(name.clone(), num(basin));
    }

    // stable pairs y = x + Σ c_i b_i through the first window point
    let a0 = ctx.window.support().next().cloned().ok_or_else(|| Error::Config("window is empty".into()))?;
    let basis = ctx.model.real_subspace_basis(&ctx.chamber.stable_indices())?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.config.rng_seed);
    rng.set_stream(0xd5);
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.density_pairs {
        let x: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let mut y = x.clone();
        for b in &basis {
            let c = 0.1 * (rng.gen::<f64>() - 0.5);
            y.iter_mut().zip(b).for_each(|(yi, bi)| *yi += c * bi);
        }
        for &k in &cfg.density_k {
            let r = stable_density_ratio(&ctx.model, &ctx.chamber, &a0, &x, &y, k)?;
            worst = worst.max((r - 1.0).abs());
        }
    }
    s.criteria.push(criterion(
        "birkhoff:density_ratio",
        worst <= 1e-15,
        format!("max |ratio - 1| = {worst:.3e} over {} pairs", cfg.density_pairs),
    ));

    s.set("rng_seed", json!(ctx.config.rng_seed));
    s.set("T", num(t_final));
    s.set("n_seeds", json!(cfg.n_seeds));
    s.set("count", json!(est.per_seed[0][0].count));
    s.set("physical", Value::Object(physical));
    s.set("std_error", Value::Object(std_errors));
    s.set("stable_leaf", Value::Object(leaf_values));
    s.set("basin_fraction", Value::Object(basins));
    s.set("density_ratio_max_deviation", num(worst));
    s.tables.push(per_seed);
    s.tables.push(ladder);
    Ok(s)
}

pub fn run_spectrum(ctx: &Context) -> Result<Section> {
    let cfg = &ctx.config.spectrum;
    let mut s = Section::new(Subcommand::Spectrum);
    let kappa = ctx.model.kappa();
    let fb = FourierBox::new(&ctx.model, &ctx.chamber, cfg.kmax, cfg.weight_exponent)?;
    let weights = weights_of(&[&fb]);
    let mut scan = Table::new(
        "",
        &["t", "psi_hat_re", "psi_hat_im", "eigen_re", "eigen_im", "residual", "second_modulus", "transient_rate", "iterations", "nnz"],
    );
    for &t in &cfg.t_scan {
        let lam = vec![Complex64::new(t, 0.0); kappa];
        let op = koopman_matrix(&ctx.model, &ctx.chamber, &ctx.window, &lam, &fb)?;
        let rep = leading_spectrum(&op, &weights, cfg.tol, cfg.max_iter)?;
        scan.push(vec![
            f(t),
            f(op.psi_hat().re),
            f(op.psi_hat().im),
            f(rep.eigenvalue.re),
            f(rep.eigenvalue.im),
            f(rep.residual),
            f(rep.second_modulus),
            f(rep.transient_rate),
            rep.iterations.to_string(),
            op.nnz().to_string(),
        ]);
    }

    let zero = vec![Complex64::new(0.0, 0.0); kappa];
    let op0 = koopman_matrix(&ctx.model, &ctx.chamber, &ctx.window, &zero, &fb)?;
    if let Some(w) = op0.warning() {
        s.set("warning", json!(w));
    }
    let rep0 = leading_spectrum(&op0, &weights, cfg.tol, cfg.max_iter)?;
    let only_zero = rep0.eigenvector_modes.len() == 1 && rep0.eigenvector_modes[0].k.iter().all(|&c| c == 0);
    let dev = (rep0.eigenvalue - 1.0).norm();
    s.criteria.push(criterion(
        "spectrum:leading_pair",
        dev <= 1e-10 && only_zero,
        format!("|μ - 1| = {dev:.3e}, eigenvector supported on e_0: {only_zero}"),
    ));
    s.criteria.push(criterion(
        "spectrum:second_modulus",
        rep0.second_modulus <= cfg.second_modulus_max,
        format!("second modulus {} (transient rate {:.4}), bound {}", rep0.second_modulus, rep0.transient_rate, cfg.second_modulus_max),
    ));

    let mut proj = Table::new("projector", &["observable", "step", "distance"]);
    let mut limits = Map::new();
    for (name, obs) in &ctx.observables {
        let u = fb.embed(obs).map_err(|e| Error::Config(format!("observable {name}: {e}")))?;
        let table = iterate_to_projector(&op0, &u, cfg.projector_steps)?;
        for (j, d) in table.distances.iter().enumerate() {
            proj.push(vec![name.clone(), j.to_string(), f(*d)]);
        }
        let modes: Vec<Vec<i64>> = obs.iter().map(|(k, _)| k.clone()).collect();
        let escape = mode_escape_time(&ctx.model, &ctx.window, cfg.kmax, &modes)?;
        let settled_ok = if escape <= cfg.projector_steps { table.settled_at == Some(escape) } else { table.settled_at.is_none() };
        s.criteria.push(criterion(
            format!("spectrum:{name}:escape"),
            settled_ok,
            format!("distance reaches 0 at {:?}, escape oracle {escape}", table.settled_at),
        ));
        let lim = table.limit_coefficients[0];
        let gap = (lim - obs.haar()).norm();
        s.criteria.push(criterion(format!("spectrum:{name}:limit"), gap <= 1e-12, format!("|Π f - haar| = {gap:.3e}")));
        limits.insert(name.clone(), json!({"limit": cnum(lim), "settled_at": table.settled_at, "escape": escape}));
    }
    let rank = projector_rank(&op0, cfg.probes, ctx.config.rng_seed, cfg.max_iter)?;
    s.criteria.push(criterion("spectrum:projector_rank", rank == 1, format!("rank {rank}")));
    s.set("projector_rank", json!(rank));
    if cfg.diagnostic_direct_sum {
        let sum = KoopmanOperator::direct_sum(&op0, &op0)?;
        let r2 = projector_rank(&sum, cfg.probes, ctx.config.rng_seed, cfg.max_iter)?;
        s.criteria.push(criterion("spectrum:diagnostic_rank", r2 == 2, format!("rank {r2} on the disjoint union")));
        s.set("diagnostic_rank", json!(r2));
    }
    let mut coo = Vec::new();
    op0.write_coo(&mut coo)?;
    s.files.push((format!("spectrum_{}.coo", ctx.run_id), coo));
    s.set("leading", serde_json::to_value(&rep0)?);
    s.set("projector", Value::Object(limits));
    s.set("kmax", json!(cfg.kmax));
    s.set("weight_exponent", num(cfg.weight_exponent));
    s.set("edge_bound", num(op0.edge_bound()));
    s.tables.push(scan);
    s.tables.push(proj);
    Ok(s)
}

pub fn run_trace(ctx: &Context) -> Result<Section> {
    let cfg = &ctx.config.trace;
    let mut s = Section::new(Subcommand::Trace);
    let n = ctx.model.n();
    let one = TrigObservable::constant(n, 1.0);
    let mut ident = Table::new("", &["a", "observable", "re", "im"]);
    let mut bad = Vec::new();
    let points = chamber_box(ctx, cfg.identity_radius)?;
    for a in &points {
        let g1 = guillemin_sum(&ctx.model, &ctx.chamber, a, &one)?;
        if g1 != Complex64::new(1.0, 0.0) {
            bad.push(vec_str(a));
        }
        for (name, obs) in &ctx.observables {
            let g = guillemin_sum(&ctx.model, &ctx.chamber, a, obs)?;
            ident.push(vec![vec_str(a), name.clone(), f(g.re), f(g.im)]);
        }
    }
    s.criteria.push(criterion(
        "trace:guillemin_identity",
        bad.is_empty(),
        if bad.is_empty() { format!("sum of 1 is exactly 1 at {} points", points.len()) } else { format!("fails at {bad:?}") },
    ));

    let mut forms = Table::new("forms", &["a", "det_exact", "alternating_sum", "residual", "sign_relation", "dim_stable"]);
    let mut worst: f64 = 0.0;
    let mut signs_ok = true;
    let fpoints = chamber_box(ctx, cfg.forms_radius)?;
    for a in &fpoints {
        let c = forms_alternating_check(&ctx.model, &ctx.chamber, a)?;
        worst = worst.max(c.residual);
        signs_ok &= c.sign_relation;
        forms.push(vec![
            vec_str(a),
            format_rational(&c.det_exact),
            f(c.alternating_sum),
            f(c.residual),
            c.sign_relation.to_string(),
            c.dim_stable.to_string(),
        ]);
    }
    s.criteria.push(criterion(
        "trace:forms_residual",
        worst <= cfg.forms_tol,
        format!("max residual {worst:.3e} over {} points, tol {:e}", fpoints.len(), cfg.forms_tol),
    ));
    s.criteria.push(criterion("trace:forms_sign_relation", signs_ok, "sign det(I-P) = (-1)^dim E_s sign det(P|E_s)"));

    let mut moll = Table::new(
        "mollified",
        &["a", "observable", "eps", "grid", "re", "im", "closed_re", "closed_im", "guillemin_re", "guillemin_im", "min_separation", "warning"],
    );
    for a in &cfg.mollified_a {
        for (name, obs) in &ctx.observables {
            let m = mollified_trace(&ctx.model, a, obs, cfg.eps, cfg.grid)?;
            let closed = mollified_trace_closed_form(&ctx.model, a, obs, cfg.eps)?;
            let g = guillemin_sum(&ctx.model, &ctx.chamber, a, obs)?;
            let gap = (m.value - g).norm();
            let tol = cfg.mollified_tol * g.norm().max(1.0);
            s.criteria.push(criterion(
                format!("trace:mollified:{}:{name}", vec_str(a)),
                gap <= tol,
                format!("|mollified - guillemin| = {gap:.3e}, tol {tol:.3e}"),
            ));
            moll.push(vec![
                vec_str(a),
                name.clone(),
                f(cfg.eps),
                cfg.grid.to_string(),
                f(m.value.re),
                f(m.value.im),
                f(closed.re),
                f(closed.im),
                f(g.re),
                f(g.im),
                m.min_separation.map_or("inf".into(), f),
                m.separation_warning.to_string(),
            ]);
        }
    }
    s.set("identity_points", json!(points.len()));
    s.set("forms_max_residual", num(worst));
    s.tables.push(ident);
    s.tables.push(forms);
    s.tables.push(moll);
    Ok(s)
}

pub fn run_zeta(ctx: &Context) -> Result<Section> {
    let cfg = &ctx.config.zeta;
    let mut s = Section::new(Subcommand::Zeta);
    let kappa = ctx.model.kappa();
    let zero = vec![Complex64::new(0.0, 0.0); kappa];
    let mut coeffs = Table::new("", &["observable", "k", "re", "im"]);
    let mut residues = Map::new();
    for (name, obs) in &ctx.observables {
        let zc = zeta_coefficients(&ctx.model, &ctx.chamber, &ctx.window, &zero, obs, cfg.k)?;
        for k in 1..=zc.len() {
            let c = zc.get(k);
            coeffs.push(vec![name.clone(), k.to_string(), f(c.re), f(c.im)]);
        }
        if is_constant(obs) {
            let exact = (1..=zc.len()).all(|k| zc.get(k) == obs.haar());
            s.criteria.push(criterion(format!("zeta:{name}:exact"), exact, "c_k equals the constant for every k"));
        }
        let pole = dominant_pole_extraction(&zc)?;
        let s0_gap = (pole.s0 - 1.0).norm();
        let res_gap = (pole.residue - obs.haar()).norm();
        let res_tol = if is_constant(obs) { cfg.pole_tol } else { cfg.residue_tol };
        s.criteria.push(criterion(
            format!("zeta:{name}:pole"),
            s0_gap <= cfg.pole_tol && res_gap <= res_tol,
            format!("|s0 - 1| = {s0_gap:.3e}, |residue - haar| = {res_gap:.3e}, vanishing tail {}", pole.vanishing_tail),
        ));
        residues.insert(name.clone(), json!({"s0": cnum(pole.s0), "residue": cnum(pole.residue), "vanishing_tail": pole.vanishing_tail}));
    }

    let grid: Vec<Vec<f64>> = cfg.t_scan.iter().map(|&t| vec![t; kappa]).collect();
    let base = flat_determinant(&ctx.model, &ctx.chamber, &ctx.window, &grid, cfg.k)?;
    let check = flat_determinant(&ctx.model, &ctx.chamber, &ctx.window, &grid, cfg.k_check)?;
    let mut flat = Table::new("flat", &["t", "K", "psi_hat", "log_d", "d", "compensated", "divergent"]);
    let mut stability = Vec::new();
    for ((t, p), q) in cfg.t_scan.iter().zip(&base).zip(&check) {
        for (k, pt) in [(cfg.k, p), (cfg.k_check, q)] {
            let opt = |x: Option<f64>| x.map_or("".into(), f);
            flat.push(vec![f(*t), k.to_string(), f(pt.psi_hat), opt(pt.log_d), opt(pt.d), opt(pt.compensated), pt.divergent.to_string()]);
        }
        let rel = match (p.compensated, q.compensated) {
            (Some(a), Some(b)) => (b - a).abs() / a.abs(),
            _ => f64::INFINITY,
        };
        stability.push(json!({"t": num(*t), "relative_change": num(rel)}));
        let c = criterion(
            format!("zeta:flat_stability:t={t}"),
            rel <= cfg.stability_tol,
            format!("relative change {rel:.3e} for K {} -> {}, tol {}", cfg.k, cfg.k_check, cfg.stability_tol),
        );
        if cfg.assert_stability {
            s.criteria.push(c);
        }
    }
    s.set("residues", Value::Object(residues));
    s.set("flat_stability", json!(stability));
    s.set("flat_stability_asserted", json!(cfg.assert_stability));
    s.tables.push(coeffs);
    s.tables.push(flat);
    Ok(s)
}

pub fn run_count(ctx: &Context) -> Result<Section> {
    let cfg = &ctx.config.count;
    let mut s = Section::new(Subcommand::Count);
    let n = ctx.model.n();
    let growth = periodic_count_growth(&ctx.model, &ctx.chamber, cfg.ell_max)?;
    let mut gt = Table::new("", &["ell", "lattice_points", "total_fixed"]);
    for r in &growth.rows {
        gt.push(vec![r.ell.to_string(), r.lattice_points.to_string(), r.total_fixed.to_string()]);
    }
    s.criteria.push(criterion(
        "count:growth_slope",
        growth.pass,
        format!(
            "compensated slope {:.4} (raw {:.4}, tail {:.4}) vs (n-κ)M + 0.1 = {:.4}",
            growth.compensated_slope, growth.raw_slope, growth.tail_slope, growth.bound
        ),
    ));
    s.set(
        "growth",
        json!({"raw_slope": num(growth.raw_slope), "compensated_slope": num(growth.compensated_slope),
               "tail_slope": num(growth.tail_slope), "m_model": num(growth.m_model), "bound": num(growth.bound)}),
    );

    let m = growth.m_model;
    let calibration = chamber_ball(&ctx.chamber, cfg.calibration_radius)?;
    let delta = calibrate_separation(&ctx.model, &ctx.chamber, &calibration)?;
    let mut sep = Table::new("separation", &["a", "n_points", "min_distance", "min_distance_f64", "lower_bound", "pass"]);
    let mut sep_ok = true;
    for a in chamber_ball(&ctx.chamber, cfg.separation_radius)? {
        let sc = separation_check(&ctx.model, &ctx.chamber, &a)?;
        let ok = separation_bound_holds(&sc, delta, m);
        sep_ok &= ok;
        let norm = a.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
        sep.push(vec![
            vec_str(&a),
            sc.n_points.to_string(),
            sc.min_distance.as_ref().map_or("inf".into(), format_rational),
            f(sc.min_distance_f64()),
            f(delta * (-m * norm).exp()),
            ok.to_string(),
        ]);
    }
    s.criteria.push(criterion("count:separation", sep_ok, format!("frozen δ_fit = {delta:.6e}")));
    s.set("delta_fit", num(delta));

    let calib = near_periodic_volume(&ctx.model, &ctx.chamber, cfg.calibration_eps, cfg.calibration_ell, cfg.n_samples, ctx.config.rng_seed)?;
    let c_fit = calibrate_near_periodic(&ctx.model, m, &calib);
    let mut np = Table::new("near_periodic", &["eps", "ell", "value", "std_error", "bound_applies", "bound_holds"]);
    let mut grid: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut bound_ok = true;
    for (li, &ell) in cfg.ell_ladder.iter().enumerate() {
        for (ei, &eps) in cfg.eps_ladder.iter().enumerate() {
            let v = near_periodic_volume(&ctx.model, &ctx.chamber, eps, ell, cfg.n_samples, ctx.config.rng_seed)?;
            let applies = eps < 0.3 && ell >= cfg.calibration_ell;
            let holds = near_periodic_bound_holds(&ctx.model, &v, c_fit, m);
            if applies {
                bound_ok &= holds;
            }
            grid.insert((li, ei), v.value);
            np.push(vec![f(eps), f(ell), f(v.value), f(v.std_error), applies.to_string(), holds.to_string()]);
        }
    }
    s.criteria.push(criterion("count:near_periodic_bound", bound_ok, format!("frozen C_fit = {c_fit:.6e}")));
    let target = 0.5f64.powi(n as i32);
    let mut ratios = Vec::new();
    let mut ratio_ok = true;
    let mut monotone = true;
    for li in 0..cfg.ell_ladder.len() {
        for ei in 0..cfg.eps_ladder.len() {
            let v = grid[&(li, ei)];
            if ei > 0 {
                monotone &= grid[&(li, ei - 1)] <= v;
                if (cfg.eps_ladder[ei] / cfg.eps_ladder[ei - 1] - 2.0).abs() < 1e-12 {
                    let r = grid[&(li, ei - 1)] / v;
                    ratio_ok &= r >= target / 1.5 && r <= 1.5 * target;
                    ratios.push(num(r));
                }
            }
            if li > 0 {
                monotone &= grid[&(li - 1, ei)] <= v;
            }
        }
    }
    s.criteria.push(criterion(
        "count:eps_halving",
        ratio_ok && !ratios.is_empty(),
        format!("halving ratios {ratios:?}, target 2^-n = {target}"),
    ));
    s.criteria.push(criterion("count:near_periodic_monotone", monotone, "nondecreasing in eps and ell"));
    s.set("c_fit", num(c_fit));
    s.set("halving_ratios", json!(ratios));
    match tori_count(&ctx.model, &ctx.chamber, cfg.tori_ell) {
        Ok(tc) => s.set("tori", json!({"ell": num(tc.ell), "lattice_points": tc.lattice_points, "tori": tc.tori})),
        Err(Error::Budget(msg)) => s.set("tori", json!({"ell": num(cfg.tori_ell), "out_of_budget": msg})),
        Err(e) => return Err(e),
    }
    s.tables.push(gt);
    s.tables.push(sep);
    s.tables.push(np);
    Ok(s)
}

pub fn run_section(cmd: Subcommand, ctx: &Context) -> Result<Section> {
    match cmd {
        Subcommand::Validate => run_validate(ctx),
        Subcommand::Census => run_census(ctx),
        Subcommand::Bowen => run_bowen(ctx),
        Subcommand::Birkhoff => run_birkhoff(ctx),
        Subcommand::Spectrum => run_spectrum(ctx),
        Subcommand::Trace => run_trace(ctx),
        Subcommand::Zeta => run_zeta(ctx),
        Subcommand::Count => run_count(ctx),
        Subcommand::All => Err(Error::InvalidInput("`all` is not a single section".into())),
    }
}

/// Estimator values per observable, their pairwise gaps and pass flags.
pub fn cross_method(ctx: &Context, sections: &[Section]) -> (Value, Vec<Criterion>) {
    let get = |cmd: Subcommand| sections.iter().find(|s| s.command == cmd).map(|s| &s.summary);
    let pick = |v: Option<&Value>| -> Option<Complex64> {
        let arr = v?.as_array()?;
        Some(Complex64::new(arr.first()?.as_f64()?, arr.get(1)?.as_f64()?))
    };
    let mut rows = Vec::new();
    let mut criteria = Vec::new();
    for (name, _) in &ctx.observables {
        let mut est: Vec<(&str, Complex64)> = Vec::new();
        let sources: [(&str, Option<&Value>); 5] = [
            ("bowen", get(Subcommand::Bowen).and_then(|s| s["values"].get(name))),
            ("birkhoff", get(Subcommand::Birkhoff).and_then(|s| s["physical"].get(name))),
            ("stable_leaf", get(Subcommand::Birkhoff).and_then(|s| s["stable_leaf"].get(name))),
            ("spectral_residue", get(Subcommand::Zeta).and_then(|s| s["residues"].get(name)).and_then(|r| r.get("residue"))),
            ("spectral_projector", get(Subcommand::Spectrum).and_then(|s| s["projector"].get(name)).and_then(|r| r.get("limit"))),
        ];
        for (label, v) in sources {
            if let Some(z) = pick(v) {
                est.push((label, z));
            }
        }
        let mut pairs = Map::new();
        let mut max_diff: f64 = 0.0;
        for i in 0..est.len() {
            for j in i + 1..est.len() {
                let d = (est[i].1 - est[j].1).norm();
                max_diff = max_diff.max(d);
                pairs.insert(format!("{}-{}", est[i].0, est[j].0), num(d));
            }
        }
        let pass = est.len() >= 3 && max_diff <= ctx.config.cross_method_tol;
        criteria.push(criterion(
            format!("cross_method:{name}"),
            pass,
            format!("max pairwise difference {max_diff:.3e} over {} estimators, tol {}", est.len(), ctx.config.cross_method_tol),
        ));
        let estimators: Map<String, Value> = est.iter().map(|(l, z)| (l.to_string(), cnum(*z))).collect();
        rows.push(json!({
            "observable": name,
            "estimators": estimators,
            "pairwise": pairs,
            "max_diff": num(max_diff),
            "pass": pass,
        }));
    }
    (json!({"tolerance": num(ctx.config.cross_method_tol), "observables": rows}), criteria)
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, Vec<u8>)>,
    pub criteria: Vec<Criterion>,
}

impl RunOutput {
    pub fn failures(&self) -> Vec<&Criterion> {
        self.criteria.iter().filter(|c| !c.pass).collect()
    }

    pub fn file(&self, name: &str) -> Option<&[u8]> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, b)| b.as_slice())
    }

    /// Writes every file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }
}

pub fn run(cmd: Subcommand, ctx: &Context) -> Result<RunOutput> {
    let cmds: Vec<Subcommand> = if cmd == Subcommand::All { Subcommand::SECTIONS.to_vec() } else { vec![cmd] };
    let sections = cmds.iter().map(|&c| run_section(c, ctx)).collect::<Result<Vec<_>>>()?;
    let mut files = Vec::new();
    let mut criteria = Vec::new();
    let mut summaries = Map::new();
    for s in &sections {
        for t in &s.tables {
            let name = if t.part.is_empty() {
                format!("{}_{}.csv", s.command.name(), ctx.run_id)
            } else {
                format!("{}_{}_{}.csv", s.command.name(), ctx.run_id, t.part)
            };
            files.push((name, t.to_csv()?));
        }
        files.extend(s.files.iter().cloned());
        criteria.extend(s.criteria.iter().cloned());
        summaries.insert(s.command.name().into(), s.summary.clone());
    }
    let mut summary = json!({
        "run_id": ctx.run_id,
        "subcommand": cmd.name(),
        "model": {"name": ctx.model.name(), "path": ctx.config.model, "n": ctx.model.n(), "kappa": ctx.model.kappa()},
        "chamber": {"index": ctx.chamber_index, "signs": ctx.chamber.signs()},
        "rng_seed": ctx.config.rng_seed,
        "sections": summaries,
    });
    if cmd == Subcommand::All {
        let (cm, cm_criteria) = cross_method(ctx, &sections);
        summary["cross_method"] = cm;
        criteria.extend(cm_criteria);
    }
    summary["criteria"] = json!(criteria
        .iter()
        .map(|c| json!({"name": c.name, "pass": c.pass, "detail": c.detail}))
        .collect::<Vec<_>>());
    summary["pass"] = json!(criteria.iter().all(|c| c.pass));
    let mut text = serde_json::to_vec_pretty(&summary)?;
    text.push(b'\n');
    files.push(("summary.json".into(), text));
    Ok(RunOutput { files, criteria })
}
