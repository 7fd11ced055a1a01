use super::ActionModel;
use crate::geometry::ConeSpec;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use std::f64::consts::TAU;

/// A connected component of `R^κ` minus the Lyapunov walls.
///
/// `signs[i] = +1` marks eigen-index `i` as expanded by `M^a`,
/// i.e. `Σ_j a_j Λ[i][j] > 0` on the region.
#[derive(Clone, Debug, PartialEq)]
pub struct WeylChamber {
    signs: Vec<i8>,
    lyapunov: Vec<Vec<f64>>,
    /// Unit interior direction.
    representative: Vec<f64>,
    /// Angular interval `(start, end)` in radians, end > start; rank 2 only.
    arc: Option<(f64, f64)>,
}

const WALL_TOL: f64 = 1e-12;

impl WeylChamber {
    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn kappa(&self) -> usize {
        self.representative.len()
    }

    pub fn unstable_indices(&self) -> Vec<usize> {
        (0..self.signs.len()).filter(|&i| self.signs[i] > 0).collect()
    }

    pub fn stable_indices(&self) -> Vec<usize> {
        (0..self.signs.len()).filter(|&i| self.signs[i] < 0).collect()
    }

    pub fn representative(&self) -> &[f64] {
        &self.representative
    }

    /// Angular extent for κ = 2, in radians measured from the first axis.
    pub fn arc(&self) -> Option<(f64, f64)> {
        self.arc
    }

    fn functional(&self, i: usize, a: &[f64]) -> f64 {
        self.lyapunov[i].iter().zip(a).map(|(l, x)| l * x).sum()
    }

    /// Strict membership with a relative margin `1e-12 |a|`.
    pub fn contains(&self, a: &[f64]) -> Result<bool> {
        if a.len() != self.kappa() {
            return Err(Error::DimensionMismatch { expected: self.kappa(), got: a.len() });
        }
        let scale = a.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Ok(false);
        }
        Ok((0..self.signs.len()).all(|i| f64::from(self.signs[i]) * self.functional(i, a) > WALL_TOL * scale))
    }

    pub fn contains_lattice(&self, a: &[i64]) -> Result<bool> {
        let af: Vec<f64> = a.iter().map(|&x| x as f64).collect();
        self.contains(&af)
    }

    /// Top directional expansion rate `max_i max_{|u|=1, u ∈ closure} Σ_j u_j Λ[i][j]`.
    pub fn m_model(&self) -> f64 {
        match (self.kappa(), self.arc) {
            (1, _) => {
                let u = self.representative[0];
                self.lyapunov.iter().map(|r| r[0] * u).fold(f64::NEG_INFINITY, f64::max)
            }
            (2, Some((s, e))) => self
                .lyapunov
                .iter()
                .map(|r| {
                    // u·Λ_i over an arc peaks at the direction of Λ_i if inside, else at an end
                    let at = |t: f64| r[0] * t.cos() + r[1] * t.sin();
                    let mut best = at(s).max(at(e));
                    let mut peak = r[1].atan2(r[0]);
                    while peak < s {
                        peak += TAU;
                    }
                    if peak <= e {
                        best = best.max(r[0].hypot(r[1]));
                    }
                    best
                })
                .fold(f64::NEG_INFINITY, f64::max),
            _ => {
                let dirs = sphere_directions(self.kappa(), 20_000);
                dirs.iter()
                    .filter(|u| self.contains(u).unwrap_or(false))
                    .flat_map(|u| (0..self.signs.len()).map(|i| self.functional(i, u)).collect::<Vec<_>>())
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// A rational simplicial cone strictly inside the chamber.
    ///
    /// For κ = 2 the rays are the small integer vectors (entries up to
    /// `max_entry`) closest to the two walls after shrinking the arc by
    /// `margin` radians on both sides; `e1` is the sum of the rays.
    pub fn inner_cone(&self, margin: f64, max_entry: i64) -> Result<ConeSpec> {
        let to_int = |v: &[i64]| v.iter().map(|&x| BigRational::from_integer(BigInt::from(x))).collect::<Vec<_>>();
        match (self.kappa(), self.arc) {
            (1, _) => {
                let g = if self.representative[0] > 0.0 { 1 } else { -1 };
                ConeSpec::new(vec![to_int(&[g])], to_int(&[g]))
            }
            (2, Some((s, e))) => {
                let (lo, hi) = (s + margin, e - margin);
                if lo >= hi {
                    return Err(Error::InvalidCone("margin exceeds half the chamber angle".into()));
                }
                let mut best_lo: Option<(f64, [i64; 2])> = None;
                let mut best_hi: Option<(f64, [i64; 2])> = None;
                for x in -max_entry..=max_entry {
                    for y in -max_entry..=max_entry {
                        if (x, y) == (0, 0) || num_integer::gcd(x, y) != 1 {
                            continue;
                        }
                        let mut t = (y as f64).atan2(x as f64);
                        while t < lo {
                            t += TAU;
                        }
                        if t > hi {
                            continue;
                        }
                        if best_lo.is_none_or(|(b, _)| t < b) {
                            best_lo = Some((t, [x, y]));
                        }
                        if best_hi.is_none_or(|(b, _)| t > b) {
                            best_hi = Some((t, [x, y]));
                        }
                    }
                }
                match (best_lo, best_hi) {
                    (Some((t0, g0)), Some((t1, g1))) if t1 > t0 => {
                        let e1 = [g0[0] + g1[0], g0[1] + g1[1]];
                        ConeSpec::new(vec![to_int(&g0), to_int(&g1)], to_int(&e1))
                    }
                    _ => Err(Error::InvalidCone(format!(
                        "no two integer rays with entries up to {max_entry} fit inside the shrunken chamber"
                    ))),
                }
            }
            _ => Err(Error::InvalidCone("automatic inner cones are only provided for κ <= 2".into())),
        }
    }
}

fn sign_vector(lyap: &[Vec<f64>], u: &[f64]) -> Option<Vec<i8>> {
    let scale = u.iter().map(|x| x.abs()).fold(0.0, f64::max);
    lyap.iter()
        .map(|r| {
            let v: f64 = r.iter().zip(u).map(|(l, x)| l * x).sum();
            if v > WALL_TOL * scale {
                Some(1)
            } else if v < -WALL_TOL * scale {
                Some(-1)
            } else {
                None
            }
        })
        .collect()
}

/// Deterministic quasi-uniform directions on `S^{κ-1}`.
fn sphere_directions(kappa: usize, count: usize) -> Vec<Vec<f64>> {
    // Halton points of [-1,1]^κ projected radially
    let primes = [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29];
    (1..=count as u64)
        .map(|idx| {
            let v: Vec<f64> = (0..kappa)
                .map(|d| {
                    let b = primes[d % primes.len()];
                    let (mut f, mut r, mut i) = (1.0, 0.0, idx);
                    while i > 0 {
                        f /= b as f64;
                        r += f * (i % b) as f64;
                        i /= b;
                    }
                    2.0 * r - 1.0
                })
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect()
}

pub(super) fn weyl_chambers(model: &ActionModel) -> Result<Vec<WeylChamber>> {
    let lyap = model.lyapunov_functionals()?.to_vec();
    for (i, r) in lyap.iter().enumerate() {
        if r.iter().all(|x| x.abs() <= 1e-10) {
            return Err(Error::Degenerate(format!("Lyapunov functional {i} vanishes identically")));
        }
    }
    let kappa = model.kappa();
    let mut out = Vec::new();
    match kappa {
        1 => {
            for u in [1.0, -1.0] {
                let signs = sign_vector(&lyap, &[u]).expect("nonzero rows");
                out.push(WeylChamber { signs, lyapunov: lyap.clone(), representative: vec![u], arc: None });
            }
        }
        2 => {
            let mut walls: Vec<f64> = Vec::new();
            for r in &lyap {
                let base = (-r[0]).atan2(r[1]).rem_euclid(TAU);
                walls.push(base);
                walls.push((base + TAU / 2.0).rem_euclid(TAU));
            }
            walls.sort_by(|a, b| a.partial_cmp(b).unwrap());
            walls.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
            for w in 0..walls.len() {
                let s = walls[w];
                let e = if w + 1 < walls.len() { walls[w + 1] } else { walls[0] + TAU };
                let mid = 0.5 * (s + e);
                let rep = vec![mid.cos(), mid.sin()];
                let signs = sign_vector(&lyap, &rep)
                    .ok_or_else(|| Error::Degenerate("chamber midpoint lies on a wall".into()))?;
                out.push(WeylChamber { signs, lyapunov: lyap.clone(), representative: rep, arc: Some((s, e)) });
            }
        }
        _ => {
            let mut seen: Vec<Vec<i8>> = Vec::new();
            for u in sphere_directions(kappa, 50_000) {
                if let Some(signs) = sign_vector(&lyap, &u) {
                    if !seen.contains(&signs) {
                        seen.push(signs.clone());
                        out.push(WeylChamber { signs, lyapunov: lyap.clone(), representative: u, arc: None });
                    }
                }
            }
            out.sort_by(|a, b| b.signs.cmp(&a.signs));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::models;
    use rand::{Rng, SeedableRng};

    #[test]
    fn cat_map_has_two_chambers() {
        let ch = models::cat_map().weyl_chambers().unwrap();
        assert_eq!(ch.len(), 2);
        assert_eq!(ch[0].signs(), &[1, -1]);
        assert_eq!(ch[1].signs(), &[-1, 1]);
        assert!(ch[0].contains(&[3.0]).unwrap() && !ch[0].contains(&[-3.0]).unwrap());
        let r = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((ch[0].m_model() - r).abs() < 1e-14);
    }

    #[test]
    fn cubic_model_has_six_chambers_matching_circle_sampling() {
        let m = models::cubic_rank2();
        let ch = m.weyl_chambers().unwrap();
        assert_eq!(ch.len(), 6);
        // oracle: distinct sign vectors seen on a fine circle of directions
        let lyap = m.lyapunov_functionals().unwrap();
        let mut sampled: Vec<Vec<i8>> = Vec::new();
        for s in 0..3600 {
            let t = TAU * (s as f64 + 0.5) / 3600.0;
            if let Some(v) = sign_vector(lyap, &[t.cos(), t.sin()]) {
                if !sampled.contains(&v) {
                    sampled.push(v);
                }
            }
        }
        assert_eq!(sampled.len(), 6);
        for c in &ch {
            assert!(sampled.contains(&c.signs().to_vec()));
            let (unst, st) = (c.unstable_indices(), c.stable_indices());
            assert_eq!(unst.len() + st.len(), 3);
            assert!(!unst.is_empty() && !st.is_empty());
        }
    }

    #[test]
    fn sign_vectors_constant_on_regions() {
        let m = models::cubic_rank2();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for c in m.weyl_chambers().unwrap() {
            let (s, e) = c.arc().unwrap();
            for _ in 0..100 {
                let t = rng.gen_range(s..e);
                let r = rng.gen_range(0.1..10.0);
                let p = [r * t.cos(), r * t.sin()];
                assert_eq!(sign_vector(m.lyapunov_functionals().unwrap(), &p).unwrap(), c.signs());
                assert!(c.contains(&p).unwrap());
            }
        }
    }

    #[test]
    fn m_model_matches_dense_arc_scan() {
        let m = models::cubic_rank2();
        let lyap = m.lyapunov_functionals().unwrap();
        for c in m.weyl_chambers().unwrap() {
            let (s, e) = c.arc().unwrap();
            let mut best = f64::NEG_INFINITY;
            for step in 0..=20_000 {
                let t = s + (e - s) * step as f64 / 20_000.0;
                for r in lyap {
                    best = best.max(r[0] * t.cos() + r[1] * t.sin());
                }
            }
            assert!((c.m_model() - best).abs() < 1e-6, "{} vs {best}", c.m_model());
        }
    }

    #[test]
    fn inner_cones_sit_inside() {
        let m = models::cubic_rank2();
        for c in m.weyl_chambers().unwrap() {
            let cone = c.inner_cone(0.05, 6).unwrap();
            for g in cone.extreme_rays() {
                let gf: Vec<f64> = g.iter().map(|x| num_traits::ToPrimitive::to_f64(x).unwrap()).collect();
                assert!(c.contains(&gf).unwrap());
            }
        }
    }

    #[test]
    fn zero_row_is_degenerate() {
        // eigenvalue 1 on the third axis gives a vanishing exponent row
        let m = ActionModel::from_i64("deg", &[vec![vec![2, 1, 0], vec![1, 1, 0], vec![0, 0, 1]]]).unwrap();
        assert!(matches!(m.weyl_chambers(), Err(Error::Degenerate(_))));
    }
}
