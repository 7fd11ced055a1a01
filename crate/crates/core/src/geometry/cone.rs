use crate::{Error, Result};
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// An open polyhedral cone in `R^κ` together with a linear functional
/// `e1` that is strictly positive on it.
///
/// The cone is stored through its extreme rays; membership is strict
/// positivity of every facet functional, so boundary points are excluded.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    dim: usize,
    generators: Vec<Vec<BigRational>>,
    e1: Vec<BigRational>,
    /// κ extreme rays spanning the same cone.
    extreme: Vec<Vec<BigRational>>,
    /// Facet normals scaled to integers.
    facets: Vec<Vec<BigInt>>,
    /// `e1` as an integer vector over a common positive denominator.
    e1_num: Vec<BigInt>,
    e1_den: BigInt,
}

fn dot(a: &[BigRational], b: &[BigRational]) -> BigRational {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross2(a: &[BigRational], b: &[BigRational]) -> BigRational {
    &a[0] * &b[1] - &a[1] * &b[0]
}

/// Scales a rational vector by the lcm of its denominators.
fn integer_scaled(v: &[BigRational]) -> (Vec<BigInt>, BigInt) {
    let den = v.iter().fold(BigInt::one(), |acc, q| acc.lcm(q.denom()));
    let num = v.iter().map(|q| (q * BigRational::from_integer(den.clone())).to_integer()).collect();
    (num, den)
}

/// Rational matrix inverse by Gauss-Jordan; `None` when singular.
fn invert(rows: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = rows.len();
    let mut m: Vec<Vec<BigRational>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).find(|&i| !m[i][c].is_zero())?;
        m.swap(c, p);
        let inv = m[c][c].recip();
        for x in m[c].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..n {
            if i != c && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..2 * n {
                    let v = &m[c][j] * &f;
                    m[i][j] -= v;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

fn rational_det(rows: &[Vec<BigRational>]) -> BigRational {
    let n = rows.len();
    let mut m = rows.to_vec();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !m[i][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            m.swap(c, p);
            det = -det;
        }
        det *= m[c][c].clone();
        for i in c + 1..n {
            let f = &m[i][c] / &m[c][c];
            for j in c..n {
                let v = &m[c][j] * &f;
                m[i][j] -= v;
            }
        }
    }
    det
}

impl ConeSpec {
    /// Builds the cone spanned by `generators`.
    ///
    /// κ = 1 and κ = 2 accept any number of generators; for κ ≥ 3 the cone
    /// must be simplicial (exactly κ linearly independent generators).
    pub fn new(generators: Vec<Vec<BigRational>>, e1: Vec<BigRational>) -> Result<Self> {
        let dim = e1.len();
        if dim == 0 {
            return Err(Error::InvalidCone("dimension must be positive".into()));
        }
        if generators.is_empty() {
            return Err(Error::InvalidCone("no generators".into()));
        }
        for g in &generators {
            if g.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: g.len() });
            }
            if g.iter().all(Zero::is_zero) {
                return Err(Error::InvalidCone("zero generator".into()));
            }
            if !dot(&e1, g).is_positive() {
                return Err(Error::UnboundedSlab(format!(
                    "e1 is not positive on generator {}",
                    fmt_vec(g)
                )));
            }
        }

        let extreme: Vec<Vec<BigRational>> = match dim {
            1 => vec![vec![BigRational::from_integer(generators[0][0].signum().to_integer())]],
            2 => {
                let lo = generators
                    .iter()
                    .find(|g| generators.iter().all(|h| !cross2(g, h).is_negative()))
                    .cloned();
                let hi = generators
                    .iter()
                    .find(|g| generators.iter().all(|h| !cross2(g, h).is_positive()))
                    .cloned();
                match (lo, hi) {
                    (Some(lo), Some(hi)) if !cross2(&lo, &hi).is_zero() => vec![lo, hi],
                    _ => return Err(Error::InvalidCone("generators do not span R^2".into())),
                }
            }
            _ => {
                if generators.len() != dim {
                    return Err(Error::NonSimplicial(dim));
                }
                generators.clone()
            }
        };

        let facets_q: Vec<Vec<BigRational>> = match dim {
            1 => vec![extreme[0].clone()],
            2 => {
                let (lo, hi) = (&extreme[0], &extreme[1]);
                vec![vec![-lo[1].clone(), lo[0].clone()], vec![hi[1].clone(), -hi[0].clone()]]
            }
            _ => {
                // columns are generators; rows of the inverse are the dual basis
                let cols: Vec<Vec<BigRational>> =
                    (0..dim).map(|i| extreme.iter().map(|g| g[i].clone()).collect()).collect();
                invert(&cols).ok_or_else(|| {
                    Error::InvalidCone("generators are linearly dependent".into())
                })?
            }
        };
        let facets = facets_q.iter().map(|f| integer_scaled(f).0).collect();
        let (e1_num, e1_den) = integer_scaled(&e1);

        Ok(Self { dim, generators, e1, extreme, facets, e1_num, e1_den })
    }

    /// Convenience constructor from integer generators and an integer `e1`.
    pub fn from_integers(generators: &[Vec<i64>], e1: &[i64]) -> Result<Self> {
        let q = |v: &[i64]| v.iter().map(|&x| BigRational::from_integer(x.into())).collect();
        Self::new(generators.iter().map(|g| q(g)).collect(), q(e1))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[Vec<BigRational>] {
        &self.generators
    }

    pub fn extreme_rays(&self) -> &[Vec<BigRational>] {
        &self.extreme
    }

    pub fn e1(&self) -> &[BigRational] {
        &self.e1
    }

    pub fn e1_of(&self, a: &[BigRational]) -> BigRational {
        dot(&self.e1, a)
    }

    pub fn e1_of_lattice(&self, a: &[i64]) -> BigRational {
        let num: BigInt = self.e1_num.iter().zip(a).map(|(c, &x)| c * x).sum();
        BigRational::new(num, self.e1_den.clone())
    }

    pub fn e1_of_f64(&self, a: &[f64]) -> f64 {
        self.e1.iter().zip(a).map(|(c, x)| c.to_f64().unwrap_or(f64::NAN) * x).sum()
    }

    /// Membership in the open cone.
    pub fn contains(&self, a: &[BigRational]) -> Result<bool> {
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.len() });
        }
        Ok(self.facets.iter().all(|f| {
            let v: BigRational = f.iter().zip(a).map(|(c, x)| x * c).sum();
            v.is_positive()
        }))
    }

    pub fn contains_lattice(&self, a: &[i64]) -> Result<bool> {
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: a.len() });
        }
        Ok(self.facets.iter().all(|f| f.iter().zip(a).map(|(c, &x)| c * x).sum::<BigInt>().is_positive()))
    }

    /// Integer points of the open cone with `lo <= e1(a) <= hi`, in
    /// lexicographic order. Slab ends are inclusive.
    pub fn slab_lattice_points(&self, lo: &BigRational, hi: &BigRational) -> Result<Vec<Vec<i64>>> {
        if lo > hi {
            return Err(Error::SlabOrder { lo: lo.to_string(), hi: hi.to_string() });
        }
        let mut out = Vec::new();
        if !hi.is_positive() {
            return Ok(out);
        }
        // bounding box of the simplex {0} ∪ {hi * g / e1(g)}
        let mut mins = vec![BigRational::zero(); self.dim];
        let mut maxs = vec![BigRational::zero(); self.dim];
        for g in &self.extreme {
            let scale = hi / self.e1_of(g);
            for i in 0..self.dim {
                let v = &g[i] * &scale;
                if v < mins[i] {
                    mins[i] = v.clone();
                }
                if v > maxs[i] {
                    maxs[i] = v;
                }
            }
        }
        let to_i64 = |q: BigInt| {
            q.to_i64().ok_or_else(|| Error::Budget("slab bounding box exceeds i64 range".into()))
        };
        let lower: Vec<i64> = mins.iter().map(|q| to_i64(q.floor().to_integer())).collect::<Result<_>>()?;
        let upper: Vec<i64> = maxs.iter().map(|q| to_i64(q.ceil().to_integer())).collect::<Result<_>>()?;
        let volume: f64 = lower.iter().zip(&upper).map(|(l, u)| (u - l + 1) as f64).product();
        if volume > 5e8 {
            return Err(Error::Budget(format!("slab bounding box holds {volume:.3e} points")));
        }

        let lo_scaled = lo * BigRational::from_integer(self.e1_den.clone());
        let hi_scaled = hi * BigRational::from_integer(self.e1_den.clone());
        let mut a = lower.clone();
        loop {
            if self.contains_lattice(&a)? {
                let e: BigInt = self.e1_num.iter().zip(&a).map(|(c, &x)| c * x).sum();
                let e = BigRational::from_integer(e);
                if e >= lo_scaled && e <= hi_scaled {
                    out.push(a.clone());
                }
            }
            // odometer, last coordinate fastest
            let mut i = self.dim;
            loop {
                if i == 0 {
                    return Ok(out);
                }
                i -= 1;
                if a[i] < upper[i] {
                    a[i] += 1;
                    break;
                }
                a[i] = lower[i];
            }
        }
    }

    /// Lebesgue volume of `{a in cone : e1(a) <= 1}`, exact.
    pub fn unit_section_volume(&self) -> BigRational {
        let rows: Vec<Vec<BigRational>> =
            self.extreme.iter().map(|g| {
                let s = self.e1_of(g);
                g.iter().map(|x| x / &s).collect()
            }).collect();
        let fact: BigInt = (1..=self.dim as u64).map(BigInt::from).product();
        rational_det(&rows).abs() / BigRational::from_integer(fact)
    }

    /// Exact volume of `{a in cone : lo <= e1(a) <= hi}`, using
    /// `vol(C_{0,T}) = T^κ vol(C_{0,1})`.
    pub fn slab_volume_exact(&self, lo: &BigRational, hi: &BigRational) -> Result<BigRational> {
        if lo > hi {
            return Err(Error::SlabOrder { lo: lo.to_string(), hi: hi.to_string() });
        }
        let clamp = |t: &BigRational| if t.is_negative() { BigRational::zero() } else { t.clone() };
        let k = self.dim as i32;
        let unit = self.unit_section_volume();
        Ok((num_traits::pow::Pow::pow(clamp(hi), k) - num_traits::pow::Pow::pow(clamp(lo), k)) * unit)
    }

    pub fn slab_volume(&self, lo: &BigRational, hi: &BigRational) -> Result<f64> {
        self.slab_volume_exact(lo, hi)
            .map(|v| v.to_f64().unwrap_or(f64::NAN))
    }
}

fn fmt_vec(v: &[BigRational]) -> String {
    let parts: Vec<String> = v.iter().map(ToString::to_string).collect();
    format!("({})", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{int, rat};
    use rand::{Rng, SeedableRng};

    fn quadrant() -> ConeSpec {
        ConeSpec::from_integers(&[vec![1, 0], vec![0, 1]], &[1, 1]).unwrap()
    }

    #[test]
    fn membership_one_dimensional() {
        let c = ConeSpec::from_integers(&[vec![1]], &[1]).unwrap();
        assert!(c.contains_lattice(&[3]).unwrap());
        assert!(!c.contains_lattice(&[-2]).unwrap());
        assert!(!c.contains_lattice(&[0]).unwrap());
        assert!(matches!(c.contains_lattice(&[1, 2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn quadrant_boundary_is_excluded() {
        let c = quadrant();
        assert!(!c.contains(&[int(1), int(0)]).unwrap());
        assert!(c.contains(&[rat(1, 3), rat(1, 7)]).unwrap());
    }

    #[test]
    fn slab_points_one_dimensional() {
        let c = ConeSpec::from_integers(&[vec![1]], &[1]).unwrap();
        let pts = c.slab_lattice_points(&int(2), &int(4)).unwrap();
        assert_eq!(pts, vec![vec![2], vec![3], vec![4]]);
        assert!(matches!(c.slab_lattice_points(&int(5), &int(3)), Err(Error::SlabOrder { .. })));
    }

    #[test]
    fn slab_points_match_box_scan() {
        let c = quadrant();
        for (lo, hi) in [(1, 2), (0, 5), (3, 7)] {
            let pts = c.slab_lattice_points(&int(lo), &int(hi)).unwrap();
            let mut brute = Vec::new();
            for a in 0..=hi {
                for b in 0..=hi {
                    if a > 0 && b > 0 && a + b >= lo && a + b <= hi {
                        brute.push(vec![a, b]);
                    }
                }
            }
            assert_eq!(pts, brute);
        }
        assert_eq!(c.slab_lattice_points(&int(1), &int(2)).unwrap(), vec![vec![1, 1]]);
    }

    #[test]
    fn volumes() {
        let c = ConeSpec::from_integers(&[vec![1]], &[1]).unwrap();
        assert_eq!(c.slab_volume_exact(&int(0), &int(7)).unwrap(), int(7));
        let q = quadrant();
        assert_eq!(q.slab_volume_exact(&int(0), &int(6)).unwrap(), int(18));
        let skew = ConeSpec::from_integers(&[vec![2, 1], vec![1, 2]], &[1, 1]).unwrap();
        assert_eq!(skew.slab_volume_exact(&int(0), &int(3)).unwrap(), rat(3, 2));
    }

    #[test]
    fn skew_cone_volume_by_rejection_sampling() {
        let skew = ConeSpec::from_integers(&[vec![2, 1], vec![1, 2]], &[1, 1]).unwrap();
        // cone ∩ {a1 + a2 <= 3} lies in [0,3]^2
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let samples = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..samples {
            let x: f64 = rng.gen::<f64>() * 3.0;
            let y: f64 = rng.gen::<f64>() * 3.0;
            // facets of cone((2,1),(1,2)): 2y - x > 0 and 2x - y > 0
            if 2.0 * y > x && 2.0 * x > y && x + y <= 3.0 {
                hits += 1;
            }
        }
        let mc = 9.0 * hits as f64 / samples as f64;
        let exact = skew.slab_volume(&int(0), &int(3)).unwrap();
        assert!((mc - exact).abs() / exact < 0.01, "mc {mc} vs exact {exact}");
    }

    #[test]
    fn redundant_generators_in_the_plane() {
        let c = ConeSpec::from_integers(&[vec![1, 2], vec![3, 1], vec![2, 2]], &[1, 1]).unwrap();
        let s = ConeSpec::from_integers(&[vec![3, 1], vec![1, 2]], &[1, 1]).unwrap();
        assert_eq!(c.unit_section_volume(), s.unit_section_volume());
        assert!(c.contains_lattice(&[2, 2]).unwrap());
        assert!(!c.contains_lattice(&[3, 1]).unwrap());
    }

    #[test]
    fn e1_must_be_positive() {
        let err = ConeSpec::from_integers(&[vec![1, 0], vec![0, 1]], &[1, -1]).unwrap_err();
        assert!(matches!(err, Error::UnboundedSlab(_)));
    }

    #[test]
    fn simplicial_three_dimensional() {
        let c = ConeSpec::from_integers(&[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]], &[1, 1, 1]).unwrap();
        assert_eq!(c.unit_section_volume(), rat(1, 6));
        assert!(c.contains_lattice(&[1, 1, 1]).unwrap());
        assert!(!c.contains_lattice(&[1, 0, 1]).unwrap());
        let err = ConeSpec::from_integers(
            &[vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1], vec![1, 1, 1]],
            &[1, 1, 1],
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonSimplicial(3)));
    }

    #[test]
    fn lattice_count_tracks_volume() {
        for cone in [
            ConeSpec::from_integers(&[vec![1]], &[1]).unwrap(),
            quadrant(),
            ConeSpec::from_integers(&[vec![2, 1], vec![1, 2]], &[1, 1]).unwrap(),
        ] {
            let (lo, hi) = (int(100), int(200));
            let count = cone.slab_lattice_points(&lo, &hi).unwrap().len() as f64;
            let vol = cone.slab_volume(&lo, &hi).unwrap();
            assert!((count / vol - 1.0).abs() <= 5.0 / 200.0, "ratio {}", count / vol);
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn membership_invariant_under_positive_scaling(
            x in -50i64..50, y in -50i64..50, num in 1i64..20, den in 1i64..20
        ) {
            let c = ConeSpec::from_integers(&[vec![2, 1], vec![-1, 3]], &[1, 2]).unwrap();
            let a = vec![int(x), int(y)];
            let s = rat(num, den);
            let scaled: Vec<BigRational> = a.iter().map(|v| v * &s).collect();
            prop_assert_eq!(c.contains(&a).unwrap(), c.contains(&scaled).unwrap());
        }
    }
}
