//! Algebraic Anosov `Z^κ`-actions on the torus `T^n`: commuting hyperbolic
//! unimodular integer matrices, their joint eigen-structure, Lyapunov
//! functionals, Weyl chambers and Poincaré determinants.
//!
//! The element `a ∈ Z^κ` acts by `M^a = M_1^{a_1} ··· M_κ^{a_κ}`; this is
//! the time-one map of the suspension flow in the direction `a`.

mod chamber;
mod eigen;
pub mod models;

pub use chamber::WeylChamber;

use crate::linalg::IntMatrix;
use crate::{Error, Result};
use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

/// Joint spectral data of a diagonalizable commuting family.
#[derive(Clone, Debug)]
pub struct Spectral {
    /// `eigenvalues[i][j] = λ_i(M_j)`.
    pub eigenvalues: Vec<Vec<Complex64>>,
    /// `lyapunov[i][j] = log|λ_i(M_j)|`.
    pub lyapunov: Vec<Vec<f64>>,
    /// Columns are the common eigenvectors.
    pub vectors: DMatrix<Complex64>,
    /// Rows are eigenvectors of the transposed generators, dual to `vectors`.
    pub dual: DMatrix<Complex64>,
    pub max_residual: f64,
}

/// An abelian action by `κ` integer `n × n` matrices.
#[derive(Clone, Debug)]
pub struct ActionModel {
    name: String,
    n: usize,
    generators: Vec<IntMatrix>,
    inverses: Option<Vec<IntMatrix>>,
    spectral: std::result::Result<Spectral, String>,
}

/// Model file: integer matrices, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelJson {
    pub name: String,
    pub generators: Vec<Vec<Vec<i64>>>,
}

/// One named check of [`validate_model`].
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub check: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport(pub Vec<Check>);

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.0.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.0.iter().find(|c| c.check == name)
    }
}

impl ActionModel {
    /// Stores the generators and attempts the joint eigen-decomposition.
    /// Only structural problems fail here; dynamical hypotheses are
    /// reported by [`validate_model`].
    pub fn new(name: impl Into<String>, generators: Vec<IntMatrix>) -> Result<Self> {
        let Some(first) = generators.first() else {
            return Err(Error::InvalidInput("an action needs at least one generator".into()));
        };
        let n = first.rows();
        if n == 0 {
            return Err(Error::InvalidInput("zero-dimensional torus".into()));
        }
        for g in &generators {
            if !g.is_square() || g.rows() != n {
                return Err(Error::DimensionMismatch { expected: n, got: g.rows().max(g.cols()) });
            }
        }
        let inverses = generators.iter().map(IntMatrix::inverse_unimodular).collect::<Option<Vec<_>>>();
        let spectral = eigen::joint_eigen(&generators).map(|je| {
            let mut order: Vec<usize> = (0..n).collect();
            let lyap: Vec<Vec<f64>> =
                je.values.iter().map(|row| row.iter().map(|z| z.norm().ln()).collect()).collect();
            order.sort_by(|&x, &y| {
                lyap[y][0]
                    .partial_cmp(&lyap[x][0])
                    .unwrap()
                    .then(je.values[y][0].im.partial_cmp(&je.values[x][0].im).unwrap())
            });
            Spectral {
                eigenvalues: order.iter().map(|&i| je.values[i].clone()).collect(),
                lyapunov: order.iter().map(|&i| lyap[i].clone()).collect(),
                vectors: DMatrix::from_fn(n, n, |r, c| je.vectors[(r, order[c])]),
                dual: DMatrix::from_fn(n, n, |r, c| je.dual[(order[r], c)]),
                max_residual: je.max_residual,
            }
        });
        Ok(Self { name: name.into(), n, generators, inverses, spectral })
    }

    pub fn from_i64(name: impl Into<String>, generators: &[Vec<Vec<i64>>]) -> Result<Self> {
        let mats = generators
            .iter()
            .map(|g| IntMatrix::from_rows(g).ok_or_else(|| Error::InvalidInput("ragged matrix".into())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(name, mats)
    }

    pub fn from_json(json: &ModelJson) -> Result<Self> {
        Self::from_i64(json.name.clone(), &json.generators)
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            name: self.name.clone(),
            generators: self
                .generators
                .iter()
                .map(|g| g.to_i64_rows().expect("generator entries fit in i64"))
                .collect(),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&serde_json::from_str(&text)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Torus dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Rank of the acting lattice.
    pub fn kappa(&self) -> usize {
        self.generators.len()
    }

    pub fn generators(&self) -> &[IntMatrix] {
        &self.generators
    }

    pub fn inverses(&self) -> Result<&[IntMatrix]> {
        self.inverses
            .as_deref()
            .ok_or_else(|| Error::Degenerate("a generator is not unimodular".into()))
    }

    pub fn spectral(&self) -> Result<&Spectral> {
        self.spectral.as_ref().map_err(|e| Error::Eigen(e.clone()))
    }

    /// The `n × κ` table `Λ[i][j] = log|λ_i(M_j)|`.
    pub fn lyapunov_functionals(&self) -> Result<&[Vec<f64>]> {
        Ok(&self.spectral()?.lyapunov)
    }

    /// `Σ_j a_j Λ[i][j]` for every eigen-index `i`.
    pub fn exponents_at(&self, a: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .lyapunov_functionals()?
            .iter()
            .map(|row| row.iter().zip(a).map(|(l, x)| l * x).sum())
            .collect())
    }

    /// Eigenvalues of `M^a`, from the joint table.
    pub fn eigenvalues_at(&self, a: &[i64]) -> Result<Vec<Complex64>> {
        Ok(self
            .spectral()?
            .eigenvalues
            .iter()
            .map(|row| row.iter().zip(a).map(|(l, &x)| l.powi(x as i32)).product())
            .collect())
    }

    /// Exact `M_1^{a_1} ··· M_κ^{a_κ}`.
    pub fn matrix_power(&self, a: &[i64]) -> Result<IntMatrix> {
        if a.len() != self.kappa() {
            return Err(Error::DimensionMismatch { expected: self.kappa(), got: a.len() });
        }
        let mut acc = IntMatrix::identity(self.n);
        for (j, &e) in a.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let base = if e > 0 { &self.generators[j] } else { &self.inverses()?[j] };
            acc = acc.mul(&base.pow(e.unsigned_abs()));
        }
        Ok(acc)
    }

    /// Exact `M^a - I`.
    pub fn shifted_power(&self, a: &[i64]) -> Result<IntMatrix> {
        Ok(self.matrix_power(a)?.sub_identity())
    }

    /// `det(M^a - I)` (signed).
    pub fn fixed_point_determinant(&self, a: &[i64]) -> Result<BigInt> {
        Ok(self.shifted_power(a)?.det())
    }

    /// Orthonormal real basis of the span of the eigenvectors `indices`.
    /// Conjugate pairs contribute their real and imaginary parts.
    pub fn real_subspace_basis(&self, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
        let s = self.spectral()?;
        let n = self.n;
        let mut raw: Vec<Vec<f64>> = Vec::new();
        for &i in indices {
            let col: Vec<Complex64> = (0..n).map(|r| s.vectors[(r, i)]).collect();
            // rotate so the largest entry is real
            let big = col.iter().copied().fold(Complex64::new(0.0, 0.0), |b, z| if z.norm() > b.norm() { z } else { b });
            let phase = if big.norm() > 0.0 { big.conj() / big.norm() } else { Complex64::new(1.0, 0.0) };
            let rot: Vec<Complex64> = col.iter().map(|z| z * phase).collect();
            raw.push(rot.iter().map(|z| z.re).collect());
            if rot.iter().any(|z| z.im.abs() > 1e-12) {
                raw.push(rot.iter().map(|z| z.im).collect());
            }
        }
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for mut v in raw {
            for b in &basis {
                let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 && basis.len() < indices.len() {
                basis.push(v.into_iter().map(|x| x / norm).collect());
            }
        }
        Ok(basis)
    }

    pub fn weyl_chambers(&self) -> Result<Vec<WeylChamber>> {
        chamber::weyl_chambers(self)
    }

    /// Chamber with the given sign vector (`+1` unstable, `-1` stable).
    pub fn chamber_by_signs(&self, signs: &[i8]) -> Result<WeylChamber> {
        self.weyl_chambers()?
            .into_iter()
            .find(|c| c.signs() == signs)
            .ok_or_else(|| Error::InvalidInput(format!("no Weyl chamber with signs {signs:?}")))
    }

    /// Chamber containing the lattice point `a`.
    pub fn chamber_of(&self, a: &[i64]) -> Result<WeylChamber> {
        let af: Vec<f64> = a.iter().map(|&x| x as f64).collect();
        let exps = self.exponents_at(&af)?;
        let signs: Vec<i8> = exps.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect();
        self.chamber_by_signs(&signs)
    }
}

/// `|det(I - M^{-a})|`, the transverse Poincaré factor, computed exactly as
/// `|det(M^a - I)| / |det M^a|`.
pub fn poincare_determinant(model: &ActionModel, chamber: &WeylChamber, a: &[i64]) -> Result<BigRational> {
    if a.iter().all(|&x| x == 0) {
        return Err(Error::NotHyperbolic { a: a.to_vec(), detail: "the identity element".into() });
    }
    if !chamber.contains_lattice(a)? {
        return Err(Error::NotHyperbolic {
            a: a.to_vec(),
            detail: format!("not inside chamber {:?}", chamber.signs()),
        });
    }
    let m = model.matrix_power(a)?;
    let d = m.sub_identity().det();
    if d.is_zero() {
        return Err(Error::NotHyperbolic { a: a.to_vec(), detail: "M^a has eigenvalue 1".into() });
    }
    Ok(BigRational::new(d.abs(), m.det().abs()))
}

/// All nonzero `a` with `|a|_∞ <= radius`, lexicographic.
pub fn box_points(kappa: usize, radius: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut a = vec![-radius; kappa];
    loop {
        if a.iter().any(|&x| x != 0) {
            out.push(a.clone());
        }
        let mut i = kappa;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if a[i] < radius {
                a[i] += 1;
                break;
            }
            a[i] = -radius;
        }
    }
}

fn has_rational_root(charpoly: &[BigInt]) -> Option<BigInt> {
    // monic integer polynomial: rational roots are integer divisors of c_0
    let c0 = &charpoly[0];
    if c0.is_zero() {
        return Some(BigInt::zero());
    }
    let bound = c0.abs();
    let limit: i64 = num_traits::ToPrimitive::to_i64(&bound).unwrap_or(i64::MAX).min(10_000);
    for d in 1..=limit {
        let db = BigInt::from(d);
        if !(c0 % &db).is_zero() {
            continue;
        }
        for cand in [db.clone(), -db] {
            let v = charpoly.iter().rev().fold(BigInt::zero(), |acc, c| acc * &cand + c);
            if v.is_zero() {
                return Some(cand);
            }
        }
    }
    None
}

/// Checks the hypotheses of an algebraic Anosov action.
///
/// `test_set` defaults to every nonzero `a` with `|a|_∞ <= 8`.
pub fn validate_model(model: &ActionModel, test_set: Option<&[Vec<i64>]>) -> ValidationReport {
    let mut checks = Vec::new();
    let gens = model.generators();

    let mut bad_pairs = Vec::new();
    for i in 0..gens.len() {
        for j in i + 1..gens.len() {
            if gens[i].mul(&gens[j]) != gens[j].mul(&gens[i]) {
                bad_pairs.push((i + 1, j + 1));
            }
        }
    }
    checks.push(Check {
        check: "commutation".into(),
        pass: bad_pairs.is_empty(),
        detail: if bad_pairs.is_empty() {
            "all generator pairs commute exactly".into()
        } else {
            format!("non-commuting generator pairs: {bad_pairs:?}")
        },
    });

    let dets: Vec<BigInt> = gens.iter().map(IntMatrix::det).collect();
    let unimodular = dets.iter().all(|d| d.abs().is_one());
    checks.push(Check {
        check: "unimodularity".into(),
        pass: unimodular,
        detail: format!("determinants {:?}", dets.iter().map(ToString::to_string).collect::<Vec<_>>()),
    });

    let spectral = model.spectral();
    checks.push(Check {
        check: "simultaneous_diagonalizability".into(),
        pass: spectral.is_ok() && bad_pairs.is_empty(),
        detail: match spectral {
            Ok(s) => format!("max eigen residual {:.3e}", s.max_residual),
            Err(e) => e.to_string(),
        },
    });

    let default_set;
    let tests: &[Vec<i64>] = match test_set {
        Some(t) => t,
        None => {
            default_set = box_points(model.kappa(), 8);
            &default_set
        }
    };
    let mut failures = Vec::new();
    for a in tests {
        let exact_singular = model.fixed_point_determinant(a).map(|d| d.is_zero()).unwrap_or(true);
        let near_unit = match model.eigenvalues_at(a) {
            Ok(ev) => ev.iter().any(|z| (z.norm() - 1.0).abs() <= 1e-9),
            Err(_) => true,
        };
        if exact_singular || near_unit {
            failures.push(a.clone());
        }
    }
    checks.push(Check {
        check: "hyperbolicity".into(),
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} test elements, no eigenvalue modulus within 1e-9 of 1", tests.len())
        } else {
            let shown: Vec<_> = failures.iter().take(5).collect();
            format!("{} of {} test elements fail, e.g. {:?}", failures.len(), tests.len(), shown)
        },
    });

    let reducible: Vec<String> = gens
        .iter()
        .enumerate()
        .filter_map(|(j, g)| has_rational_root(&g.charpoly()).map(|r| format!("M_{} has root {r}", j + 1)))
        .collect();
    checks.push(Check {
        check: "irreducibility".into(),
        pass: reducible.is_empty(),
        detail: if reducible.is_empty() {
            if model.n() <= 3 {
                "no rational roots; characteristic polynomials are irreducible".into()
            } else {
                "no rational roots (quadratic factors not tested for n >= 4)".into()
            }
        } else {
            format!("warning: {}", reducible.join("; "))
        },
    });

    ValidationReport(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::models;

    #[test]
    fn cat_map_validates() {
        let cat = models::cat_map();
        let report = validate_model(&cat, None);
        assert!(report.all_pass(), "{report:?}");
        let ev = &cat.spectral().unwrap().eigenvalues;
        let phi2 = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((ev[0][0].re - phi2).abs() < 1e-14);
        assert!((ev[1][0].re - 1.0 / phi2).abs() < 1e-14);
    }

    #[test]
    fn identity_fails_hyperbolicity() {
        let id = ActionModel::from_i64("id", &[vec![vec![1, 0], vec![0, 1]]]).unwrap();
        let report = validate_model(&id, None);
        assert!(!report.get("hyperbolicity").unwrap().pass);
        assert!(!report.get("simultaneous_diagonalizability").unwrap().pass);
    }

    #[test]
    fn non_commuting_pair_detected() {
        let a = vec![vec![2, 1], vec![1, 1]];
        let b = vec![vec![1, 1], vec![0, 1]];
        let m = ActionModel::from_i64("nc", &[a.clone(), b.clone()]).unwrap();
        // oracle: direct product comparison
        let (ma, mb) = (IntMatrix::from_rows(&a).unwrap(), IntMatrix::from_rows(&b).unwrap());
        assert_ne!(ma.mul(&mb), mb.mul(&ma));
        let report = validate_model(&m, None);
        assert!(!report.get("commutation").unwrap().pass);
    }

    #[test]
    fn matrix_powers() {
        let cat = models::cat_map();
        assert_eq!(cat.matrix_power(&[0]).unwrap(), IntMatrix::identity(2));
        let sq = cat.matrix_power(&[2]).unwrap();
        assert_eq!(sq.to_i64_rows().unwrap(), vec![vec![5, 3], vec![3, 2]]);
        let inv = cat.matrix_power(&[-1]).unwrap();
        assert_eq!(inv.to_i64_rows().unwrap(), vec![vec![1, -1], vec![-1, 2]]);
        assert_eq!(inv.mul(&cat.matrix_power(&[1]).unwrap()), IntMatrix::identity(2));
    }

    #[test]
    fn powers_compose_additively() {
        let m = models::cubic_rank2();
        for a in [[1i64, -2], [3, 1], [-2, -2]] {
            for b in [[0i64, 1], [-1, 4], [2, -3]] {
                let sum = [a[0] + b[0], a[1] + b[1]];
                let lhs = m.matrix_power(&a).unwrap().mul(&m.matrix_power(&b).unwrap());
                assert_eq!(lhs, m.matrix_power(&sum).unwrap());
            }
        }
    }

    #[test]
    fn lyapunov_tables() {
        let cat = models::cat_map();
        let l = cat.lyapunov_functionals().unwrap();
        let r = ((3.0 + 5f64.sqrt()) / 2.0).ln();
        assert!((l[0][0] - r).abs() < 1e-14 && (l[1][0] + r).abs() < 1e-14);
        assert!((r - 0.9624).abs() < 1e-4);

        let m = cat.generators()[0].clone();
        let pair = ActionModel::new("cat-and-square", vec![m.clone(), m.mul(&m)]).unwrap();
        for row in pair.lyapunov_functionals().unwrap() {
            assert!((row[1] - 2.0 * row[0]).abs() < 1e-13);
        }

        let cubic = models::cubic_rank2();
        let lc = cubic.lyapunov_functionals().unwrap();
        for j in 0..2 {
            let s: f64 = lc.iter().map(|row| row[j]).sum();
            assert!(s.abs() < 1e-10, "column {j} sums to {s}");
        }
        assert!(cubic.spectral().unwrap().max_residual <= 1e-10);
        for a in box_points(2, 3) {
            let af: Vec<f64> = a.iter().map(|&x| x as f64).collect();
            assert!(cubic.exponents_at(&af).unwrap().iter().all(|v| v.abs() > 1e-6));
        }
    }

    #[test]
    fn poincare_factors() {
        let cat = models::cat_map();
        let ch = cat.chamber_of(&[1]).unwrap();
        assert_eq!(poincare_determinant(&cat, &ch, &[1]).unwrap(), BigRational::one());
        assert_eq!(poincare_determinant(&cat, &ch, &[2]).unwrap(), BigRational::from_integer(5.into()));
        assert!(poincare_determinant(&cat, &ch, &[0]).is_err());
        assert!(poincare_determinant(&cat, &ch, &[-1]).is_err());
    }

    #[test]
    fn poincare_integer_route_matches_eigenvalues() {
        use num_traits::ToPrimitive;
        for model in [models::cat_map(), models::cubic_rank2()] {
            for a in box_points(model.kappa(), 4) {
                let ch = model.chamber_of(&a).unwrap();
                let exact = poincare_determinant(&model, &ch, &a).unwrap().to_f64().unwrap();
                let float: f64 = model
                    .eigenvalues_at(&a)
                    .unwrap()
                    .iter()
                    .map(|mu| (Complex64::new(1.0, 0.0) - mu.inv()).norm())
                    .product();
                assert!((exact - float).abs() <= 1e-8 * exact, "a={a:?}: {exact} vs {float}");
            }
        }
    }

    #[test]
    fn model_json_round_trip() {
        let m = models::cubic_rank2();
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let back = ActionModel::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.generators(), m.generators());
    }
}
