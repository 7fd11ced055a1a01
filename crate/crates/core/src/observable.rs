use crate::linalg::IntMatrix;
use crate::{Error, Result};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;

/// A trigonometric polynomial `f(x) = Σ_k c_k e^{2πi k·x}` on `T^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigObservable {
    dim: usize,
    coeffs: BTreeMap<Vec<i64>, Complex64>,
}

/// JSON form: `{"name": ..., "modes": [{"k": [...], "re": x, "im": y}]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObservableJson {
    pub name: String,
    pub modes: Vec<ModeJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeJson {
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl TrigObservable {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (Vec<i64>, Complex64)>) -> Result<Self> {
        let mut coeffs = BTreeMap::new();
        for (k, c) in entries {
            if k.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: k.len() });
            }
            if !c.re.is_finite() || !c.im.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite coefficient at {k:?}")));
            }
            *coeffs.entry(k).or_insert_with(Complex64::zero) += c;
        }
        coeffs.retain(|_, c| !c.is_zero());
        Ok(Self { dim, coeffs })
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, [(vec![0; dim], Complex64::new(c, 0.0))]).expect("finite")
    }

    /// The character `e_k(x) = e^{2πi k·x}`.
    pub fn mode(k: &[i64]) -> Self {
        Self::new(k.len(), [(k.to_vec(), Complex64::new(1.0, 0.0))]).expect("finite")
    }

    /// `cos(2π k·x) = (e_k + e_{-k}) / 2`.
    pub fn cosine(k: &[i64]) -> Self {
        let minus: Vec<i64> = k.iter().map(|x| -x).collect();
        Self::new(k.len(), [(k.to_vec(), Complex64::new(0.5, 0.0)), (minus, Complex64::new(0.5, 0.0))])
            .expect("finite")
    }

    pub fn from_json(json: &ObservableJson, dim: usize) -> Result<Self> {
        Self::new(dim, json.modes.iter().map(|m| (m.k.clone(), Complex64::new(m.re, m.im))))
    }

    pub fn to_json(&self, name: &str) -> ObservableJson {
        ObservableJson {
            name: name.to_string(),
            modes: self.coeffs.iter().map(|(k, c)| ModeJson { k: k.clone(), re: c.re, im: c.im }).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &Complex64)> {
        self.coeffs.iter()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coefficient(&self, k: &[i64]) -> Complex64 {
        self.coeffs.get(k).copied().unwrap_or_else(Complex64::zero)
    }

    /// Integral against Haar measure, the zero-frequency coefficient.
    pub fn haar(&self) -> Complex64 {
        self.coefficient(&vec![0; self.dim])
    }

    /// Largest sup-norm of a frequency.
    pub fn max_frequency(&self) -> i64 {
        self.coeffs.keys().flat_map(|k| k.iter().map(|x| x.abs())).max().unwrap_or(0)
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|(k, c)| {
            let minus: Vec<i64> = k.iter().map(|x| -x).collect();
            (self.coefficient(&minus) - c.conj()).norm() <= 1e-15 * c.norm().max(1.0)
        })
    }

    pub fn conj(&self) -> Self {
        Self {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|(k, c)| (k.iter().map(|x| -x).collect(), c.conj())).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self::new(self.dim, self.coeffs.iter().map(|(k, c)| (k.clone(), c * s))).expect("finite")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Self::new(self.dim, self.coeffs.iter().chain(other.coeffs.iter()).map(|(k, c)| (k.clone(), *c)))
    }

    /// `f ∘ B` for an integer matrix `B`; frequencies map by `k ↦ B^T k`.
    pub fn compose(&self, b: &IntMatrix) -> Result<Self> {
        let bt = b.transpose();
        let mut out = Vec::with_capacity(self.coeffs.len());
        for (k, c) in &self.coeffs {
            let kb: Vec<BigInt> = k.iter().map(|&x| BigInt::from(x)).collect();
            let img = bt
                .mul_vec(&kb)
                .iter()
                .map(|x| x.to_i64().ok_or_else(|| Error::Budget("composed frequency exceeds i64".into())))
                .collect::<Result<Vec<_>>>()?;
            out.push((img, *c));
        }
        Self::new(self.dim, out)
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let phase: f64 = k.iter().zip(x).map(|(&ki, xi)| ki as f64 * xi).sum();
                c * Complex64::from_polar(1.0, TAU * phase.rem_euclid(1.0))
            })
            .sum()
    }

    /// Evaluation at a rational point with the phase `k·x mod 1` reduced exactly.
    pub fn eval_rational(&self, x: &[BigRational]) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(k, c)| {
                let phase: BigRational =
                    k.iter().zip(x).map(|(&ki, xi)| xi * BigRational::from_integer(ki.into())).sum();
                let frac = &phase - phase.floor();
                c * Complex64::from_polar(1.0, TAU * frac.to_f64().unwrap_or(f64::NAN))
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rat;

    #[test]
    fn haar_is_zero_mode() {
        let f = TrigObservable::constant(2, 1.0).add(&TrigObservable::cosine(&[1, 0])).unwrap();
        assert_eq!(f.haar(), Complex64::new(1.0, 0.0));
        assert!(f.is_real());
        assert!(!TrigObservable::mode(&[1, 0]).is_real());
        assert_eq!(TrigObservable::mode(&[2, -1]).conj(), TrigObservable::mode(&[-2, 1]));
    }

    #[test]
    fn rational_and_float_evaluation_agree() {
        let f = TrigObservable::mode(&[4, 3]).add(&TrigObservable::cosine(&[1, 2])).unwrap();
        let x = [rat(2, 5), rat(1, 5)];
        let xf = [0.4, 0.2];
        assert!((f.eval_rational(&x) - f.eval(&xf)).norm() < 1e-12);
        // 4·2/5 + 3·1/5 = 11/5, phase 1/5
        let e = TrigObservable::mode(&[4, 3]).eval_rational(&x);
        assert!((e - Complex64::from_polar(1.0, TAU / 5.0)).norm() < 1e-15);
    }

    #[test]
    fn composition_transposes_frequencies() {
        let m = IntMatrix::from_rows(&[vec![2i64, 1], vec![1, 1]]).unwrap();
        let f = TrigObservable::mode(&[1, 0]);
        let g = f.compose(&m).unwrap();
        let x = [0.3, 0.7];
        let mx = [2.0 * 0.3 + 0.7, 0.3 + 0.7];
        assert!((g.eval(&x) - f.eval(&mx)).norm() < 1e-12);
    }
}
