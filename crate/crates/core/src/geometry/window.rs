use super::ConeSpec;
use crate::{Error, Result};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::collections::BTreeMap;

/// Nonnegative rational weights on finitely many points of `Z^κ`.
///
/// This is the lattice stand-in for a smooth bump on the acting group:
/// integrals against it become finite sums.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WindowFunction {
    dim: usize,
    weights: BTreeMap<Vec<i64>, BigRational>,
}

impl WindowFunction {
    pub fn new(dim: usize, entries: impl IntoIterator<Item = (Vec<i64>, BigRational)>) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for (a, w) in entries {
            if a.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: a.len() });
            }
            if w.is_negative() {
                return Err(Error::InvalidWindow(format!("negative weight at {a:?}")));
            }
            if w.is_zero() {
                continue;
            }
            *weights.entry(a).or_insert_with(BigRational::zero) += w;
        }
        if weights.is_empty() {
            return Err(Error::InvalidWindow("empty support".into()));
        }
        Ok(Self { dim, weights })
    }

    /// Point mass at `a`.
    pub fn dirac(a: Vec<i64>) -> Self {
        let dim = a.len();
        Self { dim, weights: BTreeMap::from([(a, BigRational::one())]) }
    }

    /// Equal weights on the given points.
    pub fn uniform(points: &[Vec<i64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        let w = BigRational::new(1.into(), (points.len() as i64).into());
        Self::new(dim, points.iter().map(|p| (p.clone(), w.clone())))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<i64>, &BigRational)> {
        self.weights.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.weights.keys()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weight(&self, a: &[i64]) -> BigRational {
        self.weights.get(a).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn total_mass(&self) -> BigRational {
        self.weights.values().sum()
    }

    pub fn is_normalized(&self) -> bool {
        self.total_mass().is_one()
    }

    /// Largest sup-norm of a support point.
    pub fn support_radius(&self) -> i64 {
        self.weights.keys().flat_map(|a| a.iter().map(|x| x.abs())).max().unwrap_or(0)
    }

    pub fn check_support(&self, cone: &ConeSpec) -> Result<()> {
        if cone.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: cone.dim(), got: self.dim });
        }
        for a in self.weights.keys() {
            if !cone.contains_lattice(a)? {
                return Err(Error::InvalidWindow(format!("support point {a:?} lies outside the cone")));
            }
        }
        Ok(())
    }

    pub fn convolve(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let mut out: BTreeMap<Vec<i64>, BigRational> = BTreeMap::new();
        for (a, wa) in &self.weights {
            for (b, wb) in &other.weights {
                let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                *out.entry(s).or_insert_with(BigRational::zero) += wa * wb;
            }
        }
        Ok(Self { dim: self.dim, weights: out })
    }

    /// The k-th convolution power `ψ^(k)`, k >= 1.
    pub fn convolution_power(&self, k: u32) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidWindow("convolution power must be at least 1".into()));
        }
        if !self.is_normalized() {
            return Err(Error::InvalidWindow("window is not normalized".into()));
        }
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.convolve(self)?;
        }
        Ok(acc)
    }

    /// All powers `ψ^(1), ..., ψ^(k)`.
    pub fn convolution_powers(&self, k: u32) -> Result<Vec<Self>> {
        let mut out = vec![self.convolution_power(1)?];
        for _ in 1..k {
            let next = out.last().unwrap().convolve(self)?;
            out.push(next);
        }
        Ok(out)
    }

    /// `Σ_a ψ(a) e^{-λ·a}`, summed in support order.
    pub fn laplace_transform(&self, lambda: &[Complex64]) -> Result<Complex64> {
        if lambda.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: lambda.len() });
        }
        Ok(self
            .weights
            .iter()
            .map(|(a, w)| {
                let exponent: Complex64 = lambda.iter().zip(a).map(|(l, &x)| l * x as f64).sum();
                (-exponent).exp() * w.to_f64().unwrap_or(f64::NAN)
            })
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rat;

    #[test]
    fn dirac_convolution() {
        let d = WindowFunction::dirac(vec![3, -1]);
        let d2 = d.convolution_power(2).unwrap();
        assert_eq!(d2, WindowFunction::dirac(vec![6, -2]));
    }

    #[test]
    fn uniform_two_point_square() {
        let psi = WindowFunction::uniform(&[vec![1], vec![2]]).unwrap();
        let sq = psi.convolution_power(2).unwrap();
        // direct double sum over {1,2} x {1,2}
        let mut expect = BTreeMap::new();
        for a in [1i64, 2] {
            for b in [1i64, 2] {
                *expect.entry(vec![a + b]).or_insert_with(BigRational::zero) += rat(1, 4);
            }
        }
        assert_eq!(sq.weights, expect);
        assert_eq!(sq.weight(&[3]), rat(1, 2));
        assert_eq!(psi.convolution_power(1).unwrap(), psi);
        assert!(psi.convolution_power(0).is_err());
    }

    #[test]
    fn laplace_values() {
        let psi = WindowFunction::uniform(&[vec![1], vec![2]]).unwrap();
        let zero = psi.laplace_transform(&[Complex64::new(0.0, 0.0)]).unwrap();
        assert!((zero - 1.0).norm() < 1e-15);
        let v = psi.laplace_transform(&[Complex64::new(2f64.ln(), 0.0)]).unwrap();
        assert!((v - 3.0 / 8.0).norm() < 1e-15);
        let d = WindowFunction::dirac(vec![2, 1]);
        let lam = [Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4)];
        let expect = (-(lam[0] * 2.0 + lam[1])).exp();
        assert!((d.laplace_transform(&lam).unwrap() - expect).norm() < 1e-15);
    }

    #[test]
    fn rejects_negative_and_unnormalized() {
        assert!(WindowFunction::new(1, [(vec![1], rat(-1, 2))]).is_err());
        let half = WindowFunction::new(1, [(vec![1], rat(1, 2))]).unwrap();
        assert!(half.convolution_power(2).is_err());
    }

    use proptest::prelude::*;

    fn arb_window() -> impl Strategy<Value = WindowFunction> {
        proptest::collection::vec(((1i64..4, 1i64..4), 1i64..6), 1..4).prop_map(|pts| {
            let total: i64 = pts.iter().map(|(_, w)| w).sum();
            WindowFunction::new(2, pts.into_iter().map(|((x, y), w)| (vec![x, y], rat(w, total)))).unwrap()
        })
    }

    proptest! {
        #[test]
        fn convolution_powers_keep_unit_mass_and_multiply_transforms(
            psi in arb_window(), k in 1u32..5, l0 in -0.3f64..0.3, l1 in -0.3f64..0.3
        ) {
            let p = psi.convolution_power(k).unwrap();
            prop_assert!(p.is_normalized());
            let lam = [Complex64::new(l0, 0.05), Complex64::new(l1, -0.02)];
            let lhs = p.laplace_transform(&lam).unwrap();
            let rhs = psi.laplace_transform(&lam).unwrap().powu(k);
            prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
        }
    }
}
