//! Cones, lattice slabs and window functions on the acting group `R^κ`
//! with its integer lattice `Z^κ`.
//!
//! All cone and window arithmetic is exact; floating point only appears
//! when a transcendental (an exponential) has to be evaluated.

mod cone;
mod window;

pub use cone::ConeSpec;
pub use window::WindowFunction;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

/// `num/den` as a rational.
pub fn rat(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Wire form of a rational: `[num, den]`, a bare integer, or `"num/den"`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum RationalRepr {
    Pair([i64; 2]),
    Int(i64),
    Text(String),
}

impl RationalRepr {
    pub fn to_rational(&self) -> crate::Result<BigRational> {
        match self {
            RationalRepr::Pair([_, 0]) => {
                Err(crate::Error::InvalidInput("rational with zero denominator".into()))
            }
            RationalRepr::Pair([n, d]) => Ok(rat(*n, *d)),
            RationalRepr::Int(n) => Ok(int(*n)),
            RationalRepr::Text(s) => parse_rational(s),
        }
    }

    pub fn from_rational(q: &BigRational) -> Self {
        use num_traits::ToPrimitive;
        match (q.numer().to_i64(), q.denom().to_i64()) {
            (Some(n), Some(d)) => RationalRepr::Pair([n, d]),
            _ => RationalRepr::Text(format_rational(q)),
        }
    }
}

pub fn parse_rational(s: &str) -> crate::Result<BigRational> {
    let bad = || crate::Error::InvalidInput(format!("cannot parse rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d == BigInt::from(0) {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// `"num/den"` (always with an explicit denominator).
pub fn format_rational(q: &BigRational) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Serialized cone and optional window, as one JSON object.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupSpecJson {
    pub generators: Vec<Vec<RationalRepr>>,
    pub e1: Vec<RationalRepr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weights: Vec<WeightJson>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightJson {
    pub a: Vec<i64>,
    pub w: RationalRepr,
}

impl GroupSpecJson {
    pub fn cone(&self) -> crate::Result<ConeSpec> {
        let gens = self
            .generators
            .iter()
            .map(|g| g.iter().map(RationalRepr::to_rational).collect())
            .collect::<crate::Result<Vec<Vec<_>>>>()?;
        let e1 = self.e1.iter().map(RationalRepr::to_rational).collect::<crate::Result<Vec<_>>>()?;
        ConeSpec::new(gens, e1)
    }

    /// The window, checked against the cone of the same object.
    pub fn window(&self) -> crate::Result<WindowFunction> {
        let cone = self.cone()?;
        let entries = self
            .weights
            .iter()
            .map(|w| Ok((w.a.clone(), w.w.to_rational()?)))
            .collect::<crate::Result<Vec<_>>>()?;
        let psi = WindowFunction::new(cone.dim(), entries)?;
        psi.check_support(&cone)?;
        Ok(psi)
    }

    pub fn from_parts(cone: &ConeSpec, window: Option<&WindowFunction>) -> Self {
        GroupSpecJson {
            generators: cone
                .generators()
                .iter()
                .map(|g| g.iter().map(RationalRepr::from_rational).collect())
                .collect(),
            e1: cone.e1().iter().map(RationalRepr::from_rational).collect(),
            weights: window
                .map(|w| {
                    w.iter()
                        .map(|(a, q)| WeightJson { a: a.clone(), w: RationalRepr::from_rational(q) })
                        .collect()
                })
                .unwrap_or_default(),
        }
    }
}
