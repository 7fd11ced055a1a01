use super::{fixed_point_count, fixed_points, format_point, RationalPoint};
use crate::action::{ActionModel, WeylChamber};
use crate::linalg::{lattice_basis, lattice_covolume};
use crate::{Error, Result};
use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};

/// Largest `Z^κ`-orbit traced point by point.
pub const ORBIT_BUDGET: usize = 1_000_000;
/// Largest `|Fix(M^a)|` for which the census counts orbits.
pub const CENSUS_ORBIT_BUDGET: u64 = 100_000;

/// A finite `Z^κ`-orbit of a rational point, i.e. one periodic torus of the
/// suspension, with its return lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicTorus {
    /// Lexicographically least orbit point.
    pub representative: RationalPoint,
    /// Sorted orbit.
    pub orbit: Vec<RationalPoint>,
    /// Hermite basis of `{a ∈ Z^κ : M^a x = x}`.
    pub stabilizer: Vec<Vec<i64>>,
    /// Window elements lying in the stabilizer.
    pub periods: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TorusJson {
    pub representative: Vec<String>,
    pub orbit: Vec<Vec<String>>,
    pub stabilizer: Vec<Vec<i64>>,
    pub periods: Vec<Vec<i64>>,
}

impl PeriodicTorus {
    pub fn len(&self) -> usize {
        self.orbit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orbit.is_empty()
    }

    /// Index of the stabilizer in `Z^κ`; `None` if it is not of full rank.
    pub fn stabilizer_index(&self) -> Option<BigInt> {
        lattice_covolume(&self.stabilizer)
    }

    pub fn to_json(&self) -> TorusJson {
        TorusJson {
            representative: format_point(&self.representative),
            orbit: self.orbit.iter().map(format_point).collect(),
            stabilizer: self.stabilizer.clone(),
            periods: self.periods.clone(),
        }
    }
}

fn int_generators(model: &ActionModel) -> Result<Vec<Vec<Vec<i64>>>> {
    model
        .generators()
        .iter()
        .map(|g| g.to_i64_rows().ok_or_else(|| Error::Budget("generator entries exceed i64".into())))
        .collect()
}

/// Orbit of `x` under the generators with Schreier generators of its stabilizer.
fn trace_orbit(gens: &[Vec<Vec<i64>>], x: &RationalPoint) -> Result<(Vec<RationalPoint>, Vec<Vec<i64>>)> {
    let kappa = gens.len();
    let mut label: HashMap<RationalPoint, Vec<i64>> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut schreier = Vec::new();
    label.insert(x.clone(), vec![0; kappa]);
    queue.push_back(x.clone());
    while let Some(y) = queue.pop_front() {
        let gy = label[&y].clone();
        for (j, g) in gens.iter().enumerate() {
            let z = y.apply(g);
            let mut step = gy.clone();
            step[j] += 1;
            match label.get(&z) {
                Some(gz) => {
                    let s: Vec<i64> = step.iter().zip(gz).map(|(a, b)| a - b).collect();
                    if s.iter().any(|&v| v != 0) {
                        schreier.push(s);
                    }
                }
                None => {
                    if label.len() >= ORBIT_BUDGET {
                        return Err(Error::Budget(format!("orbit exceeds {ORBIT_BUDGET} points")));
                    }
                    label.insert(z.clone(), step);
                    queue.push_back(z);
                }
            }
        }
    }
    let mut orbit: Vec<RationalPoint> = label.into_keys().collect();
    orbit.sort();
    Ok((orbit, lattice_basis(&schreier, kappa)))
}

/// Groups all periodic points of the window elements into `Z^κ`-orbits.
///
/// With a chamber, every window element must lie inside it; without one,
/// any element off the walls is accepted. Orbits are returned in the order
/// of their representatives.
pub fn orbit_decomposition(
    model: &ActionModel,
    chamber: Option<&WeylChamber>,
    window: &[Vec<i64>],
) -> Result<Vec<PeriodicTorus>> {
    if window.is_empty() {
        return Err(Error::InvalidInput("empty window".into()));
    }
    if let Some(c) = chamber {
        for a in window {
            if !c.contains_lattice(a)? {
                return Err(Error::NotHyperbolic {
                    a: a.clone(),
                    detail: format!("outside chamber {:?}", c.signs()),
                });
            }
        }
    }
    let gens = int_generators(model)?;
    let per_a: Vec<Vec<RationalPoint>> =
        window.par_iter().map(|a| fixed_points(model, a)).collect::<Result<Vec<_>>>()?;
    let mut pending: BTreeSet<RationalPoint> = per_a.into_iter().flatten().collect();
    let powers = window.iter().map(|a| model.matrix_power(a)).collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    while let Some(x) = pending.pop_first() {
        let (orbit, stabilizer) = trace_orbit(&gens, &x)?;
        for y in &orbit {
            pending.remove(y);
        }
        let periods = window
            .iter()
            .zip(&powers)
            .filter(|(_, ma)| x.apply_big(ma) == x)
            .map(|(a, _)| a.clone())
            .collect();
        out.push(PeriodicTorus { representative: orbit[0].clone(), orbit, stabilizer, periods });
    }
    Ok(out)
}

/// One census line.
#[derive(Clone, Debug, PartialEq)]
pub struct CensusRow {
    pub a: Vec<i64>,
    /// `|Fix(M^a)|`, the Smith order.
    pub fix_count: BigInt,
    /// `|det(M^a - I)|`.
    pub det_abs: BigInt,
    /// Number of `Z^κ`-orbits in `Fix(M^a)`; `None` beyond the budget.
    pub n_orbits: Option<usize>,
}

/// Exact counts for every window element, in window order.
pub fn periodic_census(model: &ActionModel, window: &[Vec<i64>]) -> Result<Vec<CensusRow>> {
    let gens = int_generators(model)?;
    window
        .par_iter()
        .map(|a| {
            let fix_count = fixed_point_count(model, a)?;
            let det_abs = model.fixed_point_determinant(a)?.magnitude().clone().into();
            let n_orbits = if fix_count.to_u64().is_some_and(|c| c <= CENSUS_ORBIT_BUDGET) {
                let mut pending: BTreeSet<RationalPoint> = fixed_points(model, a)?.into_iter().collect();
                let mut count = 0;
                while let Some(x) = pending.pop_first() {
                    let (orbit, _) = trace_orbit(&gens, &x)?;
                    for y in &orbit {
                        pending.remove(y);
                    }
                    count += 1;
                }
                Some(count)
            } else {
                None
            };
            Ok(CensusRow { a: a.clone(), fix_count, det_abs, n_orbits })
        })
        .collect()
}
