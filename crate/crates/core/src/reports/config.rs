//! Experiment configuration: one JSON document plus `key=value` overrides.

use crate::action::{ActionModel, WeylChamber};
use crate::geometry::{ConeSpec, GroupSpecJson, RationalRepr, WindowFunction};
use crate::observable::{ObservableJson, TrigObservable};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ChamberSelector {
    Signs { signs: Vec<i8> },
    Index { index: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CensusConfig {
    /// Chamber points with `|a|∞ <= radius`.
    pub radius: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BowenConfig {
    /// Slabs `[lo, hi]` with increasing `lo`.
    pub slabs: Vec<[RationalRepr; 2]>,
    /// `|estimate(1) − 1| <= c_lattice / lo`.
    pub c_lattice: f64,
    /// Bound on `|estimate(e_k)|` at the largest slab.
    pub mode_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BirkhoffConfig {
    pub n_seeds: usize,
    /// Increasing `T` values; the last one is used for the estimates.
    pub t_ladder: Vec<f64>,
    pub leaf_samples: usize,
    pub leaf_length: f64,
    pub mean_error_tol: f64,
    pub leaf_tol: f64,
    pub basin_tol: f64,
    pub basin_min: f64,
    pub density_pairs: usize,
    pub density_k: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub kmax: i64,
    pub weight_exponent: f64,
    /// `λ = t · (1, ..., 1)` for each increasing `t`.
    pub t_scan: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub probes: usize,
    pub projector_steps: usize,
    pub second_modulus_max: f64,
    /// Also report the rank of `R ⊕ R`, the disjoint union of two copies.
    pub diagnostic_direct_sum: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    /// Chamber points with `|a|∞ <= identity_radius` for the exact identity.
    pub identity_radius: i64,
    pub forms_radius: i64,
    pub forms_tol: f64,
    /// Points for the mollified quadrature; may be empty.
    pub mollified_a: Vec<Vec<i64>>,
    pub eps: f64,
    pub grid: usize,
    pub mollified_tol: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZetaConfig {
    pub k: u32,
    pub k_check: u32,
    pub t_scan: Vec<f64>,
    pub pole_tol: f64,
    pub residue_tol: f64,
    pub stability_tol: f64,
    /// Whether the flat-determinant stability is asserted or only reported.
    pub assert_stability: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountConfig {
    pub ell_max: u32,
    pub separation_radius: f64,
    pub calibration_radius: f64,
    /// Increasing; consecutive entries should differ by a factor 2.
    pub eps_ladder: Vec<f64>,
    pub ell_ladder: Vec<f64>,
    pub n_samples: usize,
    pub calibration_eps: f64,
    pub calibration_ell: f64,
    pub tori_ell: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model JSON, relative to the config file.
    pub model: String,
    pub chamber: ChamberSelector,
    pub group: GroupSpecJson,
    pub observables: Vec<ObservableJson>,
    pub rng_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
    pub cross_method_tol: f64,
    pub census: CensusConfig,
    pub bowen: BowenConfig,
    pub birkhoff: BirkhoffConfig,
    pub spectrum: SpectrumConfig,
    pub trace: TraceConfig,
    pub zeta: ZetaConfig,
    pub count: CountConfig,
}

/// Applies `a.b.0.c=value`; the value is parsed as JSON, else taken as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not of the form key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let idx: usize =
                    part.parse().map_err(|_| Error::Config(format!("override path {path:?}: {part:?} is not an index")))?;
                let len = items.len();
                let slot = items
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("override path {path:?}: index {idx} out of range {len}")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("override path {path:?} descends into a scalar at {part:?}"))),
        };
    }
    Err(Error::Config(format!("empty override path in {assignment:?}")))
}

fn increasing(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Config(format!("{name} is empty")));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) || xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::Config(format!("{name} must be strictly increasing: {xs:?}")));
    }
    Ok(())
}

/// A parsed and checked configuration with everything it references loaded.
#[derive(Clone, Debug)]
pub struct Context {
    pub config: ExperimentConfig,
    /// Canonical JSON of `config`, the input of the run id.
    pub canonical: String,
    pub run_id: String,
    pub model: ActionModel,
    pub model_path: PathBuf,
    pub chamber: WeylChamber,
    pub chamber_index: usize,
    pub cone: ConeSpec,
    pub window: WindowFunction,
    pub observables: Vec<(String, TrigObservable)>,
}

impl Context {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut doc: Value =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_value(doc, base)
    }

    pub fn from_value(doc: Value, base: &Path) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_value(doc).map_err(|e| Error::Config(format!("config: {e}")))?;
        let model_path = base.join(&config.model);
        let model = ActionModel::load(&model_path)
            .map_err(|e| Error::Config(format!("model {}: {e}", model_path.display())))?;
        let chambers = model.weyl_chambers()?;
        let chamber_index = match &config.chamber {
            ChamberSelector::Signs { signs } => chambers
                .iter()
                .position(|c| c.signs() == signs.as_slice())
                .ok_or_else(|| Error::Config(format!("no chamber with signs {signs:?}")))?,
            ChamberSelector::Index { index } => {
                if *index >= chambers.len() {
                    return Err(Error::Config(format!("chamber index {index} >= {}", chambers.len())));
                }
                *index
            }
        };
        let chamber = chambers[chamber_index].clone();
        let cone = config.group.cone().map_err(|e| Error::Config(format!("cone: {e}")))?;
        let window = config.group.window().map_err(|e| Error::Config(format!("window: {e}")))?;
        if cone.dim() != model.kappa() {
            return Err(Error::Config(format!("cone has dimension {} but the model has rank {}", cone.dim(), model.kappa())));
        }
        for g in cone.extreme_rays() {
            let gf: Vec<f64> = g.iter().map(|q| num_traits::ToPrimitive::to_f64(q).unwrap()).collect();
            if !chamber.contains(&gf)? {
                return Err(Error::Config(format!("cone generator {gf:?} is outside the chamber {:?}", chamber.signs())));
            }
        }
        if config.observables.is_empty() {
            return Err(Error::Config("observable list is empty".into()));
        }
        let observables = config
            .observables
            .iter()
            .map(|o| Ok((o.name.clone(), TrigObservable::from_json(o, model.n()).map_err(|e| Error::Config(format!("observable {}: {e}", o.name)))?)))
            .collect::<Result<Vec<_>>>()?;
        let lows: Vec<f64> = config
            .bowen
            .slabs
            .iter()
            .map(|s| Ok(num_traits::ToPrimitive::to_f64(&s[0].to_rational()?).unwrap()))
            .collect::<Result<_>>()?;
        increasing("bowen.slabs", &lows)?;
        increasing("birkhoff.t_ladder", &config.birkhoff.t_ladder)?;
        increasing("spectrum.t_scan", &config.spectrum.t_scan)?;
        increasing("zeta.t_scan", &config.zeta.t_scan)?;
        increasing("count.eps_ladder", &config.count.eps_ladder)?;
        increasing("count.ell_ladder", &config.count.ell_ladder)?;
        let density_k: Vec<f64> = config.birkhoff.density_k.iter().map(|&k| k as f64).collect();
        increasing("birkhoff.density_k", &density_k)?;
        let canonical = serde_json::to_string(&config)?;
        let run_id = hex::encode(&Sha256::digest(canonical.as_bytes())[..6]);
        Ok(Self { config, canonical, run_id, model, model_path, chamber, chamber_index, cone, window, observables })
    }
}
