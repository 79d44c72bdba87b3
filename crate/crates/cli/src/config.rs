//! Experiment configuration: a TOML file describing the domain under study
//! and the parameters of every runner subcommand.
//!
//! Schema (all sections except `[spec]` and `[run]` are optional):
//!
//! ```toml
//! [spec]                      # domain under study (tagged by `kind`)
//! kind = "cusp"               # unit_cube | unit_ball | cusp | rooms_and_halls
//!                             # | disk_and_rooms | block_tower | box_union | union_of
//! alpha = 3.0                 # kind-specific fields follow the library types
//! n = 2
//!
//! [run]
//! z0 = [0.75, 0.0]            # base point for distance fields
//! s_grid = [1.0, 2.0, 3.0]    # exponents, strictly increasing
//! h_list = [0.015625, 0.0078125, 0.00390625]   # grid pitches, coarse -> fine
//! truncation_list = [1, 2, 3, 4, 5]            # sweep stage depths, increasing
//! seed = 7                    # seed for sampled checks (default 0)
//! out_dir = "runs/cusp"       # artifact directory (default "out"; --out overrides)
//! stencil = "full"            # full | axis (default full)
//! tol = 0.05                  # default check tolerance (--tol overrides)
//!
//! [weight]                    # optional weight for integrals (default: none)
//! kind = "constant"           # constant { value } | power { center, beta }
//! value = 1.0
//!
//! [tubes]                     # essential-tube family (subcommand `tubes`)
//! family = "rooms"            # rooms | disk_rooms | cusp | block
//! count = 8                   # number of tubes generated
//! s_list = [1.0]              # exponents to certify at (default: run.s_grid)
//! n_slices = 24               # cross-slices sampled per tube
//! samples_per_slice = 24      # area samples per slice
//! # alpha / n default to the values in [spec] when that section matches.
//!
//! [whitney]                   # subdivision family (subcommand `whitney`)
//! family = "cube"             # cube | cusp
//! layers = 6                  # layer truncation
//! m_max = 64                  # cusp family: per-layer index bound
//! exclude_x_min = 0.25        # cusp family: wide piece excluded from coverage
//! validate_h = 0.00390625     # raster pitch for validation (default: finest h)
//!
//! [union]                     # second member domain (subcommand `union`)
//! spec2 = { kind = "box_union", n = 2, boxes = [
//!   { lo = [0.5, 0.0, 0.0], hi = [1.5, 1.0, 0.0], dim = 2 } ] }
//! s = 2.0                     # default: first of run.s_grid
//! h = 0.0078125               # default: finest of run.h_list
//! r = 2.0                     # optional: sampled Muckenhoupt estimate exponent
//!
//! [poincare]                  # hall oscillation ratios (subcommand `poincare`)
//! j_list = [2, 3, 4, 5]
//! p = 2.0
//! h = 0.00390625              # default: finest of run.h_list
//! ```

use qhavg::geom::{DomainSpec, Point};
use qhavg::weights::Weight;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: DomainSpec,
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Weight>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tubes: Option<TubesSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub whitney: Option<WhitneySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub union: Option<UnionSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poincare: Option<PoincareSection>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub z0: Point,
    pub s_grid: Vec<f64>,
    pub h_list: Vec<f64>,
    pub truncation_list: Vec<u32>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub stencil: StencilChoice,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_tol() -> f64 {
    0.05
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum StencilChoice {
    #[default]
    Full,
    Axis,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubesSection {
    pub family: TubeFamilyChoice,
    pub count: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default = "default_slices")]
    pub n_slices: usize,
    #[serde(default = "default_slices")]
    pub samples_per_slice: usize,
}

fn default_slices() -> usize {
    24
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum TubeFamilyChoice {
    Rooms,
    DiskRooms,
    Cusp,
    Block,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhitneySection {
    pub family: WhitneyFamilyChoice,
    pub layers: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "default_m_max")]
    pub m_max: u64,
    #[serde(default = "default_exclude_x")]
    pub exclude_x_min: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate_h: Option<f64>,
}

fn default_m_max() -> u64 {
    64
}

fn default_exclude_x() -> f64 {
    0.25
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum WhitneyFamilyChoice {
    Cube,
    Cusp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnionSection {
    pub spec2: DomainSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default = "default_n_balls")]
    pub n_balls: usize,
    #[serde(default = "default_radius_grid")]
    pub radius_grid: Vec<f64>,
}

fn default_n_balls() -> usize {
    64
}

fn default_radius_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoincareSection {
    pub j_list: Vec<u32>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
}

fn default_p() -> f64 {
    2.0
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| format!("config parse error: {e}"))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        self.spec.validate().map_err(|e| format!("[spec] invalid: {e}"))?;
        let n = self.spec.dim();
        if self.run.z0.dim() != n {
            return Err(format!(
                "[run] z0 has {} coordinates but the domain lives in dimension {n}",
                self.run.z0.dim()
            ));
        }
        if self.run.s_grid.is_empty() {
            return Err("[run] s_grid must be nonempty".into());
        }
        if !self.run.s_grid.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err("[run] s_grid entries must be positive and finite".into());
        }
        if self.run.s_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err("[run] s_grid must be strictly increasing".into());
        }
        if self.run.h_list.is_empty() {
            return Err("[run] h_list must be nonempty".into());
        }
        if !self.run.h_list.iter().all(|&h| h > 0.0 && h.is_finite()) {
            return Err("[run] h_list entries must be positive and finite".into());
        }
        if self.run.h_list.windows(2).any(|w| w[0] <= w[1]) {
            return Err("[run] h_list must be strictly decreasing (coarse to fine)".into());
        }
        if self.run.truncation_list.is_empty() {
            return Err("[run] truncation_list must be nonempty".into());
        }
        if self.run.truncation_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err("[run] truncation_list must be strictly increasing".into());
        }
        if !(self.run.tol > 0.0) {
            return Err("[run] tol must be positive".into());
        }
        if let Some(w) = &self.weight {
            w.validate_for(n, None).map_err(|e| format!("[weight] invalid: {e}"))?;
        }
        if let Some(t) = &self.tubes {
            if t.count == 0 {
                return Err("[tubes] count must be at least 1".into());
            }
            if let Some(list) = &t.s_list {
                if list.is_empty() || !list.iter().all(|&s| s > 0.0 && s.is_finite()) {
                    return Err("[tubes] s_list must be nonempty and positive".into());
                }
            }
            if t.n_slices < 2 || t.samples_per_slice < 2 {
                return Err("[tubes] n_slices and samples_per_slice must be at least 2".into());
            }
        }
        if let Some(w) = &self.whitney {
            if w.layers == 0 {
                return Err("[whitney] layers must be at least 1".into());
            }
            if let Some(h) = w.validate_h {
                if !(h > 0.0) {
                    return Err("[whitney] validate_h must be positive".into());
                }
            }
        }
        if let Some(u) = &self.union {
            u.spec2.validate().map_err(|e| format!("[union] spec2 invalid: {e}"))?;
            if u.spec2.dim() != n {
                return Err(format!(
                    "[union] spec2 lives in dimension {} but the domain is {n}-dimensional",
                    u.spec2.dim()
                ));
            }
            if let Some(r) = u.r {
                if !(r > 1.0) {
                    return Err("[union] r must exceed 1".into());
                }
            }
            if let Some(h) = u.h {
                if !(h > 0.0) {
                    return Err("[union] h must be positive".into());
                }
            }
            if u.radius_grid.is_empty() || !u.radius_grid.iter().all(|&r| r > 0.0) {
                return Err("[union] radius_grid must be nonempty and positive".into());
            }
        }
        if let Some(p) = &self.poincare {
            if p.j_list.is_empty() {
                return Err("[poincare] j_list must be nonempty".into());
            }
            if !(p.p >= 1.0) {
                return Err("[poincare] p must be at least 1".into());
            }
        }
        Ok(())
    }

    /// Finest grid pitch (last of the strictly decreasing list).
    pub fn finest_h(&self) -> f64 {
        *self.run.h_list.last().expect("validated nonempty")
    }
}
