//! Sparse polynomial chaos, Kriging and PC-Kriging surrogates.

mod basis;
pub(crate) mod design;
mod kriging;
mod lars;
mod pce;

pub use basis::{orthonormal_eval, total_degree_cardinality, MultiIndexSet};
pub use design::{ExperimentalDesign, SamplerTag};
pub use kriging::{
    fit_kriging_fixed, kriging_loo, kriging_loo_residuals, matern52, profile_objective, profile_objective_gradient,
    train_kriging, train_pck, KrigingModel, PckModel, NUGGET_MAX, NUGGET_START, N_STARTS, PCK_MAX_DEGREE,
};
pub use lars::{lars_path, ols_path, PathModel};
pub use pce::{candidate_basis, default_max_degree, pce_loo, pce_loo_parts, train_pce, PceModel, MAX_DEGREE};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::points::PointSet;
use crate::randvec::RandomVector;

/// Surrogate families understood by the CLI and the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    Pce,
    Pck,
}

impl std::fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SurrogateKind::Pce => "pce",
            SurrogateKind::Pck => "pck",
        })
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pce" => Ok(SurrogateKind::Pce),
            "pck" => Ok(SurrogateKind::Pck),
            _ => Err(crate::Error::InvalidArgument(format!("unknown surrogate kind '{s}'"))),
        }
    }
}

/// A trained surrogate of any family, serialised with a `kind` tag.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Surrogate {
    Pce(PceModel),
    Kriging(KrigingModel),
    Pck(PckModel),
}

impl Surrogate {
    pub fn train(kind: SurrogateKind, ed: &ExperimentalDesign, seed: u64) -> Result<Self> {
        Ok(match kind {
            SurrogateKind::Pce => Surrogate::Pce(train_pce(ed, None)?),
            SurrogateKind::Pck => Surrogate::Pck(train_pck(ed, None, seed)?),
        })
    }

    pub fn predict(&self, x: &PointSet) -> Result<Vec<f64>> {
        match self {
            Surrogate::Pce(m) => m.predict(x),
            Surrogate::Kriging(m) => m.predict(x),
            Surrogate::Pck(m) => m.predict(x),
        }
    }

    /// Relative LOO error on the training design.
    pub fn loo(&self, ed: &ExperimentalDesign) -> Result<f64> {
        match self {
            Surrogate::Pce(m) => pce_loo(m, ed),
            Surrogate::Kriging(m) => kriging_loo(m, ed),
            Surrogate::Pck(m) => kriging_loo(&m.kriging, ed),
        }
    }

    pub fn rv(&self) -> &RandomVector {
        match self {
            Surrogate::Pce(m) => m.rv(),
            Surrogate::Kriging(m) => m.rv(),
            Surrogate::Pck(m) => m.kriging.rv(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
