//! Run configuration, read from a TOML file.
//!
//! ```toml
//! seed = 42
//! [icp]
//! max_iterations = 100
//! [cpd]
//! beta = 2.0
//! [fit]
//! samples_per_curve = 10
//! [heatmap]
//! lo = -5.0
//! hi = 5.0
//! ```
//!
//! Every table and key is optional. A top-level `seed` overrides the seeds
//! inside `[icp]` and `[cpd]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use orbitfit_core::plate::{FitParams, HeatmapRange};
use orbitfit_core::registration::{CpdParams, IcpParams};

use crate::error::{Result, SessionError};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub icp: IcpParams,
    pub cpd: CpdParams,
    pub fit: FitParams,
    pub heatmap: HeatmapRange,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| SessionError::io(path, e))?;
        let mut c: Config = toml::from_str(&text).map_err(|e| SessionError::manifest(path, e.to_string()))?;
        c.heatmap = HeatmapRange::new(c.heatmap.lo, c.heatmap.hi)?;
        c.icp.validate()?;
        c.cpd.validate()?;
        c.apply_seed(c.seed);
        Ok(c)
    }

    /// Sets both registration seeds when `seed` is given.
    pub fn apply_seed(&mut self, seed: Option<u64>) {
        if let Some(s) = seed {
            self.seed = Some(s);
            self.icp.seed = s;
            self.cpd.seed = s;
        }
    }
}
