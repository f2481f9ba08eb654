//! Run configuration loaded from a TOML file.
//!
//! Every key is optional and falls back to the default scenario (three
//! cells of three users, 100 m radius, 10 MHz, -174 dBm/Hz, 30 dBm cap).
//! Unknown keys are rejected.
//!
//! ```toml
//! [system]
//! num_cells = 3
//! users_per_cell = 3            # or one entry per cell: [3, 3, 2]
//! sic_coefficient = 0.05
//! sinr_target_db = -2.5         # -inf for a zero target
//!
//! [experiment]
//! gamma_db = [-10, -8, -6, -4, -2, 0]
//! betas = [0.0, 0.05, 0.1, 0.15]
//! trials = 1000
//! seed = 1
//!
//! [solver]
//! epsilon = 1e-6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::FadingMode;
use crate::experiments::{ExperimentPlan, SchemeKind};
use crate::interference::OmaMode;
use crate::model::{PerUser, SystemParams};
use crate::solvers::{CentralizedOptions, ConvergenceMetric, DistributedOptions};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellSizes {
    Uniform(usize),
    PerCell(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub num_cells: usize,
    pub users_per_cell: CellSizes,
    pub cell_radius_m: f64,
    pub min_distance_m: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub max_power_dbm: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_power_dbm_per_user: Option<Vec<f64>>,
    pub sic_coefficient: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sic_coefficient_per_user: Option<Vec<f64>>,
    pub sinr_target_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinr_target_db_per_user: Option<Vec<f64>>,
}

impl Default for SystemSection {
    fn default() -> Self {
        let p = SystemParams::default();
        SystemSection {
            num_cells: p.num_cells(),
            users_per_cell: CellSizes::Uniform(p.users_per_cell[0]),
            cell_radius_m: p.cell_radius_m,
            min_distance_m: p.min_distance_m,
            bandwidth_hz: p.bandwidth_hz,
            noise_psd_dbm_hz: p.noise_psd_dbm_hz,
            max_power_dbm: 30.0,
            max_power_dbm_per_user: None,
            sic_coefficient: 0.0,
            sic_coefficient_per_user: None,
            sinr_target_db: -2.5,
            sinr_target_db_per_user: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub gamma_db: Vec<f64>,
    pub betas: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub trials: usize,
    pub seed: u64,
    pub oma_mode: OmaMode,
    pub fading: FadingMode,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        let plan = ExperimentPlan::default();
        ExperimentSection {
            gamma_db: plan.gamma_db,
            betas: plan.betas,
            schemes: plan.schemes,
            trials: plan.trials,
            seed: plan.master_seed,
            oma_mode: plan.oma_mode,
            fading: plan.fading,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub epsilon: f64,
    pub max_rounds: usize,
    pub metric: ConvergenceMetric,
    pub spectral_margin: f64,
    pub negative_tol: f64,
    /// Seeds tried by `converge` before giving up on finding a feasible drop.
    pub max_probe_attempts: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = DistributedOptions::default();
        let c = CentralizedOptions::default();
        SolverSection {
            epsilon: d.epsilon,
            max_rounds: d.max_rounds,
            metric: d.metric,
            spectral_margin: c.spectral_margin,
            negative_tol: c.negative_tol,
            max_probe_attempts: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub experiment: ExperimentSection,
    pub solver: SolverSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: RunConfig = toml::from_str(text)?;
        config.system_params()?;
        config.plan()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn system_params(&self) -> Result<SystemParams, ConfigError> {
        let s = &self.system;
        let users_per_cell = match &s.users_per_cell {
            CellSizes::Uniform(n) => vec![*n; s.num_cells],
            CellSizes::PerCell(v) if v.len() == s.num_cells => v.clone(),
            CellSizes::PerCell(v) => {
                return Err(ConfigError::Invalid(format!(
                    "users_per_cell lists {} cells but num_cells = {}",
                    v.len(),
                    s.num_cells
                )))
            }
        };
        let per_user = |uniform: f64, list: &Option<Vec<f64>>| match list {
            Some(v) => PerUser::PerUser(v.clone()),
            None => PerUser::Uniform(uniform),
        };
        let params = SystemParams {
            users_per_cell,
            cell_radius_m: s.cell_radius_m,
            min_distance_m: s.min_distance_m,
            bandwidth_hz: s.bandwidth_hz,
            noise_psd_dbm_hz: s.noise_psd_dbm_hz,
            max_power_dbm: per_user(s.max_power_dbm, &s.max_power_dbm_per_user),
            sic_coefficient: per_user(s.sic_coefficient, &s.sic_coefficient_per_user),
            sinr_target_db: per_user(s.sinr_target_db, &s.sinr_target_db_per_user),
        };
        params.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(params)
    }

    pub fn plan(&self) -> Result<ExperimentPlan, ConfigError> {
        let e = &self.experiment;
        let plan = ExperimentPlan {
            base: self.system_params()?,
            gamma_db: e.gamma_db.clone(),
            betas: e.betas.clone(),
            schemes: e.schemes.clone(),
            trials: e.trials,
            master_seed: e.seed,
            oma_mode: e.oma_mode,
            fading: e.fading,
            solver: self.centralized_options(),
        };
        plan.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(plan)
    }

    pub fn centralized_options(&self) -> CentralizedOptions {
        CentralizedOptions {
            spectral_margin: self.solver.spectral_margin,
            negative_tol: self.solver.negative_tol,
            ..CentralizedOptions::default()
        }
    }

    pub fn distributed_options(&self) -> DistributedOptions {
        DistributedOptions {
            epsilon: self.solver.epsilon,
            max_rounds: self.solver.max_rounds,
            metric: self.solver.metric,
            negative_tol: self.solver.negative_tol,
            ..DistributedOptions::default()
        }
    }
}
