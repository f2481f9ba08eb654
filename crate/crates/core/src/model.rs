//! Shared domain types: scenario parameters, unit conversions, and the
//! mapping between `(cell, user)` pairs and flat global indices.
//!
//! Every index in this crate is zero-based. Files written for humans (CSV
//! dumps, CLI tables) use one-based ids.
//!
//! Solver arithmetic runs in linear units (Watts, power ratios). Decibel
//! quantities only show up here, at the configuration boundary.

use std::ops::Range;

use crate::error::{Error, Result};

/// Converts a power level in dBm to Watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Converts Watts to dBm. Zero power maps to negative infinity.
pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Converts a ratio in dB to a linear ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

/// Derives an independent 64-bit seed for `stream` from `master` (splitmix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(stream))
}

/// A per-user quantity: one value shared by everyone, or one value per flat index.
#[derive(Debug, Clone, PartialEq)]
pub enum PerUser {
    Uniform(f64),
    PerUser(Vec<f64>),
}

impl PerUser {
    pub fn get(&self, flat: usize) -> f64 {
        match self {
            PerUser::Uniform(v) => *v,
            PerUser::PerUser(values) => values[flat],
        }
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            PerUser::Uniform(v) => Box::new(std::iter::once(*v)),
            PerUser::PerUser(values) => Box::new(values.iter().copied()),
        }
    }

    fn check_len(&self, name: &str, total: usize) -> Result<()> {
        match self {
            PerUser::PerUser(values) if values.len() != total => Err(Error::InvalidParams(format!(
                "{name} has {} per-user entries, expected {total}",
                values.len()
            ))),
            _ => Ok(()),
        }
    }
}

impl From<f64> for PerUser {
    fn from(v: f64) -> Self {
        PerUser::Uniform(v)
    }
}

/// Static description of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Number of users served by each cell; its length is the cell count.
    pub users_per_cell: Vec<usize>,
    pub cell_radius_m: f64,
    /// Exclusion radius around each base station, keeps the pathloss model finite.
    pub min_distance_m: f64,
    pub bandwidth_hz: f64,
    pub noise_psd_dbm_hz: f64,
    pub max_power_dbm: PerUser,
    /// Imperfect SIC coefficient, indexed by the user that suffers the residual.
    pub sic_coefficient: PerUser,
    /// Minimum SINR target in dB. `-inf` is a zero target.
    pub sinr_target_db: PerUser,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            users_per_cell: vec![3; 3],
            cell_radius_m: 100.0,
            min_distance_m: 1.0,
            bandwidth_hz: 10e6,
            noise_psd_dbm_hz: -174.0,
            max_power_dbm: PerUser::Uniform(30.0),
            sic_coefficient: PerUser::Uniform(0.0),
            sinr_target_db: PerUser::Uniform(0.0),
        }
    }
}

impl SystemParams {
    pub fn num_cells(&self) -> usize {
        self.users_per_cell.len()
    }

    pub fn total_users(&self) -> usize {
        self.users_per_cell.iter().sum()
    }

    pub fn index_map(&self) -> GlobalIndexMap {
        GlobalIndexMap::new(&self.users_per_cell)
    }

    /// Receiver noise power over the full band, in Watts.
    pub fn noise_power_w(&self) -> f64 {
        dbm_to_watts(self.noise_psd_dbm_hz) * self.bandwidth_hz
    }

    pub fn max_power_w(&self, flat: usize) -> f64 {
        dbm_to_watts(self.max_power_dbm.get(flat))
    }

    /// Linear SINR target of user `flat`.
    pub fn sinr_target(&self, flat: usize) -> f64 {
        db_to_linear(self.sinr_target_db.get(flat))
    }

    pub fn beta(&self, flat: usize) -> f64 {
        self.sic_coefficient.get(flat)
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.sic_coefficient = PerUser::Uniform(beta);
        self
    }

    pub fn with_sinr_target_db(mut self, db: f64) -> Self {
        self.sinr_target_db = PerUser::Uniform(db);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidParams(msg));
        if self.users_per_cell.is_empty() {
            return invalid("at least one cell is required".into());
        }
        if let Some(m) = self.users_per_cell.iter().position(|&n| n == 0) {
            return invalid(format!("cell {m} has no users"));
        }
        if !(self.min_distance_m > 0.0 && self.cell_radius_m > self.min_distance_m) {
            return invalid(format!(
                "need cell_radius ({}) > min_distance ({}) > 0",
                self.cell_radius_m, self.min_distance_m
            ));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return invalid(format!("bandwidth must be positive, got {}", self.bandwidth_hz));
        }
        if !self.noise_psd_dbm_hz.is_finite() {
            return invalid("noise PSD must be finite".into());
        }
        let total = self.total_users();
        self.max_power_dbm.check_len("max_power_dbm", total)?;
        self.sic_coefficient.check_len("sic_coefficient", total)?;
        self.sinr_target_db.check_len("sinr_target_db", total)?;
        if self.max_power_dbm.values().any(|p| !p.is_finite()) {
            return invalid("max power must be finite".into());
        }
        if self.sic_coefficient.values().any(|b| !(0.0..=1.0).contains(&b)) {
            return invalid("SIC coefficient must lie in [0, 1]".into());
        }
        if self.sinr_target_db.values().any(|g| g.is_nan() || g == f64::INFINITY) {
            return invalid("SINR target must be finite or -inf".into());
        }
        Ok(())
    }
}

/// Bijection between `(cell, user)` pairs and flat indices `0..N`, with
/// `flat(m, n) = N_0 + ... + N_{m-1} + n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalIndexMap {
    offsets: Vec<usize>,
}

impl GlobalIndexMap {
    pub fn new(users_per_cell: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(users_per_cell.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &n in users_per_cell {
            acc += n;
            offsets.push(acc);
        }
        GlobalIndexMap { offsets }
    }

    pub fn num_cells(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn total_users(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn cell_size(&self, cell: usize) -> usize {
        self.offsets[cell + 1] - self.offsets[cell]
    }

    pub fn cell_sizes(&self) -> Vec<usize> {
        self.offsets.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn cell_range(&self, cell: usize) -> Range<usize> {
        self.offsets[cell]..self.offsets[cell + 1]
    }

    pub fn flat_index(&self, cell: usize, user: usize) -> Result<usize> {
        if cell >= self.num_cells() || user >= self.cell_size(cell) {
            return Err(Error::IndexOutOfRange { cell, user });
        }
        Ok(self.offsets[cell] + user)
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    pub fn locate(&self, flat: usize) -> Result<(usize, usize)> {
        if flat >= self.total_users() {
            return Err(Error::FlatIndexOutOfRange(flat));
        }
        // offsets is sorted; the owning cell is the last offset <= flat
        let cell = self.offsets.partition_point(|&o| o <= flat) - 1;
        Ok((cell, flat - self.offsets[cell]))
    }

    /// Cell owning each flat index.
    pub fn cell_of(&self, flat: usize) -> usize {
        self.offsets.partition_point(|&o| o <= flat) - 1
    }
}

/// Transmit powers in Watts, one per user in flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    index_map: GlobalIndexMap,
    watts: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(index_map: GlobalIndexMap) -> Self {
        let n = index_map.total_users();
        PowerAllocation {
            index_map,
            watts: vec![0.0; n],
        }
    }

    pub fn from_watts(index_map: GlobalIndexMap, watts: Vec<f64>) -> Result<Self> {
        if watts.len() != index_map.total_users() {
            return Err(Error::DimensionMismatch {
                expected: index_map.total_users(),
                got: watts.len(),
            });
        }
        if let Some((user, &value)) = watts
            .iter()
            .enumerate()
            .find(|(_, &p)| !(p >= 0.0 && p.is_finite()))
        {
            return Err(Error::NegativePower { user, value });
        }
        Ok(PowerAllocation { index_map, watts })
    }

    pub fn index_map(&self) -> &GlobalIndexMap {
        &self.index_map
    }

    pub fn watts(&self) -> &[f64] {
        &self.watts
    }

    pub fn get(&self, cell: usize, user: usize) -> Result<f64> {
        Ok(self.watts[self.index_map.flat_index(cell, user)?])
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        &self.watts[self.index_map.cell_range(cell)]
    }

    /// Overwrites one cell's powers. Callers guarantee nonnegativity.
    pub(crate) fn set_cell(&mut self, cell: usize, powers: &[f64]) {
        let range = self.index_map.cell_range(cell);
        self.watts[range].copy_from_slice(powers);
    }

    pub fn total_watts(&self) -> f64 {
        self.watts.iter().sum()
    }

    pub fn dbm(&self) -> Vec<f64> {
        self.watts.iter().map(|&p| watts_to_dbm(p)).collect()
    }

    pub fn into_watts(self) -> Vec<f64> {
        self.watts
    }
}
