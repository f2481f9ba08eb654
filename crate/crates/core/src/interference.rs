//! Normalized interference matrix `B` and noise vector `u`.
//!
//! With every SINR constraint held at equality the allocation satisfies
//! `(I - B) p = u`. For user `i` in cell `m` with own gain `h_i` and
//! linear target `g_i`:
//!
//! * same-cell user `j` with a weaker own gain (decoded after `i`):
//!   `B(i, j) = g_i * h_j / h_i`
//! * same-cell user `j` with a stronger own gain (already cancelled):
//!   `B(i, j) = beta_i * g_i * h_j / h_i`
//! * user `j` of another cell: `B(i, j) = g_i * gain(j, m) / h_i`
//! * `u(i) = g_i * noise / h_i`
//!
//! The OMA baseline splits each cell's band into `N_m` equal sub-bands.
//! The user at decoding position `k` takes sub-band `k` and only collides
//! with position-`k` users of other cells.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::{GlobalIndexMap, PowerAllocation, SystemParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OmaMode {
    /// Each OMA user must match the rate a full-band user gets at the NOMA
    /// target: `(1 + g)^N_m - 1`.
    #[default]
    RateEquivalent,
    /// OMA users reuse the NOMA SINR target unchanged.
    SameSinr,
}

impl OmaMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OmaMode::RateEquivalent => "rate-equivalent",
            OmaMode::SameSinr => "same-sinr",
        }
    }

    /// Per-sub-band SINR target for an OMA user.
    pub fn target(&self, noma_target: f64, users_in_cell: usize) -> f64 {
        match self {
            OmaMode::RateEquivalent => (1.0 + noma_target).powi(users_in_cell as i32) - 1.0,
            OmaMode::SameSinr => noma_target,
        }
    }
}

impl std::str::FromStr for OmaMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rate-equivalent" => Ok(OmaMode::RateEquivalent),
            "same-sinr" => Ok(OmaMode::SameSinr),
            other => Err(format!("unknown OMA mode {other:?} (expected rate-equivalent or same-sinr)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Noma,
    Oma(OmaMode),
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Noma => "noma",
            Scheme::Oma(_) => "oma",
        }
    }
}

/// The linear system `(I - B) p = u` for one scheme and channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSystem {
    pub b: DenseMatrix,
    pub u: Vec<f64>,
    pub index_map: GlobalIndexMap,
    pub scheme: Scheme,
    /// Linear SINR target each row was built with.
    pub targets: Vec<f64>,
    /// Power cap per user, Watts.
    pub max_power: Vec<f64>,
}

impl InterferenceSystem {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Applies the affine map `p -> B p + u`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = self.b.mul_vec(p);
        out.iter_mut().zip(&self.u).for_each(|(o, u)| *o += u);
        out
    }

    /// Writes `i,j,value` for every nonzero entry of `B` (one-based indices).
    pub fn write_matrix_dump<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["i", "j", "value"])?;
        for i in 0..self.b.rows() {
            for j in 0..self.b.cols() {
                let v = self.b[(i, j)];
                if v != 0.0 {
                    w.write_record(&[(i + 1).to_string(), (j + 1).to_string(), format!("{v:e}")])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Interference coefficients for one cell with the other cells' powers frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSubsystem {
    pub cell: usize,
    pub b: DenseMatrix,
    pub u: Vec<f64>,
    /// Inter-cell interference seen by each user of the cell, Watts.
    pub inter_cell: Vec<f64>,
    pub max_power: Vec<f64>,
}

fn check_layout(channel: &ChannelRealization, params: &SystemParams) -> Result<()> {
    params.validate()?;
    if channel.index_map().cell_sizes() != params.users_per_cell {
        return Err(Error::InvalidParams(format!(
            "channel layout {:?} does not match parameters {:?}",
            channel.index_map().cell_sizes(),
            params.users_per_cell
        )));
    }
    Ok(())
}

fn check_powers(powers: &PowerAllocation) -> Result<()> {
    if let Some((user, &value)) = powers.watts().iter().enumerate().find(|(_, &p)| !(p >= 0.0)) {
        return Err(Error::NegativePower { user, value });
    }
    Ok(())
}

/// Same-cell coupling factor of user `j` on user `i` under NOMA with SIC.
fn noma_same_cell_factor(channel: &ChannelRealization, params: &SystemParams, i: usize, j: usize) -> f64 {
    if channel.rank(j) < channel.rank(i) {
        1.0
    } else {
        params.beta(i)
    }
}

/// Builds the global NOMA system over all users.
pub fn build_global_system(channel: &ChannelRealization, params: &SystemParams) -> Result<InterferenceSystem> {
    check_layout(channel, params)?;
    let map = channel.index_map().clone();
    let n = map.total_users();
    let noise = params.noise_power_w();
    let mut b = DenseMatrix::zeros(n, n);
    let mut u = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let cell = map.cell_of(i);
        let h_i = channel.own_gain(i);
        let g_i = params.sinr_target(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            b[(i, j)] = if map.cell_of(j) == cell {
                noma_same_cell_factor(channel, params, i, j) * g_i * channel.gain(j, cell) / h_i
            } else {
                g_i * channel.gain(j, cell) / h_i
            };
        }
        u.push(g_i * noise / h_i);
        targets.push(g_i);
    }
    Ok(InterferenceSystem {
        b,
        u,
        scheme: Scheme::Noma,
        targets,
        max_power: (0..n).map(|i| params.max_power_w(i)).collect(),
        index_map: map,
    })
}

fn equal_cell_size(channel: &ChannelRealization) -> Result<usize> {
    let sizes = channel.index_map().cell_sizes();
    if sizes.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::UnequalCellSizes(sizes));
    }
    Ok(sizes[0])
}

/// Builds the OMA baseline system: no same-cell coupling, cross-cell
/// coupling only between users on the same sub-band.
pub fn build_oma_system(
    channel: &ChannelRealization,
    params: &SystemParams,
    mode: OmaMode,
) -> Result<InterferenceSystem> {
    check_layout(channel, params)?;
    let per_cell = equal_cell_size(channel)?;
    let map = channel.index_map().clone();
    let n = map.total_users();
    let sub_band_noise = params.noise_power_w() / per_cell as f64;
    let mut b = DenseMatrix::zeros(n, n);
    let mut u = Vec::with_capacity(n);
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let cell = map.cell_of(i);
        let h_i = channel.own_gain(i);
        let g_i = mode.target(params.sinr_target(i), per_cell);
        for j in 0..n {
            if map.cell_of(j) != cell && channel.rank(j) == channel.rank(i) {
                b[(i, j)] = g_i * channel.gain(j, cell) / h_i;
            }
        }
        u.push(g_i * sub_band_noise / h_i);
        targets.push(g_i);
    }
    Ok(InterferenceSystem {
        b,
        u,
        scheme: Scheme::Oma(mode),
        targets,
        max_power: (0..n).map(|i| params.max_power_w(i)).collect(),
        index_map: map,
    })
}

pub fn build_system(channel: &ChannelRealization, params: &SystemParams, scheme: Scheme) -> Result<InterferenceSystem> {
    match scheme {
        Scheme::Noma => build_global_system(channel, params),
        Scheme::Oma(mode) => build_oma_system(channel, params, mode),
    }
}

/// Interference received at base station `cell` from users of other
/// cells, optionally restricted to one OMA sub-band.
fn inter_cell_interference(
    channel: &ChannelRealization,
    cell: usize,
    powers: &PowerAllocation,
    sub_band: Option<usize>,
) -> f64 {
    let map = channel.index_map();
    (0..map.total_users())
        .filter(|&j| map.cell_of(j) != cell)
        .filter(|&j| sub_band.is_none_or(|k| channel.rank(j) == k))
        .map(|j| powers.watts()[j] * channel.gain(j, cell))
        .sum()
}

/// Builds cell `cell`'s NOMA subsystem, treating every other cell's current
/// power in `powers` as fixed interference. The cell's own entries in
/// `powers` are ignored.
pub fn build_cell_subsystem(
    channel: &ChannelRealization,
    params: &SystemParams,
    cell: usize,
    powers: &PowerAllocation,
) -> Result<CellSubsystem> {
    check_layout(channel, params)?;
    check_powers(powers)?;
    let map = channel.index_map();
    let range = map.cell_range(cell);
    let size = range.len();
    let interference = inter_cell_interference(channel, cell, powers, None);
    let noise = params.noise_power_w();
    let mut b = DenseMatrix::zeros(size, size);
    let mut u = Vec::with_capacity(size);
    for (a, i) in range.clone().enumerate() {
        let h_i = channel.own_gain(i);
        let g_i = params.sinr_target(i);
        for (c, j) in range.clone().enumerate() {
            if a != c {
                b[(a, c)] = noma_same_cell_factor(channel, params, i, j) * g_i * channel.gain(j, cell) / h_i;
            }
        }
        u.push(g_i * (interference + noise) / h_i);
    }
    Ok(CellSubsystem {
        cell,
        b,
        u,
        inter_cell: vec![interference; size],
        max_power: range.map(|i| params.max_power_w(i)).collect(),
    })
}

/// OMA counterpart of [`build_cell_subsystem`]; `B_m` is identically zero.
pub fn build_oma_cell_subsystem(
    channel: &ChannelRealization,
    params: &SystemParams,
    mode: OmaMode,
    cell: usize,
    powers: &PowerAllocation,
) -> Result<CellSubsystem> {
    check_layout(channel, params)?;
    check_powers(powers)?;
    let per_cell = equal_cell_size(channel)?;
    let sub_band_noise = params.noise_power_w() / per_cell as f64;
    let range = channel.index_map().cell_range(cell);
    let mut u = Vec::with_capacity(per_cell);
    let mut inter_cell = Vec::with_capacity(per_cell);
    for i in range.clone() {
        let interference = inter_cell_interference(channel, cell, powers, Some(channel.rank(i)));
        let g_i = mode.target(params.sinr_target(i), per_cell);
        u.push(g_i * (interference + sub_band_noise) / channel.own_gain(i));
        inter_cell.push(interference);
    }
    Ok(CellSubsystem {
        cell,
        b: DenseMatrix::zeros(per_cell, per_cell),
        u,
        inter_cell,
        max_power: range.map(|i| params.max_power_w(i)).collect(),
    })
}

pub fn build_subsystem(
    channel: &ChannelRealization,
    params: &SystemParams,
    scheme: Scheme,
    cell: usize,
    powers: &PowerAllocation,
) -> Result<CellSubsystem> {
    match scheme {
        Scheme::Noma => build_cell_subsystem(channel, params, cell, powers),
        Scheme::Oma(mode) => build_oma_cell_subsystem(channel, params, mode, cell, powers),
    }
}

/// SINR of every user evaluated directly from received powers, without
/// going through `B`.
pub fn achieved_sinr(
    channel: &ChannelRealization,
    params: &SystemParams,
    scheme: Scheme,
    powers: &PowerAllocation,
) -> Result<Vec<f64>> {
    check_layout(channel, params)?;
    let map = channel.index_map();
    let p = powers.watts();
    let noise = params.noise_power_w();
    let n = map.total_users();
    let per_cell = match scheme {
        Scheme::Noma => None,
        Scheme::Oma(_) => Some(equal_cell_size(channel)?),
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let cell = map.cell_of(i);
        let signal = p[i] * channel.own_gain(i);
        let denominator = match per_cell {
            None => {
                let intra: f64 = map
                    .cell_range(cell)
                    .filter(|&j| j != i)
                    .map(|j| noma_same_cell_factor(channel, params, i, j) * p[j] * channel.gain(j, cell))
                    .sum();
                intra + inter_cell_interference(channel, cell, powers, None) + noise
            }
            Some(k) => {
                inter_cell_interference(channel, cell, powers, Some(channel.rank(i))) + noise / k as f64
            }
        };
        out.push(signal / denominator);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingMode;
    use crate::model::PerUser;

    /// Parameters giving a noise power of exactly 1 W.
    fn unit_noise(users: Vec<usize>, beta: f64, gamma_db: f64) -> SystemParams {
        SystemParams {
            users_per_cell: users,
            bandwidth_hz: 1.0,
            noise_psd_dbm_hz: 30.0,
            max_power_dbm: PerUser::Uniform(40.0),
            sic_coefficient: PerUser::Uniform(beta),
            sinr_target_db: PerUser::Uniform(gamma_db),
            ..SystemParams::default()
        }
    }

    fn single_cell(gains: &[f64]) -> ChannelRealization {
        let map = GlobalIndexMap::new(&[gains.len()]);
        ChannelRealization::from_gains(map, gains.iter().map(|&g| vec![g]).collect()).unwrap()
    }

    #[test]
    fn single_user_system() {
        let params = unit_noise(vec![1], 0.0, 0.0);
        let sys = build_global_system(&single_cell(&[2.0]), &params).unwrap();
        assert_eq!(sys.b.to_rows(), vec![vec![0.0]]);
        assert_eq!(sys.u, vec![0.5]);
    }

    #[test]
    fn two_user_imperfect_sic() {
        let params = unit_noise(vec![2], 0.5, 0.0);
        let sys = build_global_system(&single_cell(&[1.0, 2.0]), &params).unwrap();
        assert_eq!(sys.b.to_rows(), vec![vec![0.0, 1.0], vec![0.5, 0.0]]);
        assert_eq!(sys.u, vec![1.0, 0.5]);
    }

    #[test]
    fn unsorted_users_follow_rank() {
        // same instance with the users listed strongest first
        let params = unit_noise(vec![2], 0.5, 0.0);
        let sys = build_global_system(&single_cell(&[2.0, 1.0]), &params).unwrap();
        assert_eq!(sys.b.to_rows(), vec![vec![0.0, 0.5], vec![1.0, 0.0]]);
    }

    #[test]
    fn perfect_sic_zeroes_stronger_block() {
        let ch = ChannelRealization::draw(&SystemParams::default(), 11, FadingMode::Rayleigh).unwrap();
        let full = build_global_system(&ch, &SystemParams::default().with_beta(1.0)).unwrap();
        let none = build_global_system(&ch, &SystemParams::default().with_beta(0.0)).unwrap();
        let map = ch.index_map();
        for i in 0..9 {
            for j in 0..9 {
                let same = map.cell_of(i) == map.cell_of(j);
                if same && ch.rank(j) > ch.rank(i) {
                    assert!(full.b[(i, j)] > 0.0);
                    assert_eq!(none.b[(i, j)], 0.0);
                } else {
                    assert_eq!(full.b[(i, j)], none.b[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn cell_subsystem_inter_cell_term() {
        let params = unit_noise(vec![1, 1], 0.0, 0.0);
        let params = SystemParams {
            bandwidth_hz: 0.01,
            ..params
        };
        let map = GlobalIndexMap::new(&[1, 1]);
        let ch = ChannelRealization::from_gains(map.clone(), vec![vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let powers = PowerAllocation::from_watts(map, vec![0.0, 1.0]).unwrap();
        let sub = build_cell_subsystem(&ch, &params, 0, &powers).unwrap();
        assert!((sub.u[0] - 0.11).abs() < 1e-15);
        assert_eq!(sub.b.to_rows(), vec![vec![0.0]]);
    }

    #[test]
    fn cell_subsystem_rejects_negative_powers() {
        let params = unit_noise(vec![1, 1], 0.0, 0.0);
        let map = GlobalIndexMap::new(&[1, 1]);
        let ch = ChannelRealization::from_gains(map.clone(), vec![vec![1.0, 0.1], vec![0.1, 1.0]]).unwrap();
        let mut powers = PowerAllocation::zeros(map);
        powers.set_cell(1, &[-1.0]);
        assert!(matches!(
            build_cell_subsystem(&ch, &params, 0, &powers),
            Err(Error::NegativePower { .. })
        ));
    }

    #[test]
    fn cell_subsystem_with_zero_interference_matches_global_noise() {
        let params = SystemParams::default().with_beta(0.1);
        let ch = ChannelRealization::draw(&params, 5, FadingMode::Rayleigh).unwrap();
        let global = build_global_system(&ch, &params).unwrap();
        let zeros = PowerAllocation::zeros(ch.index_map().clone());
        for m in 0..3 {
            let sub = build_cell_subsystem(&ch, &params, m, &zeros).unwrap();
            let range = ch.index_map().cell_range(m);
            assert_eq!(sub.u.as_slice(), &global.u[range.clone()]);
            for (a, i) in range.clone().enumerate() {
                for (c, j) in range.clone().enumerate() {
                    assert_eq!(sub.b[(a, c)], global.b[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn oma_single_cell_is_interference_free() {
        let params = unit_noise(vec![2], 0.3, 0.0);
        let sys = build_oma_system(&single_cell(&[1.0, 4.0]), &params, OmaMode::SameSinr).unwrap();
        assert_eq!(sys.b, DenseMatrix::zeros(2, 2));
        assert_eq!(sys.u, vec![0.5, 0.125]);
    }

    #[test]
    fn rate_equivalent_target() {
        assert_eq!(OmaMode::RateEquivalent.target(1.0, 3), 7.0);
        assert_eq!(OmaMode::SameSinr.target(1.0, 3), 1.0);
    }

    #[test]
    fn oma_pairs_by_decoding_position() {
        let params = SystemParams::default();
        let ch = ChannelRealization::draw(&params, 9, FadingMode::Rayleigh).unwrap();
        let sys = build_oma_system(&ch, &params, OmaMode::RateEquivalent).unwrap();
        let map = ch.index_map();
        for i in 0..9 {
            for j in 0..9 {
                let nonzero = sys.b[(i, j)] != 0.0;
                let expected = map.cell_of(i) != map.cell_of(j) && ch.rank(i) == ch.rank(j);
                assert_eq!(nonzero, expected, "({i},{j})");
            }
        }
    }

    #[test]
    fn oma_rejects_unequal_cells() {
        let params = SystemParams {
            users_per_cell: vec![2, 3],
            ..SystemParams::default()
        };
        let ch = ChannelRealization::draw(&params, 1, FadingMode::Rayleigh).unwrap();
        assert!(matches!(
            build_oma_system(&ch, &params, OmaMode::SameSinr),
            Err(Error::UnequalCellSizes(_))
        ));
    }

    #[test]
    fn matrix_dump_lists_nonzeros() {
        let params = unit_noise(vec![2], 0.0, 0.0);
        let sys = build_global_system(&single_cell(&[1.0, 2.0]), &params).unwrap();
        let mut buf = Vec::new();
        sys.write_matrix_dump(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j,value\n2,1,5e-1\n");
    }
}
