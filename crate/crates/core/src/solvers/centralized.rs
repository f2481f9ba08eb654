use crate::error::Result;
use crate::interference::InterferenceSystem;
use crate::linalg::{self, norm2};
use crate::model::PowerAllocation;

use super::{spectral_radius, Diagnostics, SolveOutcome, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CentralizedOptions {
    /// Systems with spectral radius at or above `1 - spectral_margin` are
    /// declared infeasible.
    pub spectral_margin: f64,
    /// Powers below `-negative_tol` Watts flag the solve as infeasible;
    /// smaller negatives are clamped to zero.
    pub negative_tol: f64,
    pub spectral_tol: f64,
    pub spectral_max_iter: usize,
}

impl Default for CentralizedOptions {
    fn default() -> Self {
        CentralizedOptions {
            spectral_margin: 1e-9,
            negative_tol: 1e-12,
            spectral_tol: 1e-12,
            spectral_max_iter: 100_000,
        }
    }
}

/// Closed-form minimum-power allocation `p = (I - B)^{-1} u`.
pub fn solve_centralized(system: &InterferenceSystem, opts: &CentralizedOptions) -> Result<SolveOutcome> {
    let radius = spectral_radius(&system.b, opts.spectral_tol, opts.spectral_max_iter)?;
    let mut diagnostics = Diagnostics {
        spectral_radius: Some(radius.value),
        iterations: radius.iterations,
        residual: 0.0,
    };
    if radius.value >= 1.0 - opts.spectral_margin {
        return Ok(SolveOutcome::infeasible(SolveStatus::InfeasibleSpectral, diagnostics));
    }

    let a = system.b.identity_minus();
    let Ok(mut p) = linalg::solve(&a, &system.u) else {
        return Ok(SolveOutcome::infeasible(SolveStatus::InfeasibleSpectral, diagnostics));
    };
    let residual: Vec<f64> = a.mul_vec(&p).iter().zip(&system.u).map(|(x, u)| x - u).collect();
    diagnostics.residual = norm2(&residual);

    if p.iter().any(|&x| !(x >= -opts.negative_tol)) {
        return Ok(SolveOutcome::infeasible(SolveStatus::InfeasibleNegative, diagnostics));
    }
    p.iter_mut().for_each(|x| *x = x.max(0.0));
    if p.iter().zip(&system.max_power).any(|(x, cap)| x > cap) {
        return Ok(SolveOutcome::infeasible(SolveStatus::InfeasiblePower, diagnostics));
    }
    Ok(SolveOutcome {
        status: SolveStatus::Feasible,
        powers: Some(PowerAllocation::from_watts(system.index_map.clone(), p)?),
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelRealization;
    use crate::interference::build_global_system;
    use crate::model::{GlobalIndexMap, PerUser, SystemParams};

    fn unit_noise(users: Vec<usize>, beta: f64, max_dbm: f64) -> SystemParams {
        SystemParams {
            users_per_cell: users,
            bandwidth_hz: 1.0,
            noise_psd_dbm_hz: 30.0,
            max_power_dbm: PerUser::Uniform(max_dbm),
            sic_coefficient: PerUser::Uniform(beta),
            sinr_target_db: PerUser::Uniform(0.0),
            ..SystemParams::default()
        }
    }

    fn single_cell(gains: &[f64]) -> ChannelRealization {
        let map = GlobalIndexMap::new(&[gains.len()]);
        ChannelRealization::from_gains(map, gains.iter().map(|&g| vec![g]).collect()).unwrap()
    }

    fn solve(gains: &[f64], beta: f64, max_dbm: f64) -> SolveOutcome {
        let params = unit_noise(vec![gains.len()], beta, max_dbm);
        let sys = build_global_system(&single_cell(gains), &params).unwrap();
        solve_centralized(&sys, &CentralizedOptions::default()).unwrap()
    }

    #[test]
    fn single_user() {
        // 10 W cap = 40 dBm
        let out = solve(&[1.0], 0.0, 40.0);
        assert_eq!(out.status, SolveStatus::Feasible);
        assert_eq!(out.powers.unwrap().watts(), &[1.0]);
    }

    #[test]
    fn two_user_perfect_sic() {
        let out = solve(&[1.0, 2.0], 0.0, 40.0);
        assert_eq!(out.status, SolveStatus::Feasible);
        let p = out.powers.unwrap();
        assert!((p.watts()[0] - 1.0).abs() < 1e-15);
        assert!((p.watts()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_user_boundary_is_spectral() {
        let out = solve(&[1.0, 2.0], 1.0, 40.0);
        assert_eq!(out.status, SolveStatus::InfeasibleSpectral);
        assert!(out.powers.is_none());
        assert!((out.diagnostics.spectral_radius.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn power_cap_violation() {
        // p = 1 W needed, cap 0.5 W
        let out = solve(&[1.0], 0.0, 30.0 + 10.0 * 0.5f64.log10());
        assert_eq!(out.status, SolveStatus::InfeasiblePower);
    }

    #[test]
    fn zero_targets_give_zero_power() {
        let mut params = SystemParams::default().with_sinr_target_db(f64::NEG_INFINITY);
        params.sic_coefficient = PerUser::Uniform(0.1);
        let ch = ChannelRealization::draw(&params, 3, crate::channel::FadingMode::Rayleigh).unwrap();
        let sys = build_global_system(&ch, &params).unwrap();
        let out = solve_centralized(&sys, &CentralizedOptions::default()).unwrap();
        assert!(out.is_feasible());
        assert!(out.powers.unwrap().watts().iter().all(|&p| p == 0.0));
    }
}
