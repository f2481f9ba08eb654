//! Distributed iterative power control.
//!
//! Starting from zero power, cells update in turn. Each cell measures the
//! interference arriving from the other cells, solves its own small system
//! `(I - B_m) p_m = u_m`, and publishes the result before the next cell
//! moves. A sweep over all cells is one iteration; the first sweep is the
//! initial allocation and is numbered 0. The loop stops once the update
//! norm between consecutive sweeps falls below `epsilon`, or as soon as any
//! cell's solve breaks a power cap or goes negative.
//!
//! The per-cell update is a standard interference function of the other
//! cells' powers (positive, monotone, scalable), so from zero the sweeps
//! increase monotonically toward the unique minimal allocation whenever
//! one exists.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::interference::{build_subsystem, Scheme};
use crate::linalg::{self, dist2_squared};
use crate::model::{watts_to_dbm, GlobalIndexMap, PowerAllocation, SystemParams};

use super::{Diagnostics, SolveOutcome, SolveStatus};

/// How the update norm between sweeps is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConvergenceMetric {
    /// `|p_l - p_{l-1}| / |p_l|`, independent of the power unit.
    #[default]
    Relative,
    /// `|p_l - p_{l-1}|^2` with powers in Watts.
    AbsoluteWatts,
}

impl ConvergenceMetric {
    pub fn as_str(&self) -> &'static str {
        match self {
            ConvergenceMetric::Relative => "relative",
            ConvergenceMetric::AbsoluteWatts => "absolute-watts",
        }
    }

    fn measure(&self, current: &[f64], previous: &[f64]) -> f64 {
        let delta = dist2_squared(current, previous);
        match self {
            ConvergenceMetric::AbsoluteWatts => delta,
            ConvergenceMetric::Relative => {
                let scale: f64 = current.iter().map(|p| p * p).sum();
                if delta == 0.0 {
                    0.0
                } else {
                    (delta / scale).sqrt()
                }
            }
        }
    }
}

impl std::str::FromStr for ConvergenceMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "relative" => Ok(ConvergenceMetric::Relative),
            "absolute-watts" => Ok(ConvergenceMetric::AbsoluteWatts),
            other => Err(format!("unknown convergence metric {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedOptions {
    /// Stopping threshold on the update norm selected by `metric`.
    pub epsilon: f64,
    pub max_rounds: usize,
    pub metric: ConvergenceMetric,
    /// Cell update order; ascending ids when `None`.
    pub cell_order: Option<Vec<usize>>,
    /// Starting allocation; zero when `None`.
    pub warm_start: Option<PowerAllocation>,
    pub negative_tol: f64,
}

impl Default for DistributedOptions {
    fn default() -> Self {
        DistributedOptions {
            epsilon: 1e-6,
            max_rounds: 10_000,
            metric: ConvergenceMetric::default(),
            cell_order: None,
            warm_start: None,
            negative_tol: 1e-12,
        }
    }
}

/// Power vector right after one cell's update.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub iteration: usize,
    pub cell: usize,
    pub powers: Vec<f64>,
    /// Update norm between this snapshot and the end of the previous sweep.
    /// On a sweep's last record it is the sweep's convergence measure.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTrace {
    pub index_map: GlobalIndexMap,
    pub records: Vec<SweepRecord>,
}

impl ConvergenceTrace {
    /// Number of completed sweeps after the initial allocation.
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iteration)
    }

    /// Convergence measure at the end of every completed sweep.
    pub fn sweep_epsilons(&self) -> Vec<f64> {
        let cells = self.index_map.num_cells();
        self.records
            .chunks(cells)
            .filter(|c| c.len() == cells)
            .map(|c| c[cells - 1].epsilon)
            .collect()
    }

    /// Writes `iteration,cell_updated,p_<cell>_<user>_dbm...,epsilon` with
    /// one row per cell update. Ids are one-based.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iteration".to_string(), "cell_updated".to_string()];
        for i in 0..self.index_map.total_users() {
            let (m, n) = self.index_map.locate(i)?;
            header.push(format!("p_{}_{}_dbm", m + 1, n + 1));
        }
        header.push("epsilon".to_string());
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.iteration.to_string(), (r.cell + 1).to_string()];
            row.extend(r.powers.iter().map(|&p| watts_to_dbm(p).to_string()));
            row.push(format!("{:e}", r.epsilon));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn solve_distributed(
    channel: &ChannelRealization,
    params: &SystemParams,
    scheme: Scheme,
    opts: &DistributedOptions,
) -> Result<(SolveOutcome, ConvergenceTrace)> {
    let map = channel.index_map().clone();
    let cells = map.num_cells();
    let order: Vec<usize> = match &opts.cell_order {
        Some(order) => {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..cells).collect::<Vec<_>>() {
                return Err(Error::InvalidParams(format!("cell order {order:?} is not a permutation")));
            }
            order.clone()
        }
        None => (0..cells).collect(),
    };
    let mut powers = match &opts.warm_start {
        Some(start) if start.index_map() == &map => start.clone(),
        Some(_) => {
            return Err(Error::InvalidParams("warm start layout does not match the channel".into()));
        }
        None => PowerAllocation::zeros(map.clone()),
    };
    let mut trace = ConvergenceTrace {
        index_map: map.clone(),
        records: Vec::new(),
    };
    let mut previous = powers.watts().to_vec();
    let mut iteration = 0;

    let stop = |status, iteration, epsilon: f64| {
        let diagnostics = Diagnostics {
            spectral_radius: None,
            iterations: iteration,
            residual: epsilon,
        };
        SolveOutcome::infeasible(status, diagnostics)
    };

    loop {
        for &m in &order {
            let sub = build_subsystem(channel, params, scheme, m, &powers)?;
            let a = sub.b.identity_minus();
            let Ok(mut cell_powers) = linalg::solve(&a, &sub.u) else {
                return Ok((stop(SolveStatus::InfeasibleSpectral, iteration, f64::NAN), trace));
            };
            if cell_powers.iter().any(|&p| !(p >= -opts.negative_tol)) {
                return Ok((stop(SolveStatus::InfeasibleNegative, iteration, f64::NAN), trace));
            }
            cell_powers.iter_mut().for_each(|p| *p = p.max(0.0));
            if cell_powers.iter().zip(&sub.max_power).any(|(p, cap)| p > cap) {
                return Ok((stop(SolveStatus::InfeasiblePower, iteration, f64::NAN), trace));
            }
            powers.set_cell(m, &cell_powers);
            trace.records.push(SweepRecord {
                iteration,
                cell: m,
                powers: powers.watts().to_vec(),
                epsilon: opts.metric.measure(powers.watts(), &previous),
            });
        }

        let epsilon = opts.metric.measure(powers.watts(), &previous);
        if epsilon < opts.epsilon {
            let outcome = SolveOutcome {
                status: SolveStatus::Feasible,
                powers: Some(powers),
                diagnostics: Diagnostics {
                    spectral_radius: None,
                    iterations: iteration,
                    residual: epsilon,
                },
            };
            return Ok((outcome, trace));
        }
        iteration += 1;
        if iteration > opts.max_rounds {
            return Ok((stop(SolveStatus::NotConverged, iteration - 1, epsilon), trace));
        }
        previous.copy_from_slice(powers.watts());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FadingMode;
    use crate::interference::{build_global_system, OmaMode};
    use crate::solvers::{solve_centralized, CentralizedOptions};

    fn centralized(ch: &ChannelRealization, params: &SystemParams, scheme: Scheme) -> SolveOutcome {
        let sys = crate::interference::build_system(ch, params, scheme).unwrap();
        solve_centralized(&sys, &CentralizedOptions::default()).unwrap()
    }

    #[test]
    fn single_cell_converges_after_one_iteration() {
        let params = SystemParams {
            users_per_cell: vec![3],
            ..SystemParams::default()
        }
        .with_beta(0.1)
        .with_sinr_target_db(-2.5);
        let ch = ChannelRealization::draw(&params, 4, FadingMode::Rayleigh).unwrap();
        let (out, trace) = solve_distributed(&ch, &params, Scheme::Noma, &DistributedOptions::default()).unwrap();
        assert!(out.is_feasible());
        assert_eq!(out.diagnostics.iterations, 1);
        assert_eq!(trace.iterations(), 1);
        let reference = centralized(&ch, &params, Scheme::Noma).powers.unwrap();
        for (a, b) in out.powers.unwrap().watts().iter().zip(reference.watts()) {
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn matches_centralized_on_default_scenario() {
        let params = SystemParams::default().with_beta(0.05).with_sinr_target_db(-4.0);
        let mut checked = 0;
        for seed in 0..40 {
            let ch = ChannelRealization::draw(&params, seed, FadingMode::Rayleigh).unwrap();
            let c = centralized(&ch, &params, Scheme::Noma);
            let (d, _) = solve_distributed(&ch, &params, Scheme::Noma, &DistributedOptions::default()).unwrap();
            assert_eq!(c.is_feasible(), d.is_feasible(), "seed {seed}");
            if let (Some(pc), Some(pd)) = (c.powers, d.powers) {
                let err = dist2_squared(pc.watts(), pd.watts()).sqrt() / crate::linalg::norm2(pc.watts());
                assert!(err < 10.0 * 1e-6, "seed {seed}: {err}");
                checked += 1;
            }
        }
        assert!(checked > 10);
    }

    #[test]
    fn oma_scheme_matches_centralized() {
        let params = SystemParams::default().with_sinr_target_db(-6.0);
        let scheme = Scheme::Oma(OmaMode::RateEquivalent);
        let ch = ChannelRealization::draw(&params, 21, FadingMode::Rayleigh).unwrap();
        let c = centralized(&ch, &params, scheme);
        let (d, _) = solve_distributed(&ch, &params, scheme, &DistributedOptions::default()).unwrap();
        assert_eq!(c.is_feasible(), d.is_feasible());
    }

    #[test]
    fn cap_violation_aborts() {
        let params = SystemParams::default().with_beta(0.0).with_sinr_target_db(20.0);
        let ch = ChannelRealization::draw(&params, 2, FadingMode::Rayleigh).unwrap();
        let sys = build_global_system(&ch, &params).unwrap();
        assert!(!solve_centralized(&sys, &CentralizedOptions::default()).unwrap().is_feasible());
        let (d, _) = solve_distributed(&ch, &params, Scheme::Noma, &DistributedOptions::default()).unwrap();
        assert!(!d.is_feasible());
        assert!(d.powers.is_none());
    }

    #[test]
    fn rejects_bad_cell_order() {
        let params = SystemParams::default();
        let ch = ChannelRealization::draw(&params, 2, FadingMode::Rayleigh).unwrap();
        let opts = DistributedOptions {
            cell_order: Some(vec![0, 0, 1]),
            ..DistributedOptions::default()
        };
        assert!(solve_distributed(&ch, &params, Scheme::Noma, &opts).is_err());
    }

    #[test]
    fn update_order_does_not_change_fixed_point() {
        let params = SystemParams::default().with_beta(0.1).with_sinr_target_db(-5.0);
        let ch = ChannelRealization::draw(&params, 8, FadingMode::Rayleigh).unwrap();
        let tight = DistributedOptions {
            epsilon: 1e-24,
            ..DistributedOptions::default()
        };
        let (a, _) = solve_distributed(&ch, &params, Scheme::Noma, &tight).unwrap();
        let reversed = DistributedOptions {
            cell_order: Some(vec![2, 1, 0]),
            ..tight
        };
        let (b, _) = solve_distributed(&ch, &params, Scheme::Noma, &reversed).unwrap();
        let (pa, pb) = (a.powers.unwrap(), b.powers.unwrap());
        for (x, y) in pa.watts().iter().zip(pb.watts()) {
            assert!((x - y).abs() <= 1e-9 * x);
        }
    }

    #[test]
    fn warm_start_from_solution_stops_immediately() {
        let params = SystemParams::default().with_beta(0.1).with_sinr_target_db(-5.0);
        let ch = ChannelRealization::draw(&params, 8, FadingMode::Rayleigh).unwrap();
        let solution = centralized(&ch, &params, Scheme::Noma).powers.unwrap();
        let opts = DistributedOptions {
            warm_start: Some(solution),
            ..DistributedOptions::default()
        };
        let (out, _) = solve_distributed(&ch, &params, Scheme::Noma, &opts).unwrap();
        assert_eq!(out.diagnostics.iterations, 0);
    }

    #[test]
    fn trace_csv_shape() {
        let params = SystemParams::default().with_sinr_target_db(-2.5);
        let trace = (0..)
            .find_map(|seed| {
                let ch = ChannelRealization::draw(&params, seed, FadingMode::Rayleigh).unwrap();
                let (out, trace) = solve_distributed(&ch, &params, Scheme::Noma, &DistributedOptions::default()).unwrap();
                out.is_feasible().then_some(trace)
            })
            .unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header.split(',').count(), 2 + 9 + 1);
        assert_eq!(text.lines().count(), 1 + trace.records.len());
        assert_eq!(trace.records.len(), 3 * (trace.iterations() + 1));
    }
}
