use crate::error::Result;
use crate::interference::InterferenceSystem;
use crate::model::PowerAllocation;

use super::{Diagnostics, SolveOutcome, SolveStatus};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Stop once `max_i |p_{k+1}(i) - p_k(i)| < tol * max_i p_{k+1}(i)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            tol: 1e-13,
            max_iter: 2_000_000,
        }
    }
}

/// Iterates `p <- B p + u` from zero.
///
/// The iterates are the partial sums of `sum_k B^k u`, so they rise
/// monotonically to `(I - B)^{-1} u` when the spectral radius is below one
/// and grow without bound otherwise. Iterates beyond
/// `N * max(p_max) * 1e3` are reported as spectral infeasibility.
pub fn solve_fixed_point_oracle(system: &InterferenceSystem, opts: &OracleOptions) -> Result<SolveOutcome> {
    let n = system.len();
    let cap = system.max_power.iter().fold(0.0f64, |a, &c| a.max(c));
    let divergence = n as f64 * cap * 1e3;
    let mut p = vec![0.0; n];
    for k in 1..=opts.max_iter {
        let next = system.apply(&p);
        let step = next.iter().zip(&p).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let scale = next.iter().fold(0.0f64, |a, &x| a.max(x));
        p = next;
        let diagnostics = Diagnostics {
            spectral_radius: None,
            iterations: k,
            residual: step,
        };
        if !(scale <= divergence) {
            return Ok(SolveOutcome::infeasible(SolveStatus::InfeasibleSpectral, diagnostics));
        }
        if step <= opts.tol * scale {
            if p.iter().zip(&system.max_power).any(|(x, c)| x > c) {
                return Ok(SolveOutcome::infeasible(SolveStatus::InfeasiblePower, diagnostics));
            }
            return Ok(SolveOutcome {
                status: SolveStatus::Feasible,
                powers: Some(PowerAllocation::from_watts(system.index_map.clone(), p)?),
                diagnostics,
            });
        }
    }
    Ok(SolveOutcome::infeasible(
        SolveStatus::NotConverged,
        Diagnostics {
            spectral_radius: None,
            iterations: opts.max_iter,
            residual: f64::NAN,
        },
    ))
}
