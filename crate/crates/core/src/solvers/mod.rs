//! Feasibility analysis and minimum-power allocation.
//!
//! Three routes reach the same allocation:
//!
//! * [`solve_centralized`]: spectral-radius test on `B`, then one dense
//!   solve of `(I - B) p = u`.
//! * [`solve_distributed`]: cells take turns solving their own
//!   `N_m x N_m` system against the interference left by everyone else.
//! * [`solve_fixed_point_oracle`]: plain iteration `p <- B p + u` from
//!   zero, used to cross-check the other two.

mod centralized;
mod distributed;
mod oracle;
mod spectral;

pub use centralized::{solve_centralized, CentralizedOptions};
pub use distributed::{
    solve_distributed, ConvergenceMetric, ConvergenceTrace, DistributedOptions, SweepRecord,
};
pub use oracle::{solve_fixed_point_oracle, OracleOptions};
pub use spectral::{spectral_radius, SpectralRadius};

use crate::model::PowerAllocation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveStatus {
    Feasible,
    /// Perron-Frobenius eigenvalue of `B` is at or above one.
    InfeasibleSpectral,
    /// The unconstrained optimum exceeds some user's power cap.
    InfeasiblePower,
    /// Numerical guard: a solve produced a negative power.
    InfeasibleNegative,
    /// The iteration budget ran out before the stopping rule fired.
    NotConverged,
}

impl SolveStatus {
    pub fn is_feasible(&self) -> bool {
        matches!(self, SolveStatus::Feasible)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Feasible => "feasible",
            SolveStatus::InfeasibleSpectral => "infeasible_spectral",
            SolveStatus::InfeasiblePower => "infeasible_power",
            SolveStatus::InfeasibleNegative => "infeasible_negative",
            SolveStatus::NotConverged => "not_converged",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Estimate of the Perron-Frobenius eigenvalue of `B`, when computed.
    pub spectral_radius: Option<f64>,
    pub iterations: usize,
    /// Euclidean norm of `(I - B) p - u` or of the last update, per solver.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Present iff `status` is feasible.
    pub powers: Option<PowerAllocation>,
    pub diagnostics: Diagnostics,
}

impl SolveOutcome {
    pub fn is_feasible(&self) -> bool {
        self.status.is_feasible()
    }

    pub(crate) fn infeasible(status: SolveStatus, diagnostics: Diagnostics) -> Self {
        SolveOutcome {
            status,
            powers: None,
            diagnostics,
        }
    }

    pub fn total_power(&self) -> Option<f64> {
        self.powers.as_ref().map(PowerAllocation::total_watts)
    }
}
