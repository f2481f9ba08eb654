//! Seeded Monte Carlo sweeps over SINR targets, SIC coefficients and
//! access schemes.
//!
//! Each trial draws one channel from `derive_seed(master_seed, trial)` and
//! reuses it for every `(scheme, beta, gamma)` cell, so comparisons
//! between cells are paired. Trials run in parallel and are gathered back
//! in trial order, so results do not depend on the thread count.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, FadingMode};
use crate::error::{Error, Result};
use crate::interference::{build_system, OmaMode, Scheme};
use crate::model::{derive_seed, watts_to_dbm, SystemParams};
use crate::solvers::{
    solve_centralized, solve_distributed, CentralizedOptions, ConvergenceTrace, DistributedOptions, SolveOutcome,
    SolveStatus,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    Noma,
    Oma,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Noma => "noma",
            SchemeKind::Oma => "oma",
        }
    }

    pub fn with_mode(&self, mode: OmaMode) -> Scheme {
        match self {
            SchemeKind::Noma => Scheme::Noma,
            SchemeKind::Oma => Scheme::Oma(mode),
        }
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "noma" => Ok(SchemeKind::Noma),
            "oma" => Ok(SchemeKind::Oma),
            other => Err(format!("unknown scheme {other:?} (expected noma or oma)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    /// Scenario template; its SIC coefficient and SINR target are
    /// overridden per cell.
    pub base: SystemParams,
    pub gamma_db: Vec<f64>,
    pub betas: Vec<f64>,
    pub schemes: Vec<SchemeKind>,
    pub trials: usize,
    pub master_seed: u64,
    pub oma_mode: OmaMode,
    pub fading: FadingMode,
    pub solver: CentralizedOptions,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            base: SystemParams::default(),
            gamma_db: vec![-10.0, -8.0, -6.0, -4.0, -2.0, 0.0],
            betas: vec![0.0, 0.05, 0.1, 0.15],
            schemes: vec![SchemeKind::Noma, SchemeKind::Oma],
            trials: 1000,
            master_seed: 1,
            oma_mode: OmaMode::RateEquivalent,
            fading: FadingMode::Rayleigh,
            solver: CentralizedOptions::default(),
        }
    }
}

/// One point of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellKey {
    pub scheme: SchemeKind,
    pub beta: f64,
    pub gamma_db: f64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.trials == 0 {
            return invalid("trial count must be at least 1");
        }
        if self.gamma_db.is_empty() || self.betas.is_empty() || self.schemes.is_empty() {
            return invalid("gamma, beta and scheme lists must be non-empty");
        }
        for &beta in &self.betas {
            self.base.clone().with_beta(beta).validate()?;
        }
        for &gamma in &self.gamma_db {
            self.base.clone().with_sinr_target_db(gamma).validate()?;
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        derive_seed(self.master_seed, trial as u64)
    }

    /// Sweep grid in scheme, beta, gamma order.
    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for &scheme in &self.schemes {
            for &beta in &self.betas {
                for &gamma_db in &self.gamma_db {
                    cells.push(CellKey { scheme, beta, gamma_db });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellResult {
    pub status: SolveStatus,
    /// Present iff the cell is feasible.
    pub sum_power_w: Option<f64>,
}

impl From<&SolveOutcome> for CellResult {
    fn from(out: &SolveOutcome) -> Self {
        CellResult {
            status: out.status,
            sum_power_w: out.total_power(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// One entry per [`ExperimentPlan::cells`] entry, same order.
    pub results: Vec<CellResult>,
}

impl TrialRecord {
    pub fn all_feasible(&self) -> bool {
        self.results.iter().all(|r| r.status.is_feasible())
    }
}

fn run_trial(plan: &ExperimentPlan, cells: &[CellKey], trial: usize) -> Result<TrialRecord> {
    let seed = plan.trial_seed(trial);
    let channel = ChannelRealization::draw(&plan.base, seed, plan.fading)?;
    let mut results: Vec<CellResult> = Vec::with_capacity(cells.len());
    for (k, cell) in cells.iter().enumerate() {
        // OMA ignores beta, so reuse the first beta's result for the same gamma
        if cell.scheme == SchemeKind::Oma {
            if let Some(prev) = cells[..k]
                .iter()
                .position(|c| c.scheme == SchemeKind::Oma && c.gamma_db == cell.gamma_db)
            {
                results.push(results[prev]);
                continue;
            }
        }
        let params = plan
            .base
            .clone()
            .with_beta(cell.beta)
            .with_sinr_target_db(cell.gamma_db);
        let system = build_system(&channel, &params, cell.scheme.with_mode(plan.oma_mode))?;
        results.push((&solve_centralized(&system, &plan.solver)?).into());
    }
    Ok(TrialRecord { trial, seed, results })
}

/// Solves every cell of every trial with the centralized solver.
pub fn run_trials(plan: &ExperimentPlan) -> Result<Vec<TrialRecord>> {
    plan.validate()?;
    let cells = plan.cells();
    (0..plan.trials)
        .into_par_iter()
        .map(|t| run_trial(plan, &cells, t))
        .collect()
}

/// One row of a result table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: SchemeKind,
    pub beta: f64,
    pub gamma_db: f64,
    pub trials: usize,
    /// Trials feasible in this cell. In the sum-power table, the size of
    /// the jointly feasible set instead.
    pub feasible_trials: usize,
    pub outage: f64,
    /// Mean sum power over the trials counted in `feasible_trials`; `None`
    /// when that set is empty.
    pub mean_sum_power_w: Option<f64>,
    pub joint_feasible_trials: usize,
}

impl SweepRow {
    pub fn mean_sum_power_dbm(&self) -> Option<f64> {
        self.mean_sum_power_w.map(watts_to_dbm)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Outage per cell: the fraction of trials with no feasible allocation.
/// Mean sum power here averages over the cell's own feasible trials.
pub fn outage_table(plan: &ExperimentPlan, records: &[TrialRecord]) -> Vec<SweepRow> {
    let joint = records.iter().filter(|r| r.all_feasible()).count();
    plan.cells()
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            let feasible = records.iter().filter(|r| r.results[k].status.is_feasible()).count();
            SweepRow {
                scheme: cell.scheme,
                beta: cell.beta,
                gamma_db: cell.gamma_db,
                trials: records.len(),
                feasible_trials: feasible,
                outage: (records.len() - feasible) as f64 / records.len() as f64,
                mean_sum_power_w: mean(records.iter().filter_map(|r| r.results[k].sum_power_w)),
                joint_feasible_trials: joint,
            }
        })
        .collect()
}

/// Mean sum power per cell restricted to trials feasible in every cell of
/// the plan.
pub fn sum_power_table(plan: &ExperimentPlan, records: &[TrialRecord]) -> Vec<SweepRow> {
    let joint: Vec<&TrialRecord> = records.iter().filter(|r| r.all_feasible()).collect();
    plan.cells()
        .iter()
        .enumerate()
        .map(|(k, cell)| {
            let feasible = records.iter().filter(|r| r.results[k].status.is_feasible()).count();
            SweepRow {
                scheme: cell.scheme,
                beta: cell.beta,
                gamma_db: cell.gamma_db,
                trials: records.len(),
                feasible_trials: joint.len(),
                outage: (records.len() - feasible) as f64 / records.len() as f64,
                mean_sum_power_w: mean(joint.iter().filter_map(|r| r.results[k].sum_power_w)),
                joint_feasible_trials: joint.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResults {
    pub records: Vec<TrialRecord>,
    pub outage: Vec<SweepRow>,
    pub sum_power: Vec<SweepRow>,
}

impl MonteCarloResults {
    pub fn joint_feasible_trials(&self) -> usize {
        self.records.iter().filter(|r| r.all_feasible()).count()
    }
}

/// Runs the trials once and builds both tables.
pub fn run_monte_carlo(plan: &ExperimentPlan) -> Result<MonteCarloResults> {
    let records = run_trials(plan)?;
    Ok(MonteCarloResults {
        outage: outage_table(plan, &records),
        sum_power: sum_power_table(plan, &records),
        records,
    })
}

pub fn run_outage_sweep(plan: &ExperimentPlan) -> Result<Vec<SweepRow>> {
    Ok(outage_table(plan, &run_trials(plan)?))
}

pub fn run_sum_power_sweep(plan: &ExperimentPlan) -> Result<Vec<SweepRow>> {
    Ok(sum_power_table(plan, &run_trials(plan)?))
}

pub const TABLE_COLUMNS: [&str; 9] = [
    "scheme",
    "beta",
    "gamma_min_db",
    "trials",
    "feasible_trials",
    "outage",
    "mean_sum_power_dbm",
    "mean_sum_power_watts",
    "joint_feasible_trials",
];

/// Writes a result table as CSV at full precision. An empty averaging set
/// leaves both power columns blank.
pub fn write_table_csv<W: Write>(rows: &[SweepRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TABLE_COLUMNS)?;
    for row in rows {
        w.write_record(&[
            row.scheme.as_str().to_string(),
            row.beta.to_string(),
            row.gamma_db.to_string(),
            row.trials.to_string(),
            row.feasible_trials.to_string(),
            row.outage.to_string(),
            row.mean_sum_power_dbm().map_or(String::new(), |v| v.to_string()),
            row.mean_sum_power_w.map_or(String::new(), |v| v.to_string()),
            row.joint_feasible_trials.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceProbe {
    /// Seed of the feasible instance that was traced.
    pub seed: u64,
    /// Seeds tried first and rejected as infeasible.
    pub skipped: Vec<u64>,
    pub outcome: SolveOutcome,
    pub trace: ConvergenceTrace,
}

/// Traces the distributed solver on the first feasible drop at or after
/// `seed`, giving up after `max_attempts` drops.
pub fn run_convergence_probe(
    params: &SystemParams,
    gamma_db: f64,
    seed: u64,
    fading: FadingMode,
    opts: &DistributedOptions,
    max_attempts: usize,
) -> Result<ConvergenceProbe> {
    let params = params.clone().with_sinr_target_db(gamma_db);
    params.validate()?;
    let mut skipped = Vec::new();
    for k in 0..max_attempts as u64 {
        let s = seed.wrapping_add(k);
        let channel = ChannelRealization::draw(&params, s, fading)?;
        let (outcome, trace) = solve_distributed(&channel, &params, Scheme::Noma, opts)?;
        if outcome.is_feasible() {
            return Ok(ConvergenceProbe {
                seed: s,
                skipped,
                outcome,
                trace,
            });
        }
        skipped.push(s);
    }
    Err(Error::InvalidParams(format!(
        "no feasible drop found in {max_attempts} seeds starting at {seed}"
    )))
}
