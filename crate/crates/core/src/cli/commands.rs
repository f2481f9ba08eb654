use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::channel::ChannelRealization;
use crate::experiments::{run_convergence_probe, run_monte_carlo, write_table_csv, SchemeKind};
use crate::interference::{achieved_sinr, build_system, Scheme};
use crate::model::{linear_to_db, watts_to_dbm, GlobalIndexMap, SystemParams};
use crate::solvers::{solve_centralized, solve_distributed, SolveOutcome};

use super::config::RunConfig;
use super::{CommonArgs, SolveArgs};

/// Command-line values layered over the configuration file.
pub trait Overrides {
    fn resolve(&self, per_point: bool) -> Result<RunConfig>;
}

impl Overrides for CommonArgs {
    /// Loads the configuration and applies the flags. With `per_point`, the
    /// SINR and SIC flags set the single operating point in `[system]`;
    /// otherwise they replace the sweep lists in `[experiment]`.
    fn resolve(&self, per_point: bool) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path).with_context(|| format!("config {}", path.display()))?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.experiment.seed = seed;
        }
        if let Some(trials) = self.trials {
            config.experiment.trials = trials;
        }
        if let Some(scheme) = self.scheme {
            config.experiment.schemes = vec![scheme];
        }
        if let Some(mode) = self.oma_mode {
            config.experiment.oma_mode = mode;
        }
        if let Some(fading) = self.fading {
            config.experiment.fading = fading;
        }
        if per_point {
            if let Some(gamma) = single("--gamma-db", &self.gamma_db)? {
                config.system.sinr_target_db = gamma;
                config.system.sinr_target_db_per_user = None;
            }
            if let Some(beta) = single("--beta", &self.beta)? {
                config.system.sic_coefficient = beta;
                config.system.sic_coefficient_per_user = None;
            }
        } else {
            if !self.gamma_db.is_empty() {
                config.experiment.gamma_db = self.gamma_db.clone();
            }
            if !self.beta.is_empty() {
                config.experiment.betas = self.beta.clone();
            }
        }
        config.system_params()?;
        config.plan()?;
        Ok(config)
    }
}

fn single(flag: &str, values: &[f64]) -> Result<Option<f64>> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => bail!("{flag} takes a single value for this command"),
    }
}

#[derive(Debug, Clone)]
pub struct UserRow {
    pub cell: usize,
    pub user: usize,
    pub target_db: f64,
    pub centralized_dbm: Option<f64>,
    pub centralized_w: Option<f64>,
    pub distributed_dbm: Option<f64>,
    pub sinr_db: Option<f64>,
}

/// Everything `solve` prints.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub seed: u64,
    pub scheme: Scheme,
    pub centralized: SolveOutcome,
    pub distributed: SolveOutcome,
    pub users: Vec<UserRow>,
}

impl SolveReport {
    pub fn feasible(&self) -> bool {
        self.centralized.is_feasible()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "scheme: {}", self.scheme.name());
        let _ = writeln!(
            out,
            "{:>4} {:>4} {:>10} {:>16} {:>14} {:>16} {:>10}",
            "cell", "user", "target_db", "centralized_dbm", "centralized_w", "distributed_dbm", "sinr_db"
        );
        let cell = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        for row in &self.users {
            let _ = writeln!(
                out,
                "{:>4} {:>4} {:>10.4} {:>16} {:>14} {:>16} {:>10}",
                row.cell + 1,
                row.user + 1,
                row.target_db,
                cell(row.centralized_dbm),
                row.centralized_w.map_or("-".to_string(), |w| format!("{w:.6e}")),
                cell(row.distributed_dbm),
                cell(row.sinr_db),
            );
        }
        if let Some(p) = &self.centralized.powers {
            let total = p.total_watts();
            let _ = writeln!(out, "total power: {:.6e} W ({:.4} dBm)", total, watts_to_dbm(total));
        }
        let rho = self.centralized.diagnostics.spectral_radius;
        let _ = writeln!(out, "spectral radius: {}", rho.map_or("-".to_string(), |r| format!("{r:.6}")));
        let _ = writeln!(out, "status: {}{}", self.centralized.status, reason(&self.centralized));
        let _ = writeln!(
            out,
            "distributed status: {} after {} iterations",
            self.distributed.status, self.distributed.diagnostics.iterations
        );
        out
    }
}

fn reason(outcome: &SolveOutcome) -> String {
    use crate::solvers::SolveStatus::*;
    match outcome.status {
        Feasible => String::new(),
        InfeasibleSpectral => match outcome.diagnostics.spectral_radius {
            Some(r) => format!(" (spectral radius {r:.6} is not below 1)"),
            None => " (interference matrix is singular)".to_string(),
        },
        InfeasiblePower => " (a required power exceeds its cap)".to_string(),
        InfeasibleNegative => " (solve produced a negative power)".to_string(),
        NotConverged => " (iteration budget exhausted)".to_string(),
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<SolveReport> {
    let config = args.common.resolve(true)?;
    let params = config.system_params()?;
    let seed = config.experiment.seed;
    let scheme = args
        .common
        .scheme
        .unwrap_or(SchemeKind::Noma)
        .with_mode(config.experiment.oma_mode);
    let channel = ChannelRealization::draw(&params, seed, config.experiment.fading)?;
    let system = build_system(&channel, &params, scheme)?;
    let centralized = solve_centralized(&system, &config.centralized_options())?;
    let (distributed, _) = solve_distributed(&channel, &params, scheme, &config.distributed_options())?;

    if let Some(path) = &args.dump_channel {
        channel.write_dump(create(path)?)?;
    }
    if let Some(path) = &args.dump_matrix {
        system.write_matrix_dump(create(path)?)?;
    }
    if let Some(path) = &args.dump_powers {
        write_powers(path, &centralized, channel.index_map())?;
    }

    let sinr = match &centralized.powers {
        Some(p) => Some(achieved_sinr(&channel, &params, scheme, p)?),
        None => None,
    };
    let map = channel.index_map();
    let users = (0..map.total_users())
        .map(|i| {
            let (cell, user) = map.locate(i)?;
            Ok(UserRow {
                cell,
                user,
                target_db: params.sinr_target_db.get(i),
                centralized_dbm: centralized.powers.as_ref().map(|p| watts_to_dbm(p.watts()[i])),
                centralized_w: centralized.powers.as_ref().map(|p| p.watts()[i]),
                distributed_dbm: distributed.powers.as_ref().map(|p| watts_to_dbm(p.watts()[i])),
                sinr_db: sinr.as_ref().map(|s| linear_to_db(s[i])),
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(SolveReport {
        seed,
        scheme,
        centralized,
        distributed,
        users,
    })
}

fn write_powers(path: &Path, outcome: &SolveOutcome, map: &GlobalIndexMap) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["cell", "user", "power_watts", "power_dbm"])?;
    if let Some(p) = &outcome.powers {
        for (i, &watts) in p.watts().iter().enumerate() {
            let (cell, user) = map.locate(i)?;
            w.write_record([
                (cell + 1).to_string(),
                (user + 1).to_string(),
                watts.to_string(),
                watts_to_dbm(watts).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create directory {}", dir.display()))?;
    Ok(dir.join(name))
}

#[derive(Serialize)]
struct RunInfo<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    oma_mode: &'a str,
    fading: &'a str,
    bs_layout: &'a str,
    oma_pairing: &'a str,
}

#[derive(Serialize)]
struct Metadata<'a> {
    run: RunInfo<'a>,
    config: &'a RunConfig,
}

fn write_metadata(dir: &Path, command: &str, config: &RunConfig) -> Result<PathBuf> {
    let meta = Metadata {
        run: RunInfo {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: config.experiment.seed,
            oma_mode: config.experiment.oma_mode.as_str(),
            fading: config.experiment.fading.as_str(),
            bs_layout: "regular-polygon-side-2r",
            oma_pairing: "sub-band-by-decoding-rank",
        },
        config,
    };
    let path = out_path(dir, "metadata.toml")?;
    let text = toml::to_string(&meta).context("cannot serialize metadata")?;
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn cmd_montecarlo(args: &CommonArgs) -> Result<String> {
    let config = args.resolve(false)?;
    let plan = config.plan()?;
    let results = run_monte_carlo(&plan)?;
    let outage = out_path(&args.out_dir, "outage.csv")?;
    write_table_csv(&results.outage, create(&outage)?)?;
    let sum_power = out_path(&args.out_dir, "sum_power.csv")?;
    write_table_csv(&results.sum_power, create(&sum_power)?)?;
    let meta = write_metadata(&args.out_dir, "montecarlo", &config)?;

    let mut out = String::new();
    let _ = writeln!(out, "trials: {}", plan.trials);
    let _ = writeln!(out, "jointly feasible trials: {}", results.joint_feasible_trials());
    for path in [&outage, &sum_power, &meta] {
        let _ = writeln!(out, "wrote {}", path.display());
    }
    Ok(out)
}

pub fn cmd_converge(args: &CommonArgs) -> Result<String> {
    let config = args.resolve(true)?;
    if config.system.sinr_target_db_per_user.is_some() {
        bail!("converge needs a uniform SINR target");
    }
    let params: SystemParams = config.system_params()?;
    let probe = run_convergence_probe(
        &params,
        config.system.sinr_target_db,
        config.experiment.seed,
        config.experiment.fading,
        &config.distributed_options(),
        config.solver.max_probe_attempts,
    )?;
    let trace = out_path(&args.out_dir, "convergence.csv")?;
    probe.trace.write_csv(create(&trace)?)?;
    let mut resolved = config.clone();
    resolved.experiment.seed = probe.seed;
    let meta = write_metadata(&args.out_dir, "converge", &resolved)?;

    let mut out = String::new();
    let _ = writeln!(out, "seed: {}", probe.seed);
    if !probe.skipped.is_empty() {
        let _ = writeln!(out, "skipped infeasible seeds: {:?}", probe.skipped);
    }
    let _ = writeln!(out, "iterations: {}", probe.trace.iterations());
    if let Some(eps) = probe.trace.sweep_epsilons().last() {
        let _ = writeln!(out, "final epsilon: {eps:e}");
    }
    let _ = writeln!(out, "wrote {}", trace.display());
    let _ = writeln!(out, "wrote {}", meta.display());
    Ok(out)
}
