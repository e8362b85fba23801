//! Subcommand implementations.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use srd_core::checker::{self, CoercivitySpec, Condition, ConditionId};
use srd_core::ensemble::{
    continuous_dependence, energy_bound_certificate, gamma_grid, q0, run_ensemble, tail_probability, FunctionalId,
};
use srd_core::gronwall::run_matrix;
use srd_core::model::{build_model, ReactionModel};
use srd_core::noise::build_from_spec;
use srd_core::solver::positivity_report;

use crate::config::{GronwallConfig, RunConfig, TailConfig};
use crate::output::{self, Meta};

/// Result class of a successful invocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    VerdictFail,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::VerdictFail => 1,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Outcome::Success
        } else {
            Outcome::VerdictFail
        }
    }
}

/// Overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
    }
}

/// Writes a line to stdout; a closed pipe is not an error.
fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{text}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn meta(cfg: &RunConfig, command: &str) -> Meta {
    Meta::new(command, cfg.seed, cfg.hash())
}

#[derive(Serialize)]
struct RandomShape {
    phi1: f64,
    psi1: f64,
    phi2: f64,
    pass: bool,
}

pub fn check(cfg: &RunConfig) -> Result<Outcome> {
    let check = cfg.check.clone().context("the [check] section is required")?;
    let grid = cfg.grid()?;
    let model = build_model(cfg.model.clone())?;
    let noise = build_from_spec(grid, &cfg.noise, model.ell())?;
    let a = cfg.diffusion()?;
    let meta = meta(cfg, "check");
    let path = cfg.output.join("check.json");
    if check.condition == ConditionId::Random {
        let psi2 = check.psi2.context("random coercivity needs psi2")?;
        let (phi1, psi1, phi2) = checker::check_random_coercivity_shape(check.zeta, grid.dim(), psi2)?;
        let r = RandomShape {
            phi1,
            psi1,
            phi2,
            pass: true,
        };
        output::write_json(&path, &meta, &r)?;
        emit(&output::json_string(&meta, &r)?)?;
        return Ok(Outcome::Success);
    }
    let spec = CoercivitySpec {
        zeta: check.zeta,
        epsilon: check.epsilon,
        bx: check.state_box(model.ell())?,
        samples: check.samples,
        weights_alpha: check.weights_alpha.clone(),
        seed: cfg.seed,
    };
    let cond = match check.condition {
        ConditionId::ScalarPointwise => Condition::ScalarPointwise {
            model: &model,
            noise: &noise,
            a: &a,
        },
        ConditionId::ScalarSmooth => Condition::ScalarSmooth {
            model: &model,
            noise: &noise,
            a: &a,
        },
        ConditionId::System => Condition::System {
            model: &model,
            noise: &noise,
            a: &a,
        },
        ConditionId::StrongDissipative => Condition::StrongDissipative { model: &model },
        ConditionId::GrowthEnvelope => Condition::GrowthEnvelope {
            model: &model,
            envelope: check.envelope.context("growth_envelope needs an envelope")?,
            noise: &noise,
            a: &a,
        },
        ConditionId::Random => unreachable!("handled above"),
    };
    let report = checker::check(&cond, &spec)?;
    output::write_json(&path, &meta, &report)?;
    emit(&output::json_string(&meta, &report)?)?;
    Ok(Outcome::from_pass(report.verdict.passed()))
}

#[derive(Serialize)]
struct RunSummary {
    blown_up: bool,
    blowup_time: Option<f64>,
    records: usize,
    min_value_per_component: Vec<f64>,
    violation_fraction: Vec<f64>,
    energy_bound: f64,
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let setup = cfg.setup()?;
    let mut solver = cfg.solver()?;
    solver.keep_snapshots = true;
    let traj = setup.run_path(&setup.u0, cfg.seed, &solver)?;
    let meta = meta(cfg, "run");
    output::energy_csv(&cfg.output.join("diagnostics.csv"), &meta, &traj)?;
    if cfg.snapshots {
        output::write_snapshots(&cfg.output.join("snapshots"), &meta, &traj)?;
    }
    let pos = positivity_report(&traj, cfg.ensemble.as_ref().map_or(1e-3, |e| e.tol_pos));
    let summary = RunSummary {
        blown_up: traj.blown_up,
        blowup_time: traj.blowup_time,
        records: traj.diagnostics.len(),
        min_value_per_component: pos.min_value,
        violation_fraction: pos.violation_fraction,
        energy_bound: srd_core::energy::trajectory_energy_bound(&traj)?,
    };
    output::write_json(&cfg.output.join("run.json"), &meta, &summary)?;
    emit(&output::json_string(&meta, &summary)?)?;
    Ok(Outcome::Success)
}

fn tail_levels(cfg: &RunConfig) -> Result<(FunctionalId, TailConfig)> {
    let tail = cfg.tail.clone().unwrap_or_default();
    Ok((FunctionalId::from_str(&tail.functional)?, tail))
}

#[derive(Serialize)]
struct EnsembleSummary {
    n_paths: usize,
    blowup_count: usize,
    zeta: f64,
    zeta0: f64,
    mean_sup_lzeta: f64,
    var_sup_lzeta: f64,
    mean_total_dissipation: f64,
    var_total_dissipation: f64,
    certificate: srd_core::ensemble::EnergyCertificate,
}

pub fn ensemble(cfg: &RunConfig) -> Result<Outcome> {
    let setup = cfg.setup()?;
    let solver = cfg.solver()?;
    let ens = cfg.ensemble()?;
    let stats = run_ensemble(&setup, &solver, &ens)?;
    let meta = meta(cfg, "ensemble");
    output::paths_csv(&cfg.output.join("ensemble_paths.csv"), &meta, &stats)?;
    let (functional, tail) = tail_levels(cfg)?;
    let levels = if tail.gammas.is_empty() {
        gamma_grid(&stats, functional, tail.levels)?
    } else {
        tail.gammas.clone()
    };
    let rows = tail_probability(&stats, functional, &levels)?;
    output::tail_csv(&cfg.output.join("tail.csv"), &meta, &tail.functional, &rows)?;
    let summary = EnsembleSummary {
        n_paths: stats.paths.len(),
        blowup_count: stats.blowup_count,
        zeta: stats.zeta,
        zeta0: stats.zeta0,
        mean_sup_lzeta: stats.mean_sup_lzeta,
        var_sup_lzeta: stats.var_sup_lzeta,
        mean_total_dissipation: stats.mean_total_dissipation,
        var_total_dissipation: stats.var_total_dissipation,
        certificate: energy_bound_certificate(&stats, stats.zeta)?,
    };
    output::write_json(&cfg.output.join("ensemble.json"), &meta, &summary)?;
    emit(&output::json_string(&meta, &summary)?)?;
    Ok(Outcome::Success)
}

fn dependence_rows(cfg: &RunConfig) -> Result<Vec<srd_core::ensemble::DependenceRow>> {
    let setup = cfg.setup()?;
    let solver = cfg.solver()?;
    let dep = cfg.depcheck.clone().unwrap_or(crate::config::DepcheckConfig {
        deltas: vec![0.1, 0.01, 0.001],
        norm_q: None,
        n_paths: None,
    });
    let mut ens = cfg
        .ensemble()
        .unwrap_or_else(|_| srd_core::ensemble::EnsembleConfig::new(8, cfg.seed));
    if let Some(n) = dep.n_paths {
        ens.n_paths = n;
    }
    let q = dep
        .norm_q
        .unwrap_or_else(|| q0(setup.grid().dim(), setup.model.growth_h()));
    Ok(continuous_dependence(&setup, &solver, &ens, &setup.u0, &dep.deltas, q)?)
}

pub fn depcheck(cfg: &RunConfig) -> Result<Outcome> {
    let rows = dependence_rows(cfg)?;
    let meta = meta(cfg, "depcheck");
    output::dependence_csv(&cfg.output.join("dependence.csv"), &meta, &rows)?;
    emit(&output::json_string(&meta, &rows)?)?;
    Ok(Outcome::Success)
}

pub fn gronwall(cfg: Option<&RunConfig>, seed: u64, out: &Path) -> Result<Outcome> {
    let g = cfg.and_then(|c| c.gronwall.clone()).unwrap_or_default();
    let GronwallConfig { n_paths, dt, slack } = g;
    let rows = run_matrix(n_paths, dt, seed, slack)?;
    let hash = cfg.map_or_else(|| "none".to_string(), RunConfig::hash);
    let meta = Meta::new("gronwall", seed, hash);
    output::gronwall_csv(&out.join("gronwall.csv"), &meta, &rows)?;
    let failed = rows.iter().filter(|r| !r.check.pass).count();
    emit(&format!("gronwall: {} checks, {} failed", rows.len(), failed))?;
    Ok(Outcome::from_pass(failed == 0))
}

/// Plot-ready data kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum PlotKind {
    Energy,
    Raster,
    Tail,
    Dependence,
}

pub fn plotdata(cfg: &RunConfig, kind: PlotKind, component: usize) -> Result<Outcome> {
    let meta = meta(cfg, "plotdata");
    match kind {
        PlotKind::Energy | PlotKind::Raster => {
            let setup = cfg.setup()?;
            let mut solver = cfg.solver()?;
            solver.keep_snapshots = true;
            let traj = setup.run_path(&setup.u0, cfg.seed, &solver)?;
            if kind == PlotKind::Energy {
                output::energy_csv(&cfg.output.join("energy_curve.csv"), &meta, &traj)?;
            } else {
                output::raster_csv(&cfg.output.join("raster.csv"), &meta, &traj, component)?;
            }
        }
        PlotKind::Tail => {
            let setup = cfg.setup()?;
            let stats = run_ensemble(&setup, &cfg.solver()?, &cfg.ensemble()?)?;
            let (functional, tail) = tail_levels(cfg)?;
            let levels = if tail.gammas.is_empty() {
                gamma_grid(&stats, functional, tail.levels)?
            } else {
                tail.gammas.clone()
            };
            let rows = tail_probability(&stats, functional, &levels)?;
            output::tail_csv(&cfg.output.join("tail_table.csv"), &meta, &tail.functional, &rows)?;
        }
        PlotKind::Dependence => {
            let rows = dependence_rows(cfg)?;
            output::dependence_csv(&cfg.output.join("dependence_table.csv"), &meta, &rows)?;
        }
    }
    Ok(Outcome::Success)
}

/// Thread count from `--threads`, then `SRD_THREADS`, else the rayon default.
pub fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SRD_THREADS") {
            Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("invalid SRD_THREADS '{v}'"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be >= 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    Ok(())
}
