//! Path ensembles of the solver and the statistics built on them.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{brusselator_energies, trajectory_energy_bound, BrusselatorEnergies};
use crate::error::{Error, Result};
use crate::model::{BuiltinModel, ModelParams, ReactionModel};
use crate::noise::{BrownianDriver, DiffusionTensor, TransportNoise};
use crate::solver::{noise_dimension, positivity_report, simulate, SolverConfig, Trajectory};
use crate::stats::{mean, stable_sum, std_error, variance, wilson_interval, Z95};
use crate::torus::{lzeta_power, Field, Grid, SystemState};

/// Initial data, one entry per component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Constant {
        value: Vec<f64>,
    },
    /// `offset_i + amplitude_i sin(2 pi mode x_1)`.
    Sine {
        amplitude: Vec<f64>,
        #[serde(default)]
        offset: Vec<f64>,
        #[serde(default = "default_mode")]
        mode: u32,
    },
}

fn default_mode() -> u32 {
    1
}

impl InitialData {
    pub fn build(&self, grid: Grid, ell: usize) -> Result<SystemState> {
        let pick = |v: &[f64], i: usize, default: f64| -> Result<f64> {
            match v.len() {
                0 => Ok(default),
                1 => Ok(v[0]),
                n if n == ell => Ok(v[i]),
                n => Err(Error::DimensionMismatch {
                    what: "initial data entries",
                    expected: ell,
                    got: n,
                }),
            }
        };
        let comps = (0..ell)
            .map(|i| -> Result<Field> {
                Ok(match self {
                    InitialData::Constant { value } => Field::constant(grid, pick(value, i, 0.0)?),
                    InitialData::Sine {
                        amplitude,
                        offset,
                        mode,
                    } => {
                        let a = pick(amplitude, i, 0.0)?;
                        let o = pick(offset, i, 0.0)?;
                        let m = *mode as f64;
                        Field::from_fn(grid, |x| o + a * (2.0 * PI * m * x[0]).sin())
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SystemState::new(comps, 0.0)
    }
}

/// Fully built inputs of a simulation.
pub struct Setup {
    pub model: BuiltinModel,
    pub noise: TransportNoise,
    pub a: DiffusionTensor,
    pub u0: SystemState,
}

impl Setup {
    pub fn new(model: BuiltinModel, noise: TransportNoise, a: DiffusionTensor, u0: SystemState) -> Result<Self> {
        if u0.ell() != model.ell() || a.ell() != model.ell() {
            return Err(Error::DimensionMismatch {
                what: "components",
                expected: model.ell(),
                got: u0.ell().min(a.ell()),
            });
        }
        if u0.grid() != noise.grid() {
            return Err(Error::GridMismatch("initial data and noise grids differ".into()));
        }
        Ok(Self { model, noise, a, u0 })
    }

    pub fn grid(&self) -> &Grid {
        self.noise.grid()
    }

    pub fn noise_dimension(&self) -> usize {
        noise_dimension(&self.model, &self.noise)
    }

    /// Runs one path from `u0` with Brownian stream `(seed, 0)`.
    pub fn run_path(&self, u0: &SystemState, seed: u64, solver: &SolverConfig) -> Result<Trajectory> {
        let mut drv = BrownianDriver::new(self.noise_dimension(), seed, 0);
        simulate(u0, &self.model, &self.noise, &self.a, &mut drv, solver)
    }
}

fn default_tol_pos() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Norm exponent for the tail-bound right-hand side; defaults to `q0`.
    #[serde(default)]
    pub zeta0: Option<f64>,
    #[serde(default = "default_tol_pos")]
    pub tol_pos: f64,
}

impl EnsembleConfig {
    pub fn new(n_paths: usize, base_seed: u64) -> Self {
        Self {
            n_paths,
            base_seed,
            zeta0: None,
            tol_pos: default_tol_pos(),
        }
    }
}

/// `q0 = max(d (h - 1) / 2, 2)`.
pub fn q0(dim: usize, h: f64) -> f64 {
    (dim as f64 * (h - 1.0) / 2.0).max(2.0)
}

/// Terminal diagnostics of one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSummary {
    pub seed: u64,
    pub blown_up: bool,
    pub blowup_time: Option<f64>,
    /// `sup_t sum_i ||u_i||_zeta^zeta`.
    pub sup_lzeta: f64,
    pub terminal_lzeta: f64,
    pub total_dissipation: f64,
    /// `sup_t sum_i ||u_i||_{zeta0}^{zeta0}`.
    pub sup_lzeta0: f64,
    pub energy_bound: f64,
    pub min_values: Vec<f64>,
    pub violation_fraction: Vec<f64>,
    pub brusselator: Option<BrusselatorEnergies>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub zeta: f64,
    pub zeta0: f64,
    pub paths: Vec<PathSummary>,
    pub blowup_count: usize,
    /// Record times shared by all paths that did not blow up.
    pub times: Vec<f64>,
    /// Mean over surviving paths of `sum_i ||u_i(t)||_zeta^zeta` at each record time.
    pub mean_lzeta: Vec<f64>,
    /// Mean accumulated dissipation at each record time.
    pub mean_dissipation: Vec<f64>,
    pub mean_sup_lzeta: f64,
    pub var_sup_lzeta: f64,
    pub mean_total_dissipation: f64,
    pub var_total_dissipation: f64,
}

/// Runs `cfg.n_paths` paths in parallel, path `j` seeded with `base_seed + j`.
pub fn run_ensemble(setup: &Setup, solver: &SolverConfig, cfg: &EnsembleConfig) -> Result<EnsembleStats> {
    if cfg.n_paths < 2 {
        return Err(Error::InvalidArgument(format!("n_paths must be >= 2 (got {})", cfg.n_paths)));
    }
    let q = q0(setup.grid().dim(), setup.model.growth_h());
    let zeta0 = cfg.zeta0.unwrap_or(q);
    if zeta0 < q {
        return Err(Error::InvalidArgument(format!("zeta0 = {zeta0} is below q0 = {q}")));
    }
    solver.validate()?;
    let brusselator = matches!(setup.model.params(), ModelParams::Brusselator { .. });
    let results: Vec<(PathSummary, Curve)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|j| -> Result<_> {
            let seed = cfg.base_seed.wrapping_add(j as u64);
            let traj = setup.run_path(&setup.u0, seed, solver)?;
            summarize(&traj, seed, zeta0, cfg.tol_pos, brusselator)
        })
        .collect::<Result<Vec<_>>>()?;
    let blowup_count = results.iter().filter(|(p, _)| p.blown_up).count();
    let survivors: Vec<&Vec<(f64, f64, f64)>> = results.iter().filter(|(p, _)| !p.blown_up).map(|(_, c)| c).collect();
    let (times, mean_lzeta, mean_dissipation) = match survivors.first() {
        Some(first) => {
            let len = survivors.iter().map(|c| c.len()).min().unwrap_or(0);
            let times: Vec<f64> = first.iter().take(len).map(|r| r.0).collect();
            let ml = (0..len)
                .map(|k| mean(&survivors.iter().map(|c| c[k].1).collect::<Vec<_>>()))
                .collect();
            let md = (0..len)
                .map(|k| mean(&survivors.iter().map(|c| c[k].2).collect::<Vec<_>>()))
                .collect();
            (times, ml, md)
        }
        None => (Vec::new(), Vec::new(), Vec::new()),
    };
    let paths: Vec<PathSummary> = results.into_iter().map(|(p, _)| p).collect();
    let sups: Vec<f64> = paths.iter().map(|p| p.sup_lzeta).collect();
    let diss: Vec<f64> = paths.iter().map(|p| p.total_dissipation).collect();
    Ok(EnsembleStats {
        zeta: solver.zeta,
        zeta0,
        blowup_count,
        times,
        mean_lzeta,
        mean_dissipation,
        mean_sup_lzeta: mean(&sups),
        var_sup_lzeta: variance(&sups),
        mean_total_dissipation: mean(&diss),
        var_total_dissipation: variance(&diss),
        paths,
    })
}

type Curve = Vec<(f64, f64, f64)>;

fn summarize(traj: &Trajectory, seed: u64, zeta0: f64, tol_pos: f64, brusselator: bool) -> Result<(PathSummary, Curve)> {
    let curve: Curve = traj
        .diagnostics
        .iter()
        .map(|r| (r.time, r.total_lzeta(), r.total_dissipation()))
        .collect();
    let mut sup0 = 0.0f64;
    for s in &traj.snapshots {
        let v: Vec<f64> = s
            .components()
            .iter()
            .map(|c| lzeta_power(c, zeta0))
            .collect::<Result<_>>()?;
        sup0 = sup0.max(stable_sum(&v));
    }
    let pos = positivity_report(traj, tol_pos);
    let blown = traj.blown_up;
    let inf_if = |v: f64| if blown { f64::INFINITY } else { v };
    let summary = PathSummary {
        seed,
        blown_up: blown,
        blowup_time: traj.blowup_time,
        sup_lzeta: inf_if(curve.iter().map(|c| c.1).fold(0.0, f64::max)),
        terminal_lzeta: inf_if(curve.last().map_or(0.0, |c| c.1)),
        total_dissipation: inf_if(curve.last().map_or(0.0, |c| c.2)),
        sup_lzeta0: inf_if(sup0),
        energy_bound: trajectory_energy_bound(traj)?,
        min_values: pos.min_value,
        violation_fraction: pos.violation_fraction,
        brusselator: if brusselator && !blown && !traj.snapshots.is_empty() {
            Some(brusselator_energies(traj)?)
        } else {
            None
        },
    };
    Ok((summary, curve))
}

/// Path functionals available for tail tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalId {
    SupLzeta,
    SupLzeta0,
    Dissipation,
    EnergyBound,
    E11,
    E12,
    E21,
    E22,
}

impl std::str::FromStr for FunctionalId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "sup_lzeta" | "sup-lzeta" => FunctionalId::SupLzeta,
            "sup_lzeta0" | "sup-lzeta0" => FunctionalId::SupLzeta0,
            "dissipation" => FunctionalId::Dissipation,
            "energy_bound" => FunctionalId::EnergyBound,
            "e11" => FunctionalId::E11,
            "e12" => FunctionalId::E12,
            "e21" => FunctionalId::E21,
            "e22" => FunctionalId::E22,
            other => return Err(Error::InvalidArgument(format!("unknown functional '{other}'"))),
        })
    }
}

impl FunctionalId {
    pub fn value(self, p: &PathSummary) -> Result<f64> {
        let bru = |k: usize| -> Result<f64> {
            if p.blown_up {
                return Ok(f64::INFINITY);
            }
            p.brusselator
                .map(|e| e.as_array()[k])
                .ok_or_else(|| Error::InvalidArgument("Brusselator energies need a Brusselator ensemble".into()))
        };
        Ok(match self {
            FunctionalId::SupLzeta => p.sup_lzeta,
            FunctionalId::SupLzeta0 => p.sup_lzeta0,
            FunctionalId::Dissipation => p.total_dissipation,
            FunctionalId::EnergyBound => p.energy_bound,
            FunctionalId::E11 => bru(0)?,
            FunctionalId::E12 => bru(1)?,
            FunctionalId::E21 => bru(2)?,
            FunctionalId::E22 => bru(3)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub gamma: f64,
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Empirical `P(functional > gamma)` with Wilson 95% intervals; blown-up paths exceed every level.
pub fn tail_probability(stats: &EnsembleStats, functional: FunctionalId, gamma_grid: &[f64]) -> Result<Vec<TailRow>> {
    if gamma_grid.is_empty() {
        return Err(Error::InvalidArgument("empty gamma grid".into()));
    }
    let values = stats
        .paths
        .iter()
        .map(|p| functional.value(p))
        .collect::<Result<Vec<_>>>()?;
    let n = values.len();
    Ok(gamma_grid
        .iter()
        .map(|&gamma| {
            let k = values.iter().filter(|v| **v > gamma).count();
            let (lo, hi) = wilson_interval(k, n, Z95);
            TailRow {
                gamma,
                p_hat: k as f64 / n as f64,
                ci_low: lo,
                ci_high: hi,
            }
        })
        .collect())
}

/// Geometric grid of `count` levels spanning the observed finite values of a functional.
pub fn gamma_grid(stats: &EnsembleStats, functional: FunctionalId, count: usize) -> Result<Vec<f64>> {
    let values: Vec<f64> = stats
        .paths
        .iter()
        .map(|p| functional.value(p))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .filter(|v| v.is_finite())
        .collect();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    if values.is_empty() || count < 2 {
        return Err(Error::InvalidArgument("need finite values and at least two levels".into()));
    }
    let a = (0.5 * lo).max(1e-12);
    let b = (1.5 * hi).max(2.0 * a);
    Ok((0..count)
        .map(|k| a * (b / a).powf(k as f64 / (count - 1) as f64))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DependenceRow {
    pub delta: f64,
    /// Mean over paths of `sup_t sum_i ||u_i - u_i^delta||_{L^q}`.
    pub mean_distance: f64,
    pub stderr: f64,
}

/// Fixed smooth perturbation `prod_j cos(2 pi x_j)` in every component.
pub fn perturbation(grid: Grid, ell: usize) -> Vec<Field> {
    let d = grid.dim();
    (0..ell)
        .map(|_| Field::from_fn(grid, |x| (0..d).map(|j| (2.0 * PI * x[j]).cos()).product()))
        .collect()
}

/// Paired runs from `u0` and `u0 + delta phi` sharing each path's Brownian stream.
pub fn continuous_dependence(
    setup: &Setup,
    solver: &SolverConfig,
    cfg: &EnsembleConfig,
    u0: &SystemState,
    deltas: &[f64],
    norm_q: f64,
) -> Result<Vec<DependenceRow>> {
    if cfg.n_paths == 0 {
        return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
    }
    if deltas.is_empty() {
        return Err(Error::InvalidArgument("no perturbation sizes given".into()));
    }
    let mut solver = solver.clone();
    solver.keep_snapshots = true;
    let phi = perturbation(*u0.grid(), u0.ell());
    let perturbed = |delta: f64| -> Result<SystemState> {
        let comps = u0
            .components()
            .iter()
            .zip(&phi)
            .map(|(u, p)| u.lincomb(1.0, p, delta))
            .collect::<Result<Vec<_>>>()?;
        SystemState::new(comps, u0.time)
    };
    let starts = deltas.iter().map(|&d| perturbed(d)).collect::<Result<Vec<_>>>()?;
    let per_path: Vec<Vec<f64>> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|j| -> Result<Vec<f64>> {
            let seed = cfg.base_seed.wrapping_add(j as u64);
            let base = setup.run_path(u0, seed, &solver)?;
            starts
                .iter()
                .map(|start| {
                    let other = setup.run_path(start, seed, &solver)?;
                    path_distance(&base, &other, norm_q)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(deltas
        .iter()
        .enumerate()
        .map(|(k, &delta)| {
            let col: Vec<f64> = per_path.iter().map(|r| r[k]).collect();
            DependenceRow {
                delta,
                mean_distance: mean(&col),
                stderr: if col.iter().all(|v| v.is_finite()) {
                    std_error(&col)
                } else {
                    f64::INFINITY
                },
            }
        })
        .collect())
}

/// `sup_t sum_i ||u_i(t) - v_i(t)||_{L^q}` over the common recorded instants.
pub fn path_distance(a: &Trajectory, b: &Trajectory, q: f64) -> Result<f64> {
    if a.blown_up || b.blown_up {
        return Ok(f64::INFINITY);
    }
    let mut sup = 0.0f64;
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        let mut s = 0.0;
        for (ua, ub) in sa.components().iter().zip(sb.components()) {
            let diff = ua.lincomb(1.0, ub, -1.0)?;
            s += lzeta_power(&diff, q)?.powf(1.0 / q);
        }
        sup = sup.max(s);
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyCertificate {
    /// Estimate over the full horizon `T`.
    pub n0_hat: f64,
    /// Estimate over `[0, T/2]`.
    pub n0_half: f64,
    pub pass: bool,
    pub diagnostic: String,
}

/// Relative change allowed between the `T/2` and `T` estimates.
pub const CERTIFICATE_STABILITY: f64 = 0.25;

/// `N0_hat = (sup_t mean E(t) + mean D(T)) / (1 + mean E(0))`, required to be
/// finite and stable between horizons `T/2` and `T`.
pub fn energy_bound_certificate(stats: &EnsembleStats, zeta: f64) -> Result<EnergyCertificate> {
    if (zeta - stats.zeta).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "ensemble energies were recorded at zeta = {}, not {zeta}",
            stats.zeta
        )));
    }
    if stats.blowup_count > 0 {
        return Ok(EnergyCertificate {
            n0_hat: f64::INFINITY,
            n0_half: f64::INFINITY,
            pass: false,
            diagnostic: format!("{} of {} paths blew up", stats.blowup_count, stats.paths.len()),
        });
    }
    let t_end = *stats
        .times
        .last()
        .ok_or_else(|| Error::InvalidArgument("ensemble has no records".into()))?;
    let e0 = stats.mean_lzeta[0];
    let estimate = |horizon: f64| {
        let idx: Vec<usize> = (0..stats.times.len())
            .filter(|&k| stats.times[k] <= horizon * (1.0 + 1e-12))
            .collect();
        let sup = idx.iter().map(|&k| stats.mean_lzeta[k]).fold(0.0, f64::max);
        let last = *idx.last().expect("first record is at t = 0");
        (sup + stats.mean_dissipation[last]) / (1.0 + e0)
    };
    let full = estimate(t_end);
    let half = estimate(0.5 * t_end);
    let stable = if full == 0.0 && half == 0.0 {
        true
    } else {
        (full - half).abs() <= CERTIFICATE_STABILITY * half.abs().max(f64::MIN_POSITIVE)
    };
    let pass = full.is_finite() && stable;
    Ok(EnergyCertificate {
        n0_hat: full,
        n0_half: half,
        pass,
        diagnostic: if pass {
            "finite and stable".into()
        } else if !full.is_finite() {
            "non-finite estimate".into()
        } else {
            format!("estimate changed from {half} at T/2 to {full} at T")
        },
    })
}
