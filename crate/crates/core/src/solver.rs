//! Semi-implicit pseudo-spectral time stepping.
//!
//! One step for component `i` reads
//! `u^{m+1} = (I - dt A_i)^{-1} [u^m + dt (div F_i + f_i)(u^m) + T_i(u^m) + sum_n g_{n,i}(u^m) dW^n]`
//! with `A_i = div(a_i grad)` applied as a Fourier multiplier and
//! `T_i(u) = sum_n dW^n (b_{n,i} . grad) u`. The midpoint variant replaces
//! `T_i(u)` by `T_i(u + T_i(u)/2)`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::energy::{record_energies, EnergyRecord};
use crate::error::{Error, Result};
use crate::model::ReactionModel;
use crate::noise::{dot_velocity, stratonovich_correction, DiffusionTensor, IncrementSource, TransportNoise};
use crate::torus::{with_spectral, Field, Grid, Spectral, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Scheme {
    #[default]
    #[serde(rename = "semi_implicit_em")]
    SemiImplicitEM,
    #[serde(rename = "stratonovich_midpoint")]
    StratonovichMidpoint,
}

fn default_blowup() -> f64 {
    1e8
}

fn default_true() -> bool {
    true
}

fn default_record_every() -> usize {
    10
}

fn default_zeta() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    #[serde(default = "default_true")]
    pub dealias: bool,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    /// Exponent of the recorded `L^zeta` energies.
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    /// Adds the Ito correction of the transport noise to `a` (Ito scheme only).
    #[serde(default)]
    pub ito_correction: bool,
    /// Keep the recorded states in the trajectory.
    #[serde(default = "default_true")]
    pub keep_snapshots: bool,
}

impl SolverConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            scheme: Scheme::SemiImplicitEM,
            blowup_threshold: default_blowup(),
            dealias: true,
            record_every: default_record_every(),
            zeta: default_zeta(),
            ito_correction: false,
            keep_snapshots: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be positive (got {})", self.dt));
        }
        if !(self.t_end.is_finite() && self.dt <= self.t_end) {
            problems.push(format!("t_end must be finite and >= dt (got {})", self.t_end));
        }
        if !(self.blowup_threshold > 0.0) {
            problems.push(format!("blowup_threshold must be positive (got {})", self.blowup_threshold));
        }
        if self.record_every == 0 {
            problems.push("record_every must be >= 1".into());
        }
        if !(self.zeta >= 2.0 && self.zeta.is_finite()) {
            problems.push(format!("zeta must be >= 2 (got {})", self.zeta));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(problems.join("; ")))
        }
    }

    /// Number of steps, `round(t_end / dt)`.
    pub fn n_steps(&self) -> u64 {
        ((self.t_end / self.dt).round() as u64).max(1)
    }
}

/// Recorded path of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<SystemState>,
    pub diagnostics: Vec<EnergyRecord>,
    pub blown_up: bool,
    pub blowup_time: Option<f64>,
    /// Minimum over every step and cell, per component.
    pub min_value_per_component: Vec<f64>,
}

/// Number of Brownian motions driving the system.
pub fn noise_dimension(model: &dyn ReactionModel, noise: &TransportNoise) -> usize {
    noise.n_modes().max(model.n_g_modes())
}

/// Precomputed operators for repeated steps with fixed data.
pub struct Stepper<'a> {
    model: &'a dyn ReactionModel,
    noise: &'a TransportNoise,
    grid: Grid,
    dt: f64,
    scheme: Scheme,
    dealias: bool,
    /// `1 / (1 + dt (2 pi k)^T a_i (2 pi k))` per component.
    multipliers: Vec<Vec<f64>>,
    /// Explicit part `C_i(x) - mean(C_i)` of an x-dependent Ito correction.
    fluctuations: Vec<Option<Vec<[[f64; 3]; 3]>>>,
    keep: Vec<bool>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        model: &'a dyn ReactionModel,
        noise: &'a TransportNoise,
        a: &DiffusionTensor,
        cfg: &SolverConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let grid = *noise.grid();
        let ell = model.ell();
        if a.ell() != ell {
            return Err(Error::DimensionMismatch {
                what: "diffusion components",
                expected: ell,
                got: a.ell(),
            });
        }
        if a.dim() != grid.dim() {
            return Err(Error::DimensionMismatch {
                what: "diffusion dimension",
                expected: grid.dim(),
                got: a.dim(),
            });
        }
        let add_correction = cfg.ito_correction && cfg.scheme == Scheme::SemiImplicitEM && !noise.is_zero();
        let mut multipliers = Vec::with_capacity(ell);
        let mut fluctuations = Vec::with_capacity(ell);
        let sp = Spectral::new(grid);
        for i in 0..ell {
            let mut ai = *a.matrix(i);
            let mut fluct = None;
            if add_correction {
                let c = stratonovich_correction(noise, i)?;
                let mean = c.mean();
                for j in 0..3 {
                    for k in 0..3 {
                        ai[j][k] += mean[j][k];
                    }
                }
                if c.max_fluctuation() > 1e-14 {
                    fluct = Some(
                        (0..c.len())
                            .map(|idx| {
                                let mut m = *c.at(idx);
                                for j in 0..3 {
                                    for k in 0..3 {
                                        m[j][k] -= mean[j][k];
                                    }
                                }
                                m
                            })
                            .collect(),
                    );
                }
            }
            multipliers.push(
                (0..grid.len())
                    .map(|idx| 1.0 / (1.0 + cfg.dt * sp.quadratic_symbol(idx, &ai)))
                    .collect(),
            );
            fluctuations.push(fluct);
        }
        let keep = (0..grid.len()).map(|idx| !cfg.dealias || sp.keeps_mode(idx)).collect();
        Ok(Self {
            model,
            noise,
            grid,
            dt: cfg.dt,
            scheme: cfg.scheme,
            dealias: cfg.dealias,
            multipliers,
            fluctuations,
            keep,
        })
    }

    pub fn noise_dimension(&self) -> usize {
        noise_dimension(self.model, self.noise)
    }

    /// Advances `state` by one step with Brownian increments `dw`.
    pub fn advance(&self, state: &SystemState, dw: &[f64]) -> Result<SystemState> {
        let ell = self.model.ell();
        if state.ell() != ell {
            return Err(Error::DimensionMismatch {
                what: "state components",
                expected: ell,
                got: state.ell(),
            });
        }
        if state.grid() != &self.grid {
            return Err(Error::GridMismatch("state and noise grids differ".into()));
        }
        if dw.len() < self.noise_dimension() {
            return Err(Error::DimensionMismatch {
                what: "Brownian increments",
                expected: self.noise_dimension(),
                got: dw.len(),
            });
        }
        if !state.is_finite() {
            return Err(Error::NonFinite("solver state".into()));
        }
        let explicit = self.pointwise_terms(state, dw);
        let t = state.time;
        let components = with_spectral(&self.grid, |sp| -> Result<Vec<Field>> {
            (0..ell)
                .map(|i| self.advance_component(sp, state.component(i), i, explicit.0[i].clone(), &explicit.1[i], dw))
                .collect()
        })?;
        SystemState::new(components, t + self.dt)
    }

    /// `dt f + sum_n g_n dW^n` per component and, when present, the fluxes `F_i^j`.
    fn pointwise_terms(&self, state: &SystemState, dw: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>) {
        let ell = self.model.ell();
        let d = self.grid.dim();
        let n = self.grid.len();
        let n_g = self.model.n_g_modes();
        let has_flux = self.model.has_flux();
        let t = state.time;
        let mut out = vec![vec![0.0; n]; ell];
        let mut flux = if has_flux {
            vec![vec![vec![0.0; n]; d]; ell]
        } else {
            vec![Vec::new(); ell]
        };
        let mut y = vec![0.0; ell];
        let mut f = vec![0.0; ell];
        let mut g = vec![0.0; ell];
        let mut fl = vec![0.0; ell * d];
        for idx in 0..n {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = state.component(i).values()[idx];
            }
            let x = self.grid.coords(idx);
            self.model.eval_f(t, &x, &y, &mut f);
            for i in 0..ell {
                out[i][idx] = self.dt * f[i];
            }
            for (m, &w) in dw.iter().enumerate().take(n_g) {
                if w == 0.0 {
                    continue;
                }
                self.model.g_mode(t, &x, &y, m, &mut g);
                for i in 0..ell {
                    out[i][idx] += g[i] * w;
                }
            }
            if has_flux {
                self.model.eval_flux(t, &x, &y, d, &mut fl);
                for i in 0..ell {
                    for j in 0..d {
                        flux[i][j][idx] = fl[i * d + j];
                    }
                }
            }
        }
        (out, flux)
    }

    fn advance_component(
        &self,
        sp: &mut Spectral,
        u: &Field,
        i: usize,
        mut explicit: Vec<f64>,
        flux: &[Vec<f64>],
        dw: &[f64],
    ) -> Result<Field> {
        let n = self.grid.len();
        let d = self.grid.dim();
        let coeffs = sp.forward(u);
        let transport_on = !self.noise.is_zero() && dw[..self.noise.n_modes()].iter().any(|w| *w != 0.0);
        let fluct = self.fluctuations[i].as_ref();
        let grad = if transport_on || fluct.is_some() {
            Some(sp.gradient_from_spectrum(&coeffs))
        } else {
            None
        };
        if transport_on {
            let v = self.noise.velocity(&dw[..self.noise.n_modes()], i)?;
            let tu = dot_velocity(&v, grad.as_ref().expect("gradient computed"));
            if self.scheme == Scheme::StratonovichMidpoint {
                let ttu = dot_velocity(&v, &sp.gradient(&tu)?);
                for ((e, a), b) in explicit.iter_mut().zip(tu.values()).zip(ttu.values()) {
                    *e += a + 0.5 * b;
                }
            } else {
                for (e, a) in explicit.iter_mut().zip(tu.values()) {
                    *e += a;
                }
            }
        }
        if let Some(c) = fluct {
            let grad = grad.as_ref().expect("gradient computed");
            let q: Vec<Field> = (0..d)
                .map(|j| {
                    let vals = (0..n)
                        .map(|idx| (0..d).map(|k| c[idx][j][k] * grad[k].values()[idx]).sum::<f64>())
                        .collect();
                    Field::from_values(self.grid, vals)
                })
                .collect::<Result<_>>()?;
            let div = sp.divergence(&q)?;
            for (e, v) in explicit.iter_mut().zip(div.values()) {
                *e += self.dt * v;
            }
        }
        if !flux.is_empty() {
            let fields: Vec<Field> = flux
                .iter()
                .map(|vals| Field::from_values(self.grid, vals.clone()))
                .collect::<Result<_>>()?;
            let div = sp.divergence(&fields)?;
            for (e, v) in explicit.iter_mut().zip(div.values()) {
                *e += self.dt * v;
            }
        }
        let mut rhs = Vec::with_capacity(n);
        sp.forward_values(&explicit, &mut rhs);
        let mult = &self.multipliers[i];
        let mut next = vec![Complex64::default(); n];
        for idx in 0..n {
            let nl = if self.dealias && !self.keep[idx] {
                Complex64::default()
            } else {
                rhs[idx]
            };
            next[idx] = (coeffs[idx] + nl) * mult[idx];
        }
        Ok(sp.inverse(&next))
    }
}

/// One step with the increments of `driver` at `step_index`.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &SystemState,
    model: &dyn ReactionModel,
    noise: &TransportNoise,
    a: &DiffusionTensor,
    driver: &mut dyn IncrementSource,
    step_index: u64,
    cfg: &SolverConfig,
) -> Result<SystemState> {
    let stepper = Stepper::new(model, noise, a, cfg)?;
    let dw = increments(driver, stepper.noise_dimension(), step_index, cfg.dt)?;
    stepper.advance(state, &dw)
}

fn increments(driver: &mut dyn IncrementSource, needed: usize, step: u64, dt: f64) -> Result<Vec<f64>> {
    if needed == 0 {
        return Ok(Vec::new());
    }
    if driver.n_modes() < needed {
        return Err(Error::DimensionMismatch {
            what: "driver modes",
            expected: needed,
            got: driver.n_modes(),
        });
    }
    driver.increments(step, dt)
}

/// Runs `cfg.n_steps()` steps from `u0`. Blow-up ends the path and is reported
/// in the trajectory rather than as an error.
pub fn simulate(
    u0: &SystemState,
    model: &dyn ReactionModel,
    noise: &TransportNoise,
    a: &DiffusionTensor,
    driver: &mut dyn IncrementSource,
    cfg: &SolverConfig,
) -> Result<Trajectory> {
    let stepper = Stepper::new(model, noise, a, cfg)?;
    if !u0.is_finite() {
        return Err(Error::NonFinite("initial data".into()));
    }
    let needed = stepper.noise_dimension();
    let mut traj = Trajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        diagnostics: Vec::new(),
        blown_up: false,
        blowup_time: None,
        min_value_per_component: u0.components().iter().map(Field::min).collect(),
    };
    let record = |traj: &mut Trajectory, s: &SystemState| -> Result<()> {
        let prev = traj.diagnostics.last();
        let elapsed = prev.map_or(0.0, |p| s.time - p.time);
        let rec = record_energies(s, cfg.zeta, prev, elapsed)?;
        traj.diagnostics.push(rec);
        traj.times.push(s.time);
        if cfg.keep_snapshots {
            traj.snapshots.push(s.clone());
        }
        Ok(())
    };
    record(&mut traj, u0)?;
    let n_steps = cfg.n_steps();
    let mut state = u0.clone();
    state.time = u0.time;
    for m in 0..n_steps {
        let dw = increments(driver, needed, m, cfg.dt)?;
        let mut next = stepper.advance(&state, &dw)?;
        next.time = u0.time + (m + 1) as f64 * cfg.dt;
        if !next.is_finite() || next.max_abs() > cfg.blowup_threshold {
            traj.blown_up = true;
            traj.blowup_time = Some(next.time);
            break;
        }
        for (mn, c) in traj.min_value_per_component.iter_mut().zip(next.components()) {
            *mn = mn.min(c.min());
        }
        state = next;
        if (m + 1) % cfg.record_every as u64 == 0 || m + 1 == n_steps {
            record(&mut traj, &state)?;
        }
    }
    Ok(traj)
}

/// Per-component positivity summary of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub min_value: Vec<f64>,
    /// Fraction of recorded (cell, time) samples below `-tol`.
    pub violation_fraction: Vec<f64>,
}

/// Scans the recorded snapshots; the tolerance at each instant is
/// `tol_rel * max(1, ||u(t)||_inf)`.
pub fn positivity_report(traj: &Trajectory, tol_rel: f64) -> PositivityReport {
    let ell = traj.min_value_per_component.len();
    let mut min_value = traj.min_value_per_component.clone();
    let mut below = vec![0usize; ell];
    let mut total = 0usize;
    for s in &traj.snapshots {
        let tol = tol_rel * s.max_abs().max(1.0);
        total += s.grid().len();
        for (i, c) in s.components().iter().enumerate() {
            min_value[i] = min_value[i].min(c.min());
            below[i] += c.values().iter().filter(|v| **v < -tol).count();
        }
    }
    PositivityReport {
        min_value,
        violation_fraction: below
            .iter()
            .map(|&b| if total == 0 { 0.0 } else { b as f64 / total as f64 })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, ModelParams};
    use crate::noise::{build_kraichnan_noise, BrownianDriver};
    use std::f64::consts::PI;

    fn poly(f: Vec<f64>) -> crate::model::BuiltinModel {
        build_model(ModelParams::Polynomial {
            f,
            theta: vec![],
            g_power: 2.0,
            h: None,
        })
        .unwrap()
    }

    fn sine(grid: Grid) -> SystemState {
        SystemState::new(vec![Field::from_fn(grid, |x| (2.0 * PI * x[0]).sin())], 0.0).unwrap()
    }

    #[test]
    fn heat_step_multiplies_first_mode() {
        let grid = Grid::new(1, 32).unwrap();
        let nu = 0.3;
        let dt = 0.01;
        let a = DiffusionTensor::isotropic(1, &[nu]).unwrap();
        let noise = TransportNoise::none(grid);
        let model = poly(vec![0.0]);
        let mut drv = BrownianDriver::new(0, 1, 0);
        let next = step(&sine(grid), &model, &noise, &a, &mut drv, 0, &SolverConfig::new(dt, 1.0)).unwrap();
        let factor = 1.0 / (1.0 + 4.0 * PI * PI * nu * dt);
        for (v, w) in next.component(0).values().iter().zip(sine(grid).component(0).values()) {
            assert!((v - factor * w).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_terms_give_identity() {
        let grid = Grid::new(2, 16).unwrap();
        let a = DiffusionTensor::isotropic(2, &[1e-300]).unwrap();
        let u = SystemState::new(vec![Field::from_fn(grid, |x| (2.0 * PI * x[1]).cos() + 0.5)], 0.0).unwrap();
        let mut drv = BrownianDriver::new(0, 1, 0);
        let mut cfg = SolverConfig::new(0.1, 1.0);
        cfg.dealias = false;
        let next = step(&u, &poly(vec![0.0]), &TransportNoise::none(grid), &a, &mut drv, 0, &cfg).unwrap();
        for (v, w) in next.component(0).values().iter().zip(u.component(0).values()) {
            assert!((v - w).abs() < 1e-14);
        }
    }

    #[test]
    fn allen_cahn_fixed_point_at_zero() {
        let grid = Grid::new(1, 16).unwrap();
        let ac = build_model(ModelParams::AllenCahn { theta: vec![] }).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let mut drv = BrownianDriver::new(0, 1, 0);
        let traj = simulate(
            &SystemState::zeros(grid, 1),
            &ac,
            &TransportNoise::none(grid),
            &a,
            &mut drv,
            &SolverConfig::new(0.01, 0.5),
        )
        .unwrap();
        assert!(traj.snapshots.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn cubic_growth_blows_up_near_ode_time() {
        let grid = Grid::new(1, 8).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let u0 = SystemState::new(vec![Field::constant(grid, 5.0)], 0.0).unwrap();
        let mut drv = BrownianDriver::new(0, 1, 0);
        let traj = simulate(
            &u0,
            &poly(vec![0.0, 0.0, 0.0, 1.0]),
            &TransportNoise::none(grid),
            &a,
            &mut drv,
            &SolverConfig::new(1e-5, 0.1),
        )
        .unwrap();
        assert!(traj.blown_up);
        let t = traj.blowup_time.unwrap();
        assert!((t - 0.02).abs() <= 0.2 * 0.02, "blow-up at {t}");
        assert!(traj.times.iter().all(|s| *s < t));
    }

    #[test]
    fn allen_cahn_relaxes_from_large_constant() {
        let grid = Grid::new(1, 8).unwrap();
        let ac = build_model(ModelParams::AllenCahn { theta: vec![] }).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let u0 = SystemState::new(vec![Field::constant(grid, 5.0)], 0.0).unwrap();
        let mut drv = BrownianDriver::new(0, 1, 0);
        let traj = simulate(&u0, &ac, &TransportNoise::none(grid), &a, &mut drv, &SolverConfig::new(1e-4, 1.0)).unwrap();
        assert!(!traj.blown_up);
        // u' = u - u^3 has the closed form u^2 = 1 / (1 - (1 - 1/25) e^{-2t}).
        let exact = (1.0 / (1.0 - (1.0 - 1.0 / 25.0) * (-2.0f64).exp())).sqrt();
        let last = traj.snapshots.last().unwrap();
        assert!((last.time - 1.0).abs() < 1e-12);
        assert!((last.max_abs() - exact).abs() < 1e-3);
    }

    #[test]
    fn heat_flow_contracts_and_preserves_mean() {
        let grid = Grid::new(2, 16).unwrap();
        let a = DiffusionTensor::isotropic(2, &[0.05]).unwrap();
        let noise = build_kraichnan_noise(grid, 4, 0.5, 0.3).unwrap();
        let model = poly(vec![0.0]);
        let cfg = SolverConfig::new(1e-3, 1.0);
        let stepper = Stepper::new(&model, &noise, &a, &cfg).unwrap();
        let mut drv = BrownianDriver::new(4, 11, 0);
        let mut u = SystemState::new(
            vec![Field::from_fn(grid, |x| 1.0 + (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos())],
            0.0,
        )
        .unwrap();
        let mean0 = u.component(0).mean();
        let quiet = TransportNoise::none(grid);
        let heat_only = Stepper::new(&model, &quiet, &a, &cfg).unwrap();
        for m in 0..50 {
            let dw = drv.increments_at(m, cfg.dt).unwrap();
            let next = stepper.advance(&u, &dw).unwrap();
            assert!((next.component(0).mean() - u.component(0).mean()).abs() < 1e-10);
            let l2 = |s: &SystemState| crate::torus::lzeta_power(s.component(0), 2.0).unwrap();
            let heat = heat_only.advance(&u, &[]).unwrap();
            assert!(l2(&heat) <= l2(&u) + 1e-15);
            u = next;
        }
        assert!((u.component(0).mean() - mean0).abs() < 1e-9);
    }

    #[test]
    fn simulation_is_deterministic() {
        let grid = Grid::new(1, 32).unwrap();
        let ac = build_model(ModelParams::AllenCahn { theta: vec![0.5] }).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let noise = build_kraichnan_noise(grid, 2, 0.5, 0.2).unwrap();
        let run = |seed| {
            let mut drv = BrownianDriver::new(2, seed, 0);
            simulate(&sine(grid), &ac, &noise, &a, &mut drv, &SolverConfig::new(1e-3, 0.2)).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn trajectory_records_are_consistent() {
        let grid = Grid::new(1, 32).unwrap();
        let ac = build_model(ModelParams::AllenCahn { theta: vec![0.5] }).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let mut drv = BrownianDriver::new(1, 3, 0);
        let mut cfg = SolverConfig::new(1e-3, 0.105);
        cfg.record_every = 10;
        let traj = simulate(&sine(grid), &ac, &TransportNoise::none(grid), &a, &mut drv, &cfg).unwrap();
        assert_eq!(traj.times.len(), 12);
        assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
        assert!(traj
            .diagnostics
            .windows(2)
            .all(|w| w[1].dissipation_cum[0] >= w[0].dissipation_cum[0]));
    }

    #[test]
    fn positivity_report_examples() {
        let grid = Grid::new(1, 16).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let mut drv = BrownianDriver::new(0, 1, 0);
        let cfg = SolverConfig::new(0.01, 0.1);
        let zero = simulate(&SystemState::zeros(grid, 1), &poly(vec![0.0]), &TransportNoise::none(grid), &a, &mut drv, &cfg).unwrap();
        let r = positivity_report(&zero, 1e-3);
        assert_eq!(r.min_value, vec![0.0]);
        assert_eq!(r.violation_fraction, vec![0.0]);

        let ac = build_model(ModelParams::AllenCahn { theta: vec![] }).unwrap();
        let neg = SystemState::new(vec![Field::constant(grid, -1.0)], 0.0).unwrap();
        let traj = simulate(&neg, &ac, &TransportNoise::none(grid), &a, &mut drv, &cfg).unwrap();
        let r = positivity_report(&traj, 1e-3);
        assert!((r.min_value[0] + 1.0).abs() < 1e-12);
        assert_eq!(r.violation_fraction, vec![1.0]);
    }

    #[test]
    fn rejects_nonfinite_state() {
        let grid = Grid::new(1, 8).unwrap();
        let a = DiffusionTensor::isotropic(1, &[0.1]).unwrap();
        let mut vals = vec![0.0; 8];
        vals[3] = f64::NAN;
        let s = SystemState::new(vec![Field::from_values(grid, vals).unwrap()], 0.0);
        if let Ok(s) = s {
            let mut drv = BrownianDriver::new(0, 1, 0);
            let r = step(&s, &poly(vec![0.0]), &TransportNoise::none(grid), &a, &mut drv, 0, &SolverConfig::new(0.1, 1.0));
            assert!(r.is_err());
        }
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::new(0.1, 1.0).validate().is_ok());
        assert!(SolverConfig::new(0.0, 1.0).validate().is_err());
        assert!(SolverConfig::new(2.0, 1.0).validate().is_err());
        let mut c = SolverConfig::new(0.1, 1.0);
        c.blowup_threshold = -1.0;
        assert!(c.validate().is_err());
    }
}
