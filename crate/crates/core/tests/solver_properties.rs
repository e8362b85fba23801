use std::f64::consts::PI;

use srd_core::ensemble::{continuous_dependence, EnsembleConfig, InitialData, Setup};
use srd_core::model::{build_model, BuiltinModel, ModelParams};
use srd_core::noise::{build_kraichnan_noise, BrownianDriver, Coarsened, DiffusionTensor, TransportNoise};
use srd_core::solver::{noise_dimension, simulate, Scheme, SolverConfig, Trajectory};
use srd_core::stats::{mean, slope, std_error};
use srd_core::torus::{lzeta_power, Field, Grid, SystemState};

fn ac(theta: f64) -> BuiltinModel {
    build_model(ModelParams::AllenCahn { theta: vec![theta] }).unwrap()
}

fn inert() -> BuiltinModel {
    build_model(ModelParams::Polynomial {
        f: vec![0.0],
        theta: vec![],
        g_power: 2.0,
        h: None,
    })
    .unwrap()
}

fn two_modes(grid: Grid) -> SystemState {
    let f = Field::from_fn(grid, |x| (2.0 * PI * x[0]).sin() + 0.5 * (4.0 * PI * x[0]).cos());
    SystemState::new(vec![f], 0.0).unwrap()
}

fn run(model: &BuiltinModel, noise: &TransportNoise, nu: f64, u0: &SystemState, cfg: &SolverConfig, seed: u64) -> Trajectory {
    let a = DiffusionTensor::isotropic(u0.grid().dim(), &[nu]).unwrap();
    let mut drv = BrownianDriver::new(noise_dimension(model, noise), seed, 0);
    simulate(u0, model, noise, &a, &mut drv, cfg).unwrap()
}

#[test]
fn heat_flow_satisfies_energy_identity() {
    let grid = Grid::new(1, 32).unwrap();
    let nu = 0.1;
    let residual = |dt: f64| -> (f64, f64, f64) {
        let mut cfg = SolverConfig::new(dt, 0.1);
        cfg.record_every = 1;
        let traj = run(&inert(), &TransportNoise::none(grid), nu, &two_modes(grid), &cfg, 0);
        let first = &traj.diagnostics[0];
        let last = traj.diagnostics.last().unwrap();
        let r = last.total_lzeta() + 2.0 * nu * last.total_dissipation() - first.total_lzeta();
        (r, first.total_lzeta(), last.total_lzeta())
    };
    let (r1, e0, e_end) = residual(1e-4);
    let (r2, _, _) = residual(5e-5);
    assert!(r1.abs() < 1e-3 * e0, "residual {r1}");
    let ratio = r1 / r2;
    assert!(ratio > 1.8 && ratio < 2.2, "residual not first order: {ratio}");
    let k2 = |m: f64| (2.0 * PI * m).powi(2);
    let exact = 0.5 * (-2.0 * nu * k2(1.0) * 0.1).exp() + 0.125 * (-2.0 * nu * k2(2.0) * 0.1).exp();
    assert!((e_end - exact).abs() < 1e-3 * exact);
}

#[test]
fn stratonovich_transport_conserves_energy_up_to_dissipation() {
    let grid = Grid::new(2, 32).unwrap();
    let noise = build_kraichnan_noise(grid, 8, 0.5, 0.2).unwrap();
    let nu = 0.05;
    let u0 = SystemState::new(
        vec![Field::from_fn(grid, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).cos())],
        0.0,
    )
    .unwrap();
    let mut cfg = SolverConfig::new(1e-4, 0.05);
    cfg.scheme = Scheme::StratonovichMidpoint;
    cfg.record_every = 1;
    let traj = run(&inert(), &noise, nu, &u0, &cfg, 3);
    let first = &traj.diagnostics[0];
    let last = traj.diagnostics.last().unwrap();
    let residual = last.total_lzeta() + 2.0 * nu * last.total_dissipation() - first.total_lzeta();
    assert!(residual.abs() < 1e-2 * first.total_lzeta(), "residual {residual}");
}

#[test]
fn ito_with_correction_matches_stratonovich_in_mean() {
    let grid = Grid::new(1, 32).unwrap();
    let noise = TransportNoise::from_fields(grid, vec![vec![Field::constant(grid, 0.4)]]).unwrap();
    let u0 = two_modes(grid);
    let mut ito = SolverConfig::new(1e-3, 0.1);
    ito.ito_correction = true;
    ito.record_every = 1000;
    let mut strat = ito.clone();
    strat.ito_correction = false;
    strat.scheme = Scheme::StratonovichMidpoint;
    let energies = |cfg: &SolverConfig| -> Vec<f64> {
        (0..64)
            .map(|j| run(&inert(), &noise, 0.05, &u0, cfg, 40 + j).diagnostics.last().unwrap().total_lzeta())
            .collect()
    };
    let (a, b) = (energies(&ito), energies(&strat));
    let se = (std_error(&a).powi(2) + std_error(&b).powi(2)).sqrt();
    assert!((mean(&a) - mean(&b)).abs() <= 3.0 * se.max(1e-3), "{} vs {}", mean(&a), mean(&b));

    let mut uncorrected = ito.clone();
    uncorrected.ito_correction = false;
    let c = energies(&uncorrected);
    assert!(mean(&c) > mean(&b) * 1.2, "missing correction should inject energy");
}

#[test]
fn deterministic_allen_cahn_converges_at_first_order() {
    let grid = Grid::new(1, 32).unwrap();
    let u0 = two_modes(grid);
    let none = TransportNoise::none(grid);
    let model = ac(0.0);
    let terminal = |dt: f64| -> Field {
        let mut cfg = SolverConfig::new(dt, 0.5);
        cfg.record_every = usize::MAX;
        run(&model, &none, 0.05, &u0, &cfg, 0).snapshots.last().unwrap().component(0).clone()
    };
    let reference = terminal(0.01 / 64.0);
    let dts = [0.01, 0.005, 0.0025];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| lzeta_power(&terminal(dt).lincomb(1.0, &reference, -1.0).unwrap(), 2.0).unwrap().sqrt().ln())
        .collect();
    let order = slope(&dts.map(f64::ln), &errs);
    assert!(order > 0.9 && order < 1.2, "order {order}");
}

#[test]
fn coarsened_driver_reproduces_fine_path_statistics() {
    let grid = Grid::new(1, 32).unwrap();
    let model = ac(0.5);
    let none = TransportNoise::none(grid);
    let a = DiffusionTensor::isotropic(1, &[0.05]).unwrap();
    let u0 = two_modes(grid);
    let m = noise_dimension(&model, &none);
    let mut errs = Vec::new();
    for factor in [8u64, 4, 2] {
        let mut e = Vec::new();
        for seed in 0..16 {
            let mut fine_cfg = SolverConfig::new(1e-3 / 8.0, 0.2);
            fine_cfg.record_every = usize::MAX;
            let mut drv = BrownianDriver::new(m, seed, 0);
            let fine = simulate(&u0, &model, &none, &a, &mut drv, &fine_cfg).unwrap();
            let mut cfg = SolverConfig::new(1e-3 / 8.0 * factor as f64, 0.2);
            cfg.record_every = usize::MAX;
            let mut drv = Coarsened::new(BrownianDriver::new(m, seed, 0), factor).unwrap();
            let coarse = simulate(&u0, &model, &none, &a, &mut drv, &cfg).unwrap();
            let diff = coarse.snapshots.last().unwrap().component(0).lincomb(
                1.0,
                fine.snapshots.last().unwrap().component(0),
                -1.0,
            );
            e.push(lzeta_power(&diff.unwrap(), 2.0).unwrap().sqrt());
        }
        errs.push(mean(&e));
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn resolution_does_not_change_resolved_dynamics() {
    let model = ac(0.5);
    let mut cfg = SolverConfig::new(1e-3, 0.2);
    cfg.record_every = 50;
    let energy = |n: usize| -> Vec<f64> {
        let grid = Grid::new(1, n).unwrap();
        let u0 = InitialData::Sine {
            amplitude: vec![0.5],
            offset: vec![],
            mode: 1,
        }
        .build(grid, 1)
        .unwrap();
        run(&model, &TransportNoise::none(grid), 0.1, &u0, &cfg, 21)
            .diagnostics
            .iter()
            .map(|r| r.total_lzeta())
            .collect()
    };
    let (coarse, fine) = (energy(32), energy(128));
    assert_eq!(coarse.len(), fine.len());
    for (c, f) in coarse.iter().zip(&fine) {
        assert!((c - f).abs() < 1e-6 * f.max(1e-12), "{c} vs {f}");
    }
}

#[test]
fn dependence_distances_shrink_with_perturbation() {
    let grid = Grid::new(1, 32).unwrap();
    let u0 = two_modes(grid);
    let setup = Setup::new(
        ac(0.5),
        build_kraichnan_noise(grid, 2, 0.5, 0.1).unwrap(),
        DiffusionTensor::isotropic(1, &[0.1]).unwrap(),
        u0.clone(),
    )
    .unwrap();
    let mut cfg = SolverConfig::new(1e-3, 0.1);
    cfg.record_every = 10;
    let rows = continuous_dependence(&setup, &cfg, &EnsembleConfig::new(4, 8), &u0, &[0.4, 0.2, 0.1, 0.05, 0.0], 2.0)
        .unwrap();
    for w in rows.windows(2) {
        assert!(w[1].mean_distance < w[0].mean_distance, "{rows:?}");
    }
    assert_eq!(rows.last().unwrap().mean_distance, 0.0);
}
