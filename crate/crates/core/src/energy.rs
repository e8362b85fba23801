//! Energy functionals along trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::Trajectory;
use crate::torus::{dissipation_integral, lzeta_power, Field, SystemState};

/// Instantaneous `L^zeta` energies plus time-accumulated dissipation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub time: f64,
    pub zeta: f64,
    /// `||u_i||_{L^zeta}^zeta`.
    pub lzeta_per_component: Vec<f64>,
    /// `int |u_i|^{zeta-2} |grad u_i|^2` at this instant.
    pub dissipation_rate: Vec<f64>,
    /// Trapezoidal time integral of `dissipation_rate` since the first record.
    pub dissipation_cum: Vec<f64>,
    pub mass: Vec<f64>,
    pub min_per_component: Vec<f64>,
}

impl EnergyRecord {
    pub fn total_lzeta(&self) -> f64 {
        self.lzeta_per_component.iter().sum()
    }

    pub fn total_dissipation(&self) -> f64 {
        self.dissipation_cum.iter().sum()
    }
}

/// Records the energies of `state`, accumulating dissipation from `prev`
/// over the elapsed time `dt`.
pub fn record_energies(state: &SystemState, zeta: f64, prev: Option<&EnergyRecord>, dt: f64) -> Result<EnergyRecord> {
    let ell = state.ell();
    let mut lz = Vec::with_capacity(ell);
    let mut rate = Vec::with_capacity(ell);
    for u in state.components() {
        lz.push(lzeta_power(u, zeta)?);
        rate.push(dissipation_integral(u, zeta)?);
    }
    let cum = match prev {
        Some(p) => {
            if p.dissipation_rate.len() != ell {
                return Err(Error::DimensionMismatch {
                    what: "previous energy record",
                    expected: ell,
                    got: p.dissipation_rate.len(),
                });
            }
            if !(dt >= 0.0) {
                return Err(Error::InvalidArgument(format!("elapsed time must be >= 0 (got {dt})")));
            }
            (0..ell)
                .map(|i| p.dissipation_cum[i] + 0.5 * dt * (p.dissipation_rate[i] + rate[i]))
                .collect()
        }
        None => vec![0.0; ell],
    };
    Ok(EnergyRecord {
        time: state.time,
        zeta,
        lzeta_per_component: lz,
        dissipation_rate: rate,
        dissipation_cum: cum,
        mass: state.components().iter().map(Field::mean).collect(),
        min_per_component: state.components().iter().map(Field::min).collect(),
    })
}

/// Smallest `N0` with `sup_t E(t) + D(end) <= N0 (1 + E(0))` along one path,
/// where `E` sums the component energies and `D` the accumulated dissipation.
pub fn energy_bound_fit(records: &[EnergyRecord], initial: &EnergyRecord) -> Result<f64> {
    let last = records
        .last()
        .ok_or_else(|| Error::InvalidArgument("no energy records".into()))?;
    let sup = records.iter().map(EnergyRecord::total_lzeta).fold(0.0, f64::max);
    let value = (sup + last.total_dissipation()) / (1.0 + initial.total_lzeta());
    Ok(if value.is_finite() { value } else { f64::INFINITY })
}

/// [`energy_bound_fit`] for a trajectory; `+inf` once the path has blown up.
pub fn trajectory_energy_bound(traj: &Trajectory) -> Result<f64> {
    if traj.blown_up {
        return Ok(f64::INFINITY);
    }
    let first = traj
        .diagnostics
        .first()
        .ok_or_else(|| Error::InvalidArgument("trajectory has no diagnostics".into()))?;
    energy_bound_fit(&traj.diagnostics, first)
}

/// Three-tier energies of a two-component Brusselator trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BrusselatorEnergies {
    /// `sup_t ||u1||_6^6 + int int |u1|^4 |grad u1|^2`.
    pub E11: f64,
    /// `int int |grad u1|^2 + int int u1^2 u2^2`.
    pub E12: f64,
    /// `int int u2^2 + |grad u2|^2`.
    pub E21: f64,
    /// `sup_t ||u2||_3^3 + int int |u2| |grad u2|^2`.
    pub E22: f64,
}

impl BrusselatorEnergies {
    pub fn as_array(&self) -> [f64; 4] {
        [self.E11, self.E12, self.E21, self.E22]
    }
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

pub fn brusselator_energies(traj: &Trajectory) -> Result<BrusselatorEnergies> {
    if traj.snapshots.is_empty() {
        return Err(Error::InvalidArgument("trajectory has no snapshots".into()));
    }
    let ell = traj.snapshots[0].ell();
    if ell != 2 {
        return Err(Error::DimensionMismatch {
            what: "Brusselator components",
            expected: 2,
            got: ell,
        });
    }
    let times: Vec<f64> = traj.snapshots.iter().map(|s| s.time).collect();
    let mut sup6 = 0.0f64;
    let mut sup3 = 0.0f64;
    let mut d6 = Vec::with_capacity(times.len());
    let mut grad1 = Vec::with_capacity(times.len());
    let mut cross = Vec::with_capacity(times.len());
    let mut l2 = Vec::with_capacity(times.len());
    let mut d3 = Vec::with_capacity(times.len());
    for s in &traj.snapshots {
        let (u1, u2) = (s.component(0), s.component(1));
        sup6 = sup6.max(lzeta_power(u1, 6.0)?);
        sup3 = sup3.max(lzeta_power(u2, 3.0)?);
        d6.push(dissipation_integral(u1, 6.0)?);
        grad1.push(dissipation_integral(u1, 2.0)?);
        let c = u1
            .values()
            .iter()
            .zip(u2.values())
            .map(|(a, b)| a * a * b * b)
            .sum::<f64>()
            / u1.values().len() as f64;
        cross.push(c);
        l2.push(lzeta_power(u2, 2.0)? + dissipation_integral(u2, 2.0)?);
        d3.push(dissipation_integral(u2, 3.0)?);
    }
    Ok(BrusselatorEnergies {
        E11: sup6 + trapezoid(&times, &d6),
        E12: trapezoid(&times, &grad1) + trapezoid(&times, &cross),
        E21: trapezoid(&times, &l2),
        E22: sup3 + trapezoid(&times, &d3),
    })
}
