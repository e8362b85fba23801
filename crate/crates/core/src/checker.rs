//! Sampled verification of pointwise coercivity and dissipativity conditions.
//!
//! A condition of the form `L(y) <= M w(y)` for all `y` is approximated on a
//! box: the ratio `L / w` is evaluated on Halton points, the box vertices and
//! axis lines, then the eight worst points are polished by compass search.
//! Unbounded growth is detected by comparing the largest ratio on the outer
//! shell of the box (normalized radius `>= 0.9`) with the largest ratio on the
//! inner half (`<= 0.5`).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BuiltinModel, ModelParams, ReactionModel};
use crate::noise::{DiffusionTensor, TransportNoise};
use crate::sampling::{halton_points, StateBox};

const INNER_SHELL: f64 = 0.5;
const OUTER_SHELL: f64 = 0.9;
const GROWTH_FACTOR: f64 = 1.25;
const GROWTH_TOL: f64 = 1e-9;
const REFINE_STARTS: usize = 8;
const ORIGIN: [f64; 3] = [0.0; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    ScalarPointwise,
    ScalarSmooth,
    System,
    Random,
    StrongDissipative,
    GrowthEnvelope,
}

impl std::str::FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "scalar_pointwise" | "pointwise" => ConditionId::ScalarPointwise,
            "scalar_smooth" | "smooth" => ConditionId::ScalarSmooth,
            "system" => ConditionId::System,
            "random" => ConditionId::Random,
            "strong_dissipative" | "strong" => ConditionId::StrongDissipative,
            "growth_envelope" | "envelope" => ConditionId::GrowthEnvelope,
            other => return Err(Error::InvalidArgument(format!("unknown condition '{other}'"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Growth envelopes for models whose noise is constrained only through `N_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeId {
    LotkaVolterra,
    BrusselatorLowDim,
    BrusselatorThreeD,
}

impl std::str::FromStr for EnvelopeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "lotka_volterra" => EnvelopeId::LotkaVolterra,
            "brusselator_low_dim" => EnvelopeId::BrusselatorLowDim,
            "brusselator_three_d" | "brusselator_3d" => EnvelopeId::BrusselatorThreeD,
            other => return Err(Error::InvalidArgument(format!("unknown growth envelope '{other}'"))),
        })
    }
}

/// Sampling and condition parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivitySpec {
    pub zeta: f64,
    /// Defaults to `nu / 2` per component when absent.
    pub epsilon: Option<f64>,
    pub bx: StateBox,
    pub samples: usize,
    /// Component weights of the system condition; defaults to all ones.
    pub weights_alpha: Vec<f64>,
    pub seed: u64,
}

impl CoercivitySpec {
    pub fn new(zeta: f64, bx: StateBox, samples: usize) -> Self {
        Self {
            zeta,
            epsilon: None,
            bx,
            samples,
            weights_alpha: Vec::new(),
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.zeta >= 2.0) || !self.zeta.is_finite() {
            return Err(Error::InvalidArgument(format!("zeta must be >= 2 (got {})", self.zeta)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidArgument("at least one sample is required".into()));
        }
        Ok(())
    }
}

/// Outcome of one certification run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityReport {
    pub condition_id: ConditionId,
    pub verdict: Verdict,
    pub fitted_m: f64,
    /// Largest value of the left-hand side over the samples (a uniform bound on the box).
    pub fitted_c: f64,
    pub fitted_n0: Option<f64>,
    pub fitted_n1: Option<f64>,
    pub worst_point: Vec<f64>,
    pub worst_margin: f64,
    pub growth_detected: bool,
    pub inner_max_ratio: f64,
    pub outer_max_ratio: f64,
    pub samples_evaluated: usize,
    /// Verdict per component for envelope checks.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub component_verdicts: Vec<Verdict>,
}

/// A condition together with the data it needs.
pub enum Condition<'a> {
    ScalarPointwise {
        model: &'a dyn ReactionModel,
        noise: &'a TransportNoise,
        a: &'a DiffusionTensor,
    },
    ScalarSmooth {
        model: &'a dyn ReactionModel,
        noise: &'a TransportNoise,
        a: &'a DiffusionTensor,
    },
    System {
        model: &'a dyn ReactionModel,
        noise: &'a TransportNoise,
        a: &'a DiffusionTensor,
    },
    StrongDissipative {
        model: &'a dyn ReactionModel,
    },
    GrowthEnvelope {
        model: &'a BuiltinModel,
        envelope: EnvelopeId,
        noise: &'a TransportNoise,
        a: &'a DiffusionTensor,
    },
}

type Eval<'a> = Box<dyn Fn(&[f64]) -> (f64, f64) + Sync + 'a>;

/// `L(y)` and `w(y)` of an inequality `L <= M w`.
struct Problem<'a> {
    eval: Eval<'a>,
}

impl Problem<'_> {
    fn ratio(&self, y: &[f64]) -> f64 {
        let (l, w) = (self.eval)(y);
        l / w
    }
}

#[derive(Debug, Clone)]
struct Fit {
    m_fit: f64,
    inner: f64,
    outer: f64,
    growth: bool,
    sup_lhs: f64,
    worst_point: Vec<f64>,
    worst_margin: f64,
}

fn sample_points(bx: &StateBox, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut pts = halton_points(bx, samples, seed);
    pts.extend(bx.vertices());
    pts.extend(bx.axis_points(64));
    pts
}

/// Compass search maximizing `f` inside the box.
fn compass_maximize(f: &dyn Fn(&[f64]) -> f64, bx: &StateBox, start: &[f64]) -> Vec<f64> {
    let widths: Vec<f64> = bx.lo.iter().zip(&bx.hi).map(|(a, b)| b - a).collect();
    let mut best = start.to_vec();
    let mut best_val = f(&best);
    let mut step = 0.05;
    for _ in 0..400 {
        if step < 1e-13 {
            break;
        }
        let mut improved = false;
        for axis in 0..best.len() {
            for dir in [1.0, -1.0] {
                let mut cand = best.clone();
                cand[axis] += dir * step * widths[axis];
                bx.clamp(&mut cand);
                let v = f(&cand);
                if v > best_val {
                    best = cand;
                    best_val = v;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    best
}

fn fit_problem(problem: &Problem, bx: &StateBox, points: &[Vec<f64>]) -> Fit {
    let values: Vec<(f64, f64)> = points.par_iter().map(|y| (problem.eval)(y)).collect();
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        let ri = values[i].0 / values[i].1;
        let rj = values[j].0 / values[j].1;
        rj.total_cmp(&ri).then(i.cmp(&j))
    });
    let ratio = |y: &[f64]| problem.ratio(y);
    let refined: Vec<Vec<f64>> = order
        .iter()
        .take(REFINE_STARTS)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&&i| compass_maximize(&ratio, bx, &points[i]))
        .collect();
    let refined_values: Vec<(f64, f64)> = refined.iter().map(|y| (problem.eval)(y)).collect();

    let all = points.iter().zip(&values).chain(refined.iter().zip(&refined_values));
    let mut inner = 0.0f64;
    let mut outer = f64::NEG_INFINITY;
    let mut m_all = 0.0f64;
    let mut sup_lhs = 0.0f64;
    for (y, &(l, w)) in all.clone() {
        let r = l / w;
        let s = bx.shell_radius(y);
        m_all = m_all.max(r);
        sup_lhs = sup_lhs.max(l);
        if s <= INNER_SHELL {
            inner = inner.max(r);
        }
        if s >= OUTER_SHELL {
            outer = outer.max(r);
        }
    }
    let threshold = GROWTH_FACTOR * inner + GROWTH_TOL * (1.0 + inner);
    let growth = outer > 0.0 && outer > threshold;
    let m_fit = if growth { threshold } else { m_all };
    let mut worst_margin = f64::INFINITY;
    let mut worst_point = points[0].clone();
    for (y, &(l, w)) in all {
        let margin = m_fit - l / w;
        if margin < worst_margin {
            worst_margin = margin;
            worst_point = y.clone();
        }
    }
    Fit {
        m_fit,
        inner,
        outer,
        growth,
        sup_lhs,
        worst_point,
        worst_margin,
    }
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn resolve_epsilon(spec: &CoercivitySpec, nu: f64) -> Result<f64> {
    let eps = spec.epsilon.unwrap_or(0.5 * nu);
    if !(eps > 0.0 && eps < nu) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must lie in (0, nu) = (0, {nu}) (got {eps})"
        )));
    }
    Ok(eps)
}

/// `sup_x |b_{n,i}(x)|` per mode for component `i`.
fn b_sup(noise: &TransportNoise, component: usize) -> Vec<f64> {
    let s = noise.component_scale(component).abs();
    noise.sup_norms_sq().into_iter().map(|v| s * v.sqrt()).collect()
}

/// `(|F_i| + sum_n sup|b_n| |g_{n,i}|)^2` at `y`.
fn cross_term(model: &dyn ReactionModel, bsup: &[f64], y: &[f64], component: usize, dim: usize) -> f64 {
    let ell = model.ell();
    let mut flux_norm = 0.0;
    if model.has_flux() {
        let mut flux = vec![0.0; ell * dim];
        model.eval_flux(0.0, &ORIGIN, y, dim, &mut flux);
        flux_norm = flux[component * dim..(component + 1) * dim]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
    }
    let mut g = vec![0.0; ell];
    let mut s = 0.0;
    for (n, b) in bsup.iter().enumerate().take(model.n_g_modes()) {
        if *b == 0.0 {
            continue;
        }
        model.g_mode(0.0, &ORIGIN, y, n, &mut g);
        s += b * g[component].abs();
    }
    (flux_norm + s).powi(2)
}

fn check_dims(model: &dyn ReactionModel, spec: &CoercivitySpec, scalar: bool) -> Result<()> {
    if scalar && model.ell() != 1 {
        return Err(Error::InvalidArgument(format!(
            "scalar conditions need ell = 1 (got {})",
            model.ell()
        )));
    }
    if spec.bx.dim() != model.ell() {
        return Err(Error::DimensionMismatch {
            what: "box dimension",
            expected: model.ell(),
            got: spec.bx.dim(),
        });
    }
    Ok(())
}

fn scalar_problem<'a>(
    model: &'a dyn ReactionModel,
    noise: &'a TransportNoise,
    a: &'a DiffusionTensor,
    spec: &CoercivitySpec,
    reduced: bool,
) -> Result<Problem<'a>> {
    let nu = a.nu[0];
    let eps = resolve_epsilon(spec, nu)?;
    let zeta = spec.zeta;
    let dim = noise.grid().dim();
    let bsup = b_sup(noise, 0);
    let coef = if reduced { 0.0 } else { 1.0 / (4.0 * (nu - eps)) };
    Ok(Problem {
        eval: Box::new(move |y: &[f64]| {
            let mut f = [0.0];
            let mut g2 = [0.0];
            model.eval_f(0.0, &ORIGIN, y, &mut f);
            model.eval_g_sq(0.0, &ORIGIN, y, &mut g2);
            let mut l = y[0] * f[0] / (zeta - 1.0) + 0.5 * g2[0];
            if coef > 0.0 {
                l += coef * cross_term(model, &bsup, y, 0, dim);
            }
            (l, y[0] * y[0] + 1.0)
        }),
    })
}

fn system_problem<'a>(
    model: &'a dyn ReactionModel,
    noise: &'a TransportNoise,
    a: &'a DiffusionTensor,
    spec: &CoercivitySpec,
) -> Result<Problem<'a>> {
    let ell = model.ell();
    if a.ell() != ell {
        return Err(Error::DimensionMismatch {
            what: "diffusion components",
            expected: ell,
            got: a.ell(),
        });
    }
    let alpha = if spec.weights_alpha.is_empty() {
        vec![1.0; ell]
    } else {
        spec.weights_alpha.clone()
    };
    if alpha.len() != ell {
        return Err(Error::DimensionMismatch {
            what: "system weights",
            expected: ell,
            got: alpha.len(),
        });
    }
    if alpha.iter().any(|&w| !(w > 0.0)) {
        return Err(Error::InvalidArgument("system weights must be positive".into()));
    }
    let coefs = (0..ell)
        .map(|i| resolve_epsilon(spec, a.nu[i]).map(|e| 4.0 / (a.nu[i] - e)))
        .collect::<Result<Vec<_>>>()?;
    let bsups: Vec<Vec<f64>> = (0..ell).map(|i| b_sup(noise, i)).collect();
    let zeta = spec.zeta;
    let dim = noise.grid().dim();
    Ok(Problem {
        eval: Box::new(move |y: &[f64]| {
            let mut f = vec![0.0; ell];
            let mut g2 = vec![0.0; ell];
            model.eval_f(0.0, &ORIGIN, y, &mut f);
            model.eval_g_sq(0.0, &ORIGIN, y, &mut g2);
            let mut l = 0.0;
            for i in 0..ell {
                let n_i = y[i] * f[i] / (zeta - 1.0)
                    + 0.5 * g2[i]
                    + coefs[i] * cross_term(model, &bsups[i], y, i, dim);
                let w = if zeta == 2.0 { 1.0 } else { y[i].abs().powf(zeta - 2.0) };
                l += alpha[i] * w * n_i;
            }
            (l, norm(y).powf(zeta) + 1.0)
        }),
    })
}

/// `(M-free part P_i, fixed part Q_i)` of the envelope `N_i = M P_i + Q_i`.
fn envelope_parts(model: &BuiltinModel, envelope: EnvelopeId, y: &[f64], i: usize) -> (f64, f64) {
    let (y1, y2) = (y[0], y[1]);
    match envelope {
        EnvelopeId::LotkaVolterra => {
            let chi = match model.params() {
                ModelParams::LotkaVolterra { chi, .. } => *chi,
                _ => [[0.0; 2]; 2],
            };
            if i == 0 {
                (1.0 + y1 * y1, chi[0][0] * y1.powi(3) + chi[0][1] * y1 * y1 * y2)
            } else {
                (
                    1.0 + (1.0 + y1) * y2 * y2 + y1 * y1 * y2 + y1.powi(3),
                    chi[1][1] * y2.powi(3),
                )
            }
        }
        EnvelopeId::BrusselatorLowDim | EnvelopeId::BrusselatorThreeD => {
            let c = match (envelope, model.params()) {
                (EnvelopeId::BrusselatorThreeD, _) => 0.2,
                (_, ModelParams::Brusselator { envelope_epsilon, .. }) => 1.0 - envelope_epsilon,
                _ => 0.9,
            };
            if i == 0 {
                (1.0 + y1 * y1, c * y1 * y1 * y2 * y2)
            } else {
                (1.0 + (1.0 + y1 * y1) * y2 * y2 + y1 * y2.powi(3) + y1.powi(4), 0.0)
            }
        }
    }
}

fn envelope_problems<'a>(
    model: &'a BuiltinModel,
    envelope: EnvelopeId,
    noise: &'a TransportNoise,
    a: &'a DiffusionTensor,
    spec: &CoercivitySpec,
) -> Result<Vec<Problem<'a>>> {
    let matches = matches!(
        (envelope, model.params()),
        (EnvelopeId::LotkaVolterra, ModelParams::LotkaVolterra { .. })
            | (EnvelopeId::BrusselatorLowDim, ModelParams::Brusselator { .. })
            | (EnvelopeId::BrusselatorThreeD, ModelParams::Brusselator { .. })
    );
    if !matches {
        return Err(Error::InvalidArgument(format!(
            "envelope {envelope:?} does not apply to model {}",
            model.name()
        )));
    }
    if spec.bx.lo.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("growth envelopes are stated on [0, inf)^2".into()));
    }
    let dim = noise.grid().dim();
    (0..2)
        .map(|i| {
            let nu = a.nu.get(i).copied().unwrap_or(a.nu[0]);
            let eps = resolve_epsilon(spec, nu)?;
            let coef = 1.0 / (4.0 * (nu - eps));
            let bsup = b_sup(noise, i);
            Ok(Problem {
                eval: Box::new(move |y: &[f64]| {
                    let mut g2 = [0.0; 2];
                    model.eval_g_sq(0.0, &ORIGIN, y, &mut g2);
                    let lhs = 0.5 * g2[i] + coef * cross_term(model, &bsup, y, i, dim);
                    let (p, q) = envelope_parts(model, envelope, y, i);
                    (lhs - q, p)
                }),
            })
        })
        .collect()
}

fn report_from_fit(id: ConditionId, fit: &Fit, samples: usize) -> CoercivityReport {
    CoercivityReport {
        condition_id: id,
        verdict: Verdict::from_bool(fit.worst_margin >= 0.0),
        fitted_m: fit.m_fit,
        fitted_c: fit.sup_lhs.max(0.0),
        fitted_n0: None,
        fitted_n1: None,
        worst_point: fit.worst_point.clone(),
        worst_margin: fit.worst_margin,
        growth_detected: fit.growth,
        inner_max_ratio: fit.inner,
        outer_max_ratio: fit.outer,
        samples_evaluated: samples,
        component_verdicts: Vec::new(),
    }
}

fn smooth_reduction_applies(noise: &TransportNoise, model: &dyn ReactionModel) -> bool {
    noise.is_zero() || (noise.divergence_free && !model.has_flux())
}

/// Runs the certification for `cond` over the sample set of `spec`.
pub fn check(cond: &Condition, spec: &CoercivitySpec) -> Result<CoercivityReport> {
    spec.validate()?;
    let points = sample_points(&spec.bx, spec.samples, spec.seed);
    let count = points.len() + REFINE_STARTS;
    match cond {
        Condition::ScalarPointwise { model, noise, a } => {
            check_dims(*model, spec, true)?;
            let p = scalar_problem(*model, noise, a, spec, false)?;
            Ok(report_from_fit(ConditionId::ScalarPointwise, &fit_problem(&p, &spec.bx, &points), count))
        }
        Condition::ScalarSmooth { model, noise, a } => {
            check_dims(*model, spec, true)?;
            let reduced = smooth_reduction_applies(noise, *model);
            let p = scalar_problem(*model, noise, a, spec, reduced)?;
            Ok(report_from_fit(ConditionId::ScalarSmooth, &fit_problem(&p, &spec.bx, &points), count))
        }
        Condition::System { model, noise, a } => {
            check_dims(*model, spec, false)?;
            let p = system_problem(*model, noise, a, spec)?;
            Ok(report_from_fit(ConditionId::System, &fit_problem(&p, &spec.bx, &points), count))
        }
        Condition::StrongDissipative { model } => {
            check_dims(*model, spec, true)?;
            Ok(strong_dissipativity(*model, &spec.bx, &points))
        }
        Condition::GrowthEnvelope {
            model,
            envelope,
            noise,
            a,
        } => {
            check_dims(*model, spec, false)?;
            let problems = envelope_problems(model, *envelope, noise, a, spec)?;
            let fits: Vec<Fit> = problems.iter().map(|p| fit_problem(p, &spec.bx, &points)).collect();
            let worst = fits
                .iter()
                .min_by(|a, b| a.worst_margin.total_cmp(&b.worst_margin))
                .expect("two components");
            let mut report = report_from_fit(ConditionId::GrowthEnvelope, worst, count * 2);
            report.fitted_m = fits.iter().map(|f| f.m_fit).fold(0.0, f64::max);
            report.fitted_c = fits.iter().map(|f| f.sup_lhs).fold(0.0, f64::max);
            report.growth_detected = fits.iter().any(|f| f.growth);
            report.component_verdicts = fits.iter().map(|f| Verdict::from_bool(f.worst_margin >= 0.0)).collect();
            report.verdict = Verdict::from_bool(report.component_verdicts.iter().all(|v| v.passed()));
            Ok(report)
        }
    }
}

fn strong_dissipativity(model: &dyn ReactionModel, bx: &StateBox, points: &[Vec<f64>]) -> CoercivityReport {
    let h = model.growth_h();
    let yf = |y: &[f64]| {
        let mut f = [0.0];
        model.eval_f(0.0, &ORIGIN, y, &mut f);
        y[0] * f[0]
    };
    // Least squares of -y f = N0 |y|^{h+1} - N1 (|y|^2 + 1) on the outer shell.
    let (mut spp, mut spq, mut sqq, mut spz, mut sqz) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut shell_min = f64::INFINITY;
    for y in points.iter().filter(|y| bx.shell_radius(y) >= OUTER_SHELL) {
        let r = y[0].abs();
        let p = r.powf(h + 1.0);
        let q = -(r * r + 1.0);
        let z = -yf(y);
        spp += p * p;
        spq += p * q;
        sqq += q * q;
        spz += p * z;
        sqz += q * z;
        if p > 0.0 {
            shell_min = shell_min.min(z / p);
        }
    }
    let det = spp * sqq - spq * spq;
    let ls = if det.abs() > 1e-300 {
        (spz * sqq - sqz * spq) / det
    } else {
        shell_min
    };
    let residual = |n0: f64| Problem {
        eval: Box::new(move |y: &[f64]| {
            let r = y[0].abs();
            (yf(y) + n0 * r.powf(h + 1.0), r * r + 1.0)
        }),
    };
    let mut n0 = ls;
    let mut fit = fit_problem(&residual(n0), bx, points);
    if fit.growth && shell_min < n0 {
        n0 = shell_min;
        fit = fit_problem(&residual(n0), bx, points);
    }
    let mut report = report_from_fit(ConditionId::StrongDissipative, &fit, points.len() + REFINE_STARTS);
    if !(n0 > 0.0) {
        report.worst_margin = report.worst_margin.min(n0).min(-f64::EPSILON);
    }
    report.verdict = Verdict::from_bool(n0 > 0.0 && report.worst_margin >= 0.0);
    report.fitted_n0 = Some(n0);
    report.fitted_n1 = Some(fit.m_fit);
    report.fitted_m = fit.m_fit;
    report
}

pub fn check_scalar_pointwise(
    model: &dyn ReactionModel,
    noise: &TransportNoise,
    a: &DiffusionTensor,
    spec: &CoercivitySpec,
) -> Result<CoercivityReport> {
    check(&Condition::ScalarPointwise { model, noise, a }, spec)
}

pub fn check_scalar_smooth(
    model: &dyn ReactionModel,
    noise: &TransportNoise,
    a: &DiffusionTensor,
    spec: &CoercivitySpec,
) -> Result<CoercivityReport> {
    check(&Condition::ScalarSmooth { model, noise, a }, spec)
}

pub fn check_system(
    model: &dyn ReactionModel,
    noise: &TransportNoise,
    a: &DiffusionTensor,
    spec: &CoercivitySpec,
) -> Result<CoercivityReport> {
    check(&Condition::System { model, noise, a }, spec)
}

pub fn check_strong_dissipativity(model: &dyn ReactionModel, bx: &StateBox, samples: usize) -> Result<CoercivityReport> {
    check(
        &Condition::StrongDissipative { model },
        &CoercivitySpec::new(2.0, bx.clone(), samples),
    )
}

pub fn check_growth_envelope(
    model: &BuiltinModel,
    envelope: EnvelopeId,
    noise: &TransportNoise,
    a: &DiffusionTensor,
    bx: &StateBox,
    samples: usize,
) -> Result<CoercivityReport> {
    check(
        &Condition::GrowthEnvelope {
            model,
            envelope,
            noise,
            a,
        },
        &CoercivitySpec::new(2.0, bx.clone(), samples),
    )
}

/// Integrability exponents `(phi1, psi1, phi2) = (1, zeta/2, 2 psi2 / (2 psi2 - d))`.
pub fn check_random_coercivity_shape(zeta: f64, d: usize, psi2: f64) -> Result<(f64, f64, f64)> {
    let lower = (d as f64 / 2.0).max(1.0);
    if !(psi2 > lower) {
        return Err(Error::InvalidArgument(format!(
            "psi2 must exceed max(d/2, 1) = {lower} (got {psi2})"
        )));
    }
    if !(zeta >= 2.0) {
        return Err(Error::InvalidArgument(format!("zeta must be >= 2 (got {zeta})")));
    }
    Ok((1.0, zeta / 2.0, 2.0 * psi2 / (2.0 * psi2 - d as f64)))
}

/// Re-evaluates a report's inequality at `count` fresh uniform points and
/// returns the number of violations beyond a relative slack of `1e-9`.
pub fn count_violations(cond: &Condition, spec: &CoercivitySpec, report: &CoercivityReport, count: usize, seed: u64) -> Result<usize> {
    let problems: Vec<Problem> = match cond {
        Condition::ScalarPointwise { model, noise, a } => vec![scalar_problem(*model, noise, a, spec, false)?],
        Condition::ScalarSmooth { model, noise, a } => {
            vec![scalar_problem(*model, noise, a, spec, smooth_reduction_applies(noise, *model))?]
        }
        Condition::System { model, noise, a } => vec![system_problem(*model, noise, a, spec)?],
        Condition::GrowthEnvelope {
            model,
            envelope,
            noise,
            a,
        } => envelope_problems(model, *envelope, noise, a, spec)?,
        Condition::StrongDissipative { model } => {
            let n0 = report.fitted_n0.unwrap_or(0.0);
            let h = model.growth_h();
            let model = *model;
            vec![Problem {
                eval: Box::new(move |y: &[f64]| {
                    let mut f = [0.0];
                    model.eval_f(0.0, &ORIGIN, y, &mut f);
                    let r = y[0].abs();
                    (y[0] * f[0] + n0 * r.powf(h + 1.0), r * r + 1.0)
                }),
            }]
        }
    };
    let m = report.fitted_m;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<Vec<f64>> = (0..count).map(|_| spec.bx.uniform(&mut rng)).collect();
    Ok(pts
        .par_iter()
        .map(|y| {
            problems
                .iter()
                .filter(|p| {
                    let (l, w) = (p.eval)(y);
                    l > m * w + 1e-9 * (1.0 + l.abs().max(m * w))
                })
                .count()
        })
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, BrusselatorEnvelope};
    use crate::torus::Grid;

    fn grid1() -> Grid {
        Grid::new(1, 8).unwrap()
    }

    fn ac(norm_theta: f64) -> BuiltinModel {
        build_model(ModelParams::AllenCahn { theta: vec![norm_theta] }).unwrap()
    }

    fn poly(f: Vec<f64>) -> BuiltinModel {
        build_model(ModelParams::Polynomial {
            f,
            theta: vec![],
            g_power: 2.0,
            h: None,
        })
        .unwrap()
    }

    fn scalar_spec(zeta: f64, half: f64) -> CoercivitySpec {
        CoercivitySpec::new(zeta, StateBox::symmetric(1, half).unwrap(), 20_000)
    }

    fn unit_a() -> DiffusionTensor {
        DiffusionTensor::isotropic(1, &[1.0]).unwrap()
    }

    #[test]
    fn allen_cahn_threshold() {
        let none = TransportNoise::none(grid1());
        let pass = check_scalar_pointwise(&ac(0.99), &none, &unit_a(), &scalar_spec(3.0, 50.0)).unwrap();
        assert!(pass.verdict.passed(), "{pass:?}");
        let fail = check_scalar_pointwise(&ac(1.5), &none, &unit_a(), &scalar_spec(3.0, 50.0)).unwrap();
        assert!(!fail.verdict.passed());
        assert!(fail.growth_detected);
    }

    #[test]
    fn allen_cahn_fit_matches_symbolic_maximum() {
        // L / w = (y^2/2 - 0.01 y^4) / (1 + y^2); maximum by dense sweep.
        let none = TransportNoise::none(grid1());
        let report = check_scalar_pointwise(&ac(0.99), &none, &unit_a(), &scalar_spec(3.0, 50.0)).unwrap();
        let oracle = (0..=2_000_000)
            .map(|i| {
                let y = -50.0 + 1e-4 * 0.5 * i as f64;
                let t = 0.99f64 * 0.99;
                (0.5 * y * y - 0.5 * y.powi(4) + 0.5 * t * y.powi(4)) / (1.0 + y * y)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((report.fitted_m - oracle).abs() < 1e-8, "{} vs {oracle}", report.fitted_m);
    }

    #[test]
    fn zero_nonlinearity_passes_with_zero_constant() {
        let none = TransportNoise::none(grid1());
        let report = check_scalar_pointwise(&poly(vec![0.0]), &none, &unit_a(), &scalar_spec(2.0, 50.0)).unwrap();
        assert!(report.verdict.passed());
        assert_eq!(report.fitted_m, 0.0);
    }

    #[test]
    fn epsilon_must_be_below_nu() {
        let none = TransportNoise::none(grid1());
        let mut spec = scalar_spec(2.0, 10.0);
        spec.epsilon = Some(1.0);
        assert!(check_scalar_pointwise(&ac(0.5), &none, &unit_a(), &spec).is_err());
    }

    #[test]
    fn smooth_condition_examples() {
        let none = TransportNoise::none(grid1());
        let boundary = check_scalar_smooth(&ac(1.0), &none, &unit_a(), &scalar_spec(3.0, 50.0)).unwrap();
        assert!(boundary.verdict.passed());
        assert!(boundary.fitted_m > 0.49 && boundary.fitted_m <= 0.5);

        let logistic = poly(vec![0.0, 1.0, -1.0]);
        let spec = CoercivitySpec::new(2.0, StateBox::nonnegative(1, 50.0).unwrap(), 20_000);
        assert!(check_scalar_smooth(&logistic, &none, &unit_a(), &spec).unwrap().verdict.passed());

        let cubic = poly(vec![0.0, 0.0, 0.0, 1.0]);
        assert!(!check_scalar_smooth(&cubic, &none, &unit_a(), &scalar_spec(2.0, 50.0)).unwrap().verdict.passed());
    }

    #[test]
    fn strong_dissipativity_examples() {
        let bx = StateBox::symmetric(1, 50.0).unwrap();
        let r = check_strong_dissipativity(&ac(0.0), &bx, 20_000).unwrap();
        assert!(r.verdict.passed());
        assert!((r.fitted_n0.unwrap() - 1.0).abs() < 1e-6);
        assert!(r.fitted_n1.unwrap() <= 1.0 + 1e-9);

        let quintic = build_model(ModelParams::Polynomial {
            f: vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
            theta: vec![],
            g_power: 2.0,
            h: Some(5.0),
        })
        .unwrap();
        let r = check_strong_dissipativity(&quintic, &bx, 20_000).unwrap();
        assert!(r.verdict.passed());
        assert!((r.fitted_n0.unwrap() - 1.0).abs() < 1e-6);

        let r = check_strong_dissipativity(&poly(vec![0.0, 0.0, 0.0, 1.0]), &bx, 20_000).unwrap();
        assert!(!r.verdict.passed());
    }

    fn coag(ell: usize) -> BuiltinModel {
        build_model(ModelParams::Coagulation { ell, sigma: 0.0 }).unwrap()
    }

    #[test]
    fn system_examples() {
        let g = grid1();
        let none = TransportNoise::none(g);
        let a2 = DiffusionTensor::isotropic(1, &[1.0, 1.0]).unwrap();
        let spec = CoercivitySpec::new(2.0, StateBox::nonnegative(2, 20.0).unwrap(), 20_000);
        let r = check_system(&coag(2), &none, &a2, &spec).unwrap();
        assert!(r.verdict.passed());

        let sym = |chi: f64, sigma: f64| {
            build_model(ModelParams::SymbioticLv {
                lambda: [0.5, 0.5],
                chi: [chi, chi],
                sigma,
            })
            .unwrap()
        };
        let spec = CoercivitySpec::new(2.0, StateBox::nonnegative(2, 50.0).unwrap(), 20_000);
        assert!(check_system(&sym(1.0, 0.3), &none, &a2, &spec).unwrap().verdict.passed());
        assert!(!check_system(&sym(2.0, 0.0), &none, &a2, &spec).unwrap().verdict.passed());

        let mut bad = spec.clone();
        bad.weights_alpha = vec![1.0, 0.0];
        assert!(check_system(&sym(1.0, 0.0), &none, &a2, &bad).is_err());
    }

    #[test]
    fn system_with_one_component_matches_scalar() {
        let none = TransportNoise::none(grid1());
        let models = [ac(0.99), ac(1.5), poly(vec![0.0, 1.0, -1.0]), poly(vec![0.0, 0.0, 0.0, 1.0])];
        for m in &models {
            let spec = scalar_spec(2.0, 50.0);
            let scalar = check_scalar_pointwise(m, &none, &unit_a(), &spec).unwrap();
            let mut sys_spec = spec.clone();
            sys_spec.weights_alpha = vec![1.0];
            let system = check_system(m, &none, &unit_a(), &sys_spec).unwrap();
            assert_eq!(scalar.verdict, system.verdict, "{}", m.name());
        }
    }

    fn brusselator(fraction: f64) -> BuiltinModel {
        build_model(ModelParams::Brusselator {
            alpha: [0.0, 0.0, 1.5],
            beta: [1.0, 0.0, -2.5],
            sigma: 0.0,
            fraction,
            envelope: BrusselatorEnvelope::ThreeD,
            envelope_epsilon: 0.1,
            positive: true,
        })
        .unwrap()
    }

    #[test]
    fn brusselator_envelope_examples() {
        let none = TransportNoise::none(Grid::new(3, 4).unwrap());
        let a = DiffusionTensor::isotropic(3, &[1.0, 1.0]).unwrap();
        let bx = StateBox::nonnegative(2, 50.0).unwrap();
        let env = EnvelopeId::BrusselatorThreeD;
        let pass = check_growth_envelope(&brusselator(0.95), env, &none, &a, &bx, 20_000).unwrap();
        assert!(pass.verdict.passed(), "{pass:?}");
        let fail = check_growth_envelope(&brusselator(1.25), env, &none, &a, &bx, 20_000).unwrap();
        assert!(!fail.verdict.passed());
        assert_eq!(fail.component_verdicts, vec![Verdict::Fail, Verdict::Pass]);
        let zero = check_growth_envelope(&brusselator(0.0), env, &none, &a, &bx, 20_000).unwrap();
        assert!(zero.verdict.passed());
        assert_eq!(zero.fitted_m, 0.0);
        assert!(check_growth_envelope(&coag(2), env, &none, &a, &bx, 100).is_err());
        assert!("brusselator_4d".parse::<EnvelopeId>().is_err());
    }

    #[test]
    fn lotka_volterra_envelope_holds_for_canonical_noise() {
        let model = build_model(ModelParams::LotkaVolterra {
            lambda: [1.0, 0.5],
            chi: [[1.0, 1.0], [1.0, 0.5]],
            sigma: 0.3,
            fraction: 0.5,
        })
        .unwrap();
        let none = TransportNoise::none(grid1());
        let a = DiffusionTensor::isotropic(1, &[1.0, 1.0]).unwrap();
        let bx = StateBox::nonnegative(2, 50.0).unwrap();
        let r = check_growth_envelope(&model, EnvelopeId::LotkaVolterra, &none, &a, &bx, 20_000).unwrap();
        assert!(r.verdict.passed(), "{r:?}");
    }

    #[test]
    fn random_shape_examples() {
        assert_eq!(check_random_coercivity_shape(3.0, 3, 3.0).unwrap(), (1.0, 1.5, 2.0));
        let (a, b, c) = check_random_coercivity_shape(2.0, 1, 2.0).unwrap();
        assert_eq!((a, b), (1.0, 1.0));
        assert!((c - 4.0 / 3.0).abs() < 1e-15);
        assert!(check_random_coercivity_shape(3.0, 3, 1.5).is_err());
    }

    #[test]
    fn verdict_stable_under_box_doubling() {
        let none = TransportNoise::none(grid1());
        for (m, expected) in [(ac(0.9), true), (ac(1.5), false), (poly(vec![0.0, 0.0, 0.0, 1.0]), false)] {
            for half in [50.0, 100.0] {
                let r = check_scalar_pointwise(&m, &none, &unit_a(), &scalar_spec(2.0, half)).unwrap();
                assert_eq!(r.verdict.passed(), expected);
            }
        }
    }

    #[test]
    fn monotone_in_zeta_for_dissipative_drift() {
        let none = TransportNoise::none(grid1());
        let m = ac(0.0);
        let at4 = check_scalar_smooth(&m, &none, &unit_a(), &scalar_spec(4.0, 50.0)).unwrap();
        assert!(at4.verdict.passed());
        for zeta in [2.0, 2.5, 3.0, 3.5] {
            assert!(check_scalar_smooth(&m, &none, &unit_a(), &scalar_spec(zeta, 50.0)).unwrap().verdict.passed());
        }
    }

    #[test]
    fn fitted_constants_certify_fresh_points() {
        let none = TransportNoise::none(grid1());
        let m = ac(0.99);
        let a = unit_a();
        let spec = scalar_spec(3.0, 50.0);
        let cond = Condition::ScalarPointwise {
            model: &m,
            noise: &none,
            a: &a,
        };
        let report = check(&cond, &spec).unwrap();
        assert_eq!(count_violations(&cond, &spec, &report, 1_000_000, 99).unwrap(), 0);

        let strong = Condition::StrongDissipative { model: &m };
        let report = check(&strong, &spec).unwrap();
        assert_eq!(count_violations(&strong, &spec, &report, 1_000_000, 7).unwrap(), 0);
    }

    #[test]
    fn transport_cross_term_enters_pointwise_functional() {
        let g = grid1();
        let noise = crate::noise::build_kraichnan_noise(g, 1, 0.5, 1.0).unwrap();
        let m = ac(0.3);
        let r0 = check_scalar_pointwise(&m, &TransportNoise::none(g), &unit_a(), &scalar_spec(2.0, 10.0)).unwrap();
        let r1 = check_scalar_pointwise(&m, &noise, &unit_a(), &scalar_spec(2.0, 10.0)).unwrap();
        assert!(r1.fitted_c > r0.fitted_c);
    }
}
