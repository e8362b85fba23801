//! Reaction nonlinearities `f`, conservative fluxes `F` and noise coefficients `g`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::StateBox;

/// Evaluators of one reaction-diffusion model.
///
/// All evaluators take the time `t`, the point `x` and the state `y` of
/// length [`ell`](ReactionModel::ell); the built-in models ignore `t` and `x`.
pub trait ReactionModel: Send + Sync {
    fn ell(&self) -> usize;

    /// Growth exponent `h > 1` of the nonlinearities.
    fn growth_h(&self) -> f64;

    fn eval_f(&self, t: f64, x: &[f64; 3], y: &[f64], out: &mut [f64]);

    /// `true` if [`eval_flux`](ReactionModel::eval_flux) can be nonzero.
    fn has_flux(&self) -> bool {
        false
    }

    /// Conservative flux `F_i^j`, written row-major into `out` (`ell x dim`).
    fn eval_flux(&self, _t: f64, _x: &[f64; 3], _y: &[f64], _dim: usize, out: &mut [f64]) {
        out.fill(0.0);
    }

    /// Number of explicit noise modes `g_n`.
    fn n_g_modes(&self) -> usize;

    /// `g_{n,i}(t, x, y)` for every component `i`.
    fn g_mode(&self, t: f64, x: &[f64; 3], y: &[f64], n: usize, out: &mut [f64]);

    /// `sum_n |g_{n,i}|^2` per component.
    fn eval_g_sq(&self, t: f64, x: &[f64; 3], y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let mut tmp = vec![0.0; self.ell()];
        for n in 0..self.n_g_modes() {
            self.g_mode(t, x, y, n, &mut tmp);
            for (o, v) in out.iter_mut().zip(&tmp) {
                *o += v * v;
            }
        }
    }

    /// Whether the sign conditions that keep nonnegative data nonnegative hold.
    fn positivity_compliant(&self) -> bool;

    fn name(&self) -> &str;
}

/// Which growth envelope the canonical Brusselator noise saturates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BrusselatorEnvelope {
    /// `N_1 = M(1 + y1^2) + (1 - eps) y1^2 y2^2`, used in one and two dimensions.
    LowDim,
    /// `N_1 = M(1 + y1^2) + y1^2 y2^2 / 5`, used in three dimensions.
    #[default]
    ThreeD,
}

fn default_fraction() -> f64 {
    0.5
}

fn default_g_power() -> f64 {
    2.0
}

fn default_true() -> bool {
    true
}

fn default_envelope_epsilon() -> f64 {
    0.1
}

/// Parameters of the built-in models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelParams {
    /// `f = u - u^3`, `g_n = theta_n u^2`.
    AllenCahn {
        #[serde(default)]
        theta: Vec<f64>,
    },
    /// Predator-prey system with canonical noise saturating `fraction` of the growth envelope.
    LotkaVolterra {
        lambda: [f64; 2],
        chi: [[f64; 2]; 2],
        #[serde(default)]
        sigma: f64,
        #[serde(default = "default_fraction")]
        fraction: f64,
    },
    /// `f_i = -u_i^2 + chi_i u1 u2 + lambda_i u_i`, `g_{i,i} = sigma u_i`.
    SymbioticLv {
        lambda: [f64; 2],
        chi: [f64; 2],
        #[serde(default)]
        sigma: f64,
    },
    /// `f1 = -u1 u2^2 + alpha1 u1 + alpha2 u2 + alpha0`, `f2 = u1 u2^2 + beta1 u1 + beta2 u2 + beta0`.
    Brusselator {
        alpha: [f64; 3],
        beta: [f64; 3],
        #[serde(default)]
        sigma: f64,
        #[serde(default = "default_fraction")]
        fraction: f64,
        #[serde(default)]
        envelope: BrusselatorEnvelope,
        #[serde(default = "default_envelope_epsilon")]
        envelope_epsilon: f64,
        #[serde(default = "default_true")]
        positive: bool,
    },
    /// `f1 = -u1 u2^2 + gamma1 u1 + eta1`, `f2 = u1 u2^2 + gamma2 u2 + eta2`.
    GrayScott {
        gamma: [f64; 2],
        eta: [f64; 2],
        #[serde(default)]
        sigma: f64,
    },
    /// `f1 = -r1 u1 u2`, `f2 = r2 u1 u2 + r3 u2`.
    Sir {
        r: [f64; 3],
        #[serde(default)]
        sigma: f64,
    },
    /// `f_i = sum_{j<i} y_j y_{i-j} - 2 sum_j y_j y_i`, `g_{i,i} = sigma y_i`.
    Coagulation {
        ell: usize,
        #[serde(default)]
        sigma: f64,
    },
    /// Scalar `f(y) = sum_k f[k] y^k`, `g_n = theta_n |y|^g_power` (sign of `y` kept).
    Polynomial {
        f: Vec<f64>,
        #[serde(default)]
        theta: Vec<f64>,
        #[serde(default = "default_g_power")]
        g_power: f64,
        #[serde(default)]
        h: Option<f64>,
    },
}

impl ModelParams {
    /// Number of components without building the model.
    pub fn ell(&self) -> usize {
        match self {
            ModelParams::AllenCahn { .. } | ModelParams::Polynomial { .. } => 1,
            ModelParams::Coagulation { ell, .. } => *ell,
            _ => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::AllenCahn { .. } => "allen_cahn",
            ModelParams::LotkaVolterra { .. } => "lotka_volterra",
            ModelParams::SymbioticLv { .. } => "symbiotic_lv",
            ModelParams::Brusselator { .. } => "brusselator",
            ModelParams::GrayScott { .. } => "gray_scott",
            ModelParams::Sir { .. } => "sir",
            ModelParams::Coagulation { .. } => "coagulation",
            ModelParams::Polynomial { .. } => "polynomial",
        }
    }
}

/// A validated built-in model.
#[derive(Debug, Clone, PartialEq)]
pub struct BuiltinModel {
    params: ModelParams,
    h: f64,
    ell: usize,
    compliant: bool,
}

fn check_finite(values: &[f64], what: &str) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("{what} must be finite")))
    }
}

fn check_fraction(fraction: f64) -> Result<()> {
    if fraction >= 0.0 && fraction.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!("envelope fraction must be >= 0 (got {fraction})")))
    }
}

/// Validates parameters and assigns growth exponent and positivity metadata.
pub fn build_model(params: ModelParams) -> Result<BuiltinModel> {
    let (h, compliant) = match &params {
        ModelParams::AllenCahn { theta } => {
            check_finite(theta, "theta")?;
            (3.0, true)
        }
        ModelParams::LotkaVolterra {
            lambda,
            chi,
            sigma,
            fraction,
        } => {
            check_finite(lambda, "lambda")?;
            check_finite(&[chi[0][0], chi[0][1], chi[1][0], chi[1][1], *sigma], "chi and sigma")?;
            if chi.iter().flatten().any(|&c| c < 0.0) {
                return Err(Error::InvalidModel("interaction coefficients chi must be >= 0".into()));
            }
            check_fraction(*fraction)?;
            (2.0, true)
        }
        ModelParams::SymbioticLv { lambda, chi, sigma } => {
            check_finite(&[lambda[0], lambda[1], chi[0], chi[1], *sigma], "coefficients")?;
            (2.0, true)
        }
        ModelParams::Brusselator {
            alpha,
            beta,
            sigma,
            fraction,
            envelope_epsilon,
            positive,
            ..
        } => {
            check_finite(alpha, "alpha")?;
            check_finite(beta, "beta")?;
            check_finite(&[*sigma], "sigma")?;
            check_fraction(*fraction)?;
            if !(*envelope_epsilon > 0.0 && *envelope_epsilon < 1.0) {
                return Err(Error::InvalidModel("envelope_epsilon must lie in (0, 1)".into()));
            }
            let signs_ok = alpha[2] >= 0.0 && alpha[0] >= 0.0 && beta[1] >= 0.0 && beta[0] >= 0.0;
            if *positive && !signs_ok {
                return Err(Error::InvalidModel(
                    "positivity mode requires alpha2, alpha0, beta1, beta0 >= 0".into(),
                ));
            }
            (3.0, *positive && signs_ok)
        }
        ModelParams::GrayScott { gamma, eta, sigma } => {
            check_finite(&[gamma[0], gamma[1], eta[0], eta[1], *sigma], "coefficients")?;
            (3.0, eta[0] >= 0.0 && eta[1] >= 0.0)
        }
        ModelParams::Sir { r, sigma } => {
            check_finite(&[r[0], r[1], r[2], *sigma], "coefficients")?;
            (2.0, true)
        }
        ModelParams::Coagulation { ell, sigma } => {
            if *ell == 0 {
                return Err(Error::InvalidModel("coagulation needs ell >= 1".into()));
            }
            check_finite(&[*sigma], "sigma")?;
            (2.0, true)
        }
        ModelParams::Polynomial { f, theta, g_power, h } => {
            if f.is_empty() {
                return Err(Error::InvalidModel("polynomial needs at least one coefficient".into()));
            }
            check_finite(f, "f")?;
            check_finite(theta, "theta")?;
            if !(*g_power > 0.0) {
                return Err(Error::InvalidModel("g_power must be positive".into()));
            }
            let degree = f.iter().rposition(|&c| c != 0.0).unwrap_or(0) as f64;
            let h = h.unwrap_or(degree.max(2.0));
            if !(h > 1.0) {
                return Err(Error::InvalidModel(format!("growth exponent must exceed 1 (got {h})")));
            }
            (h, f[0] >= 0.0)
        }
    };
    let ell = params.ell();
    Ok(BuiltinModel {
        params,
        h,
        ell,
        compliant,
    })
}

impl BuiltinModel {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Vector-valued drift at `y` (convenience wrapper).
    pub fn f(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ell];
        self.eval_f(0.0, &[0.0; 3], y, &mut out);
        out
    }

    /// `sum_n |g_{n,i}|^2` at `y` (convenience wrapper).
    pub fn g_sq(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ell];
        self.eval_g_sq(0.0, &[0.0; 3], y, &mut out);
        out
    }

    /// `true` if the noise coefficients vanish identically.
    pub fn g_is_zero(&self) -> bool {
        match &self.params {
            ModelParams::AllenCahn { theta } | ModelParams::Polynomial { theta, .. } => theta.iter().all(|&t| t == 0.0),
            ModelParams::LotkaVolterra { sigma, fraction, chi, .. } => {
                *sigma == 0.0 && (*fraction == 0.0 || chi.iter().flatten().all(|&c| c == 0.0))
            }
            ModelParams::Brusselator { sigma, fraction, .. } => *sigma == 0.0 && *fraction == 0.0,
            ModelParams::SymbioticLv { sigma, .. }
            | ModelParams::GrayScott { sigma, .. }
            | ModelParams::Sir { sigma, .. }
            | ModelParams::Coagulation { sigma, .. } => *sigma == 0.0,
        }
    }

    /// Coefficient `c` of the `y1^2 y2^2` term in the Brusselator `N_1` envelope.
    pub fn brusselator_envelope_coefficient(&self) -> Option<f64> {
        match &self.params {
            ModelParams::Brusselator {
                envelope,
                envelope_epsilon,
                ..
            } => Some(match envelope {
                BrusselatorEnvelope::ThreeD => 0.2,
                BrusselatorEnvelope::LowDim => 1.0 - envelope_epsilon,
            }),
            _ => None,
        }
    }
}

fn poly(coeffs: &[f64], y: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * y + c)
}

impl ReactionModel for BuiltinModel {
    fn ell(&self) -> usize {
        self.ell
    }

    fn growth_h(&self) -> f64 {
        self.h
    }

    fn name(&self) -> &str {
        self.params.name()
    }

    fn positivity_compliant(&self) -> bool {
        self.compliant
    }

    fn eval_f(&self, _t: f64, _x: &[f64; 3], y: &[f64], out: &mut [f64]) {
        match &self.params {
            ModelParams::AllenCahn { .. } => out[0] = y[0] - y[0] * y[0] * y[0],
            ModelParams::LotkaVolterra { lambda, chi, .. } => {
                out[0] = lambda[0] * y[0] - chi[0][0] * y[0] * y[0] - chi[0][1] * y[0] * y[1];
                out[1] = lambda[1] * y[1] - chi[1][1] * y[1] * y[1] + chi[1][0] * y[0] * y[1];
            }
            ModelParams::SymbioticLv { lambda, chi, .. } => {
                for i in 0..2 {
                    out[i] = -y[i] * y[i] + chi[i] * y[0] * y[1] + lambda[i] * y[i];
                }
            }
            ModelParams::Brusselator { alpha, beta, .. } => {
                let r = y[0] * y[1] * y[1];
                out[0] = -r + alpha[1] * y[0] + alpha[2] * y[1] + alpha[0];
                out[1] = r + beta[1] * y[0] + beta[2] * y[1] + beta[0];
            }
            ModelParams::GrayScott { gamma, eta, .. } => {
                let r = y[0] * y[1] * y[1];
                out[0] = -r + gamma[0] * y[0] + eta[0];
                out[1] = r + gamma[1] * y[1] + eta[1];
            }
            ModelParams::Sir { r, .. } => {
                out[0] = -r[0] * y[0] * y[1];
                out[1] = r[1] * y[0] * y[1] + r[2] * y[1];
            }
            ModelParams::Coagulation { ell, .. } => {
                let total: f64 = y[..*ell].iter().sum();
                for i in 0..*ell {
                    // 0-based: pairs (j, i - 1 - j) with sizes adding up to i + 1.
                    let gain: f64 = (0..i).map(|j| y[j] * y[i - 1 - j]).sum();
                    out[i] = gain - 2.0 * total * y[i];
                }
            }
            ModelParams::Polynomial { f, .. } => out[0] = poly(f, y[0]),
        }
    }

    fn n_g_modes(&self) -> usize {
        match &self.params {
            ModelParams::AllenCahn { theta } | ModelParams::Polynomial { theta, .. } => theta.len(),
            ModelParams::Coagulation { ell, .. } => *ell,
            _ => 2,
        }
    }

    fn g_mode(&self, _t: f64, _x: &[f64; 3], y: &[f64], n: usize, out: &mut [f64]) {
        out.fill(0.0);
        match &self.params {
            ModelParams::AllenCahn { theta } => {
                if let Some(th) = theta.get(n) {
                    out[0] = th * y[0] * y[0];
                }
            }
            ModelParams::Polynomial { theta, g_power, .. } => {
                if let Some(th) = theta.get(n) {
                    out[0] = th * y[0].abs().powf(*g_power);
                }
            }
            ModelParams::LotkaVolterra {
                chi, sigma, fraction, ..
            } => match n {
                0 => {
                    let inner = sigma * sigma + 2.0 * fraction * (chi[0][0] * y[0].abs() + chi[0][1] * y[1].abs());
                    out[0] = y[0] * inner.sqrt();
                }
                1 => {
                    let inner = sigma * sigma * (1.0 + y[0].abs()) + 2.0 * fraction * chi[1][1] * y[1].abs();
                    out[1] = y[1] * inner.sqrt();
                }
                _ => {}
            },
            ModelParams::Brusselator { sigma, fraction, .. } => {
                let c = self.brusselator_envelope_coefficient().unwrap_or(0.0);
                match n {
                    0 => out[0] = y[0] * (sigma * sigma + 2.0 * fraction * c * y[1] * y[1]).sqrt(),
                    1 => out[1] = sigma * y[1],
                    _ => {}
                }
            }
            ModelParams::SymbioticLv { sigma, .. }
            | ModelParams::GrayScott { sigma, .. }
            | ModelParams::Sir { sigma, .. }
            | ModelParams::Coagulation { sigma, .. } => {
                if n < self.ell {
                    out[n] = sigma * y[n];
                }
            }
        }
    }
}

/// Empirical Lipschitz constant of `f` relative to the growth weight
/// `(1 + |y|^{h-1} + |y'|^{h-1}) |y - y'|` over `samples` random pairs.
pub fn lipschitz_probe(model: &dyn ReactionModel, bx: &StateBox, samples: usize) -> Result<f64> {
    if samples < 2 {
        return Err(Error::InvalidArgument("lipschitz probe needs at least 2 samples".into()));
    }
    if bx.dim() != model.ell() {
        return Err(Error::DimensionMismatch {
            what: "box dimension",
            expected: model.ell(),
            got: bx.dim(),
        });
    }
    let h = model.growth_h();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let ell = model.ell();
    let (mut fy, mut fz) = (vec![0.0; ell], vec![0.0; ell]);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let y = bx.uniform(&mut rng);
        let z = bx.uniform(&mut rng);
        model.eval_f(0.0, &[0.0; 3], &y, &mut fy);
        model.eval_f(0.0, &[0.0; 3], &z, &mut fz);
        let diff: Vec<f64> = y.iter().zip(&z).map(|(a, b)| a - b).collect();
        let dist = norm(&diff);
        if dist == 0.0 {
            continue;
        }
        let df: Vec<f64> = fy.iter().zip(&fz).map(|(a, b)| a - b).collect();
        let weight = (1.0 + norm(&y).powf(h - 1.0) + norm(&z).powf(h - 1.0)) * dist;
        worst = worst.max(norm(&df) / weight);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn ac(theta: Vec<f64>) -> BuiltinModel {
        build_model(ModelParams::AllenCahn { theta }).unwrap()
    }

    fn lv() -> BuiltinModel {
        build_model(ModelParams::LotkaVolterra {
            lambda: [1.0, 1.0],
            chi: [[1.0, 1.0], [1.0, 1.0]],
            sigma: 0.3,
            fraction: 0.5,
        })
        .unwrap()
    }

    fn brusselator(sigma: f64, fraction: f64) -> BuiltinModel {
        build_model(ModelParams::Brusselator {
            alpha: [0.0, 0.0, 1.5],
            beta: [1.0, 0.0, -2.5],
            sigma,
            fraction,
            envelope: BrusselatorEnvelope::ThreeD,
            envelope_epsilon: 0.1,
            positive: true,
        })
        .unwrap()
    }

    fn all_compliant() -> Vec<BuiltinModel> {
        vec![
            ac(vec![0.6, 0.8]),
            lv(),
            brusselator(0.2, 0.5),
            build_model(ModelParams::SymbioticLv {
                lambda: [0.5, -0.2],
                chi: [1.0, 0.5],
                sigma: 0.4,
            })
            .unwrap(),
            build_model(ModelParams::GrayScott {
                gamma: [-0.04, -0.1],
                eta: [0.04, 0.0],
                sigma: 0.1,
            })
            .unwrap(),
            build_model(ModelParams::Sir {
                r: [1.0, 1.0, -0.5],
                sigma: 0.2,
            })
            .unwrap(),
            build_model(ModelParams::Coagulation { ell: 4, sigma: 0.3 }).unwrap(),
        ]
    }

    #[test]
    fn growth_exponents() {
        assert_eq!(ac(vec![]).growth_h(), 3.0);
        assert_eq!(lv().growth_h(), 2.0);
        assert_eq!(brusselator(0.0, 0.0).growth_h(), 3.0);
        assert_eq!(build_model(ModelParams::Coagulation { ell: 3, sigma: 0.0 }).unwrap().growth_h(), 2.0);
        let quintic = build_model(ModelParams::Polynomial {
            f: vec![0.0, 0.0, 0.0, 0.0, 0.0, -1.0],
            theta: vec![],
            g_power: 2.0,
            h: None,
        })
        .unwrap();
        assert_eq!(quintic.growth_h(), 5.0);
    }

    #[test]
    fn drift_examples() {
        assert_eq!(ac(vec![]).f(&[2.0]), vec![-6.0]);
        let coag = build_model(ModelParams::Coagulation { ell: 2, sigma: 0.0 }).unwrap();
        assert_eq!(coag.f(&[1.0, 1.0]), vec![-4.0, -3.0]);
        let bru = build_model(ModelParams::Brusselator {
            alpha: [0.0; 3],
            beta: [0.0; 3],
            sigma: 0.0,
            fraction: 0.0,
            envelope: BrusselatorEnvelope::ThreeD,
            envelope_epsilon: 0.1,
            positive: true,
        })
        .unwrap();
        assert_eq!(bru.f(&[1.0, 2.0]), vec![-4.0, 4.0]);
        assert_eq!(lv().f(&[1.0, 1.0]), vec![-1.0, 1.0]);
        let sir = build_model(ModelParams::Sir { r: [1.0; 3], sigma: 0.0 }).unwrap();
        assert_eq!(sir.f(&[2.0, 3.0]), vec![-6.0, 9.0]);
        let sym = build_model(ModelParams::SymbioticLv {
            lambda: [0.0; 2],
            chi: [1.0; 2],
            sigma: 0.0,
        })
        .unwrap();
        assert_eq!(sym.f(&[1.0, 1.0]), vec![0.0, 0.0]);
    }

    /// Direct transcription of the 1-based coagulation sum.
    fn coag_oracle(y: &[f64]) -> Vec<f64> {
        let ell = y.len();
        (1..=ell)
            .map(|i| {
                let gain: f64 = (1..i).map(|j| y[j - 1] * y[i - j - 1]).sum();
                let loss: f64 = (1..=ell).map(|j| y[j - 1] * y[i - 1]).sum();
                gain - 2.0 * loss
            })
            .collect()
    }

    #[test]
    fn coagulation_matches_oracle() {
        let model = build_model(ModelParams::Coagulation { ell: 4, sigma: 0.0 }).unwrap();
        let y = [0.3, 1.7, 2.2, 0.9];
        let got = model.f(&y);
        for (a, b) in got.iter().zip(coag_oracle(&y)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_examples() {
        let unit = ac(vec![1.0]);
        assert_eq!(unit.g_sq(&[2.0]), vec![16.0]);
        assert!((ac(vec![0.6, 0.8]).g_sq(&[1.0])[0] - 1.0).abs() < 1e-15);
        for m in all_compliant() {
            let zero = vec![0.0; m.ell()];
            assert!(m.g_sq(&zero).iter().all(|&v| v == 0.0), "{}", m.name());
        }
    }

    #[test]
    fn brusselator_canonical_noise_saturates_fraction() {
        let m = brusselator(0.0, 0.95);
        let y = [3.0, 4.0];
        let half = 0.5 * m.g_sq(&y)[0];
        assert!((half - 0.95 * 0.2 * 9.0 * 16.0).abs() < 1e-10);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_model(ModelParams::LotkaVolterra {
            lambda: [1.0, 1.0],
            chi: [[1.0, -0.1], [1.0, 1.0]],
            sigma: 0.0,
            fraction: 0.5,
        })
        .is_err());
        assert!(build_model(ModelParams::Brusselator {
            alpha: [0.0, 0.0, -1.0],
            beta: [0.0; 3],
            sigma: 0.0,
            fraction: 0.5,
            envelope: BrusselatorEnvelope::ThreeD,
            envelope_epsilon: 0.1,
            positive: true,
        })
        .is_err());
        let signed = build_model(ModelParams::Brusselator {
            alpha: [0.0, 0.0, -1.0],
            beta: [0.0; 3],
            sigma: 0.0,
            fraction: 0.5,
            envelope: BrusselatorEnvelope::ThreeD,
            envelope_epsilon: 0.1,
            positive: false,
        })
        .unwrap();
        assert!(!signed.positivity_compliant());
    }

    #[test]
    fn params_json_round_trip() {
        for m in all_compliant() {
            let s = serde_json::to_string(m.params()).unwrap();
            let back: ModelParams = serde_json::from_str(&s).unwrap();
            assert_eq!(&back, m.params());
        }
        let bad = r#"{"name":"allen_cahn","theta":[1.0],"bogus":1}"#;
        assert!(serde_json::from_str::<ModelParams>(bad).is_err());
    }

    #[test]
    fn lipschitz_examples() {
        let bx = StateBox::symmetric(1, 10.0).unwrap();
        let r = lipschitz_probe(&ac(vec![]), &bx, 10_000).unwrap();
        assert!(r.is_finite() && r <= 4.0);
        let linear = build_model(ModelParams::Polynomial {
            f: vec![0.0, 1.0],
            theta: vec![],
            g_power: 1.0,
            h: Some(2.0),
        })
        .unwrap();
        assert!(lipschitz_probe(&linear, &bx, 1000).unwrap() <= 1.0);
        let coag = build_model(ModelParams::Coagulation { ell: 3, sigma: 0.0 }).unwrap();
        let r = lipschitz_probe(&coag, &StateBox::nonnegative(3, 10.0).unwrap(), 10_000).unwrap();
        assert!(r.is_finite());
        assert!(lipschitz_probe(&coag, &StateBox::nonnegative(3, 10.0).unwrap(), 1).is_err());
    }

    #[test]
    fn positivity_compliance_on_random_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in all_compliant() {
            assert!(m.positivity_compliant());
            let ell = m.ell();
            let mut f = vec![0.0; ell];
            let mut g = vec![0.0; ell];
            for _ in 0..100_000 / 7 {
                let mut y: Vec<f64> = (0..ell).map(|_| 10.0 * rng.random::<f64>()).collect();
                let i = rng.random_range(0..ell);
                y[i] = 0.0;
                m.eval_f(0.0, &[0.0; 3], &y, &mut f);
                assert!(f[i] >= 0.0, "{} f_{i}({y:?}) = {}", m.name(), f[i]);
                for n in 0..m.n_g_modes() {
                    m.g_mode(0.0, &[0.0; 3], &y, n, &mut g);
                    assert_eq!(g[i], 0.0);
                }
            }
        }
    }

    #[test]
    fn coagulation_cubic_dissipation_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ell in [2, 3, 4] {
            let m = build_model(ModelParams::Coagulation { ell, sigma: 0.0 }).unwrap();
            for _ in 0..100_000 {
                let y: Vec<f64> = (0..ell).map(|_| 10.0 * rng.random::<f64>()).collect();
                let lhs: f64 = y.iter().zip(m.f(&y)).map(|(a, b)| a * b).sum();
                let l2sq: f64 = y.iter().map(|v| v * v).sum();
                let l1: f64 = y.iter().sum();
                assert!(lhs <= -l2sq * l1 + 1e-9 * (1.0 + l2sq * l1));
            }
        }
    }

    proptest! {
        #[test]
        fn allen_cahn_drift_dissipative(y in -1e3f64..1e3) {
            let m = ac(vec![]);
            let yf = y * m.f(&[y])[0];
            prop_assert!(yf <= -0.5 * y.powi(4) + 1.0 + 1e-12 * y.powi(4));
        }

        #[test]
        fn g_sq_nonnegative(y0 in -50.0f64..50.0, y1 in -50.0f64..50.0) {
            for m in all_compliant() {
                let y = [y0, y1, y0.abs(), y1.abs()];
                let v = m.g_sq(&y[..m.ell()]);
                prop_assert!(v.iter().all(|&x| x >= 0.0));
            }
        }
    }
}
