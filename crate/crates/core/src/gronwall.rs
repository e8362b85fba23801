//! Monte Carlo experiments for the stochastic Gronwall inequality
//! `X(t) <= int_0^t X dA + M(t) + H(t)`.
//!
//! Paths realize the inequality with equality:
//! `X_{k+1} = X_k (1 + dA_k + vol dW_k) + dH_k`, `X_0 = H(0)`, so the
//! martingale part is `M = int vol X dW`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::BrownianDriver;
use crate::stats::{mean, stable_sum, wilson_interval, Z95};

/// `A(t) = kappa t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockSpec {
    pub kappa: f64,
}

/// Nondecreasing forcing `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingSpec {
    Constant { h: f64 },
    /// `H(t) = h0 + slope t`.
    Affine { h0: f64, slope: f64 },
}

impl ForcingSpec {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            ForcingSpec::Constant { h } => h,
            ForcingSpec::Affine { h0, slope } => h0 + slope * t,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match *self {
            ForcingSpec::Constant { h } => ForcingSpec::Constant { h: c * h },
            ForcingSpec::Affine { h0, slope } => ForcingSpec::Affine {
                h0: c * h0,
                slope: c * slope,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MartingaleKind {
    None,
    BrownianIntegral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpec {
    pub volatility: f64,
    pub kind: MartingaleKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallProcess {
    pub clock: ClockSpec,
    pub forcing: ForcingSpec,
    pub martingale: MartingaleSpec,
    pub t_end: f64,
}

impl GronwallProcess {
    pub fn validate(&self) -> Result<()> {
        if !(self.clock.kappa >= 0.0) {
            return Err(Error::InvalidArgument("A must be nondecreasing (kappa >= 0)".into()));
        }
        let ok = match self.forcing {
            ForcingSpec::Constant { h } => h >= 0.0,
            ForcingSpec::Affine { h0, slope } => h0 >= 0.0 && slope >= 0.0,
        };
        if !ok {
            return Err(Error::InvalidArgument("H must be nonnegative and nondecreasing".into()));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidArgument("t_end must be positive".into()));
        }
        if !(self.martingale.volatility >= 0.0) {
            return Err(Error::InvalidArgument("volatility must be >= 0".into()));
        }
        Ok(())
    }

    fn volatility(&self) -> f64 {
        match self.martingale.kind {
            MartingaleKind::None => 0.0,
            MartingaleKind::BrownianIntegral => self.martingale.volatility,
        }
    }
}

/// Per-path summaries at the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub sup_x: Vec<f64>,
    pub x_end: Vec<f64>,
    pub a_end: Vec<f64>,
    pub h_end: Vec<f64>,
}

impl PathEnsemble {
    pub fn len(&self) -> usize {
        self.sup_x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sup_x.is_empty()
    }
}

/// Simulates `n_paths` paths; path `j` uses the Brownian stream `(seed, j)`.
pub fn simulate_paths(process: &GronwallProcess, n_paths: usize, dt: f64, seed: u64) -> Result<PathEnsemble> {
    process.validate()?;
    if n_paths == 0 {
        return Err(Error::InvalidArgument("at least one path is required".into()));
    }
    if !(dt > 0.0 && dt <= process.t_end) {
        return Err(Error::InvalidArgument(format!("dt must lie in (0, t_end] (got {dt})")));
    }
    let steps = ((process.t_end / dt).round() as u64).max(1);
    let vol = process.volatility();
    let kappa = process.clock.kappa;
    let rows: Vec<[f64; 4]> = (0..n_paths)
        .into_par_iter()
        .map(|j| {
            let mut drv = BrownianDriver::new(1, seed, j as u64);
            let mut x = process.forcing.at(0.0);
            let mut sup = x;
            for k in 0..steps {
                let dw = if vol > 0.0 {
                    drv.increments_at(k, dt).expect("positive dt")[0]
                } else {
                    0.0
                };
                let t0 = k as f64 * dt;
                let dh = process.forcing.at(t0 + dt) - process.forcing.at(t0);
                x = (x * (1.0 + kappa * dt + vol * dw) + dh).max(0.0);
                sup = sup.max(x);
            }
            let t = steps as f64 * dt;
            [sup, x, kappa * t, process.forcing.at(t)]
        })
        .collect();
    Ok(PathEnsemble {
        sup_x: rows.iter().map(|r| r[0]).collect(),
        x_end: rows.iter().map(|r| r[1]).collect(),
        a_end: rows.iter().map(|r| r[2]).collect(),
        h_end: rows.iter().map(|r| r[3]).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GronwallQuery {
    pub gamma: f64,
    pub lambda: f64,
    pub r: f64,
    pub t_end: f64,
    pub p: f64,
}

impl GronwallQuery {
    fn validate(&self) -> Result<()> {
        if [self.gamma, self.lambda, self.r, self.t_end].iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidArgument("gamma, lambda, R and T must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    /// Empirical `P(sup X > gamma)`.
    pub lhs: f64,
    pub lhs_upper: f64,
    /// `(e^R / gamma) E(H_T min lambda) + P(H_T > lambda) + P(A_T > R)`.
    pub rhs: f64,
    pub rhs_lower: f64,
    pub pass: bool,
}

pub const DEFAULT_SLACK: f64 = 0.05;

/// Compares the exceedance frequency of `sup X` with the tail bound.
pub fn verify_tail_bound(paths: &PathEnsemble, q: &GronwallQuery, slack: f64) -> Result<TailCheck> {
    q.validate()?;
    let n = paths.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty path ensemble".into()));
    }
    let exceed = paths.sup_x.iter().filter(|x| **x > q.gamma).count();
    let (_, lhs_upper) = wilson_interval(exceed, n, Z95);
    let capped: Vec<f64> = paths.h_end.iter().map(|h| h.min(q.lambda)).collect();
    let m = mean(&capped);
    let se = crate::stats::std_error(&capped);
    let h_big = paths.h_end.iter().filter(|h| **h > q.lambda).count();
    let a_big = paths.a_end.iter().filter(|a| **a > q.r).count();
    let factor = q.r.exp() / q.gamma;
    let nf = n as f64;
    let rhs = factor * m + h_big as f64 / nf + a_big as f64 / nf;
    let rhs_lower = factor * (m - Z95 * se).max(0.0) + wilson_interval(h_big, n, Z95).0 + wilson_interval(a_big, n, Z95).0;
    Ok(TailCheck {
        lhs: exceed as f64 / nf,
        lhs_upper,
        rhs,
        rhs_lower,
        pass: lhs_upper <= rhs_lower * (1.0 + slack),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpRatio {
    pub ratio: f64,
    pub stderr: f64,
}

/// `||e^{-A_T} sup X||_p / ||H_T||_p` with a delta-method standard error.
pub fn verify_lp_bound(paths: &PathEnsemble, q: &GronwallQuery) -> Result<LpRatio> {
    if !(q.p > 0.0 && q.p < 1.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 1) (got {})", q.p)));
    }
    let n = paths.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty path ensemble".into()));
    }
    let num: Vec<f64> = paths
        .sup_x
        .iter()
        .zip(&paths.a_end)
        .map(|(x, a)| ((-a).exp() * x).powf(q.p))
        .collect();
    let den: Vec<f64> = paths.h_end.iter().map(|h| h.powf(q.p)).collect();
    let (m1, m2) = (mean(&num), mean(&den));
    if m2 == 0.0 {
        if m1 == 0.0 {
            return Ok(LpRatio { ratio: 0.0, stderr: 0.0 });
        }
        return Err(Error::InvalidArgument("||H_T||_p = 0 with a nonzero numerator".into()));
    }
    let ratio = (m1 / m2).powf(1.0 / q.p);
    let nf = n as f64;
    let cov = |a: &[f64], ma: f64, b: &[f64], mb: f64| {
        if n < 2 {
            return 0.0;
        }
        let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).collect();
        stable_sum(&terms) / (nf - 1.0)
    };
    let v11 = cov(&num, m1, &num, m1);
    let v22 = cov(&den, m2, &den, m2);
    let v12 = cov(&num, m1, &den, m2);
    let var_log = if m1 > 0.0 {
        (v11 / (m1 * m1) + v22 / (m2 * m2) - 2.0 * v12 / (m1 * m2)) / nf / (q.p * q.p)
    } else {
        0.0
    };
    Ok(LpRatio {
        ratio,
        stderr: ratio * var_log.max(0.0).sqrt(),
    })
}

/// One row of the built-in matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub kappa: f64,
    pub volatility: f64,
    pub forcing: String,
    pub gamma: f64,
    pub check: TailCheck,
}

/// The twelve configurations `A in {0, t, 2t}`, `vol in {0, 1}`, `H in {1, t + 1}` at `T = 1`.
pub fn test_matrix() -> Vec<GronwallProcess> {
    let mut out = Vec::new();
    for kappa in [0.0, 1.0, 2.0] {
        for vol in [0.0, 1.0] {
            for forcing in [ForcingSpec::Constant { h: 1.0 }, ForcingSpec::Affine { h0: 1.0, slope: 1.0 }] {
                out.push(GronwallProcess {
                    clock: ClockSpec { kappa },
                    forcing,
                    martingale: MartingaleSpec {
                        volatility: vol,
                        kind: if vol > 0.0 {
                            MartingaleKind::BrownianIntegral
                        } else {
                            MartingaleKind::None
                        },
                    },
                    t_end: 1.0,
                });
            }
        }
    }
    out
}

/// Thresholds checked per configuration.
pub const MATRIX_GAMMAS: [f64; 7] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 64.0];

/// Runs the tail check of every matrix configuration over [`MATRIX_GAMMAS`],
/// with `R = A(T)` and `lambda = 2 H(T)`.
pub fn run_matrix(n_paths: usize, dt: f64, seed: u64, slack: f64) -> Result<Vec<MatrixRow>> {
    let mut rows = Vec::new();
    for (c, process) in test_matrix().iter().enumerate() {
        let paths = simulate_paths(process, n_paths, dt, seed.wrapping_add(c as u64))?;
        let r = (process.clock.kappa * process.t_end).max(1e-12);
        let lambda = 2.0 * process.forcing.at(process.t_end);
        for gamma in MATRIX_GAMMAS {
            let q = GronwallQuery {
                gamma,
                lambda,
                r,
                t_end: process.t_end,
                p: 0.5,
            };
            rows.push(MatrixRow {
                kappa: process.clock.kappa,
                volatility: process.martingale.volatility,
                forcing: match process.forcing {
                    ForcingSpec::Constant { .. } => "constant".into(),
                    ForcingSpec::Affine { .. } => "affine".into(),
                },
                gamma,
                check: verify_tail_bound(&paths, &q, slack)?,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn process(kappa: f64, vol: f64, forcing: ForcingSpec) -> GronwallProcess {
        GronwallProcess {
            clock: ClockSpec { kappa },
            forcing,
            martingale: MartingaleSpec {
                volatility: vol,
                kind: if vol > 0.0 {
                    MartingaleKind::BrownianIntegral
                } else {
                    MartingaleKind::None
                },
            },
            t_end: 1.0,
        }
    }

    fn query(gamma: f64) -> GronwallQuery {
        GronwallQuery {
            gamma,
            lambda: 4.0,
            r: 2.0,
            t_end: 1.0,
            p: 0.5,
        }
    }

    #[test]
    fn degenerate_recursion_is_constant() {
        let p = simulate_paths(&process(0.0, 0.0, ForcingSpec::Constant { h: 3.0 }), 4, 0.01, 1).unwrap();
        assert!(p.x_end.iter().chain(&p.sup_x).all(|x| *x == 3.0));
    }

    #[test]
    fn equality_case_grows_exponentially() {
        let p = simulate_paths(&process(1.0, 0.0, ForcingSpec::Constant { h: 1.0 }), 1, 1e-4, 1).unwrap();
        assert!((p.x_end[0] / 1f64.exp() - 1.0).abs() < 0.02);
    }

    #[test]
    fn zero_volatility_paths_coincide() {
        let p = simulate_paths(&process(2.0, 0.0, ForcingSpec::Affine { h0: 1.0, slope: 1.0 }), 8, 1e-3, 5).unwrap();
        assert!(p.x_end.iter().all(|x| *x == p.x_end[0]));
    }

    #[test]
    fn tail_examples() {
        let det = simulate_paths(&process(0.0, 0.0, ForcingSpec::Constant { h: 1.0 }), 10, 0.01, 1).unwrap();
        let c = verify_tail_bound(&det, &query(2.0), DEFAULT_SLACK).unwrap();
        assert_eq!(c.lhs, 0.0);
        assert!(c.pass);

        let noisy = simulate_paths(&process(1.0, 1.0, ForcingSpec::Constant { h: 1.0 }), 10_000, 1e-3, 2).unwrap();
        for gamma in [1.0, 5.0, 20.0, 100.0] {
            assert!(verify_tail_bound(&noisy, &query(gamma), DEFAULT_SLACK).unwrap().pass);
        }
        let tiny = verify_tail_bound(&noisy, &query(1e-9), DEFAULT_SLACK).unwrap();
        assert!(tiny.rhs >= 1.0 && tiny.pass);
        assert!(verify_tail_bound(&noisy, &query(0.0), DEFAULT_SLACK).is_err());
    }

    #[test]
    fn lp_examples() {
        let det = simulate_paths(&process(0.0, 0.0, ForcingSpec::Constant { h: 1.0 }), 10, 0.01, 1).unwrap();
        assert_eq!(verify_lp_bound(&det, &query(1.0)).unwrap().ratio, 1.0);

        let base = process(1.0, 1.0, ForcingSpec::Constant { h: 1.0 });
        let a = simulate_paths(&base, 4000, 1e-3, 9).unwrap();
        let mut scaled = base;
        scaled.forcing = base.forcing.scaled(10.0);
        let b = simulate_paths(&scaled, 4000, 1e-3, 9).unwrap();
        let ra = verify_lp_bound(&a, &query(1.0)).unwrap();
        let rb = verify_lp_bound(&b, &query(1.0)).unwrap();
        assert!((ra.ratio - rb.ratio).abs() <= 3.0 * ra.stderr.max(1e-12));

        let mut q9 = query(1.0);
        q9.p = 0.9;
        assert!(verify_lp_bound(&a, &q9).unwrap().ratio.is_finite());
        q9.p = 1.0;
        assert!(verify_lp_bound(&a, &q9).is_err());
    }

    #[test]
    fn joint_scaling_is_equivariant() {
        let base = process(1.0, 1.0, ForcingSpec::Affine { h0: 1.0, slope: 1.0 });
        let mut scaled = base;
        scaled.forcing = base.forcing.scaled(4.0);
        let a = simulate_paths(&base, 2000, 1e-3, 3).unwrap();
        let b = simulate_paths(&scaled, 2000, 1e-3, 3).unwrap();
        for gamma in [1.0, 3.0, 10.0] {
            let fa = verify_tail_bound(&a, &query(gamma), 0.0).unwrap().lhs;
            let mut q = query(4.0 * gamma);
            q.lambda *= 4.0;
            let fb = verify_tail_bound(&b, &q, 0.0).unwrap().lhs;
            assert_eq!(fa, fb);
        }
    }

    #[test]
    fn invalid_processes_rejected() {
        assert!(simulate_paths(&process(-1.0, 0.0, ForcingSpec::Constant { h: 1.0 }), 1, 0.1, 0).is_err());
        assert!(simulate_paths(&process(0.0, 0.0, ForcingSpec::Affine { h0: 1.0, slope: -1.0 }), 1, 0.1, 0).is_err());
        assert!(simulate_paths(&process(0.0, 0.0, ForcingSpec::Constant { h: 1.0 }), 0, 0.1, 0).is_err());
        assert_eq!(test_matrix().len(), 12);
    }
}
