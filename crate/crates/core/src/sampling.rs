//! State-space boxes and deterministic low-discrepancy sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Axis-aligned box `prod_i [lo_i, hi_i]` in `R^ell`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl StateBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::InvalidArgument("box bounds must have equal nonzero length".into()));
        }
        if lo.len() > PRIMES.len() {
            return Err(Error::InvalidArgument(format!(
                "boxes of dimension above {} are not supported",
                PRIMES.len()
            )));
        }
        for (a, b) in lo.iter().zip(&hi) {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidArgument(format!("degenerate box interval [{a}, {b}]")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// `[-w, w]^ell`.
    pub fn symmetric(ell: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; ell], vec![half_width; ell])
    }

    /// `[0, w]^ell`, the box restricted to the nonnegative cone.
    pub fn nonnegative(ell: usize, width: f64) -> Result<Self> {
        Self::new(vec![0.0; ell], vec![width; ell])
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Largest `|y_i|` over the box, per axis.
    pub fn extent(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| a.abs().max(b.abs())).collect()
    }

    /// Normalized radius `max_i |y_i| / extent_i`, in `[0, 1]` inside the box.
    pub fn shell_radius(&self, y: &[f64]) -> f64 {
        y.iter()
            .zip(self.extent())
            .map(|(v, e)| if e > 0.0 { v.abs() / e } else { 0.0 })
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        y.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    pub fn clamp(&self, y: &mut [f64]) {
        for (v, (a, b)) in y.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*a, *b);
        }
    }

    /// The same box scaled about the origin.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.lo.iter().map(|v| v * factor).collect(),
            self.hi.iter().map(|v| v * factor).collect(),
        )
    }

    /// All `2^ell` vertices.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let ell = self.dim();
        (0..1usize << ell)
            .map(|mask| {
                (0..ell)
                    .map(|i| if mask >> i & 1 == 1 { self.hi[i] } else { self.lo[i] })
                    .collect()
            })
            .collect()
    }

    /// Points along each coordinate axis through the box centre, plus the
    /// face midpoints and the origin when it lies inside.
    pub fn axis_points(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let ell = self.dim();
        let centre: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| if *a <= 0.0 && *b >= 0.0 { 0.0 } else { 0.5 * (a + b) })
            .collect();
        let mut out = vec![centre.clone()];
        for i in 0..ell {
            for j in 0..=per_axis {
                let mut p = centre.clone();
                p[i] = self.lo[i] + (self.hi[i] - self.lo[i]) * j as f64 / per_axis.max(1) as f64;
                out.push(p);
            }
        }
        out
    }

    /// Uniform pseudo-random point.
    pub fn uniform(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }
}

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * f;
        index /= base;
        f *= inv;
    }
    out
}

/// `count` Halton points in `bx` with a Cranley-Patterson rotation drawn from `seed`.
pub fn halton_points(bx: &StateBox, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: Vec<f64> = (0..bx.dim()).map(|_| rng.random::<f64>()).collect();
    (0..count)
        .map(|i| {
            (0..bx.dim())
                .map(|j| {
                    let u = (radical_inverse(i as u64 + 1, PRIMES[j]) + shift[j]).fract();
                    bx.lo[j] + (bx.hi[j] - bx.lo[j]) * u
                })
                .collect()
        })
        .collect()
}
