//! Brownian drivers, divergence-free transport fields and diffusion tensors.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::{divergence, gradient, Field, Grid};

/// Gaussian increments of `N` independent Brownian motions.
///
/// Increments are addressed by step index: the generator is repositioned to a
/// fixed offset for every step, so step `m` always yields the same draws for a
/// given `(seed, stream_id)` regardless of what was sampled before.
#[derive(Debug, Clone)]
pub struct BrownianDriver {
    n_modes: usize,
    seed: u64,
    stream_id: u64,
    step: u64,
    rng: ChaCha8Rng,
}

impl BrownianDriver {
    pub fn new(n_modes: usize, seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            n_modes,
            seed,
            stream_id,
            step: 0,
            rng,
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Index of the step the next call to [`sample_increments`] will draw.
    pub fn position(&self) -> u64 {
        self.step
    }

    /// 32-bit ChaCha words consumed per step (two `u64` uniforms per pair).
    fn words_per_step(&self) -> u128 {
        (self.n_modes.div_ceil(2) * 4) as u128
    }

    /// Increments of step `step`, independent of the current position.
    pub fn increments_at(&mut self, step: u64, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidArgument(format!("time step must be positive (got {dt})")));
        }
        self.rng.set_word_pos(step as u128 * self.words_per_step());
        let sd = dt.sqrt();
        let mut out = Vec::with_capacity(self.n_modes + 1);
        while out.len() < self.n_modes {
            let u1 = 1.0 - self.rng.random::<f64>();
            let u2 = self.rng.random::<f64>();
            let r = (-2.0 * u1.ln()).sqrt();
            let phi = 2.0 * PI * u2;
            out.push(sd * r * phi.cos());
            out.push(sd * r * phi.sin());
        }
        out.truncate(self.n_modes);
        Ok(out)
    }

    /// Increments of the next step; advances the position by one.
    pub fn sample_increments(&mut self, dt: f64) -> Result<Vec<f64>> {
        let out = self.increments_at(self.step, dt)?;
        self.step += 1;
        Ok(out)
    }
}

/// Anything that can supply the Brownian increments of step `m`.
pub trait IncrementSource {
    fn n_modes(&self) -> usize;
    fn increments(&mut self, step: u64, dt: f64) -> Result<Vec<f64>>;
}

impl IncrementSource for BrownianDriver {
    fn n_modes(&self) -> usize {
        self.n_modes
    }

    fn increments(&mut self, step: u64, dt: f64) -> Result<Vec<f64>> {
        self.increments_at(step, dt)
    }
}

/// Increments over `factor` consecutive fine steps of an inner driver, so a
/// coarse run sees exactly the Brownian path of a fine reference run.
#[derive(Debug, Clone)]
pub struct Coarsened {
    inner: BrownianDriver,
    factor: u64,
}

impl Coarsened {
    pub fn new(inner: BrownianDriver, factor: u64) -> Result<Self> {
        if factor == 0 {
            return Err(Error::InvalidArgument("coarsening factor must be >= 1".into()));
        }
        Ok(Self { inner, factor })
    }
}

impl IncrementSource for Coarsened {
    fn n_modes(&self) -> usize {
        self.inner.n_modes
    }

    fn increments(&mut self, step: u64, dt: f64) -> Result<Vec<f64>> {
        let fine_dt = dt / self.factor as f64;
        let mut acc = vec![0.0; self.inner.n_modes];
        for j in 0..self.factor {
            let inc = self.inner.increments_at(step * self.factor + j, fine_dt)?;
            for (a, v) in acc.iter_mut().zip(inc) {
                *a += v;
            }
        }
        Ok(acc)
    }
}

/// Configuration of the transport noise block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    #[serde(default)]
    pub n_modes: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "default_true")]
    pub divergence_free: bool,
    #[serde(default)]
    pub per_component_scale: Vec<f64>,
    /// If set, the amplitude is calibrated so that `sum_n |b_n . xi|^2 <= 2 nu0 |xi|^2`.
    #[serde(default)]
    pub calibrate_nu0: Option<f64>,
}

fn default_alpha() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            n_modes: 0,
            alpha: default_alpha(),
            amplitude: 0.0,
            divergence_free: true,
            per_component_scale: Vec::new(),
            calibrate_nu0: None,
        }
    }
}

/// Time-independent transport fields `b_n`, one `d`-vector field per mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportNoise {
    grid: Grid,
    fields_b: Vec<Vec<Field>>,
    pub alpha: f64,
    pub amplitude: f64,
    pub divergence_free: bool,
    per_component_scale: Vec<f64>,
}

/// Half-space integer wavevectors with `|k_j| < n/3`, ordered by `|k|` then lexicographically.
fn resolvable_wavevectors(grid: &Grid) -> Vec<[i64; 3]> {
    let d = grid.dim();
    let kmax = ((grid.n() as i64) - 1) / 3;
    let range = |active: bool| if active { -kmax..=kmax } else { 0..=0 };
    let mut out = Vec::new();
    for k0 in range(true) {
        for k1 in range(d > 1) {
            for k2 in range(d > 2) {
                let k = [k0, k1, k2];
                let first = k.iter().copied().find(|&c| c != 0);
                if matches!(first, Some(c) if c > 0) {
                    out.push(k);
                }
            }
        }
    }
    out.sort_by_key(|k| (k[0] * k[0] + k[1] * k[1] + k[2] * k[2], *k));
    out
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Unit polarizations for wavevector `k`: an orthonormal basis of `k^perp`
/// when `divergence_free`, otherwise the single direction `k / |k|`.
fn polarizations(k: [i64; 3], dim: usize, divergence_free: bool) -> Vec<[f64; 3]> {
    let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
    if !divergence_free {
        return vec![normalize(kf)];
    }
    match dim {
        2 => vec![normalize([-kf[1], kf[0], 0.0])],
        3 => {
            let axis = (0..3)
                .min_by(|&a, &b| kf[a].abs().total_cmp(&kf[b].abs()))
                .unwrap_or(0);
            let mut e = [0.0; 3];
            e[axis] = 1.0;
            let p1 = normalize(cross(kf, e));
            let p2 = normalize(cross(normalize(kf), p1));
            vec![p1, p2]
        }
        _ => Vec::new(),
    }
}

/// Number of transport modes the grid can represent.
pub fn resolvable_mode_count(grid: &Grid, divergence_free: bool) -> usize {
    if grid.dim() == 1 {
        return grid.n();
    }
    let per_k = if divergence_free { grid.dim() - 1 } else { 1 };
    2 * per_k * resolvable_wavevectors(grid).len()
}

/// Deterministic Kraichnan-type transport fields.
///
/// For `d >= 2` each mode is `c_k p cos(2 pi k.x)` or `c_k p sin(2 pi k.x)` with
/// `p` a unit polarization orthogonal to `k` and `c_k = amplitude |k|^{-(alpha + d/2)}`.
/// For `d = 1` mode `m` is the constant `amplitude m^{-(alpha + 1/2)}`.
pub fn build_kraichnan_noise(grid: Grid, n_modes: usize, alpha: f64, amplitude: f64) -> Result<TransportNoise> {
    build_transport_noise(grid, n_modes, alpha, amplitude, true)
}

pub fn build_transport_noise(
    grid: Grid,
    n_modes: usize,
    alpha: f64,
    amplitude: f64,
    divergence_free: bool,
) -> Result<TransportNoise> {
    if !(amplitude >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!("amplitude must be >= 0 (got {amplitude})")));
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("alpha must be finite".into()));
    }
    let available = resolvable_mode_count(&grid, divergence_free);
    if n_modes > available {
        return Err(Error::InvalidArgument(format!(
            "{n_modes} transport modes requested but the grid resolves only {available}"
        )));
    }
    let d = grid.dim();
    let mut fields_b = Vec::with_capacity(n_modes);
    if d == 1 {
        for m in 1..=n_modes {
            let c = amplitude * (m as f64).powf(-(alpha + 0.5));
            fields_b.push(vec![Field::constant(grid, c)]);
        }
    } else {
        'outer: for k in resolvable_wavevectors(&grid) {
            let kf = [k[0] as f64, k[1] as f64, k[2] as f64];
            let norm = (kf[0] * kf[0] + kf[1] * kf[1] + kf[2] * kf[2]).sqrt();
            let c = amplitude * norm.powf(-(alpha + d as f64 / 2.0));
            for p in polarizations(k, d, divergence_free) {
                for use_sin in [false, true] {
                    if fields_b.len() == n_modes {
                        break 'outer;
                    }
                    let mode = (0..d)
                        .map(|j| {
                            Field::from_fn(grid, |x| {
                                let phase = 2.0 * PI * (kf[0] * x[0] + kf[1] * x[1] + kf[2] * x[2]);
                                let s = if use_sin { phase.sin() } else { phase.cos() };
                                c * p[j] * s
                            })
                        })
                        .collect();
                    fields_b.push(mode);
                }
            }
        }
    }
    Ok(TransportNoise {
        grid,
        fields_b,
        alpha,
        amplitude,
        divergence_free: divergence_free || d == 1,
        per_component_scale: Vec::new(),
    })
}

/// Amplitude for which `sum_n sup_x |b_n(x)|^2 <= 2 nu0`, with a relative
/// safety margin of `1e-12`.
pub fn calibrated_amplitude(grid: Grid, n_modes: usize, alpha: f64, nu0: f64) -> Result<f64> {
    if !(nu0 >= 0.0) {
        return Err(Error::InvalidArgument(format!("nu0 must be >= 0 (got {nu0})")));
    }
    let unit = build_kraichnan_noise(grid, n_modes, alpha, 1.0)?;
    let s1: f64 = unit.sup_norms_sq().iter().sum();
    if s1 == 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * nu0 / s1).sqrt() * (1.0 - 1e-12))
}

/// Builds the noise described by a configuration block.
pub fn build_from_spec(grid: Grid, spec: &NoiseSpec, ell: usize) -> Result<TransportNoise> {
    let amplitude = match spec.calibrate_nu0 {
        Some(nu0) => calibrated_amplitude(grid, spec.n_modes, spec.alpha, nu0)?,
        None => spec.amplitude,
    };
    let noise = build_transport_noise(grid, spec.n_modes, spec.alpha, amplitude, spec.divergence_free)?;
    if spec.per_component_scale.is_empty() {
        Ok(noise)
    } else {
        if spec.per_component_scale.len() != ell {
            return Err(Error::DimensionMismatch {
                what: "per-component noise scales",
                expected: ell,
                got: spec.per_component_scale.len(),
            });
        }
        noise.with_component_scales(spec.per_component_scale.clone())
    }
}

impl TransportNoise {
    /// Noise without transport modes.
    pub fn none(grid: Grid) -> Self {
        Self {
            grid,
            fields_b: Vec::new(),
            alpha: default_alpha(),
            amplitude: 0.0,
            divergence_free: true,
            per_component_scale: Vec::new(),
        }
    }

    /// Noise from explicit mode fields (each of length `d`).
    pub fn from_fields(grid: Grid, fields_b: Vec<Vec<Field>>) -> Result<Self> {
        for mode in &fields_b {
            if mode.len() != grid.dim() {
                return Err(Error::DimensionMismatch {
                    what: "transport mode components",
                    expected: grid.dim(),
                    got: mode.len(),
                });
            }
            if mode.iter().any(|f| f.grid() != &grid) {
                return Err(Error::GridMismatch("transport mode".into()));
            }
        }
        let mut noise = Self {
            grid,
            fields_b,
            alpha: default_alpha(),
            amplitude: 1.0,
            divergence_free: true,
            per_component_scale: Vec::new(),
        };
        noise.divergence_free = noise.max_divergence()? <= 1e-10;
        Ok(noise)
    }

    /// Sets the multiplier `s_i` so that `b_{n,i} = s_i b_n`.
    pub fn with_component_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        if scales.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidArgument("component scales must be finite".into()));
        }
        self.per_component_scale = scales;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n_modes(&self) -> usize {
        self.fields_b.len()
    }

    pub fn fields(&self) -> &[Vec<Field>] {
        &self.fields_b
    }

    pub fn component_scale(&self, component: usize) -> f64 {
        self.per_component_scale.get(component).copied().unwrap_or(1.0)
    }

    pub fn is_zero(&self) -> bool {
        self.fields_b.iter().all(|m| m.iter().all(|f| f.max_abs() == 0.0))
    }

    /// `sup_x |b_n(x)|^2` for every mode.
    pub fn sup_norms_sq(&self) -> Vec<f64> {
        self.fields_b
            .iter()
            .map(|mode| {
                (0..self.grid.len())
                    .map(|idx| mode.iter().map(|f| f.values()[idx].powi(2)).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// `|b_n(x_idx)|` for every mode at one grid point.
    pub fn magnitudes_at(&self, idx: usize) -> Vec<f64> {
        self.fields_b
            .iter()
            .map(|mode| mode.iter().map(|f| f.values()[idx].powi(2)).sum::<f64>().sqrt())
            .collect()
    }

    /// Largest `|div b_n|` over modes and grid points.
    pub fn max_divergence(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for mode in &self.fields_b {
            worst = worst.max(divergence(mode)?.max_abs());
        }
        Ok(worst)
    }

    /// Pointwise `sum_n b_n(x) b_n(x)^T` at unit component scale.
    pub fn covariance_at(&self, idx: usize) -> [[f64; 3]; 3] {
        let d = self.grid.dim();
        let mut c = [[0.0; 3]; 3];
        for mode in &self.fields_b {
            for j in 0..d {
                for k in 0..d {
                    c[j][k] += mode[j].values()[idx] * mode[k].values()[idx];
                }
            }
        }
        c
    }

    /// Velocity `V_j = s_i sum_n dW^n b_n^j` driving one step of transport.
    pub fn velocity(&self, increments: &[f64], component: usize) -> Result<Vec<Field>> {
        self.check_increments(increments)?;
        let s = self.component_scale(component);
        let d = self.grid.dim();
        let mut v = vec![vec![0.0; self.grid.len()]; d];
        for (mode, &dw) in self.fields_b.iter().zip(increments) {
            if dw == 0.0 {
                continue;
            }
            for (vj, bj) in v.iter_mut().zip(mode) {
                for (a, b) in vj.iter_mut().zip(bj.values()) {
                    *a += s * dw * b;
                }
            }
        }
        v.into_iter().map(|vals| Field::from_values(self.grid, vals)).collect()
    }

    fn check_increments(&self, increments: &[f64]) -> Result<()> {
        if increments.len() < self.fields_b.len() {
            return Err(Error::DimensionMismatch {
                what: "Brownian increments",
                expected: self.fields_b.len(),
                got: increments.len(),
            });
        }
        Ok(())
    }

    /// `sum_n dW^n (b_{n,i} . grad) u` for component `component`.
    pub fn transport(&self, u: &Field, increments: &[f64], component: usize) -> Result<Field> {
        if u.grid() != &self.grid {
            return Err(Error::GridMismatch("transport field".into()));
        }
        let v = self.velocity(increments, component)?;
        let grad = gradient(u)?;
        Ok(dot_velocity(&v, &grad))
    }
}

/// Pointwise `v . g` for two vector fields on one grid.
pub(crate) fn dot_velocity(v: &[Field], g: &[Field]) -> Field {
    let grid = *v[0].grid();
    let mut out = vec![0.0; grid.len()];
    for (vj, gj) in v.iter().zip(g) {
        for ((o, a), b) in out.iter_mut().zip(vj.values()).zip(gj.values()) {
            *o += a * b;
        }
    }
    Field::from_values(grid, out).expect("matching lengths")
}

/// `sum_n dW^n (b_n . grad) u` at unit component scale.
pub fn apply_transport(noise: &TransportNoise, u: &Field, increments: &[f64]) -> Result<Field> {
    if increments.len() != noise.n_modes() {
        return Err(Error::DimensionMismatch {
            what: "Brownian increments",
            expected: noise.n_modes(),
            got: increments.len(),
        });
    }
    noise.transport(u, increments, 0)
}

/// Constant symmetric diffusion matrices `a_i` with parabolicity constants `nu_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionTensor {
    dim: usize,
    a: Vec<[[f64; 3]; 3]>,
    pub nu: Vec<f64>,
}

impl DiffusionTensor {
    pub fn new(dim: usize, a: Vec<[[f64; 3]; 3]>, nu: Vec<f64>) -> Result<Self> {
        if a.len() != nu.len() || a.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "diffusion constants",
                expected: a.len(),
                got: nu.len(),
            });
        }
        for m in &a {
            for j in 0..dim {
                for k in 0..dim {
                    if !m[j][k].is_finite() {
                        return Err(Error::InvalidArgument("diffusion matrix must be finite".into()));
                    }
                    if (m[j][k] - m[k][j]).abs() > 1e-14 * (1.0 + m[j][k].abs()) {
                        return Err(Error::InvalidArgument("diffusion matrix must be symmetric".into()));
                    }
                }
            }
        }
        if nu.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("parabolicity constants must be positive".into()));
        }
        Ok(Self { dim, a, nu })
    }

    /// `a_i = nu_i I` with parabolicity constant `nu_i`.
    pub fn isotropic(dim: usize, nu: &[f64]) -> Result<Self> {
        let a = nu
            .iter()
            .map(|&v| {
                let mut m = [[0.0; 3]; 3];
                for (j, row) in m.iter_mut().enumerate().take(dim) {
                    row[j] = v;
                }
                m
            })
            .collect();
        Self::new(dim, a, nu.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ell(&self) -> usize {
        self.a.len()
    }

    pub fn matrix(&self, component: usize) -> &[[f64; 3]; 3] {
        &self.a[component]
    }

    /// The same tensor with `extra` added to component `component`.
    pub fn with_added(&self, component: usize, extra: &[[f64; 3]; 3]) -> Self {
        let mut out = self.clone();
        for j in 0..self.dim {
            for k in 0..self.dim {
                out.a[component][j][k] += extra[j][k];
            }
        }
        out
    }
}

fn min_eigenvalue(m: &[[f64; 3]; 3], dim: usize) -> f64 {
    match dim {
        1 => m[0][0],
        2 => {
            let (a, b, c) = (m[0][0], m[0][1], m[1][1]);
            0.5 * (a + c) - (0.25 * (a - c) * (a - c) + b * b).sqrt()
        }
        _ => {
            let full = Matrix3::from_fn(|j, k| m[j][k]);
            SymmetricEigen::new(full).eigenvalues.min()
        }
    }
}

/// `min_x lambda_min(a_i - 1/2 s_i^2 sum_n b_n(x) b_n(x)^T)`.
pub fn ellipticity_margin(a: &DiffusionTensor, noise: &TransportNoise, component: usize) -> Result<f64> {
    if component >= a.ell() {
        return Err(Error::InvalidArgument(format!(
            "component {component} out of range for ell = {}",
            a.ell()
        )));
    }
    let d = noise.grid().dim();
    let s2 = noise.component_scale(component).powi(2);
    let base = a.matrix(component);
    let mut worst = f64::INFINITY;
    for idx in 0..noise.grid().len() {
        let c = noise.covariance_at(idx);
        let mut m = *base;
        for j in 0..d {
            for k in 0..d {
                m[j][k] -= 0.5 * s2 * c[j][k];
            }
        }
        worst = worst.min(min_eigenvalue(&m, d));
    }
    Ok(worst)
}

/// Pointwise `2 nu0 - lambda_max(sum_n b_n b_n^T)`; nonnegative everywhere iff
/// `sum_n |b_n(x) . xi|^2 <= 2 nu0 |xi|^2` on the grid.
pub fn noise_bound_margins(noise: &TransportNoise, nu0: f64) -> Vec<f64> {
    let d = noise.grid().dim();
    (0..noise.grid().len())
        .map(|idx| {
            let c = noise.covariance_at(idx);
            let mut neg = [[0.0; 3]; 3];
            for j in 0..d {
                for k in 0..d {
                    neg[j][k] = -c[j][k];
                }
            }
            2.0 * nu0 + min_eigenvalue(&neg, d)
        })
        .collect()
}

/// Pointwise Ito correction tensor `1/2 s_i^2 sum_n b_n^j b_n^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectionTensor {
    dim: usize,
    values: Vec<[[f64; 3]; 3]>,
}

impl CorrectionTensor {
    pub fn at(&self, idx: usize) -> &[[f64; 3]; 3] {
        &self.values[idx]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Spatial average of the tensor.
    pub fn mean(&self) -> [[f64; 3]; 3] {
        let mut m = [[0.0; 3]; 3];
        for v in &self.values {
            for j in 0..3 {
                for k in 0..3 {
                    m[j][k] += v[j][k];
                }
            }
        }
        let n = self.values.len() as f64;
        for row in m.iter_mut() {
            for e in row.iter_mut() {
                *e /= n;
            }
        }
        m
    }

    /// Largest deviation from the spatial mean.
    pub fn max_fluctuation(&self) -> f64 {
        let m = self.mean();
        self.values
            .iter()
            .flat_map(|v| (0..3).flat_map(move |j| (0..3).map(move |k| (v[j][k] - m[j][k]).abs())))
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.values
            .iter()
            .map(|v| min_eigenvalue(v, self.dim))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn stratonovich_correction(noise: &TransportNoise, component: usize) -> Result<CorrectionTensor> {
    if !noise.divergence_free {
        return Err(Error::InvalidArgument(
            "the Stratonovich correction requires divergence-free transport fields".into(),
        ));
    }
    let s2 = noise.component_scale(component).powi(2);
    let values = (0..noise.grid().len())
        .map(|idx| {
            let mut c = noise.covariance_at(idx);
            for row in c.iter_mut() {
                for e in row.iter_mut() {
                    *e *= 0.5 * s2;
                }
            }
            c
        })
        .collect();
    Ok(CorrectionTensor {
        dim: noise.grid().dim(),
        values,
    })
}
