//! Fields on the flat torus `[0,1)^d` and their spectral calculus.
//!
//! Values are stored row-major with axis 0 varying slowest, so the flat
//! index of the multi-index `(i_0, .., i_{d-1})` is `((i_0 n + i_1) n + i_2)`.
//! Spectral coefficients are normalized as `c_k = DFT(u)_k / n^d`, which makes
//! Parseval read `mean(u^2) = sum_k |c_k|^2`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform periodic grid with `n` points per axis on the unit torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, points_per_dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dimension must be 1, 2 or 3 (got {dim})"
            )));
        }
        if points_per_dim < 4 || !points_per_dim.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per dimension must be a power of two >= 4 (got {points_per_dim})"
            )));
        }
        Ok(Self {
            dim,
            n: points_per_dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Total number of cells, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Multi-index of a flat index (unused trailing axes are zero).
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim]
            .iter()
            .fold(0, |acc, &i| acc * self.n + (i % self.n))
    }

    /// Physical coordinates of a cell (cell-corner convention, `x_j = i_j / n`).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = self.spacing();
        [m[0] as f64 * h, m[1] as f64 * h, m[2] as f64 * h]
    }

    /// Signed integer wavenumber of a one-dimensional DFT index, in `[-n/2, n/2)`.
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Integer wavevector of a flat spectral index.
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let m = self.multi_index(idx);
        let mut k = [0i64; 3];
        for axis in 0..self.dim {
            k[axis] = self.wavenumber(m[axis]);
        }
        k
    }

    fn check_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {}^{} vs {}^{}",
                self.n, self.dim, other.n, other.dim
            )));
        }
        Ok(())
    }
}

/// One real scalar component sampled on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                what: "field values",
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` at the cell coordinates. Unused coordinates are passed as 0.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Spatial mean, i.e. the integral over the unit torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, c: f64) -> Field {
        self.map(|v| c * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `alpha * self + beta * other`.
    pub fn lincomb(&self, alpha: f64, other: &Field, beta: f64) -> Result<Field> {
        self.grid.check_same(&other.grid, "lincomb")?;
        Ok(Field {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| alpha * a + beta * b)
                .collect(),
        })
    }

    fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what.to_string()))
        }
    }
}

/// The `ell`-component unknown at a given time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    components: Vec<Field>,
    pub time: f64,
}

impl SystemState {
    pub fn new(components: Vec<Field>, time: f64) -> Result<Self> {
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidArgument("a state needs at least one component".into()))?;
        for c in &components[1..] {
            first.grid.check_same(&c.grid, "state components")?;
        }
        if !(time >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative time {time}")));
        }
        Ok(Self { components, time })
    }

    pub fn zeros(grid: Grid, ell: usize) -> Self {
        Self {
            components: vec![Field::zeros(grid); ell.max(1)],
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.components[0].grid
    }

    pub fn ell(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [Field] {
        &mut self.components
    }

    pub fn component(&self, i: usize) -> &Field {
        &self.components[i]
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(Field::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs()))
    }
}

/// FFT plans plus wavevector tables for one grid.
///
/// Plans are shared through `Arc`; the scratch buffers make an instance
/// single-threaded, so each worker owns its own `Spectral`.
pub struct Spectral {
    grid: Grid,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    lines: Vec<Complex64>,
    kvec: Vec<[i64; 3]>,
}

impl Clone for Spectral {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            forward: Arc::clone(&self.forward),
            inverse: Arc::clone(&self.inverse),
            scratch: self.scratch.clone(),
            lines: self.lines.clone(),
            kvec: self.kvec.clone(),
        }
    }
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl Spectral {
    pub fn new(grid: Grid) -> Self {
        let mut planner = FftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(grid.n);
        let inverse = planner.plan_fft_inverse(grid.n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            grid,
            forward,
            inverse,
            scratch: vec![Complex64::default(); scratch_len],
            lines: vec![Complex64::default(); grid.len()],
            kvec: (0..grid.len()).map(|i| grid.wavevector(i)).collect(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Integer wavevector table indexed like the spectral buffers.
    pub fn wavevectors(&self) -> &[[i64; 3]] {
        &self.kvec
    }

    fn transform(&mut self, buf: &mut [Complex64], inverse: bool) {
        let n = self.grid.n;
        let d = self.grid.dim;
        let fft = if inverse {
            Arc::clone(&self.inverse)
        } else {
            Arc::clone(&self.forward)
        };
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(buf, &mut self.scratch);
                continue;
            }
            let block = n * stride;
            let mut line = 0;
            for outer in (0..buf.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let dst = &mut self.lines[line * n..(line + 1) * n];
                    for (j, slot) in dst.iter_mut().enumerate() {
                        *slot = buf[base + j * stride];
                    }
                    line += 1;
                }
            }
            fft.process_with_scratch(&mut self.lines, &mut self.scratch);
            let mut line = 0;
            for outer in (0..buf.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    let src = &self.lines[line * n..(line + 1) * n];
                    for (j, v) in src.iter().enumerate() {
                        buf[base + j * stride] = *v;
                    }
                    line += 1;
                }
            }
        }
    }

    /// Normalized spectral coefficients of real values.
    pub fn forward_values(&mut self, values: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(values.iter().map(|&v| Complex64::new(v, 0.0)));
        self.transform(out, false);
        let inv_n = 1.0 / values.len() as f64;
        for c in out.iter_mut() {
            *c *= inv_n;
        }
    }

    pub fn forward(&mut self, u: &Field) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(u.values.len());
        self.forward_values(&u.values, &mut out);
        out
    }

    /// Real part of the inverse transform of normalized coefficients.
    pub fn inverse_values(&mut self, coeffs: &[Complex64], work: &mut Vec<Complex64>, out: &mut [f64]) {
        work.clear();
        work.extend_from_slice(coeffs);
        self.transform(work, true);
        for (o, c) in out.iter_mut().zip(work.iter()) {
            *o = c.re;
        }
    }

    pub fn inverse(&mut self, coeffs: &[Complex64]) -> Field {
        let mut work = Vec::with_capacity(coeffs.len());
        let mut values = vec![0.0; coeffs.len()];
        self.inverse_values(coeffs, &mut work, &mut values);
        Field {
            grid: self.grid,
            values,
        }
    }

    /// Fourier multiplier of `d/dx_axis`; the Nyquist mode is dropped so that
    /// odd derivatives of real fields stay real.
    pub fn derivative_symbol(&self, idx: usize, axis: usize) -> Complex64 {
        let k = self.kvec[idx][axis];
        if 2 * k.unsigned_abs() as usize == self.grid.n {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, 2.0 * PI * k as f64)
        }
    }

    /// `true` if the mode survives the two-thirds dealiasing rule.
    pub fn keeps_mode(&self, idx: usize) -> bool {
        let n = self.grid.n as u64;
        self.kvec[idx][..self.grid.dim]
            .iter()
            .all(|k| 3 * k.unsigned_abs() <= n)
    }

    /// `|2 pi k|^2`-type quadratic form `(2 pi k)^T a (2 pi k)` for a `d x d` matrix.
    pub fn quadratic_symbol(&self, idx: usize, a: &[[f64; 3]; 3]) -> f64 {
        let k = self.kvec[idx];
        let d = self.grid.dim;
        let mut s = 0.0;
        for j in 0..d {
            for l in 0..d {
                s += a[j][l] * (2.0 * PI * k[j] as f64) * (2.0 * PI * k[l] as f64);
            }
        }
        s
    }

    /// Spectral partial derivatives of `u` along every axis.
    pub fn gradient(&mut self, u: &Field) -> Result<Vec<Field>> {
        self.grid.check_same(&u.grid, "gradient")?;
        u.ensure_finite("gradient input")?;
        let coeffs = self.forward(u);
        Ok(self.gradient_from_spectrum(&coeffs))
    }

    pub fn gradient_from_spectrum(&mut self, coeffs: &[Complex64]) -> Vec<Field> {
        let mut work = Vec::with_capacity(coeffs.len());
        let mut buf = vec![Complex64::default(); coeffs.len()];
        (0..self.grid.dim)
            .map(|axis| {
                for (idx, (b, c)) in buf.iter_mut().zip(coeffs).enumerate() {
                    *b = self.derivative_symbol(idx, axis) * c;
                }
                let mut values = vec![0.0; coeffs.len()];
                self.inverse_values(&buf, &mut work, &mut values);
                Field {
                    grid: self.grid,
                    values,
                }
            })
            .collect()
    }

    /// `sum_j d_j v_j` for a vector field given by its `d` components.
    pub fn divergence(&mut self, v: &[Field]) -> Result<Field> {
        if v.len() != self.grid.dim {
            return Err(Error::DimensionMismatch {
                what: "vector field components",
                expected: self.grid.dim,
                got: v.len(),
            });
        }
        for c in v {
            self.grid.check_same(&c.grid, "divergence")?;
        }
        let mut acc = vec![Complex64::default(); self.grid.len()];
        let mut coeffs = Vec::with_capacity(self.grid.len());
        for (axis, comp) in v.iter().enumerate() {
            self.forward_values(&comp.values, &mut coeffs);
            for (idx, (a, c)) in acc.iter_mut().zip(&coeffs).enumerate() {
                *a += self.derivative_symbol(idx, axis) * c;
            }
        }
        Ok(self.inverse(&acc))
    }
}

thread_local! {
    static SPECTRAL_CACHE: RefCell<HashMap<(usize, usize), Spectral>> = RefCell::new(HashMap::new());
}

/// Runs `f` with this thread's cached transform plan for `grid`.
pub fn with_spectral<R>(grid: &Grid, f: impl FnOnce(&mut Spectral) -> R) -> R {
    SPECTRAL_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let sp = cache
            .entry((grid.dim, grid.n))
            .or_insert_with(|| Spectral::new(*grid));
        f(sp)
    })
}

/// Spectral gradient `(d_1 u, .., d_d u)`.
pub fn gradient(u: &Field) -> Result<Vec<Field>> {
    with_spectral(u.grid(), |sp| sp.gradient(u))
}

pub fn divergence(v: &[Field]) -> Result<Field> {
    let grid = *v
        .first()
        .ok_or_else(|| Error::InvalidArgument("empty vector field".into()))?
        .grid();
    with_spectral(&grid, |sp| sp.divergence(v))
}

fn check_zeta(zeta: f64) -> Result<()> {
    if zeta >= 2.0 && zeta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("zeta must be >= 2 (got {zeta})")))
    }
}

/// `L^zeta` norm with respect to the unit-measure torus.
pub fn lzeta_norm(u: &Field, zeta: f64) -> Result<f64> {
    Ok(lzeta_power(u, zeta)?.powf(1.0 / zeta))
}

/// `||u||_{L^zeta}^zeta`, the quantity tracked by the energy diagnostics.
pub fn lzeta_power(u: &Field, zeta: f64) -> Result<f64> {
    check_zeta(zeta)?;
    Ok(u.values.iter().map(|v| v.abs().powf(zeta)).sum::<f64>() / u.values.len() as f64)
}

/// `int |u|^{zeta-2} |grad u|^2` with a spectral gradient; `0^0 = 1` at `zeta = 2`.
pub fn dissipation_integral(u: &Field, zeta: f64) -> Result<f64> {
    check_zeta(zeta)?;
    let grad = gradient(u)?;
    Ok(dissipation_from_gradient(u, &grad, zeta))
}

pub(crate) fn dissipation_from_gradient(u: &Field, grad: &[Field], zeta: f64) -> f64 {
    let n = u.values.len();
    let mut s = 0.0;
    for idx in 0..n {
        let g2: f64 = grad.iter().map(|g| g.values[idx] * g.values[idx]).sum();
        let w = if zeta == 2.0 {
            1.0
        } else {
            u.values[idx].abs().powf(zeta - 2.0)
        };
        s += w * g2;
    }
    s / n as f64
}

/// JSON sidecar written next to every binary snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dim: usize,
    pub n: usize,
    pub ell: usize,
    pub time: f64,
    pub component: usize,
}

/// Writes component `component` of `state` as `<stem>.bin` (little-endian
/// f64, row-major) plus `<stem>.json`. Returns the two paths.
pub fn write_snapshot(stem: &Path, state: &SystemState, component: usize) -> Result<(PathBuf, PathBuf)> {
    let field = state.components.get(component).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "component {component} out of range for ell = {}",
            state.ell()
        ))
    })?;
    let bin = stem.with_extension("bin");
    let json = stem.with_extension("json");
    let mut bytes = Vec::with_capacity(field.values.len() * 8);
    for v in &field.values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::File::create(&bin)?.write_all(&bytes)?;
    let meta = SnapshotMeta {
        dim: field.grid.dim,
        n: field.grid.n,
        ell: state.ell(),
        time: state.time,
        component,
    };
    fs::write(&json, serde_json::to_string_pretty(&meta)?)?;
    Ok((bin, json))
}

pub fn read_snapshot(stem: &Path) -> Result<(SnapshotMeta, Field)> {
    let meta: SnapshotMeta = serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
    let grid = Grid::new(meta.dim, meta.n)?;
    let mut bytes = Vec::new();
    fs::File::open(stem.with_extension("bin"))?.read_to_end(&mut bytes)?;
    if bytes.len() != grid.len() * 8 {
        return Err(Error::DimensionMismatch {
            what: "snapshot bytes",
            expected: grid.len() * 8,
            got: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok((meta, Field::from_values(grid, values)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn max_diff(a: &Field, b: &Field) -> f64 {
        a.values()
            .iter()
            .zip(b.values())
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }

    #[test]
    fn grid_construction() {
        let g = Grid::new(1, 8).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(Grid::new(3, 16).unwrap().len(), 4096);
        assert!(Grid::new(2, 6).is_err());
        assert!(Grid::new(4, 8).is_err());
        assert!(Grid::new(0, 8).is_err());
        assert!(Grid::new(1, 2).is_err());
    }

    #[test]
    fn wavenumbers_cover_half_open_range() {
        let g = Grid::new(1, 8).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
    }

    #[test]
    fn gradient_of_sine() {
        let g = Grid::new(1, 32).unwrap();
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let du = gradient(&u).unwrap();
        let exact = Field::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        assert!(max_diff(&du[0], &exact) <= 1e-12 * 2.0 * PI);
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = Grid::new(2, 16).unwrap();
        let du = gradient(&Field::constant(g, 3.5)).unwrap();
        assert_eq!(du.len(), 2);
        assert!(du.iter().all(|c| c.max_abs() < 1e-13));
    }

    #[test]
    fn gradient_two_dimensional_trig_polynomial() {
        let g = Grid::new(2, 16).unwrap();
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin() + (4.0 * PI * x[1]).cos());
        let du = gradient(&u).unwrap();
        let e0 = Field::from_fn(g, |x| 2.0 * PI * (2.0 * PI * x[0]).cos());
        let e1 = Field::from_fn(g, |x| -4.0 * PI * (4.0 * PI * x[1]).sin());
        assert!(max_diff(&du[0], &e0) <= 1e-12 * 4.0 * PI);
        assert!(max_diff(&du[1], &e1) <= 1e-12 * 4.0 * PI);
    }

    #[test]
    fn divergence_examples() {
        let g1 = Grid::new(1, 32).unwrap();
        let u = Field::from_fn(g1, |x| (2.0 * PI * x[0]).sin());
        let lap = divergence(&gradient(&u).unwrap()).unwrap();
        let exact = u.scaled(-4.0 * PI * PI);
        assert!(max_diff(&lap, &exact) <= 1e-12 * 4.0 * PI * PI);

        let g2 = Grid::new(2, 16).unwrap();
        let shear = vec![
            Field::from_fn(g2, |x| (2.0 * PI * x[1]).cos()),
            Field::zeros(g2),
        ];
        assert!(divergence(&shear).unwrap().max_abs() < 1e-12);
        let constant = vec![Field::constant(g2, 1.0), Field::constant(g2, -2.0)];
        assert!(divergence(&constant).unwrap().max_abs() < 1e-13);
    }

    #[test]
    fn divergence_rejects_mismatched_grids() {
        let a = Field::zeros(Grid::new(2, 8).unwrap());
        let b = Field::zeros(Grid::new(2, 16).unwrap());
        assert!(matches!(
            divergence(&[a, b]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn gradient_rejects_non_finite() {
        let g = Grid::new(1, 8).unwrap();
        let mut u = Field::zeros(g);
        u.values_mut()[3] = f64::NAN;
        assert!(matches!(gradient(&u), Err(Error::NonFinite(_))));
    }

    #[test]
    fn lzeta_examples() {
        let g = Grid::new(2, 8).unwrap();
        assert_relative_eq!(lzeta_norm(&Field::constant(g, 2.0), 3.0).unwrap(), 2.0, epsilon = 1e-14);
        assert_eq!(lzeta_norm(&Field::zeros(g), 2.5).unwrap(), 0.0);
        let g1 = Grid::new(1, 64).unwrap();
        let s = Field::from_fn(g1, |x| (2.0 * PI * x[0]).sin());
        assert!((lzeta_norm(&s, 2.0).unwrap() - 0.5f64.sqrt()).abs() <= 1e-12);
        assert!(lzeta_norm(&s, 1.5).is_err());
    }

    #[test]
    fn dissipation_constant_is_zero() {
        let g = Grid::new(3, 8).unwrap();
        assert!(dissipation_integral(&Field::constant(g, 4.0), 3.0).unwrap().abs() < 1e-20);
    }

    /// Midpoint quadrature of `|sin|^{zeta-2} (2 pi cos)^2` on a fine grid.
    fn quadrature_oracle(zeta: f64, m: usize) -> f64 {
        let h = 1.0 / m as f64;
        (0..m)
            .map(|i| {
                let x = (i as f64 + 0.5) * h;
                let s = (2.0 * PI * x).sin().abs();
                let w = if zeta == 2.0 { 1.0 } else { s.powf(zeta - 2.0) };
                w * (2.0 * PI * (2.0 * PI * x).cos()).powi(2)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn dissipation_matches_quadrature() {
        let g = Grid::new(1, 64).unwrap();
        let u = Field::from_fn(g, |x| (2.0 * PI * x[0]).sin());
        let oracle2 = quadrature_oracle(2.0, 512);
        assert!((oracle2 - 2.0 * PI * PI).abs() < 1e-10);
        assert!((dissipation_integral(&u, 2.0).unwrap() - oracle2).abs() <= 1e-10);

        let g512 = Grid::new(1, 512).unwrap();
        let u512 = Field::from_fn(g512, |x| (2.0 * PI * x[0]).sin());
        let oracle4 = quadrature_oracle(4.0, 512);
        assert!((dissipation_integral(&u512, 4.0).unwrap() - oracle4).abs() <= 1e-8);
    }

    #[test]
    fn parseval_and_round_trip() {
        let g = Grid::new(3, 8).unwrap();
        let u = Field::from_fn(g, |x| {
            (2.0 * PI * x[0]).sin() * (4.0 * PI * x[1]).cos() + 0.3 * (2.0 * PI * (x[2] + x[0])).cos()
        });
        let mut sp = Spectral::new(g);
        let c = sp.forward(&u);
        let spectral: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        let physical = lzeta_power(&u, 2.0).unwrap();
        assert!((spectral - physical).abs() <= 1e-12 * physical);
        let back = sp.inverse(&c);
        assert!(max_diff(&back, &u) <= 1e-12 * u.max_abs());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(2, 8).unwrap();
        let u = Field::from_fn(g, |x| x[0] - 2.0 * x[1]);
        let state = SystemState::new(vec![Field::zeros(g), u.clone()], 0.25).unwrap();
        let stem = dir.path().join("snap");
        write_snapshot(&stem, &state, 1).unwrap();
        let (meta, back) = read_snapshot(&stem).unwrap();
        assert_eq!(
            meta,
            SnapshotMeta {
                dim: 2,
                n: 8,
                ell: 2,
                time: 0.25,
                component: 1
            }
        );
        assert_eq!(back, u);
        let bytes = std::fs::read(stem.with_extension("bin")).unwrap();
        assert_eq!(&bytes[8..16], &u.values()[1].to_le_bytes());
    }

    #[test]
    fn state_requires_shared_grid() {
        let a = Field::zeros(Grid::new(1, 8).unwrap());
        let b = Field::zeros(Grid::new(1, 16).unwrap());
        assert!(SystemState::new(vec![a, b], 0.0).is_err());
        assert!(SystemState::new(vec![], 0.0).is_err());
    }
}
