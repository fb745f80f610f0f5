//! Uniform periodic grids on flat rectangular tori and their Fourier-space
//! operators.
//!
//! All differential operators are spectral: a field sampled on the grid is
//! identified with its trigonometric interpolant, so derivatives of
//! band-limited fields are exact up to rounding. Integrals use the periodic
//! rectangle rule, which is spectrally accurate for smooth periodic data.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative tolerance for the mean-zero constraint after projection.
pub const MEAN_ZERO_TOL: f64 = 1e-12;

/// Relative tolerance used to decide whether an input "forgot" to project.
pub const MEAN_REJECT_TOL: f64 = 1e-10;

const MIN_NODES: usize = 8;

/// Shared handle to an immutable grid.
pub type Grid = Arc<TorusGrid>;

/// A point on the torus, in physical coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Uniform `nx × ny` grid on `[0, lx) × [0, ly)` with periodic identification.
pub struct TorusGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    volume: f64,
    cell_area: f64,
    /// Symbol of `-Δ`, indexed like the field values.
    neg_lap_symbol: Vec<f64>,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("lx", &self.lx)
            .field("ly", &self.ly)
            .finish()
    }
}

/// Signed integer wavenumber for FFT bin `i` of an `n`-point transform.
fn wavenumber(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

impl TorusGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Grid> {
        if nx < MIN_NODES || ny < MIN_NODES || !nx.is_multiple_of(2) || !ny.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "nx, ny must be even and >= {MIN_NODES} (got {nx} x {ny})"
            )));
        }
        if !(lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "periods must be positive and finite (got {lx} x {ly})"
            )));
        }
        let volume = lx * ly;
        let mut planner = FftPlanner::new();
        let mut neg_lap_symbol = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            let ky = wavenumber(j, ny) / ly;
            for i in 0..nx {
                let kx = wavenumber(i, nx) / lx;
                neg_lap_symbol.push(4.0 * PI * PI * (kx * kx + ky * ky));
            }
        }
        Ok(Arc::new(Self {
            nx,
            ny,
            lx,
            ly,
            volume,
            cell_area: volume / (nx * ny) as f64,
            neg_lap_symbol,
            fwd_x: planner.plan_fft_forward(nx),
            inv_x: planner.plan_fft_inverse(nx),
            fwd_y: planner.plan_fft_forward(ny),
            inv_y: planner.plan_fft_inverse(ny),
        }))
    }

    /// Square unit torus `R²/Z²` with `n × n` nodes.
    pub fn unit(n: usize) -> Result<Grid> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }

    pub fn ly(&self) -> f64 {
        self.ly
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Area `|Σ| = lx·ly`.
    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_area
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.lx / self.nx as f64, self.ly / self.ny as f64)
    }

    /// Injectivity radius of the flat torus.
    pub fn injectivity_radius(&self) -> f64 {
        0.5 * self.lx.min(self.ly)
    }

    pub fn same_shape(&self, other: &TorusGrid) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.lx == other.lx && self.ly == other.ly
    }

    pub fn node(&self, idx: usize) -> Point {
        let (hx, hy) = self.spacing();
        Point::new((idx % self.nx) as f64 * hx, (idx / self.nx) as f64 * hy)
    }

    /// Index of the grid node closest to `p` (with periodic wrap).
    pub fn nearest_node(&self, p: Point) -> usize {
        let (hx, hy) = self.spacing();
        let i = (p.x / hx).round().rem_euclid(self.nx as f64) as usize % self.nx;
        let j = (p.y / hy).round().rem_euclid(self.ny as f64) as usize % self.ny;
        j * self.nx + i
    }

    /// Rectangle-rule integral over the torus. The constant 1 integrates to
    /// `volume` exactly.
    pub fn quadrature(&self, values: &[f64]) -> f64 {
        let n = values.len() as f64;
        self.volume * (values.iter().sum::<f64>() / n)
    }

    pub fn mean(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() / values.len() as f64
    }

    /// Smallest positive eigenvalue of `-Δ` on the torus.
    pub fn mu1(&self) -> f64 {
        let inv2 = (1.0 / (self.lx * self.lx)).min(1.0 / (self.ly * self.ly));
        4.0 * PI * PI * inv2
    }

    /// Geodesic (minimum-image) distance from `p0` to every node.
    pub fn distance_to_point(&self, p0: Point) -> Vec<f64> {
        (0..self.len())
            .map(|idx| self.distance(self.node(idx), p0))
            .collect()
    }

    pub fn distance(&self, a: Point, b: Point) -> f64 {
        let mut dx = (a.x - b.x).rem_euclid(self.lx);
        if dx > 0.5 * self.lx {
            dx = self.lx - dx;
        }
        let mut dy = (a.y - b.y).rem_euclid(self.ly);
        if dy > 0.5 * self.ly {
            dy = self.ly - dy;
        }
        dx.hypot(dy)
    }

    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.fwd_x, &self.fwd_y);
        data
    }

    /// Inverse transform returning the (normalized) real part.
    pub(crate) fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut data, &self.inv_x, &self.inv_y);
        let scale = 1.0 / self.len() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    fn transform(&self, data: &mut [Complex64], fx: &Arc<dyn Fft<f64>>, fy: &Arc<dyn Fft<f64>>) {
        let (nx, ny) = (self.nx, self.ny);
        for row in data.chunks_exact_mut(nx) {
            fx.process(row);
        }
        let mut column = vec![Complex64::new(0.0, 0.0); ny];
        for i in 0..nx {
            for j in 0..ny {
                column[j] = data[j * nx + i];
            }
            fy.process(&mut column);
            for j in 0..ny {
                data[j * nx + i] = column[j];
            }
        }
    }

    fn apply_symbol(&self, values: &[f64], symbol: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut spec = self.forward(values);
        for (c, &s) in spec.iter_mut().zip(&self.neg_lap_symbol) {
            *c *= symbol(s);
        }
        self.inverse_real(spec)
    }

    /// `Δf` by the Fourier multiplier `-4π²(k₁²/lx² + k₂²/ly²)`.
    pub fn laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        f.check_finite()?;
        let values = self.apply_symbol(&f.values, |s| -s);
        Ok(Field::from_parts(f.grid.clone(), values))
    }

    /// Mean-zero solution `u` of `-Δu = f`. Rejects inputs whose mean is not
    /// negligible relative to `max|f|`.
    pub fn inv_laplacian(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        f.check_finite()?;
        let mean = f.mean();
        if mean.abs() > MEAN_REJECT_TOL * f.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::NonZeroMean { mean });
        }
        Ok(self.inv_laplacian_unchecked(f))
    }

    /// `(-Δ)⁻¹` on the mean-zero part, with no mean check.
    pub(crate) fn inv_laplacian_unchecked(&self, f: &Field) -> Field {
        let values = self.apply_symbol(&f.values, |s| if s > 0.0 { 1.0 / s } else { 0.0 });
        Field::from_parts(f.grid.clone(), values)
    }

    /// Convolution with the Green's function `G` of `-Δ` normalized by
    /// `-ΔG(·,p) = δ_p - 1/|Σ|`, `∫G(·,p) = 0`.
    pub fn green_convolve(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        f.check_finite()?;
        Ok(self.inv_laplacian_unchecked(f))
    }

    /// `∫|∇f|²`, evaluated by Parseval.
    pub fn dirichlet_energy(&self, f: &Field) -> f64 {
        let spec = self.forward(&f.values);
        let n = self.len() as f64;
        let sum: f64 = spec
            .iter()
            .zip(&self.neg_lap_symbol)
            .map(|(c, &s)| s * c.norm_sqr())
            .sum();
        self.volume * sum / (n * n)
    }

    /// `∫ f g`.
    pub fn inner(&self, f: &Field, g: &Field) -> f64 {
        let s: f64 = f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum();
        self.volume * s / self.len() as f64
    }

    pub fn l2_norm(&self, f: &Field) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Inner product `∫ ∇f·∇g`, the natural one on the mean-zero space.
    pub fn dirichlet_inner(&self, f: &Field, g: &Field) -> f64 {
        let a = self.forward(&f.values);
        let b = self.forward(&g.values);
        let n = self.len() as f64;
        let sum: f64 = a
            .iter()
            .zip(&b)
            .zip(&self.neg_lap_symbol)
            .map(|((x, y), &s)| s * (x.re * y.re + x.im * y.im))
            .sum();
        self.volume * sum / (n * n)
    }

    /// Dual-norm `‖(-Δ)^{-1/2} r‖` of a mean-zero residual.
    pub fn h_minus_one_norm(&self, r: &Field) -> f64 {
        let spec = self.forward(&r.values);
        let n = self.len() as f64;
        let sum: f64 = spec
            .iter()
            .zip(&self.neg_lap_symbol)
            .filter(|(_, &s)| s > 0.0)
            .map(|(c, &s)| c.norm_sqr() / s)
            .sum();
        (self.volume * sum / (n * n)).sqrt()
    }

    /// Trigonometric interpolation of `f` onto `target` (same periods).
    /// Nyquist modes are split symmetrically when refining and folded when
    /// coarsening so that real fields stay real.
    pub fn resample(&self, f: &Field, target: &Grid) -> Result<Field> {
        self.check(f)?;
        if self.lx != target.lx || self.ly != target.ly {
            return Err(Error::GridMismatch);
        }
        let src = self.forward(&f.values);
        let (nx, ny, mx, my) = (self.nx, self.ny, target.nx, target.ny);
        let mut dst = vec![Complex64::new(0.0, 0.0); mx * my];
        for j in 0..ny {
            let kj = wavenumber(j, ny) as i64;
            for i in 0..nx {
                let ki = wavenumber(i, nx) as i64;
                let c = src[j * nx + i];
                let xs = split_mode(ki, nx, mx);
                let ys = split_mode(kj, ny, my);
                for &(tx, wx) in &xs {
                    for &(ty, wy) in &ys {
                        dst[ty * mx + tx] += c * (wx * wy);
                    }
                }
            }
        }
        let scale = (mx * my) as f64 / (nx * ny) as f64;
        for c in dst.iter_mut() {
            *c *= scale;
        }
        Ok(Field::from_parts(target.clone(), target.inverse_real(dst)))
    }

    /// Spectral partial derivatives `(∂ₓf, ∂ᵧf)`; Nyquist modes are dropped.
    pub fn gradient(&self, f: &Field) -> Result<(Field, Field)> {
        self.check(f)?;
        f.check_finite()?;
        let spec = self.forward(&f.values);
        let mut parts = Vec::with_capacity(2);
        for axis in 0..2 {
            let mut d = spec.clone();
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let (k, n, len) = if axis == 0 {
                        (i, self.nx, self.lx)
                    } else {
                        (j, self.ny, self.ly)
                    };
                    let factor = if 2 * k == n {
                        0.0
                    } else {
                        2.0 * PI * wavenumber(k, n) / len
                    };
                    d[j * self.nx + i] *= Complex64::new(0.0, factor);
                }
            }
            parts.push(Field::from_parts(f.grid.clone(), self.inverse_real(d)));
        }
        let dy = parts.pop().expect("two axes");
        let dx = parts.pop().expect("two axes");
        Ok((dx, dy))
    }

    /// `f(x + dx, y + dy)` by Fourier phase shifts; exact for band-limited
    /// fields, with the Nyquist modes treated as cosines.
    pub fn translate(&self, f: &Field, dx: f64, dy: f64) -> Result<Field> {
        self.check(f)?;
        let mut spec = self.forward(&f.values);
        for j in 0..self.ny {
            let py = 2.0 * PI * wavenumber(j, self.ny) * dy / self.ly;
            for i in 0..self.nx {
                let px = 2.0 * PI * wavenumber(i, self.nx) * dx / self.lx;
                spec[j * self.nx + i] *= Complex64::from_polar(1.0, px + py);
            }
        }
        Ok(Field::from_parts(f.grid.clone(), self.inverse_real(spec)))
    }

    fn check(&self, f: &Field) -> Result<()> {
        if self.same_shape(&f.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Destination bins (and weights) of wavenumber `k` from an `n`-point
/// transform into an `m`-point one.
fn split_mode(k: i64, n: usize, m: usize) -> Vec<(usize, f64)> {
    let (n, m) = (n as i64, m as i64);
    let bin = |k: i64| k.rem_euclid(m) as usize;
    if m > n && k.abs() == n / 2 {
        // source Nyquist: shares between +n/2 and -n/2
        vec![(bin(n / 2), 0.5), (bin(-n / 2), 0.5)]
    } else if m < n && k.abs() > m / 2 {
        Vec::new()
    } else {
        vec![(bin(k), 1.0)]
    }
}

/// Real scalar function sampled on a [`TorusGrid`], row-major (`x` fastest).
#[derive(Debug, Clone)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        let f = Self { grid, values };
        f.check_finite()?;
        Ok(f)
    }

    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self::from_parts(grid.clone(), vec![0.0; grid.len()])
    }

    /// Samples `f(x, y)` at the grid nodes (not projected).
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let p = grid.node(idx);
                f(p.x, p.y)
            })
            .collect();
        Self::from_parts(grid.clone(), values)
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

    pub fn mean(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn check_finite(&self) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean().abs() <= MEAN_ZERO_TOL * self.max_abs().max(f64::MIN_POSITIVE)
    }

    /// Subtracts the grid mean in place.
    pub fn project_mean_zero(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
        // a second pass removes the rounding left by the first
        let m = self.mean();
        for v in &mut self.values {
            *v -= m;
        }
    }

    pub fn projected(mut self) -> Self {
        self.project_mean_zero();
        self
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::from_parts(
            self.grid.clone(),
            self.values.iter().map(|v| a * v).collect(),
        )
    }

    /// `self += a·other`.
    pub fn axpy(&mut self, a: f64, other: &Field) {
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }

    /// `a·self + b·other` as a new field.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::from_parts(self.grid.clone(), values)
    }

    /// Periodic shift by whole grid cells: `out(i, j) = self(i - di, j - dj)`.
    pub fn shift(&self, di: isize, dj: isize) -> Self {
        let (nx, ny) = (self.grid.nx as isize, self.grid.ny as isize);
        let mut out = vec![0.0; self.values.len()];
        for j in 0..ny {
            let sj = (j - dj).rem_euclid(ny);
            for i in 0..nx {
                let si = (i - di).rem_euclid(nx);
                out[(j * nx + i) as usize] = self.values[(sj * nx + si) as usize];
            }
        }
        Self::from_parts(self.grid.clone(), out)
    }

    /// `max |self - other|`.
    pub fn distance_sup(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
