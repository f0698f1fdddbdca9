//! Uniform periodic 1-D grids, sampled vector-valued fields, and the
//! discrete Fourier transform pair used by every other module.
//!
//! # Spectral convention
//!
//! The continuum convention is the non-unitary angular-frequency transform
//! `g^(xi) = integral g(x) e^{-i xi x} dx`, which an array of samples
//! approximates at the grid frequencies `xi_j = 2*pi*j/L`,
//! `j in {-n/2, ..., n/2 - 1}`.
//!
//! [`SpectralField`] stores *mode amplitudes* `c_j` with
//! `u(x_k) = sum_j c_j e^{i xi_j x_k}`, i.e. `c_j = DFT_j(u) / n`.
//! The continuum transform sample at `xi_j` is therefore `L * c_j`; a
//! sample array with quadrature mass `spacing * sum(u) = 1` has
//! `L * c_0 = 1`. Coefficients are kept in FFT index order (index `j > n/2 - 1`
//! holds the negative frequency `j - n`).

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Uniform periodic grid on a box of the given length, holding `components`
/// values per point. Spacing is always derived as `length / n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_points: usize,
    length: f64,
    components: usize,
}

impl GridSpec {
    pub fn new(n_points: usize, length: f64, components: usize) -> Result<Self> {
        if n_points < 8 || n_points % 2 != 0 {
            return Err(Error::BadGridSize(n_points));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::BadGridLength(length));
        }
        if components == 0 {
            return Err(Error::BadComponentCount);
        }
        Ok(Self {
            n_points,
            length,
            components,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_points as f64
    }

    /// Coordinate of grid point `k`.
    pub fn point(&self, k: usize) -> f64 {
        k as f64 * self.spacing()
    }

    /// Signed integer frequency of FFT index `idx` (negative above n/2 - 1).
    pub fn signed_index(&self, idx: usize) -> i64 {
        debug_assert!(idx < self.n_points);
        if idx < self.n_points / 2 {
            idx as i64
        } else {
            idx as i64 - self.n_points as i64
        }
    }

    /// Angular frequency `xi_j = 2*pi*j/L` of FFT index `idx`.
    pub fn frequency(&self, idx: usize) -> f64 {
        self.signed_index(idx) as f64 * (2.0 * std::f64::consts::PI / self.length)
    }

    pub fn value_len(&self) -> usize {
        self.n_points * self.components
    }

    /// Same points and length, ignoring the component count.
    pub fn same_points(&self, other: &GridSpec) -> bool {
        self.n_points == other.n_points && self.length == other.length
    }
}

/// Sampled field on a [`GridSpec`]: `n_points * components` finite reals,
/// point-major (all components of a point contiguous), stamped with the
/// simulation time it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    time: f64,
    values: Vec<f64>,
}

impl Field {
    /// Builds a field, rejecting wrong-sized or non-finite data. NaN/Inf is
    /// a blow-up signal and never lives inside a valid `Field`.
    pub fn new(grid: GridSpec, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.value_len() {
            return Err(Error::BadValueLength {
                got: values.len(),
                expected: grid.value_len(),
            });
        }
        if !time.is_finite() || time < 0.0 {
            return Err(Error::BadDuration(time));
        }
        if let Some(idx) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(idx));
        }
        Ok(Self { grid, time, values })
    }

    /// Field with every component of every point equal to `value`.
    pub fn constant(grid: GridSpec, time: f64, value: f64) -> Result<Self> {
        Self::new(grid, time, vec![value; grid.value_len()])
    }

    /// Samples `f(x, component)` over the grid.
    pub fn from_fn(
        grid: GridSpec,
        time: f64,
        mut f: impl FnMut(f64, usize) -> f64,
    ) -> Result<Self> {
        let m = grid.components();
        let mut values = Vec::with_capacity(grid.value_len());
        for k in 0..grid.n_points() {
            let x = grid.point(k);
            for c in 0..m {
                values.push(f(x, c));
            }
        }
        Self::new(grid, time, values)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Components of point `k`.
    pub fn point_values(&self, k: usize) -> &[f64] {
        let m = self.grid.components();
        &self.values[k * m..(k + 1) * m]
    }

    pub(crate) fn with_time(mut self, time: f64) -> Self {
        self.time = time;
        self
    }

    pub(crate) fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// Euclidean norm across the components of one point.
pub(crate) fn point_norm(z: &[f64]) -> f64 {
    match z {
        [a] => a.abs(),
        [a, b] => a.hypot(*b),
        _ => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
    }
}

/// `sup_x |u(x)|`: the maximum over grid points of the Euclidean norm
/// across components.
pub fn sup_norm(u: &Field) -> f64 {
    let m = u.grid().components();
    u.values()
        .chunks_exact(m)
        .map(point_norm)
        .fold(0.0_f64, f64::max)
}

/// Sup-norm of the difference of two fields on identical point sets.
pub fn sup_distance(a: &Field, b: &Field) -> Result<f64> {
    if !a.grid().same_points(b.grid()) || a.grid().components() != b.grid().components() {
        return Err(Error::GridMismatch("sup_distance needs matching grids"));
    }
    let m = a.grid().components();
    let mut worst = 0.0_f64;
    let mut diff = vec![0.0; m];
    for (pa, pb) in a.values().chunks_exact(m).zip(b.values().chunks_exact(m)) {
        for c in 0..m {
            diff[c] = pa[c] - pb[c];
        }
        worst = worst.max(point_norm(&diff));
    }
    Ok(worst)
}

/// Translation by `k` whole grid points: `(T_gamma u)(x) = u(x + gamma)`
/// with `gamma = k * spacing`, so positive `k` rotates content toward lower
/// indices. Any `k` is accepted and taken mod `n_points`.
pub fn circular_shift(u: &Field, k: i64) -> Field {
    let n = u.grid().n_points() as i64;
    let m = u.grid().components();
    let shift = k.rem_euclid(n) as usize;
    let mut values = Vec::with_capacity(u.values().len());
    for j in 0..n as usize {
        let src = (j + shift) % n as usize;
        values.extend_from_slice(&u.values()[src * m..(src + 1) * m]);
    }
    Field {
        grid: *u.grid(),
        time: u.time(),
        values,
    }
}

/// Mode amplitudes of a field; see the module docs for the exact scale.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    time: f64,
    /// Point-major: `coefficients[j * m + c]` is mode `j` of component `c`.
    coefficients: Vec<Complex64>,
}

impl SpectralField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    /// Mode amplitude of component `c` at FFT index `j`.
    pub fn coefficient(&self, j: usize, c: usize) -> Complex64 {
        self.coefficients[j * self.grid.components() + c]
    }
}

static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = PLANNER
        .get_or_init(|| Mutex::new(FftPlanner::new()))
        .lock()
        .expect("fft planner poisoned");
    if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    }
}

/// Forward transform to mode amplitudes (`c_j = DFT_j / n`).
pub fn spectral_transform(u: &Field) -> SpectralField {
    let grid = *u.grid();
    let n = grid.n_points();
    let m = grid.components();
    let fft = plan(n, true);
    let scale = 1.0 / n as f64;
    let mut coefficients = vec![Complex64::default(); n * m];
    let mut buf = vec![Complex64::default(); n];
    for c in 0..m {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(u.values()[k * m + c], 0.0);
        }
        fft.process(&mut buf);
        for (j, v) in buf.iter().enumerate() {
            coefficients[j * m + c] = v * scale;
        }
    }
    SpectralField {
        grid,
        time: u.time(),
        coefficients,
    }
}

/// Spectral field with purely real mode amplitudes, one component.
pub(crate) fn spectral_from_real_modes(grid: GridSpec, modes: Vec<f64>) -> SpectralField {
    debug_assert_eq!(grid.components(), 1);
    debug_assert_eq!(modes.len(), grid.n_points());
    SpectralField {
        grid,
        time: 0.0,
        coefficients: modes.into_iter().map(|m| Complex64::new(m, 0.0)).collect(),
    }
}

/// Inverse of [`spectral_transform`]; imaginary round-off is discarded.
pub fn spectral_inverse(hat: &SpectralField) -> Result<Field> {
    let grid = *hat.grid();
    let n = grid.n_points();
    let m = grid.components();
    let fft = plan(n, false);
    let mut values = vec![0.0; n * m];
    let mut buf = vec![Complex64::default(); n];
    for c in 0..m {
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = hat.coefficients[j * m + c];
        }
        fft.process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            values[k * m + c] = v.re;
        }
    }
    Field::new(grid, hat.time(), values)
}

/// Multiplies every component's spectrum by a real multiplier array indexed
/// like the FFT, returning samples stamped with `new_time`. `multiplier`
/// must have `n_points` entries. The n/n scaling is fused so constants pass
/// through a power-of-two grid bitwise.
pub(crate) fn apply_spectral_multiplier(
    u: &Field,
    multiplier: &[f64],
    new_time: f64,
) -> Result<Field> {
    let grid = *u.grid();
    let n = grid.n_points();
    let m = grid.components();
    debug_assert_eq!(multiplier.len(), n);
    let forward = plan(n, true);
    let inverse = plan(n, false);
    let scale = 1.0 / n as f64;
    let mut values = vec![0.0; n * m];
    let mut buf = vec![Complex64::default(); n];
    for c in 0..m {
        for (k, slot) in buf.iter_mut().enumerate() {
            *slot = Complex64::new(u.values()[k * m + c], 0.0);
        }
        forward.process(&mut buf);
        for (j, v) in buf.iter_mut().enumerate() {
            *v *= multiplier[j];
        }
        inverse.process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            values[k * m + c] = v.re * scale;
        }
    }
    Field::new(grid, new_time, values)
}
