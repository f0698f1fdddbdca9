//! The fractional diffusion semigroup `S(t)`: spectral multiplier
//! construction, real-space kernel synthesis on the torus, closed-form
//! oracles for the two classical orders, and power-law tail fitting.
//!
//! The symbol of `S(t)` at frequency `xi` is `exp(-sigma * t * |xi|^(2*beta))`.
//! Synthesized kernels are the L-periodization of the line kernel, obtained
//! by sampling the symbol at the grid frequencies; the validity regime
//! (tail mass of the line kernel outside the box, symbol decay at Nyquist)
//! is what the tolerances in the tests pin down.

use crate::error::{Error, Result};
use crate::grid::{self, Field, GridSpec};
use crate::numeric;

/// Diffusion coefficient and fractional order of `sigma * (-Laplace)^beta`.
/// `sigma = 0` is allowed and makes `S(t)` the identity.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiffusionParams {
    sigma: f64,
    beta: f64,
}

impl DiffusionParams {
    pub fn new(sigma: f64, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0 && beta <= 1.0) {
            return Err(Error::BadBeta(beta));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::BadSigma(sigma));
        }
        Ok(Self { sigma, beta })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Spectral multiplier of `S(t)` on a grid, in FFT index order.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupSymbol {
    grid: GridSpec,
    params: DiffusionParams,
    duration: f64,
    symbol: Vec<f64>,
}

impl SemigroupSymbol {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn params(&self) -> &DiffusionParams {
        &self.params
    }

    pub fn values(&self) -> &[f64] {
        &self.symbol
    }
}

/// `symbol_j = exp(-sigma * t * |xi_j|^(2*beta))`; all ones when `sigma*t = 0`.
pub fn build_symbol(grid: GridSpec, params: DiffusionParams, t: f64) -> Result<SemigroupSymbol> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::BadDuration(t));
    }
    let st = params.sigma * t;
    let exponent = 2.0 * params.beta;
    let symbol = (0..grid.n_points())
        .map(|j| {
            if st == 0.0 {
                1.0
            } else {
                (-st * grid.frequency(j).abs().powf(exponent)).exp()
            }
        })
        .collect();
    Ok(SemigroupSymbol {
        grid,
        params,
        duration: t,
        symbol,
    })
}

/// Applies `S(t)` to a field: every component is multiplied in spectral
/// space by the symbol. The output carries time `u.time() + t`. `sigma*t = 0`
/// short-circuits to a clone so the identity is bitwise.
pub fn apply_semigroup(u: &Field, params: DiffusionParams, t: f64) -> Result<Field> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::BadDuration(t));
    }
    let new_time = u.time() + t;
    if params.sigma * t == 0.0 {
        return Ok(u.clone().with_time(new_time));
    }
    let symbol = build_symbol(*u.grid(), params, t)?;
    grid::apply_spectral_multiplier(u, symbol.values(), new_time)
}

pub(crate) fn apply_symbol(u: &Field, symbol: &SemigroupSymbol, new_time: f64) -> Result<Field> {
    if symbol.params.sigma * symbol.duration == 0.0 {
        return Ok(u.clone().with_time(new_time));
    }
    grid::apply_spectral_multiplier(u, symbol.values(), new_time)
}

/// Discrete positivity tolerance: trigonometric synthesis of a positive
/// kernel may undershoot by band-limiting.
pub const KERNEL_POSITIVITY_TOL: f64 = 1e-6;

/// Samples of the L-periodized kernel of `S(t)`, centered at `x = 0` with
/// wrap-around. Mass `spacing * sum = 1` and `min >= -1e-6` are enforced.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    grid: GridSpec,
    params: DiffusionParams,
    duration: f64,
    values: Vec<f64>,
}

impl KernelSample {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    /// Quadrature mass `spacing * sum(values)`.
    pub fn mass(&self) -> f64 {
        self.grid.spacing() * self.values.iter().sum::<f64>()
    }

    /// Signed coordinate of sample `k` in `[-L/2, L/2)`.
    pub fn coordinate(&self, k: usize) -> f64 {
        let x = self.grid.point(k);
        if x >= self.grid.length() / 2.0 {
            x - self.grid.length()
        } else {
            x
        }
    }
}

/// Inverse transform of the symbol: `values[k] = (1/L) sum_j symbol_j
/// e^{i xi_j x_k}`, the exact Fourier partial sum of the periodized kernel.
pub fn synthesize_kernel(grid: GridSpec, params: DiffusionParams, t: f64) -> Result<KernelSample> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::BadDuration(t));
    }
    if params.sigma * t == 0.0 {
        return Err(Error::DegenerateDuration);
    }
    let scalar_grid = GridSpec::new(grid.n_points(), grid.length(), 1)?;
    let symbol = build_symbol(scalar_grid, params, t)?;
    // Mode amplitude of the periodized kernel at xi_j is symbol_j / L.
    let spectral = grid::spectral_from_real_modes(
        scalar_grid,
        symbol
            .values()
            .iter()
            .map(|s| s / scalar_grid.length())
            .collect(),
    );
    let field = grid::spectral_inverse(&spectral)?;
    let values = field.into_values();
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -KERNEL_POSITIVITY_TOL {
        return Err(Error::KernelUndershoot { min });
    }
    let sample = KernelSample {
        grid: scalar_grid,
        params,
        duration: t,
        values,
    };
    debug_assert!((sample.mass() - 1.0).abs() < 1e-9);
    Ok(sample)
}

/// Closed-form line kernels for the two orders with elementary transforms:
/// `beta = 1` (Gaussian pair of `exp(-xi^2)`) and `beta = 1/2` (Poisson pair
/// of `exp(-|xi|)`).
pub fn closed_form_kernel(beta: f64, sigma_t: f64, x: f64) -> Result<f64> {
    if !(sigma_t.is_finite() && sigma_t > 0.0) {
        return Err(Error::BadDuration(sigma_t));
    }
    if beta == 1.0 {
        let s = sigma_t.sqrt();
        Ok(1.0 / (2.0 * std::f64::consts::PI.sqrt() * s) * (-x * x / (4.0 * sigma_t)).exp())
    } else if beta == 0.5 {
        let r = x / sigma_t;
        Ok(1.0 / (std::f64::consts::PI * sigma_t) / (1.0 + r * r))
    } else {
        Err(Error::UnsupportedClosedForm(beta))
    }
}

/// Least-squares slope of `log |G|` against `log x` over `[lo, hi]`, using
/// the positive-coordinate half of the kernel. The window must stay away
/// from both the origin and the wrap point (`0 < lo < hi < L/2`) and hold
/// at least 8 samples above the underflow floor.
pub fn tail_exponent(kernel: &KernelSample, window: (f64, f64)) -> Result<f64> {
    let (lo, hi) = window;
    let half = kernel.grid.length() / 2.0;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi && hi < half) {
        return Err(Error::BadTailWindow { lo, hi });
    }
    let dx = kernel.grid.spacing();
    let mut log_x = Vec::new();
    let mut log_g = Vec::new();
    let k_lo = (lo / dx).ceil() as usize;
    let k_hi = (hi / dx).floor() as usize;
    for k in k_lo..=k_hi.min(kernel.grid.n_points() / 2 - 1) {
        let x = kernel.grid.point(k);
        let g = kernel.values[k].abs();
        if g > 1e-300 {
            log_x.push(x.ln());
            log_g.push(g.ln());
        }
    }
    if log_x.len() < 8 {
        return Err(Error::TailWindowTooSmall(log_x.len()));
    }
    Ok(numeric::least_squares_slope(&log_x, &log_g))
}
