//! Deterministic initial-condition presets.
//!
//! `random_bounded` is pinned byte-for-byte so independent implementations
//! agree: a splitmix64 stream seeded from the config, one draw per value in
//! point-major order, each `u64` mapped to `[0, 1)` as `(x >> 11) * 2^-53`
//! and then to `sup * (2u - 1)`.

use serde::Serialize;

use crate::decomp::{lift_periodic, LatticeSpec, PeregrineState};
use crate::error::{Error, Result};
use crate::grid::{Field, GridSpec};

/// splitmix64: state advances by 0x9E3779B97F4A7C15; output is the
/// xor-shift-multiply finalizer of the new state.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Catalog of initial conditions. Profiles are replicated across components;
/// `random_bounded` draws each component independently.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Constant {
        value: f64,
    },
    /// `amplitude * cos(2 pi cycles x / L)`; `cycles` whole periods per box.
    Cosine {
        amplitude: f64,
        cycles: u32,
    },
    /// `amplitude * exp(-((x - center)/width)^2)`.
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// Compact bump: `amplitude * (1 + cos(pi (x - center)/width))/2` on
    /// `|x - center| <= width`, zero outside.
    RaisedCosineBump {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// Periodic background plus centered Gaussian bump; the decomposition is
    /// recorded separately. `cos_amplitude * cos(2 pi x / P)` on the cell
    /// grid, `bump_amplitude * exp(-((x - L/2)/bump_width)^2)` on the box.
    PeregrineSum {
        cos_amplitude: f64,
        bump_amplitude: f64,
        bump_width: f64,
    },
    /// Independent uniform samples in `[-sup, sup]`, seeded.
    RandomBounded {
        sup: f64,
        seed: u64,
    },
}

impl InitialKind {
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        match self {
            InitialKind::Constant { value } => {
                if !value.is_finite() {
                    return bad("initial constant value must be finite".into());
                }
            }
            InitialKind::Cosine { amplitude, cycles } => {
                if !amplitude.is_finite() {
                    return bad("initial cosine amplitude must be finite".into());
                }
                if *cycles == 0 {
                    return bad("initial cosine cycles must be >= 1".into());
                }
            }
            InitialKind::GaussianBump {
                amplitude,
                width,
                center,
            }
            | InitialKind::RaisedCosineBump {
                amplitude,
                width,
                center,
            } => {
                if !amplitude.is_finite() {
                    return bad("initial bump amplitude must be finite".into());
                }
                if !(width.is_finite() && *width > 0.0) {
                    return bad(format!("initial bump width must be > 0, got {width}"));
                }
                if !(center.is_finite() && *center >= 0.0 && *center <= grid.length()) {
                    return bad(format!(
                        "initial bump center must lie in [0, {}], got {center}",
                        grid.length()
                    ));
                }
            }
            InitialKind::PeregrineSum {
                cos_amplitude,
                bump_amplitude,
                bump_width,
            } => {
                if !cos_amplitude.is_finite() || !bump_amplitude.is_finite() {
                    return bad("peregrine_sum amplitudes must be finite".into());
                }
                if !(bump_width.is_finite() && *bump_width > 0.0) {
                    return bad(format!(
                        "peregrine_sum bump width must be > 0, got {bump_width}"
                    ));
                }
            }
            InitialKind::RandomBounded { sup, .. } => {
                if !(sup.is_finite() && *sup > 0.0) {
                    return bad(format!("random_bounded sup must be > 0, got {sup}"));
                }
            }
        }
        Ok(())
    }
}

/// Builds the initial field on `grid`; for `peregrine_sum` also returns the
/// recorded `(v, w)` decomposition on the lattice.
pub fn build_initial(
    kind: &InitialKind,
    grid: &GridSpec,
    lattice: Option<&LatticeSpec>,
) -> Result<(Field, Option<PeregrineState>)> {
    kind.validate(grid)?;
    let l = grid.length();
    match kind {
        InitialKind::Constant { value } => Ok((Field::constant(*grid, 0.0, *value)?, None)),
        InitialKind::Cosine { amplitude, cycles } => {
            let omega = 2.0 * std::f64::consts::PI * *cycles as f64 / l;
            Ok((
                Field::from_fn(*grid, 0.0, |x, _| amplitude * (omega * x).cos())?,
                None,
            ))
        }
        InitialKind::GaussianBump {
            amplitude,
            width,
            center,
        } => Ok((
            Field::from_fn(*grid, 0.0, |x, _| {
                amplitude * (-((x - center) / width).powi(2)).exp()
            })?,
            None,
        )),
        InitialKind::RaisedCosineBump {
            amplitude,
            width,
            center,
        } => Ok((
            Field::from_fn(*grid, 0.0, |x, _| {
                let r = (x - center).abs();
                if r <= *width {
                    amplitude * 0.5 * (1.0 + (std::f64::consts::PI * r / width).cos())
                } else {
                    0.0
                }
            })?,
            None,
        )),
        InitialKind::PeregrineSum {
            cos_amplitude,
            bump_amplitude,
            bump_width,
        } => {
            let lattice = lattice.ok_or_else(|| {
                Error::Config("peregrine_sum needs domain.period and domain.cells".into())
            })?;
            let cell_grid = lattice.cell_grid(grid.components())?;
            let period = lattice.period();
            let v = Field::from_fn(cell_grid, 0.0, |x, _| {
                cos_amplitude * (2.0 * std::f64::consts::PI * x / period).cos()
            })?;
            let w = Field::from_fn(*grid, 0.0, |x, _| {
                bump_amplitude * (-((x - 0.5 * l) / bump_width).powi(2)).exp()
            })?;
            let state = PeregrineState::new(v.clone(), w.clone(), lattice)?;
            let lifted = lift_periodic(&v, lattice)?;
            let sum = Field::new(
                *grid,
                0.0,
                lifted
                    .values()
                    .iter()
                    .zip(w.values())
                    .map(|(a, b)| a + b)
                    .collect(),
            )?;
            Ok((sum, Some(state)))
        }
        InitialKind::RandomBounded { sup, seed } => {
            let mut rng = SplitMix64::new(*seed);
            let values = (0..grid.value_len())
                .map(|_| sup * (2.0 * rng.next_unit_f64() - 1.0))
                .collect();
            Ok((Field::new(*grid, 0.0, values)?, None))
        }
    }
}
