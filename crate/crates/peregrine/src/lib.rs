//! Pseudospectral operator-splitting solver for the fractional
//! reaction-diffusion equation `du/dt + sigma (-Laplace)^beta u = F(t, u)`
//! on a periodic 1-D box, with a lattice-periodic plus decaying
//! decomposition of the state in which the periodic background evolves
//! independently and the perturbation obeys the modified nonlinearity
//! `F(v + w) - F(v)`.

#![allow(clippy::manual_is_multiple_of)] // parity via `% 2` throughout

pub mod config;
pub mod decomp;
pub mod error;
pub mod grid;
pub mod init;
pub mod kernel;
mod numeric;
pub mod reaction;
pub mod run;
pub mod snapshot;
pub mod splitting;

pub use error::{Error, Result};
