// SPDX-License-Identifier: Apache-2.0

//! Disordered one-dimensional chains with distance-independent hopping.
//!
//! The crate builds the Anderson, long-range and cavity Hamiltonians, takes
//! their Hermitian and non-Hermitian spectra, and evaluates open-system
//! transport (transfer time, steady current, transmission), eigenstate
//! structure, wave-packet dynamics and disorder-ensemble statistics.
//!
//! Everything numerical is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the precision to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod model;
pub mod scalar;
mod secular;
pub mod spectral;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::{Cplx, Lapack, Real};

pub type ChainSpec = model::ChainSpec<f64>;
pub type CavityParams = model::CavityParams<f64>;
pub type DisorderRealization = model::DisorderRealization<f64>;
pub type OpenSystemConfig = model::OpenSystemConfig<f64>;
pub type HermitianSpectrum = spectral::HermitianSpectrum<f64>;
pub type BiorthogonalSpectrum = spectral::BiorthogonalSpectrum<f64>;
pub type ProjectedSpectrum = spectral::ProjectedSpectrum<f64>;
pub type TransportRecord = transport::TransportRecord<f64>;
pub type ThresholdSet = analysis::ThresholdSet<f64>;
pub type ShapeProfile = analysis::ShapeProfile<f64>;
pub type PerturbativeBasis = analysis::PerturbativeBasis<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type EnsembleSummary = ensemble::EnsembleSummary<f64>;

pub use model::{ModelKind, OpenMode};
