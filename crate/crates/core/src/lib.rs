//! Simulation engine for voltage-dependent synaptic plasticity (VDSP) on
//! memristive synapses.
//!
//! - [`device`]: switching model, conductance conversions, variability sampling
//! - [`characterization`]: random-amplitude pulse protocols, record I/O, model fitting
//! - [`neuron`]: LIF / adaptive LIF dynamics
//! - [`snn`]: two-layer WTA network with VDSP learning
//! - [`data`], [`encoding`]: MNIST IDX loading and current encoding
//! - [`experiments`]: training, labeling, evaluation and sweeps
//! - [`config`]: run configuration and presets
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the precision used by the experiment pipeline.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterization;
pub mod config;
pub mod data;
pub mod device;
pub mod encoding;
pub mod error;
pub mod experiments;
pub mod io;
pub mod neuron;
pub mod scalar;
pub mod seed;
pub mod snn;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Precision of the experiment pipeline.
pub type Real = f64;

pub type DeviceParams = device::DeviceParams<Real>;
pub type DeviceInstance = device::DeviceInstance<Real>;
pub type WeightState = device::WeightState<Real>;
pub type LifParams = neuron::LifParams<Real>;
pub type AlifParams = neuron::AlifParams<Real>;
pub type NetworkConfig = snn::NetworkConfig<Real>;
pub type Network = snn::Network<Real>;
pub type VdspConfig = snn::VdspConfig<Real>;

pub type DeviceParams32 = device::DeviceParams<f32>;
pub type Network32 = snn::Network<f32>;
