//! Classification with spatial depth and localized spatial depth features.
//!
//! The pipeline maps each observation to its vector of per-class depths,
//! fits an additive multinomial logistic model on those features, and
//! aggregates localized-depth classifiers over randomly drawn bandwidths.
//!
//! The numeric core ([`numerics`], [`depth`], [`gam`], [`multiscale`],
//! [`baselines`]) is generic over [`Scalar`] (`f32` or `f64`); the
//! simulation and experiment layers work in `f64`.

pub mod error;
pub mod linalg;
pub mod numerics;
pub mod scalar;
pub mod depth;
pub mod gam;
pub mod dataset;
pub mod multiscale;
pub mod simgen;
pub mod baselines;
pub mod experiment;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision instantiations.
pub type Whitener64 = numerics::Whitener<f64>;
pub type DepthReference64 = depth::DepthReference<f64>;
pub type GamModel64 = gam::GamModel<f64>;
pub type MultiscaleConfig64 = multiscale::MultiscaleConfig<f64>;
pub type MultiscaleModel64 = multiscale::MultiscaleModel<f64>;
pub type LabeledDataset64 = dataset::LabeledDataset<f64>;

/// Single-precision instantiations.
pub type Whitener32 = numerics::Whitener<f32>;
pub type DepthReference32 = depth::DepthReference<f32>;
pub type GamModel32 = gam::GamModel<f32>;
pub type MultiscaleConfig32 = multiscale::MultiscaleConfig<f32>;
pub type MultiscaleModel32 = multiscale::MultiscaleModel<f32>;
pub type LabeledDataset32 = dataset::LabeledDataset<f32>;
