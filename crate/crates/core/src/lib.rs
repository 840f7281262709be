//! Training engine for multilayer perceptrons whose weight updates are
//! computable by pulse coincidences on memristor synapses.
//!
//! The crate has three parts:
//!
//! - a trainer that swaps backpropagation's per-synapse product `x * delta`
//!   for `sign(x*delta) * min(|x|, |delta|)`, in continuous and quantized
//!   variants, with either transposed-weight or fixed-random backward
//!   matrices ([`update`], [`network`], [`trainer`]);
//! - a pulse/device layer showing the min-update is what an idealized
//!   threshold-switching memristor actually performs when both neurons fire
//!   their pulse trains at it ([`pulse`], [`device`]);
//! - an MNIST harness reproducing the method-comparison experiment grid
//!   ([`mnist`], [`trainer`]).

pub mod device;
pub mod error;
pub mod mnist;
pub mod network;
pub mod numerics;
pub mod pulse;
pub mod rng;
pub mod trainer;
pub mod update;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::Matrix;
pub use pulse::{Phase, Polarity, PulseTrain, QuantizationScheme};
pub use update::{Quant, UpdateKind, UpdateMethod};
