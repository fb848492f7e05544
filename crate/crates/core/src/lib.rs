//! Kernel approximation with quantized random Fourier features.
//!
//! Points are mapped through a frozen random Fourier feature map, quantized
//! (memoryless, stochastic, Sigma-Delta or β noise shaping), optionally
//! condensed, and compared through inner-product kernel estimates.

pub mod cli;
pub mod condense;
pub mod error;
pub mod features;
pub mod kernels;
pub mod pack;
pub mod pipeline;
pub mod quantize;
pub mod rng;
pub mod tasks;

pub use condense::{
    condense, condense_codes, memory_footprint, CondensedFeature, FeatureSource, Footprint,
    FootprintParams, StorageMethod, WeightVector,
};
pub use error::{Error, Result};
pub use features::{rff_kernel_estimate, KernelSpec, RffMap};
pub use kernels::{
    rbf_kernel, semiq_estimate, spectral_delta, spectral_sandwich_check, stocq_estimate,
    universal_estimate, GramMatrix, SandwichParams, SpectralCheckReport,
};
pub use pipeline::{Encoding, Method, Pipeline, Role};
pub use quantize::{
    msq, stocq, Alphabet, NoiseShapingConfig, Prescale, QuantizationResult, Scheme,
};
pub use rng::{derive_seed, rng_from_seed, QrffRng};
