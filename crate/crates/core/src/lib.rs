//! # edd
//!
//! Predicting the next state of a time-varying probability distribution from
//! sample sets observed at earlier time steps.
//!
//! The pipeline:
//!
//! 1. embed every sample set as its kernel mean `μ̂_t = (1/n_t) Σᵢ φ(z^t_i)`
//!    ([`embedding`]),
//! 2. learn a linear operator `μ̂_t ↦ μ̂_{t+1}` by vector-valued ridge regression
//!    and apply it to `μ̂_T` ([`dynamics`]),
//! 3. optionally turn the signed-weight prediction into an ordinary sample set
//!    by herding ([`herding`]),
//! 4. train a classifier for the predicted distribution with per-sample weights
//!    and flipped labels ([`predsvm`]).
//!
//! [`metrics`] holds the evaluation measures and [`experiments`] the synthetic
//! benchmarks. Runnable walkthroughs live in the crate's `examples/` directory.
//!
//! ```
//! use edd::{dynamics, KernelSpec, SampleSet};
//!
//! let sets: Vec<SampleSet> = (0..4)
//!     .map(|t| SampleSet::from_scalars(t, &[t as f64, t as f64 + 0.5]).unwrap())
//!     .collect();
//! let model = dynamics::fit(sets, KernelSpec::gaussian(1.0), 0.01, None).unwrap();
//! let pred = model.extrapolate().unwrap();
//! assert_eq!(pred.beta.len(), 3);
//! ```

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod embedding;
pub mod error;
pub mod experiments;
pub mod herding;
pub mod io;
pub mod kernels;
mod linalg;
pub mod metrics;
pub mod predsvm;
pub mod sample;

pub use dynamics::{fit, DynamicsModel, Extrapolation, GammaRule};
pub use embedding::{embed, inner, rkhs_distance, WeightedEmbedding};
pub use error::{Error, Result};
pub use kernels::{KernelKind, KernelSpec};
pub use sample::{PointCloud, PointRef, SampleSet};
