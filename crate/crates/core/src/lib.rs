//! Learning the manifold of plausible face parameters with a from-scratch
//! 1D convolutional denoising autoencoder.
//!
//! A linear morphable face model ([`morphable::MorphableModel`]) turns
//! identity and expression coefficient vectors into meshes. Clean coefficient
//! samples are corrupted by sparse Gaussian noise ([`dataset`]), an
//! eight-layer symmetric autoencoder ([`autoencoder`]) is trained to undo the
//! corruption ([`trainer`]), and the trained network is then used to project
//! wide uniform draws back onto the plausible region, yielding diverse
//! synthetic parameter datasets ([`evaluator`]).
//!
//! All numerics are double precision and every sampling site draws from a
//! seed-derived stream ([`rng::stream`]), so results are bitwise reproducible
//! regardless of thread count.

pub mod autoencoder;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod morphable;
pub mod nn;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
pub use morphable::{FaceMesh, MorphableModel, ParamGroup, ParamVector};
pub use dataset::{CorruptionConfig, ParamDataset, SamplePair};
pub use autoencoder::{AutoencoderSpec, AutoencoderWeights};
pub use trainer::{TrainConfig, TrainHistory};
