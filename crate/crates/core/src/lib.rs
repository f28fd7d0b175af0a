//! Gaussian process regression with variably scaled kernels.
//!
//! A variably scaled kernel evaluates a stationary radial kernel on the
//! lifted points `(x, psi(x))`, letting a user-supplied scaling map encode
//! jumps, corners or roughness of the target directly in the covariance.

pub mod analysis;
pub mod designs;
pub mod domain;
pub mod error;
pub mod experiments;
pub mod gp;
pub mod kernels;
pub mod mle;
pub mod scaling_maps;

pub use domain::Domain;
pub use error::{Error, Result};
pub use gp::{CovarianceModel, Prediction, TrainedGp, TrainingSet};
pub use kernels::{Kernel, RadialFamily, StationaryKernel, VskKernel};
pub use mle::{fit, FitResult, HyperBounds, ParamBound};
pub use scaling_maps::{PsiSpec, ScalingMap, TargetFunction};
