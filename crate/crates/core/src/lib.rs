//! Horizon-sweep forecasting of epidemic active cases.
//!
//! The pipeline ingests cumulative case/death/recovery series plus static
//! country features, builds a pooled sliding-window sample set, selects
//! features (none, pairwise correlation, recursive selection, Lasso), and
//! scores three forecasters (linear regression, a two-layer perceptron, and
//! an LSTM network) with repeated random 80/20 cross-validation for every
//! forecasting horizon.
//!
//! Numerical kernels and models are generic over [`Scalar`] (`f32`/`f64`);
//! the data pipeline runs in `f64`. Concrete aliases live at the crate root.

pub mod error;
pub mod featsel;
pub mod harness;
pub mod ingest;
pub mod models;
pub mod numerics;
pub mod samples;
pub mod scalar;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision multilayer perceptron.
pub type Mlp = models::mlp::Mlp<f64>;
/// Single-precision multilayer perceptron.
pub type Mlp32 = models::mlp::Mlp<f32>;
/// Double-precision LSTM forecaster.
pub type Lstm = models::lstm::Lstm<f64>;
/// Single-precision LSTM forecaster.
pub type Lstm32 = models::lstm::Lstm<f32>;
/// Double-precision linear model.
pub type LinearModel = numerics::linalg::LeastSquares<f64>;
pub type Forecaster = models::Forecaster<f64>;
pub type AdamState = numerics::adam::AdamState<f64>;
pub type LassoFit = numerics::lasso::LassoFit<f64>;
