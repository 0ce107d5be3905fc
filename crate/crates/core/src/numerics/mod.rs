//! Metrics, correlation, least squares, the Lasso coordinate-descent
//! solver, the ADAM optimizer and a finite-difference gradient checker.

pub mod adam;
pub mod gradcheck;
pub mod lasso;
pub mod linalg;
pub mod metrics;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GRAD_CHECK_STEP};
pub use lasso::{
    kkt_residual, lambda_max, lambda_path, lasso_cd, lasso_cd_from, soft_threshold, LassoFit,
    LassoProblem, LASSO_MAX_ITER, LASSO_TOL,
};
pub use linalg::{least_squares, min_norm_solve, LeastSquares};
pub use metrics::{correlation_matrix, pearson, r2_score, CorrelationMatrix, Pearson};
