//! Cross-validation, the (model × method × horizon) sweep, best-method
//! choice, and per-country forecast traces.

pub mod cv;
pub mod store;
pub mod sweep;
pub mod trace;

pub use cv::{derive_seed, fit_and_score, mc_cv, split_rows, CvProtocol, CvReport, RepResult, SCORE_TIE_TOL};
pub use store::ResultStore;
pub use sweep::{best_method, run_sweep, BestMethod, CellKey, CellResult, Mode, SweepConfig, SweepResult, FAST_HORIZONS};
pub use trace::{country_trace, TraceModel, TraceResult, TraceSeries};
