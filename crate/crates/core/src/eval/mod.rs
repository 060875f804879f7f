//! Scoring and the evaluation protocols.

pub mod metrics;
pub mod protocol;
pub mod report;

pub use metrics::{one_sample_t_test, pearson_r, student_t_cdf, Correlation, TTest};
pub use protocol::{
    default_sweep_grid, plan_repeated_cv, run_fixed_split, run_repeated_cv, sweep_sample, training_size_sweep,
    CvPlan, MeanRegressor, OracleRegressor, Regressor, SweepPoint,
};
pub use report::{fmt_sig, Cell, EvalReport};
