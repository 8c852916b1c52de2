//! Temperature estimation: score function, Fisher information and QSNR
//! bounds, maximum likelihood and the empirical Cramér–Rao check.

pub mod fisher;
pub mod mle;
pub mod score;

pub use fisher::{
    enhancement_factor, enhancement_from_ncor, enhancement_prefactor, fisher_gaussian, fisher_independent, fisher_sequential,
    fisher_sequential_mc, n_cor_with_tail, outcome_moments, qsnr_bounds, qsnr_bounds_with_profile, Diagnostics, IndependentBound,
    LagProfile, McFisher, PrecisionReport, Regime, ReportInput, ValidityFlags, REPORT_SCHEMA_VERSION,
};
pub use mle::{batch_seed, crb_validation, mle_estimate, mle_from_statistics, CrbReport, MleEstimate, MleOptions, RecordStatistics};
pub use score::{score_finite_difference, score_function, ScoreKernel, ScoreMode};
