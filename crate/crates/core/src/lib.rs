//! Conditional global-null testing with adaptive selection of the
//! conditioning threshold.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod conditional;
pub mod distributions;
pub mod error;
pub mod global_tests;
pub mod io;
pub mod pvalue_models;
pub mod qualint;
pub mod rng;
pub mod scan;
pub mod sim;

pub use adaptive::{auto_select_tau, AdaptiveConfig, MaskedView, SessionStatus, StoppingRule, Suggestion, TauSession};
pub use conditional::{conditional_multiplicity, conditional_test, power_ratio, select, SelectionSet, StepProcedure};
pub use qualint::{gail_simon_lrt, ibga, qualitative_interaction_test, split_pvalues, QualIntResult, StudyRecord, TauMode};
pub use scan::{calibrate_alpha_scan, martingale_check, scan_statistic, ScanConfig};
pub use error::{Error, Result};
pub use global_tests::{combine, CombinedResult, GlobalMethod, PValueVector, TestOptions};
pub use io::{parse_csv, write_csv, Dataset, ResultJson};
