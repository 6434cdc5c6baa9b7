//! Non-degenerate U-statistics: exact and fast evaluation, jackknife variance
//! estimation, self-normalized and Studentized prefix processes, an exact
//! Hoeffding-decomposition laboratory, and a seeded Monte Carlo harness for
//! checking their limit laws.
//!
//! ```
//! use ustat_core::{jackknife_summary, studentized_path, Distribution, Kernel};
//!
//! let dist: Distribution = "example:2".parse()?;
//! let kernel = Kernel::product(2)?.bind(&dist)?;
//! let data = dist.sample(5000, 42)?;
//! let jk = jackknife_summary(&kernel, &data)?;
//! let path = studentized_path(&kernel, &data, 4.0)?;
//! assert_eq!(kernel.theta(), Some(4.0));
//! assert!(jk.sum_sq > 0.0 && path.at_time(1.0).is_finite());
//! # Ok::<(), ustat_core::Error>(())
//! ```

pub mod combinatorics;
pub mod decomposition;
pub mod engine;
pub mod error;
pub mod jackknife;
pub mod kernel;
pub mod montecarlo;
pub mod process;
pub mod sampler;
pub mod summation;

pub use engine::{
    ordered_distinct_sum, prefix_values, u_prefix_fast_product, u_prefix_process, u_statistic,
    u_statistic_fast_product, OrderedTupleSum, UPrefixValues,
};
pub use error::{Error, Result};
pub use jackknife::{
    arvesen_estimator, jackknife_closed_form, jackknife_fast_product, jackknife_summary,
    leave_one_out, naive_sum_sq, JackknifeSummary,
};
pub use kernel::{
    project_h1, truncate_kernel, Kernel, KernelFamily, McBudget, ProjectionEstimate,
    ProjectionMethod, TruncationMode, TruncationRule,
};
pub use montecarlo::{
    ks_distance, normal_cdf, run_experiment, wiener_sup_cdf, ConvergenceReport, ExperimentConfig,
    ExperimentKind,
};
pub use process::{
    pseudo_selfnormalized_path, studentized_path, studentized_path_with, sup_abs, sup_functional,
    Normalizers, StepProcess, StudentizedScaling,
};
pub use sampler::{
    estimate_ell, moment_diagnostic, replication_seed, sample, DistKind, Distribution, EllEstimate,
    EllMethod,
};
