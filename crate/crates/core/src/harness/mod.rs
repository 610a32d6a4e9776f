//! Theorem-level stability and observability experiments.

pub mod ensemble;
pub mod fit;
pub mod hyperbolic;
pub mod parabolic;
pub mod report;

pub use ensemble::{CoefficientSpec, EnsembleSpec, SourceFamily};
pub use fit::{inversions, loglog_fit, LogLogFit, MIN_FIT_POINTS};
pub use hyperbolic::{first_eigenmode, lipschitz_experiment, observability_experiment, HyperbolicSetup};
pub use parabolic::{cauchy_stability_experiment, holder_experiment, ParabolicSetup};
pub use report::{GridSummary, HolderCase, RatioSummary, SampleRow, StabilityReport, ZERO_LABEL};
