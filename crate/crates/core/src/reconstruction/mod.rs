//! Regularized reconstruction of sources and initial states from boundary data.

pub mod cg;
pub mod map;
pub mod scenarios;
pub mod study;

pub use cg::{
    add_noise, discrepancy_principle, normal_operator_norm, reconstruct, InverseProblemSpec, ReconstructionResult,
    Scenario, DISCREPANCY_TAU,
};
pub use map::{dot_product_test, weighted_dot, weighted_norm, AssembledMap, LinearMap, TraceOperator};
pub use scenarios::{CauchyMap, LocalDataLayout, ParabolicLocalMap, WaveBoundaryMap};
pub use study::{
    noise_scaling_study, relative_error, relative_error_masked, ErrorMeasure, NoiseStudyConfig, NoiseStudyReport, NoiseStudyRow,
};
