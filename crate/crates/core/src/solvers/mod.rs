//! Finite-difference forward solvers and the odd time extension.

pub mod banded;
pub mod extend;
pub mod heat;
pub mod operator;
pub mod wave;

pub use extend::{extend_odd, extend_odd_unchecked};
pub use heat::{solve_heat, HeatSolution, HeatStepper};
pub use operator::{Coefficients, ScalarFn, SourceSpec, SpatialOperator, TimeFactor};
pub use wave::{cfl_limit, solve_wave_free, solve_wave_ibvp, wave_time_grid, TimeGrid, WaveStepper};
