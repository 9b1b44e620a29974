//! Simulation and property checks for nonlocal monostable equations
//!
//! ```text
//! du/dt = kappa (a * u) - m u - u G u
//! ```
//!
//! on a periodic 1D or 2D grid.

// `!(x > 0.0)` is the idiom for rejecting NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod kernels;
pub mod nonlinearity;
mod spectral;
pub mod spreading;
pub mod subsolution;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Point, Window};
pub use evolution::{evolve, linear_upper_bound, step, EvolveOptions, StepSchedule, Trajectory};
pub use kernels::{build_kernel, convolve, reduce_kernel, truncate_kernel, ConvolutionPath, Kernel, KernelSpec};
pub use nonlinearity::{apply_g, check_assumptions, reaction, theta_of, AssumptionReport, Competition, Model, Verdict};
pub use spreading::{estimate_cstar, upsilon_contains, weinberger_limit, weinberger_step, Profile, SpreadingOptions};
pub use subsolution::{alpha0, check_lower_bound_form, gaussian_subsolution, verify_linear_subsolution, verify_nonlinear_subsolution, SubsolutionParams};
pub use diagnostics::{check_avg_jump_lemma, check_recurrence_divergence, constant_data_oracle, front_speed, hair_trigger_metric, level_set_position};
