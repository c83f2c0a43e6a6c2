//! Diagonal state-space models: zero-order-hold discretization, three
//! interchangeable scan evaluators, the input-dependent (selective)
//! parameterization, and its reverse-mode gradient.

mod discretize;
mod gradcheck;
mod scan;
mod selective;

pub use discretize::{
    zoh, zoh_coefficients, zoh_discretize, DiagSsmParams, DiscreteParams, SelectiveInputs,
    SsmParams, ZOH_SERIES_THRESHOLD,
};
pub use gradcheck::{finite_diff_grad, relative_error, selective_gradient_errors, SELECTIVE_GROUPS};
pub use scan::{
    combine, lti_convolve, lti_kernel_materialize, scan_parallel, scan_sequential,
};
pub use selective::{
    selective_parameterize, selective_scan, selective_scan_backward, selective_scan_forward,
    SelectiveCache, SelectiveGrads,
};
