//! Random-coding exponents of discrete memoryless channels under the
//! channel-independent decoding metric `D(T∘V_m ∥ T×Q)`, the fixed-rate and
//! fixed-slope iterations that minimize them over the input distribution, and a
//! Monte Carlo model of one-bit-feedback natural type selection.
//!
//! All logarithms are natural; rates and exponents are in nats per symbol.

pub mod error;
pub mod exponents;
pub mod itcore;
pub mod iterate;
pub mod oracle;
pub mod simulate;

pub use error::{Error, Result};
pub use exponents::{
    capacity, correct_exponent_ml, correct_exponent_strict, e0, error_exponent, minus_one_family,
    tilted_joint, Boundary, ExponentResult, MinusOneFamily, StrictExponent, TiltedSolution,
};
pub use itcore::{
    codebook_size, empirical_joint_type, enumerate_joint_types, kl_joint, mutual_information,
    product_joint, Channel, Distribution, JointDistribution, TypeWithDenominator,
};
pub use iterate::{
    check_lower_than, fixed_rate_run, fixed_rate_step, fixed_slope_run, fixed_slope_step,
    stationarity_residual,
};
pub use oracle::{cc_bound, exact_finite_n, implicit_exponent, ExactFiniteNReport, ImplicitKind};
pub use simulate::{
    estimate_exponent, fixed_q_events, natural_decode, nts_run, threshold_decide, SimConfig,
};
