//! Monte-Carlo checks of the sampling theory: unbiasedness of both
//! residual-energy estimators, variance and gradient-variance reduction
//! under element-aware sampling, and coverage ratios.
//!
//! Oracles are deterministic: integrals come from midpoint quadrature with
//! Richardson extrapolation, and every trial draws from its own stream
//! derived from `(seed, experiment, trial)`.

mod bootstrap;
mod estimator;
mod field;
mod quadrature;
mod verify;


pub use bootstrap::{bootstrap_gap, quantile, weighted_variance, Gap, BOOTSTRAP_RESAMPLES};
pub use estimator::{
    coverage_ratio, draw, eas_closer_fraction, estimate_I, estimate_samples, experiment_id,
    mean_var, oracle_for, proportional, trial_rng, within_3se, Draw, EstimatorReport, Strategy,
    ORACLE_START, ORACLE_TOL,
};
pub use field::{
    BumpField, ConstantField, FnField, ModelResidualField, PiecewiseConstantField,
    PiecewiseLinearField, ResidualField,
};
pub use quadrature::{midpoint_rule, oracle_integral, Quadrature, MAX_ORACLE_POINTS};
pub use verify::{
    cauchy_schwarz, element_integrals, gradient_samples, gradient_variance_with, true_integral,
    verify_gradient_variance, verify_variance_inequality, CauchySchwarz, GradientExpectation,
    GradientIntegrand, GradientSamples, GradientVariance, VarianceInequality,
};
