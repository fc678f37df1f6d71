//! Regularized logistic ERM on clean and input-perturbed synthetic data,
//! with empirical checks of the classifier-gap, empirical-gap and final
//! accuracy bounds.

mod bounds;
mod dataset;
mod loss;
mod train;

pub use bounds::{
    accuracy_bound_report, check_classifier_gap, check_empirical_gap, expected_gap_estimate,
    expected_loss_estimate, explicit_bound_term, lemma_trial, AccuracyBoundReport,
    AccuracyTrial, BoundContext, BoundReport, LemmaTrial, LossEstimate, HOLDS_TOLERANCE,
};
pub use dataset::{generate_synthetic, perturb_inputs, Dataset, NoiseRows, SyntheticSpec};
pub use loss::{LossKind, LossSpec};
pub use train::{empirical_risk, risk_gradient, train_erm, Classifier, MAX_ITERATIONS};

/// Gradient-norm target used by the suites.
pub const DEFAULT_TOL: f64 = 1e-8;
