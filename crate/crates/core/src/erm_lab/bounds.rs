use std::fmt;

use super::dataset::{perturb_inputs, Dataset, NoiseRows, SyntheticSpec};
use super::loss::LossSpec;
use super::train::{empirical_risk, train_erm, Classifier};
use crate::dp_mechanism::{chi_square_cdf, GaussianNoise};
use crate::error::{ensure_noise, Error, Result};
use crate::stats::RunningStats;

/// Allowance for `holds`, absorbing rounding in both sides.
pub const HOLDS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundContext {
    /// `‖f† − f_d‖² ≤ (1 + c²‖f_d‖²)/(n²Λ²) Σ‖u_i‖²`
    ClassifierGap,
    /// `J(f_d, D) − J(f†, D) ≤ ‖f_d − f†‖² (1 + c)`
    EmpiricalGap,
    /// Expected-loss gap against the explicit term of the final bound.
    AccuracyBound,
}

impl fmt::Display for BoundContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ClassifierGap => "classifier_gap",
            Self::EmpiricalGap => "empirical_gap",
            Self::AccuracyBound => "accuracy_bound",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// `rhs − lhs`
    pub slack: f64,
    pub context: BoundContext,
}

impl BoundReport {
    pub fn new(lhs: f64, rhs: f64, context: BoundContext) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs + HOLDS_TOLERANCE,
            slack: rhs - lhs,
            context,
        }
    }
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Domain(format!("{name} must be positive and finite, got {value}")));
    }
    Ok(())
}

fn same_dim(a: &Classifier, b: &Classifier) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::Argument(format!("classifier dimensions differ: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// Checks the classifier-difference bound with the realized noise rows.
/// `n` is the number of noise rows.
pub fn check_classifier_gap(
    clean_f: &Classifier,
    pert_f: &Classifier,
    noise: &NoiseRows,
    lambda: f64,
    c: f64,
) -> Result<BoundReport> {
    same_dim(clean_f, pert_f)?;
    check_positive("Lambda", lambda)?;
    ensure_noise("c", c)?;
    if noise.is_empty() {
        return Err(Error::Argument("noise matrix has no rows".into()));
    }
    let n = noise.len() as f64;
    let lhs = clean_f.distance_sq(pert_f);
    let rhs = (1.0 + c * c * pert_f.norm_sq()) / (n * n * lambda * lambda) * noise.total_norm_sq();
    Ok(BoundReport::new(lhs, rhs, BoundContext::ClassifierGap))
}

/// Checks the empirical-loss bound on the clean database `data`, where
/// `f_dagger` is its minimizer.
pub fn check_empirical_gap(
    f_d: &Classifier,
    f_dagger: &Classifier,
    data: &Dataset,
    lambda: f64,
    loss: &LossSpec,
    c: f64,
) -> Result<BoundReport> {
    same_dim(f_d, f_dagger)?;
    ensure_noise("c", c)?;
    let lhs = empirical_risk(f_d, data, lambda, loss)? - empirical_risk(f_dagger, data, lambda, loss)?;
    let rhs = f_d.distance_sq(f_dagger) * (1.0 + c);
    Ok(BoundReport::new(lhs, rhs, BoundContext::EmpiricalGap))
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl LossEstimate {
    fn from_stats(stats: &RunningStats, offset: f64) -> Self {
        Self {
            mean: stats.mean() + offset,
            std_error: stats.std_error(),
            samples: stats.count(),
        }
    }
}

fn check_sampling(f: &Classifier, spec: &SyntheticSpec, m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    if f.dim() != spec.dim {
        return Err(Error::Argument(format!(
            "classifier has dimension {} but the generator draws {}",
            f.dim(),
            spec.dim
        )));
    }
    Ok(())
}

/// `Ĵ(f) = E l(y fᵀx) + (Λ/2)‖f‖²` over `m` fresh draws from `spec`.
pub fn expected_loss_estimate(
    f: &Classifier,
    spec: &SyntheticSpec,
    lambda: f64,
    loss: &LossSpec,
    m: usize,
    seed: u64,
) -> Result<LossEstimate> {
    check_sampling(f, spec, m)?;
    ensure_noise("Lambda", lambda)?;
    let mut noise = GaussianNoise::from_seed(seed);
    let mut x = vec![0.0; spec.dim];
    let mut stats = RunningStats::new();
    for _ in 0..m {
        let y = spec.draw(&mut noise, &mut x);
        stats.push(loss.value(y * f.score(&x)));
    }
    Ok(LossEstimate::from_stats(&stats, 0.5 * lambda * f.norm_sq()))
}

/// `Ĵ(a) − Ĵ(b)` estimated from the same `m` draws for both classifiers,
/// so sampling noise common to both cancels.
pub fn expected_gap_estimate(
    a: &Classifier,
    b: &Classifier,
    spec: &SyntheticSpec,
    lambda: f64,
    loss: &LossSpec,
    m: usize,
    seed: u64,
) -> Result<LossEstimate> {
    check_sampling(a, spec, m)?;
    same_dim(a, b)?;
    ensure_noise("Lambda", lambda)?;
    let mut noise = GaussianNoise::from_seed(seed);
    let mut x = vec![0.0; spec.dim];
    let mut stats = RunningStats::new();
    for _ in 0..m {
        let y = spec.draw(&mut noise, &mut x);
        stats.push(loss.value(y * a.score(&x)) - loss.value(y * b.score(&x)));
    }
    let reg = 0.5 * lambda * (a.norm_sq() - b.norm_sq());
    Ok(LossEstimate::from_stats(&stats, reg))
}

/// Everything the accuracy report needs from one perturbed training run.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyTrial {
    pub f_d: Classifier,
    pub sigma_l: f64,
    pub sigma_s: Vec<f64>,
    /// Estimate of `Ĵ(f_d) − Ĵ(f*)`.
    pub gap: LossEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyBoundReport {
    /// lhs is the measured gap, rhs the explicit term only; `holds` is
    /// informational because the remaining O-term has no known constant.
    pub bound: BoundReport,
    pub gap_std_error: f64,
    /// `ln(1/δ) / (Λ n)`, the magnitude of the unresolved term.
    pub o_term_magnitude: f64,
    /// `σ_L² + (1/n) Σ (σ_S^i)²`
    pub noise_scale: f64,
    /// `1 − δ (1 − P{χ²_d ≤ ζ})`
    pub probability: f64,
}

pub fn explicit_bound_term(f_d_norm_sq: f64, sigma_l: f64, sigma_s: &[f64], zeta: f64, lambda: f64, c: f64) -> f64 {
    let n = sigma_s.len() as f64;
    let noise: f64 = sigma_s.iter().map(|s| zeta * (sigma_l * sigma_l + s * s)).sum();
    (2.0 + 2.0 * c * c * f_d_norm_sq) / (n * n * lambda * lambda) * noise * (1.0 + c)
}

pub fn accuracy_bound_report(
    trial: &AccuracyTrial,
    zeta: f64,
    delta: f64,
    d: usize,
    lambda: f64,
    c: f64,
) -> Result<AccuracyBoundReport> {
    check_positive("Lambda", lambda)?;
    ensure_noise("zeta", zeta)?;
    ensure_noise("sigma_L", trial.sigma_l)?;
    for s in &trial.sigma_s {
        ensure_noise("sigma_S", *s)?;
    }
    if trial.sigma_s.is_empty() {
        return Err(Error::Argument("trial has no users".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let n = trial.sigma_s.len() as f64;
    let explicit = explicit_bound_term(trial.f_d.norm_sq(), trial.sigma_l, &trial.sigma_s, zeta, lambda, c);
    let p = chi_square_cdf(d, zeta)?;
    Ok(AccuracyBoundReport {
        bound: BoundReport::new(trial.gap.mean, explicit, BoundContext::AccuracyBound),
        gap_std_error: trial.gap.std_error,
        o_term_magnitude: (1.0 / delta).ln() / (lambda * n),
        noise_scale: trial.sigma_l * trial.sigma_l + trial.sigma_s.iter().map(|s| s * s).sum::<f64>() / n,
        probability: 1.0 - delta * (1.0 - p),
    })
}

/// Clean and perturbed classifiers for one dataset with both lemma checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTrial {
    pub f_dagger: Classifier,
    pub f_d: Classifier,
    pub noise: NoiseRows,
    pub classifier_gap: BoundReport,
    pub empirical_gap: BoundReport,
}

pub fn lemma_trial(
    clean: &Dataset,
    sigma_l: f64,
    sigma_s: &[f64],
    noise_seed: u64,
    lambda: f64,
    loss: &LossSpec,
    tol: f64,
) -> Result<LemmaTrial> {
    let (perturbed, noise) = perturb_inputs(clean, sigma_l, sigma_s, noise_seed)?;
    let f_dagger = train_erm(clean, lambda, loss, tol)?;
    let f_d = train_erm(&perturbed, lambda, loss, tol)?;
    let c = loss.curvature_bound;
    let classifier_gap = check_classifier_gap(&f_dagger, &f_d, &noise, lambda, c)?;
    let empirical_gap = check_empirical_gap(&f_d, &f_dagger, clean, lambda, loss, c)?;
    Ok(LemmaTrial {
        f_dagger,
        f_d,
        noise,
        classifier_gap,
        empirical_gap,
    })
}
