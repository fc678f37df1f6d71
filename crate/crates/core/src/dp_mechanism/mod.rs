//! Gaussian mechanism: the (ε, δ) guarantee of a given noise level and the
//! chi-square bound on the realized noise norm.
//!
//! The guarantee is `ε = 2 √(2 ln(1.25/δ)) / σ`, with σ the total noise
//! standard deviation `√(σ_L² + σ_S²)` protecting one record. The
//! record's L2 sensitivity is folded into the constant 2, i.e. the formula
//! is used exactly as displayed, with no separate sensitivity argument.

mod gamma;
mod noise;

pub use gamma::{ln_gamma, regularized_lower_gamma};
pub use noise::GaussianNoise;

use crate::error::{ensure_noise, Error, Result};

/// `δ` must stay below this for `ln(1.25/δ)` to be positive.
pub const DELTA_LIMIT: f64 = 1.25;

/// ε paired with the δ and total noise it was derived from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpGuarantee {
    pub epsilon: f64,
    pub delta: f64,
    pub total_sigma: f64,
    /// False when ε falls outside (0, 1) or δ ≥ 1, where the guarantee is
    /// not established; the formula is still evaluated.
    pub in_stated_range: bool,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_nan() || delta <= 0.0 || delta >= DELTA_LIMIT {
        return Err(Error::Domain(format!("delta must lie in (0, 1.25), got {delta}")));
    }
    Ok(())
}

/// `2 √(2 ln(1.25/δ))`, the numerator shared by both directions.
fn calibration(delta: f64) -> f64 {
    2.0 * (2.0 * (DELTA_LIMIT / delta).ln()).sqrt()
}

/// Total noise protecting user `i`'s record.
pub fn effective_sigma(sigma_l: f64, sigma_s: f64) -> f64 {
    sigma_l.hypot(sigma_s)
}

/// ε achieved by noise of standard deviation `total_sigma`. Zero noise
/// yields ε = ∞ instead of an error.
pub fn epsilon_from_sigma(total_sigma: f64, delta: f64) -> Result<DpGuarantee> {
    ensure_noise("sigma", total_sigma)?;
    check_delta(delta)?;
    let epsilon = if total_sigma == 0.0 {
        f64::INFINITY
    } else {
        calibration(delta) / total_sigma
    };
    Ok(DpGuarantee {
        epsilon,
        delta,
        total_sigma,
        in_stated_range: epsilon > 0.0 && epsilon < 1.0 && delta < 1.0,
    })
}

/// Noise level needed for a target ε.
pub fn sigma_from_epsilon(epsilon: f64, delta: f64) -> Result<f64> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    check_delta(delta)?;
    Ok(calibration(delta) / epsilon)
}

/// Adds independent N(0, σ²) noise to every component, from a stream
/// seeded by `seed`.
pub fn gaussian_perturb(vector: &[f64], sigma: f64, seed: u64) -> Result<Vec<f64>> {
    ensure_noise("sigma", sigma)?;
    if sigma == 0.0 {
        return Ok(vector.to_vec());
    }
    let mut noise = GaussianNoise::from_seed(seed);
    Ok(vector.iter().map(|x| x + noise.normal(sigma)).collect())
}

/// CDF of a chi-square variable with `d` degrees of freedom at `zeta`,
/// `γ(d/2, ζ/2) / Γ(d/2)`.
pub fn chi_square_cdf(d: usize, zeta: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Argument("degrees of freedom must be at least 1".into()));
    }
    if zeta.is_nan() || zeta < 0.0 {
        return Err(Error::Domain(format!("zeta must be >= 0, got {zeta}")));
    }
    regularized_lower_gamma(d as f64 / 2.0, zeta / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormBoundReport {
    pub dimension: usize,
    pub zeta: f64,
    /// `ζ (σ_L² + σ_S²)`, the bound on `‖v + w‖²`.
    pub radius_sq: f64,
    /// P{‖v + w‖² ≤ radius_sq}.
    pub probability: f64,
    /// `1 − δ (1 − probability)`: both failure events must occur together
    /// for the accuracy bound to fail (product of failure probabilities).
    pub combined_success: f64,
    /// `1 − δ − (1 − probability)`, the union-bound alternative, floored at 0.
    pub union_bound_success: f64,
}

pub fn norm_bound_probability(
    d: usize,
    zeta: f64,
    sigma_l: f64,
    sigma_s: f64,
    delta: f64,
) -> Result<NormBoundReport> {
    ensure_noise("sigma_L", sigma_l)?;
    ensure_noise("sigma_S", sigma_s)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Domain(format!("delta must lie in (0, 1), got {delta}")));
    }
    let probability = chi_square_cdf(d, zeta)?;
    Ok(NormBoundReport {
        dimension: d,
        zeta,
        radius_sq: zeta * (sigma_l * sigma_l + sigma_s * sigma_s),
        probability,
        combined_success: 1.0 - delta * (1.0 - probability),
        union_bound_success: (1.0 - delta - (1.0 - probability)).max(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_log_anchor() {
        let delta = 1.25 * (-1f64).exp();
        let g = epsilon_from_sigma(2.0 * 2f64.sqrt(), delta).unwrap();
        assert!((g.epsilon - 1.0).abs() < 1e-12);
        assert!(!g.in_stated_range);
        assert!((sigma_from_epsilon(1.0, delta).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn calculator_values() {
        // 2 sqrt(2 ln 25) = 5.074568...
        let e = epsilon_from_sigma(5.0745, 0.05).unwrap().epsilon;
        assert!((e - 1.0).abs() < 5e-5);
        let s = sigma_from_epsilon(0.5, 0.05).unwrap();
        assert!((s - 10.149).abs() < 1e-3);
        assert!(epsilon_from_sigma(10.0, 0.05).unwrap().in_stated_range);
    }

    #[test]
    fn doubling_sigma_halves_epsilon() {
        let a = epsilon_from_sigma(3.0, 1e-5).unwrap().epsilon;
        let b = epsilon_from_sigma(6.0, 1e-5).unwrap().epsilon;
        assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn domain_errors() {
        assert!(epsilon_from_sigma(1.0, 1.25).is_err());
        assert!(epsilon_from_sigma(1.0, 0.0).is_err());
        assert!(epsilon_from_sigma(-1.0, 0.1).is_err());
        assert!(sigma_from_epsilon(0.0, 0.1).is_err());
        let g = epsilon_from_sigma(0.0, 0.1).unwrap();
        assert!(g.epsilon.is_infinite() && !g.in_stated_range);
    }

    #[test]
    fn perturb_identity_and_determinism() {
        let v = [1.0, -2.0, 3.5];
        assert_eq!(gaussian_perturb(&v, 0.0, 9).unwrap(), v.to_vec());
        let a = gaussian_perturb(&v, 1.0, 9).unwrap();
        assert_eq!(a, gaussian_perturb(&v, 1.0, 9).unwrap());
        assert_ne!(a, gaussian_perturb(&v, 1.0, 10).unwrap());
    }

    #[test]
    fn perturbation_moments() {
        let n = 1_000_000;
        let zero = vec![0.0; n];
        let noise = gaussian_perturb(&zero, 2.0, 2024).unwrap();
        let mean = noise.iter().sum::<f64>() / n as f64;
        let var = noise.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 4.0 * 2.0 / 1000.0);
        assert!((var - 4.0).abs() < 0.02 * 4.0);
    }

    #[test]
    fn chi_square_closed_forms() {
        assert!((chi_square_cdf(2, 2.0 * 2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(chi_square_cdf(2, 0.0).unwrap(), 0.0);
        for &z in &[0.1, 1.0, 3.3, 10.0, 40.0] {
            assert!((chi_square_cdf(2, z).unwrap() - (1.0 - (-z / 2.0).exp())).abs() < 1e-12);
        }
        // median of chi-square with 5 degrees of freedom
        assert!((chi_square_cdf(5, 4.351).unwrap() - 0.5).abs() < 5e-4);
        assert!(chi_square_cdf(2, -1.0).is_err());
        assert!(chi_square_cdf(0, 1.0).is_err());
    }

    #[test]
    fn norm_report_fields() {
        let r = norm_bound_probability(2, 60.0, 1.0, 1.0, 0.1).unwrap();
        assert!(r.probability > 1.0 - 1e-12);
        let r = norm_bound_probability(2, 2.0 * 2f64.ln(), 3.0, 4.0, 0.1).unwrap();
        assert!((r.combined_success - 0.95).abs() < 1e-12);
        assert!((r.union_bound_success - 0.4).abs() < 1e-12);
        assert!((r.radius_sq - 2.0 * 2f64.ln() * 25.0).abs() < 1e-12);
    }

    #[test]
    fn chi_square_monte_carlo() {
        let mut g = GaussianNoise::from_seed(5);
        let (d, sl, ss) = (5usize, 1.5f64, 2.0f64);
        let s2 = sl * sl + ss * ss;
        let n = 100_000;
        let zeta = 4.351;
        let mut below = 0usize;
        let mut buf = vec![0.0; d];
        for _ in 0..n {
            g.fill_normal(&mut buf, s2.sqrt());
            if buf.iter().map(|x| x * x).sum::<f64>() <= zeta * s2 {
                below += 1;
            }
        }
        let r = norm_bound_probability(d, zeta, sl, ss, 0.01).unwrap();
        assert!((below as f64 / n as f64 - r.probability).abs() < 0.01);
    }

    proptest! {
        #[test]
        fn round_trip(eps in 1e-3f64..50.0, delta in 1e-12f64..1.2) {
            let s = sigma_from_epsilon(eps, delta).unwrap();
            let back = epsilon_from_sigma(s, delta).unwrap().epsilon;
            prop_assert!(((back - eps) / eps).abs() <= 1e-9);
        }

        #[test]
        fn epsilon_sigma_product_constant(s1 in 0.01f64..100.0, s2 in 0.01f64..100.0, delta in 1e-9f64..0.99) {
            let a = epsilon_from_sigma(s1, delta).unwrap().epsilon * s1;
            let b = epsilon_from_sigma(s2, delta).unwrap().epsilon * s2;
            prop_assert!(((a - b) / a).abs() < 1e-12);
        }

        #[test]
        fn cdf_monotone_in_unit_interval(d in 1usize..40, z in 0.0f64..100.0, dz in 0.0f64..10.0) {
            let a = chi_square_cdf(d, z).unwrap();
            let b = chi_square_cdf(d, z + dz).unwrap();
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a - 1e-15);
        }
    }
}
