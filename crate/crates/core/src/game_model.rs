//! Parameters and utility functions of the learner/user obfuscation game.
//!
//! The learner announces a Gaussian noise level `sigma_l` that it adds to
//! every submitted data point; each user `i` then adds noise of its own,
//! `sigma_s[i]`. Utilities combine three effects:
//!
//! * accuracy: `weight / (N Λ²) · (σ_L² + (1/N) Σ_i σ_S^i²)`, the expected
//!   loss gap of the input-perturbed ERM classifier,
//! * privacy: `P̄ / (1 + ρ √(σ_L² + σ_S^i²))`, decaying with the effective
//!   noise the user's record is protected by,
//! * perturbation cost: a flat `N̄` paid whenever the player's own noise is
//!   strictly positive.
//!
//! The sample count in the accuracy term is the number of users `N`; each
//! user contributes exactly one record.

use crate::error::{ensure_finite, ensure_noise, Error, Result};
use crate::response_solver::SolverSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerParams {
    /// Ḡ_L, utility of an unperturbed classifier.
    pub baseline_gain: f64,
    /// γ_L, rate of utility loss due to the accuracy gap.
    pub accuracy_weight: f64,
    /// N̄_L, flat cost of perturbing at all.
    pub perturbation_cost: f64,
    /// Λ, the ERM regularization constant.
    pub regularizer: f64,
    /// N, number of users (one record each).
    pub population_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserParams {
    /// Ḡ_S^i
    pub baseline_gain: f64,
    /// γ_S^i
    pub accuracy_weight: f64,
    /// P̄_S^i, privacy loss suffered when nobody perturbs.
    pub max_privacy_loss: f64,
    /// ρ_S^i, how fast privacy loss decays with effective noise.
    pub privacy_rate: f64,
    /// N̄_S^i
    pub perturbation_cost: f64,
}

/// Everything needed to evaluate and solve one game instance.
#[derive(Debug, Clone, PartialEq)]
pub struct GameConfig {
    pub learner: LearnerParams,
    pub users: Vec<UserParams>,
    /// δ of the (ε, δ) guarantee reported alongside the game.
    pub dp_delta: f64,
    /// Feature dimension d.
    pub data_dim: usize,
    pub solver: SolverSettings,
}

/// Pure strategy of every player: the learner's σ_L and each user's σ_S^i.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub sigma_l: f64,
    pub sigma_s: Vec<f64>,
}

impl StrategyProfile {
    pub fn new(sigma_l: f64, sigma_s: Vec<f64>) -> Self {
        Self { sigma_l, sigma_s }
    }

    /// Nobody perturbs.
    pub fn zero(users: usize) -> Self {
        Self::new(0.0, vec![0.0; users])
    }

    pub fn validate(&self) -> Result<()> {
        ensure_noise("sigma_L", self.sigma_l)?;
        match self.sigma_s.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            Some(i) => ensure_noise(&format!("sigma_S[{i}]"), self.sigma_s[i]),
            None => Ok(()),
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("learner.G_bar", self.baseline_gain)?;
        nonneg("learner.gamma", self.accuracy_weight)?;
        nonneg("learner.N_bar", self.perturbation_cost)?;
        ensure_finite("learner.Lambda", self.regularizer)?;
        if self.regularizer <= 0.0 {
            return Err(Error::Config(format!(
                "learner.Lambda must be > 0, got {}",
                self.regularizer
            )));
        }
        if self.population_size == 0 {
            return Err(Error::Config("learner.N must be at least 1".into()));
        }
        Ok(())
    }
}

impl UserParams {
    pub fn validate(&self, index: usize) -> Result<()> {
        let key = |k: &str| format!("users[{index}].{k}");
        ensure_finite(&key("G_bar"), self.baseline_gain)?;
        nonneg(&key("gamma"), self.accuracy_weight)?;
        nonneg(&key("P_bar"), self.max_privacy_loss)?;
        nonneg(&key("N_bar"), self.perturbation_cost)?;
        ensure_finite(&key("rho"), self.privacy_rate)?;
        if self.privacy_rate <= 0.0 {
            return Err(Error::Config(format!(
                "{} must be > 0, got {}",
                key("rho"),
                self.privacy_rate
            )));
        }
        if self.accuracy_weight == 0.0 && self.max_privacy_loss > 0.0 {
            return Err(Error::Config(format!(
                "{} = 0 with {} > 0 has no finite best response",
                key("gamma"),
                key("P_bar")
            )));
        }
        Ok(())
    }
}

fn nonneg(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::Config(format!("{name} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

impl GameConfig {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.learner.validate()?;
        if self.users.len() != self.learner.population_size {
            return Err(Error::Config(format!(
                "learner.N = {} but {} users are listed",
                self.learner.population_size,
                self.users.len()
            )));
        }
        for (i, u) in self.users.iter().enumerate() {
            u.validate(i)?;
        }
        if !(self.dp_delta > 0.0 && self.dp_delta < 1.0) {
            return Err(Error::Config(format!("dp.delta must lie in (0, 1), got {}", self.dp_delta)));
        }
        if self.data_dim == 0 {
            return Err(Error::Config("dp.d must be at least 1".into()));
        }
        self.solver.validate()
    }

    fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.sigma_s.len() != self.n_users() {
            return Err(Error::Argument(format!(
                "profile has {} user strategies, config has {} users",
                profile.sigma_s.len(),
                self.n_users()
            )));
        }
        profile.validate()
    }

    /// Same game with every user's perturbation cost replaced.
    pub fn with_user_cost(&self, cost: f64) -> Self {
        let mut out = self.clone();
        for u in &mut out.users {
            u.perturbation_cost = cost;
        }
        out
    }
}

/// `weight / (N Λ²) · (σ_L² + (1/N) Σ_i σ_S^i²)`.
pub fn accuracy_gap_term(
    sigma_l: f64,
    sigma_s: &[f64],
    weight: f64,
    regularizer: f64,
    population: usize,
) -> Result<f64> {
    ensure_noise("sigma_L", sigma_l)?;
    for s in sigma_s {
        ensure_noise("sigma_S", *s)?;
    }
    ensure_finite("gamma", weight)?;
    ensure_finite("Lambda", regularizer)?;
    if regularizer <= 0.0 {
        return Err(Error::Domain(format!("Lambda must be > 0, got {regularizer}")));
    }
    if population == 0 {
        return Err(Error::Domain("N must be at least 1".into()));
    }
    let n = population as f64;
    let user_part: f64 = sigma_s.iter().map(|s| s * s).sum::<f64>() / n;
    Ok(weight / (n * regularizer * regularizer) * (sigma_l * sigma_l + user_part))
}

/// `P̄ / (1 + ρ √(σ_L² + σ_S²))`.
pub fn privacy_loss_term(max_loss: f64, rate: f64, sigma_l: f64, sigma_s: f64) -> Result<f64> {
    ensure_finite("P_bar", max_loss)?;
    ensure_finite("rho", rate)?;
    ensure_noise("sigma_L", sigma_l)?;
    ensure_noise("sigma_S", sigma_s)?;
    Ok(max_loss / (1.0 + rate * sigma_l.hypot(sigma_s)))
}

/// Flat cost, charged only for strictly positive noise.
pub fn perturbation_cost_term(cost: f64, sigma: f64) -> Result<f64> {
    ensure_finite("N_bar", cost)?;
    ensure_noise("sigma", sigma)?;
    Ok(if sigma > 0.0 { cost } else { 0.0 })
}

/// U_S^i(σ_L, σ_S^{-i}, σ_S^i).
pub fn user_utility(config: &GameConfig, i: usize, profile: &StrategyProfile) -> Result<f64> {
    let user = config
        .users
        .get(i)
        .ok_or_else(|| Error::Argument(format!("user index {i} out of range (N = {})", config.n_users())))?;
    config.check_profile(profile)?;
    let own = profile.sigma_s[i];
    let accuracy = accuracy_gap_term(
        profile.sigma_l,
        &profile.sigma_s,
        user.accuracy_weight,
        config.learner.regularizer,
        config.learner.population_size,
    )?;
    let privacy = privacy_loss_term(user.max_privacy_loss, user.privacy_rate, profile.sigma_l, own)?;
    let cost = perturbation_cost_term(user.perturbation_cost, own)?;
    Ok(user.baseline_gain - accuracy - privacy - cost)
}

/// U_L(σ_L, σ_S). The learner's privacy term is the users' average.
pub fn learner_utility(config: &GameConfig, profile: &StrategyProfile) -> Result<f64> {
    config.check_profile(profile)?;
    let learner = &config.learner;
    let accuracy = accuracy_gap_term(
        profile.sigma_l,
        &profile.sigma_s,
        learner.accuracy_weight,
        learner.regularizer,
        learner.population_size,
    )?;
    let mut privacy = 0.0;
    for (u, s) in config.users.iter().zip(&profile.sigma_s) {
        privacy += privacy_loss_term(u.max_privacy_loss, u.privacy_rate, profile.sigma_l, *s)?;
    }
    privacy /= config.n_users() as f64;
    let cost = perturbation_cost_term(learner.perturbation_cost, profile.sigma_l)?;
    Ok(learner.baseline_gain - accuracy - privacy - cost)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_term_examples() {
        assert_eq!(accuracy_gap_term(0.0, &[0.0, 0.0], 3.0, 0.7, 2).unwrap(), 0.0);
        assert_eq!(accuracy_gap_term(1.0, &[0.0], 1.0, 1.0, 1).unwrap(), 1.0);
        // 2 / (2 * 0.25) * (1 + 2/2) = 8
        assert!((accuracy_gap_term(1.0, &[1.0, 1.0], 2.0, 0.5, 2).unwrap() - 8.0).abs() < 1e-12);
        assert!(accuracy_gap_term(f64::NAN, &[0.0], 1.0, 1.0, 1).is_err());
        assert!(accuracy_gap_term(1.0, &[f64::INFINITY], 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn privacy_term_examples() {
        assert_eq!(privacy_loss_term(1.0, 1.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(privacy_loss_term(1.0, 1.0, 0.0, 1.0).unwrap(), 0.5);
        assert!((privacy_loss_term(4.0, 0.5, 3.0, 4.0).unwrap() - 8.0 / 7.0).abs() < 1e-15);
        assert!(privacy_loss_term(1.0, 1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn cost_indicator_is_strict() {
        assert_eq!(perturbation_cost_term(10.0, 0.0).unwrap(), 0.0);
        assert_eq!(perturbation_cost_term(10.0, 1e-12).unwrap(), 10.0);
        assert_eq!(perturbation_cost_term(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(perturbation_cost_term(10.0, f64::MIN_POSITIVE).unwrap(), 10.0);
    }

    #[test]
    fn user_utility_hand_substitution() {
        let cfg = config(learner(0.0, 0.0, 0.0, 1.0, 1), vec![user(1.0, 1.0, 1.0, 1.0, 0.1)]);
        let u = user_utility(&cfg, 0, &StrategyProfile::new(0.0, vec![1.0])).unwrap();
        assert!((u - (-0.6)).abs() < 1e-15);
        let u0 = user_utility(&cfg, 0, &StrategyProfile::zero(1)).unwrap();
        assert_eq!(u0, 1.0 - 1.0);
        assert!(matches!(
            user_utility(&cfg, 1, &StrategyProfile::zero(1)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn learner_utility_hand_substitution() {
        let cfg = config(learner(2.0, 1.0, 0.2, 1.0, 1), vec![user(0.0, 1.0, 1.0, 1.0, 0.0)]);
        let u = learner_utility(&cfg, &StrategyProfile::new(1.0, vec![0.0])).unwrap();
        assert!((u - 0.3).abs() < 1e-15);

        let cfg = config(
            learner(5.0, 1.0, 0.2, 1.0, 2),
            vec![user(0.0, 1.0, 3.0, 1.0, 0.0), user(0.0, 1.0, 1.0, 2.0, 0.0)],
        );
        assert_eq!(learner_utility(&cfg, &StrategyProfile::zero(2)).unwrap(), 5.0 - 2.0);
        assert!(matches!(
            learner_utility(&cfg, &StrategyProfile::zero(3)),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn learner_utility_composes_terms() {
        let cfg = config(
            learner(7.0, 1.5, 0.3, 0.8, 3),
            vec![
                user(1.0, 0.5, 2.0, 0.5, 1.0),
                user(1.0, 0.2, 4.0, 1.5, 2.0),
                user(1.0, 0.9, 1.0, 0.7, 3.0),
            ],
        );
        let p = StrategyProfile::new(0.4, vec![1.0, 0.0, 2.5]);
        // independent recomputation of every term
        let acc = 1.5 / (3.0 * 0.64) * (0.16 + (1.0 + 0.0 + 6.25) / 3.0);
        let priv_ = (2.0 / (1.0 + 0.5 * (0.16f64 + 1.0).sqrt())
            + 4.0 / (1.0 + 1.5 * 0.4)
            + 1.0 / (1.0 + 0.7 * (0.16f64 + 6.25).sqrt()))
            / 3.0;
        let expected = 7.0 - acc - priv_ - 0.3;
        let got = learner_utility(&cfg, &p).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12);

        // raising one user's noise lowers the learner's accuracy and privacy terms
        let mut q = p.clone();
        q.sigma_s[1] = 0.5;
        let acc_q = accuracy_gap_term(0.4, &q.sigma_s, 1.5, 0.8, 3).unwrap();
        assert!(acc_q > accuracy_gap_term(0.4, &p.sigma_s, 1.5, 0.8, 3).unwrap());
        assert!(privacy_loss_term(4.0, 1.5, 0.4, 0.5).unwrap() < privacy_loss_term(4.0, 1.5, 0.4, 0.0).unwrap());
    }

    #[test]
    fn config_validation() {
        let good = config(learner(1.0, 1.0, 1.0, 1.0, 1), vec![user(1.0, 1.0, 1.0, 1.0, 1.0)]);
        assert!(good.validate().is_ok());

        let mut bad = good.clone();
        bad.learner.population_size = 2;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut bad = good.clone();
        bad.users[0].accuracy_weight = 0.0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));

        let mut ok = good.clone();
        ok.users[0].accuracy_weight = 0.0;
        ok.users[0].max_privacy_loss = 0.0;
        assert!(ok.validate().is_ok());

        let mut bad = good.clone();
        bad.users[0].privacy_rate = 0.0;
        assert!(bad.validate().is_err());

        let mut bad = good.clone();
        bad.dp_delta = 1.0;
        assert!(bad.validate().is_err());

        let mut bad = good;
        bad.learner.regularizer = 0.0;
        assert!(bad.validate().is_err());
    }

    fn arb_config() -> impl Strategy<Value = GameConfig> {
        (1usize..5).prop_flat_map(|n| {
            (
                (0.1f64..5.0, 0.0f64..3.0, 0.2f64..2.0),
                prop::collection::vec((0.01f64..5.0, 0.0f64..10.0, 0.05f64..3.0, 0.0f64..5.0), n),
            )
                .prop_map(move |((gl, nl, lambda), us)| {
                    config(
                        learner(3.0, gl, nl, lambda, n),
                        us.into_iter().map(|(g, p, r, c)| user(1.0, g, p, r, c)).collect(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn other_users_enter_additively(
            cfg in arb_config(),
            sl in 0.0f64..5.0,
            a in 0.0f64..5.0,
            b in 0.0f64..5.0,
            others in prop::collection::vec(0.0f64..5.0, 8),
            others2 in prop::collection::vec(0.0f64..5.0, 8),
        ) {
            let n = cfg.n_users();
            let i = n - 1;
            let mut p1 = StrategyProfile::new(sl, others[..n].to_vec());
            let mut p2 = StrategyProfile::new(sl, others2[..n].to_vec());
            p1.sigma_s[i] = a;
            p2.sigma_s[i] = a;
            let d_a = user_utility(&cfg, i, &p1).unwrap() - user_utility(&cfg, i, &p2).unwrap();
            p1.sigma_s[i] = b;
            p2.sigma_s[i] = b;
            let d_b = user_utility(&cfg, i, &p1).unwrap() - user_utility(&cfg, i, &p2).unwrap();
            prop_assert!((d_a - d_b).abs() <= 1e-9 * (1.0 + d_a.abs()));
        }

        #[test]
        fn term_monotonicity(
            sl in 0.0f64..5.0,
            ss in 0.0f64..5.0,
            h in 1e-3f64..0.5,
            p in 0.1f64..10.0,
            rho in 0.05f64..3.0,
            gamma in 0.1f64..5.0,
        ) {
            let base = privacy_loss_term(p, rho, sl, ss).unwrap();
            prop_assert!(privacy_loss_term(p, rho, sl + h, ss).unwrap() < base);
            prop_assert!(privacy_loss_term(p, rho, sl, ss + h).unwrap() < base);
            prop_assert!(base <= p && base > 0.0);

            let acc = accuracy_gap_term(sl, &[ss, 1.0], gamma, 0.7, 2).unwrap();
            prop_assert!(accuracy_gap_term(sl + h, &[ss, 1.0], gamma, 0.7, 2).unwrap() > acc);
            prop_assert!(accuracy_gap_term(sl, &[ss + h, 1.0], gamma, 0.7, 2).unwrap() > acc);
        }
    }
}
