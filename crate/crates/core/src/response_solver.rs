//! Best responses and Stackelberg equilibrium of the obfuscation game.
//!
//! A user's utility in its own noise σ depends on the other users only
//! through an additive constant, so each best response is a function of
//! σ_L alone. For σ > 0 the first-order condition reduces to a scalar
//! equation in the effective noise `s = √(σ_L² + σ²)`:
//!
//! ```text
//! s (1 + ρ s)² = P̄ ρ N² Λ² / (2 γ)
//! ```
//!
//! whose left side is strictly increasing, so it has a unique root `s*`.
//! While σ_L < s* the user tops the learner's noise up to `s*`; the flat
//! perturbation cost then decides between that interior point and σ = 0.
//! The gain of perturbing strictly decreases in σ_L, which yields a single
//! dissuasion threshold beyond which the best response is exactly zero.
//!
//! The learner's induced objective is concave between consecutive
//! thresholds and jumps at each of them, so the equilibrium is found by
//! enumerating thresholds, a regular grid, and a golden-section maximum on
//! every smooth piece.

use crate::error::{ensure_noise, Error, Result};
use crate::game_model::{
    learner_utility, privacy_loss_term, user_utility, GameConfig, LearnerParams, StrategyProfile,
    UserParams,
};

const MAX_BISECTIONS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    /// Upper end of the learner's searched noise range.
    pub sigma_max: f64,
    /// Spacing of the learner's candidate grid.
    pub grid_step: f64,
    /// Absolute tolerance for every bisection and golden-section search.
    pub root_tol: f64,
    /// Utility differences at or below this count as ties.
    pub tie_epsilon: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            sigma_max: 50.0,
            grid_step: 0.05,
            root_tol: 1e-9,
            tie_epsilon: 1e-9,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_max.is_finite()
            && self.sigma_max > 0.0
            && self.grid_step.is_finite()
            && self.grid_step > 0.0
            && self.grid_step < self.sigma_max
            && self.root_tol.is_finite()
            && self.root_tol > 0.0
            && self.tie_epsilon.is_finite()
            && self.tie_epsilon >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "solver settings need 0 < grid_step < sigma_max, tol > 0, tie_epsilon >= 0; got {self:?}"
            )))
        }
    }
}

/// Where a user's best response drops to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// The best response is zero for every σ_L ≥ 0.
    NeverPerturbs,
    /// Positive on `[0, t)`, zero on `[t, ∞)`, with `t ≤ sigma_max`.
    At(f64),
    /// The drop happens, but only past `sigma_max`.
    BeyondRange(f64),
}

impl Threshold {
    /// Threshold as a noise level: `Some(0)` for a user who never perturbs,
    /// `None` when it lies outside the searched range.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            Threshold::NeverPerturbs => Some(0.0),
            Threshold::At(t) => Some(t),
            Threshold::BeyondRange(_) => None,
        }
    }

    /// Location of the drop regardless of the searched range.
    pub fn location(&self) -> f64 {
        match *self {
            Threshold::NeverPerturbs => 0.0,
            Threshold::At(t) | Threshold::BeyondRange(t) => t,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Threshold::NeverPerturbs => "never_perturbs",
            Threshold::At(_) => "within_range",
            Threshold::BeyondRange(_) => "beyond_sigma_max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BestResponseCurve {
    pub sigma_l_grid: Vec<f64>,
    pub br_values: Vec<f64>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    pub sigma_l_star: f64,
    pub sigma_s_star: Vec<f64>,
    pub learner_utility: f64,
    pub user_utilities: Vec<f64>,
    pub per_user_thresholds: Vec<Threshold>,
}

impl EquilibriumResult {
    pub fn profile(&self) -> StrategyProfile {
        StrategyProfile::new(self.sigma_l_star, self.sigma_s_star.clone())
    }
}

/// Bisection on a monotone predicate that is false below the root and true
/// above it. Returns the final `(lo, hi)` bracket.
pub(crate) fn bisect_predicate(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    pred: impl Fn(f64) -> bool,
) -> (f64, f64) {
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
/// Returns the abscissa of the best point probed.
pub(crate) fn golden_section_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
        if c >= d {
            break;
        }
    }
    if fc >= fd {
        c
    } else {
        d
    }
}

/// Effective noise `s*` the user would like to be protected by, the root of
/// `s (1 + ρ s)² = P̄ ρ N² Λ² / (2 γ)`. `None` when the user has no privacy
/// loss to protect.
pub fn target_effective_noise(user: &UserParams, learner: &LearnerParams, root_tol: f64) -> Result<Option<f64>> {
    if user.max_privacy_loss == 0.0 {
        return Ok(None);
    }
    if user.accuracy_weight == 0.0 {
        return Err(Error::NoFiniteOptimum(
            "zero accuracy weight with positive privacy loss".into(),
        ));
    }
    let rho = user.privacy_rate;
    let n = learner.population_size as f64;
    let lambda = learner.regularizer;
    let rhs = user.max_privacy_loss * rho * n * n * lambda * lambda / (2.0 * user.accuracy_weight);
    if !rhs.is_finite() || rhs <= 0.0 {
        return Err(Error::Domain(format!("first-order condition constant is {rhs}")));
    }
    let g = |s: f64| s * (1.0 + rho * s).powi(2);
    // g(s) ≥ s and g(s) ≥ ρ² s³, so both bound the root from above.
    let hi = rhs.min((rhs / (rho * rho)).cbrt());
    let (lo, hi) = bisect_predicate(0.0, hi, root_tol, |s| g(s) >= rhs);
    Ok(Some(0.5 * (lo + hi)))
}

/// Stationary point of the user's utility in its own noise above zero,
/// or `None` if the learner's noise already exceeds the desired level.
pub fn interior_candidate(
    sigma_l: f64,
    user: &UserParams,
    learner: &LearnerParams,
    root_tol: f64,
) -> Result<Option<f64>> {
    ensure_noise("sigma_L", sigma_l)?;
    Ok(target_effective_noise(user, learner, root_tol)?.and_then(|s| interior_from_target(sigma_l, s)))
}

fn interior_from_target(sigma_l: f64, target: f64) -> Option<f64> {
    if sigma_l < target {
        let sigma = ((target - sigma_l) * (target + sigma_l)).sqrt();
        (sigma > 0.0).then_some(sigma)
    } else {
        None
    }
}

/// Per-user best-response machinery with the root `s*` solved once.
#[derive(Debug, Clone)]
pub struct UserResponder {
    user: UserParams,
    /// γ_S^i / (N² Λ²): weight of the user's own noise in its accuracy term.
    own_weight: f64,
    target: Option<f64>,
    tie_epsilon: f64,
    threshold: Threshold,
}

impl UserResponder {
    pub fn new(config: &GameConfig, i: usize) -> Result<Self> {
        let user = config
            .users
            .get(i)
            .ok_or_else(|| Error::Argument(format!("user index {i} out of range (N = {})", config.n_users())))?
            .clone();
        let learner = &config.learner;
        let n = learner.population_size as f64;
        let own_weight = user.accuracy_weight / (n * n * learner.regularizer * learner.regularizer);
        let target = target_effective_noise(&user, learner, config.solver.root_tol)?;
        let mut responder = Self {
            user,
            own_weight,
            target,
            tie_epsilon: config.solver.tie_epsilon,
            threshold: Threshold::NeverPerturbs,
        };
        responder.threshold = responder.locate_threshold(&config.solver);
        Ok(responder)
    }

    pub fn target_effective_noise(&self) -> Option<f64> {
        self.target
    }

    pub fn interior(&self, sigma_l: f64) -> Option<f64> {
        self.target.and_then(|s| interior_from_target(sigma_l, s))
    }

    /// Utility of the interior point minus utility at zero noise (the
    /// other users' noise cancels), `None` without an interior point.
    pub fn gain(&self, sigma_l: f64) -> Option<f64> {
        let sigma = self.interior(sigma_l)?;
        let u = &self.user;
        let p0 = u.max_privacy_loss / (1.0 + u.privacy_rate * sigma_l);
        let p1 = u.max_privacy_loss / (1.0 + u.privacy_rate * sigma_l.hypot(sigma));
        Some(p0 - p1 - self.own_weight * sigma * sigma - u.perturbation_cost)
    }

    /// Interior point if it beats zero by more than `tie_epsilon`, else 0.
    pub fn best_response(&self, sigma_l: f64) -> f64 {
        match (self.interior(sigma_l), self.gain(sigma_l)) {
            (Some(sigma), Some(gain)) if gain > self.tie_epsilon => sigma,
            _ => 0.0,
        }
    }

    pub fn threshold(&self) -> Threshold {
        self.threshold
    }

    fn perturbs(&self, sigma_l: f64) -> bool {
        self.gain(sigma_l).is_some_and(|g| g > self.tie_epsilon)
    }

    fn locate_threshold(&self, settings: &SolverSettings) -> Threshold {
        let Some(target) = self.target else {
            return Threshold::NeverPerturbs;
        };
        if !self.perturbs(0.0) {
            return Threshold::NeverPerturbs;
        }
        // The gain strictly decreases on [0, s*) and the interior point
        // vanishes at s*, so "does not perturb" is monotone in σ_L.
        let (_, hi) = bisect_predicate(0.0, target, settings.root_tol, |x| !self.perturbs(x));
        if hi <= settings.sigma_max {
            Threshold::At(hi)
        } else {
            Threshold::BeyondRange(hi)
        }
    }
}

/// Leader-side view of a game: every user's responder, built once.
#[derive(Debug, Clone)]
pub struct GameSolver<'a> {
    config: &'a GameConfig,
    responders: Vec<UserResponder>,
}

impl<'a> GameSolver<'a> {
    pub fn new(config: &'a GameConfig) -> Result<Self> {
        config.validate()?;
        let responders = (0..config.n_users())
            .map(|i| UserResponder::new(config, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { config, responders })
    }

    pub fn config(&self) -> &GameConfig {
        self.config
    }

    pub fn responders(&self) -> &[UserResponder] {
        &self.responders
    }

    pub fn best_responses(&self, sigma_l: f64) -> Vec<f64> {
        self.responders.iter().map(|r| r.best_response(sigma_l)).collect()
    }

    pub fn thresholds(&self) -> Vec<Threshold> {
        self.responders.iter().map(|r| r.threshold()).collect()
    }

    pub fn induced_profile(&self, sigma_l: f64) -> StrategyProfile {
        StrategyProfile::new(sigma_l, self.best_responses(sigma_l))
    }

    /// U_L(σ_L, BR_S(σ_L)).
    pub fn leader_objective(&self, sigma_l: f64) -> Result<f64> {
        ensure_noise("sigma_L", sigma_l)?;
        learner_utility(self.config, &self.induced_profile(sigma_l))
    }

    pub fn best_response_curve(&self, i: usize, sigma_l_grid: &[f64]) -> Result<BestResponseCurve> {
        let r = self
            .responders
            .get(i)
            .ok_or_else(|| Error::Argument(format!("user index {i} out of range")))?;
        for s in sigma_l_grid {
            ensure_noise("sigma_L", *s)?;
        }
        Ok(BestResponseCurve {
            sigma_l_grid: sigma_l_grid.to_vec(),
            br_values: sigma_l_grid.iter().map(|&s| r.best_response(s)).collect(),
            threshold: r.threshold().sigma(),
        })
    }

    /// Full equilibrium record for a given learner noise.
    pub fn result_at(&self, sigma_l: f64) -> Result<EquilibriumResult> {
        let profile = self.induced_profile(sigma_l);
        let learner = learner_utility(self.config, &profile)?;
        let users = (0..self.config.n_users())
            .map(|i| user_utility(self.config, i, &profile))
            .collect::<Result<Vec<_>>>()?;
        Ok(EquilibriumResult {
            sigma_l_star: sigma_l,
            sigma_s_star: profile.sigma_s,
            learner_utility: learner,
            user_utilities: users,
            per_user_thresholds: self.thresholds(),
        })
    }

    /// Candidate learner noise levels: zero, the grid, each threshold and
    /// its `root_tol` neighbours, and the maximum of every smooth piece.
    pub fn candidates(&self) -> Vec<f64> {
        let s = &self.config.solver;
        let mut out = vec![0.0, s.sigma_max];
        let steps = (s.sigma_max / s.grid_step).floor() as usize;
        out.extend((1..=steps).map(|k| k as f64 * s.grid_step).filter(|&x| x <= s.sigma_max));

        let mut breaks: Vec<f64> = self
            .thresholds()
            .iter()
            .filter_map(|t| match t {
                Threshold::At(t) if *t > 0.0 => Some(*t),
                _ => None,
            })
            .collect();
        for &t in &breaks {
            out.push(t);
            out.push((t - s.root_tol).max(0.0));
            out.push((t + s.root_tol).min(s.sigma_max));
        }
        breaks.push(0.0);
        breaks.push(s.sigma_max);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        for w in breaks.windows(2) {
            let (a, b) = (w[0], w[1] - s.root_tol);
            if b - a > s.root_tol {
                let x = golden_section_max(a, b, s.root_tol, |x| {
                    self.leader_objective(x).unwrap_or(f64::NEG_INFINITY)
                });
                out.push(x);
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    pub fn solve(&self) -> Result<EquilibriumResult> {
        let cands = self.candidates();
        let mut values = Vec::with_capacity(cands.len());
        for &x in &cands {
            let v = self.leader_objective(x)?;
            if !v.is_finite() {
                return Err(Error::Config(format!("learner utility is {v} at sigma_L = {x}")));
            }
            values.push((x, v));
        }
        let sigma_l = pick_smallest_near_max(&values, self.config.solver.tie_epsilon)
            .ok_or_else(|| Error::Config("empty candidate set".into()))?;
        self.result_at(sigma_l)
    }
}

/// Among `(x, value)` pairs sorted by `x`, the smallest `x` whose value is
/// within `tie_epsilon` of the maximum.
pub(crate) fn pick_smallest_near_max(values: &[(f64, f64)], tie_epsilon: f64) -> Option<f64> {
    let best = values.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    values.iter().find(|p| p.1 >= best - tie_epsilon).map(|p| p.0)
}

pub fn user_best_response(sigma_l: f64, i: usize, config: &GameConfig) -> Result<f64> {
    ensure_noise("sigma_L", sigma_l)?;
    Ok(UserResponder::new(config, i)?.best_response(sigma_l))
}

pub fn dissuasion_threshold(i: usize, config: &GameConfig) -> Result<Threshold> {
    Ok(UserResponder::new(config, i)?.threshold())
}

pub fn leader_objective(sigma_l: f64, config: &GameConfig) -> Result<f64> {
    GameSolver::new(config)?.leader_objective(sigma_l)
}

pub fn stackelberg_solve(config: &GameConfig) -> Result<EquilibriumResult> {
    GameSolver::new(config)?.solve()
}

/// Privacy term seen by user `i` under a profile, exposed for reports.
pub fn user_privacy_loss(config: &GameConfig, i: usize, profile: &StrategyProfile) -> Result<f64> {
    let u = &config.users[i];
    privacy_loss_term(u.max_privacy_loss, u.privacy_rate, profile.sigma_l, profile.sigma_s[i])
}
