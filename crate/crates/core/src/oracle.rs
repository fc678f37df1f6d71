//! Exhaustive grid search for the Stackelberg equilibrium.
//!
//! Evaluates the utilities directly and never touches the closed-form
//! response machinery in [`crate::response_solver`], so it can serve as an
//! independent check on it. For every learner grid point each user's best
//! response is found by scanning its own noise on a grid; the learner then
//! takes the best grid point. The refined variant zooms in around the best
//! grid points at both levels, which is needed to resolve utilities to far
//! below the grid spacing.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::game_model::{learner_utility, user_utility, GameConfig, StrategyProfile};
use crate::response_solver::{dissuasion_threshold, pick_smallest_near_max, EquilibriumResult};

/// Largest number of utility evaluations a single search may request.
pub const MAX_EVALUATIONS: f64 = 2e10;

const ZOOM_POINTS: usize = 20;
const LEADER_REFINE_PEAKS: usize = 8;

fn grid(upper: f64, step: f64) -> Vec<f64> {
    let n = (upper / step + 1e-9).floor() as usize;
    (0..=n).map(|k| (k as f64 * step).min(upper)).collect()
}

struct Oracle<'a> {
    config: &'a GameConfig,
    grid: Vec<f64>,
    step: f64,
    zoom_levels: usize,
}

impl Oracle<'_> {
    /// Best response of user `i` to `sigma_l` with everybody else at zero.
    fn user_best(&self, i: usize, sigma_l: f64, buf: &mut StrategyProfile) -> Result<f64> {
        let tie = self.config.solver.tie_epsilon;
        buf.sigma_l = sigma_l;
        buf.sigma_s.iter_mut().for_each(|s| *s = 0.0);
        let at_zero = user_utility(self.config, i, buf)?;

        let mut best = (0.0, f64::NEG_INFINITY);
        for &s in &self.grid[1..] {
            buf.sigma_s[i] = s;
            let v = user_utility(self.config, i, buf)?;
            if v > best.1 {
                best = (s, v);
            }
        }
        let upper = *self.grid.last().unwrap();
        let mut half = self.step;
        for _ in 0..self.zoom_levels {
            let lo = (best.0 - half).max(0.0);
            let hi = (best.0 + half).min(upper);
            for k in 0..=ZOOM_POINTS {
                let s = lo + (hi - lo) * k as f64 / ZOOM_POINTS as f64;
                if s <= 0.0 {
                    continue;
                }
                buf.sigma_s[i] = s;
                let v = user_utility(self.config, i, buf)?;
                if v > best.1 {
                    best = (s, v);
                }
            }
            half /= 10.0;
        }
        buf.sigma_s[i] = 0.0;
        Ok(if best.1 - at_zero > tie { best.0 } else { 0.0 })
    }

    fn profile(&self, sigma_l: f64) -> Result<StrategyProfile> {
        let n = self.config.n_users();
        let mut buf = StrategyProfile::zero(n);
        let sigma_s = (0..n)
            .map(|i| self.user_best(i, sigma_l, &mut buf))
            .collect::<Result<Vec<_>>>()?;
        Ok(StrategyProfile::new(sigma_l, sigma_s))
    }

    fn leader_value(&self, sigma_l: f64) -> Result<f64> {
        learner_utility(self.config, &self.profile(sigma_l)?)
    }

    fn solve(&self) -> Result<EquilibriumResult> {
        let mut values: Vec<(f64, f64)> = self
            .grid
            .par_iter()
            .map(|&x| self.leader_value(x).map(|v| (x, v)))
            .collect::<Result<Vec<_>>>()?;

        if self.zoom_levels > 0 {
            let mut extra = Vec::new();
            for peak in self.local_peaks(&values) {
                let mut best = peak;
                let mut half = self.step;
                for _ in 0..self.zoom_levels {
                    let lo = (best.0 - half).max(0.0);
                    let hi = (best.0 + half).min(*self.grid.last().unwrap());
                    let probes: Vec<f64> = (0..=ZOOM_POINTS)
                        .map(|k| lo + (hi - lo) * k as f64 / ZOOM_POINTS as f64)
                        .collect();
                    let scored = probes
                        .par_iter()
                        .map(|&x| self.leader_value(x).map(|v| (x, v)))
                        .collect::<Result<Vec<_>>>()?;
                    for p in scored {
                        if p.1 > best.1 {
                            best = p;
                        }
                        extra.push(p);
                    }
                    half /= 10.0;
                }
            }
            values.extend(extra);
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
        }

        for (x, v) in &values {
            if !v.is_finite() {
                return Err(Error::Config(format!("learner utility is {v} at sigma_L = {x}")));
            }
        }
        let sigma_l = pick_smallest_near_max(&values, self.config.solver.tie_epsilon)
            .ok_or_else(|| Error::Config("empty grid".into()))?;
        let profile = self.profile(sigma_l)?;
        let n = self.config.n_users();
        Ok(EquilibriumResult {
            sigma_l_star: sigma_l,
            learner_utility: learner_utility(self.config, &profile)?,
            user_utilities: (0..n)
                .map(|i| user_utility(self.config, i, &profile))
                .collect::<Result<Vec<_>>>()?,
            per_user_thresholds: (0..n)
                .map(|i| dissuasion_threshold(i, self.config))
                .collect::<Result<Vec<_>>>()?,
            sigma_s_star: profile.sigma_s,
        })
    }

    /// Grid points at least as good as both neighbours, best first.
    fn local_peaks(&self, values: &[(f64, f64)]) -> Vec<(f64, f64)> {
        let mut peaks: Vec<(f64, f64)> = (0..values.len())
            .filter(|&k| {
                let left = k == 0 || values[k - 1].1 <= values[k].1;
                let right = k + 1 == values.len() || values[k + 1].1 <= values[k].1;
                left && right
            })
            .map(|k| values[k])
            .collect();
        peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
        peaks.truncate(LEADER_REFINE_PEAKS);
        peaks
    }
}

fn build(config: &GameConfig, fine_step: f64, zoom_levels: usize) -> Result<Oracle<'_>> {
    config.validate()?;
    if !(fine_step.is_finite() && fine_step > 0.0) {
        return Err(Error::Argument(format!("fine_step must be > 0, got {fine_step}")));
    }
    let upper = config.solver.sigma_max;
    let points = (upper / fine_step).floor() + 1.0;
    let evaluations = points * points * config.n_users() as f64;
    if evaluations > MAX_EVALUATIONS {
        return Err(Error::Resource(format!(
            "{evaluations:.3e} utility evaluations requested; lower solver.sigma_max or raise fine_step"
        )));
    }
    Ok(Oracle {
        config,
        grid: grid(upper, fine_step),
        step: fine_step,
        zoom_levels,
    })
}

/// Plain two-level grid search on `[0, sigma_max]` at spacing `fine_step`.
pub fn brute_force_equilibrium(config: &GameConfig, fine_step: f64) -> Result<EquilibriumResult> {
    build(config, fine_step, 0)?.solve()
}

/// Grid search followed by `zoom_levels` rounds of local zooming (each
/// shrinking the window tenfold) for every user response and around the
/// learner's best grid peaks.
pub fn brute_force_equilibrium_refined(
    config: &GameConfig,
    fine_step: f64,
    zoom_levels: usize,
) -> Result<EquilibriumResult> {
    build(config, fine_step, zoom_levels)?.solve()
}

/// Learner objective as the oracle sees it, for spot checks.
pub fn brute_force_leader_value(config: &GameConfig, sigma_l: f64, fine_step: f64, zoom_levels: usize) -> Result<f64> {
    build(config, fine_step, zoom_levels)?.leader_value(sigma_l)
}
