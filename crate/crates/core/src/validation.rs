//! Randomized property suites shared by the CLI `validate` command and the
//! acceptance tests.
//!
//! Every suite is deterministic given its base seed; trial `k` uses seed
//! `base + k`, so a failing trial can be replayed on its own.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::dp_mechanism::{chi_square_cdf, GaussianNoise};
use crate::erm_lab::{
    accuracy_bound_report, expected_gap_estimate, generate_synthetic, lemma_trial, perturb_inputs, train_erm,
    AccuracyTrial, BoundReport, Classifier, LossSpec, SyntheticSpec, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::game_model::{GameConfig, LearnerParams, UserParams};
use crate::oracle::brute_force_equilibrium_refined;
use crate::response_solver::{stackelberg_solve, SolverSettings};
use crate::stats::{spearman, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Lemma1,
    Lemma2,
    Chi2,
    Scaling,
    Oracle,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Lemma1, Suite::Lemma2, Suite::Chi2, Suite::Scaling, Suite::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Lemma1 => "lemma1",
            Suite::Lemma2 => "lemma2",
            Suite::Chi2 => "chi2",
            Suite::Scaling => "scaling",
            Suite::Oracle => "oracle",
        }
    }

    /// Trials (or, for `scaling`, trials per sweep point) when none are given.
    pub fn default_trials(self) -> usize {
        match self {
            Suite::Lemma1 | Suite::Lemma2 => 100,
            Suite::Chi2 => CHI2_SAMPLES,
            Suite::Scaling => 50,
            Suite::Oracle => 20,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown suite `{s}`; expected lemma1, lemma2, chi2, scaling or oracle")))
    }
}

/// Mixes a base seed and a stream label into an independent seed.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------- lemmas

pub const LEMMA_N: usize = 200;
pub const LEMMA_D: usize = 5;
pub const LEMMA_LAMBDA: f64 = 0.1;
pub const LEMMA_SEPARATION: f64 = 4.0;
pub const LEMMA_SIGMA_L: [f64; 5] = [0.0, 0.1, 0.5, 1.0, 2.0];
/// Reported slack must not fall below this.
pub const LEMMA_SLACK_FLOOR: f64 = -1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaRow {
    pub seed: u64,
    pub sigma_l: f64,
    pub sigma_s: Vec<f64>,
    pub classifier_gap: BoundReport,
    pub empirical_gap: BoundReport,
}

/// User noise for a lemma trial: 0 with probability 0.3, else U(0, 2).
fn mixed_user_noise(noise: &mut GaussianNoise, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if noise.uniform() < 0.3 { 0.0 } else { 2.0 * noise.uniform() })
        .collect()
}

pub fn lemma_trial_at(seed: u64) -> Result<LemmaRow> {
    let data = generate_synthetic(LEMMA_N, LEMMA_D, LEMMA_SEPARATION, derive_seed(seed, 1))?;
    let sigma_l = LEMMA_SIGMA_L[(seed % LEMMA_SIGMA_L.len() as u64) as usize];
    let sigma_s = mixed_user_noise(&mut GaussianNoise::from_seed(derive_seed(seed, 2)), LEMMA_N);
    let t = lemma_trial(
        &data,
        sigma_l,
        &sigma_s,
        derive_seed(seed, 3),
        LEMMA_LAMBDA,
        &LossSpec::logistic(),
        DEFAULT_TOL,
    )?;
    Ok(LemmaRow {
        seed,
        sigma_l,
        sigma_s,
        classifier_gap: t.classifier_gap,
        empirical_gap: t.empirical_gap,
    })
}

pub fn lemma_trials(trials: usize, seed: u64) -> Result<Vec<LemmaRow>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|k| lemma_trial_at(seed.wrapping_add(k)))
        .collect()
}

// ------------------------------------------------------------ chi-square

pub const CHI2_DIMS: [usize; 4] = [1, 2, 5, 10];
pub const CHI2_ZETA_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 1.5, 2.5];
pub const CHI2_SAMPLES: usize = 100_000;
pub const CHI2_TOLERANCE: f64 = 0.01;
const CHI2_SIGMA_L: f64 = 1.5;
const CHI2_SIGMA_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Cell {
    pub d: usize,
    pub zeta: f64,
    pub empirical: f64,
    pub cdf: f64,
    /// Three binomial standard deviations at this probability.
    pub three_sigma: f64,
}

impl Chi2Cell {
    pub fn abs_diff(&self) -> f64 {
        (self.empirical - self.cdf).abs()
    }

    pub fn passes(&self) -> bool {
        self.abs_diff() <= CHI2_TOLERANCE
    }
}

/// Fraction of `samples` noise draws `u = v + w` with
/// `‖u‖² ≤ ζ (σ_L² + σ_S²)`, against the chi-square CDF.
pub fn chi2_cells(samples: usize, seed: u64) -> Result<Vec<Chi2Cell>> {
    if samples == 0 {
        return Err(Error::Argument("sample count must be at least 1".into()));
    }
    let s2 = CHI2_SIGMA_L * CHI2_SIGMA_L + CHI2_SIGMA_S * CHI2_SIGMA_S;
    let mut cells = Vec::new();
    for &d in &CHI2_DIMS {
        let mut noise = GaussianNoise::from_seed(derive_seed(seed, d as u64));
        let mut w = vec![0.0; d];
        let mut v = vec![0.0; d];
        let norms: Vec<f64> = (0..samples)
            .map(|_| {
                noise.fill_normal(&mut w, CHI2_SIGMA_L);
                noise.fill_normal(&mut v, CHI2_SIGMA_S);
                w.iter().zip(&v).map(|(a, b)| (a + b) * (a + b)).sum()
            })
            .collect();
        for &factor in &CHI2_ZETA_FACTORS {
            let zeta = factor * d as f64;
            let below = norms.iter().filter(|&&r| r <= zeta * s2).count();
            let cdf = chi_square_cdf(d, zeta)?;
            cells.push(Chi2Cell {
                d,
                zeta,
                empirical: below as f64 / samples as f64,
                cdf,
                three_sigma: 3.0 * (cdf * (1.0 - cdf) / samples as f64).sqrt(),
            });
        }
    }
    Ok(cells)
}

// --------------------------------------------------------------- scaling

pub const SCALING_POINTS: usize = 10;
pub const SCALING_LEVEL_STEP: f64 = 0.2;
pub const SCALING_MIN_SPEARMAN: f64 = 0.9;
pub const SCALING_POPULATION_SAMPLES: usize = 100_000;
pub const SCALING_GAP_SAMPLES: usize = 20_000;
/// ζ used for the explicit term in the per-trial reports (χ²₅ 95th percentile).
pub const SCALING_ZETA: f64 = 11.0705;
pub const SCALING_DELTA: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub seed: u64,
    pub level: usize,
    pub sigma_l: f64,
    /// `σ_L² + (1/n) Σ (σ_S^i)²`
    pub noise_scale: f64,
    pub gap: f64,
    pub gap_std_error: f64,
    pub explicit_term: f64,
    pub o_term_magnitude: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingSweep {
    pub rows: Vec<ScalingRow>,
    /// Per level: mean noise scale and mean gap over trials.
    pub mean_noise_scale: Vec<f64>,
    pub mean_gap: Vec<f64>,
    pub spearman: f64,
}

/// Sweeps a common noise multiplier `a`: `σ_L = a` and `σ_S^i = a r_i`
/// with `r_i ~ U(0, 1.5)` fixed per trial. Each trial reuses its dataset,
/// raw noise draws and evaluation sample at every level, so the levels
/// differ only in the noise magnitude.
pub fn scaling_sweep(points: usize, trials: usize, seed: u64) -> Result<ScalingSweep> {
    if points < 2 || trials == 0 {
        return Err(Error::Argument("scaling needs at least 2 points and 1 trial".into()));
    }
    let spec = SyntheticSpec::new(LEMMA_D, LEMMA_SEPARATION);
    let loss = LossSpec::logistic();
    let big = spec.sample(SCALING_POPULATION_SAMPLES, derive_seed(seed, 0))?;
    let f_star = train_erm(&big, LEMMA_LAMBDA, &loss, DEFAULT_TOL)?;

    let per_trial: Vec<Vec<ScalingRow>> = (0..trials as u64)
        .into_par_iter()
        .map(|k| scaling_trial(seed.wrapping_add(k), points, &spec, &loss, &f_star))
        .collect::<Result<_>>()?;

    let mut mean_noise_scale = Vec::with_capacity(points);
    let mut mean_gap = Vec::with_capacity(points);
    for level in 0..points {
        let xs: RunningStats = per_trial.iter().map(|r| r[level].noise_scale).collect();
        let gs: RunningStats = per_trial.iter().map(|r| r[level].gap).collect();
        mean_noise_scale.push(xs.mean());
        mean_gap.push(gs.mean());
    }
    let rho = spearman(&mean_noise_scale, &mean_gap).unwrap_or(f64::NAN);
    Ok(ScalingSweep {
        rows: per_trial.into_iter().flatten().collect(),
        mean_noise_scale,
        mean_gap,
        spearman: rho,
    })
}

fn scaling_trial(
    seed: u64,
    points: usize,
    spec: &SyntheticSpec,
    loss: &LossSpec,
    f_star: &Classifier,
) -> Result<Vec<ScalingRow>> {
    let data = spec.sample(LEMMA_N, derive_seed(seed, 1))?;
    let mut r = GaussianNoise::from_seed(derive_seed(seed, 2));
    let ratios: Vec<f64> = (0..LEMMA_N).map(|_| 1.5 * r.uniform()).collect();
    let mut rows = Vec::with_capacity(points);
    for level in 0..points {
        let a = SCALING_LEVEL_STEP * level as f64;
        let sigma_s: Vec<f64> = ratios.iter().map(|q| a * q).collect();
        let (pert, _) = perturb_inputs(&data, a, &sigma_s, derive_seed(seed, 3))?;
        let f_d = train_erm(&pert, LEMMA_LAMBDA, loss, DEFAULT_TOL)?;
        let gap = expected_gap_estimate(&f_d, f_star, spec, LEMMA_LAMBDA, loss, SCALING_GAP_SAMPLES, derive_seed(seed, 4))?;
        let trial = AccuracyTrial {
            f_d,
            sigma_l: a,
            sigma_s,
            gap,
        };
        let report = accuracy_bound_report(&trial, SCALING_ZETA, SCALING_DELTA, LEMMA_D, LEMMA_LAMBDA, loss.curvature_bound)?;
        rows.push(ScalingRow {
            seed,
            level,
            sigma_l: a,
            noise_scale: report.noise_scale,
            gap: gap.mean,
            gap_std_error: gap.std_error,
            explicit_term: report.bound.rhs,
            o_term_magnitude: report.o_term_magnitude,
            probability: report.probability,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------- oracle

pub const ORACLE_FINE_STEP: f64 = 1e-3;
pub const ORACLE_ZOOM_LEVELS: usize = 6;
pub const ORACLE_UTILITY_TOLERANCE: f64 = 1e-6;
const ORACLE_SIGMA_MAX: f64 = 3.0;

/// A 1 to `max_users` user game whose users want effective noise between
/// 0.5 and 2.5, so thresholds and interior responses fall inside a
/// `sigma_max = 3` search range.
pub fn random_small_config(seed: u64, max_users: usize) -> GameConfig {
    let mut g = GaussianNoise::from_seed(seed);
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * g.uniform();
    let n = 1 + (u(0.0, max_users.max(1) as f64) as usize).min(max_users.max(1) - 1);
    let lambda = u(0.5, 2.0);
    let nn = n as f64;
    let mut users = Vec::with_capacity(n);
    for _ in 0..n {
        let rho = u(0.2, 2.0);
        let gamma = u(0.5, 5.0);
        let s = u(0.5, 2.5);
        let p_bar = 2.0 * gamma * s * (1.0 + rho * s).powi(2) / (rho * nn * nn * lambda * lambda);
        let gain_at_zero = p_bar - p_bar / (1.0 + rho * s) - gamma * s * s / (nn * nn * lambda * lambda);
        users.push(UserParams {
            baseline_gain: u(0.0, 10.0),
            accuracy_weight: gamma,
            max_privacy_loss: p_bar,
            privacy_rate: rho,
            perturbation_cost: u(0.0, 1.2) * gain_at_zero.max(0.0),
        });
    }
    let mean_p = users.iter().map(|x| x.max_privacy_loss).sum::<f64>() / nn;
    GameConfig {
        learner: LearnerParams {
            baseline_gain: u(0.0, 10.0),
            accuracy_weight: u(0.5, 5.0),
            perturbation_cost: u(0.0, 0.2) * mean_p,
            regularizer: lambda,
            population_size: n,
        },
        users,
        dp_delta: 1e-5,
        data_dim: 5,
        solver: SolverSettings {
            sigma_max: ORACLE_SIGMA_MAX,
            ..SolverSettings::default()
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRow {
    pub seed: u64,
    pub users: usize,
    pub solver_sigma_l: f64,
    pub oracle_sigma_l: f64,
    pub solver_utility: f64,
    pub oracle_utility: f64,
    pub grid_step: f64,
}

impl OracleRow {
    pub fn sigma_diff(&self) -> f64 {
        (self.solver_sigma_l - self.oracle_sigma_l).abs()
    }

    pub fn utility_diff(&self) -> f64 {
        (self.solver_utility - self.oracle_utility).abs()
    }

    pub fn passes(&self) -> bool {
        self.sigma_diff() <= self.grid_step && self.utility_diff() <= ORACLE_UTILITY_TOLERANCE
    }
}

pub fn oracle_trial_at(seed: u64) -> Result<OracleRow> {
    let config = random_small_config(seed, 3);
    let solved = stackelberg_solve(&config)?;
    let brute = brute_force_equilibrium_refined(&config, ORACLE_FINE_STEP, ORACLE_ZOOM_LEVELS)?;
    Ok(OracleRow {
        seed,
        users: config.n_users(),
        solver_sigma_l: solved.sigma_l_star,
        oracle_sigma_l: brute.sigma_l_star,
        solver_utility: solved.learner_utility,
        oracle_utility: brute.learner_utility,
        grid_step: config.solver.grid_step,
    })
}

pub fn oracle_trials(trials: usize, seed: u64) -> Result<Vec<OracleRow>> {
    (0..trials as u64).map(|k| oracle_trial_at(seed.wrapping_add(k))).collect()
}

// ---------------------------------------------------------------- report

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Flag(bool),
}

/// Tabular outcome of a suite plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub passed: usize,
    pub total: usize,
    /// Smallest margin to the pass criterion; negative means a failure.
    pub worst_slack: f64,
    /// Seeds of failing trials, for replay.
    pub failing_seeds: Vec<u64>,
    /// Extra summary values.
    pub notes: Vec<(&'static str, f64)>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

fn lemma_report(suite: Suite, rows: &[LemmaRow]) -> SuiteReport {
    let mut passed = 0;
    let mut worst = f64::INFINITY;
    let mut failing = Vec::new();
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let check = if suite == Suite::Lemma1 { &r.classifier_gap } else { &r.empirical_gap };
        let ok = check.holds && check.slack >= LEMMA_SLACK_FLOOR;
        if ok {
            passed += 1;
        } else {
            failing.push(r.seed);
        }
        worst = worst.min(check.slack);
        let sigma_s: RunningStats = r.sigma_s.iter().copied().collect();
        out.push(vec![
            Cell::Int(r.seed),
            Cell::Int(LEMMA_N as u64),
            Cell::Int(LEMMA_D as u64),
            Cell::Num(r.sigma_l),
            Cell::Num(sigma_s.mean()),
            Cell::Num(r.classifier_gap.lhs),
            Cell::Num(r.classifier_gap.rhs),
            Cell::Flag(r.classifier_gap.holds),
            Cell::Num(r.empirical_gap.lhs),
            Cell::Num(r.empirical_gap.rhs),
            Cell::Flag(r.empirical_gap.holds),
        ]);
    }
    SuiteReport {
        suite,
        header: vec![
            "seed",
            "n",
            "d",
            "sigma_L",
            "sigma_S_mean",
            "classifier_gap_lhs",
            "classifier_gap_rhs",
            "classifier_gap_holds",
            "empirical_gap_lhs",
            "empirical_gap_rhs",
            "empirical_gap_holds",
        ],
        rows: out,
        passed,
        total: rows.len(),
        worst_slack: worst,
        failing_seeds: failing,
        notes: Vec::new(),
    }
}

fn chi2_report(cells: &[Chi2Cell], seed: u64) -> SuiteReport {
    let passed = cells.iter().filter(|c| c.passes()).count();
    let worst = cells.iter().map(|c| CHI2_TOLERANCE - c.abs_diff()).fold(f64::INFINITY, f64::min);
    SuiteReport {
        suite: Suite::Chi2,
        header: vec!["seed", "d", "zeta", "empirical", "chi_square_cdf", "abs_diff", "binomial_3sigma", "pass"],
        rows: cells
            .iter()
            .map(|c| {
                vec![
                    Cell::Int(seed),
                    Cell::Int(c.d as u64),
                    Cell::Num(c.zeta),
                    Cell::Num(c.empirical),
                    Cell::Num(c.cdf),
                    Cell::Num(c.abs_diff()),
                    Cell::Num(c.three_sigma),
                    Cell::Flag(c.passes()),
                ]
            })
            .collect(),
        passed,
        total: cells.len(),
        worst_slack: worst,
        failing_seeds: if passed == cells.len() { Vec::new() } else { vec![seed] },
        notes: vec![("samples", CHI2_SAMPLES as f64)],
    }
}

fn scaling_report(sweep: &ScalingSweep, seed: u64) -> SuiteReport {
    let ok = sweep.spearman >= SCALING_MIN_SPEARMAN;
    let mut notes = vec![("spearman", sweep.spearman)];
    for (x, g) in sweep.mean_noise_scale.iter().zip(&sweep.mean_gap) {
        notes.push(("mean_noise_scale", *x));
        notes.push(("mean_gap", *g));
    }
    SuiteReport {
        suite: Suite::Scaling,
        header: vec![
            "seed",
            "level",
            "sigma_L",
            "noise_scale",
            "gap",
            "gap_std_error",
            "explicit_term",
            "o_term_magnitude",
            "probability",
        ],
        rows: sweep
            .rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.seed),
                    Cell::Int(r.level as u64),
                    Cell::Num(r.sigma_l),
                    Cell::Num(r.noise_scale),
                    Cell::Num(r.gap),
                    Cell::Num(r.gap_std_error),
                    Cell::Num(r.explicit_term),
                    Cell::Num(r.o_term_magnitude),
                    Cell::Num(r.probability),
                ]
            })
            .collect(),
        passed: usize::from(ok),
        total: 1,
        worst_slack: sweep.spearman - SCALING_MIN_SPEARMAN,
        failing_seeds: if ok { Vec::new() } else { vec![seed] },
        notes,
    }
}

fn oracle_report(rows: &[OracleRow]) -> SuiteReport {
    let passed = rows.iter().filter(|r| r.passes()).count();
    let worst = rows
        .iter()
        .map(|r| (ORACLE_UTILITY_TOLERANCE - r.utility_diff()).min(r.grid_step - r.sigma_diff()))
        .fold(f64::INFINITY, f64::min);
    SuiteReport {
        suite: Suite::Oracle,
        header: vec![
            "seed",
            "users",
            "solver_sigma_L",
            "oracle_sigma_L",
            "solver_U_L",
            "oracle_U_L",
            "sigma_L_diff",
            "U_L_diff",
            "pass",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    Cell::Int(r.seed),
                    Cell::Int(r.users as u64),
                    Cell::Num(r.solver_sigma_l),
                    Cell::Num(r.oracle_sigma_l),
                    Cell::Num(r.solver_utility),
                    Cell::Num(r.oracle_utility),
                    Cell::Num(r.sigma_diff()),
                    Cell::Num(r.utility_diff()),
                    Cell::Flag(r.passes()),
                ]
            })
            .collect(),
        passed,
        total: rows.len(),
        worst_slack: worst,
        failing_seeds: rows.iter().filter(|r| !r.passes()).map(|r| r.seed).collect(),
        notes: vec![("fine_step", ORACLE_FINE_STEP)],
    }
}

/// Runs `suite` with `trials` trials (suite default when `None`).
pub fn run_suite(suite: Suite, trials: Option<usize>, seed: u64) -> Result<SuiteReport> {
    let trials = trials.unwrap_or(suite.default_trials());
    if trials == 0 {
        return Err(Error::Argument("trial count must be at least 1".into()));
    }
    Ok(match suite {
        Suite::Lemma1 | Suite::Lemma2 => lemma_report(suite, &lemma_trials(trials, seed)?),
        Suite::Chi2 => chi2_report(&chi2_cells(trials, seed)?, seed),
        Suite::Scaling => scaling_report(&scaling_sweep(SCALING_POINTS, trials, seed)?, seed),
        Suite::Oracle => oracle_report(&oracle_trials(trials, seed)?),
    })
}
