//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line; the process exits with
//! status 1 if any criterion fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use obfuscation_game::config::load_config;
use obfuscation_game::dp_mechanism::{chi_square_cdf, epsilon_from_sigma, sigma_from_epsilon, GaussianNoise};
use obfuscation_game::game_model::{user_utility, GameConfig, StrategyProfile};
use obfuscation_game::response_solver::{dissuasion_threshold, leader_objective, stackelberg_solve, user_best_response};
use obfuscation_game::validation::{
    chi2_cells, lemma_trials, oracle_trials, random_small_config, scaling_sweep, LEMMA_SLACK_FLOOR, SCALING_MIN_SPEARMAN,
    SCALING_POINTS,
};
use obfuscation_game::Threshold;

type Outcome = Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn shipped(name: &str) -> GameConfig {
    load_config(&config_path(name)).expect("shipped config loads")
}

fn threshold_of(config: &GameConfig, i: usize) -> Result<f64, String> {
    match dissuasion_threshold(i, config).map_err(|e| e.to_string())? {
        Threshold::At(t) => Ok(t),
        other => Err(format!("user {i}: threshold {other:?} is not inside the search range")),
    }
}

fn bang_bang() -> Outcome {
    let config = shipped("default.toml");
    let step = config.solver.grid_step;
    let points = (config.solver.sigma_max / step).round() as usize;
    for i in 0..config.n_users() {
        let t = threshold_of(&config, i)?;
        let mut previous = f64::INFINITY;
        for k in 0..=points {
            let x = k as f64 * step;
            let br = user_best_response(x, i, &config).map_err(|e| e.to_string())?;
            if x < t {
                if !(br > 0.0 && br < previous) {
                    return Err(format!("user {i}: BR({x}) = {br} after {previous} below threshold {t}"));
                }
                previous = br;
            } else if br != 0.0 {
                return Err(format!("user {i}: BR({x}) = {br} at or beyond threshold {t}"));
            }
        }
    }
    Ok(format!("{} users, {} grid points each", config.n_users(), points + 1))
}

fn threshold_monotonicity() -> Outcome {
    let mut thresholds = Vec::new();
    for name in ["nbar10.toml", "nbar20.toml", "nbar30.toml"] {
        let config = shipped(name);
        let tol = config.solver.root_tol;
        let t = threshold_of(&config, 0)?;
        let below = user_best_response(t - 10.0 * tol, 0, &config).map_err(|e| e.to_string())?;
        let above = user_best_response(t + 10.0 * tol, 0, &config).map_err(|e| e.to_string())?;
        if !(below > 0.0 && above == 0.0) {
            return Err(format!("{name}: BR(t - 10 tol) = {below}, BR(t + 10 tol) = {above}"));
        }
        thresholds.push(t);
    }
    let default = shipped("default.toml");
    let mixed = (0..3).map(|i| threshold_of(&default, i)).collect::<Result<Vec<_>, _>>()?;
    for w in [&thresholds, &mixed] {
        if !(w[0] > w[1] && w[1] > w[2]) {
            return Err(format!("thresholds not strictly decreasing: {w:?}"));
        }
    }
    Ok(format!("thresholds for N_bar 10/20/30: {:.9} > {:.9} > {:.9}", thresholds[0], thresholds[1], thresholds[2]))
}

fn proactive_perturbation() -> Outcome {
    let mut parts = Vec::new();
    for (name, expect_positive) in [("nbar10.toml", false), ("nbar20.toml", true), ("nbar30.toml", true)] {
        let config = shipped(name);
        let eq = stackelberg_solve(&config).map_err(|e| e.to_string())?;
        let at_zero = leader_objective(0.0, &config).map_err(|e| e.to_string())?;
        if expect_positive {
            if !(eq.sigma_l_star > 0.0 && eq.learner_utility > at_zero) {
                return Err(format!("{name}: sigma_L* = {}, U_L* = {} vs U_L(0) = {at_zero}", eq.sigma_l_star, eq.learner_utility));
            }
            if eq.sigma_s_star.iter().any(|&s| s != 0.0) {
                return Err(format!("{name}: users still perturb at equilibrium: {:?}", eq.sigma_s_star));
            }
        } else if eq.sigma_l_star != 0.0 {
            return Err(format!("{name}: expected sigma_L* = 0, got {}", eq.sigma_l_star));
        }
        parts.push(format!("{name}: sigma_L* = {:.6}", eq.sigma_l_star));
    }
    Ok(parts.join(", "))
}

/// Maximizer of user `i`'s utility over its own noise with the rest of
/// `profile` held fixed, found from the sign of a central difference of
/// the utility itself, then compared against not perturbing.
fn numeric_argmax(config: &GameConfig, i: usize, profile: &StrategyProfile) -> f64 {
    let h = 1e-3;
    let mut p = profile.clone();
    let mut u = |x: f64| {
        p.sigma_s[i] = x;
        user_utility(config, i, &p).unwrap()
    };
    let slope = |u: &mut dyn FnMut(f64) -> f64, x: f64| u(x + h) - u(x - h);
    let upper = config.solver.sigma_max;
    let mut best = 0.0;
    // u(0) carries no perturbation cost, so differences start at 2h
    if slope(&mut u, 2.0 * h) > 0.0 {
        let (mut lo, mut hi) = (2.0 * h, upper);
        if slope(&mut u, hi) > 0.0 {
            lo = hi;
        }
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if slope(&mut u, mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = 0.5 * (lo + hi);
        if u(x) - u(0.0) > config.solver.tie_epsilon {
            best = x;
        }
    }
    best
}

fn independence() -> Outcome {
    let mut worst = 0.0f64;
    let mut perturbing = 0;
    for seed in 0..50u64 {
        let config = random_small_config(1000 + seed, 3);
        let mut g = GaussianNoise::from_seed(seed);
        let n = config.n_users();
        let i = (g.uniform() * n as f64) as usize % n;
        let sigma_l = g.uniform() * 2.5;
        let mut reference = None;
        for _ in 0..10 {
            let sigma_s = (0..n).map(|_| 3.0 * g.uniform()).collect();
            let x = numeric_argmax(&config, i, &StrategyProfile::new(sigma_l, sigma_s));
            match reference {
                None => reference = Some(x),
                Some(r) => worst = worst.max((x - r).abs()),
            }
        }
        let r = reference.unwrap();
        if r > 0.0 {
            perturbing += 1;
        }
        let br = user_best_response(sigma_l, i, &config).map_err(|e| e.to_string())?;
        if (br - r).abs() > 1e-5 {
            return Err(format!("config {seed}: numeric argmax {r} but best response {br}"));
        }
    }
    if worst > 1e-9 {
        return Err(format!("argmax moved by {worst:e} when other users' noise changed"));
    }
    Ok(format!("max argmax spread {worst:.1e} over 50 x 10 profiles ({perturbing} configs with interior optimum)"))
}

fn effective_noise_clamp() -> Outcome {
    let config = shipped("default.toml");
    let mut branch_points = 0;
    for i in 0..config.n_users() {
        let t = threshold_of(&config, i)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut x = 0.0;
        while x < t {
            let br = user_best_response(x, i, &config).map_err(|e| e.to_string())?;
            let s = x.hypot(br);
            lo = lo.min(s);
            hi = hi.max(s);
            branch_points += 1;
            x += 0.01;
        }
        if hi - lo > 1e-7 {
            return Err(format!("user {i}: effective noise varies by {:e}", hi - lo));
        }
    }
    Ok(format!("constant within 1e-7 on {branch_points} branch points"))
}

fn oracle_equivalence() -> Outcome {
    let rows = oracle_trials(20, 500).map_err(|e| e.to_string())?;
    let worst_sigma = rows.iter().map(|r| r.sigma_diff()).fold(0.0, f64::max);
    let worst_u = rows.iter().map(|r| r.utility_diff()).fold(0.0, f64::max);
    let failing: Vec<u64> = rows.iter().filter(|r| !r.passes()).map(|r| r.seed).collect();
    let positive = rows.iter().filter(|r| r.solver_sigma_l > 0.0).count();
    let summary = format!("max |d sigma_L| = {worst_sigma:.2e}, max |d U_L| = {worst_u:.2e}, {positive}/20 with sigma_L* > 0");
    if failing.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; failing seeds {failing:?}"))
    }
}

fn gaussian_mechanism() -> Outcome {
    let mut g = GaussianNoise::from_seed(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let eps = 10f64.powf(-3.0 + 4.0 * g.uniform());
        let delta = 10f64.powf(-12.0 + 12.0 * g.uniform()).min(1.2);
        let s = sigma_from_epsilon(eps, delta).map_err(|e| e.to_string())?;
        let back = epsilon_from_sigma(s, delta).map_err(|e| e.to_string())?.epsilon;
        worst = worst.max(((back - eps) / eps).abs());
    }
    let anchor = epsilon_from_sigma(2.0 * 2f64.sqrt(), 1.25 * (-1f64).exp())
        .map_err(|e| e.to_string())?
        .epsilon;
    if worst > 1e-9 || (anchor - 1.0).abs() > 1e-12 {
        return Err(format!("round-trip error {worst:e}, anchor epsilon {anchor}"));
    }
    Ok(format!("round-trip error {worst:.1e}, anchor |eps - 1| = {:.1e}", (anchor - 1.0).abs()))
}

fn chi_square_identity() -> Outcome {
    let cells = chi2_cells(100_000, 2024).map_err(|e| e.to_string())?;
    let worst = cells.iter().map(|c| c.abs_diff()).fold(0.0, f64::max);
    let mut closed = 0.0f64;
    for k in 1..=200 {
        let z = 0.1 * k as f64;
        closed = closed.max((chi_square_cdf(2, z).unwrap() - (1.0 - (-z / 2.0).exp())).abs());
    }
    if cells.iter().any(|c| !c.passes()) || closed > 1e-12 {
        return Err(format!("worst empirical deviation {worst}, d = 2 closed-form error {closed:e}"));
    }
    Ok(format!("{} cells, worst deviation {worst:.4}, d = 2 closed-form error {closed:.1e}", cells.len()))
}

fn lemma_inequalities() -> Outcome {
    let rows = lemma_trials(100, 0).map_err(|e| e.to_string())?;
    let ok = |r: &obfuscation_game::erm_lab::BoundReport| r.holds && r.slack >= LEMMA_SLACK_FLOOR;
    let l1 = rows.iter().filter(|r| ok(&r.classifier_gap)).count();
    let l2 = rows.iter().filter(|r| ok(&r.empirical_gap)).count();
    let s1 = rows.iter().map(|r| r.classifier_gap.slack).fold(f64::INFINITY, f64::min);
    let s2 = rows.iter().map(|r| r.empirical_gap.slack).fold(f64::INFINITY, f64::min);
    let summary = format!("classifier gap {l1}/100 (min slack {s1:.3e}), empirical gap {l2}/100 (min slack {s2:.3e})");
    if l1 == 100 && l2 == 100 {
        Ok(summary)
    } else {
        Err(summary)
    }
}

fn accuracy_scaling() -> Outcome {
    let sweep = scaling_sweep(SCALING_POINTS, 50, 0).map_err(|e| e.to_string())?;
    let gaps: Vec<String> = sweep.mean_gap.iter().map(|g| format!("{g:.4}")).collect();
    let summary = format!("Spearman {:.3}; mean gaps [{}]", sweep.spearman, gaps.join(", "));
    if sweep.spearman >= SCALING_MIN_SPEARMAN {
        Ok(summary)
    } else {
        Err(summary)
    }
}

type Criterion = (&'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("bang-bang best response", Duration::from_secs(5), bang_bang),
        ("threshold monotonicity", Duration::from_secs(5), threshold_monotonicity),
        ("proactive learner perturbation", Duration::from_secs(30), proactive_perturbation),
        ("user independence", Duration::from_secs(10), independence),
        ("effective-noise clamp", Duration::from_secs(5), effective_noise_clamp),
        ("oracle equivalence", Duration::from_secs(120), oracle_equivalence),
        ("gaussian mechanism", Duration::from_secs(1), gaussian_mechanism),
        ("chi-square identity", Duration::from_secs(30), chi_square_identity),
        ("classifier and empirical gap bounds", Duration::from_secs(120), lemma_inequalities),
        ("expected-loss scaling", Duration::from_secs(600), accuracy_scaling),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, budget, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > budget => Err(format!("{msg}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("PASS  {name} ({elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name} ({elapsed:.2?}): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
