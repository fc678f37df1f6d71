//! Parameter search behind `configs/*.toml`.
//!
//! Three identical users with perturbation cost N̄_S ∈ {10, 20, 30}. For
//! each candidate (ρ, P̄, γ_S, γ_L), with N = 3 and Λ = 1, compute the
//! learner's best gain over σ_L = 0 when perturbing is free. A candidate
//! qualifies when that gain increases with N̄_S, all three dissuasion
//! thresholds lie in (1, 25), and the mixed 10/20/30 game jumps upward at
//! every threshold. N̄_L is then set between the gains for N̄_S = 10 and
//! N̄_S = 20, so perturbing pays only in the 20 and 30 cases. Candidates are
//! ranked by the distance from N̄_L to the nearer of those two gains.
//!
//! Run with `cargo run --release --example search_default_config`.

use obfuscation_game::response_solver::{leader_objective, GameSolver};
use obfuscation_game::{GameConfig, LearnerParams, SolverSettings, Threshold, UserParams};

const COSTS: [f64; 3] = [10.0, 20.0, 30.0];

fn game(rho: f64, p_bar: f64, gamma: f64, gamma_l: f64, learner_cost: f64, costs: [f64; 3]) -> GameConfig {
    GameConfig {
        learner: LearnerParams {
            baseline_gain: 1000.0,
            accuracy_weight: gamma_l,
            perturbation_cost: learner_cost,
            regularizer: 1.0,
            population_size: 3,
        },
        users: costs
            .iter()
            .map(|&c| UserParams {
                baseline_gain: 1000.0,
                accuracy_weight: gamma,
                max_privacy_loss: p_bar,
                privacy_rate: rho,
                perturbation_cost: c,
            })
            .collect(),
        dp_delta: 1e-5,
        data_dim: 5,
        solver: SolverSettings::default(),
    }
}

struct Candidate {
    margin: f64,
    rho: f64,
    p_bar: f64,
    gamma: f64,
    gamma_l: f64,
    learner_cost: f64,
    thresholds: Vec<f64>,
    gains: Vec<f64>,
    jumps: Vec<f64>,
}

fn evaluate(rho: f64, p_bar: f64, gamma: f64, gamma_l: f64) -> Option<Candidate> {
    let mut thresholds = Vec::new();
    let mut gains = Vec::new();
    for c in COSTS {
        let config = game(rho, p_bar, gamma, gamma_l, 0.0, [c; 3]);
        let solver = GameSolver::new(&config).ok()?;
        match solver.thresholds()[0] {
            Threshold::At(t) if t > 1.0 && t < 25.0 => thresholds.push(t),
            _ => return None,
        }
        let best = solver.solve().ok()?.learner_utility;
        gains.push(best - solver.leader_objective(0.0).ok()?);
    }
    if !(gains[0] < gains[1] && gains[1] < gains[2]) {
        return None;
    }
    let learner_cost = ((gains[0] + gains[1]) / 2.0).round();
    if !(0.0..=40.0).contains(&learner_cost) {
        return None;
    }
    let mixed = game(rho, p_bar, gamma, gamma_l, learner_cost, COSTS);
    let solver = GameSolver::new(&mixed).ok()?;
    let mut jumps = Vec::new();
    for t in solver.thresholds() {
        let t = t.sigma()?;
        let eps = 1e-6;
        jumps.push(leader_objective(t + eps, &mixed).ok()? - leader_objective(t - eps, &mixed).ok()?);
    }
    if jumps.iter().any(|&j| j <= 0.0) {
        return None;
    }
    Some(Candidate {
        margin: (learner_cost - gains[0]).min(gains[1] - learner_cost),
        rho,
        p_bar,
        gamma,
        gamma_l,
        learner_cost,
        thresholds,
        gains,
        jumps,
    })
}

fn main() {
    let mut found = Vec::new();
    for rho in [0.1, 0.2, 0.25, 0.5, 1.0] {
        for p_bar in [100.0, 200.0, 300.0, 500.0, 1000.0] {
            for gamma in [0.5, 1.0, 2.0, 3.0, 5.0, 10.0] {
                for gamma_l in [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 15.0, 20.0] {
                    found.extend(evaluate(rho, p_bar, gamma, gamma_l));
                }
            }
        }
    }
    found.sort_by(|a, b| b.margin.total_cmp(&a.margin));
    println!("margin,rho,P_bar,gamma_S,gamma_L,N_bar_L,thresholds,gains,jumps");
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(" ");
    for c in found.iter().take(15) {
        println!(
            "{:.3},{},{},{},{},{},{},{},{}",
            c.margin,
            c.rho,
            c.p_bar,
            c.gamma,
            c.gamma_l,
            c.learner_cost,
            fmt(&c.thresholds),
            fmt(&c.gains),
            fmt(&c.jumps)
        );
    }
}
