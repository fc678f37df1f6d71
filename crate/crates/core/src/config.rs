//! TOML game configuration.
//!
//! ```toml
//! [learner]
//! G_bar = 1000.0
//! gamma = 4.0
//! N_bar = 38.0
//! Lambda = 1.0
//! N = 1
//!
//! [[users]]
//! G_bar = 1000.0
//! gamma = 5.0
//! P_bar = 1000.0
//! rho = 0.25
//! N_bar = 10.0
//!
//! [dp]          # optional
//! delta = 1e-5
//! d = 5
//!
//! [solver]      # optional, every key defaults
//! sigma_max = 50.0
//! grid_step = 0.05
//! tol = 1e-9
//! tie_epsilon = 1e-9
//! ```
//!
//! Unknown keys are rejected. Every error names the offending line.

use std::ops::Range;
use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::game_model::{GameConfig, LearnerParams, UserParams};
use crate::response_solver::SolverSettings;

pub const DEFAULT_CONFIG_TOML: &str = include_str!("../../../configs/default.toml");
pub const DEFAULT_DP_DELTA: f64 = 1e-5;
pub const DEFAULT_DATA_DIM: usize = 5;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    learner: Spanned<RawLearner>,
    users: Vec<Spanned<RawUser>>,
    dp: Option<RawDp>,
    solver: Option<RawSolver>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawLearner {
    G_bar: Spanned<f64>,
    gamma: Spanned<f64>,
    N_bar: Spanned<f64>,
    Lambda: Spanned<f64>,
    N: Spanned<i64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
#[allow(non_snake_case)]
struct RawUser {
    G_bar: Spanned<f64>,
    gamma: Spanned<f64>,
    P_bar: Spanned<f64>,
    rho: Spanned<f64>,
    N_bar: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDp {
    delta: Option<Spanned<f64>>,
    d: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    sigma_max: Option<Spanned<f64>>,
    grid_step: Option<Spanned<f64>>,
    tol: Option<Spanned<f64>>,
    tie_epsilon: Option<Spanned<f64>>,
}

/// 1-based line and column of a byte offset.
fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

struct Anchors<'t> {
    origin: &'t str,
    text: &'t str,
    keys: Vec<(String, Range<usize>)>,
}

impl<'t> Anchors<'t> {
    fn error_at(&self, span: Option<Range<usize>>, msg: &str) -> Error {
        match span {
            Some(r) => {
                let (line, col) = line_col(self.text, r.start);
                Error::Config(format!("{}:{line}:{col}: {msg}", self.origin))
            }
            None => Error::Config(format!("{}: {msg}", self.origin)),
        }
    }

    fn record<T>(&mut self, key: String, value: &Spanned<T>) {
        self.keys.push((key, value.span()));
    }

    /// Anchors a validation message at the longest recorded key it names.
    fn locate(&self, err: Error) -> Error {
        let msg = err.to_string();
        let span = self
            .keys
            .iter()
            .filter(|(k, _)| msg.contains(k.as_str()))
            .max_by_key(|(k, _)| k.len())
            .map(|(_, r)| r.clone());
        let detail = match err {
            Error::Config(m) | Error::Domain(m) | Error::Argument(m) => m,
            other => other.to_string(),
        };
        self.error_at(span, &detail)
    }

    fn count(&mut self, key: &str, value: &Spanned<i64>, min: i64) -> Result<usize> {
        self.record(key.to_string(), value);
        let v = *value.get_ref();
        if v < min {
            return Err(self.error_at(Some(value.span()), &format!("{key} must be at least {min}, got {v}")));
        }
        Ok(v as usize)
    }
}

/// Parses configuration text; `origin` names the source in error messages.
pub fn parse_config(text: &str, origin: &str) -> Result<GameConfig> {
    let mut anchors = Anchors {
        origin,
        text,
        keys: Vec::new(),
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| anchors.error_at(e.span(), e.message().trim()))?;

    let l = raw.learner.get_ref();
    for (k, v) in [("G_bar", &l.G_bar), ("gamma", &l.gamma), ("N_bar", &l.N_bar), ("Lambda", &l.Lambda)] {
        anchors.record(format!("learner.{k}"), v);
    }
    let population_size = anchors.count("learner.N", &l.N, 1)?;
    let learner = LearnerParams {
        baseline_gain: *l.G_bar.get_ref(),
        accuracy_weight: *l.gamma.get_ref(),
        perturbation_cost: *l.N_bar.get_ref(),
        regularizer: *l.Lambda.get_ref(),
        population_size,
    };

    let mut users = Vec::with_capacity(raw.users.len());
    for (i, u) in raw.users.iter().enumerate() {
        let r = u.get_ref();
        for (k, v) in [("G_bar", &r.G_bar), ("gamma", &r.gamma), ("P_bar", &r.P_bar), ("rho", &r.rho), ("N_bar", &r.N_bar)] {
            anchors.record(format!("users[{i}].{k}"), v);
        }
        users.push(UserParams {
            baseline_gain: *r.G_bar.get_ref(),
            accuracy_weight: *r.gamma.get_ref(),
            max_privacy_loss: *r.P_bar.get_ref(),
            privacy_rate: *r.rho.get_ref(),
            perturbation_cost: *r.N_bar.get_ref(),
        });
    }
    if users.len() != population_size {
        return Err(anchors.error_at(
            Some(l.N.span()),
            &format!("learner.N = {population_size} but {} [[users]] tables are given", users.len()),
        ));
    }

    let mut dp_delta = DEFAULT_DP_DELTA;
    let mut data_dim = DEFAULT_DATA_DIM;
    if let Some(dp) = &raw.dp {
        if let Some(v) = &dp.delta {
            anchors.record("dp.delta".into(), v);
            dp_delta = *v.get_ref();
        }
        if let Some(v) = &dp.d {
            data_dim = anchors.count("dp.d", v, 1)?;
        }
    }

    let mut solver = SolverSettings::default();
    if let Some(s) = &raw.solver {
        for (key, field, target) in [
            ("solver.sigma_max", &s.sigma_max, &mut solver.sigma_max),
            ("solver.grid_step", &s.grid_step, &mut solver.grid_step),
            ("solver.tol", &s.tol, &mut solver.root_tol),
            ("solver.tie_epsilon", &s.tie_epsilon, &mut solver.tie_epsilon),
        ] {
            if let Some(v) = field {
                anchors.record(key.into(), v);
                *target = *v.get_ref();
            }
        }
    }

    let config = GameConfig {
        learner,
        users,
        dp_delta,
        data_dim,
        solver,
    };
    if let Err(e) = config.validate() {
        // solver settings report as one message; anchor at the section
        if let Error::Config(m) = &e {
            if m.starts_with("solver settings") {
                if let Some(k) = anchors.keys.iter().find(|(k, _)| k.starts_with("solver.")) {
                    return Err(anchors.error_at(Some(k.1.clone()), m));
                }
            }
        }
        return Err(anchors.locate(e));
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<GameConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: cannot read: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// The shipped three-user configuration.
pub fn default_config() -> GameConfig {
    parse_config(DEFAULT_CONFIG_TOML, "configs/default.toml").expect("shipped config is valid")
}
