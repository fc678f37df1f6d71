use super::dataset::Dataset;
use super::loss::LossSpec;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200_000;
const ARMIJO: f64 = 0.5;

/// Linear classifier `sign(fᵀx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub weights: Vec<f64>,
}

impl Classifier {
    pub fn new(weights: Vec<f64>) -> Self {
        Self { weights }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { weights: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn norm_sq(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    pub fn distance_sq(&self, other: &Classifier) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x)
    }

    pub fn accuracy(&self, data: &Dataset) -> f64 {
        let hits = data.rows().filter(|(x, y)| self.score(x) * y > 0.0).count();
        hits as f64 / data.len() as f64
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_dims(f: &[f64], data: &Dataset) -> Result<()> {
    if f.len() != data.dim() {
        return Err(Error::Argument(format!(
            "classifier has dimension {} but data has {}",
            f.len(),
            data.dim()
        )));
    }
    if data.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("Lambda must be positive, got {lambda}")));
    }
    Ok(())
}

fn objective(f: &[f64], data: &Dataset, lambda: f64, loss: &LossSpec) -> f64 {
    let mean_loss = data.rows().map(|(x, y)| loss.value(y * dot(f, x))).sum::<f64>() / data.len() as f64;
    0.5 * lambda * dot(f, f) + mean_loss
}

fn gradient(f: &[f64], data: &Dataset, lambda: f64, loss: &LossSpec, out: &mut [f64]) {
    out.fill(0.0);
    for (x, y) in data.rows() {
        let scale = loss.derivative(y * dot(f, x)) * y;
        for (g, xk) in out.iter_mut().zip(x) {
            *g += scale * xk;
        }
    }
    let n = data.len() as f64;
    for (g, fk) in out.iter_mut().zip(f) {
        *g = *g / n + lambda * fk;
    }
}

/// `J(f, D) = Λ ½‖f‖² + (1/n) Σ l(y_i fᵀx_i)`
pub fn empirical_risk(f: &Classifier, data: &Dataset, lambda: f64, loss: &LossSpec) -> Result<f64> {
    check_dims(&f.weights, data)?;
    check_lambda(lambda)?;
    Ok(objective(&f.weights, data, lambda, loss))
}

pub fn risk_gradient(f: &Classifier, data: &Dataset, lambda: f64, loss: &LossSpec) -> Result<Vec<f64>> {
    check_dims(&f.weights, data)?;
    check_lambda(lambda)?;
    let mut g = vec![0.0; f.dim()];
    gradient(&f.weights, data, lambda, loss, &mut g);
    Ok(g)
}

/// Minimizes `empirical_risk` by gradient descent with backtracking until
/// the gradient norm is at most `tol`.
///
/// Backtracking halves the step but never below `1/L`, where
/// `L = Λ + c · mean ‖x‖²` bounds the Hessian; that step always decreases
/// the objective, so rounding noise in the Armijo test near the optimum
/// cannot stall the iteration.
pub fn train_erm(data: &Dataset, lambda: f64, loss: &LossSpec, tol: f64) -> Result<Classifier> {
    check_lambda(lambda)?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Argument(format!("tol must be positive, got {tol}")));
    }
    let d = data.dim();
    let mut f = vec![0.0; d];
    check_dims(&f, data)?;

    let mean_sq = data.features().iter().map(|x| x * x).sum::<f64>() / data.len() as f64;
    let min_step = 1.0 / (lambda + loss.curvature_bound * mean_sq);

    let mut g = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut value = objective(&f, data, lambda, loss);
    let mut step = min_step;
    for _ in 0..MAX_ITERATIONS {
        gradient(&f, data, lambda, loss, &mut g);
        let g_sq = dot(&g, &g);
        if g_sq.sqrt() <= tol {
            return Ok(Classifier::new(f));
        }
        loop {
            for ((t, fk), gk) in trial.iter_mut().zip(&f).zip(&g) {
                *t = fk - step * gk;
            }
            let next = objective(&trial, data, lambda, loss);
            if next <= value - ARMIJO * step * g_sq || step <= min_step {
                value = next;
                break;
            }
            step = (step * 0.5).max(min_step);
        }
        std::mem::swap(&mut f, &mut trial);
        step *= 2.0;
    }
    gradient(&f, data, lambda, loss, &mut g);
    Err(Error::Convergence {
        iterations: MAX_ITERATIONS,
        grad_norm: dot(&g, &g).sqrt(),
    })
}
