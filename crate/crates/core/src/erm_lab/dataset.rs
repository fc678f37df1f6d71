use crate::dp_mechanism::GaussianNoise;
use crate::error::{ensure_noise, Error, Result};

/// Labeled feature vectors, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    features: Vec<f64>,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(dim: usize, features: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("feature dimension must be at least 1".into()));
        }
        if features.len() != dim * labels.len() {
            return Err(Error::Argument(format!(
                "{} feature values do not form {} rows of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("features must be finite".into()));
        }
        if labels.iter().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Domain("labels must be -1 or +1".into()));
        }
        Ok(Self { dim, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }
}

/// Two unit-variance Gaussian clusters centred at `±(separation/2) · e`,
/// with `e` the normalized all-ones direction and balanced random labels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub separation: f64,
}

impl SyntheticSpec {
    pub fn new(dim: usize, separation: f64) -> Self {
        Self { dim, separation }
    }

    /// Draws one `(x, y)` pair into `x`, returning the label.
    pub(crate) fn draw(&self, noise: &mut GaussianNoise, x: &mut [f64]) -> f64 {
        let y = if noise.next_u64() >> 63 == 1 { 1.0 } else { -1.0 };
        let shift = y * self.separation / 2.0 / (self.dim as f64).sqrt();
        for v in x.iter_mut() {
            *v = shift + noise.standard_normal();
        }
        y
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        generate_synthetic(n, self.dim, self.separation, seed)
    }
}

pub fn generate_synthetic(n: usize, d: usize, separation: f64, seed: u64) -> Result<Dataset> {
    if n < 2 || d == 0 {
        return Err(Error::Argument(format!("need n >= 2 and d >= 1, got n = {n}, d = {d}")));
    }
    if !separation.is_finite() {
        return Err(Error::Domain("separation must be finite".into()));
    }
    let spec = SyntheticSpec::new(d, separation);
    let mut noise = GaussianNoise::from_seed(seed);
    let mut features = vec![0.0; n * d];
    let labels = features
        .chunks_exact_mut(d)
        .map(|row| spec.draw(&mut noise, row))
        .collect();
    Dataset::new(d, features, labels)
}

/// Realized per-record noise `u_i = v_i + w_i`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRows {
    dim: usize,
    values: Vec<f64>,
}

impl NoiseRows {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self { dim, values: vec![0.0; n * dim] }
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_norms_sq(&self) -> Vec<f64> {
        self.values
            .chunks_exact(self.dim)
            .map(|r| r.iter().map(|x| x * x).sum())
            .collect()
    }

    pub fn total_norm_sq(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            values: self.values.iter().map(|x| x * factor).collect(),
        }
    }
}

/// Adds learner noise `w_i ~ N(0, σ_L² I)` and user noise
/// `v_i ~ N(0, σ_S^i² I)` to every row. For each row the learner's
/// components are drawn first, then the user's, from one stream.
pub fn perturb_inputs(data: &Dataset, sigma_l: f64, sigma_s: &[f64], seed: u64) -> Result<(Dataset, NoiseRows)> {
    ensure_noise("sigma_L", sigma_l)?;
    for s in sigma_s {
        ensure_noise("sigma_S", *s)?;
    }
    if sigma_s.len() != data.len() {
        return Err(Error::Argument(format!(
            "{} user noise levels for {} records",
            sigma_s.len(),
            data.len()
        )));
    }
    let d = data.dim();
    let mut noise = GaussianNoise::from_seed(seed);
    let mut u = NoiseRows::zeros(data.len(), d);
    for (row, &ss) in u.values.chunks_exact_mut(d).zip(sigma_s) {
        for x in row.iter_mut() {
            *x = noise.normal(sigma_l);
        }
        for x in row.iter_mut() {
            *x += noise.normal(ss);
        }
    }
    let features = data.features.iter().zip(&u.values).map(|(x, n)| x + n).collect();
    let perturbed = Dataset::new(d, features, data.labels.clone())?;
    Ok((perturbed, u))
}
