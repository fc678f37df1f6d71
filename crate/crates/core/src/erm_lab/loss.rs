/// Margin-based loss `l(y fᵀx)`. Only the logistic loss is provided: it
/// is twice differentiable with `|l'| ≤ 1` and `0 ≤ l'' ≤ 1/4`, which the
/// classifier-gap bounds require.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Upper bound `c` on the second derivative.
    pub curvature_bound: f64,
    /// Upper bound on `|l'|`.
    pub derivative_bound: f64,
}

impl Default for LossSpec {
    fn default() -> Self {
        Self::logistic()
    }
}

impl LossSpec {
    pub fn logistic() -> Self {
        Self {
            kind: LossKind::Logistic,
            curvature_bound: 0.25,
            derivative_bound: 1.0,
        }
    }

    /// `ln(1 + e^{-z})`
    pub fn value(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Logistic => {
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
        }
    }

    /// `-1 / (1 + e^{z})`
    pub fn derivative(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Logistic => {
                if z > 0.0 {
                    let e = (-z).exp();
                    -e / (1.0 + e)
                } else {
                    -1.0 / (1.0 + z.exp())
                }
            }
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        match self.kind {
            LossKind::Logistic => {
                let p = -self.derivative(z);
                p * (1.0 - p)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_hold() {
        let l = LossSpec::logistic();
        assert!((l.value(0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(l.second_derivative(0.0), 0.25);
        for k in -400..=400 {
            let z = k as f64 * 0.1;
            assert!(l.derivative(z).abs() <= l.derivative_bound);
            let c = l.second_derivative(z);
            assert!((0.0..=l.curvature_bound).contains(&c));
            assert!(l.value(z).is_finite() && l.value(z) >= 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let l = LossSpec::logistic();
        let h = 1e-5;
        for &z in &[-7.0, -1.3, 0.0, 0.4, 5.0] {
            let fd = (l.value(z + h) - l.value(z - h)) / (2.0 * h);
            assert!((fd - l.derivative(z)).abs() < 1e-9);
            let fd2 = (l.derivative(z + h) - l.derivative(z - h)) / (2.0 * h);
            assert!((fd2 - l.second_derivative(z)).abs() < 1e-9);
        }
    }
}
