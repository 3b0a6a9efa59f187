//! The simulated system as seen by the time steppers.

use crate::coefficients;
use crate::drift::DriftSpec;
use crate::linalg::{Matrix, Vector};
use crate::params::ModelParams;
use crate::transform::TransformContext;

/// Coefficients of a Stratonovich SDE `dX = b(X)dt + σ(X)∘dW` together with its
/// Itô drift `b̃`.
pub trait Dynamics: Sync {
    fn dim(&self) -> usize;
    /// Stratonovich (and ODE) drift `b`.
    fn drift(&self, x: &Vector) -> Vector;
    /// Itô drift `b̃ = b + ½ Σ (∂σ)σ`.
    fn ito_drift(&self, x: &Vector) -> Vector;
    fn sigma(&self, x: &Vector) -> Matrix;
}

/// The noise-regularized SDE: power-law noise outside `B_R`, blended inside.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub drift: DriftSpec,
}

impl Model {
    pub fn new(params: ModelParams, drift: DriftSpec) -> Self {
        Self { params, drift }
    }

    /// Model with the built-in power drift `κ|x|^{m-1}x` taken from the parameters.
    pub fn power(params: ModelParams) -> Self {
        let drift = DriftSpec::power(params.kappa, params.m);
        Self { params, drift }
    }

    pub fn transform_context(&self) -> TransformContext {
        TransformContext::new(self.params.clone(), self.drift.clone())
    }

    pub fn without_noise(&self) -> Self {
        Self { params: self.params.clone().with_noise_scale(0.0), drift: self.drift.clone() }
    }
}

impl Dynamics for Model {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn drift(&self, x: &Vector) -> Vector {
        self.drift.eval(x)
    }

    fn ito_drift(&self, x: &Vector) -> Vector {
        let s = self.params.noise_scale;
        if s == 0.0 {
            return self.drift.eval(x);
        }
        // the correction is quadratic in σ
        let corr = coefficients::ito_drift(&self.params, &self.drift, x) - self.drift.eval(x);
        self.drift.eval(x) + corr * (s * s)
    }

    fn sigma(&self, x: &Vector) -> Matrix {
        let s = coefficients::sigma(&self.params, x);
        if self.params.noise_scale == 1.0 {
            s
        } else {
            s * self.params.noise_scale
        }
    }
}

/// Test double: arbitrary drift with a constant noise matrix (no Itô correction).
#[derive(Debug, Clone)]
pub struct ConstantNoise {
    pub drift: DriftSpec,
    pub sigma: Matrix,
}

impl Dynamics for ConstantNoise {
    fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    fn drift(&self, x: &Vector) -> Vector {
        self.drift.eval(x)
    }

    fn ito_drift(&self, x: &Vector) -> Vector {
        self.drift.eval(x)
    }

    fn sigma(&self, _x: &Vector) -> Matrix {
        self.sigma.clone()
    }
}

/// Drift of an additive-noise equation `dY = g(Y)dt + dW`.
pub trait AdditiveDrift: Sync {
    fn dim(&self) -> usize;
    /// `None` where the drift is undefined (the origin of the transformed equation).
    fn g(&self, y: &Vector) -> Option<Vector>;
}

impl AdditiveDrift for TransformContext {
    fn dim(&self) -> usize {
        self.params.d
    }

    fn g(&self, y: &Vector) -> Option<Vector> {
        self.transformed_drift(y).ok()
    }
}

/// `g ≡ 0`: plain Brownian motion.
#[derive(Debug, Clone, Copy)]
pub struct Driftless {
    pub d: usize,
}

impl AdditiveDrift for Driftless {
    fn dim(&self) -> usize {
        self.d
    }

    fn g(&self, y: &Vector) -> Option<Vector> {
        Some(Vector::zeros(y.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, vector};

    #[test]
    fn noise_scale_scales_sigma_and_correction() {
        let p = ModelParams::new(3, 2.0, 1.0);
        let full = Model::power(p.clone());
        let half = Model::power(p.with_noise_scale(0.5));
        let x = vector(&[2.0, 1.0, -1.0]);
        assert!(max_abs(&(half.sigma(&x) * 2.0 - full.sigma(&x))) < 1e-12);
        let corr_full = full.ito_drift(&x) - full.drift(&x);
        let corr_half = half.ito_drift(&x) - half.drift(&x);
        assert!((corr_half * 4.0 - corr_full).norm() < 1e-9);
        let off = full.without_noise();
        assert_eq!(max_abs(&off.sigma(&x)), 0.0);
        assert_eq!(off.ito_drift(&x), off.drift(&x));
    }
}
