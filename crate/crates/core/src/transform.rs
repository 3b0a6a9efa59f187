//! The inversion `y = φ(x) = |x|^{-η-1} x`, which turns the noise `σ(X)∘dW` into the
//! additive noise `dW` and sends `|x| → ∞` to `y → 0`.

use serde::Serialize;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::linalg::{radial_projector, Matrix, Vector};
use crate::params::ModelParams;
use crate::rng::SampleRng;

pub fn phi(eta: f64, x: &Vector) -> Result<Vector> {
    let r = x.norm();
    if r == 0.0 {
        return Err(Error::domain("phi is undefined at x = 0"));
    }
    Ok(x * r.powf(-eta - 1.0))
}

pub fn phi_inv(eta: f64, y: &Vector) -> Result<Vector> {
    let r = y.norm();
    if r == 0.0 {
        return Err(Error::domain("phi_inv is undefined at y = 0"));
    }
    Ok(y * r.powf(-1.0 / eta - 1.0))
}

/// Jacobian of φ on `|x| ≥ R`; equals `σ(x)⁻¹` there.
pub fn dphi(p: &ModelParams, x: &Vector) -> Result<Matrix> {
    let r = x.norm();
    if r < p.r_switch {
        return Err(Error::domain(format!("dphi needs |x| >= R = {}, got {r}", p.r_switch)));
    }
    let d = x.len();
    Ok((Matrix::identity(d, d) - radial_projector(x) * (p.eta + 1.0)) * r.powf(-p.eta - 1.0))
}

/// Model data needed to evaluate the drift of the transformed equation.
#[derive(Debug, Clone)]
pub struct TransformContext {
    pub params: ModelParams,
    pub drift: DriftSpec,
}

impl TransformContext {
    pub fn new(params: ModelParams, drift: DriftSpec) -> Self {
        Self { params, drift }
    }

    /// `R^{-η}`, always recomputed from the parameters.
    pub fn r_y(&self) -> f64 {
        self.params.transformed_radius()
    }

    pub fn phi(&self, x: &Vector) -> Result<Vector> {
        phi(self.params.eta, x)
    }

    pub fn phi_inv(&self, y: &Vector) -> Result<Vector> {
        phi_inv(self.params.eta, y)
    }

    /// `g(y) = |y|^{(η+1)/η}(I - (η+1) y yᵀ/|y|²) b(φ⁻¹(y))` for `0 < |y| < R^{-η}`,
    /// and `0` for `|y| ≥ R^{-η}`.
    pub fn transformed_drift(&self, y: &Vector) -> Result<Vector> {
        let r = y.norm();
        if r == 0.0 {
            return Err(Error::domain("transformed drift is undefined at y = 0"));
        }
        if r >= self.r_y() {
            return Ok(Vector::zeros(y.len()));
        }
        let eta = self.params.eta;
        let x = y * r.powf(-1.0 / eta - 1.0);
        let b = self.drift.eval(&x);
        let d = y.len();
        let jac = Matrix::identity(d, d) - radial_projector(y) * (eta + 1.0);
        Ok(jac * b * r.powf((eta + 1.0) / eta))
    }

    /// Smallest `C_g` with `|g(y)| ≤ C_g |y|^{(η+1-m)/η}` over `n_samples` points with
    /// `|y|` log-uniform in `[1e-6 R^{-η}, R^{-η})`, plus a log-log slope fit of `|g|`.
    pub fn g_bound_check(&self, n_samples: usize, seed: u64) -> GBoundReport {
        let exponent = self.params.g_exponent();
        let ry = self.r_y();
        let mut rng = SampleRng::new(seed);
        let mut c_g: f64 = 0.0;
        let mut c_g_near_zero: f64 = 0.0;
        let (mut sx, mut sy, mut sxx, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..n_samples {
            let y = rng.log_radius_point(self.params.d, 1e-6 * ry, ry * (1.0 - 1e-12));
            let r = y.norm();
            let g = self.transformed_drift(&y).expect("nonzero sample").norm();
            let ratio = g / r.powf(exponent);
            c_g = c_g.max(ratio);
            if r < 1e-3 * ry {
                c_g_near_zero = c_g_near_zero.max(ratio);
            }
            if g > 0.0 {
                let (lx, ly) = (r.ln(), g.ln());
                sx += lx;
                sy += ly;
                sxx += lx * lx;
                sxy += lx * ly;
                n += 1.0;
            }
        }
        let fitted_slope = if n >= 2.0 {
            Some((n * sxy - sx * sy) / (n * sxx - sx * sx))
        } else {
            None
        };
        GBoundReport {
            exponent,
            exponent_above_minus_one: exponent > -1.0,
            c_g,
            c_g_near_zero,
            fitted_slope,
            samples: n_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GBoundReport {
    /// `(η + 1 - m)/η`.
    pub exponent: f64,
    pub exponent_above_minus_one: bool,
    /// Fitted constant over all samples.
    pub c_g: f64,
    /// Same constant restricted to `|y| < 1e-3 R^{-η}`; close to `c_g` when the bound is tight.
    pub c_g_near_zero: f64,
    pub fitted_slope: Option<f64>,
    pub samples: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::sigma_inverse;
    use crate::linalg::{jacobian_fd, max_abs, relative_max_diff, relative_vec_diff, vector};

    fn ctx(d: usize, m: f64, eta: f64) -> TransformContext {
        TransformContext::new(ModelParams::new(d, m, eta), DriftSpec::power(1.0, m))
    }

    #[test]
    fn phi_examples() {
        let y = phi(1.0, &vector(&[2.0, 0.0])).unwrap();
        assert!((y - vector(&[0.5, 0.0])).norm() < 1e-15);
        let u = vector(&[0.6, 0.0, 0.8]);
        assert!((phi(2.3, &u).unwrap() - &u).norm() < 1e-15);
        assert!(phi(1.0, &Vector::zeros(2)).is_err());
    }

    #[test]
    fn phi_inv_examples() {
        let x = phi_inv(1.0, &vector(&[0.5, 0.0])).unwrap();
        assert!((x - vector(&[2.0, 0.0])).norm() < 1e-15);
        let u = vector(&[0.0, -1.0]);
        assert!((phi_inv(0.7, &u).unwrap() - &u).norm() < 1e-15);
        assert!(phi_inv(1.0, &Vector::zeros(3)).is_err());
    }

    #[test]
    fn norm_law_and_roundtrip() {
        let mut rng = SampleRng::new(77);
        for eta in [0.6, 1.0, 2.5] {
            for _ in 0..10_000 {
                let x = rng.log_radius_point(3, 1e-3, 1e3);
                let y = phi(eta, &x).unwrap();
                assert!((y.norm() / x.norm().powf(-eta) - 1.0).abs() < 1e-12);
                assert!((y.normalize() - x.normalize()).norm() < 1e-12);
                let back = phi_inv(eta, &y).unwrap();
                assert!(relative_vec_diff(&back, &x, 1e-300) < 1e-10);
                let again = phi(eta, &phi_inv(eta, &x).unwrap()).unwrap();
                assert!(relative_vec_diff(&again, &x, 1e-300) < 1e-10);
            }
        }
    }

    #[test]
    fn dphi_example_and_eigenvalues() {
        let p = ModelParams::new(2, 2.0, 1.0);
        let j = dphi(&p, &vector(&[2.0, 0.0])).unwrap();
        let expected = Matrix::from_row_slice(2, 2, &[-0.25, 0.0, 0.0, 0.25]);
        assert!(max_abs(&(j - expected)) < 1e-15);

        let p = ModelParams::new(3, 2.0, 1.7);
        let x = vector(&[1.0, 2.0, 2.0]);
        let r: f64 = 3.0;
        let j = dphi(&p, &x).unwrap();
        let radial = &j * x.normalize();
        assert!((radial + x.normalize() * (p.eta * r.powf(-p.eta - 1.0))).norm() < 1e-14);
        let t = vector(&[2.0, -1.0, 0.0]).normalize();
        assert!((&j * &t - &t * r.powf(-p.eta - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn dphi_is_sigma_inverse_and_the_jacobian_of_phi() {
        let mut rng = SampleRng::new(8);
        for (d, eta) in [(2, 1.0), (3, 2.0), (3, 0.8)] {
            let p = ModelParams::new(d, 2.0, eta);
            for _ in 0..1000 {
                let x = rng.log_radius_point(d, 1.0, 100.0);
                let j = dphi(&p, &x).unwrap();
                assert!(max_abs(&(&j - sigma_inverse(&p, &x).unwrap())) < 1e-10 * max_abs(&j));
                let h = 1e-6 * x.norm();
                let fd = jacobian_fd(|z| phi(eta, z).unwrap(), &x, h);
                assert!(relative_max_diff(&fd, &j, 1e-300) < 1e-5);
            }
        }
    }

    #[test]
    fn transformed_drift_example() {
        let g = ctx(2, 2.0, 1.0).transformed_drift(&vector(&[0.5, 0.0])).unwrap();
        assert!((g - vector(&[-1.0, 0.0])).norm() < 1e-14);
    }

    #[test]
    fn transformed_drift_truncation() {
        let c = TransformContext::new(
            ModelParams::new(2, 2.0, 1.0).with_r_switch(2.0),
            DriftSpec::power(1.0, 2.0),
        );
        let y = vector(&[2.0 * c.r_y(), 0.0]);
        assert_eq!(c.transformed_drift(&y).unwrap().norm(), 0.0);
        assert!(c.transformed_drift(&Vector::zeros(2)).is_err());
    }

    #[test]
    fn chain_rule_identity() {
        // g(φ(x)) = Dφ(x) b(x) for |x| > R
        let mut rng = SampleRng::new(12);
        for (d, m, eta) in [(2, 2.0, 1.0), (3, 3.0, 1.5), (3, 1.5, 0.5)] {
            let c = ctx(d, m, eta);
            for _ in 0..1000 {
                let x = rng.log_radius_point(d, 1.0001, 1e3);
                let lhs = c.transformed_drift(&c.phi(&x).unwrap()).unwrap();
                let rhs = dphi(&c.params, &x).unwrap() * c.drift.eval(&x);
                assert!(relative_vec_diff(&lhs, &rhs, 1e-300) < 1e-9);
            }
        }
    }

    #[test]
    fn g_bound_exponents() {
        let rep = ctx(2, 2.0, 1.0).g_bound_check(2000, 1);
        assert_eq!(rep.exponent, 0.0);
        assert!(rep.exponent_above_minus_one);

        let rep = ctx(2, 2.0, 0.75).g_bound_check(2000, 1);
        assert!((rep.exponent + 1.0 / 3.0).abs() < 1e-15);
        assert!(rep.exponent_above_minus_one);
    }

    #[test]
    fn g_bound_constant_is_stable_near_zero() {
        for (m, eta) in [(2.0, 1.0), (2.0, 0.75), (3.0, 1.5)] {
            let c = ctx(3, m, eta);
            let rep = c.g_bound_check(4000, 5);
            // power drift: |g(y)| = κη|y|^{(η+1-m)/η} exactly
            assert!((rep.c_g - eta).abs() < 1e-9, "{rep:?}");
            assert!((rep.c_g_near_zero / rep.c_g - 1.0).abs() < 1e-9);
            assert!((rep.fitted_slope.unwrap() - rep.exponent).abs() < 1e-9);
        }
    }
}
