//! Drift fields `b: ℝ^d → ℝ^d`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::linalg::Vector;
use crate::rng::SampleRng;

type DriftFn = Arc<dyn Fn(&Vector) -> Vector + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    /// `b(x) = κ|x|^{m-1}x`.
    Power { kappa: f64, m: f64 },
    Custom,
}

/// Claimed bound `|b(x)| ≤ c(1 + |x|^m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCertificate {
    pub m: f64,
    pub c: f64,
}

#[derive(Clone)]
pub struct DriftSpec {
    kind: DriftKind,
    certificate: GrowthCertificate,
    eval: DriftFn,
}

impl fmt::Debug for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftSpec")
            .field("kind", &self.kind)
            .field("certificate", &self.certificate)
            .finish()
    }
}

impl DriftSpec {
    pub fn power(kappa: f64, m: f64) -> Self {
        Self {
            kind: DriftKind::Power { kappa, m },
            certificate: GrowthCertificate { m, c: kappa },
            eval: Arc::new(move |x: &Vector| {
                let r = x.norm();
                if r == 0.0 {
                    x.clone() * 0.0
                } else {
                    x * (kappa * r.powf(m - 1.0))
                }
            }),
        }
    }

    /// User-supplied drift with its claimed growth certificate. The claim is
    /// spot-checked (see [`DriftSpec::check_growth`]) and a warning is logged if it fails.
    pub fn custom<F>(f: F, certificate: GrowthCertificate) -> Self
    where
        F: Fn(&Vector) -> Vector + Send + Sync + 'static,
    {
        let spec = Self { kind: DriftKind::Custom, certificate, eval: Arc::new(f) };
        for d in [2, 3] {
            let check = spec.check_growth(d, 1000, 0x6472_6966);
            if !check.passed {
                log::warn!(
                    "custom drift violates its growth certificate in d={d}: worst ratio {:.3e} at |x| = {:.3e}",
                    check.worst_ratio,
                    check.worst_radius
                );
            }
        }
        spec
    }

    pub fn zero() -> Self {
        Self::custom(|x: &Vector| x * 0.0, GrowthCertificate { m: 1.0, c: 0.0 })
    }

    pub fn kind(&self) -> DriftKind {
        self.kind
    }

    pub fn certificate(&self) -> GrowthCertificate {
        self.certificate
    }

    #[inline]
    pub fn eval(&self, x: &Vector) -> Vector {
        (self.eval)(x)
    }

    /// Evaluates `|b(x)| / (c(1 + |x|^m))` on `n_radii` log-spaced radii in `[1e-3, 1e6]`,
    /// one random direction each.
    pub fn check_growth(&self, d: usize, n_radii: usize, seed: u64) -> GrowthCheck {
        let GrowthCertificate { m, c } = self.certificate;
        let mut rng = SampleRng::new(seed);
        let (lo, hi) = (1e-3_f64.ln(), 1e6_f64.ln());
        let mut worst = GrowthCheck { passed: true, worst_ratio: 0.0, worst_radius: 0.0, samples: n_radii };
        for i in 0..n_radii {
            let t = if n_radii == 1 { 0.0 } else { i as f64 / (n_radii - 1) as f64 };
            let r = (lo + t * (hi - lo)).exp();
            let x = rng.direction(d) * r;
            let bound = c * (1.0 + r.powf(m));
            let norm = self.eval(&x).norm();
            let ratio = if bound > 0.0 {
                norm / bound
            } else if norm == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            if ratio > worst.worst_ratio {
                worst.worst_ratio = ratio;
                worst.worst_radius = r;
            }
        }
        // slack for rounding in the power evaluation
        worst.passed = worst.worst_ratio <= 1.0 + 1e-12;
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthCheck {
    pub passed: bool,
    pub worst_ratio: f64,
    pub worst_radius: f64,
    pub samples: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vector;

    #[test]
    fn power_drift_values() {
        let b = DriftSpec::power(1.0, 2.0);
        let v = b.eval(&vector(&[3.0, 4.0]));
        assert!((v - vector(&[15.0, 20.0])).norm() < 1e-12);
        assert_eq!(b.eval(&vector(&[0.0, 0.0])).norm(), 0.0);
    }

    #[test]
    fn power_drift_meets_its_certificate() {
        for (kappa, m) in [(1.0, 2.0), (2.5, 3.0), (0.3, 1.5)] {
            let check = DriftSpec::power(kappa, m).check_growth(3, 1000, 1);
            assert!(check.passed, "{check:?}");
        }
    }

    #[test]
    fn false_certificate_is_detected() {
        let b = DriftSpec::custom(
            |x: &Vector| x * x.norm_squared(),
            GrowthCertificate { m: 2.0, c: 1.0 },
        );
        let check = b.check_growth(2, 1000, 3);
        assert!(!check.passed);
        assert!(check.worst_radius > 1.0);
    }
}
