//! Model parameters of the noise-regularized SDE and their admissibility checks.

use serde::{Deserialize, Serialize};

/// Parameters of `dX = b(X)dt + σ(X)∘dW` with the power-law noise outside `B_R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// State dimension.
    pub d: usize,
    /// Drift growth exponent.
    pub m: f64,
    /// Noise exponent.
    pub eta: f64,
    /// Growth constant `C` in `|b(x)| ≤ C(1 + |x|^m)`.
    pub c_growth: f64,
    /// Amplitude of the built-in power drift `κ|x|^{m-1}x`.
    pub kappa: f64,
    /// Radius `R` beyond which σ takes its power-law form.
    pub r_switch: f64,
    /// Target ellipticity on the inner ball; also `σ(0) = √λ I`.
    pub lambda_floor: f64,
    /// Explosion detection radius.
    pub x_max: f64,
    /// Zero-hit detection radius for the transformed process.
    pub eps_zero: f64,
    /// Multiplier on σ; `0` switches the noise off.
    #[serde(default = "one")]
    pub noise_scale: f64,
}

fn one() -> f64 {
    1.0
}

impl ModelParams {
    /// Defaults: `C = κ = 1`, `R = 1`, `λ = 1`, `x_max = 1e8`, `eps_zero = 1e-4 R^{-η}`.
    pub fn new(d: usize, m: f64, eta: f64) -> Self {
        let r_switch = 1.0;
        Self {
            d,
            m,
            eta,
            c_growth: 1.0,
            kappa: 1.0,
            r_switch,
            lambda_floor: 1.0,
            x_max: 1e8,
            eps_zero: 1e-4 * r_switch.powf(-eta),
            noise_scale: 1.0,
        }
    }

    pub fn with_r_switch(mut self, r: f64) -> Self {
        self.r_switch = r;
        self.eps_zero = 1e-4 * r.powf(-self.eta);
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self.c_growth = self.c_growth.max(kappa);
        self
    }

    pub fn with_noise_scale(mut self, scale: f64) -> Self {
        self.noise_scale = scale;
        self
    }

    /// Radius `R^{-η}` of the ball the transformed process lives in.
    pub fn transformed_radius(&self) -> f64 {
        self.r_switch.powf(-self.eta)
    }

    /// Exponent `(η + 1 - m)/η` of the transformed-drift bound near the origin.
    pub fn g_exponent(&self) -> f64 {
        (self.eta + 1.0 - self.m) / self.eta
    }

    pub fn validate(&self) -> ValidationReport {
        validate_params(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    /// Parameter the check is about (`"eta"`, `"m"`, ...).
    pub parameter: &'static str,
    /// The inequality that must hold.
    pub requirement: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.violations.iter().map(|v| v.parameter).collect()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: requires {} ({})", v.parameter, v.requirement, v.detail)?;
        }
        Ok(())
    }
}

/// Checks every admissibility inequality and lists the ones that fail. All
/// inequalities are strict where the model demands it (`η = (m-1)/2` is rejected).
pub fn validate_params(p: &ModelParams) -> ValidationReport {
    let mut violations = Vec::new();
    let mut check = |ok: bool, parameter: &'static str, requirement: &'static str, detail: String| {
        if !ok {
            violations.push(Violation { parameter, requirement, detail });
        }
    };

    check(p.d >= 2, "d", "d >= 2", format!("d = {}", p.d));
    check(p.m > 1.0, "m", "m > 1", format!("m = {}", p.m));
    check(
        p.eta > (p.m - 1.0) / 2.0,
        "eta",
        "eta > (m-1)/2",
        format!("eta = {} <= (m-1)/2 = {}", p.eta, (p.m - 1.0) / 2.0),
    );
    check(p.c_growth >= 0.0, "c_growth", "c_growth >= 0", format!("c_growth = {}", p.c_growth));
    check(p.kappa > 0.0, "kappa", "kappa > 0", format!("kappa = {}", p.kappa));
    check(p.r_switch > 0.0, "r_switch", "r_switch > 0", format!("r_switch = {}", p.r_switch));
    check(
        p.lambda_floor > 0.0,
        "lambda_floor",
        "lambda_floor > 0",
        format!("lambda_floor = {}", p.lambda_floor),
    );
    check(
        p.x_max > p.r_switch + 1.0,
        "x_max",
        "x_max > r_switch + 1",
        format!("x_max = {}, r_switch = {}", p.x_max, p.r_switch),
    );
    let ry = p.r_switch.powf(-p.eta);
    check(
        p.eps_zero > 0.0 && p.eps_zero < ry,
        "eps_zero",
        "0 < eps_zero < r_switch^(-eta)",
        format!("eps_zero = {}, r_switch^(-eta) = {}", p.eps_zero, ry),
    );
    check(
        p.noise_scale >= 0.0 && p.noise_scale.is_finite(),
        "noise_scale",
        "noise_scale >= 0",
        format!("noise_scale = {}", p.noise_scale),
    );
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn standard_parameters_pass() {
        assert!(ModelParams::new(2, 2.0, 1.0).validate().is_ok());
    }

    #[test]
    fn eta_too_small_is_named() {
        let report = ModelParams::new(2, 3.0, 0.5).validate();
        assert_eq!(report.names(), vec!["eta"]);
    }

    #[test]
    fn boundary_eta_is_rejected() {
        let report = ModelParams::new(2, 2.0, 0.5).validate();
        assert_eq!(report.names(), vec!["eta"]);
    }

    #[test]
    fn several_violations_are_all_listed() {
        let mut p = ModelParams::new(1, 0.5, 1.0);
        p.r_switch = -1.0;
        let names = p.validate().names();
        for n in ["d", "m", "r_switch"] {
            assert!(names.contains(&n), "{names:?}");
        }
    }

    #[test]
    fn eps_zero_must_sit_inside_the_transformed_ball() {
        let mut p = ModelParams::new(2, 2.0, 1.0).with_r_switch(2.0);
        p.eps_zero = 0.6;
        assert_eq!(p.validate().names(), vec!["eps_zero"]);
    }

    proptest! {
        // `(η+1-m)/η > -1` is the same condition as `2η > m-1`
        #[test]
        fn exponent_condition_matches_validation(m in 1.01f64..5.0, eta in 0.05f64..4.0) {
            let p = ModelParams::new(2, m, eta);
            prop_assume!((2.0 * eta - (m - 1.0)).abs() > 1e-9);
            prop_assert_eq!(p.g_exponent() > -1.0, p.validate().is_ok());
        }
    }
}
