//! The Lyapunov function `V(x) = (log|x|)^α` (α ∈ (0,1)), blended to a positive
//! constant near the origin, and the generator `LV = b̃·∇V + ½ tr(σσᵀ D²V)`.
//!
//! `V` is radial. On `|x| ≤ r0 = max(2, R)` it equals `a = ½(log r1)^α`; on
//! `|x| ≥ r1 = r0 + 1` it is exactly `(log|x|)^α`; in between the two are joined with
//! the quintic smoothstep, so `V` is C² and nondecreasing in the radius.

use serde::Serialize;

use crate::coefficients::{diffusion_matrix, ito_drift, smoothstep5};
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::linalg::{radial_projector, Matrix, Vector};
use crate::params::ModelParams;
use crate::rng::SampleRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovProfile {
    pub alpha: f64,
    pub r0: f64,
    pub r1: f64,
    pub a_floor: f64,
}

impl LyapunovProfile {
    pub fn new(alpha: f64, r_switch: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::precondition(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let r0 = r_switch.max(2.0);
        let r1 = r0 + 1.0;
        Ok(Self { alpha, r0, r1, a_floor: 0.5 * r1.ln().powf(alpha) })
    }

    /// Radius from which the closed-form generator applies: `max(r1, R)`.
    pub fn closed_form_radius(&self, p: &ModelParams) -> f64 {
        self.r1.max(p.r_switch)
    }

    /// `(V(r), V'(r), V''(r))` as functions of the radius.
    pub fn radial(&self, r: f64) -> (f64, f64, f64) {
        let alpha = self.alpha;
        let exact = |r: f64| {
            let l = r.ln();
            let v = l.powf(alpha);
            let v1 = alpha * l.powf(alpha - 1.0) / r;
            let v2 = alpha * (alpha - 1.0) * l.powf(alpha - 2.0) / (r * r)
                - alpha * l.powf(alpha - 1.0) / (r * r);
            (v, v1, v2)
        };
        if r >= self.r1 {
            return exact(r);
        }
        if r <= self.r0 {
            return (self.a_floor, 0.0, 0.0);
        }
        let w = self.r1 - self.r0;
        let u = (r - self.r0) / w;
        let s = smoothstep5(u);
        let s1 = 30.0 * u * u * (u - 1.0) * (u - 1.0) / w;
        let s2 = 60.0 * u * (2.0 * u - 1.0) * (u - 1.0) / (w * w);
        let (l, l1, l2) = exact(r);
        let a = self.a_floor;
        (a + s * (l - a), s1 * (l - a) + s * l1, s2 * (l - a) + 2.0 * s1 * l1 + s * l2)
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.radial(x.norm()).0
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        let r = x.norm();
        let (_, v1, _) = self.radial(r);
        if v1 == 0.0 {
            return Vector::zeros(x.len());
        }
        x * (v1 / r)
    }

    pub fn hess(&self, x: &Vector) -> Matrix {
        let d = x.len();
        let r = x.norm();
        let (_, v1, v2) = self.radial(r);
        if v1 == 0.0 && v2 == 0.0 {
            return Matrix::zeros(d, d);
        }
        let p = radial_projector(x);
        &p * v2 + (Matrix::identity(d, d) - &p) * (v1 / r)
    }

    /// Generator applied to `V` in the closed form valid on `|x| ≥ max(r1, R)`:
    /// `α(log|x|)^{α-1} [b(x)·x/|x|² - ½|x|^{2η}((d-2)/η + (1-α)/(η² log|x|))]`.
    pub fn lv_closed(&self, p: &ModelParams, b: &DriftSpec, x: &Vector) -> Result<f64> {
        let r = x.norm();
        let r_min = self.closed_form_radius(p);
        if r < r_min {
            return Err(Error::domain(format!(
                "closed-form LV needs |x| >= {r_min}, got {r}"
            )));
        }
        Ok(self.lv_closed_radial(p, b.eval(x).dot(x) / (r * r), r))
    }

    /// Closed-form `LV` in terms of the radius and the radial drift rate `b·x/|x|²`.
    pub fn lv_closed_radial(&self, p: &ModelParams, radial_rate: f64, r: f64) -> f64 {
        let alpha = self.alpha;
        let eta = p.eta;
        let l = r.ln();
        let noise = 0.5
            * r.powf(2.0 * eta)
            * ((p.d as f64 - 2.0) / eta + (1.0 - alpha) / (eta * eta * l));
        alpha * l.powf(alpha - 1.0) * (radial_rate - noise)
    }

    /// `LV = b̃·∇V + ½ tr(σσᵀ D²V)` assembled from the coefficient module; valid everywhere.
    pub fn lv_generic(&self, p: &ModelParams, b: &DriftSpec, x: &Vector) -> f64 {
        let grad = self.grad(x);
        let hess = self.hess(x);
        if grad.amax() == 0.0 && hess.amax() == 0.0 {
            return 0.0;
        }
        let drift = ito_drift(p, b, x).dot(&grad);
        let a = diffusion_matrix(p, x);
        drift + 0.5 * (a * hess).trace()
    }
}

/// `n` fixed, well-spread unit directions in ℝ^d (equally spaced angles in 2-d, a
/// Fibonacci lattice in 3-d, seeded random otherwise).
pub fn scan_directions(d: usize, n: usize) -> Vec<Vector> {
    match d {
        1 => (0..n).map(|i| Vector::from_element(1, if i % 2 == 0 { 1.0 } else { -1.0 })).collect(),
        2 => (0..n)
            .map(|i| {
                let t = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                Vector::from_column_slice(&[t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    Vector::from_column_slice(&[rho * t.cos(), rho * t.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = SampleRng::new(0x5ca7 + d as u64);
            (0..n).map(|_| rng.direction(d)).collect()
        }
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

const SCAN_DIRECTIONS: usize = 64;
const SEARCH_CAP_FACTOR: f64 = 1e12;
const SEARCH_POINTS_PER_DECADE: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativityCertificate {
    /// `LV_closed < 0` beyond this radius on the certificate grid.
    pub r_star: f64,
    /// Relative width of the final bisection bracket.
    pub relative_tolerance: f64,
    /// True when `LV_closed` is already negative at the first scanned radius, i.e. no
    /// sign change exists on the closed-form domain.
    pub negative_from_start: bool,
    pub grid_radii: usize,
    pub grid_directions: usize,
    /// Largest `LV_closed` over the certificate grid `[r*, 1e6 r*] × directions`.
    pub max_lv_on_grid: f64,
}

impl LyapunovProfile {
    fn max_lv_at_radius(&self, p: &ModelParams, b: &DriftSpec, dirs: &[Vector], r: f64) -> f64 {
        dirs.iter()
            .map(|u| self.lv_closed_along(p, b, u, r))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Closed-form `LV` at `r·u` for a unit vector `u`, using `r` itself as the radius.
    fn lv_closed_along(&self, p: &ModelParams, b: &DriftSpec, u: &Vector, r: f64) -> f64 {
        let rate = b.eval(&(u * r)).dot(u) / r;
        self.lv_closed_radial(p, rate, r)
    }

    /// Smallest radius beyond which `LV_closed < 0`, refined by bisection to `1e-3`
    /// relative and certified on `[r*, 1e6 r*] × 64` directions.
    pub fn negativity_radius(&self, p: &ModelParams, b: &DriftSpec) -> Result<NegativityCertificate> {
        let dirs = scan_directions(p.d, SCAN_DIRECTIONS);
        let start = self.closed_form_radius(p);
        let decades = SEARCH_CAP_FACTOR.log10();
        let radii = log_grid(start, start * SEARCH_CAP_FACTOR, (decades as usize) * SEARCH_POINTS_PER_DECADE + 1);
        let values: Vec<f64> = radii.iter().map(|&r| self.max_lv_at_radius(p, b, &dirs, r)).collect();
        let last_nonneg = values.iter().rposition(|&v| v >= 0.0);
        let (r_star, negative_from_start) = match last_nonneg {
            None => (start, true),
            Some(i) if i + 1 == radii.len() => {
                return Err(Error::Fit(format!(
                    "LV stays nonnegative up to |x| = {:.3e}; the noise does not dominate the drift (is 2 eta > m - 1?)",
                    radii[i]
                )));
            }
            Some(i) => {
                let (mut lo, mut hi) = (radii[i], radii[i + 1]);
                while (hi - lo) > 1e-3 * hi {
                    let mid = 0.5 * (lo + hi);
                    if self.max_lv_at_radius(p, b, &dirs, mid) >= 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                (hi, false)
            }
        };

        let cert_radii = log_grid(r_star, 1e6 * r_star, 512);
        let max_lv = cert_radii
            .iter()
            .map(|&r| self.max_lv_at_radius(p, b, &dirs, r))
            .fold(f64::NEG_INFINITY, f64::max);
        if max_lv >= 0.0 {
            return Err(Error::Fit(format!(
                "negativity certificate failed: LV reaches {max_lv:.3e} on [{r_star:.4e}, {:.4e}]",
                1e6 * r_star
            )));
        }
        Ok(NegativityCertificate {
            r_star,
            relative_tolerance: 1e-3,
            negative_from_start,
            grid_radii: cert_radii.len(),
            grid_directions: dirs.len(),
            max_lv_on_grid: max_lv,
        })
    }

    /// `sup_{r ≤ |x| ≤ r_max} LV_closed` on a log grid, for tail-behaviour checks.
    pub fn tail_sup(&self, p: &ModelParams, b: &DriftSpec, r: f64, r_max: f64, n: usize) -> f64 {
        let dirs = scan_directions(p.d, 16);
        log_grid(r.max(self.closed_form_radius(p)), r_max, n)
            .into_iter()
            .map(|s| self.max_lv_at_radius(p, b, &dirs, s))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Super-Lyapunov constants for `LV ≤ -c V^γ + d0`, with the `K_T` threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuperLyapunovFit {
    pub gamma: f64,
    pub c_coef: f64,
    pub d0: f64,
    pub t_horizon: f64,
    pub k_t: f64,
    /// Radius where the outer fit grid starts (`max(r1, r*)`).
    pub fit_radius: f64,
    pub audit_points: usize,
    pub audit_passed: bool,
    /// Largest `LV + cV^γ - d0` seen in the audit (must be `≤ 0`).
    pub audit_worst_slack: f64,
}

const FIT_GRID_RADII: usize = 512;
const FIT_GRID_HI: f64 = 1e6;
const INNER_RADII: usize = 2048;
const AUDIT_POINTS: usize = 10_000;

/// `max{(2 d0/c)^{1/γ}, (c(γ-1)T/2)^{-1/(γ-1)}}`.
pub fn k_threshold(c: f64, gamma: f64, d0: f64, t: f64) -> Result<f64> {
    if !(gamma > 1.0) || !(c > 0.0) || !(t > 0.0) || d0 < 0.0 {
        return Err(Error::precondition(format!(
            "K_T needs gamma > 1, c > 0, T > 0, d0 >= 0 (got gamma={gamma}, c={c}, T={t}, d0={d0})"
        )));
    }
    let first = (2.0 * d0 / c).powf(1.0 / gamma);
    let second = (c * (gamma - 1.0) * t / 2.0).powf(-1.0 / (gamma - 1.0));
    Ok(first.max(second))
}

impl LyapunovProfile {
    /// Fits `c` as half the infimum of `-LV/V^γ` over the outer grid, then `d0` from an
    /// inner sample, then audits the inequality on a fresh random sample.
    pub fn super_lyapunov_fit(
        &self,
        p: &ModelParams,
        b: &DriftSpec,
        gamma: f64,
        t_horizon: f64,
        seed: u64,
    ) -> Result<SuperLyapunovFit> {
        if !(gamma > 1.0) {
            return Err(Error::precondition(format!("gamma must exceed 1, got {gamma}")));
        }
        if !(t_horizon > 0.0) {
            return Err(Error::precondition(format!("T must be positive, got {t_horizon}")));
        }
        let cert = self.negativity_radius(p, b)?;
        let fit_radius = self.closed_form_radius(p).max(cert.r_star);
        let dirs = scan_directions(p.d, SCAN_DIRECTIONS);

        let mut inf_ratio = f64::INFINITY;
        for r in log_grid(fit_radius, FIT_GRID_HI.max(2.0 * fit_radius), FIT_GRID_RADII) {
            let v = self.radial(r).0;
            for u in &dirs {
                let lv = self.lv_closed_along(p, b, u, r);
                inf_ratio = inf_ratio.min(-lv / v.powf(gamma));
            }
        }
        if !(inf_ratio > 0.0) {
            return Err(Error::Fit(format!(
                "infimum of -LV/V^gamma on the outer grid is {inf_ratio:.3e}; no positive c exists"
            )));
        }
        let c = 0.5 * inf_ratio;

        let excess = |x: &Vector| self.lv_generic(p, b, x) + c * self.value(x).powf(gamma);
        let mut sup: f64 = excess(&Vector::zeros(p.d));
        for r in log_grid(1e-3, fit_radius, INNER_RADII) {
            for u in &dirs {
                sup = sup.max(excess(&(u * r)));
            }
        }
        // off-grid slack for the inner supremum
        let d0 = sup.max(0.0) * 1.01 + 1e-9;

        let mut rng = SampleRng::new(seed);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..AUDIT_POINTS {
            let x = if i % 2 == 0 {
                rng.log_radius_point(p.d, 1e-3, FIT_GRID_HI)
            } else {
                rng.ball_point(p.d, 1.5 * fit_radius)
            };
            worst = worst.max(excess(&x) - d0);
        }

        Ok(SuperLyapunovFit {
            gamma,
            c_coef: c,
            d0,
            t_horizon,
            k_t: k_threshold(c, gamma, d0, t_horizon)?,
            fit_radius,
            audit_points: AUDIT_POINTS,
            audit_passed: worst <= 0.0,
            audit_worst_slack: worst,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{relative_max_diff, vector};
    use std::f64::consts::E;

    fn standard(d: usize) -> (LyapunovProfile, ModelParams, DriftSpec) {
        (
            LyapunovProfile::new(0.5, 1.0).unwrap(),
            ModelParams::new(d, 2.0, 1.0),
            DriftSpec::power(1.0, 2.0),
        )
    }

    #[test]
    fn alpha_must_be_in_unit_interval() {
        assert!(LyapunovProfile::new(1.0, 1.0).is_err());
        assert!(LyapunovProfile::new(0.0, 1.0).is_err());
    }

    #[test]
    fn value_and_gradient_examples() {
        let (v, _, _) = standard(2);
        let x = vector(&[E * E, 0.0]);
        assert!((v.value(&x) - 2f64.sqrt()).abs() < 1e-14);
        let g = v.grad(&x);
        let expected = 2f64.powf(-0.5) * 0.5 * E.powi(-2);
        assert!((g[0] - expected).abs() < 1e-15 && g[1] == 0.0);
    }

    #[test]
    fn floor_and_growth() {
        let (v, _, _) = standard(3);
        let mut rng = SampleRng::new(3);
        for _ in 0..5000 {
            let x = rng.log_radius_point(3, 1e-4, 1e8);
            assert!(v.value(&x) >= v.a_floor);
        }
        assert_eq!(v.value(&Vector::zeros(3)), v.a_floor);
        let mut prev = 0.0;
        for k in 1..30 {
            let r = 10f64.powi(k);
            let val = v.radial(r).0;
            assert!(val > prev);
            prev = val;
        }
        assert!(prev > 8.0);
    }

    #[test]
    fn radial_profile_is_monotone_through_the_blend() {
        let v = LyapunovProfile::new(0.3, 2.5).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for r in log_grid(0.1, 10.0, 2000) {
            let (val, d1, _) = v.radial(r);
            assert!(val >= prev && d1 >= 0.0);
            prev = val;
        }
    }

    #[test]
    fn blend_is_c2_at_both_edges() {
        let v = LyapunovProfile::new(0.5, 1.0).unwrap();
        for r in [v.r0, v.r1] {
            let h = 1e-7;
            let (a, a1, a2) = v.radial(r - h);
            let (b, b1, b2) = v.radial(r + h);
            assert!((a - b).abs() < 1e-4);
            assert!((a1 - b1).abs() < 1e-4);
            assert!((a2 - b2).abs() < 1e-4);
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let (v, _, _) = standard(3);
        let mut rng = SampleRng::new(4);
        for _ in 0..1000 {
            let x = rng.log_radius_point(3, v.r1 * 1.001, 1e4);
            let h = 1e-4 * x.norm();
            let grad = v.grad(&x);
            let fd_grad = Vector::from_fn(3, |k, _| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                (v.value(&xp) - v.value(&xm)) / (2.0 * h)
            });
            assert!(crate::linalg::relative_vec_diff(&fd_grad, &grad, 1e-300) < 1e-5);
            let hess = v.hess(&x);
            let fd_hess = crate::linalg::jacobian_fd(|z| v.grad(z), &x, h);
            assert!(relative_max_diff(&fd_hess, &hess, 1e-300) < 1e-5);
        }
    }

    #[test]
    fn generic_generator_matches_closed_form() {
        let mut rng = SampleRng::new(5);
        for (d, m, eta, alpha) in [(2, 2.0, 1.0, 0.5), (3, 2.0, 1.0, 0.5), (3, 3.0, 1.5, 0.3), (4, 1.5, 0.4, 0.8)] {
            let v = LyapunovProfile::new(alpha, 1.0).unwrap();
            let p = ModelParams::new(d, m, eta);
            let b = DriftSpec::power(1.3, m);
            for _ in 0..500 {
                let x = rng.log_radius_point(d, v.r1, 1e5);
                let closed = v.lv_closed(&p, &b, &x).unwrap();
                let generic = v.lv_generic(&p, &b, &x);
                assert!((generic - closed).abs() <= 1e-6 * closed.abs(), "d={d} |x|={}", x.norm());
            }
        }
    }

    #[test]
    fn closed_form_d2_drops_dimension_term() {
        let (v, p, b) = standard(2);
        let r = E.powi(10);
        let lv = v.lv_closed(&p, &b, &vector(&[r, 0.0])).unwrap();
        let bracket = r - 0.5 * r * r / (2.0 * 10.0);
        assert!(bracket < 0.0);
        let expected = 0.5 * 10f64.powf(-0.5) * bracket;
        assert!((lv - expected).abs() < 1e-12 * expected.abs());
    }

    #[test]
    fn closed_form_is_radial() {
        let (v, p, b) = standard(3);
        let vals: Vec<f64> = scan_directions(3, 64)
            .iter()
            .map(|u| v.lv_closed(&p, &b, &(u * 17.0)).unwrap())
            .collect();
        for w in &vals {
            assert!((w - vals[0]).abs() <= 1e-12 * vals[0].abs());
        }
    }

    #[test]
    fn closed_form_rejects_inner_points() {
        let (v, p, b) = standard(2);
        assert!(v.lv_closed(&p, &b, &vector(&[2.0, 0.0])).is_err());
    }

    #[test]
    fn zero_drift_generator_is_negative() {
        let zero = DriftSpec::zero();
        for d in [2, 3] {
            let (v, p, _) = standard(d);
            for r in log_grid(v.r1, 1e6, 50) {
                let x = scan_directions(d, 1)[0].clone() * r;
                let lv = v.lv_generic(&p, &zero, &x);
                let l = r.ln();
                let expected = -0.5 * 0.5 * l.powf(-0.5) * r * r * ((d as f64 - 2.0) + 0.5 / l);
                assert!(lv < 0.0);
                assert!((lv - expected).abs() <= 1e-6 * expected.abs());
            }
        }
    }

    #[test]
    fn generator_vanishes_on_the_plateau() {
        let (v, p, b) = standard(2);
        assert_eq!(v.lv_generic(&p, &b, &vector(&[0.3, 1.2])), 0.0);
    }

    #[test]
    fn negativity_radius_d2() {
        let (v, p, b) = standard(2);
        let cert = v.negativity_radius(&p, &b).unwrap();
        assert!(!cert.negative_from_start);
        // bracket r - r²/(4 log r) vanishes where 4 log r = r
        let at = |r: f64| v.lv_closed_radial(&p, r, r);
        assert!(at(0.9 * cert.r_star) > 0.0);
        assert!(at(1.1 * cert.r_star) < 0.0);
        assert!((cert.r_star - 8.6131).abs() < 0.02, "{cert:?}");
    }

    #[test]
    fn negativity_fails_on_the_critical_exponent() {
        let v = LyapunovProfile::new(0.5, 1.0).unwrap();
        let p = ModelParams::new(2, 3.0, 1.0);
        let b = DriftSpec::power(1.0, 3.0);
        assert!(matches!(v.negativity_radius(&p, &b), Err(Error::Fit(_))));
    }

    #[test]
    fn stronger_drift_pushes_the_radius_out() {
        let (v, p, _) = standard(2);
        let r1 = v.negativity_radius(&p, &DriftSpec::power(1.0, 2.0)).unwrap().r_star;
        let r2 = v.negativity_radius(&p, &DriftSpec::power(2.0, 2.0)).unwrap().r_star;
        assert!(r2 > r1);
    }

    #[test]
    fn tail_supremum_decreases_to_minus_infinity() {
        for d in [2, 3] {
            let (v, p, b) = standard(d);
            let mut prev = f64::INFINITY;
            for k in 2..12 {
                let r = 10f64.powi(k);
                let s = v.tail_sup(&p, &b, r, 1e14, 200);
                assert!(s < prev);
                prev = s;
            }
            assert!(prev < -1e15, "{prev}");
        }
    }

    #[test]
    fn k_threshold_examples() {
        assert_eq!(k_threshold(1.0, 2.0, 1.0, 1.0).unwrap(), 2.0);
        assert_eq!(k_threshold(2.0, 2.0, 1.0, 1.0).unwrap(), 1.0);
        let mut prev = f64::INFINITY;
        for t in [0.1, 0.5, 1.0, 2.0, 10.0, 100.0] {
            let k = k_threshold(0.7, 1.5, 2.0, t).unwrap();
            assert!(k <= prev);
            prev = k;
        }
    }

    #[test]
    fn super_lyapunov_fit_passes_audit() {
        for d in [2, 3] {
            let (v, p, b) = standard(d);
            let fit = v.super_lyapunov_fit(&p, &b, 1.5, 1.0, 17).unwrap();
            assert!(fit.c_coef > 0.0 && fit.d0.is_finite(), "{fit:?}");
            assert!(fit.audit_passed, "{fit:?}");
        }
    }

    #[test]
    fn gamma_one_is_rejected() {
        let (v, p, b) = standard(2);
        assert!(matches!(v.super_lyapunov_fit(&p, &b, 1.0, 1.0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn doubling_kappa_weakens_the_fit() {
        let (v, p, b) = standard(2);
        let f1 = v.super_lyapunov_fit(&p, &b, 1.5, 1.0, 2).unwrap();
        let f2 = v.super_lyapunov_fit(&p, &DriftSpec::power(2.0, 2.0), 1.5, 1.0, 2).unwrap();
        assert!(f2.c_coef < f1.c_coef || f2.d0 > f1.d0);
        assert!(f2.audit_passed);
    }
}
