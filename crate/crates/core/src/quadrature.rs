//! Adaptive quadrature, improper-integral classification and bracketed root finding.

use gkquad::single::Integrator;
use gkquad::Tolerance;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-8 }
    }
}

impl Tolerances {
    pub fn tightened(self, factor: f64) -> Self {
        Self { abs: self.abs / factor, rel: self.rel / factor }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadValue {
    pub value: f64,
    pub abs_error: f64,
}

/// `∫_lo^hi f`, either bound may be infinite. `lo > hi` flips the sign.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerances) -> Result<QuadValue> {
    if lo == hi {
        return Ok(QuadValue { value: 0.0, abs_error: 0.0 });
    }
    if lo > hi {
        let v = integrate(f, hi, lo, tol)?;
        return Ok(QuadValue { value: -v.value, abs_error: v.abs_error });
    }
    let result = Integrator::new(f)
        .tolerance(Tolerance::AbsOrRel(tol.abs, tol.rel))
        .max_iters(2000)
        .run(lo..hi);
    match (result.estimate(), result.delta()) {
        (Ok(value), Ok(abs_error)) if value.is_finite() => Ok(QuadValue { value, abs_error }),
        (Ok(value), _) => Err(Error::Quadrature { lo, hi, reason: format!("non-finite value {value}") }),
        (Err(e), _) => Err(Error::Quadrature { lo, hi, reason: e.to_string() }),
    }
}

/// Verdict on `∫_0^∞ f` for a nonnegative integrand.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Improper {
    Finite { value: f64, cap: f64 },
    Infinite { cap: f64, capped_value: f64 },
    /// Increments changed sign, so doubling cannot decide.
    Indeterminate { cap: f64, capped_value: f64 },
}

impl Improper {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Improper::Finite { value, .. } => Some(value),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Improper::Finite { .. })
    }
}

/// Settings of the cap-doubling test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapDoubling {
    pub start: f64,
    pub max_cap: f64,
    /// Relative change below which a doubling counts as settled.
    pub threshold: f64,
    /// Consecutive settled doublings needed for a finite verdict.
    pub settled: usize,
}

impl Default for CapDoubling {
    fn default() -> Self {
        Self { start: 1.0, max_cap: 2f64.powi(500), threshold: 1e-6, settled: 3 }
    }
}

/// Classifies `∫_0^∞ f` by doubling the cap: finite once `settled` consecutive doublings
/// each change the capped value by less than `threshold` relatively. The finite value is
/// the full improper quadrature, not the capped one.
pub fn classify_improper<F: Fn(f64) -> f64>(f: F, tol: Tolerances, caps: CapDoubling) -> Result<Improper> {
    let mut cap = caps.start;
    let mut value = integrate(&f, 0.0, cap, tol)?.value;
    let mut streak = 0usize;
    let mut sign = 0.0f64;
    while cap < caps.max_cap {
        let inc = integrate(&f, cap, 2.0 * cap, tol)?.value;
        cap *= 2.0;
        value += inc;
        if inc != 0.0 {
            if sign != 0.0 && inc.signum() != sign {
                return Ok(Improper::Indeterminate { cap, capped_value: value });
            }
            sign = inc.signum();
        }
        if inc.abs() < caps.threshold * value.abs() {
            streak += 1;
            if streak >= caps.settled {
                let full = integrate(&f, 0.0, f64::INFINITY, tol)?.value;
                return Ok(Improper::Finite { value: full, cap });
            }
        } else {
            streak = 0;
        }
    }
    Ok(Improper::Infinite { cap, capped_value: value })
}

/// Root of `f` in `[lo, hi]` by Brent's method; `f(lo)` and `f(hi)` must differ in sign.
pub fn brent_root<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, eps: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]: f = ({flo}, {fhi})"
        )));
    }
    let mut conv = roots::SimpleConvergency { eps, max_iter: 500 };
    roots::find_root_brent(lo, hi, &f, &mut conv)
        .map_err(|e| Error::RootFinding(format!("{e:?} on [{lo}, {hi}]")))
}

/// Solves `f(x) = target` for increasing `f`, growing the bracket geometrically from `x_start`.
pub fn invert_increasing<F: Fn(f64) -> f64>(f: F, target: f64, x_start: f64, eps: f64) -> Result<f64> {
    let g = |x: f64| f(x) - target;
    let g0 = g(x_start);
    if g0 == 0.0 {
        return Ok(x_start);
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut near = x_start;
    for _ in 0..2000 {
        let far = x_start + dir * step;
        let gf = g(far);
        if gf.is_nan() {
            break;
        }
        if gf.signum() != g0.signum() || gf == 0.0 {
            let (lo, hi) = if dir > 0.0 { (near, far) } else { (far, near) };
            return brent_root(g, lo, hi, eps);
        }
        near = far;
        step *= 2.0;
        if !far.is_finite() {
            break;
        }
    }
    Err(Error::RootFinding(format!("could not bracket level {target} from {x_start}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn finite_and_infinite_ranges() {
        let tol = Tolerances::default();
        let v = integrate(|x| 1.0 / (1.0 + x * x), 0.0, 1.0, tol).unwrap();
        assert!((v.value - FRAC_PI_4).abs() < 1e-12);
        let v = integrate(|x| 1.0 / (1.0 + x * x), 0.0, f64::INFINITY, tol).unwrap();
        assert!((v.value - FRAC_PI_2).abs() < 1e-10);
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, tol).unwrap();
        assert!((v.value - 2.0).abs() < 1e-10);
        let v = integrate(|x| x, 1.0, 0.0, tol).unwrap();
        assert!((v.value + 0.5).abs() < 1e-14);
    }

    #[test]
    fn divergence_is_reported() {
        let err = integrate(|x| 1.0 / (1.0 + x), 0.0, f64::INFINITY, Tolerances::default());
        assert!(matches!(err, Err(Error::Quadrature { .. })));
    }

    #[test]
    fn cap_doubling_verdicts() {
        let tol = Tolerances::default();
        let caps = CapDoubling::default();
        let v = classify_improper(|z| 1.0 / (1.0 + z * z), tol, caps).unwrap();
        assert!((v.value().unwrap() - FRAC_PI_2).abs() < 1e-8);
        let v = classify_improper(|z: f64| (1.0 + z).powf(-1.5), tol, caps).unwrap();
        assert!((v.value().unwrap() - 2.0).abs() < 1e-8);
        let v = classify_improper(|z| 1.0 / (1.0 + z), tol, caps).unwrap();
        assert!(matches!(v, Improper::Infinite { .. }));
    }

    #[test]
    fn tightening_tolerances_barely_moves_values() {
        let f = |z: f64| (1.0 + z).powf(-1.5) + (-z).exp();
        let base = Tolerances::default();
        let a = integrate(f, 0.0, f64::INFINITY, base).unwrap().value;
        let b = integrate(f, 0.0, f64::INFINITY, base.tightened(100.0)).unwrap().value;
        assert!((a - b).abs() < 10.0 * base.rel * b.abs());
    }

    #[test]
    fn brent_and_inversion() {
        let r = brent_root(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(brent_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12).is_err());
        let x = invert_increasing(|x: f64| x.atan(), 1.0, 0.0, 1e-14).unwrap();
        assert!((x - 1f64.tan()).abs() < 1e-12);
        let x = invert_increasing(|x: f64| x.powi(3), -27.0, 5.0, 1e-13).unwrap();
        assert!((x + 3.0).abs() < 1e-10);
    }
}
