//! One-dimensional counterexample: with `b, σ > 0` Stratonovich noise cannot prevent
//! explosion. The transform `φ(x) = ∫_0^x 1/σ` turns the SDE into `dY = A(Y)dt + dW` with
//! `A = b/σ ∘ φ⁻¹ > 0`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::quadrature::{classify_improper, integrate, invert_increasing, CapDoubling, Improper, Tolerances};
use crate::rng::PathNoise;

/// A named scalar map.
#[derive(Clone)]
pub struct ScalarFn {
    name: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.name)
    }
}

impl ScalarFn {
    pub fn new<F: Fn(f64) -> f64 + Send + Sync + 'static>(name: impl Into<String>, f: F) -> Self {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, z: f64) -> f64 {
        (self.f)(z)
    }

    pub const PRESETS: [&'static str; 5] = ["1", "1+z^2", "1+|z|", "(1+|z|)^1.5", "exp(z)"];

    /// Built-in maps by name: `1`, `1+z^2`, `1+|z|`, `(1+|z|)^1.5`, `exp(z)`.
    pub fn preset(name: &str) -> Result<Self> {
        let f: ScalarFn = match name.replace(' ', "").as_str() {
            "1" => Self::new("1", |_| 1.0),
            "1+z^2" => Self::new("1+z^2", |z| 1.0 + z * z),
            "1+|z|" => Self::new("1+|z|", |z: f64| 1.0 + z.abs()),
            "(1+|z|)^1.5" => Self::new("(1+|z|)^1.5", |z: f64| (1.0 + z.abs()).powf(1.5)),
            "exp(z)" => Self::new("exp(z)", f64::exp),
            other => {
                return Err(Error::Config(format!(
                    "unknown scalar map '{other}', expected one of {:?}",
                    Self::PRESETS
                )))
            }
        };
        Ok(f)
    }
}

/// Scalar SDE `dX = b(X)dt + σ(X)∘dW` with `b, σ > 0`.
#[derive(Debug, Clone)]
pub struct ScalarModel {
    pub b: ScalarFn,
    pub sigma: ScalarFn,
    pub x0: f64,
    pub tol: Tolerances,
    pub caps: CapDoubling,
}

impl ScalarModel {
    pub fn new(b: ScalarFn, sigma: ScalarFn, x0: f64) -> Self {
        Self { b, sigma, x0, tol: Tolerances::default(), caps: CapDoubling::default() }
    }

    /// Checks `b > 0` and `σ > 0` on a dense grid (uniform on `[-100, 100]` plus
    /// log-spaced magnitudes up to `1e12`).
    pub fn positivity_audit(&self) -> Result<()> {
        let mut grid: Vec<f64> = (0..=20_000).map(|i| -100.0 + 0.01 * i as f64).collect();
        for k in 0..=280 {
            let z = 10f64.powf(2.0 + 0.05 * k as f64);
            grid.push(z);
            grid.push(-z);
        }
        grid.push(self.x0);
        for z in grid {
            let (b, s) = (self.b.eval(z), self.sigma.eval(z));
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::InvalidParams(format!("b({z}) = {b} is not positive")));
            }
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParams(format!("sigma({z}) = {s} is not positive")));
            }
        }
        Ok(())
    }
}

/// `B(x) = ∫_0^x 1/b`.
pub fn b_antiderivative(model: &ScalarModel, x: f64) -> Result<f64> {
    let b = &model.b;
    Ok(integrate(|z| 1.0 / b.eval(z), 0.0, x, model.tol)?.value)
}

/// `∫_0^∞ 1/b`: finite iff the deterministic flow explodes.
pub fn explosion_criterion(model: &ScalarModel) -> Result<Improper> {
    let b = &model.b;
    classify_improper(|z| 1.0 / b.eval(z), model.tol, model.caps)
}

/// Explosion time `B(∞) − B(x0)` of the ODE, if finite.
pub fn ode_explosion_time(model: &ScalarModel) -> Result<Option<f64>> {
    match explosion_criterion(model)? {
        Improper::Finite { value, .. } => Ok(Some(value - b_antiderivative(model, model.x0)?)),
        _ => Ok(None),
    }
}

/// `x(t) = B⁻¹(B(x0) + t)`.
pub fn ode_solution_1d(model: &ScalarModel, t: f64) -> Result<f64> {
    let target = b_antiderivative(model, model.x0)? + t;
    if let Improper::Finite { value, .. } = explosion_criterion(model)? {
        if target >= value {
            return Err(Error::domain(format!(
                "t = {t} is at or past the explosion time {}",
                value - (target - t)
            )));
        }
    }
    invert_increasing(
        |x| b_antiderivative(model, x).unwrap_or(f64::NAN),
        target,
        model.x0,
        1e-13,
    )
}

/// `φ(x) = ∫_0^x 1/σ`.
pub fn phi_1d(model: &ScalarModel, x: f64) -> Result<f64> {
    let s = &model.sigma;
    Ok(integrate(|z| 1.0 / s.eval(z), 0.0, x, model.tol)?.value)
}

/// `φ(∞)`.
pub fn phi_limit(model: &ScalarModel) -> Result<Improper> {
    let s = &model.sigma;
    classify_improper(|z| 1.0 / s.eval(z), model.tol, model.caps)
}

/// `−φ(−∞)`.
pub fn phi_limit_negative(model: &ScalarModel) -> Result<Improper> {
    let s = &model.sigma;
    classify_improper(|z| 1.0 / s.eval(-z), model.tol, model.caps)
}

/// `φ⁻¹(y)`.
pub fn phi_inverse(model: &ScalarModel, y: f64) -> Result<f64> {
    let upper = phi_limit(model)?.value();
    let lower = phi_limit_negative(model)?.value().map(|v| -v);
    if upper.is_some_and(|u| y >= u) || lower.is_some_and(|l| y <= l) {
        return Err(Error::domain(format!(
            "y = {y} is outside the image ({lower:?}, {upper:?}) of phi"
        )));
    }
    invert_increasing(|x| phi_1d(model, x).unwrap_or(f64::NAN), y, 0.0, 1e-14)
}

/// `A(y) = b(φ⁻¹(y)) / σ(φ⁻¹(y))`.
pub fn a_drift(model: &ScalarModel, y: f64) -> Result<f64> {
    let x = phi_inverse(model, y)?;
    Ok(model.b.eval(x) / model.sigma.eval(x))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FellerReport {
    /// `2∫_0^∞∫_0^∞ exp(−2∫_y^{y+z} A) dz dy`.
    pub feller: Improper,
    /// `∫_0^∞ 1/A`.
    pub comparison: Improper,
    /// Whether `feller ≤ comparison` up to quadrature tolerance (when both are finite).
    pub inequality_holds: Option<bool>,
}

/// Cap-doubling settings for the outer Feller integral.
pub fn feller_caps() -> CapDoubling {
    CapDoubling { max_cap: 2f64.powi(60), ..CapDoubling::default() }
}

/// Evaluates both sides of the Feller-test inequality for the `φ(∞) = ∞` branch.
///
/// With `y = φ(x)`, `w = φ⁻¹(y+z)` the double integral becomes
/// `2∫_0^∞ σ(x)⁻¹ ∫_x^∞ exp(−2∫_x^w b/σ²) σ(w)⁻¹ dw dx` and `∫ 1/A dy = ∫ 1/b dx`,
/// so no inversion of φ is needed. The inner exponent is integrated directly.
pub fn feller_integral(model: &ScalarModel) -> Result<FellerReport> {
    if phi_limit(model)?.is_finite() {
        return Err(Error::precondition("the Feller integral is used in the branch phi(inf) = inf"));
    }
    let tol = model.tol;
    let b = &model.b;
    let s = &model.sigma;
    let rate = |z: f64| b.eval(z) / (s.eval(z) * s.eval(z));
    let inner = |x: f64| -> f64 { feller_inner(&rate, &|z| s.eval(z), x, tol).unwrap_or(f64::NAN) };
    let outer = |x: f64| 2.0 * inner(x) / s.eval(x);
    let feller = classify_improper(outer, tol, feller_caps())?;
    let comparison = explosion_criterion(model)?;
    let inequality_holds = match (feller.value(), comparison.value()) {
        (Some(f), Some(c)) => Some(f <= c + 10.0 * (tol.abs + tol.rel * c.abs())),
        _ => None,
    };
    Ok(FellerReport { feller, comparison, inequality_holds })
}

/// `∫_x^∞ exp(−2∫_x^w rate) σ(w)⁻¹ dw` over doubling panels in the local coordinate
/// `v = w − x`, accumulating the exponent panel by panel.
fn feller_inner(
    rate: &dyn Fn(f64) -> f64,
    sigma: &dyn Fn(f64) -> f64,
    x: f64,
    tol: Tolerances,
) -> Result<f64> {
    let ell = 1.0 / rate(x);
    let mut total = 0.0;
    let mut exponent = 0.0;
    let mut a = 0.0;
    for k in 0..200 {
        let b = ell * (2f64.powi(k + 1) - 1.0);
        let base = exponent;
        let piece = integrate(
            |v: f64| {
                let g = integrate(|t| rate(x + t), a, v, tol).map(|q| q.value).unwrap_or(f64::NAN);
                (-2.0 * (base + g)).exp() / sigma(x + v)
            },
            a,
            b,
            tol,
        )?
        .value;
        total += piece;
        exponent += integrate(|t| rate(x + t), a, b, tol)?.value;
        a = b;
        if 2.0 * exponent > 60.0 && piece <= 1e-15 * total {
            return Ok(total);
        }
    }
    Err(Error::Quadrature { lo: x, hi: x + a, reason: "inner Feller integral did not settle".into() })
}

/// Branch of the explosion argument.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `φ(∞) < ∞`: Y reaches `φ(∞)` in finite time.
    FiniteImage,
    /// `φ(∞) = ∞`: explosion is proxied by Y reaching a level `L`.
    InfiniteImage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mc1dConfig {
    pub n_paths: usize,
    pub dt: f64,
    pub checkpoints: Vec<f64>,
    pub seed: u64,
    /// Proxy level `L` in Y-coordinates for the infinite branch.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Explosion is declared at `φ(∞) − eps` in the finite branch.
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_level() -> f64 {
    1e3
}

fn default_eps() -> f64 {
    1e-8
}

impl Mc1dConfig {
    pub fn new(n_paths: usize, dt: f64, checkpoints: Vec<f64>, seed: u64) -> Self {
        Self { n_paths, dt, checkpoints, seed, level: default_level(), eps: default_eps() }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 || !(self.dt > 0.0) || self.checkpoints.is_empty() {
            return Err(Error::InvalidParams("need n_paths >= 1, dt > 0 and checkpoints".into()));
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1]) || self.checkpoints[0] <= 0.0 {
            return Err(Error::InvalidParams("checkpoints must be positive and increasing".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Mc1dReport {
    pub branch: Branch,
    pub y0: f64,
    /// Upper exit level (`φ(∞) − eps` or `L`).
    pub upper_level: f64,
    /// Lower exit level (`φ(−∞) + eps`) when φ(−∞) is finite.
    pub lower_level: Option<f64>,
    pub checkpoints: Vec<f64>,
    /// Fraction of paths exited through either end by each checkpoint.
    pub fraction: Vec<f64>,
    pub fraction_up: Vec<f64>,
    pub fraction_down: Vec<f64>,
    /// Upward fractions at `10 L` (infinite branch only).
    pub fraction_up_10l: Option<Vec<f64>>,
    pub n_paths: usize,
}

/// First passage of `dY = A(Y)dt + dW` through `upper` levels (sorted increasing) or
/// below `lower`, by Euler steps of size `dt`. Returns per path the hit time of each
/// upper level and of the lower one.
#[allow(clippy::too_many_arguments)]
pub fn first_passage_mc<A: Fn(f64) -> f64 + Sync>(
    a: A,
    y0: f64,
    upper: &[f64],
    lower: Option<f64>,
    t_max: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Vec<(Vec<Option<f64>>, Option<f64>)> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(|id| {
            let mut noise = PathNoise::new(seed, id);
            let mut z = [0.0f64];
            let mut hits = vec![None; upper.len()];
            let mut next_level = 0usize;
            let mut y = y0;
            let mut t = 0.0;
            let mut step = 0u64;
            let sq = dt.sqrt();
            while t < t_max && next_level < upper.len() {
                noise.fill(step, &mut z);
                y += a(y) * dt + sq * z[0];
                step += 1;
                t = step as f64 * dt;
                while next_level < upper.len() && y >= upper[next_level] {
                    hits[next_level] = Some(t);
                    next_level += 1;
                }
                if lower.is_some_and(|l| y <= l) {
                    return (hits, Some(t));
                }
            }
            (hits, None)
        })
        .collect()
}

/// Tabulated `A` on an adaptive grid, built by integrating `dx/dy = σ(x)` with RK4.
#[derive(Debug, Clone)]
pub struct ATable {
    ys: Vec<f64>,
    values: Vec<f64>,
}

impl ATable {
    /// Covers `[y_lo, y_hi]` (clipped where `|x|` exceeds `1e12`).
    pub fn build(model: &ScalarModel, y_lo: f64, y_hi: f64) -> Result<Self> {
        let y_start = phi_1d(model, model.x0)?;
        let s = |x: f64| model.sigma.eval(x);
        let a = |x: f64| model.b.eval(x) / model.sigma.eval(x);
        let sweep = |dir: f64, y_end: f64| {
            let mut out = Vec::new();
            let (mut y, mut x) = (y_start, model.x0);
            while dir * (y_end - y) > 0.0 && x.abs() < 1e12 {
                let h = (1e-4 * x.abs().max(1.0) / s(x))
                    .min(1e-3 * (y - y_start).abs().max(1.0))
                    .min(dir * (y_end - y));
                let k1 = s(x);
                let k2 = s(x + 0.5 * dir * h * k1);
                let k3 = s(x + 0.5 * dir * h * k2);
                let k4 = s(x + dir * h * k3);
                x += dir * h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
                y += dir * h;
                if !x.is_finite() {
                    break;
                }
                out.push((y, a(x)));
            }
            out
        };
        let mut below = sweep(-1.0, y_lo);
        below.reverse();
        let above = sweep(1.0, y_hi);
        let mut ys = Vec::with_capacity(below.len() + above.len() + 1);
        let mut values = Vec::with_capacity(ys.capacity());
        for (y, v) in below.into_iter().chain(std::iter::once((y_start, a(model.x0)))).chain(above) {
            ys.push(y);
            values.push(v);
        }
        Ok(Self { ys, values })
    }

    /// Linear interpolation, constant beyond the table.
    pub fn eval(&self, y: f64) -> f64 {
        let i = self.ys.partition_point(|&v| v < y);
        if i == 0 {
            return self.values[0];
        }
        if i >= self.ys.len() {
            return *self.values.last().unwrap();
        }
        let (y0, y1) = (self.ys[i - 1], self.ys[i]);
        let w = (y - y0) / (y1 - y0);
        self.values[i - 1] * (1.0 - w) + self.values[i] * w
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }
}

fn fractions(hits: impl Iterator<Item = Option<f64>> + Clone, checkpoints: &[f64], n: usize) -> Vec<f64> {
    checkpoints
        .iter()
        .map(|&c| hits.clone().filter(|h| h.is_some_and(|t| t <= c + 1e-12)).count() as f64 / n as f64)
        .collect()
}

/// Monte Carlo explosion fractions of the scalar SDE, simulated in Y-coordinates.
pub fn explosion_mc_1d(model: &ScalarModel, cfg: &Mc1dConfig) -> Result<Mc1dReport> {
    cfg.validate()?;
    model.positivity_audit()?;
    let y0 = phi_1d(model, model.x0)?;
    let up = phi_limit(model)?;
    let down = phi_limit_negative(model)?;
    let (branch, uppers) = match up {
        Improper::Finite { value, .. } => (Branch::FiniteImage, vec![value - cfg.eps]),
        _ => (Branch::InfiniteImage, vec![cfg.level, 10.0 * cfg.level]),
    };
    let lower = down.value().map(|v| -v + cfg.eps);
    let t_max = *cfg.checkpoints.last().unwrap();
    let reach = 10.0 + 10.0 * t_max.sqrt();
    let y_hi = *uppers.last().unwrap() + 1.0;
    let y_lo = lower.map_or(y0 - reach, |l| l - 1.0);
    let table = ATable::build(model, y_lo, y_hi)?;
    let runs = first_passage_mc(|y| table.eval(y), y0, &uppers, lower, t_max, cfg.dt, cfg.n_paths, cfg.seed);
    let n = cfg.n_paths;
    let fraction_up = fractions(runs.iter().map(|r| r.0[0]), &cfg.checkpoints, n);
    let fraction_down = fractions(runs.iter().map(|r| r.1), &cfg.checkpoints, n);
    let first = runs.iter().map(|r| match (r.0[0], r.1) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    });
    let fraction = fractions(first, &cfg.checkpoints, n);
    let fraction_up_10l = (branch == Branch::InfiniteImage)
        .then(|| fractions(runs.iter().map(|r| r.0[1]), &cfg.checkpoints, n));
    Ok(Mc1dReport {
        branch,
        y0,
        upper_level: uppers[0],
        lower_level: lower,
        checkpoints: cfg.checkpoints.clone(),
        fraction,
        fraction_up,
        fraction_down,
        fraction_up_10l,
        n_paths: n,
    })
}

/// `P(τ ≤ t)` for the first passage of `μt + W_t` to level `a > 0`.
pub fn inverse_gaussian_cdf(level: f64, drift: f64, t: f64) -> f64 {
    let n = Normal::standard();
    let st = t.sqrt();
    n.cdf((drift * t - level) / st) + (2.0 * drift * level).exp() * n.cdf((-level - drift * t) / st)
}

/// `P(max_{s≤t} W_s ≥ a) = 2(1 − Φ(a/√t))`.
pub fn reflection_hitting_probability(level: f64, t: f64) -> f64 {
    2.0 * (1.0 - Normal::standard().cdf(level / t.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn preset(name: &str) -> ScalarFn {
        ScalarFn::preset(name).unwrap()
    }

    fn tan_model() -> ScalarModel {
        ScalarModel::new(preset("1+z^2"), preset("1+z^2"), 0.0)
    }

    #[test]
    fn antiderivative_examples() {
        let m = ScalarModel::new(preset("1+z^2"), preset("1"), 0.0);
        for x in [-3.0, 0.5, 2.0, 40.0] {
            assert!((b_antiderivative(&m, x).unwrap() - f64::atan(x)).abs() < 1e-12);
        }
        let v = explosion_criterion(&m).unwrap().value().unwrap();
        assert!((v - FRAC_PI_2).abs() < 1e-10);
        let lin = ScalarModel::new(preset("1"), preset("1"), 0.0);
        assert!((b_antiderivative(&lin, 3.7).unwrap() - 3.7).abs() < 1e-14);
        let mut prev = f64::NEG_INFINITY;
        for i in -50..50 {
            let v = b_antiderivative(&m, 0.3 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn explosion_criterion_examples() {
        let lin = ScalarModel::new(preset("1+|z|"), preset("1"), 0.0);
        assert!(matches!(explosion_criterion(&lin).unwrap(), Improper::Infinite { .. }));
        let p = ScalarModel::new(preset("(1+|z|)^1.5"), preset("1"), 0.0);
        assert!((explosion_criterion(&p).unwrap().value().unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn ode_solution_is_tan() {
        let m = tan_model();
        for t in [0.1, 1.0, 1.5] {
            let x = ode_solution_1d(&m, t).unwrap();
            assert!((x - t.tan()).abs() <= 1e-9 * t.tan().max(1.0), "t={t}: {x}");
        }
        assert!(ode_solution_1d(&m, FRAC_PI_2).is_err());
        assert!((ode_explosion_time(&m).unwrap().unwrap() - FRAC_PI_2).abs() < 1e-10);
        let lin = ScalarModel::new(preset("1"), preset("1"), 0.0);
        assert!((ode_solution_1d(&lin, 5.0).unwrap() - 5.0).abs() < 1e-9);
        assert!(ode_explosion_time(&lin).unwrap().is_none());
    }

    fn rk4_oracle(b: &ScalarFn, x0: f64, t: f64) -> f64 {
        let n = 200_000;
        let h = t / n as f64;
        let mut x = x0;
        for _ in 0..n {
            let k1 = b.eval(x);
            let k2 = b.eval(x + 0.5 * h * k1);
            let k3 = b.eval(x + 0.5 * h * k2);
            let k4 = b.eval(x + h * k3);
            x += h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        }
        x
    }

    #[test]
    fn ode_solution_matches_an_independent_integration() {
        for (b, x0) in [("1+z^2", 0.0), ("(1+|z|)^1.5", 0.5), ("exp(z)", -1.0)] {
            let m = ScalarModel::new(preset(b), preset("1"), x0);
            let t_star = ode_explosion_time(&m).unwrap().unwrap();
            for frac in [0.3, 0.7, 0.99] {
                let t = frac * t_star;
                let x = ode_solution_1d(&m, t).unwrap();
                let oracle = rk4_oracle(&m.b, x0, t);
                assert!((x - oracle).abs() <= 1e-6 * oracle.abs().max(1.0), "{b} t={t}: {x} vs {oracle}");
            }
        }
    }

    #[test]
    fn phi_examples() {
        let m = tan_model();
        assert!((phi_1d(&m, 2.0).unwrap() - 2f64.atan()).abs() < 1e-12);
        assert!((phi_limit(&m).unwrap().value().unwrap() - FRAC_PI_2).abs() < 1e-10);
        let flat = ScalarModel::new(preset("1+z^2"), preset("1"), 0.0);
        assert!((phi_1d(&flat, -4.2).unwrap() + 4.2).abs() < 1e-14);
        assert!(matches!(phi_limit(&flat).unwrap(), Improper::Infinite { .. }));
    }

    #[test]
    fn a_drift_examples() {
        let m = tan_model();
        for y in [-1.5, -0.3, 0.0, 0.8, 1.5] {
            assert!((a_drift(&m, y).unwrap() - 1.0).abs() < 1e-9);
        }
        assert!(a_drift(&m, 1.6).is_err());
        let flat = ScalarModel::new(preset("1+z^2"), preset("1"), 0.0);
        for y in [-2.0, 0.5, 3.0] {
            assert!((a_drift(&flat, y).unwrap() - (1.0 + y * y)).abs() < 1e-8);
        }
        let mixed = ScalarModel::new(preset("exp(z)"), preset("1+|z|"), 0.0);
        for i in -20..20 {
            assert!(a_drift(&mixed, 0.25 * i as f64).unwrap() > 0.0);
        }
    }

    #[test]
    fn a_table_matches_direct_inversion() {
        let mixed = ScalarModel::new(preset("exp(z)"), preset("1+|z|"), 0.3);
        let table = ATable::build(&mixed, -5.0, 5.0).unwrap();
        for y in [-4.0, -1.0, 0.0, 0.7, 3.3] {
            let direct = a_drift(&mixed, y).unwrap();
            assert!((table.eval(y) - direct).abs() < 1e-4 * direct.max(1.0), "y={y}");
        }
    }

    #[test]
    fn feller_branch_example() {
        let m = ScalarModel::new(preset("1+z^2"), preset("1"), 0.0);
        let rep = feller_integral(&m).unwrap();
        let c = rep.comparison.value().unwrap();
        assert!((c - FRAC_PI_2).abs() < 1e-8);
        let f = rep.feller.value().expect("finite Feller value");
        assert!(f <= FRAC_PI_2 + 1e-6 && f > 0.0, "{f}");
        assert_eq!(rep.inequality_holds, Some(true));
        assert!(feller_integral(&tan_model()).is_err());
    }

    #[test]
    fn feller_diverges_for_unit_a() {
        let m = ScalarModel::new(preset("1"), preset("1"), 0.0);
        let rep = feller_integral(&m).unwrap();
        match rep.feller {
            // A ≡ 1: the outer integrand is identically 1, so the capped value equals the cap
            Improper::Infinite { cap, capped_value } => assert!((capped_value - cap).abs() < 1e-6 * cap),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oracles_are_consistent() {
        // drift 0 reduces the inverse Gaussian law to the reflection principle
        for (a, t) in [(0.5, 1.0), (2.0, 0.3)] {
            assert!((inverse_gaussian_cdf(a, 0.0, t) - reflection_hitting_probability(a, t)).abs() < 1e-14);
        }
        assert!(inverse_gaussian_cdf(FRAC_PI_2, 1.0, 10.0) >= 0.999);
    }

    #[test]
    fn driftless_passage_matches_reflection() {
        let runs = first_passage_mc(|_| 0.0, 0.0, &[1.0], None, 1.0, 1e-4, 4000, 21);
        let frac = runs.iter().filter(|r| r.0[0].is_some()).count() as f64 / 4000.0;
        let oracle = reflection_hitting_probability(1.0, 1.0);
        assert!((frac - oracle).abs() < 0.03, "{frac} vs {oracle}");
    }

    #[test]
    fn mc_fractions_grow_with_time() {
        let cfg = Mc1dConfig::new(400, 1e-3, vec![0.25, 0.5, 1.0, 2.0], 5);
        let rep = explosion_mc_1d(&tan_model(), &cfg).unwrap();
        assert_eq!(rep.branch, Branch::FiniteImage);
        assert!(rep.fraction.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.fraction_up.windows(2).all(|w| w[0] <= w[1]));
        let flat = ScalarModel::new(preset("1+z^2"), preset("1"), 0.0);
        let rep = explosion_mc_1d(&flat, &Mc1dConfig::new(200, 1e-3, vec![1.0, 3.0], 5)).unwrap();
        assert_eq!(rep.branch, Branch::InfiniteImage);
        let tenfold = rep.fraction_up_10l.unwrap();
        assert!(tenfold.iter().zip(&rep.fraction_up).all(|(a, b)| a <= b));
    }

    #[test]
    fn positivity_audit_rejects_sign_changes() {
        let bad = ScalarModel::new(ScalarFn::new("z", |z| z), preset("1"), 0.0);
        assert!(bad.positivity_audit().is_err());
        assert!(tan_model().positivity_audit().is_ok());
        assert!(ScalarFn::preset("z^3").is_err());
    }
}
