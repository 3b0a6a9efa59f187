//! Coefficients of `dX = b(X)dt + σ(X)∘dW`: the noise matrix σ with its inner
//! extension, the inverse and the diffusion matrix `σσᵀ` in closed form, and the Itô
//! drift `b̃`.
//!
//! σ is radial: `σ(x) = f(|x|) I + h(|x|) x xᵀ/|x|²`. For `|x| ≥ R`,
//! `f = |x|^{η+1}` and `h = -(1 + 1/η)|x|^{η+1}`. For `|x| ≤ R/2`, `f = √λ`, `h = 0`.
//! In between each profile is blended with the quintic smoothstep, which keeps the
//! profiles C² in the radius.

use serde::Serialize;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::linalg::{min_symmetric_eigen, radial_projector, Matrix, Vector};
use crate::params::ModelParams;
use crate::rng::SampleRng;

/// `s(u) = 6u⁵ - 15u⁴ + 10u³`, clamped to `[0, 1]`.
pub fn smoothstep5(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

/// Radial profiles `(f(r), h(r))` of σ.
pub fn radial_profiles(p: &ModelParams, r: f64) -> (f64, f64) {
    let outer = |r: f64| {
        let f = r.powf(p.eta + 1.0);
        (f, -(1.0 + 1.0 / p.eta) * f)
    };
    let half = 0.5 * p.r_switch;
    if r >= p.r_switch {
        outer(r)
    } else if r <= half {
        (p.lambda_floor.sqrt(), 0.0)
    } else {
        let s = smoothstep5((r - half) / half);
        let (fo, ho) = outer(r);
        ((1.0 - s) * p.lambda_floor.sqrt() + s * fo, s * ho)
    }
}

/// Eigenvalue of σ(x) along `x` (the tangential one is `f`).
pub fn radial_eigenvalue(p: &ModelParams, r: f64) -> f64 {
    let (f, h) = radial_profiles(p, r);
    f + h
}

/// Radius in `(R/2, R)` where the radial eigenvalue of the blend vanishes, if any.
pub fn degenerate_shell(p: &ModelParams) -> Option<f64> {
    let (mut lo, mut hi) = (0.5 * p.r_switch, p.r_switch);
    let (flo, fhi) = (radial_eigenvalue(p, lo), radial_eigenvalue(p, hi));
    if flo * fhi > 0.0 {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if radial_eigenvalue(p, mid) * flo > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

pub fn sigma(p: &ModelParams, x: &Vector) -> Matrix {
    let d = x.len();
    let (f, h) = radial_profiles(p, x.norm());
    let mut s = Matrix::identity(d, d) * f;
    if h != 0.0 {
        s += radial_projector(x) * h;
    }
    s
}

/// `|x|^{-η-1}(I - (η+1) x xᵀ/|x|²)`, the inverse of σ on `|x| ≥ R`.
pub fn sigma_inverse(p: &ModelParams, x: &Vector) -> Result<Matrix> {
    let r = x.norm();
    if r < p.r_switch {
        return Err(Error::domain(format!(
            "sigma_inverse needs |x| >= R = {}, got |x| = {r}",
            p.r_switch
        )));
    }
    let d = x.len();
    Ok((Matrix::identity(d, d) - radial_projector(x) * (p.eta + 1.0)) * r.powf(-p.eta - 1.0))
}

/// `σ(x)σ(x)ᵀ` as a literal product.
pub fn diffusion_matrix(p: &ModelParams, x: &Vector) -> Matrix {
    let s = sigma(p, x);
    &s * s.transpose()
}

/// Closed form `|x|^{2η+2}(I + (-1 + 1/η²) x xᵀ/|x|²)`, valid on `|x| ≥ R`.
pub fn diffusion_matrix_closed(p: &ModelParams, x: &Vector) -> Result<Matrix> {
    let r = x.norm();
    if r < p.r_switch {
        return Err(Error::domain(format!(
            "closed-form diffusion needs |x| >= R = {}, got {r}",
            p.r_switch
        )));
    }
    let d = x.len();
    let c = -1.0 + 1.0 / (p.eta * p.eta);
    Ok((Matrix::identity(d, d) + radial_projector(x) * c) * r.powf(2.0 * p.eta + 2.0))
}

/// Closed-form Stratonovich-to-Itô correction on `|x| ≥ R`:
/// `-½(1 + 1/η)(d - 1 - 1/η)|x|^{2η} x`.
pub fn ito_correction_closed(p: &ModelParams, x: &Vector) -> Result<Vector> {
    let r = x.norm();
    if r < p.r_switch {
        return Err(Error::domain(format!(
            "closed-form Ito correction needs |x| >= R = {}, got {r}",
            p.r_switch
        )));
    }
    let d = x.len() as f64;
    let coef = -0.5 * (1.0 + 1.0 / p.eta) * (d - 1.0 - 1.0 / p.eta);
    Ok(x * (coef * r.powf(2.0 * p.eta)))
}

/// `½ Σ_{jk} (∂σ_ij/∂x_k) σ_kj` with central differences of step `1e-5·max(1, |x|)`.
pub fn ito_correction_numeric(p: &ModelParams, x: &Vector) -> Vector {
    let d = x.len();
    let step = 1e-5 * x.norm().max(1.0);
    let s = sigma(p, x);
    let mut corr = Vector::zeros(d);
    let mut xp = x.clone();
    let mut xm = x.clone();
    for k in 0..d {
        xp[k] = x[k] + step;
        xm[k] = x[k] - step;
        let ds = (sigma(p, &xp) - sigma(p, &xm)) / (2.0 * step);
        xp[k] = x[k];
        xm[k] = x[k];
        for i in 0..d {
            for j in 0..d {
                corr[i] += ds[(i, j)] * s[(k, j)];
            }
        }
    }
    corr * 0.5
}

/// Itô-form drift `b̃ = b + ½ Σ (∂σ)σ`; closed form outside `B_R`, finite differences inside.
pub fn ito_drift(p: &ModelParams, b: &DriftSpec, x: &Vector) -> Vector {
    let corr = if x.norm() >= p.r_switch {
        ito_correction_closed(p, x).expect("outer region checked")
    } else {
        ito_correction_numeric(p, x)
    };
    b.eval(x) + corr
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticityReport {
    pub samples: usize,
    pub lambda: f64,
    /// Verdict threshold on the smallest eigenvalue (`0.9 λ`).
    pub threshold: f64,
    pub min_eigenvalue: f64,
    pub argmin: Vec<f64>,
    pub argmin_radius: f64,
    pub passed: bool,
    /// Shell where the radial eigenvalue of the blend vanishes, when it exists.
    pub degenerate_shell: Option<f64>,
}

/// Smallest eigenvalue of `σσᵀ` over `n_samples` uniform points of `B_R`.
pub fn ellipticity_scan(p: &ModelParams, n_samples: usize, seed: u64) -> EllipticityReport {
    let mut report = ellipticity_scan_with(
        |x| sigma(p, x),
        p.d,
        p.r_switch,
        p.lambda_floor,
        n_samples,
        seed,
    );
    report.degenerate_shell = degenerate_shell(p);
    report
}

pub fn ellipticity_scan_with(
    sigma_fn: impl Fn(&Vector) -> Matrix,
    d: usize,
    radius: f64,
    lambda: f64,
    n_samples: usize,
    seed: u64,
) -> EllipticityReport {
    let mut rng = SampleRng::new(seed);
    let mut min_eig = f64::INFINITY;
    let mut argmin = Vector::zeros(d);
    for _ in 0..n_samples.max(1) {
        let x = rng.ball_point(d, radius);
        let s = sigma_fn(&x);
        let (v, _) = min_symmetric_eigen(&(&s * s.transpose()));
        if v < min_eig {
            min_eig = v;
            argmin = x;
        }
    }
    let threshold = 0.9 * lambda;
    EllipticityReport {
        samples: n_samples.max(1),
        lambda,
        threshold,
        min_eigenvalue: min_eig,
        argmin_radius: argmin.norm(),
        argmin: argmin.iter().copied().collect(),
        passed: min_eig >= threshold,
        degenerate_shell: None,
    }
}
