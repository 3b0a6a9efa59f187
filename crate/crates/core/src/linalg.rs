//! Small dense vector/matrix helpers on top of `nalgebra`'s dynamic types.
//!
//! Dimensions here are tiny (2 or 3 in practice) but only known at run time, so the
//! dynamically sized types are used throughout.

use nalgebra::{DMatrix, DVector};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub fn vector(components: &[f64]) -> Vector {
    Vector::from_column_slice(components)
}

/// Orthogonal projector `x xᵀ / |x|²` onto the line spanned by `x`; zero at the origin.
pub fn radial_projector(x: &Vector) -> Matrix {
    let r2 = x.norm_squared();
    if r2 == 0.0 {
        return Matrix::zeros(x.len(), x.len());
    }
    (x * x.transpose()) / r2
}

/// Largest absolute entry.
pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `max|a - b| / max(max|b|, floor)`.
pub fn relative_max_diff(a: &Matrix, b: &Matrix, floor: f64) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(floor)
}

pub fn relative_vec_diff(a: &Vector, b: &Vector, floor: f64) -> f64 {
    (a - b).amax() / b.amax().max(floor)
}

/// Smallest eigenvalue of a symmetric matrix together with its eigenvector.
pub fn min_symmetric_eigen(m: &Matrix) -> (f64, Vector) {
    let eig = m.clone().symmetric_eigen();
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, v)| if v < best.1 { (i, v) } else { best });
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Central-difference Jacobian of a vector field; column `k` is `∂f/∂x_k`.
pub fn jacobian_fd(f: impl Fn(&Vector) -> Vector, x: &Vector, h: f64) -> Matrix {
    let d = x.len();
    let mut jac = Matrix::zeros(d, d);
    for k in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[k] += h;
        xm[k] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(k, &col);
    }
    jac
}
