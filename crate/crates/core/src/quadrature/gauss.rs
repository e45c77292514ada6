//! One-dimensional Gauss rules via the Golub-Welsch eigenvalue method.
//!
//! Only the symmetric Jacobi family `w(x) = (1 - x^2)^alpha` on `[-1, 1]` is
//! needed: `alpha = 0` (Legendre) for flat radial panels and half-integer
//! `alpha` for the latitude weight that appears when product rules on spheres
//! are built recursively.

use nalgebra::DMatrix;

use crate::error::{CoreError, Result};

/// `Gamma(n/2)` for positive integer `n`, exact up to f64 arithmetic.
pub fn gamma_half(n: u32) -> f64 {
    match n {
        0 => f64::INFINITY,
        1 => std::f64::consts::PI.sqrt(),
        2 => 1.0,
        _ => (n as f64 / 2.0 - 1.0) * gamma_half(n - 2),
    }
}

/// Surface area of the unit sphere `S^(d-1)` in `R^d`.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as u32)
}

/// Nodes (ascending) and weights of the `n`-point Gauss rule for the weight
/// `(1 - x^2)^alpha` on `[-1, 1]`. `alpha` must be a non-negative multiple of
/// one half, passed as `alpha_half_units = 2 * alpha`.
pub fn gauss_gegenbauer(n: usize, alpha_half_units: u32) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(CoreError::InvalidInput("gauss rule needs at least one node".into()));
    }
    let alpha = alpha_half_units as f64 / 2.0;
    // Zeroth moment: integral of (1-x^2)^alpha over [-1,1].
    let mu0 = std::f64::consts::PI.sqrt() * gamma_half(alpha_half_units + 2)
        / gamma_half(alpha_half_units + 3);
    // Symmetric-weight Jacobi matrix: zero diagonal, off-diagonal sqrt(beta_k)
    // with beta_k = k (k + 2 alpha) / ((2(k + alpha))^2 - 1).
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let beta = kf * (kf + 2.0 * alpha) / ((2.0 * (kf + alpha)).powi(2) - 1.0);
        let b = beta.sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = eig.eigenvalues[k];
            let v0 = eig.eigenvectors[(0, k)];
            (x, mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    Ok(pairs.into_iter().unzip())
}

/// `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    gauss_gegenbauer(n, 0)
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let (xs, ws) = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    Ok((
        xs.iter().map(|x| mid + half * x).collect(),
        ws.iter().map(|w| w * half).collect(),
    ))
}
