//! Small dense complex linear algebra helpers used throughout the crate.
//!
//! All matrices here are `nalgebra` dynamic matrices over `Complex<f64>`.
//! Potentials are Hermitian by contract, so spectral calculus (matrix
//! functions, principal inverse square roots, unitary phases) goes through the
//! Hermitian eigendecomposition.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Dense complex matrix type used for potentials, propagators and phases.
pub type CMatrix = DMatrix<Complex64>;
/// Dense complex vector.
pub type CVector = DVector<Complex64>;

/// `i` as a `Complex64`.
pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Complex one.
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest absolute entry of `m` (max norm).
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn fro_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermiticity residual `max |m - m*|` entrywise.
pub fn hermiticity_residual(m: &CMatrix) -> f64 {
    let mut r: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            r = r.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    r
}

/// Unitarity residual `max |m* m - 1|` entrywise.
pub fn unitarity_residual(m: &CMatrix) -> f64 {
    let n = m.ncols();
    let g = m.adjoint() * m;
    let mut r: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = if i == j { ONE } else { Complex64::new(0.0, 0.0) };
            r = r.max((g[(i, j)] - t).norm());
        }
    }
    r
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues (ascending) and
/// a unitary matrix of eigenvectors in matching column order.
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: CMatrix,
}

impl HermitianEig {
    /// Decompose `m`, which must be Hermitian up to roundoff. The residual is
    /// checked against a loose threshold to catch outright programming errors;
    /// tight Hermiticity is the caller's contract.
    ///
    /// The backend decomposition is verified by reconstruction: on matrices
    /// with degenerate eigenvalues it can return a unitary matrix that fails
    /// to diagonalize the input (observed at `|M - V L V*| ~ 0.2` on exactly
    /// two-fold degenerate complex Hermitian matrices).  When that happens
    /// the decomposition is redone with a cyclic Jacobi iteration, which is
    /// unconditionally stable for Hermitian input.
    pub fn new(m: &CMatrix) -> Result<Self> {
        let res = hermiticity_residual(m);
        let scale = max_abs(m).max(1.0);
        if res > 1e-8 * scale {
            return Err(CoreError::InvariantViolation(format!(
                "matrix is not Hermitian: residual {res:.3e} (scale {scale:.3e})"
            )));
        }
        let n = m.nrows();
        let se = m.clone().symmetric_eigen();
        let sorted = Self::sorted(se.eigenvalues.as_slice(), &se.eigenvectors);
        let tol = 32.0 * f64::EPSILON * scale * n as f64;
        if sorted.reconstruction_residual(m) <= tol {
            return Ok(sorted);
        }
        let (vals, vecs) = jacobi_hermitian(m);
        let redone = Self::sorted(vals.as_slice(), &vecs);
        let res = redone.reconstruction_residual(m);
        if res > tol {
            return Err(CoreError::InvariantViolation(format!(
                "eigendecomposition failed to converge: reconstruction residual {res:.3e}"
            )));
        }
        Ok(redone)
    }

    /// Assemble with eigenvalues ascending so downstream consumers see a
    /// deterministic order.
    fn sorted(values: &[f64], vectors: &CMatrix) -> Self {
        let n = values.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
        let mut vals = DVector::zeros(n);
        let mut vecs = CMatrix::zeros(n, n);
        for (k, &j) in idx.iter().enumerate() {
            vals[k] = values[j];
            vecs.set_column(k, &vectors.column(j));
        }
        HermitianEig { eigenvalues: vals, eigenvectors: vecs }
    }

    /// `max |M - V diag(lambda) V*|`.
    fn reconstruction_residual(&self, m: &CMatrix) -> f64 {
        let rec = self.apply(|l| Complex64::new(l, 0.0));
        max_abs(&(rec - m))
    }

    /// Apply a scalar function to the spectrum: `f(M) = V diag(f(lambda)) V*`.
    pub fn apply(&self, f: impl Fn(f64) -> Complex64) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for k in 0..n {
            let fk = f(self.eigenvalues[k]);
            for i in 0..n {
                scaled[(i, k)] *= fk;
            }
        }
        &scaled * self.eigenvectors.adjoint()
    }

    /// Smallest eigenvalue magnitude.
    pub fn min_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min)
    }
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Each rotation zeroes one off-diagonal pair with a complex Givens rotation;
/// sweeps repeat until every off-diagonal entry is at roundoff.  All updates
/// are unitary, so the accumulated eigenvector matrix is orthonormal and the
/// result diagonalizes degenerate clusters correctly (any orthonormal basis
/// of an eigenspace is a valid answer).  Quadratic convergence makes ~10
/// sweeps plenty for the small matrices used here.
fn jacobi_hermitian(m: &CMatrix) -> (DVector<f64>, CMatrix) {
    let n = m.nrows();
    let mut a = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let mut v = CMatrix::identity(n, n);
    let tol = f64::EPSILON * max_abs(&a).max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        let mut off: f64 = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[(p, q)].norm());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                let g = apq.norm();
                if g <= tol {
                    continue;
                }
                // Unitary plane rotation G with G[p][p] = G[q][q] = c,
                // G[p][q] = -s u, G[q][p] = s conj(u), chosen so that
                // (G* A G)[p][q] = 0; u is the phase of A[p][q].
                let u = apq / Complex64::new(g, 0.0);
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * g);
                let hyp = (1.0 + tau * tau).sqrt();
                let t = if tau >= 0.0 { -1.0 / (tau + hyp) } else { 1.0 / (-tau + hyp) };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let su = Complex64::new(s, 0.0) * u;
                let suc = su.conj();
                for k in 0..n {
                    let xp = a[(k, p)];
                    let xq = a[(k, q)];
                    a[(k, p)] = Complex64::new(c, 0.0) * xp + suc * xq;
                    a[(k, q)] = -su * xp + Complex64::new(c, 0.0) * xq;
                }
                for k in 0..n {
                    let xp = a[(p, k)];
                    let xq = a[(q, k)];
                    a[(p, k)] = Complex64::new(c, 0.0) * xp + su * xq;
                    a[(q, k)] = -suc * xp + Complex64::new(c, 0.0) * xq;
                }
                for k in 0..n {
                    let xp = v[(k, p)];
                    let xq = v[(k, q)];
                    v[(k, p)] = Complex64::new(c, 0.0) * xp + suc * xq;
                    v[(k, q)] = -su * xp + Complex64::new(c, 0.0) * xq;
                }
            }
        }
    }
    let vals = DVector::from_iterator(n, (0..n).map(|k| a[(k, k)].re));
    (vals, v)
}

/// `exp(i * H)` for Hermitian `H` (a unitary matrix).
pub fn unitary_exp_i(h: &CMatrix) -> Result<CMatrix> {
    let eig = HermitianEig::new(h)?;
    Ok(eig.apply(|l| Complex64::new(0.0, l).exp()))
}

/// Project a near-unitary matrix onto the unitary group via the polar
/// decomposition: `U (U* U)^(-1/2)`.
pub fn polar_project(u: &CMatrix) -> Result<CMatrix> {
    let g = u.adjoint() * u;
    let eig = HermitianEig::new(&g)?;
    if eig.min_abs_eigenvalue() < 1e-12 {
        return Err(CoreError::InvariantViolation(
            "polar projection of a (near-)singular matrix".into(),
        ));
    }
    let inv_sqrt = eig.apply(|l| Complex64::new(1.0 / l.sqrt(), 0.0));
    Ok(u * inv_sqrt)
}

/// Trace of a complex matrix.
pub fn trace(m: &CMatrix) -> Complex64 {
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..m.nrows().min(m.ncols()) {
        t += m[(i, i)];
    }
    t
}

/// `tr(a * b)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> Complex64 {
    let mut t = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            t += a[(i, k)] * b[(k, i)];
        }
    }
    t
}

/// Sum a slice in a fixed balanced-tree order. The order depends only on the
/// slice length, so results are bitwise reproducible regardless of how the
/// elements were produced (serial or parallel).
pub fn pairwise_sum(xs: &[Complex64]) -> Complex64 {
    match xs.len() {
        0 => Complex64::new(0.0, 0.0),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

/// Real-slice variant of [`pairwise_sum`].
pub fn pairwise_sum_f64(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum_f64(&xs[..mid]) + pairwise_sum_f64(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hermitian_eig_reconstructs_complex_matrix() {
        // A genuinely complex Hermitian matrix; reconstruction checks that the
        // backend handles the complex case, not only real symmetric input.
        let m = CMatrix::from_row_slice(
            3,
            3,
            &[
                c(2.0, 0.0), c(1.0, -0.5), c(0.0, 0.3),
                c(1.0, 0.5), c(-1.0, 0.0), c(0.2, 0.0),
                c(0.0, -0.3), c(0.2, 0.0), c(0.5, 0.0),
            ],
        );
        let eig = HermitianEig::new(&m).unwrap();
        let rec = eig.apply(|l| c(l, 0.0));
        assert!(max_abs(&(&rec - &m)) < 1e-12, "reconstruction failed");
        assert!(unitarity_residual(&eig.eigenvectors) < 1e-12);
        for k in 1..3 {
            assert!(eig.eigenvalues[k] >= eig.eigenvalues[k - 1]);
        }
    }

    #[test]
    fn unitary_exp_of_pauli_x() {
        // exp(i*theta*sigma1) = cos(theta) I + i sin(theta) sigma1.
        let theta = 0.7;
        let h = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(theta, 0.0), c(theta, 0.0), c(0.0, 0.0)]);
        let u = unitary_exp_i(&h).unwrap();
        assert!((u[(0, 0)] - c(theta.cos(), 0.0)).norm() < 1e-14);
        assert!((u[(0, 1)] - c(0.0, theta.sin())).norm() < 1e-14);
        assert!(unitarity_residual(&u) < 1e-14);
    }

    #[test]
    fn polar_projection_restores_unitarity() {
        let u0 = unitary_exp_i(&CMatrix::from_row_slice(
            2,
            2,
            &[c(0.3, 0.0), c(0.1, -0.2), c(0.1, 0.2), c(-0.4, 0.0)],
        ))
        .unwrap();
        // Perturb slightly off the unitary group.
        let mut u = u0.clone();
        u[(0, 0)] += c(1e-6, -2e-6);
        let p = polar_project(&u).unwrap();
        assert!(unitarity_residual(&p) < 1e-12);
        assert!(max_abs(&(&p - &u0)) < 1e-5);
    }

    #[test]
    fn pairwise_sum_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|k| (k as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        assert!((pairwise_sum_f64(&xs) - seq).abs() < 1e-9);
    }

    #[test]
    fn eig_handles_twofold_degenerate_spectra() {
        // Rotated diag(1, 1, -1, -1): every eigenvalue two-fold degenerate.
        // The nalgebra backend returns a unitary that does not diagonalize
        // such matrices; the reconstruction check must reroute to Jacobi.
        let h = CMatrix::from_row_slice(
            4,
            4,
            &[
                c(0.0, 0.0), c(0.4, -0.3), c(0.2, 0.1), c(-0.5, 0.0),
                c(0.4, 0.3), c(1.0, 0.0), c(0.0, -0.7), c(0.3, 0.2),
                c(0.2, -0.1), c(0.0, 0.7), c(-0.3, 0.0), c(0.1, -0.1),
                c(-0.5, 0.0), c(0.3, -0.2), c(0.1, 0.1), c(0.6, 0.0),
            ],
        );
        let rot = unitary_exp_i(&h).unwrap();
        let diag = CMatrix::from_diagonal(&CVector::from_vec(vec![
            c(1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0), c(-1.0, 0.0),
        ]));
        let m = &rot * diag * rot.adjoint();
        let eig = HermitianEig::new(&m).unwrap();
        let rec = eig.apply(|l| c(l, 0.0));
        assert!(max_abs(&(&rec - &m)) < 1e-13, "residual {:.3e}", max_abs(&(&rec - &m)));
        assert!(unitarity_residual(&eig.eigenvectors) < 1e-13);
        for k in 0..4 {
            let expect = if k < 2 { -1.0 } else { 1.0 };
            assert!((eig.eigenvalues[k] - expect).abs() < 1e-13);
        }
        // sign(M) must reproduce the rotated signature exactly.
        let sign = eig.apply(|l| c(if l >= 0.0 { 1.0 } else { -1.0 }, 0.0));
        assert!(max_abs(&(&sign - &m)) < 1e-13, "sign(M) != M for an involution");
    }

    #[test]
    fn jacobi_matches_backend_on_simple_spectra() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(29);
        for _ in 0..25 {
            let n = rng.gen_range(2..7);
            let mut a = CMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    a[(i, j)] = c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                }
            }
            let a = (&a + &a.adjoint()) * c(0.5, 0.0);
            let (vals, vecs) = jacobi_hermitian(&a);
            let jac = HermitianEig::sorted(vals.as_slice(), &vecs);
            let rec = jac.apply(|l| c(l, 0.0));
            assert!(max_abs(&(rec - &a)) < 1e-13);
            assert!(unitarity_residual(&jac.eigenvectors) < 1e-13);
            let reference = HermitianEig::new(&a).unwrap();
            for k in 0..n {
                assert!((jac.eigenvalues[k] - reference.eigenvalues[k]).abs() < 1e-12);
            }
        }
    }
}
