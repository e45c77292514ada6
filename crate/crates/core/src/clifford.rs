//! Minimal Clifford representations on odd-dimensional Euclidean space.
//!
//! Generators `c^1..c^d` are anti-Hermitian `r x r` matrices with
//! `c^i c^j + c^j c^i = -2 delta_ij` and minimal rank `r = 2^((d-1)/2)`.
//! The signed full trace `kappa = tr(c^1 ... c^d)` equals
//! `(2i)^((d-1)/2) * (-i)^d`, and `tr(c^{a1} ... c^{ad})` equals
//! `kappa * eps(a)` for pairwise distinct indices. Those identities are what
//! the heat-trace prefactors consume.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::{trace, CMatrix};

fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// The Pauli matrices `(sigma1, sigma2, sigma3)`.
pub fn pauli() -> [CMatrix; 3] {
    let z = c64(0.0, 0.0);
    [
        CMatrix::from_row_slice(2, 2, &[z, c64(1.0, 0.0), c64(1.0, 0.0), z]),
        CMatrix::from_row_slice(2, 2, &[z, c64(0.0, -1.0), c64(0.0, 1.0), z]),
        CMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), z, z, c64(-1.0, 0.0)]),
    ]
}

/// A minimal-rank Clifford representation in odd dimension `d`.
#[derive(Clone)]
pub struct CliffordRep {
    pub d: usize,
    /// Representation rank, `2^((d-1)/2)`.
    pub r: usize,
    /// Anti-Hermitian generators `c^1..c^d`.
    pub generators: Vec<CMatrix>,
    /// `tr(c^1 c^2 ... c^d)`.
    pub kappa: Complex64,
}

/// `(2i)^((d-1)/2) * (-i)^d`, the signed full trace of a minimal rank
/// representation.
pub fn kappa_minimal(d: usize) -> Complex64 {
    let mut k = c64(1.0, 0.0);
    for _ in 0..(d - 1) / 2 {
        k *= c64(0.0, 2.0);
    }
    for _ in 0..d {
        k *= c64(0.0, -1.0);
    }
    k
}

/// Kronecker product of two complex matrices.
fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Build the minimal representation for odd `d`.
///
/// Construction: start from `c^1 = (-i)` in dimension one and step
/// `d -> d + 2` by tensoring the Hermitian counterparts `gamma^j = i c^j`
/// with Pauli matrices (`sigma1 (x) gamma^j`, plus `sigma2 (x) 1` and
/// `sigma3 (x) 1` for the two new directions). This reproduces
/// `c^j = -i sigma^j` for `d = 3` and keeps the signed trace equal to
/// [`kappa_minimal`] in every dimension, which the constructor asserts.
pub fn build_clifford(d: usize) -> Result<CliffordRep> {
    if d == 0 || d % 2 == 0 {
        return Err(CoreError::InvalidInput(format!("dimension must be odd, got {d}")));
    }
    // Hermitian generators gamma^j = i c^j with gamma^2 = +1.
    let mut gammas: Vec<CMatrix> = vec![CMatrix::from_row_slice(1, 1, &[c64(1.0, 0.0)])];
    let [s1, s2, s3] = pauli();
    while gammas.len() < d {
        let r = gammas[0].nrows();
        let id = CMatrix::identity(r, r);
        let mut next: Vec<CMatrix> = gammas.iter().map(|g| kron(&s1, g)).collect();
        next.push(kron(&s2, &id));
        next.push(kron(&s3, &id));
        gammas = next;
    }
    let generators: Vec<CMatrix> = gammas.iter().map(|g| g.map(|z| c64(0.0, -1.0) * z)).collect();
    let r = generators[0].nrows();

    let mut prod = CMatrix::identity(r, r);
    for c in &generators {
        prod = prod * c;
    }
    let kappa = trace(&prod);
    let expected = kappa_minimal(d);
    if (kappa - expected).norm() > 1e-12 * kappa.norm().max(1.0) {
        return Err(CoreError::InvariantViolation(format!(
            "signed trace {kappa} does not match the minimal-rank value {expected}"
        )));
    }
    Ok(CliffordRep { d, r, generators, kappa })
}

impl CliffordRep {
    /// Trace of the word `c^{w1} c^{w2} ... c^{wn}` (indices 1-based).
    /// The empty word yields `r`.
    pub fn word_trace(&self, word: &[usize]) -> Result<Complex64> {
        let mut prod = CMatrix::identity(self.r, self.r);
        for &w in word {
            if w == 0 || w > self.d {
                return Err(CoreError::InvalidInput(format!(
                    "generator index {w} out of range 1..={}",
                    self.d
                )));
            }
            prod = prod * &self.generators[w - 1];
        }
        Ok(trace(&prod))
    }

    /// Max-norm residuals of the defining identities, for diagnostics.
    pub fn residuals(&self) -> CliffordResiduals {
        let r = self.r;
        let mut anticommutation: f64 = 0.0;
        for i in 0..self.d {
            for j in 0..self.d {
                let mut ac = &self.generators[i] * &self.generators[j]
                    + &self.generators[j] * &self.generators[i];
                if i == j {
                    ac += CMatrix::identity(r, r).map(|z| z * c64(2.0, 0.0));
                }
                anticommutation = anticommutation.max(crate::linalg::max_abs(&ac));
            }
        }
        let anti_hermiticity = self
            .generators
            .iter()
            .map(|c| crate::linalg::max_abs(&(c.adjoint() + c)))
            .fold(0.0, f64::max);
        let kappa_residual = (self.kappa - kappa_minimal(self.d)).norm();
        CliffordResiduals { anticommutation, anti_hermiticity, kappa_residual }
    }
}

/// Residuals reported by [`CliffordRep::residuals`].
#[derive(Debug, Clone, serde::Serialize)]
pub struct CliffordResiduals {
    pub anticommutation: f64,
    pub anti_hermiticity: f64,
    pub kappa_residual: f64,
}

/// Levi-Civita symbol on `d` letters for 1-based `indices`.
///
/// Returns `0` on repeated indices, otherwise the sign of the permutation.
/// Errors if any index lies outside `1..=d` or the length differs from `d`.
pub fn levi_civita(indices: &[usize], d: usize) -> Result<i32> {
    if indices.len() != d {
        return Err(CoreError::InvalidInput(format!(
            "expected {d} indices, got {}",
            indices.len()
        )));
    }
    for &ix in indices {
        if ix == 0 || ix > d {
            return Err(CoreError::InvalidInput(format!("index {ix} out of range 1..={d}")));
        }
    }
    let mut seen = vec![false; d];
    for &ix in indices {
        if seen[ix - 1] {
            return Ok(0);
        }
        seen[ix - 1] = true;
    }
    let mut sign = 1i32;
    for i in 0..d {
        for j in (i + 1)..d {
            if indices[i] > indices[j] {
                sign = -sign;
            }
        }
    }
    Ok(sign)
}

/// All permutations of `0..n` with their signs, generated by Heap's algorithm
/// (each successive permutation differs by one transposition, so the sign
/// alternates deterministically).
pub fn permutations_with_sign(n: usize) -> Vec<(Vec<usize>, i32)> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity((1..=n).product());
    out.push((perm.clone(), 1i32));
    let mut c = vec![0usize; n];
    let mut sign = 1i32;
    let mut i = 0usize;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            sign = -sign;
            out.push((perm.clone(), sign));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}
