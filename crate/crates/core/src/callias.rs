//! Surface-integral index of a potential field.
//!
//! For an odd dimension `d` and a Hermitian field `A` that is invertible
//! outside a compact set, the index of the associated supersymmetric operator
//! localizes on a large sphere `S_R`.  With `U(x) = sign(A(x))` (spectral
//! sign, a Hermitian involution) and an oriented orthonormal tangent frame
//! `tau_1 .. tau_{d-1}` at each surface point, the index equals
//!
//! ```text
//! ind = (1 / (2 k!)) (i / 8 pi)^k  *  Integral_{S_R} dens(x) dS,
//! dens = sum_{beta in S_{d-1}} sign(beta)
//!        tr[ U  d_{tau_beta(1)}U  ...  d_{tau_beta(d-1)}U ],
//! ```
//!
//! with `k = (d - 1) / 2` and tangential derivatives taken along great
//! circles.  The value is radius-independent once `R` is past the region
//! where `A` fails to be invertible; evaluating on several radii and checking
//! the spread makes that assumption observable.
//!
//! In `d = 1` the "sphere" is the point pair `{+R, -R}` with orientation
//! signs `+/-`, no derivatives are taken, and the formula degenerates to
//! `(tr U(R) - tr U(-R)) / 2`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::clifford::permutations_with_sign;
use crate::error::{CoreError, Result};
use crate::linalg::{pairwise_sum, trace, trace_of_product, CMatrix, HermitianEig};
use crate::potential::PotentialField;
use crate::quadrature::sphere::SphereRule;

/// Spectral sign of a Hermitian matrix together with its spectral gap.
#[derive(Debug, Clone)]
pub struct UnitaryPhase {
    /// `sign(A)`: Hermitian involution with the same eigenspaces as `A`.
    pub phase: CMatrix,
    /// Smallest `|eigenvalue|` of `A`.
    pub gap: f64,
}

/// Compute `sign(A)` for a Hermitian matrix, rejecting near-kernels.
pub fn unitary_phase(a: &CMatrix, gap_tol: f64) -> Result<UnitaryPhase> {
    let eig = HermitianEig::new(a)?;
    let gap = eig.min_abs_eigenvalue();
    if gap < gap_tol {
        return Err(CoreError::GapViolation(format!(
            "matrix has eigenvalue of magnitude {gap:.3e} below gap tolerance {gap_tol:.3e}"
        )));
    }
    let phase = eig.apply(|l| Complex64::new(if l >= 0.0 { 1.0 } else { -1.0 }, 0.0));
    Ok(UnitaryPhase { phase, gap })
}

/// Orthonormal tangent frame `tau_1 .. tau_{d-1}` at a unit vector `y`,
/// oriented so that `det[y, tau_1, .., tau_{d-1}] = +1`.
pub fn oriented_tangent_frame(y: &[f64]) -> Vec<Vec<f64>> {
    let d = y.len();
    if d == 1 {
        return Vec::new();
    }
    // Gram-Schmidt of the coordinate axes against y, dropping the axis most
    // aligned with y (it contributes the smallest tangential component).
    let skip = (0..d)
        .max_by(|&i, &j| y[i].abs().partial_cmp(&y[j].abs()).expect("finite"))
        .expect("nonempty");
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(d - 1);
    for axis in (0..d).filter(|&a| a != skip) {
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        let proj: f64 = v.iter().zip(y).map(|(a, b)| a * b).sum();
        for i in 0..d {
            v[i] -= proj * y[i];
        }
        for prev in &frame {
            let proj: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
            for i in 0..d {
                v[i] -= proj * prev[i];
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for vi in &mut v {
            *vi /= norm;
        }
        frame.push(v);
    }
    // Fix the orientation: flip one frame vector if det[y, frame..] < 0.
    let mut basis = nalgebra::DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        basis[(i, 0)] = y[i];
    }
    for (j, v) in frame.iter().enumerate() {
        for i in 0..d {
            basis[(i, j + 1)] = v[i];
        }
    }
    if basis.determinant() < 0.0 {
        for vi in frame.last_mut().expect("d >= 2").iter_mut() {
            *vi = -*vi;
        }
    }
    frame
}

/// Configuration of the surface-integral index.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SurfaceIndexConfig {
    /// Increasing evaluation radii (>= 2 entries).
    pub radii: Vec<f64>,
    /// Sphere rule resolution (`2 * level^(d-1)` nodes in `d = 3`).
    pub sphere_level: usize,
    /// Half-angle of the central difference along great circles.
    pub fd_step: f64,
    /// Reject the computation when `|eigenvalue|` of the field drops below
    /// this anywhere on an evaluation sphere.
    pub gap_tol: f64,
    /// Radius-stability criterion: max pairwise difference of the values at
    /// the last `min(3, radii)` radii.
    pub plateau_tol: f64,
}

impl Default for SurfaceIndexConfig {
    fn default() -> Self {
        SurfaceIndexConfig {
            radii: vec![20.0, 40.0, 80.0],
            sphere_level: 24,
            fd_step: 1e-4,
            gap_tol: 1e-6,
            plateau_tol: 1e-3,
        }
    }
}

/// Index value on a single sphere.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SurfaceIndexPoint {
    pub radius: f64,
    /// Real part of the prefactored surface integral.
    pub value: f64,
    /// Imaginary part magnitude (roundoff indicator; the exact value is real).
    pub imag_residual: f64,
    /// Two-level sphere-rule difference.
    pub quad_error: f64,
    /// Smallest `|eigenvalue|` of the field over all evaluation points.
    pub min_gap: f64,
}

/// Multi-radius surface-index result.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SurfaceIndex {
    pub points: Vec<SurfaceIndexPoint>,
    /// Value at the largest radius.
    pub estimate: f64,
    /// Max pairwise difference over the last `min(3, radii)` values.
    pub spread: f64,
    pub nearest_integer: i64,
    pub integer_distance: f64,
    /// True when the spread passes `plateau_tol`.
    pub converged: bool,
}

impl SurfaceIndexPoint {
    /// Realness contract: roundoff-level imaginary part.
    pub fn realness_violated(&self) -> bool {
        self.imag_residual > 1e-8 * self.value.abs() + 1e-10
    }
}

/// Prefactor `(1 / (2 k!)) (i / 8 pi)^k` with `k = (d - 1) / 2`.
fn index_prefactor(d: usize) -> Complex64 {
    let k = (d - 1) / 2;
    let factorial: f64 = (1..=k).map(|j| j as f64).product();
    let base = Complex64::new(0.0, 1.0 / (8.0 * std::f64::consts::PI));
    base.powu(k as u32) / Complex64::new(2.0 * factorial, 0.0)
}

/// Surface density and minimum gap at one unit direction `y` on radius `r`.
fn node_density(
    field: &PotentialField,
    y: &[f64],
    r: f64,
    h: f64,
    gap_tol: f64,
    perms: &[(Vec<usize>, i32)],
) -> Result<(Complex64, f64)> {
    let d = field.d;
    let center = unitary_phase(&field.eval(&y.iter().map(|c| c * r).collect::<Vec<_>>()), gap_tol)?;
    let mut min_gap = center.gap;
    if d == 1 {
        return Ok((trace(&center.phase), min_gap));
    }
    let frame = oriented_tangent_frame(y);
    let mut derivs: Vec<CMatrix> = Vec::with_capacity(d - 1);
    for tau in &frame {
        let mut plus = vec![0.0; d];
        let mut minus = vec![0.0; d];
        let (sin_h, cos_h) = h.sin_cos();
        for i in 0..d {
            plus[i] = r * (cos_h * y[i] + sin_h * tau[i]);
            minus[i] = r * (cos_h * y[i] - sin_h * tau[i]);
        }
        let up = unitary_phase(&field.eval(&plus), gap_tol)?;
        let um = unitary_phase(&field.eval(&minus), gap_tol)?;
        min_gap = min_gap.min(up.gap).min(um.gap);
        derivs.push((up.phase - um.phase) / Complex64::new(2.0 * r * h, 0.0));
    }
    let mut terms = Vec::with_capacity(perms.len());
    for (beta, sign) in perms {
        // tr[U D_{beta(1)} .. D_{beta(d-1)}]; fuse the last factor into the
        // trace to avoid one full matrix product.
        let mut prod = center.phase.clone();
        for &j in &beta[..d - 2] {
            prod = &prod * &derivs[j];
        }
        let t = trace_of_product(&prod, &derivs[beta[d - 2]]);
        terms.push(Complex64::new(*sign as f64, 0.0) * t);
    }
    Ok((pairwise_sum(&terms), min_gap))
}

/// Integrate the surface density over the radius-`r` sphere (full and coarse
/// rule), returning `(fine, coarse, min_gap)` before the prefactor.
fn sphere_integral(
    field: &PotentialField,
    r: f64,
    cfg: &SurfaceIndexConfig,
    perms: &[(Vec<usize>, i32)],
) -> Result<(Complex64, Complex64, f64)> {
    let d = field.d;
    if d == 1 {
        // Oriented point pair {+r, -r}.
        let plus = unitary_phase(&field.eval(&[r]), cfg.gap_tol)?;
        let minus = unitary_phase(&field.eval(&[-r]), cfg.gap_tol)?;
        let total = trace(&plus.phase) - trace(&minus.phase);
        return Ok((total, total, plus.gap.min(minus.gap)));
    }
    let rule = SphereRule::new(d, cfg.sphere_level)?;
    let coarse = SphereRule::new(d, (cfg.sphere_level / 2).max(2))?;
    let surface_scale = r.powi(d as i32 - 1);

    let eval_rule = |rule: &SphereRule| -> Result<(Complex64, f64)> {
        let per_node: Vec<Result<(Complex64, f64)>> = (0..rule.len())
            .into_par_iter()
            .map(|kn| {
                let (dens, gap) =
                    node_density(field, rule.node(kn), r, cfg.fd_step, cfg.gap_tol, perms)?;
                Ok((dens * Complex64::new(rule.weights[kn] * surface_scale, 0.0), gap))
            })
            .collect();
        let mut vals = Vec::with_capacity(per_node.len());
        let mut min_gap = f64::INFINITY;
        for item in per_node {
            let (v, g) = item?;
            vals.push(v);
            min_gap = min_gap.min(g);
        }
        Ok((pairwise_sum(&vals), min_gap))
    };

    let (fine, gap_fine) = eval_rule(&rule)?;
    let (coarse_val, gap_coarse) = eval_rule(&coarse)?;
    Ok((fine, coarse_val, gap_fine.min(gap_coarse)))
}

/// Evaluate the surface-integral index of `field` on each configured radius.
pub fn surface_index(field: &PotentialField, cfg: &SurfaceIndexConfig) -> Result<SurfaceIndex> {
    let d = field.d;
    if cfg.radii.len() < 2 || cfg.radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CoreError::InvalidInput(
            "radii must be increasing with >= 2 entries".into(),
        ));
    }
    if cfg.radii[0] <= 0.0 {
        return Err(CoreError::InvalidInput("radii must be positive".into()));
    }
    if !(cfg.fd_step > 0.0 && cfg.fd_step < 0.1) {
        return Err(CoreError::InvalidInput("fd_step must lie in (0, 0.1)".into()));
    }
    let perms = permutations_with_sign(d - 1);
    let pref = index_prefactor(d);

    let mut points = Vec::with_capacity(cfg.radii.len());
    for &r in &cfg.radii {
        let (fine, coarse, min_gap) = sphere_integral(field, r, cfg, &perms)?;
        let total = pref * fine;
        points.push(SurfaceIndexPoint {
            radius: r,
            value: total.re,
            imag_residual: total.im.abs(),
            quad_error: (pref * (fine - coarse)).norm(),
            min_gap,
        });
    }

    let tail = &points[points.len().saturating_sub(3)..];
    let mut spread: f64 = 0.0;
    for i in 0..tail.len() {
        for j in i + 1..tail.len() {
            spread = spread.max((tail[i].value - tail[j].value).abs());
        }
    }
    let estimate = points.last().expect(">= 2 radii").value;
    let nearest_integer = estimate.round() as i64;
    Ok(SurfaceIndex {
        converged: spread <= cfg.plateau_tol,
        integer_distance: (estimate - nearest_integer as f64).abs(),
        points,
        estimate,
        spread,
        nearest_integer,
    })
}
