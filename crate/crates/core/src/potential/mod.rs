//! Matrix potential fields on `R^d`.
//!
//! A [`PotentialField`] is a smooth bounded map into Hermitian `m x m`
//! matrices together with gradient access (analytic when available, central
//! finite differences otherwise), a reference matrix `A_0 = A(x_ref)` taken
//! far out on the positive first axis, and audited decay metadata used by the
//! quadrature tail bounds.
//!
//! [`apply_cutoff`] builds the interpolated family
//! `A_phi = A_0 + (1 - phi)(A - A_0)` for a compactly supported radial ramp
//! `phi`; the trace formulas are provably independent of that choice, which
//! the test suites verify numerically.

pub mod audit;
pub mod builtins;
pub mod user_spec;

use std::sync::Arc;

use crate::error::{CoreError, Result};
use crate::linalg::{hermiticity_residual, max_abs, CMatrix};

type EvalFn = dyn Fn(&[f64]) -> CMatrix + Send + Sync;
type GradFn = dyn Fn(&[f64]) -> Vec<CMatrix> + Send + Sync;

/// Decay powers used for quadrature tail bounds: `|grad A| <~ |x|^(-gradient)`
/// and `|d/dR A(R y)| <~ |x|^(-radial)`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct DecayInfo {
    pub gradient: f64,
    pub radial: f64,
}

impl DecayInfo {
    /// Conservative default when nothing is known analytically.
    pub fn conservative() -> Self {
        DecayInfo { gradient: 1.0, radial: 1.5 }
    }
}

#[derive(Clone)]
enum Gradient {
    Analytic(Arc<GradFn>),
    FiniteDifference,
}

/// A Hermitian matrix potential on `R^d` with gradient access.
#[derive(Clone)]
pub struct PotentialField {
    pub d: usize,
    pub m: usize,
    /// Human-readable family tag recorded in run manifests.
    pub id: String,
    eval: Arc<EvalFn>,
    gradient: Gradient,
    /// Reference matrix `A(x_ref)`.
    pub a0: CMatrix,
    pub x_ref: Vec<f64>,
    pub decay: DecayInfo,
}

/// Central finite-difference gradient of a matrix map, step `h` per axis.
pub fn fd_gradient(f: &dyn Fn(&[f64]) -> CMatrix, x: &[f64], h: f64) -> Vec<CMatrix> {
    let d = x.len();
    let mut out = Vec::with_capacity(d);
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    for i in 0..d {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        let diff = (f(&xp) - f(&xm)) / num_complex::Complex64::new(2.0 * h, 0.0);
        out.push(diff);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    out
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Default reference point: far out on the positive first axis, where decaying
/// fields are already close to their radial limit.
pub fn default_x_ref(d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    x[0] = 50.0;
    x
}

impl PotentialField {
    /// Wrap an evaluation closure (and optional analytic gradient) as a field.
    ///
    /// The constructor validates Hermiticity (residual `<= 1e-10`) and output
    /// dimensions on a fixed sample of points including `x_ref`.
    pub fn new(
        d: usize,
        m: usize,
        id: impl Into<String>,
        eval: Arc<EvalFn>,
        gradient: Option<Arc<GradFn>>,
        x_ref: Option<Vec<f64>>,
        decay: DecayInfo,
    ) -> Result<Self> {
        if d == 0 || d % 2 == 0 {
            return Err(CoreError::InvalidInput(format!("dimension must be odd, got {d}")));
        }
        if m == 0 || m > 64 {
            return Err(CoreError::InvalidInput(format!("matrix size must be in 1..=64, got {m}")));
        }
        let x_ref = x_ref.unwrap_or_else(|| default_x_ref(d));
        if x_ref.len() != d {
            return Err(CoreError::InvalidInput("x_ref has wrong dimension".into()));
        }
        let mut samples: Vec<Vec<f64>> = vec![
            vec![0.0; d],
            x_ref.clone(),
        ];
        let probe = [0.31, -0.74, 0.22, 0.58, -0.41, 0.13, -0.66];
        samples.push(probe[..d].to_vec());
        samples.push(probe[..d].iter().map(|v| v * 7.3).collect());
        for x in &samples {
            let a = eval(x);
            if a.nrows() != m || a.ncols() != m {
                return Err(CoreError::InvalidInput(format!(
                    "field evaluation returned {}x{}, expected {m}x{m}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            let res = hermiticity_residual(&a);
            if res > 1e-10 * max_abs(&a).max(1.0) {
                return Err(CoreError::InvariantViolation(format!(
                    "field is not Hermitian at {x:?}: residual {res:.3e}"
                )));
            }
        }
        let a0 = eval(&x_ref);
        let gradient = match gradient {
            Some(g) => {
                let gs = g(&samples[2]);
                if gs.len() != d {
                    return Err(CoreError::InvalidInput(format!(
                        "gradient returned {} components, expected {d}",
                        gs.len()
                    )));
                }
                Gradient::Analytic(g)
            }
            None => Gradient::FiniteDifference,
        };
        Ok(PotentialField { d, m, id: id.into(), eval, gradient, a0, x_ref, decay })
    }

    /// Evaluate `A(x)`. Panics on a grossly non-Hermitian result, which
    /// indicates a broken field definition rather than a numerical issue.
    pub fn eval(&self, x: &[f64]) -> CMatrix {
        debug_assert_eq!(x.len(), self.d);
        let a = (self.eval)(x);
        let res = hermiticity_residual(&a);
        if res > 1e-6 * max_abs(&a).max(1.0) {
            panic!("field {} is not Hermitian at {x:?} (residual {res:.3e})", self.id);
        }
        a
    }

    /// Gradient `(d/dx_1 A, ..., d/dx_d A)` at `x`. Analytic when supplied,
    /// otherwise central differences with step `1e-4 * (1 + |x|)`.
    pub fn grad(&self, x: &[f64]) -> Vec<CMatrix> {
        match &self.gradient {
            Gradient::Analytic(g) => g(x),
            Gradient::FiniteDifference => {
                let h = 1e-4 * (1.0 + norm(x));
                let eval = self.eval.clone();
                fd_gradient(&move |p: &[f64]| eval(p), x, h)
            }
        }
    }

    /// True when the gradient is analytic rather than finite differences.
    pub fn has_analytic_gradient(&self) -> bool {
        matches!(self.gradient, Gradient::Analytic(_))
    }

    /// The pointwise negated field `-A` (reference matrix negates too).
    pub fn negated(&self) -> PotentialField {
        let eval = self.eval.clone();
        let gradient = match &self.gradient {
            Gradient::Analytic(g) => {
                let g = g.clone();
                Gradient::Analytic(Arc::new(move |x: &[f64]| {
                    g(x).into_iter().map(|m| -m).collect()
                }))
            }
            Gradient::FiniteDifference => Gradient::FiniteDifference,
        };
        PotentialField {
            d: self.d,
            m: self.m,
            id: format!("neg({})", self.id),
            eval: Arc::new(move |x: &[f64]| -eval(x)),
            gradient,
            a0: -self.a0.clone(),
            x_ref: self.x_ref.clone(),
            decay: self.decay,
        }
    }
}

/// Compactly supported radial ramp: `1` on `[0, r0]`, `0` beyond `r0 + width`,
/// joined by a quintic smoothstep (twice continuously differentiable).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CutoffSpec {
    pub r0: f64,
    pub width: f64,
}

impl CutoffSpec {
    pub fn new(r0: f64, width: f64) -> Result<Self> {
        if !(r0 > 0.0) || !(width > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "cutoff needs r0 > 0 and width > 0, got r0={r0}, width={width}"
            )));
        }
        Ok(CutoffSpec { r0, width })
    }

    /// The ramp value `phi(r)`.
    pub fn phi(&self, r: f64) -> f64 {
        if r <= self.r0 {
            1.0
        } else if r >= self.r0 + self.width {
            0.0
        } else {
            let u = (r - self.r0) / self.width;
            1.0 - u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
        }
    }

    /// `d phi / d r`.
    pub fn phi_prime(&self, r: f64) -> f64 {
        if r <= self.r0 || r >= self.r0 + self.width {
            0.0
        } else {
            let u = (r - self.r0) / self.width;
            -30.0 * u * u * (1.0 - u) * (1.0 - u) / self.width
        }
    }

    pub fn outer_radius(&self) -> f64 {
        self.r0 + self.width
    }
}

/// The interpolated family `A_phi = A_0 + (1 - phi)(A - A_0)`.
///
/// Inside the ramp plateau (`|x| <= r0`) the result is exactly `A_0` with
/// vanishing gradient; outside the support it coincides with the base field.
pub fn apply_cutoff(base: &PotentialField, cutoff: &CutoffSpec) -> PotentialField {
    let a0 = base.a0.clone();
    let eval_base = base.eval.clone();
    let c = *cutoff;
    let a0_eval = a0.clone();
    let eval = move |x: &[f64]| -> CMatrix {
        let r = norm(x);
        if r <= c.r0 {
            return a0_eval.clone();
        }
        let phi = c.phi(r);
        if phi == 0.0 {
            return eval_base(x);
        }
        let a = eval_base(x);
        &a0_eval + (&a - &a0_eval).map(|z| z * num_complex::Complex64::new(1.0 - phi, 0.0))
    };
    let base_clone = base.clone();
    let a0_grad = a0.clone();
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let r = norm(x);
        let m = base_clone.m;
        if r <= c.r0 {
            return vec![CMatrix::zeros(m, m); base_clone.d];
        }
        let phi = c.phi(r);
        let dphi = c.phi_prime(r);
        let gs = base_clone.grad(x);
        if dphi == 0.0 && phi == 0.0 {
            return gs;
        }
        let a = base_clone.eval(x);
        let diff = &a - &a0_grad;
        gs.into_iter()
            .enumerate()
            .map(|(i, gi)| {
                let xi_hat = x[i] / r;
                gi.map(|z| z * num_complex::Complex64::new(1.0 - phi, 0.0))
                    - diff.map(|z| z * num_complex::Complex64::new(dphi * xi_hat, 0.0))
            })
            .collect()
    };
    PotentialField {
        d: base.d,
        m: base.m,
        id: format!("{}|cutoff(r0={},w={})", base.id, cutoff.r0, cutoff.width),
        eval: Arc::new(eval),
        gradient: Gradient::Analytic(Arc::new(grad)),
        a0,
        x_ref: base.x_ref.clone(),
        decay: base.decay,
    }
}

/// Result of probing a field for a limit along a fixed direction.
#[derive(Debug, Clone, serde::Serialize)]
pub struct RadialLimit {
    /// `A(R_max y)` for the largest grid radius.
    #[serde(skip)]
    pub value: CMatrix,
    /// Max deviation of the three largest sub-maximal radii from the value.
    pub residual: f64,
    pub converged: bool,
}

/// Probe `A(R y)` along direction `y` over an increasing radius grid.
///
/// The convergence diagnostic is the maximum of
/// `norm(A(R_i y) - A(R_max y))` over the three largest `R_i < R_max`;
/// `converged` compares it against `tol`.
pub fn radial_limit(
    field: &PotentialField,
    y: &[f64],
    r_grid: &[f64],
    tol: f64,
) -> Result<RadialLimit> {
    if r_grid.len() < 4 {
        return Err(CoreError::InvalidInput("radius grid needs at least 4 points".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) || r_grid[0] <= 0.0 {
        return Err(CoreError::InvalidInput("radius grid must be positive increasing".into()));
    }
    let ny = norm(y);
    if !(ny > 0.0) {
        return Err(CoreError::InvalidInput("direction must be nonzero".into()));
    }
    let y: Vec<f64> = y.iter().map(|c| c / ny).collect();
    let eval_at = |r: f64| -> CMatrix {
        let x: Vec<f64> = y.iter().map(|c| c * r).collect();
        field.eval(&x)
    };
    let n = r_grid.len();
    let value = eval_at(r_grid[n - 1]);
    let mut residual: f64 = 0.0;
    for &r in &r_grid[n - 4..n - 1] {
        residual = residual.max(max_abs(&(eval_at(r) - &value)));
    }
    Ok(RadialLimit { converged: residual <= tol, value, residual })
}

/// A matrix field on the unit sphere (a radial limit `A^o`), with tangential
/// derivative access through the 0-homogeneous extension `x -> A^o(x/|x|)`.
#[derive(Clone)]
pub struct SphereField {
    pub d: usize,
    pub m: usize,
    pub id: String,
    eval: Arc<EvalFn>,
    grad: Option<Arc<GradFn>>,
}

impl SphereField {
    /// From closures: `eval` is sampled at unit vectors; `grad`, when given,
    /// must be the ambient gradient of the 0-homogeneous extension at unit
    /// vectors (tangential by construction).
    pub fn new(
        d: usize,
        m: usize,
        id: impl Into<String>,
        eval: Arc<EvalFn>,
        grad: Option<Arc<GradFn>>,
    ) -> Self {
        SphereField { d, m, id: id.into(), eval, grad }
    }

    /// Sample a decaying field at a large radius to approximate its limit.
    /// The gradient of the 0-homogeneous extension is recovered from the
    /// ambient gradient at radius `r_big`: scaled by `r_big` and projected
    /// tangentially.
    pub fn from_field_at(field: &PotentialField, r_big: f64) -> Self {
        let f = field.clone();
        let fg = field.clone();
        let eval = move |y: &[f64]| -> CMatrix {
            let x: Vec<f64> = y.iter().map(|c| c * r_big).collect();
            f.eval(&x)
        };
        let grad = move |y: &[f64]| -> Vec<CMatrix> {
            let x: Vec<f64> = y.iter().map(|c| c * r_big).collect();
            let gs = fg.grad(&x);
            (0..fg.d)
                .map(|i| {
                    let mut gi = gs[i].clone().map(|z| z * num_complex::Complex64::new(r_big, 0.0));
                    for (k, gk) in gs.iter().enumerate() {
                        let coef = -r_big * y[i] * y[k];
                        gi += gk.map(|z| z * num_complex::Complex64::new(coef, 0.0));
                    }
                    gi
                })
                .collect()
        };
        SphereField {
            d: field.d,
            m: field.m,
            id: format!("limit({})", field.id),
            eval: Arc::new(eval),
            grad: Some(Arc::new(grad)),
        }
    }

    pub fn eval(&self, y: &[f64]) -> CMatrix {
        (self.eval)(y)
    }

    /// Ambient gradient of the 0-homogeneous extension at the unit vector `y`.
    pub fn grad(&self, y: &[f64]) -> Vec<CMatrix> {
        match &self.grad {
            Some(g) => g(y),
            None => {
                let eval = self.eval.clone();
                let f = move |x: &[f64]| -> CMatrix {
                    let r = norm(x);
                    let y: Vec<f64> = x.iter().map(|c| c / r).collect();
                    eval(&y)
                };
                fd_gradient(&f, y, 1e-5)
            }
        }
    }
}

/// The radial model family `A_0 + (1 - rho(|x|))(A^o(x/|x|) - A_0)` as a
/// potential field. Exactly `A_0` on the ramp plateau; outside the ramp
/// support its derivative is purely tangential.
pub fn radial_model_field(
    sphere: &SphereField,
    a0: CMatrix,
    x_ref: Vec<f64>,
    rho: &CutoffSpec,
    decay: DecayInfo,
) -> Result<PotentialField> {
    let d = sphere.d;
    let m = sphere.m;
    let c = *rho;
    let sph = sphere.clone();
    let a0_eval = a0.clone();
    let eval = move |x: &[f64]| -> CMatrix {
        let r = norm(x);
        if r <= c.r0 {
            return a0_eval.clone();
        }
        let rho_v = c.phi(r);
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        let a = sph.eval(&y);
        &a0_eval + (&a - &a0_eval).map(|z| z * num_complex::Complex64::new(1.0 - rho_v, 0.0))
    };
    let sph_g = sphere.clone();
    let a0_grad = a0.clone();
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let r = norm(x);
        if r <= c.r0 {
            return vec![CMatrix::zeros(m, m); d];
        }
        let rho_v = c.phi(r);
        let drho = c.phi_prime(r);
        let y: Vec<f64> = x.iter().map(|v| v / r).collect();
        let a = sph_g.eval(&y);
        let gs = sph_g.grad(&y);
        let diff = &a - &a0_grad;
        (0..d)
            .map(|i| {
                let xi_hat = y[i];
                gs[i].map(|z| z * num_complex::Complex64::new((1.0 - rho_v) / r, 0.0))
                    - diff.map(|z| z * num_complex::Complex64::new(drho * xi_hat, 0.0))
            })
            .collect()
    };
    PotentialField::new(
        d,
        m,
        format!("radial_model({})", sphere.id),
        Arc::new(eval),
        Some(Arc::new(grad)),
        Some(x_ref),
        decay,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::pauli;
    use crate::potential::builtins;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn hedgehog_frozen_value_at_e1() {
        // A(e1) = sigma1 / sqrt(2), evaluated directly from the Pauli matrix.
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let a = field.eval(&[1.0, 0.0, 0.0]);
        let [s1, _, _] = pauli();
        let expected = s1.map(|z| z * c(1.0 / 2.0f64.sqrt(), 0.0));
        assert!(max_abs(&(a - expected)) < 1e-15);
    }

    #[test]
    fn quintic_ramp_midpoint_and_smoothness() {
        let cut = CutoffSpec::new(1.0, 1.0).unwrap();
        assert_eq!(cut.phi(0.5), 1.0);
        assert_eq!(cut.phi(2.5), 0.0);
        assert!((cut.phi(1.5) - 0.5).abs() < 1e-15);
        // phi' matches a finite difference of phi across the ramp, including
        // at the joints (C^1 check; the quintic is in fact C^2).
        for r in [1.0, 1.2, 1.5, 1.9, 2.0] {
            let h = 1e-6;
            let fd = (cut.phi(r + h) - cut.phi(r - h)) / (2.0 * h);
            assert!((fd - cut.phi_prime(r)).abs() < 1e-8, "r={r}");
        }
        // Second derivative is continuous at the joints: finite differences
        // of phi' from inside and outside agree.
        for (r, side) in [(1.0, 1.0), (2.0, -1.0)] {
            let h = 1e-5;
            let inner = (cut.phi_prime(r + side * h) - cut.phi_prime(r)) / (side * h);
            assert!(inner.abs() < 1e-3, "ramp second derivative jumps at {r}");
        }
    }

    #[test]
    fn cutoff_interpolates_at_ramp_midpoint() {
        // At |x| = 1.5 with ramp (1, 1): A_phi = A_0 + (A(x) - A_0) / 2,
        // assembled here independently from Pauli matrices.
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let cut = CutoffSpec::new(1.0, 1.0).unwrap();
        let fphi = apply_cutoff(&field, &cut);
        let x = [1.5, 0.0, 0.0];
        let got = fphi.eval(&x);
        let [s1, _, _] = pauli();
        let a0 = s1.map(|z| z * c(50.0 / (1.0f64 + 2500.0).sqrt(), 0.0));
        let ax = s1.map(|z| z * c(1.5 / (1.0f64 + 2.25).sqrt(), 0.0));
        let expected = &a0 + (&ax - &a0).map(|z| z * c(0.5, 0.0));
        assert!(max_abs(&(got - expected)) < 1e-14);
    }

    #[test]
    fn cutoff_is_exact_on_the_plateau() {
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let cut = CutoffSpec::new(1.0, 1.0).unwrap();
        let fphi = apply_cutoff(&field, &cut);
        let x = [0.3, -0.2, 0.1];
        let a = fphi.eval(&x);
        for (za, zb) in a.iter().zip(fphi.a0.iter()) {
            assert_eq!(za.re.to_bits(), zb.re.to_bits());
            assert_eq!(za.im.to_bits(), zb.im.to_bits());
        }
        for g in fphi.grad(&x) {
            assert_eq!(max_abs(&g), 0.0);
        }
    }

    #[test]
    fn cutoff_gradient_matches_finite_differences() {
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let cut = CutoffSpec::new(1.0, 1.0).unwrap();
        let fphi = apply_cutoff(&field, &cut);
        for x in [[1.3, 0.4, -0.2], [1.9, -0.3, 0.5], [3.5, 1.0, 0.2]] {
            let analytic = fphi.grad(&x);
            let eval = |p: &[f64]| fphi.eval(p);
            let fd = fd_gradient(&eval, &x, 1e-5);
            for (a, b) in analytic.iter().zip(&fd) {
                assert!(max_abs(&(a - b)) < 1e-8, "x={x:?}");
            }
        }
    }

    #[test]
    fn analytic_hedgehog_gradient_matches_fd_with_quadratic_convergence() {
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let x = [0.7, -0.4, 1.1];
        let exact = field.grad(&x);
        let eval = |p: &[f64]| field.eval(p);
        let err_at = |h: f64| -> f64 {
            fd_gradient(&eval, &x, h)
                .iter()
                .zip(&exact)
                .map(|(a, b)| max_abs(&(a - b)))
                .fold(0.0, f64::max)
        };
        let e1 = err_at(1e-3);
        let e2 = err_at(5e-4);
        let ratio = e1 / e2;
        assert!((3.0..5.0).contains(&ratio), "second-order ratio {ratio}, errs {e1:.3e}/{e2:.3e}");
    }

    #[test]
    fn non_hermitian_field_is_rejected() {
        let eval = Arc::new(|_: &[f64]| {
            CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.5, 0.2), c(0.5, 0.3), c(0.0, 0.0)])
        });
        let got = PotentialField::new(3, 2, "bad", eval, None, None, DecayInfo::conservative());
        assert!(matches!(got, Err(CoreError::InvariantViolation(_))));
    }

    #[test]
    fn radial_limit_of_hedgehog_converges_to_unit_direction() {
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let lim = radial_limit(&field, &[0.0, 0.0, 2.0], &[4.0, 8.0, 16.0, 32.0, 64.0], 1e-2)
            .unwrap();
        assert!(lim.converged, "residual {}", lim.residual);
        let [_, _, s3] = pauli();
        assert!(max_abs(&(&lim.value - &s3)) < 5e-4);
    }

    #[test]
    fn radial_limit_rejects_oscillating_field() {
        let field = builtins::oscillating(3).unwrap();
        let lim = radial_limit(&field, &[1.0, 0.0, 0.0], &[4.0, 8.0, 16.0, 32.0, 64.0], 1e-2)
            .unwrap();
        assert!(!lim.converged, "residual {}", lim.residual);
    }

    #[test]
    fn radial_limit_validates_grid() {
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        assert!(radial_limit(&field, &[1.0, 0.0, 0.0], &[1.0, 2.0, 3.0], 1e-2).is_err());
        assert!(radial_limit(&field, &[1.0, 0.0, 0.0], &[4.0, 2.0, 8.0, 16.0], 1e-2).is_err());
    }

    #[test]
    fn negated_field_flips_values_and_reference() {
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let neg = field.negated();
        let x = [0.4, 0.9, -1.3];
        assert!(max_abs(&(neg.eval(&x) + field.eval(&x))) == 0.0);
        assert!(max_abs(&(&neg.a0 + &field.a0)) == 0.0);
    }

    #[test]
    fn radial_model_field_gradient_is_tangential_outside_ramp() {
        let sphere = builtins::hedgehog_limit().unwrap();
        let rho = CutoffSpec::new(1.0, 1.0).unwrap();
        let field = builtins::hedgehog(1.0, [0.0; 3]).unwrap();
        let model =
            radial_model_field(&sphere, field.a0.clone(), field.x_ref.clone(), &rho, field.decay)
                .unwrap();
        let x = [2.0, 1.5, -1.0];
        let r = norm(&x);
        assert!(r > rho.outer_radius());
        let gs = model.grad(&x);
        // Radial component sum_i x_i/r * dA/dx_i must vanish.
        let mut radial = CMatrix::zeros(2, 2);
        for (i, g) in gs.iter().enumerate() {
            radial += g.map(|z| z * c(x[i] / r, 0.0));
        }
        assert!(max_abs(&radial) < 1e-12, "radial part {}", max_abs(&radial));
        // And the gradient matches finite differences of the model.
        let eval = move |p: &[f64]| model.eval(p);
        let fd = fd_gradient(&eval, &x, 1e-5);
        for (a, b) in gs.iter().zip(&fd) {
            assert!(max_abs(&(a - b)) < 1e-7);
        }
    }
}
