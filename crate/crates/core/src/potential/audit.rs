//! Empirical audit of the decay and limit assumptions a field must satisfy
//! for the trace and index formulas to apply:
//!
//! 1. gradient decay: `|dA(x)| <~ |x|^(-1)` or faster,
//! 2. radial-derivative decay: `|x . dA(x)| <~ |x|^(-1-eps)`,
//! 3. translation stability: `A(R y + x0) - A(R y) -> 0` (with `R`-scaled
//!    first derivatives) as `R` grows.
//!
//! Exponents are measured by least-squares fits of `log(norm)` against
//! `log(R)` over a geometric radius grid, per direction on a coarse sphere
//! rule, in both Frobenius and spectral norms. The audit reports worst-case
//! (minimum) exponents over directions and conservative pass flags.

use serde::Serialize;

use super::PotentialField;
use crate::error::{CoreError, Result};
use crate::linalg::{fro_norm, CMatrix, HermitianEig};
use crate::quadrature::SphereRule;

/// Configuration for [`audit_field`].
#[derive(Debug, Clone, Serialize)]
pub struct AuditConfig {
    /// Radii for the log-log fits (positive, increasing, at least 4).
    pub radii: Vec<f64>,
    /// Sphere-rule level controlling the direction set.
    pub direction_level: usize,
    /// Offset for the translation-stability probe.
    pub x0: Vec<f64>,
    /// Minimum acceptable gradient decay exponent.
    pub min_gradient_exponent: f64,
    /// Minimum acceptable radial decay exponent (needs a margin above 1).
    pub min_radial_exponent: f64,
}

impl AuditConfig {
    pub fn default_for(d: usize) -> Self {
        // Geometric grid 2 .. ~80.
        let radii: Vec<f64> = (0..12).map(|k| 2.0 * 1.4f64.powi(k)).collect();
        let mut x0 = vec![0.0; d];
        x0[0] = 0.7;
        if d > 1 {
            x0[1] = -0.4;
        }
        AuditConfig {
            radii,
            direction_level: 3,
            x0,
            min_gradient_exponent: 0.95,
            min_radial_exponent: 1.05,
        }
    }
}

/// One row of the translation-stability table.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityRow {
    pub radius: f64,
    /// `max_y |A(R y + x0) - A(R y)|_F`.
    pub value_residual: f64,
    /// `max_y R |dA(R y + x0) - dA(R y)|_F` (maximized over components).
    pub gradient_residual: f64,
}

/// Audit outcome. Exponents are worst-case over the probed directions.
#[derive(Debug, Clone, Serialize)]
pub struct FieldAudit {
    pub field: String,
    pub gradient_exponent_fro: f64,
    pub gradient_exponent_spec: f64,
    pub radial_exponent_fro: f64,
    pub radial_exponent_spec: f64,
    /// Largest residual of any of the log-log fits (lack-of-fit diagnostic).
    pub fit_residual: f64,
    pub stability: Vec<StabilityRow>,
    pub pass_gradient: bool,
    pub pass_radial: bool,
    pub pass_stability: bool,
    pub pass: bool,
    /// Declared decay metadata carried by the field, for comparison.
    pub declared_gradient: f64,
    pub declared_radial: f64,
}

/// Least-squares slope of `ln(v)` against `ln(r)`, returning
/// `(exponent = -slope, max |fit residual|)`. Values at or below `floor`
/// mark the series as numerically zero and yield an infinite exponent.
fn fit_exponent(radii: &[f64], values: &[f64], floor: f64) -> (f64, f64) {
    if values.iter().all(|&v| v <= floor) {
        return (f64::INFINITY, 0.0);
    }
    // Clamp tiny values to the floor so a single underflow cannot dominate.
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|&v| v.max(floor).ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let resid = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - (intercept + slope * x)).abs())
        .fold(0.0, f64::max);
    (-slope, resid)
}

fn spectral_norm(m: &CMatrix) -> f64 {
    // Hermitian inputs only: largest |eigenvalue|.
    match HermitianEig::new(m) {
        Ok(e) => e.eigenvalues.iter().fold(0.0f64, |acc, &l| acc.max(l.abs())),
        Err(_) => fro_norm(m),
    }
}

/// Hermitian part — gradients of Hermitian fields are Hermitian exactly, but
/// finite-difference noise can break that at machine level.
fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * num_complex::Complex64::new(0.5, 0.0)
}

/// Run the decay audit for a field.
pub fn audit_field(field: &PotentialField, config: &AuditConfig) -> Result<FieldAudit> {
    if config.radii.len() < 4
        || config.radii[0] <= 0.0
        || config.radii.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(CoreError::InvalidInput("audit radii must be positive increasing, >= 4".into()));
    }
    if config.x0.len() != field.d {
        return Err(CoreError::InvalidInput("audit offset has wrong dimension".into()));
    }
    let sphere = SphereRule::new(field.d, config.direction_level)?;
    let nr = config.radii.len();
    let floor = 1e-13;

    let mut grad_fro = f64::INFINITY;
    let mut grad_spec = f64::INFINITY;
    let mut rad_fro = f64::INFINITY;
    let mut rad_spec = f64::INFINITY;
    let mut fit_residual: f64 = 0.0;
    let mut stability: Vec<StabilityRow> =
        config.radii.iter().map(|&r| StabilityRow { radius: r, value_residual: 0.0, gradient_residual: 0.0 }).collect();

    for k in 0..sphere.len() {
        let y = sphere.node(k);
        let mut g_fro = Vec::with_capacity(nr);
        let mut g_spec = Vec::with_capacity(nr);
        let mut r_fro = Vec::with_capacity(nr);
        let mut r_spec = Vec::with_capacity(nr);
        for (k, &radius) in config.radii.iter().enumerate() {
            let x: Vec<f64> = y.iter().map(|c| c * radius).collect();
            let gs = field.grad(&x);
            let mut worst_fro: f64 = 0.0;
            let mut worst_spec: f64 = 0.0;
            let mut radial = CMatrix::zeros(field.m, field.m);
            for (i, g) in gs.iter().enumerate() {
                let gh = hermitize(g);
                worst_fro = worst_fro.max(fro_norm(&gh));
                worst_spec = worst_spec.max(spectral_norm(&gh));
                radial += gh.map(|z| z * num_complex::Complex64::new(y[i], 0.0));
            }
            g_fro.push(worst_fro);
            g_spec.push(worst_spec);
            r_fro.push(fro_norm(&radial));
            r_spec.push(spectral_norm(&radial));

            // Translation stability at this radius and direction.
            let xs: Vec<f64> = x.iter().zip(&config.x0).map(|(a, b)| a + b).collect();
            let dval = fro_norm(&(field.eval(&xs) - field.eval(&x)));
            let gs_s = field.grad(&xs);
            let dgrad = gs_s
                .iter()
                .zip(&gs)
                .map(|(a, b)| fro_norm(&(a - b)))
                .fold(0.0, f64::max)
                * radius;
            let row = &mut stability[k];
            row.value_residual = row.value_residual.max(dval);
            row.gradient_residual = row.gradient_residual.max(dgrad);
        }
        let (e, res) = fit_exponent(&config.radii, &g_fro, floor);
        grad_fro = grad_fro.min(e);
        fit_residual = fit_residual.max(res);
        let (e, res) = fit_exponent(&config.radii, &g_spec, floor);
        grad_spec = grad_spec.min(e);
        fit_residual = fit_residual.max(res);
        let (e, res) = fit_exponent(&config.radii, &r_fro, floor);
        rad_fro = rad_fro.min(e);
        fit_residual = fit_residual.max(res);
        let (e, res) = fit_exponent(&config.radii, &r_spec, floor);
        rad_spec = rad_spec.min(e);
        fit_residual = fit_residual.max(res);
    }

    let pass_gradient = grad_fro >= config.min_gradient_exponent
        && grad_spec >= config.min_gradient_exponent;
    let pass_radial =
        rad_fro >= config.min_radial_exponent && rad_spec >= config.min_radial_exponent;
    // Stability passes when both residual series have clearly decayed from
    // their initial size by the end of the grid (or are negligibly small).
    let decayed = |first: f64, last: f64| last <= 0.25 * first || last <= 1e-6;
    let pass_stability = {
        let first = &stability[0];
        let last = &stability[nr - 1];
        decayed(first.value_residual, last.value_residual)
            && decayed(first.gradient_residual, last.gradient_residual)
    };

    Ok(FieldAudit {
        field: field.id.clone(),
        gradient_exponent_fro: grad_fro,
        gradient_exponent_spec: grad_spec,
        radial_exponent_fro: rad_fro,
        radial_exponent_spec: rad_spec,
        fit_residual,
        stability,
        pass_gradient,
        pass_radial,
        pass_stability,
        pass: pass_gradient && pass_radial && pass_stability,
        declared_gradient: field.decay.gradient,
        declared_radial: field.decay.radial,
    })
}
