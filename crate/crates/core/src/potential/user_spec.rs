//! User-defined potential fields from a JSON description.
//!
//! A field is a sum of terms, each a constant Hermitian coefficient matrix
//! times a monomial in the coordinates times a rational radial profile:
//!
//! ```json
//! {
//!   "d": 3,
//!   "m": 2,
//!   "terms": [
//!     {
//!       "coeff": [[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]],
//!       "monomial": [1, 0, 0],
//!       "radial": { "c0": 1.0, "c2": 1.0, "power": 1 }
//!     }
//!   ]
//! }
//! ```
//!
//! Each term contributes `coeff * x^monomial * (c0 + c2 |x|^2)^(-power/2)`.
//! Matrix entries are `[re, im]` pairs. Gradients are analytic (the profile
//! is smooth, so no `1/|x|` singularities appear). Optional keys: `x_ref`
//! (reference point) and `id` (manifest tag).

use std::sync::Arc;

use num_complex::Complex64;
use serde::Deserialize;

use super::{DecayInfo, PotentialField};
use crate::error::{CoreError, Result};
use crate::linalg::{hermiticity_residual, max_abs, CMatrix};

#[derive(Debug, Deserialize)]
struct RadialProfile {
    c0: f64,
    #[serde(default)]
    c2: f64,
    #[serde(default)]
    power: u32,
}

#[derive(Debug, Deserialize)]
struct TermSpec {
    coeff: Vec<Vec<[f64; 2]>>,
    monomial: Vec<u32>,
    #[serde(default)]
    radial: Option<RadialProfile>,
}

#[derive(Debug, Deserialize)]
struct FieldSpec {
    d: usize,
    m: usize,
    terms: Vec<TermSpec>,
    #[serde(default)]
    x_ref: Option<Vec<f64>>,
    #[serde(default)]
    id: Option<String>,
}

struct Term {
    coeff: CMatrix,
    monomial: Vec<u32>,
    c0: f64,
    c2: f64,
    power: u32,
}

impl Term {
    fn profile(&self, r2: f64) -> f64 {
        (self.c0 + self.c2 * r2).powf(-(self.power as f64) / 2.0)
    }

    /// `d/dr2` of the profile divided by... returned as the factor multiplying
    /// `x_i` in `d/dx_i profile = factor * x_i`.
    fn profile_grad_factor(&self, r2: f64) -> f64 {
        -(self.power as f64) * self.c2 * (self.c0 + self.c2 * r2).powf(-(self.power as f64) / 2.0 - 1.0)
    }

    fn monomial_value(&self, x: &[f64]) -> f64 {
        self.monomial
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }

    /// `d/dx_i x^monomial` (zero when the exponent is zero).
    fn monomial_deriv(&self, x: &[f64], i: usize) -> f64 {
        let a = self.monomial[i];
        if a == 0 {
            return 0.0;
        }
        let mut v = a as f64 * x[i].powi(a as i32 - 1);
        for (k, (&ak, &xk)) in self.monomial.iter().zip(x).enumerate() {
            if k != i {
                v *= xk.powi(ak as i32);
            }
        }
        v
    }
}

/// Parse and validate a JSON field description.
pub fn load_field(json: &str) -> Result<PotentialField> {
    let spec: FieldSpec = serde_json::from_str(json)
        .map_err(|e| CoreError::InvalidInput(format!("field JSON: {e}")))?;
    build_field(spec)
}

fn build_field(spec: FieldSpec) -> Result<PotentialField> {
    let d = spec.d;
    let m = spec.m;
    if spec.terms.is_empty() {
        return Err(CoreError::InvalidInput("field needs at least one term".into()));
    }
    let mut terms = Vec::with_capacity(spec.terms.len());
    let mut decay_grad = f64::INFINITY;
    let mut decay_radial = f64::INFINITY;
    for (ti, t) in spec.terms.into_iter().enumerate() {
        if t.coeff.len() != m || t.coeff.iter().any(|row| row.len() != m) {
            return Err(CoreError::InvalidInput(format!(
                "term {ti}: coefficient matrix must be {m}x{m}"
            )));
        }
        let coeff = CMatrix::from_fn(m, m, |r, cidx| {
            Complex64::new(t.coeff[r][cidx][0], t.coeff[r][cidx][1])
        });
        let res = hermiticity_residual(&coeff);
        if res > 1e-12 * max_abs(&coeff).max(1.0) {
            return Err(CoreError::InvalidInput(format!(
                "term {ti}: coefficient matrix is not Hermitian (residual {res:.3e})"
            )));
        }
        if t.monomial.len() != d {
            return Err(CoreError::InvalidInput(format!(
                "term {ti}: monomial must have {d} exponents"
            )));
        }
        let (c0, c2, power) = match t.radial {
            Some(r) => {
                if !(r.c0 > 0.0) {
                    return Err(CoreError::InvalidInput(format!("term {ti}: radial c0 must be > 0")));
                }
                if r.c2 < 0.0 {
                    return Err(CoreError::InvalidInput(format!("term {ti}: radial c2 must be >= 0")));
                }
                (r.c0, r.c2, r.power)
            }
            None => (1.0, 0.0, 0),
        };
        let total_degree: u32 = t.monomial.iter().sum();
        // For c2 > 0 the term behaves like |x|^(deg - power) at infinity, so
        // its gradient decays one power faster. Terms with c2 = 0 keep
        // polynomial growth; only constants stay bounded.
        if c2 > 0.0 {
            let p = power as f64 - total_degree as f64;
            decay_grad = decay_grad.min(p + 1.0);
            decay_radial = decay_radial.min(p + 1.0);
        } else if total_degree > 0 {
            decay_grad = decay_grad.min(0.0);
            decay_radial = decay_radial.min(0.0);
        }
        terms.push(Term { coeff, monomial: t.monomial, c0, c2, power });
    }
    let terms = Arc::new(terms);
    let terms_eval = terms.clone();
    let eval = move |x: &[f64]| -> CMatrix {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let mut a = CMatrix::zeros(m, m);
        for t in terms_eval.iter() {
            let w = t.monomial_value(x) * t.profile(r2);
            a += t.coeff.map(|z| z * Complex64::new(w, 0.0));
        }
        a
    };
    let terms_grad = terms.clone();
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        (0..d)
            .map(|i| {
                let mut g = CMatrix::zeros(m, m);
                for t in terms_grad.iter() {
                    let w = t.monomial_deriv(x, i) * t.profile(r2)
                        + t.monomial_value(x) * t.profile_grad_factor(r2) * x[i];
                    g += t.coeff.map(|z| z * Complex64::new(w, 0.0));
                }
                g
            })
            .collect()
    };
    let id = spec.id.unwrap_or_else(|| "user".to_string());
    PotentialField::new(
        d,
        m,
        id,
        Arc::new(eval),
        Some(Arc::new(grad)),
        spec.x_ref,
        DecayInfo { gradient: decay_grad.max(0.0), radial: decay_radial.max(0.0) },
    )
}
