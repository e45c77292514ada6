//! Product quadrature on unit spheres.
//!
//! `S^(n)` is built recursively: a Gauss rule in the polar coordinate with
//! weight `(1 - u^2)^((n-2)/2)` times a rule on `S^(n-1)`, bottoming out at
//! equally spaced points on the circle. All weights are positive and sum to
//! the surface area.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::pairwise_sum;
use crate::quadrature::gauss::gauss_gegenbauer;

/// Quadrature rule on the unit sphere `S^(d-1)` in `R^d`.
#[derive(Debug, Clone)]
pub struct SphereRule {
    /// Ambient dimension `d` (so nodes have `d` coordinates).
    pub d: usize,
    /// Resolution parameter: Gauss points per recursion level, `2 * level`
    /// points on the base circle.
    pub level: usize,
    /// Node coordinates flattened in groups of `d`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn circle_rule(level: usize) -> (Vec<f64>, Vec<f64>) {
    let m = 2 * level;
    let mut nodes = Vec::with_capacity(2 * m);
    let w = 2.0 * std::f64::consts::PI / m as f64;
    for j in 0..m {
        // Half-step offset keeps nodes off the coordinate axes.
        let phi = (j as f64 + 0.5) * w;
        nodes.push(phi.cos());
        nodes.push(phi.sin());
    }
    (nodes, vec![w; m])
}

fn build(d: usize, level: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if d == 2 {
        return Ok(circle_rule(level));
    }
    let (sub_nodes, sub_weights) = build(d - 1, level)?;
    let n_sub = sub_weights.len();
    // Latitude weight sin^(d-2)(theta) becomes (1-u^2)^((d-3)/2) in u = cos.
    let (us, uws) = gauss_gegenbauer(level, d as u32 - 3)?;
    let mut nodes = Vec::with_capacity(level * n_sub * d);
    let mut weights = Vec::with_capacity(level * n_sub);
    for (u, uw) in us.iter().zip(&uws) {
        let s = (1.0 - u * u).max(0.0).sqrt();
        for k in 0..n_sub {
            nodes.push(*u);
            for c in 0..(d - 1) {
                nodes.push(s * sub_nodes[k * (d - 1) + c]);
            }
            weights.push(uw * sub_weights[k]);
        }
    }
    Ok((nodes, weights))
}

impl SphereRule {
    /// Build the rule on `S^(d-1)`; `level >= 2` controls the resolution.
    pub fn new(d: usize, level: usize) -> Result<Self> {
        if d < 2 {
            return Err(CoreError::InvalidInput(format!("need ambient dimension >= 2, got {d}")));
        }
        if level < 2 {
            return Err(CoreError::InvalidInput("sphere rule level must be >= 2".into()));
        }
        let (nodes, weights) = build(d, level)?;
        Ok(SphereRule { d, level, nodes, weights })
    }

    /// Companion rule at reduced resolution for two-level error estimates.
    pub fn coarse(&self) -> Result<Self> {
        SphereRule::new(self.d, (2 * self.level / 3).max(2))
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.d..(k + 1) * self.d]
    }

    /// Integrate `f` over the sphere with respect to the surface measure.
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> Complex64) -> Complex64 {
        let vals: Vec<Complex64> = (0..self.len())
            .map(|k| f(self.node(k)) * Complex64::new(self.weights[k], 0.0))
            .collect();
        pairwise_sum(&vals)
    }
}

/// Integrate with a two-level error estimate: the value from `rule` and the
/// absolute difference against its coarse companion.
pub fn sphere_integrate(
    rule: &SphereRule,
    mut f: impl FnMut(&[f64]) -> Complex64,
) -> Result<(Complex64, f64)> {
    let fine = rule.integrate(&mut f);
    let coarse = rule.coarse()?.integrate(&mut f);
    Ok((fine, (fine - coarse).norm()))
}
