//! Quadrature on the standard simplex.
//!
//! The heat-trace formula integrates over the unit simplex
//! `Delta_l = { s in R^(l+1) : s_j >= 0, sum s_j = 1 }` parametrized by its
//! last `l` coordinates, with flat measure of total mass `1/l!`. Rules are
//! fully symmetric Grundmann-Moller rules of odd degree; a seeded flat
//! Dirichlet Monte Carlo rule serves as fallback for degrees outside the
//! supported range. Nodes are stored in barycentric coordinates.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{CoreError, Result};
use crate::linalg::pairwise_sum;

/// How a [`SimplexRule`] was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SimplexKind {
    /// Symmetric Grundmann-Moller rule of the stored polynomial degree.
    Symmetric,
    /// Seeded flat Dirichlet Monte Carlo.
    MonteCarlo,
}

/// Quadrature rule on `Delta_l`. Weights sum to `1/l!`.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    pub l: usize,
    pub kind: SimplexKind,
    /// Polynomial degree for symmetric rules; sample count for Monte Carlo.
    pub degree: usize,
    /// Barycentric coordinates, flattened in groups of `l + 1`.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// True when a requested symmetric rule was replaced by Monte Carlo.
    pub fell_back: bool,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Enumerate all compositions of `total` into `parts` non-negative integers,
/// in lexicographic order.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, parts, &mut Vec::new(), &mut out);
    out
}

/// Largest odd degree the symmetric construction supports before the
/// factorials in the weight formula leave f64 range.
const MAX_SYMMETRIC_DEGREE: usize = 41;

impl SimplexRule {
    /// Symmetric rule of (at least) the requested polynomial degree on
    /// `Delta_l`. Even degrees are rounded up to the next odd degree.
    /// Errors when the requested degree is outside the supported range; use
    /// [`SimplexRule::new`] for the automatic Monte Carlo fallback.
    pub fn symmetric(l: usize, degree: usize) -> Result<Self> {
        if l == 0 {
            // The zero-dimensional simplex is a single point of mass 1/0!.
            return Ok(SimplexRule {
                l: 0,
                kind: SimplexKind::Symmetric,
                degree,
                nodes: vec![1.0],
                weights: vec![1.0],
                fell_back: false,
            });
        }
        let degree = if degree % 2 == 0 { degree + 1 } else { degree };
        if degree > MAX_SYMMETRIC_DEGREE {
            return Err(CoreError::Unsupported(format!(
                "symmetric simplex rules support degree <= {MAX_SYMMETRIC_DEGREE}, got {degree}"
            )));
        }
        let s = (degree - 1) / 2;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for i in 0..=s {
            let q = degree + l - 2 * i;
            let w = (if i % 2 == 0 { 1.0 } else { -1.0 })
                * (q as f64).powi(degree as i32)
                / (4.0f64.powi(s as i32) * factorial(i) * factorial(degree + l - i));
            for k in compositions(s - i, l + 1) {
                for kj in &k {
                    nodes.push((2 * kj + 1) as f64 / q as f64);
                }
                weights.push(w);
            }
        }
        Ok(SimplexRule {
            l,
            kind: SimplexKind::Symmetric,
            degree,
            nodes,
            weights,
            fell_back: false,
        })
    }

    /// Seeded flat Dirichlet Monte Carlo rule with `samples` nodes.
    pub fn monte_carlo(l: usize, samples: usize, seed: u64) -> Result<Self> {
        if l == 0 || samples == 0 {
            return Err(CoreError::InvalidInput("need l >= 1 and samples >= 1".into()));
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut nodes = Vec::with_capacity(samples * (l + 1));
        for _ in 0..samples {
            // Normalized Exp(1) draws are uniform on the simplex.
            let draws: Vec<f64> = (0..=l)
                .map(|_| -(1.0 - rng.gen::<f64>()).ln())
                .collect();
            let total: f64 = draws.iter().sum();
            for d in draws {
                nodes.push(d / total);
            }
        }
        let w = 1.0 / (factorial(l) * samples as f64);
        Ok(SimplexRule {
            l,
            kind: SimplexKind::MonteCarlo,
            degree: samples,
            nodes,
            weights: vec![w; samples],
            fell_back: false,
        })
    }

    /// Symmetric rule when the degree is supported, otherwise the seeded
    /// Monte Carlo fallback (flagged via `fell_back`).
    pub fn new(l: usize, degree: usize, mc_samples: usize, seed: u64) -> Result<Self> {
        match Self::symmetric(l, degree) {
            Ok(rule) => Ok(rule),
            Err(CoreError::Unsupported(_)) => {
                let mut rule = Self::monte_carlo(l, mc_samples, seed)?;
                rule.fell_back = true;
                Ok(rule)
            }
            Err(e) => Err(e),
        }
    }

    /// A companion rule of lower order for two-level error estimates.
    pub fn coarse(&self) -> Result<Self> {
        match self.kind {
            SimplexKind::Symmetric => {
                Self::symmetric(self.l, self.degree.saturating_sub(2).max(1))
            }
            SimplexKind::MonteCarlo => {
                // Halving the sample count with a derived seed keeps the
                // companion independent of the fine rule.
                Self::monte_carlo(self.l, (self.degree / 2).max(1), 0x9e3779b97f4a7c15)
            }
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Barycentric coordinates of node `k`.
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * (self.l + 1)..(k + 1) * (self.l + 1)]
    }

    /// Integrate `f` over the simplex (flat measure, mass `1/l!`).
    pub fn integrate(&self, mut f: impl FnMut(&[f64]) -> Complex64) -> Complex64 {
        let vals: Vec<Complex64> = (0..self.len())
            .map(|k| f(self.node(k)) * Complex64::new(self.weights[k], 0.0))
            .collect();
        pairwise_sum(&vals)
    }
}
