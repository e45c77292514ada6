//! Unitary propagators for the matrix equation `u'(y) = i A(y) u(y)` with a
//! Hermitian one-parameter family `A`.
//!
//! Two single-step schemes are provided, both preserving unitarity exactly at
//! the level of each exponential:
//!
//! * midpoint exponential, order 2: `exp(i h A(y + h/2))`;
//! * a commutator-free fourth-order scheme built from two exponentials of
//!   weighted combinations of the two Gauss nodes inside the step.
//!
//! Step control uses step doubling: the step is accepted when the whole-step
//! and two-half-step propagators agree within the local budget, and the more
//! accurate two-half-step result is kept. Accepted products are re-projected
//! onto the unitary group to stop roundoff drift.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::{max_abs, polar_project, unitarity_residual, unitary_exp_i, CMatrix};

/// Single-step scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    /// Exponential midpoint rule, second order.
    Midpoint,
    /// Commutator-free fourth-order scheme (two exponentials per step).
    CommutatorFree4,
}

impl Method {
    pub fn order(self) -> u32 {
        match self {
            Method::Midpoint => 2,
            Method::CommutatorFree4 => 4,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CoreError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" => Ok(Method::Midpoint),
            "cf4" => Ok(Method::CommutatorFree4),
            other => Err(CoreError::InvalidInput(format!(
                "unknown method '{other}' (expected midpoint or cf4)"
            ))),
        }
    }
}

/// Options for [`propagate`].
#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub method: Method,
    /// Target for the accumulated local error over the whole interval.
    pub tol: f64,
    /// Initial step size.
    pub h_init: f64,
    /// Smallest step before giving up.
    pub h_min: f64,
    /// Hard cap on accepted steps.
    pub max_steps: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            method: Method::CommutatorFree4,
            tol: 1e-10,
            h_init: 1e-2,
            h_min: 1e-10,
            max_steps: 2_000_000,
        }
    }
}

/// Result of a propagation.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// `U(y2, y1)`: maps data at `y1` to data at `y2`.
    pub propagator: CMatrix,
    pub steps: usize,
    pub rejected: usize,
    /// Sum of accepted local error estimates.
    pub error_estimate: f64,
    /// `|U* U - 1|` of the final propagator.
    pub unitarity_residual: f64,
}

fn single_step(
    gen: &dyn Fn(f64) -> CMatrix,
    y: f64,
    h: f64,
    method: Method,
) -> Result<CMatrix> {
    match method {
        Method::Midpoint => {
            let a = gen(y + 0.5 * h);
            unitary_exp_i(&(a * Complex64::new(h, 0.0)))
        }
        Method::CommutatorFree4 => {
            // Gauss nodes inside the step and their CF4 weights:
            // first applied exponential weights the early node more heavily.
            let s3 = 3.0f64.sqrt();
            let c1 = 0.5 - s3 / 6.0;
            let c2 = 0.5 + s3 / 6.0;
            let alpha = 0.25 + s3 / 6.0;
            let beta = 0.25 - s3 / 6.0;
            let a1 = gen(y + c1 * h);
            let a2 = gen(y + c2 * h);
            let first = &a1 * Complex64::new(alpha * h, 0.0) + &a2 * Complex64::new(beta * h, 0.0);
            let second = &a1 * Complex64::new(beta * h, 0.0) + &a2 * Complex64::new(alpha * h, 0.0);
            Ok(unitary_exp_i(&second)? * unitary_exp_i(&first)?)
        }
    }
}

/// Fixed-step propagator over `n` uniform steps (used for convergence
/// studies and as a brute-force reference in tests).
pub fn propagate_fixed(
    gen: &dyn Fn(f64) -> CMatrix,
    y1: f64,
    y2: f64,
    n: usize,
    method: Method,
) -> Result<CMatrix> {
    if n == 0 {
        return Err(CoreError::InvalidInput("need at least one step".into()));
    }
    let probe = gen(y1);
    let m = probe.nrows();
    let mut u = CMatrix::identity(m, m);
    let h = (y2 - y1) / n as f64;
    for k in 0..n {
        let y = y1 + k as f64 * h;
        u = single_step(gen, y, h, method)? * u;
    }
    Ok(u)
}

/// Adaptive propagator `U(y2, y1)` for `u' = i A(y) u`.
///
/// Descending intervals are handled by propagating the reversed interval and
/// returning the adjoint (the inverse, by unitarity).
pub fn propagate(
    gen: &dyn Fn(f64) -> CMatrix,
    y1: f64,
    y2: f64,
    opts: &EvolveOptions,
) -> Result<Propagation> {
    let probe = gen(y1);
    let m = probe.nrows();
    if m == 0 || probe.ncols() != m {
        return Err(CoreError::InvalidInput("generator must produce square matrices".into()));
    }
    if y1 == y2 {
        return Ok(Propagation {
            propagator: CMatrix::identity(m, m),
            steps: 0,
            rejected: 0,
            error_estimate: 0.0,
            unitarity_residual: 0.0,
        });
    }
    if y2 < y1 {
        let mut fwd = propagate(gen, y2, y1, opts)?;
        fwd.propagator = fwd.propagator.adjoint();
        return Ok(fwd);
    }

    let length = y2 - y1;
    let p = opts.method.order();
    let mut h = opts.h_init.min(length);
    let mut y = y1;
    let mut u = CMatrix::identity(m, m);
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut error_estimate = 0.0f64;

    while y < y2 {
        if steps + rejected > opts.max_steps {
            return Err(CoreError::NonConvergence(format!(
                "step budget exhausted at y = {y:.6} (accepted {steps}, rejected {rejected})"
            )));
        }
        h = h.min(y2 - y);
        let full = single_step(gen, y, h, opts.method)?;
        let half1 = single_step(gen, y, 0.5 * h, opts.method)?;
        let half2 = single_step(gen, y + 0.5 * h, 0.5 * h, opts.method)?;
        let fine = half2 * half1;
        let err = max_abs(&(&full - &fine));
        // Local budget proportional to the step's share of the interval, but
        // never below the roundoff floor of forming the two propagators —
        // otherwise tight tolerances reject every step once the truncation
        // error drops beneath machine noise.
        let budget = (opts.tol * h / length).max(32.0 * f64::EPSILON);
        if err <= budget || h <= opts.h_min {
            u = &fine * &u;
            u = polar_project(&u)?;
            y += h;
            steps += 1;
            error_estimate += err;
        } else {
            rejected += 1;
        }
        let scale = if err > 0.0 {
            0.9 * (budget / err).powf(1.0 / (p as f64 + 1.0))
        } else {
            4.0
        };
        h = (h * scale.clamp(0.2, 4.0)).max(opts.h_min);
    }

    Ok(Propagation {
        unitarity_residual: unitarity_residual(&u),
        propagator: u,
        steps,
        rejected,
        error_estimate,
    })
}

/// Whole-line propagator for a compactly supported generator, with an
/// enlargement diagnostic.
#[derive(Debug, Clone)]
pub struct LoopUnitary {
    /// `U(y_max, -y_max)`.
    pub unitary: CMatrix,
    /// Difference against the propagator over the 1.25x larger interval;
    /// nonzero values mean `y_max` truncates the generator's support.
    pub interval_residual: f64,
    pub steps: usize,
}

/// Compute `U(y_max, -y_max)` and compare with the interval enlarged by 25%
/// to verify the generator is fully contained.
pub fn loop_unitary(
    gen: &dyn Fn(f64) -> CMatrix,
    y_max: f64,
    opts: &EvolveOptions,
) -> Result<LoopUnitary> {
    if !(y_max > 0.0) {
        return Err(CoreError::InvalidInput("y_max must be positive".into()));
    }
    let inner = propagate(gen, -y_max, y_max, opts)?;
    let outer = propagate(gen, -1.25 * y_max, 1.25 * y_max, opts)?;
    Ok(LoopUnitary {
        interval_residual: max_abs(&(&outer.propagator - &inner.propagator)),
        unitary: inner.propagator,
        steps: inner.steps + outer.steps,
    })
}
