//! Built-in potential families.

use std::sync::Arc;

use num_complex::Complex64;

use super::{DecayInfo, PotentialField, SphereField};
use crate::clifford::pauli;
use crate::error::{CoreError, Result};
use crate::linalg::CMatrix;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>()
}

/// Constant diagonal field: `A(x) = diag(values)` everywhere.
pub fn constant(d: usize, values: &[f64]) -> Result<PotentialField> {
    let m = values.len();
    let mat = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        m,
        values.iter().map(|&v| c(v, 0.0)),
    ));
    let mat_eval = mat.clone();
    let eval = move |_: &[f64]| mat_eval.clone();
    let grad = move |_: &[f64]| vec![CMatrix::zeros(m, m); d];
    PotentialField::new(
        d,
        m,
        format!("constant({values:?})"),
        Arc::new(eval),
        Some(Arc::new(grad)),
        None,
        DecayInfo { gradient: f64::INFINITY, radial: f64::INFINITY },
    )
}

/// Scalar model (`m = 1`): `A(x) = x_1 / sqrt(1 + |x|^2)`.
pub fn scalar(d: usize) -> Result<PotentialField> {
    let eval = move |x: &[f64]| {
        let g = 1.0 / (1.0 + norm2(x)).sqrt();
        CMatrix::from_element(1, 1, c(x[0] * g, 0.0))
    };
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let g = 1.0 / (1.0 + norm2(x)).sqrt();
        let g3 = g * g * g;
        (0..d)
            .map(|i| {
                let v = if i == 0 { g - x[0] * x[i] * g3 } else { -x[0] * x[i] * g3 };
                CMatrix::from_element(1, 1, c(v, 0.0))
            })
            .collect()
    };
    PotentialField::new(
        d,
        1,
        "scalar",
        Arc::new(eval),
        Some(Arc::new(grad)),
        None,
        DecayInfo { gradient: 1.0, radial: 3.0 },
    )
}

/// The hedgehog family on `R^3`:
/// `A(x) = s * (sigma . u) / sqrt(1 + s^2 |u|^2)` with `u = x - shift`.
///
/// Its radial limit is the unit hedgehog `sigma . y`, the canonical index `-1`
/// configuration. Gradients are analytic.
pub fn hedgehog(scale: f64, shift: [f64; 3]) -> Result<PotentialField> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(CoreError::InvalidInput(format!("hedgehog scale must be positive, got {scale}")));
    }
    let [s1, s2, s3] = pauli();
    let sigma = [s1, s2, s3];
    let sig_eval = sigma.clone();
    let eval = move |x: &[f64]| -> CMatrix {
        let u = [x[0] - shift[0], x[1] - shift[1], x[2] - shift[2]];
        let g = 1.0 / (1.0 + scale * scale * norm2(&u)).sqrt();
        let mut a = CMatrix::zeros(2, 2);
        for (k, s) in sig_eval.iter().enumerate() {
            a += s.map(|z| z * c(scale * u[k] * g, 0.0));
        }
        a
    };
    let sig_grad = sigma.clone();
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let u = [x[0] - shift[0], x[1] - shift[1], x[2] - shift[2]];
        let g = 1.0 / (1.0 + scale * scale * norm2(&u)).sqrt();
        let g3 = g * g * g;
        let mut sig_u = CMatrix::zeros(2, 2);
        for (k, s) in sig_grad.iter().enumerate() {
            sig_u += s.map(|z| z * c(u[k], 0.0));
        }
        (0..3)
            .map(|i| {
                sig_grad[i].map(|z| z * c(scale * g, 0.0))
                    - sig_u.map(|z| z * c(scale.powi(3) * u[i] * g3, 0.0))
            })
            .collect()
    };
    PotentialField::new(
        3,
        2,
        format!("hedgehog(scale={scale},shift={shift:?})"),
        Arc::new(eval),
        Some(Arc::new(grad)),
        None,
        // Gradient components fall off like 1/|x|; purely radial derivatives
        // like 1/|x|^3 (the angular part is exactly scale-free at infinity).
        DecayInfo { gradient: 1.0, radial: 3.0 },
    )
}

/// The unit hedgehog on the sphere: `A^o(y) = sigma . y`, with the analytic
/// tangential gradient of its 0-homogeneous extension.
pub fn hedgehog_limit() -> Result<SphereField> {
    let [s1, s2, s3] = pauli();
    let sigma = [s1, s2, s3];
    let sig_eval = sigma.clone();
    let eval = move |y: &[f64]| -> CMatrix {
        let mut a = CMatrix::zeros(2, 2);
        for (k, s) in sig_eval.iter().enumerate() {
            a += s.map(|z| z * c(y[k], 0.0));
        }
        a
    };
    // d/dx_i (sigma . x/|x|) at |x| = 1 is sigma_i - y_i (sigma . y).
    let grad = move |y: &[f64]| -> Vec<CMatrix> {
        let mut sig_y = CMatrix::zeros(2, 2);
        for (k, s) in sigma.iter().enumerate() {
            sig_y += s.map(|z| z * c(y[k], 0.0));
        }
        (0..3)
            .map(|i| &sigma[i] - sig_y.map(|z| z * c(y[i], 0.0)))
            .collect()
    };
    Ok(SphereField::new(3, 2, "hedgehog_limit", Arc::new(eval), Some(Arc::new(grad))))
}

/// A bounded field with no radial limit: `A(x) = sin(|x|) sigma_3`.
/// Used as a negative control for limit detection and audits.
pub fn oscillating(d: usize) -> Result<PotentialField> {
    let [_, _, s3] = pauli();
    let eval = move |x: &[f64]| -> CMatrix {
        let r = norm2(x).sqrt();
        s3.map(|z| z * c(r.sin(), 0.0))
    };
    PotentialField::new(
        d,
        2,
        "oscillating",
        Arc::new(eval),
        None,
        None,
        DecayInfo { gradient: 0.0, radial: 0.0 },
    )
}

/// A field whose gradient does not decay: `A(x) = sqrt(1 + |x|^2) sigma_3`.
/// Negative control for the decay audit.
pub fn linear_growth(d: usize) -> Result<PotentialField> {
    let [_, _, s3] = pauli();
    let s3_eval = s3.clone();
    let eval = move |x: &[f64]| -> CMatrix {
        let w = (1.0 + norm2(x)).sqrt();
        s3_eval.map(|z| z * c(w, 0.0))
    };
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let w = (1.0 + norm2(x)).sqrt();
        (0..d).map(|i| s3.map(|z| z * c(x[i] / w, 0.0))).collect()
    };
    PotentialField::new(
        d,
        2,
        "linear_growth",
        Arc::new(eval),
        Some(Arc::new(grad)),
        None,
        DecayInfo { gradient: 0.0, radial: 0.0 },
    )
}

/// Block-diagonal direct sum of two fields over the same base space.
pub fn direct_sum(a: &PotentialField, b: &PotentialField) -> Result<PotentialField> {
    if a.d != b.d {
        return Err(CoreError::InvalidInput(format!(
            "direct sum needs matching base dimension, got {} and {}",
            a.d, b.d
        )));
    }
    let d = a.d;
    let (ma, mb) = (a.m, b.m);
    let m = ma + mb;
    let embed = move |top: &CMatrix, bottom: &CMatrix| -> CMatrix {
        let mut out = CMatrix::zeros(m, m);
        out.view_mut((0, 0), (ma, ma)).copy_from(top);
        out.view_mut((ma, ma), (mb, mb)).copy_from(bottom);
        out
    };
    let (fa, fb) = (a.clone(), b.clone());
    let eval = move |x: &[f64]| embed(&fa.eval(x), &fb.eval(x));
    let (ga, gb) = (a.clone(), b.clone());
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let gsa = ga.grad(x);
        let gsb = gb.grad(x);
        gsa.iter().zip(&gsb).map(|(p, q)| embed(p, q)).collect()
    };
    // With distinct x_ref values the sum would mix reference points; use a's.
    let x_ref = a.x_ref.clone();
    PotentialField::new(
        d,
        m,
        format!("sum({},{})", a.id, b.id),
        Arc::new(eval),
        Some(Arc::new(grad)),
        Some(x_ref),
        DecayInfo {
            gradient: a.decay.gradient.min(b.decay.gradient),
            radial: a.decay.radial.min(b.decay.radial),
        },
    )
}

/// Higher-dimensional hedgehog on `R^5` (`m = 4`), built from the Hermitian
/// basis `i c^j` of the rank-4 anticommuting generators: `A = (gamma . x) / <x>`.
pub fn hedgehog_d5() -> Result<PotentialField> {
    let rep = crate::clifford::build_clifford(5)?;
    let gammas: Vec<CMatrix> =
        rep.generators.iter().map(|g| g.map(|z| z * c(0.0, 1.0))).collect();
    let g_eval = gammas.clone();
    let eval = move |x: &[f64]| -> CMatrix {
        let g = 1.0 / (1.0 + norm2(x)).sqrt();
        let mut a = CMatrix::zeros(4, 4);
        for (k, s) in g_eval.iter().enumerate() {
            a += s.map(|z| z * c(x[k] * g, 0.0));
        }
        a
    };
    let grad = move |x: &[f64]| -> Vec<CMatrix> {
        let g = 1.0 / (1.0 + norm2(x)).sqrt();
        let g3 = g * g * g;
        let mut gam_x = CMatrix::zeros(4, 4);
        for (k, s) in gammas.iter().enumerate() {
            gam_x += s.map(|z| z * c(x[k], 0.0));
        }
        (0..5)
            .map(|i| {
                gammas[i].map(|z| z * c(g, 0.0)) - gam_x.map(|z| z * c(x[i] * g3, 0.0))
            })
            .collect()
    };
    PotentialField::new(
        5,
        4,
        "hedgehog_d5",
        Arc::new(eval),
        Some(Arc::new(grad)),
        None,
        DecayInfo { gradient: 1.0, radial: 3.0 },
    )
}

/// Resolve a field by name for the command-line interface.
///
/// Recognized names: `hedgehog`, `hedgehog:<scale>`,
/// `hedgehog:<scale>:<s1>,<s2>,<s3>`, `scalar`, `scalar:<d>`, `constant:<v1,...>`,
/// `oscillating`, `linear-growth`, `hedgehog-d5`, `sum:<name>+<name>`.
pub fn by_name(name: &str) -> Result<PotentialField> {
    let unknown = || {
        CoreError::InvalidInput(format!(
            "unknown field '{name}' (try hedgehog, hedgehog:<scale>, \
             hedgehog:<scale>:<x,y,z>, scalar[:d], constant:<diag,...>, oscillating, \
             linear-growth, hedgehog-d5, sum:<a>+<b>)"
        ))
    };
    if let Some(rest) = name.strip_prefix("sum:") {
        let (la, lb) = rest.split_once('+').ok_or_else(unknown)?;
        return direct_sum(&by_name(la)?, &by_name(lb)?);
    }
    let mut parts = name.split(':');
    match parts.next().ok_or_else(unknown)? {
        "hedgehog" => {
            let scale = match parts.next() {
                Some(s) => s
                    .parse::<f64>()
                    .map_err(|_| CoreError::InvalidInput(format!("bad hedgehog scale '{s}'")))?,
                None => 1.0,
            };
            let shift = match parts.next() {
                Some(s) => {
                    let vals: Vec<f64> = s
                        .split(',')
                        .map(|v| v.parse::<f64>())
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| {
                            CoreError::InvalidInput(format!("bad hedgehog shift '{s}'"))
                        })?;
                    if vals.len() != 3 {
                        return Err(CoreError::InvalidInput("hedgehog shift needs 3 components".into()));
                    }
                    [vals[0], vals[1], vals[2]]
                }
                None => [0.0; 3],
            };
            hedgehog(scale, shift)
        }
        "scalar" => {
            let d = match parts.next() {
                Some(s) => s
                    .parse::<usize>()
                    .map_err(|_| CoreError::InvalidInput(format!("bad dimension '{s}'")))?,
                None => 1,
            };
            scalar(d)
        }
        "constant" => {
            let spec = parts.next().ok_or_else(unknown)?;
            let vals: Vec<f64> = spec
                .split(',')
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| CoreError::InvalidInput(format!("bad constant diagonal '{spec}'")))?;
            constant(3, &vals)
        }
        "oscillating" => oscillating(3),
        "linear-growth" => linear_growth(3),
        "hedgehog-d5" => hedgehog_d5(),
        _ => Err(unknown()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::potential::fd_gradient;

    #[test]
    fn scalar_gradient_matches_fd() {
        let f = scalar(3).unwrap();
        let x = [0.4, -1.2, 0.7];
        let exact = f.grad(&x);
        let eval = |p: &[f64]| f.eval(p);
        for (a, b) in exact.iter().zip(fd_gradient(&eval, &x, 1e-5)) {
            assert!(max_abs(&(a - b)) < 1e-9);
        }
    }

    #[test]
    fn hedgehog_shift_and_scale() {
        // With shift s the field vanishes at x = s.
        let f = hedgehog(2.0, [1.0, -0.5, 0.25]).unwrap();
        assert!(max_abs(&f.eval(&[1.0, -0.5, 0.25])) == 0.0);
        // Scale controls the saturation rate: at u = e1/s, g = 1/sqrt(2).
        let g = hedgehog(4.0, [0.0; 3]).unwrap();
        let a = g.eval(&[0.25, 0.0, 0.0]);
        let [s1, _, _] = pauli();
        let expected = s1.map(|z| z * c(1.0 / 2.0f64.sqrt(), 0.0));
        assert!(max_abs(&(a - expected)) < 1e-15);
    }

    #[test]
    fn hedgehog_d5_gradient_matches_fd() {
        let f = hedgehog_d5().unwrap();
        let x = [0.3, -0.2, 0.8, 0.1, -0.5];
        let exact = f.grad(&x);
        let eval = |p: &[f64]| f.eval(p);
        for (a, b) in exact.iter().zip(fd_gradient(&eval, &x, 1e-5)) {
            assert!(max_abs(&(a - b)) < 1e-9);
        }
    }

    #[test]
    fn direct_sum_blocks() {
        let a = hedgehog(1.0, [0.0; 3]).unwrap();
        let b = scalar(3).unwrap();
        let s = direct_sum(&a, &b).unwrap();
        assert_eq!(s.m, 3);
        let x = [0.5, -0.3, 0.9];
        let sa = s.eval(&x);
        let va = a.eval(&x);
        let vb = b.eval(&x);
        assert!(max_abs(&(sa.view((0, 0), (2, 2)).clone_owned() - va)) == 0.0);
        assert_eq!(sa[(2, 2)], vb[(0, 0)]);
        assert_eq!(sa[(0, 2)], c(0.0, 0.0));
        // Gradients are block-diagonal as well.
        let gs = s.grad(&x);
        let ga = a.grad(&x);
        for (g, p) in gs.iter().zip(&ga) {
            assert!(max_abs(&(g.view((0, 0), (2, 2)).clone_owned() - p)) < 1e-15);
        }
    }

    #[test]
    fn sphere_limit_gradient_is_tangential_and_matches_sampled_field() {
        let lim = hedgehog_limit().unwrap();
        let y = {
            let v = [0.6, -0.3, 0.9];
            let n = (v.iter().map(|c| c * c).sum::<f64>()).sqrt();
            [v[0] / n, v[1] / n, v[2] / n]
        };
        let gs = lim.grad(&y);
        let mut radial = CMatrix::zeros(2, 2);
        for (i, g) in gs.iter().enumerate() {
            radial += g.map(|z| z * c(y[i], 0.0));
        }
        assert!(max_abs(&radial) < 1e-14);
        // Sampling the decaying hedgehog at a large radius approximates the
        // same limit object, gradients included.
        let f = hedgehog(1.0, [0.0; 3]).unwrap();
        let sampled = SphereField::from_field_at(&f, 4000.0);
        assert!(max_abs(&(sampled.eval(&y) - lim.eval(&y))) < 1e-6);
        for (a, b) in sampled.grad(&y).iter().zip(&gs) {
            assert!(max_abs(&(a - b)) < 1e-5);
        }
    }

    #[test]
    fn name_registry_round_trip() {
        assert_eq!(by_name("hedgehog").unwrap().id, "hedgehog(scale=1,shift=[0.0, 0.0, 0.0])");
        assert_eq!(by_name("hedgehog:2.5").unwrap().m, 2);
        assert_eq!(by_name("hedgehog:1:0.5,0,0").unwrap().m, 2);
        assert_eq!(by_name("scalar").unwrap().d, 1);
        assert_eq!(by_name("scalar:3").unwrap().d, 3);
        assert_eq!(by_name("constant:1,-1").unwrap().m, 2);
        assert_eq!(by_name("sum:hedgehog+scalar:3").unwrap().m, 3);
        assert_eq!(by_name("hedgehog-d5").unwrap().d, 5);
        assert!(by_name("nonsense").is_err());
        assert!(by_name("hedgehog:abc").is_err());
    }
}
