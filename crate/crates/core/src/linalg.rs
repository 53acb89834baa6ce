//! Thin wrappers over `faer` dense linear algebra plus small closed-form
//! helpers (3×3 spectra, polynomial roots).

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub fn eigenvalues_real(m: &Mat<f64>) -> Result<Vec<C64>> {
    m.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub fn eigenvalues_complex(m: &Mat<C64>) -> Result<Vec<C64>> {
    m.eigenvalues().map_err(|e| Error::Eigen(format!("{e:?}")))
}

/// Eigenvalues of a Hermitian matrix in nondecreasing order.
pub fn hermitian_eigenvalues(m: &Mat<C64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Eigen(format!("{e:?}")))
}

pub fn solve_real(a: &Mat<f64>, b: &[f64]) -> Vec<f64> {
    let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

pub fn solve_complex(a: &Mat<C64>, b: &[C64]) -> Vec<C64> {
    let rhs = Mat::<C64>::from_fn(b.len(), 1, |i, _| b[i]);
    let x = a.partial_piv_lu().solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

/// Roots of `c[0] xⁿ + c[1] xⁿ⁻¹ + … + c[n]` from the companion matrix.
///
/// Leading zero coefficients are dropped, so a cubic with vanishing
/// leading term degrades to a quadratic.
pub fn polynomial_roots(coeffs: &[f64]) -> Result<Vec<C64>> {
    let scale = coeffs.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let first = coeffs
        .iter()
        .position(|c| c.abs() > 1e-300 && c.abs() > scale * 1e-14);
    let Some(first) = first else {
        return Err(Error::Parameter("polynomial is identically zero".into()));
    };
    let c = &coeffs[first..];
    let deg = c.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let lead = c[0];
    let comp = Mat::<f64>::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -c[j + 1] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let mut roots = eigenvalues_real(&comp)?;
    // one Newton polish in complex arithmetic
    for r in roots.iter_mut() {
        let (mut p, mut dp) = (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        for &ck in c {
            dp = dp * *r + p;
            p = p * *r + ck;
        }
        if dp.norm() > 0.0 {
            let step = p / dp;
            if step.is_finite() && step.norm() < 1e-3 * (1.0 + r.norm()) {
                *r -= step;
            }
        }
    }
    Ok(roots)
}

/// Eigenvalues of a real 3×3 matrix from the closed-form characteristic cubic,
/// with a companion-matrix fallback when the closed form loses accuracy.
pub fn eig3(m: &[[f64; 3]; 3]) -> [C64; 3] {
    let tr = m[0][0] + m[1][1] + m[2][2];
    let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2]
        - m[1][2] * m[2][1];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    // λ³ + a λ² + b λ + c
    let (a, b, c) = (-tr, minors, -det);
    let roots = cubic_roots_closed(a, b, c);
    let scale = 1.0 + m.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs()));
    let ok = roots.iter().all(|r| {
        let p = ((r + a) * r + b) * r + c;
        r.is_finite() && p.norm() <= 1e-9 * scale * scale * scale
    });
    if ok {
        return roots;
    }
    match polynomial_roots(&[1.0, a, b, c]) {
        Ok(v) if v.len() == 3 => [v[0], v[1], v[2]],
        _ => roots,
    }
}

/// Monic cubic `x³ + a x² + b x + c` via Cardano / trigonometric forms.
fn cubic_roots_closed(a: f64, b: f64, c: f64) -> [C64; 3] {
    let shift = a / 3.0;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    let polish = |x: f64| {
        let mut x = x;
        for _ in 0..2 {
            let f = ((x + a) * x + b) * x + c;
            let df = (3.0 * x + 2.0 * a) * x + b;
            if df.abs() > 1e-300 {
                x -= f / df;
            }
        }
        x
    };
    if disc > 0.0 {
        let sd = disc.sqrt();
        let u = (-q / 2.0 + sd).cbrt();
        let v = (-q / 2.0 - sd).cbrt();
        let r1 = polish(u + v - shift);
        // deflate: x² + (a + r1) x + (b + (a + r1) r1)
        let bb = a + r1;
        let cc = b + bb * r1;
        let d2 = bb * bb / 4.0 - cc;
        let (re, im) = if d2 < 0.0 {
            (-bb / 2.0, (-d2).sqrt())
        } else {
            (-bb / 2.0, 0.0)
        };
        if d2 < 0.0 {
            [C64::new(r1, 0.0), C64::new(re, im), C64::new(re, -im)]
        } else {
            let s = d2.sqrt();
            [
                C64::new(r1, 0.0),
                C64::new(re + s, 0.0),
                C64::new(re - s, 0.0),
            ]
        }
    } else {
        let r = (-p / 3.0).max(0.0).sqrt();
        let arg = if r > 0.0 {
            (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let phi = arg.acos() / 3.0;
        let tau = std::f64::consts::TAU / 3.0;
        [0.0, 1.0, 2.0].map(|k| C64::new(polish(2.0 * r * (phi - k * tau).cos() - shift), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn companion_roots_of_known_cubic() {
        // (x - 1)(x - 2)(x + 3) = x³ - 7x + 6
        let r = sorted(polynomial_roots(&[1.0, 0.0, -7.0, 6.0]).unwrap());
        for (got, want) in r.iter().zip([-3.0, 1.0, 2.0]) {
            assert!((got - C64::new(want, 0.0)).norm() < 1e-12);
        }
        // leading zero drops the degree
        let r = polynomial_roots(&[0.0, 1.0, 0.0, -4.0]).unwrap();
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn eig3_matches_companion_on_random_matrices() {
        let mut state = 12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 10.0 - 5.0
        };
        for _ in 0..200 {
            let m = [
                [next(), next(), next()],
                [next(), next(), next()],
                [next(), next(), next()],
            ];
            let closed = sorted(eig3(&m).to_vec());
            let dense = sorted(eigenvalues_real(&Mat::from_fn(3, 3, |i, j| m[i][j])).unwrap());
            for (a, b) in closed.iter().zip(&dense) {
                assert!((a - b).norm() < 1e-9, "{closed:?} vs {dense:?}");
            }
        }
    }

    #[test]
    fn eig3_degenerate_diagonal() {
        let m = [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]];
        for e in eig3(&m) {
            assert!((e - C64::new(-1.0, 0.0)).norm() < 1e-7);
        }
    }
}
