//! Spatially uniform steady states.
//!
//! Eliminating σˣ and σʸ from the uniform fixed-point equations leaves a
//! cubic in `s = σᶻ`:
//!
//! ```text
//! -2(μ - 2Js)²(s + 1) - 4Ω²s - (γ²/2)(s + 1) = 0
//! ```
//!
//! with `σʸ = γ(s + 1) / (2Ω)` and `σˣ = 2(μ - 2Js) σʸ / γ`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::polynomial_roots;
use crate::model::{Bloch, BlochField, ModelParams};
use crate::stability::stability_matrix_unchecked;

use super::mf_rhs;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformSteadyState {
    pub bloch: Bloch,
    /// All eigenvalues of the `k = 0` stability matrix have negative real part.
    pub stable_at_k0: bool,
    pub max_re_k0: f64,
}

impl UniformSteadyState {
    pub fn photon_number(&self) -> f64 {
        self.bloch.photon_number()
    }
}

/// Coefficients `[c3, c2, c1, c0]` of the steady-state cubic in σᶻ.
pub fn cubic_coefficients(params: &ModelParams) -> [f64; 4] {
    let (j, mu, om, g) = (params.j, params.mu, params.omega, params.gamma);
    [
        -8.0 * j * j,
        -8.0 * j * j + 8.0 * j * mu,
        -2.0 * mu * mu + 8.0 * j * mu - 4.0 * om * om - 0.5 * g * g,
        -2.0 * mu * mu - 0.5 * g * g,
    ]
}

/// Discriminant of the steady-state cubic; positive means three distinct
/// real roots.
pub fn cubic_discriminant(params: &ModelParams) -> f64 {
    let [a, b, c, d] = cubic_coefficients(params);
    18.0 * a * b * c * d - 4.0 * b * b * b * d + b * b * c * c
        - 4.0 * a * c * c * c
        - 27.0 * a * a * d * d
}

const IMAG_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-9;

fn residual(b: Bloch, params: &ModelParams) -> f64 {
    let p = params.with_coupling(crate::model::CouplingSpec::MeanFieldZ { z: 1 });
    mf_rhs(&BlochField::uniform(b, 1), &p)
        .map(|d| d.sup_norm())
        .unwrap_or(f64::INFINITY)
}

fn reconstruct(s: f64, params: &ModelParams) -> Bloch {
    let (j, mu, om, g) = (params.j, params.mu, params.omega, params.gamma);
    let sy = g * (s + 1.0) / (2.0 * om);
    let sx = 2.0 * (mu - 2.0 * j * s) * sy / g;
    Bloch::new(sx, sy, s)
}

/// Newton refinement of the uniform fixed point on the full 3-vector.
fn refine(mut b: Bloch, params: &ModelParams) -> Bloch {
    for _ in 0..4 {
        if residual(b, params) < 1e-14 {
            break;
        }
        let m = stability_matrix_unchecked(b, params, 0.0);
        let p = params.with_coupling(crate::model::CouplingSpec::MeanFieldZ { z: 1 });
        let Ok(f) = mf_rhs(&BlochField::uniform(b, 1), &p) else {
            break;
        };
        let f = f.sites[0].to_array();
        let a = faer::Mat::<f64>::from_fn(3, 3, |i, k| m[i][k]);
        let dx = crate::linalg::solve_real(&a, &f);
        if dx.iter().any(|v| !v.is_finite()) {
            break;
        }
        let next = Bloch::new(b.x - dx[0], b.y - dx[1], b.z - dx[2]);
        if residual(next, params) < residual(b, params) {
            b = next;
        } else {
            break;
        }
    }
    b
}

/// All physical uniform steady states, sorted from dark to bright.
///
/// The mean-field equations of a uniform state do not depend on the
/// coordination number, so any coupling topology is accepted.
pub fn uniform_steady_states(params: &ModelParams) -> Result<Vec<UniformSteadyState>> {
    params.validate()?;
    let with_flag = |b: Bloch| {
        let m = stability_matrix_unchecked(b, params, 0.0);
        let max_re = crate::linalg::eig3(&m)
            .iter()
            .map(|e| e.re)
            .fold(f64::NEG_INFINITY, f64::max);
        UniformSteadyState {
            bloch: b,
            stable_at_k0: max_re < 0.0,
            max_re_k0: max_re,
        }
    };
    if params.omega == 0.0 {
        return Ok(vec![with_flag(Bloch::VACUUM)]);
    }
    let roots = polynomial_roots(&cubic_coefficients(params))?;
    let mut zs: Vec<f64> = roots
        .iter()
        .filter(|r| r.im.abs() < IMAG_TOL)
        .map(|r| r.re)
        .collect();
    zs.sort_by(f64::total_cmp);
    let mut out: Vec<UniformSteadyState> = Vec::new();
    for s in zs {
        let b = refine(reconstruct(s, params), params);
        if !b.is_finite() || b.norm() > 1.0 + 1e-9 || residual(b, params) > RESIDUAL_TOL {
            continue;
        }
        if out.iter().any(|o| o.bloch.sup_dist(&b) < 1e-12) {
            continue;
        }
        out.push(with_flag(b));
    }
    Ok(out)
}

/// Number of real uniform steady states (1 or 3 away from folds).
pub fn uniform_root_count(params: &ModelParams) -> Result<usize> {
    Ok(uniform_steady_states(params)?.len())
}

fn bisect<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, pred_lo: bool, f: F, tol: f64) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) == pred_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Ω intervals on `[omega_min, omega_max]` where three real uniform roots
/// coexist, located on a grid of `resolution` points and refined by bisection
/// on the root count to `tol`.
pub fn bistable_windows(
    params: &ModelParams,
    omega_min: f64,
    omega_max: f64,
    resolution: usize,
    tol: f64,
) -> Result<Vec<(f64, f64)>> {
    let three = |om: f64| {
        uniform_root_count(&params.with_drive(params.mu, om))
            .map(|c| c == 3)
            .unwrap_or(false)
    };
    let grid: Vec<f64> = (0..resolution)
        .map(|i| omega_min + (omega_max - omega_min) * i as f64 / (resolution - 1) as f64)
        .collect();
    let flags: Vec<bool> = grid.iter().map(|&o| three(o)).collect();
    let mut windows = Vec::new();
    let mut start: Option<f64> = if flags[0] { Some(grid[0]) } else { None };
    for i in 1..grid.len() {
        match (flags[i - 1], flags[i]) {
            (false, true) => start = Some(bisect(grid[i - 1], grid[i], false, three, tol)),
            (true, false) => {
                let end = bisect(grid[i - 1], grid[i], true, three, tol);
                windows.push((start.take().unwrap_or(grid[i - 1]), end));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        windows.push((s, omega_max));
    }
    Ok(windows)
}

/// Sign changes of the cubic discriminant in Ω, refined by bisection.
pub fn discriminant_zeros(
    params: &ModelParams,
    omega_min: f64,
    omega_max: f64,
    resolution: usize,
    tol: f64,
) -> Vec<f64> {
    let positive = |om: f64| cubic_discriminant(&params.with_drive(params.mu, om)) > 0.0;
    let mut zeros = Vec::new();
    let step = (omega_max - omega_min) / (resolution - 1) as f64;
    for i in 1..resolution {
        let (a, b) = (
            omega_min + (i - 1) as f64 * step,
            omega_min + i as f64 * step,
        );
        let pa = positive(a);
        if pa != positive(b) {
            zeros.push(bisect(a, b, pa, positive, tol));
        }
    }
    zeros
}
