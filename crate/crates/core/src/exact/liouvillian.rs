use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues_complex, solve_complex, C64};
use crate::model::ModelParams;

use super::hamiltonian::SpinHamiltonian;
use super::master::{master_rhs, DensityMatrix};

/// Size guard for `4^N × 4^N` superoperators (4096² complex at N = 6).
pub const MAX_DENSE_SITES: usize = 6;
/// Modulus below which an eigenvalue counts as stationary.
pub const ZERO_MODE_TOL: f64 = 1e-10;

fn guarded(params: &ModelParams) -> Result<SpinHamiltonian> {
    let h = SpinHamiltonian::new(params)?;
    if h.n_sites() > MAX_DENSE_SITES {
        return Err(Error::TooLarge {
            what: "dense Liouvillians",
            n: h.n_sites(),
            limit: MAX_DENSE_SITES,
        });
    }
    Ok(h)
}

/// Dense Lindblad superoperator on column-stacked `vec(ρ)`, index `r + c·d`.
pub fn liouvillian_dense(params: &ModelParams) -> Result<Mat<C64>> {
    let h = guarded(params)?;
    let d = h.dim();
    let n = h.n_sites();
    let g = params.gamma;
    let mut l = Mat::<C64>::zeros(d * d, d * d);
    let mi = C64::new(0.0, -1.0);
    h.for_each_entry(|a, b, v| {
        // 𝟙 ⊗ H: (Hρ)_{ac} picks ρ_{bc}.
        for c in 0..d {
            l[(a + c * d, b + c * d)] += mi * v;
        }
        // Hᵀ ⊗ 𝟙: (ρH)_{rb} picks ρ_{ra} H_{ab}.
        for r in 0..d {
            l[(r + b * d, r + a * d)] -= mi * v;
        }
    });
    for c in 0..d {
        for r in 0..d {
            let row = r + c * d;
            l[(row, row)] -= C64::new(0.5 * g * (r.count_ones() + c.count_ones()) as f64, 0.0);
            for i in 0..n {
                let bit = 1 << i;
                if r & bit == 0 && c & bit == 0 {
                    l[(row, (r | bit) + (c | bit) * d)] += C64::new(g, 0.0);
                }
            }
        }
    }
    Ok(l)
}

/// Unique stationary state from `ℒ vec(ρ) = 0` with one row traded for
/// `Tr ρ = 1`.
pub fn steady_state_dense(params: &ModelParams) -> Result<DensityMatrix> {
    let h = guarded(params)?;
    let d = h.dim();
    let mut l = liouvillian_dense(params)?;
    let full = l.clone();
    for c in 0..d * d {
        l[(0, c)] = C64::new(0.0, 0.0);
    }
    for s in 0..d {
        l[(0, s + s * d)] = C64::new(1.0, 0.0);
    }
    let mut rhs = vec![C64::new(0.0, 0.0); d * d];
    rhs[0] = C64::new(1.0, 0.0);
    let x = solve_complex(&l, &rhs);
    let mut rho = DensityMatrix {
        n_sites: h.n_sites(),
        data: x,
    };
    let finite = rho
        .data
        .iter()
        .all(|v| v.re.is_finite() && v.im.is_finite());
    if finite {
        rho.hermitize();
        let tr = rho.trace().re;
        rho.data.iter_mut().for_each(|v| *v /= tr);
    }
    let residual = if finite {
        master_rhs(&rho, params)?
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    } else {
        f64::INFINITY
    };
    if residual < 1e-10 {
        return Ok(rho);
    }
    let zero_modes = eigenvalues_complex(&full)?
        .iter()
        .filter(|e| e.norm() < ZERO_MODE_TOL)
        .count();
    if zero_modes > 1 {
        Err(Error::Degenerate { zero_modes })
    } else {
        Err(Error::NotStationary { residual })
    }
}

/// All eigenvalues, sorted by decreasing real part.
pub fn liouvillian_spectrum_dense(params: &ModelParams) -> Result<Vec<C64>> {
    let mut ev = eigenvalues_complex(&liouvillian_dense(params)?)?;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    /// `Γ = -max Re ε` over the non-stationary eigenvalues.
    pub gap: f64,
    pub zero_mode: C64,
    /// Eigenvalue attaining the gap.
    pub slowest: C64,
    /// Largest real part of the whole spectrum (≤ 0 up to rounding).
    pub max_re: f64,
}

/// Splits off the single stationary mode and returns the gap.
pub(crate) fn gap_from_spectrum(ev: &[C64]) -> Result<GapReport> {
    if ev.len() < 2 {
        return Err(Error::Eigen(
            "spectrum has fewer than two eigenvalues".into(),
        ));
    }
    let mut by_mod: Vec<usize> = (0..ev.len()).collect();
    by_mod.sort_by(|&a, &b| ev[a].norm().total_cmp(&ev[b].norm()));
    let zero = ev[by_mod[0]];
    let zero_modes = ev.iter().filter(|e| e.norm() < ZERO_MODE_TOL).count();
    if zero_modes > 1 {
        return Err(Error::Degenerate { zero_modes });
    }
    if zero.norm() > 1e-8 {
        return Err(Error::Eigen(format!(
            "no stationary mode; smallest |ε| = {:.3e}",
            zero.norm()
        )));
    }
    let slowest = by_mod[1..]
        .iter()
        .map(|&i| ev[i])
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .unwrap();
    let max_re = ev.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    Ok(GapReport {
        gap: -slowest.re,
        zero_mode: zero,
        slowest,
        max_re,
    })
}

pub fn liouvillian_gap_dense(params: &ModelParams) -> Result<GapReport> {
    gap_from_spectrum(&liouvillian_spectrum_dense(params)?)
}
