use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::model::ModelParams;

/// Memory guard for state vectors.
pub const MAX_PURE_SITES: usize = 14;

/// `H = -Σ_bonds c (σˣσˣ + σʸσʸ) + Ω Σ σˣ - (μ/2) Σ σᶻ`, applied matrix-free.
///
/// On a bond whose two bits differ `σˣσˣ + σʸσʸ` swaps them with amplitude
/// 2; on equal bits the two terms cancel.
#[derive(Debug, Clone)]
pub struct SpinHamiltonian {
    n_sites: usize,
    /// `(mask, amplitude)` per bond, mask covering both sites.
    hops: Vec<(usize, f64)>,
    omega: f64,
    diag: Vec<f64>,
}

impl SpinHamiltonian {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let n = params
            .coupling
            .sites()
            .ok_or(Error::Coupling("a microscopic Hamiltonian"))?;
        if n > MAX_PURE_SITES {
            return Err(Error::TooLarge {
                what: "state vectors",
                n,
                limit: MAX_PURE_SITES,
            });
        }
        let hops = params
            .exchange_bonds()?
            .into_iter()
            .map(|(i, j, c)| ((1usize << i) | (1usize << j), -2.0 * c))
            .collect();
        let diag = (0..1usize << n)
            .map(|s| {
                let up = s.count_ones() as f64;
                -0.5 * params.mu * (2.0 * up - n as f64)
            })
            .collect();
        Ok(SpinHamiltonian {
            n_sites: n,
            hops,
            omega: params.omega,
            diag,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Diagonal (field) part.
    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// `(mask, amplitude)` per bond.
    pub(crate) fn hops(&self) -> &[(usize, f64)] {
        &self.hops
    }

    pub(crate) fn omega(&self) -> f64 {
        self.omega
    }

    /// `out = H psi`.
    pub fn apply_into(&self, psi: &[C64], out: &mut [C64]) {
        for (s, o) in out.iter_mut().enumerate() {
            let mut acc = psi[s] * self.diag[s];
            for &(mask, amp) in &self.hops {
                let b = s & mask;
                if b != 0 && b != mask {
                    acc += psi[s ^ mask] * amp;
                }
            }
            if self.omega != 0.0 {
                let mut field = C64::new(0.0, 0.0);
                for i in 0..self.n_sites {
                    field += psi[s ^ (1 << i)];
                }
                acc += field * self.omega;
            }
            *o = acc;
        }
    }

    /// Calls `f(row, col, value)` for every nonzero matrix element.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        for s in 0..self.dim() {
            if self.diag[s] != 0.0 {
                f(s, s, self.diag[s]);
            }
            for &(mask, amp) in &self.hops {
                let b = s & mask;
                if b != 0 && b != mask {
                    f(s, s ^ mask, amp);
                }
            }
            if self.omega != 0.0 {
                for i in 0..self.n_sites {
                    f(s, s ^ (1 << i), self.omega);
                }
            }
        }
    }
}

pub fn apply_hamiltonian(psi: &[C64], params: &ModelParams) -> Result<Vec<C64>> {
    let h = SpinHamiltonian::new(params)?;
    if psi.len() != h.dim() {
        return Err(Error::Parameter(format!(
            "state has length {}, expected {}",
            psi.len(),
            h.dim()
        )));
    }
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    h.apply_into(psi, &mut out);
    Ok(out)
}

/// Dense real-symmetric Hamiltonian matrix (for oracles and small systems).
pub fn hamiltonian_dense(params: &ModelParams) -> Result<Mat<f64>> {
    let h = SpinHamiltonian::new(params)?;
    let d = h.dim();
    let mut m = Mat::<f64>::zeros(d, d);
    h.for_each_entry(|r, c, v| m[(r, c)] += v);
    Ok(m)
}
