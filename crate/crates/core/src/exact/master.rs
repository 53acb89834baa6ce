use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigenvalues, C64};
use crate::model::{Bloch, ModelParams};
use crate::ode::Rk4;

use super::hamiltonian::SpinHamiltonian;
use super::{pauli_action, Pauli};

/// Memory guard for density matrices (`4^N` entries).
pub const MAX_RHO_SITES: usize = 8;

/// Column-major `2^N × 2^N` density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    pub n_sites: usize,
    pub data: Vec<C64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r + c * self.dim()]
    }

    /// Projector onto a basis state.
    pub fn basis(n_sites: usize, s: usize) -> Self {
        let d = 1usize << n_sites;
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        data[s + s * d] = C64::new(1.0, 0.0);
        DensityMatrix { n_sites, data }
    }

    pub fn vacuum(n_sites: usize) -> Self {
        Self::basis(n_sites, 0)
    }

    pub fn from_pure(psi: &[C64]) -> Self {
        let d = psi.len();
        let n_sites = d.trailing_zeros() as usize;
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for c in 0..d {
            for r in 0..d {
                data[r + c * d] = psi[r] * psi[c].conj();
            }
        }
        DensityMatrix { n_sites, data }
    }

    /// `⊗ᵢ (𝟙 + sᵢ·σ)/2`.
    pub fn product(sites: &[Bloch]) -> Self {
        let n_sites = sites.len();
        let d = 1usize << n_sites;
        let single: Vec<[[C64; 2]; 2]> = sites
            .iter()
            .map(|b| {
                // Rows/cols: 0 = empty, 1 = excited.
                let p = C64::new(b.x, -b.y) * 0.5;
                [
                    [C64::new((1.0 - b.z) / 2.0, 0.0), p.conj()],
                    [p, C64::new((1.0 + b.z) / 2.0, 0.0)],
                ]
            })
            .collect();
        let mut data = vec![C64::new(0.0, 0.0); d * d];
        for c in 0..d {
            for r in 0..d {
                let mut v = C64::new(1.0, 0.0);
                for (i, m) in single.iter().enumerate() {
                    v *= m[(r >> i) & 1][(c >> i) & 1];
                }
                data[r + c * d] = v;
            }
        }
        DensityMatrix { n_sites, data }
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim()).map(|s| self.get(s, s)).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut e = 0.0f64;
        for c in 0..d {
            for r in 0..=c {
                e = e.max((self.get(r, c) - self.get(c, r).conj()).norm());
            }
        }
        e
    }

    pub fn hermitize(&mut self) {
        let d = self.dim();
        for c in 0..d {
            for r in 0..=c {
                let v = (self.get(r, c) + self.get(c, r).conj()) * 0.5;
                self.data[r + c * d] = v;
                self.data[c + r * d] = v.conj();
            }
        }
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let d = self.dim();
        let m = Mat::<C64>::from_fn(d, d, |r, c| self.get(r, c));
        Ok(hermitian_eigenvalues(&m)?[0])
    }

    /// `Tr(P ρ)` for a Pauli string on distinct sites.
    pub fn pauli_expectation(&self, ops: &[(usize, Pauli)]) -> f64 {
        // Tr(Pρ) = Σ_t phase(t) ρ[t ⊕ flip, t].
        let mut acc = C64::new(0.0, 0.0);
        for t in 0..self.dim() {
            let (ph, flip) = pauli_action(ops, t);
            acc += ph * self.get(t, t ^ flip);
        }
        acc.re
    }

    pub fn bloch(&self, site: usize) -> Bloch {
        Bloch {
            x: self.pauli_expectation(&[(site, Pauli::X)]),
            y: self.pauli_expectation(&[(site, Pauli::Y)]),
            z: self.pauli_expectation(&[(site, Pauli::Z)]),
        }
    }

    /// `⟨N̂⟩` and `⟨N̂²⟩` from the diagonal.
    pub fn number_moments(&self) -> (f64, f64) {
        let (mut n1, mut n2) = (0.0, 0.0);
        for s in 0..self.dim() {
            let p = self.get(s, s).re;
            let k = s.count_ones() as f64;
            n1 += p * k;
            n2 += p * k * k;
        }
        (n1, n2)
    }

    pub fn photon_number(&self) -> f64 {
        self.number_moments().0
    }

    /// `⟨N̂²⟩ - ⟨N̂⟩²`.
    pub fn number_variance(&self) -> f64 {
        let (n1, n2) = self.number_moments();
        n2 - n1 * n1
    }

    /// Connected `σʸσʸ` correlator at separation `r`, averaged over sites of a ring.
    pub fn sigma_y_correlation(&self, r: usize) -> f64 {
        let n = self.n_sites;
        let mut acc = 0.0;
        for j in 0..n {
            let k = (j + r) % n;
            let yy = if k == j {
                1.0
            } else {
                self.pauli_expectation(&[(j, Pauli::Y), (k, Pauli::Y)])
            };
            acc += yy
                - self.pauli_expectation(&[(j, Pauli::Y)])
                    * self.pauli_expectation(&[(k, Pauli::Y)]);
        }
        acc / n as f64
    }

    pub fn sup_dist(&self, other: &DensityMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Matrix-free Lindblad generator with decay `σ⁻ᵢ` at rate `γ`.
#[derive(Debug, Clone)]
pub struct MasterEquation {
    h: SpinHamiltonian,
    gamma: f64,
    col: Vec<C64>,
    hcol: Vec<C64>,
}

impl MasterEquation {
    pub fn new(params: &ModelParams) -> Result<Self> {
        let h = SpinHamiltonian::new(params)?;
        if h.n_sites() > MAX_RHO_SITES {
            return Err(Error::TooLarge {
                what: "density matrices",
                n: h.n_sites(),
                limit: MAX_RHO_SITES,
            });
        }
        let d = h.dim();
        Ok(MasterEquation {
            h,
            gamma: params.gamma,
            col: vec![C64::default(); d],
            hcol: vec![C64::default(); d],
        })
    }

    pub fn n_sites(&self) -> usize {
        self.h.n_sites()
    }

    /// `drho = -i[H, ρ] + γ Σᵢ (σ⁻ᵢ ρ σ⁺ᵢ - ½{n̂ᵢ, ρ})` on column-major buffers.
    pub fn rhs(&mut self, rho: &[C64], drho: &mut [C64]) {
        let d = self.h.dim();
        let mi = C64::new(0.0, -1.0);
        // -i Hρ, column by column.
        for c in 0..d {
            self.h.apply_into(&rho[c * d..(c + 1) * d], &mut self.hcol);
            for r in 0..d {
                drho[r + c * d] = mi * self.hcol[r];
            }
        }
        // +i ρH: H is real symmetric, so row r of ρH is H applied to row r of ρ.
        for r in 0..d {
            for c in 0..d {
                self.col[c] = rho[r + c * d];
            }
            self.h.apply_into(&self.col, &mut self.hcol);
            for c in 0..d {
                drho[r + c * d] -= mi * self.hcol[c];
            }
        }
        let n = self.n_sites();
        for c in 0..d {
            for r in 0..d {
                let k = (r.count_ones() + c.count_ones()) as f64;
                let mut v = rho[r + c * d] * (-0.5 * k);
                for i in 0..n {
                    let bit = 1 << i;
                    if r & bit == 0 && c & bit == 0 {
                        v += rho[(r | bit) + (c | bit) * d];
                    }
                }
                drho[r + c * d] += v * self.gamma;
            }
        }
    }
}

/// One-shot `ℒ[ρ]`.
pub fn master_rhs(rho: &DensityMatrix, params: &ModelParams) -> Result<DensityMatrix> {
    let mut me = MasterEquation::new(params)?;
    if me.n_sites() != rho.n_sites {
        return Err(Error::Dimension {
            expected: me.n_sites(),
            got: rho.n_sites,
        });
    }
    let mut out = vec![C64::default(); rho.data.len()];
    me.rhs(&rho.data, &mut out);
    Ok(DensityMatrix {
        n_sites: rho.n_sites,
        data: out,
    })
}

/// RK4 integration returning `ρ(t)` at each requested time (nondecreasing,
/// ≥ 0). Steps between checkpoints are shortened to land on them exactly.
pub fn evolve_master(
    rho0: &DensityMatrix,
    params: &ModelParams,
    times: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix>> {
    if !(dt > 0.0) {
        return Err(Error::Parameter("dt must be positive".into()));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::Parameter(
            "checkpoint times must be finite, nonnegative and sorted".into(),
        ));
    }
    let mut me = MasterEquation::new(params)?;
    if me.n_sites() != rho0.n_sites {
        return Err(Error::Dimension {
            expected: me.n_sites(),
            got: rho0.n_sites,
        });
    }
    let mut rho = rho0.data.clone();
    let mut rk = Rk4::new(rho.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt).ceil() as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                rk.step(&mut rho, t + s as f64 * h, h, &mut |_, y, dy| me.rhs(y, dy));
            }
            if rho.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::Integration {
                    last_valid_time: t,
                    reason: "non-finite density matrix".into(),
                });
            }
            t = target;
        }
        out.push(DensityMatrix {
            n_sites: rho0.n_sites,
            data: rho.clone(),
        });
    }
    Ok(out)
}
