//! Brute-force dynamics on the full `2^N` hard-core Hilbert space.
//!
//! Basis states are bitmasks: bit `i` set means site `i` holds a photon
//! (`σᶻᵢ = +1`). Density matrices are stored column-major, so the raw buffer
//! is the column-stacked `vec(ρ)` used by the dense Liouvillian.

mod hamiltonian;
mod liouvillian;
mod master;

pub use hamiltonian::{apply_hamiltonian, hamiltonian_dense, SpinHamiltonian, MAX_PURE_SITES};
pub(crate) use liouvillian::gap_from_spectrum;
pub use liouvillian::{
    liouvillian_dense, liouvillian_gap_dense, liouvillian_spectrum_dense, steady_state_dense,
    GapReport, MAX_DENSE_SITES, ZERO_MODE_TOL,
};
pub use master::{evolve_master, master_rhs, DensityMatrix, MasterEquation};

use crate::linalg::C64;

/// Single-site Pauli label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    X,
    Y,
    Z,
}

/// `P|s⟩ = phase · |s ⊕ flip⟩` for a Pauli string `P`.
pub(crate) fn pauli_action(ops: &[(usize, Pauli)], s: usize) -> (C64, usize) {
    let mut phase = C64::new(1.0, 0.0);
    let mut flip = 0usize;
    for &(i, p) in ops {
        let up = (s >> i) & 1 == 1;
        match p {
            Pauli::X => flip ^= 1 << i,
            Pauli::Y => {
                flip ^= 1 << i;
                phase *= if up {
                    C64::new(0.0, 1.0)
                } else {
                    C64::new(0.0, -1.0)
                };
            }
            Pauli::Z => {
                if !up {
                    phase = -phase;
                }
            }
        }
    }
    (phase, flip)
}

/// `⟨ψ|P|ψ⟩` for a Pauli string on distinct sites.
pub fn pauli_expectation_pure(psi: &[C64], ops: &[(usize, Pauli)]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (s, &a) in psi.iter().enumerate() {
        let (ph, flip) = pauli_action(ops, s);
        acc += psi[s ^ flip].conj() * ph * a;
    }
    acc.re
}

/// Photon-number and single-site moments of a pure state.
pub fn pure_occupations(psi: &[C64], n_sites: usize) -> Vec<f64> {
    let mut n = vec![0.0; n_sites];
    for (s, a) in psi.iter().enumerate() {
        let p = a.norm_sqr();
        for (i, ni) in n.iter_mut().enumerate() {
            if (s >> i) & 1 == 1 {
                *ni += p;
            }
        }
    }
    n
}

/// `⟨σʸᵢ⟩` for every site of a pure state.
pub fn pure_sigma_y(psi: &[C64], n_sites: usize) -> Vec<f64> {
    (0..n_sites)
        .map(|i| {
            let bit = 1 << i;
            let mut acc = 0.0;
            for s in 0..psi.len() {
                if s & bit == 0 {
                    acc -= 2.0 * (psi[s].conj() * psi[s | bit]).im;
                }
            }
            acc
        })
        .collect()
}

/// Product state with the given Bloch vector on every site.
pub fn product_state_pure(b: crate::model::Bloch, n_sites: usize) -> crate::Result<Vec<C64>> {
    let norm = b.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(crate::Error::Parameter(format!(
            "pure product state needs |s| = 1, got {norm}"
        )));
    }
    // |θ,φ⟩ = cos(θ/2)|1⟩ + e^{iφ} sin(θ/2)|0⟩ with θ measured from +z.
    let theta = b.z.clamp(-1.0, 1.0).acos();
    let phi = b.y.atan2(b.x);
    let up = C64::new((theta / 2.0).cos(), 0.0);
    let down = C64::from_polar((theta / 2.0).sin(), phi);
    let single = [down, up];
    Ok((0..1usize << n_sites)
        .map(|s| (0..n_sites).fold(C64::new(1.0, 0.0), |acc, i| acc * single[(s >> i) & 1]))
        .collect())
}
