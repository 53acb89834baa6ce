use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pauli-string type `(n_x, n_y, n_z)` with `n_x + n_y + n_z ≤ N`; the
/// remaining `N - |n|` sites carry the identity.
pub type Triple = [usize; 3];

/// Lexicographic enumeration of all triples for `N` sites.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricBasis {
    n_sites: usize,
    triples: Vec<Triple>,
    /// Dense `(N+1)³` lookup table, `u32::MAX` for invalid triples.
    lookup: Vec<u32>,
}

/// `(N+3)(N+2)(N+1)/6`, including the identity.
pub fn basis_size(n_sites: usize) -> usize {
    (n_sites + 3) * (n_sites + 2) * (n_sites + 1) / 6
}

impl SymmetricBasis {
    pub fn new(n_sites: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::Parameter("need at least one site".into()));
        }
        let side = n_sites + 1;
        let mut triples = Vec::with_capacity(basis_size(n_sites));
        let mut lookup = vec![u32::MAX; side * side * side];
        for nx in 0..=n_sites {
            for ny in 0..=(n_sites - nx) {
                for nz in 0..=(n_sites - nx - ny) {
                    lookup[(nx * side + ny) * side + nz] = triples.len() as u32;
                    triples.push([nx, ny, nz]);
                }
            }
        }
        Ok(SymmetricBasis {
            n_sites,
            triples,
            lookup,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Number of triples including `(0,0,0)`.
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of non-identity triples, `𝒟`.
    pub fn reduced_dim(&self) -> usize {
        self.triples.len() - 1
    }

    pub fn triple(&self, index: usize) -> Triple {
        self.triples[index]
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn index(&self, t: Triple) -> Option<usize> {
        if t[0] + t[1] + t[2] > self.n_sites {
            return None;
        }
        let side = self.n_sites + 1;
        let v = self.lookup[(t[0] * side + t[1]) * side + t[2]];
        (v != u32::MAX).then_some(v as usize)
    }
}
