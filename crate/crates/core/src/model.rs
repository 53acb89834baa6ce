//! Model parameters, coupling topologies and Bloch-vector state types.
//!
//! Hard-core photons map onto spin-1/2 with `a† -> σ⁺`, so a cavity holds
//! zero or one photon and the local photon number is `(σᶻ + 1) / 2`. The
//! spin Hamiltonian is
//!
//! ```text
//! H = -g Σ_{(i,j)} (σˣᵢσˣⱼ + σʸᵢσʸⱼ) + Ω Σ σˣᵢ - (μ/2) Σ σᶻᵢ
//! ```
//!
//! where the first sum runs over ordered coupled pairs and `g = J / (2z)`
//! (see [`ModelParams::pair_coupling`]).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the cavities are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSpec {
    /// 1D chain with nearest-neighbour hopping.
    NearestNeighbor1D { n: usize, periodic: bool },
    /// All-to-all hopping with amplitude `2J / (N - 1)`.
    InfiniteRange { n: usize },
    /// No microscopic lattice; only a coordination number for mean field.
    MeanFieldZ { z: usize },
}

impl CouplingSpec {
    /// Number of cavities, if the topology has a microscopic Hilbert space.
    pub fn sites(&self) -> Option<usize> {
        match *self {
            CouplingSpec::NearestNeighbor1D { n, .. } | CouplingSpec::InfiniteRange { n } => {
                Some(n)
            }
            CouplingSpec::MeanFieldZ { .. } => None,
        }
    }

    /// Bulk coordination number.
    pub fn coordination(&self) -> usize {
        match *self {
            CouplingSpec::NearestNeighbor1D { .. } => 2,
            CouplingSpec::InfiniteRange { n } => n - 1,
            CouplingSpec::MeanFieldZ { z } => z,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CouplingSpec::NearestNeighbor1D { n, .. } if n < 2 => Err(Error::Parameter(format!(
                "a chain needs at least 2 sites, got {n}"
            ))),
            CouplingSpec::InfiniteRange { n: 0 } => {
                Err(Error::Parameter("need at least 1 site".into()))
            }
            CouplingSpec::MeanFieldZ { z: 0 } => {
                Err(Error::Parameter("coordination number must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Physical parameters of the driven-dissipative lattice.
///
/// All rates share one unit; the CLI and the examples use `gamma = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Hopping rate `J`.
    pub j: f64,
    /// Drive detuning `ω_l - ω_c`.
    pub mu: f64,
    /// Drive strength `Ω`.
    pub omega: f64,
    /// Photon loss rate `γ`.
    pub gamma: f64,
    pub coupling: CouplingSpec,
}

impl ModelParams {
    pub fn new(j: f64, mu: f64, omega: f64, gamma: f64, coupling: CouplingSpec) -> Result<Self> {
        let p = ModelParams {
            j,
            mu,
            omega,
            gamma,
            coupling,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters in units of `γ = 1`.
    pub fn scaled(j: f64, mu: f64, omega: f64, coupling: CouplingSpec) -> Result<Self> {
        Self::new(j, mu, omega, 1.0, coupling)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("j", self.j),
            ("mu", self.mu),
            ("omega", self.omega),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::Parameter(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        self.coupling.validate()
    }

    pub fn with_coupling(&self, coupling: CouplingSpec) -> Self {
        ModelParams { coupling, ..*self }
    }

    pub fn with_drive(&self, mu: f64, omega: f64) -> Self {
        ModelParams { mu, omega, ..*self }
    }

    /// Coefficient `g` of `-(σˣᵢσˣⱼ + σʸᵢσʸⱼ)` per *ordered* coupled pair.
    ///
    /// Always `J / (2z)`; for infinite range `z = N - 1`, which makes `g` equal
    /// to a quarter of the boson hopping amplitude [`Self::hopping`]. A
    /// single site has no pairs and returns 0.
    pub fn pair_coupling(&self) -> Result<f64> {
        self.validate()?;
        let z = self.coupling.coordination();
        Ok(if z == 0 {
            0.0
        } else {
            self.j / (2.0 * z as f64)
        })
    }

    /// Boson hopping amplitude. For infinite range this is `𝒥 = 2J / (N - 1)`,
    /// otherwise `J / d` with `d = z / 2`.
    pub fn hopping(&self) -> Result<f64> {
        let z = self.coupling.coordination();
        Ok(if z == 0 {
            0.0
        } else {
            4.0 * self.pair_coupling()?
        })
    }

    /// Unordered exchange bonds `(i, j, c)` with `H ⊃ -c (σˣᵢσˣⱼ + σʸᵢσʸⱼ)`.
    ///
    /// A periodic ring of two sites carries its bond twice, matching the
    /// neighbour list `[i - 1, i + 1]` of every site.
    pub fn exchange_bonds(&self) -> Result<Vec<(usize, usize, f64)>> {
        let g = self.pair_coupling()?;
        match self.coupling {
            CouplingSpec::NearestNeighbor1D { n, periodic } => {
                let last = if periodic { n } else { n - 1 };
                Ok((0..last).map(|i| (i, (i + 1) % n, 2.0 * g)).collect())
            }
            CouplingSpec::InfiniteRange { n } => Ok((0..n)
                .flat_map(|i| ((i + 1)..n).map(move |k| (i, k, 2.0 * g)))
                .collect()),
            CouplingSpec::MeanFieldZ { .. } => Err(Error::Coupling("a microscopic Hamiltonian")),
        }
    }

    /// Mean-field neighbour structure for a field of `sites` Bloch vectors.
    ///
    /// * `MeanFieldZ`: 1 site (uniform) or 2 sites (two sublattices).
    /// * `NearestNeighbor1D { n }`: `n` sites; open ends use their actual
    ///   neighbour count as `z`.
    /// * `InfiniteRange { n }`: 1 site (uniform) or `n` sites.
    pub fn mf_lattice(&self, sites: usize) -> Result<MfLattice> {
        self.validate()?;
        let single = |w: f64| vec![vec![(0usize, w)]];
        let neighbors: Vec<Vec<(usize, f64)>> = match (self.coupling, sites) {
            (CouplingSpec::MeanFieldZ { z }, 1) => single(z as f64),
            (CouplingSpec::MeanFieldZ { z }, 2) => vec![vec![(1, z as f64)], vec![(0, z as f64)]],
            (CouplingSpec::MeanFieldZ { .. }, got) => {
                return Err(Error::Dimension { expected: 2, got })
            }
            (CouplingSpec::InfiniteRange { n }, 1) => single((n - 1) as f64),
            (CouplingSpec::InfiniteRange { n }, s) if s == n => (0..n)
                .map(|i| (0..n).filter(|&k| k != i).map(|k| (k, 1.0)).collect())
                .collect(),
            (CouplingSpec::NearestNeighbor1D { n, periodic }, s) if s == n => (0..n)
                .map(|i| {
                    let mut v = Vec::with_capacity(2);
                    if periodic || i > 0 {
                        v.push(((i + n - 1) % n, 1.0));
                    }
                    if periodic || i + 1 < n {
                        v.push(((i + 1) % n, 1.0));
                    }
                    v
                })
                .collect(),
            (c, got) => {
                return Err(Error::Dimension {
                    expected: c.sites().unwrap_or(1),
                    got,
                });
            }
        };
        let prefactor = neighbors
            .iter()
            .map(|nb| {
                let z: f64 = nb.iter().map(|&(_, w)| w).sum();
                if z > 0.0 {
                    2.0 * self.j / z
                } else {
                    0.0
                }
            })
            .collect();
        Ok(MfLattice {
            neighbors,
            prefactor,
        })
    }

    /// Reads the flat key-value schema used by parameter files:
    /// `j`, `mu`, `omega`, `gamma`, `coupling.kind`, `coupling.n`,
    /// `coupling.periodic`, `coupling.z`.
    ///
    /// `coupling.kind` is one of `nn` (alias `nearest_neighbor`),
    /// `infinite` (alias `infinite_range`, `all_to_all`) or `mfz`
    /// (alias `mean_field_z`). Missing keys fall back to `defaults`.
    pub fn from_flat_map(map: &BTreeMap<String, String>, defaults: &ModelParams) -> Result<Self> {
        fn num<T: std::str::FromStr>(
            map: &BTreeMap<String, String>,
            key: &str,
        ) -> Result<Option<T>> {
            map.get(key)
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| Error::Parameter(format!("cannot parse {key} = {s:?}")))
                })
                .transpose()
        }
        let j = num(map, "j")?.unwrap_or(defaults.j);
        let mu = num(map, "mu")?.unwrap_or(defaults.mu);
        let omega = num(map, "omega")?.unwrap_or(defaults.omega);
        let gamma = num(map, "gamma")?.unwrap_or(defaults.gamma);

        let (def_n, def_periodic, def_z) = match defaults.coupling {
            CouplingSpec::NearestNeighbor1D { n, periodic } => (n, periodic, 2),
            CouplingSpec::InfiniteRange { n } => (n, true, n - 1),
            CouplingSpec::MeanFieldZ { z } => (2, true, z),
        };
        let n = num(map, "coupling.n")?.unwrap_or(def_n);
        let periodic = num(map, "coupling.periodic")?.unwrap_or(def_periodic);
        let z = num(map, "coupling.z")?.unwrap_or(def_z);
        let coupling = match map
            .get("coupling.kind")
            .map(|s| s.trim().to_ascii_lowercase())
        {
            None => match defaults.coupling {
                CouplingSpec::NearestNeighbor1D { .. } => {
                    CouplingSpec::NearestNeighbor1D { n, periodic }
                }
                CouplingSpec::InfiniteRange { .. } => CouplingSpec::InfiniteRange { n },
                CouplingSpec::MeanFieldZ { .. } => CouplingSpec::MeanFieldZ { z },
            },
            Some(kind) => match kind.as_str() {
                "nn" | "nearest_neighbor" | "nearest_neighbor_1d" => {
                    CouplingSpec::NearestNeighbor1D { n, periodic }
                }
                "infinite" | "infinite_range" | "all_to_all" => CouplingSpec::InfiniteRange { n },
                "mfz" | "mean_field_z" | "meanfield" => CouplingSpec::MeanFieldZ { z },
                other => return Err(Error::Parameter(format!("unknown coupling.kind {other:?}"))),
            },
        };
        ModelParams::new(j, mu, omega, gamma, coupling)
    }
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            j: 10.0,
            mu: 0.0,
            omega: 0.0,
            gamma: 1.0,
            coupling: CouplingSpec::MeanFieldZ { z: 2 },
        }
    }
}

/// Neighbour lists and `2J / zᵢ` prefactors for the mean-field equations.
#[derive(Debug, Clone)]
pub struct MfLattice {
    /// `(neighbour, multiplicity)` per site.
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub prefactor: Vec<f64>,
}

impl MfLattice {
    pub fn sites(&self) -> usize {
        self.neighbors.len()
    }
}

/// Single-site spin expectations `(σˣ, σʸ, σᶻ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bloch {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Bloch {
    pub const VACUUM: Bloch = Bloch {
        x: 0.0,
        y: 0.0,
        z: -1.0,
    };
    pub const INVERTED: Bloch = Bloch {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Bloch { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Local photon number `(σᶻ + 1) / 2`.
    pub fn photon_number(&self) -> f64 {
        0.5 * (self.z + 1.0)
    }

    pub fn sup_dist(&self, other: &Bloch) -> f64 {
        (self.x - other.x)
            .abs()
            .max((self.y - other.y).abs())
            .max((self.z - other.z).abs())
    }

    pub fn sup_norm(&self) -> f64 {
        self.x.abs().max(self.y.abs()).max(self.z.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Bloch {
            x: a[0],
            y: a[1],
            z: a[2],
        }
    }
}

impl Add for Bloch {
    type Output = Bloch;
    fn add(self, o: Bloch) -> Bloch {
        Bloch::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Bloch {
    type Output = Bloch;
    fn sub(self, o: Bloch) -> Bloch {
        Bloch::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Bloch {
    type Output = Bloch;
    fn mul(self, s: f64) -> Bloch {
        Bloch::new(self.x * s, self.y * s, self.z * s)
    }
}

impl fmt::Display for Bloch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.x, self.y, self.z)
    }
}

/// Bloch vectors of every site in a mean-field configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochField {
    pub sites: Vec<Bloch>,
}

/// Slack allowed on `|σ| <= 1`.
pub const BLOCH_NORM_SLACK: f64 = 1e-9;

impl BlochField {
    pub fn new(sites: Vec<Bloch>) -> Self {
        BlochField { sites }
    }

    pub fn uniform(s: Bloch, n: usize) -> Self {
        BlochField { sites: vec![s; n] }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn max_norm(&self) -> f64 {
        self.sites.iter().map(Bloch::norm).fold(0.0, f64::max)
    }

    /// Every site inside the Bloch ball (within [`BLOCH_NORM_SLACK`]).
    pub fn is_physical(&self) -> bool {
        self.sites
            .iter()
            .all(|s| s.is_finite() && s.norm() <= 1.0 + BLOCH_NORM_SLACK)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sites.iter().map(Bloch::sup_norm).fold(0.0, f64::max)
    }

    pub fn sup_dist(&self, other: &BlochField) -> f64 {
        self.sites
            .iter()
            .zip(&other.sites)
            .map(|(a, b)| a.sup_dist(b))
            .fold(0.0, f64::max)
    }

    pub fn mean_photon_number(&self) -> f64 {
        self.sites.iter().map(Bloch::photon_number).sum::<f64>() / self.sites.len().max(1) as f64
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.sites.iter().flat_map(|s| s.to_array()).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        BlochField {
            sites: v
                .chunks_exact(3)
                .map(|c| Bloch::new(c[0], c[1], c[2]))
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pair_coupling_values() {
        let ir =
            ModelParams::scaled(10.0, 0.0, 0.0, CouplingSpec::InfiniteRange { n: 21 }).unwrap();
        assert_relative_eq!(ir.hopping().unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(ir.pair_coupling().unwrap(), 0.25, epsilon = 1e-15);

        let nn = ModelParams::scaled(
            10.0,
            0.0,
            0.0,
            CouplingSpec::NearestNeighbor1D {
                n: 8,
                periodic: true,
            },
        )
        .unwrap();
        assert_relative_eq!(nn.pair_coupling().unwrap(), 2.5, epsilon = 1e-15);

        let mfz = ModelParams::scaled(10.0, 0.0, 0.0, CouplingSpec::MeanFieldZ { z: 4 }).unwrap();
        assert_relative_eq!(mfz.pair_coupling().unwrap(), 1.25, epsilon = 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ModelParams::new(1.0, 0.0, 0.0, 0.0, CouplingSpec::MeanFieldZ { z: 2 }).is_err());
        assert!(ModelParams::new(1.0, 0.0, 0.0, -1.0, CouplingSpec::MeanFieldZ { z: 2 }).is_err());
        assert!(
            ModelParams::new(f64::NAN, 0.0, 0.0, 1.0, CouplingSpec::MeanFieldZ { z: 2 }).is_err()
        );
        assert!(ModelParams::scaled(1.0, 0.0, 0.0, CouplingSpec::InfiniteRange { n: 0 }).is_err());
        assert_eq!(
            ModelParams::scaled(1.0, 0.0, 0.0, CouplingSpec::InfiniteRange { n: 1 })
                .unwrap()
                .pair_coupling()
                .unwrap(),
            0.0
        );
        assert!(ModelParams::scaled(
            1.0,
            0.0,
            0.0,
            CouplingSpec::NearestNeighbor1D {
                n: 1,
                periodic: true
            }
        )
        .is_err());
        assert!(ModelParams::scaled(1.0, 0.0, 0.0, CouplingSpec::MeanFieldZ { z: 0 }).is_err());
    }

    #[test]
    fn infinite_range_total_coupling_is_2j() {
        for n in 2..40 {
            let p = ModelParams::scaled(3.7, 0.0, 0.0, CouplingSpec::InfiniteRange { n }).unwrap();
            let total = p.hopping().unwrap() * (n - 1) as f64;
            assert_relative_eq!(total, 2.0 * 3.7, epsilon = 1e-12);
        }
    }

    #[test]
    fn bonds_per_topology() {
        let ring2 = ModelParams::scaled(
            10.0,
            0.0,
            0.0,
            CouplingSpec::NearestNeighbor1D {
                n: 2,
                periodic: true,
            },
        )
        .unwrap();
        assert_eq!(
            ring2.exchange_bonds().unwrap(),
            vec![(0, 1, 5.0), (1, 0, 5.0)]
        );
        let open = ModelParams::scaled(
            10.0,
            0.0,
            0.0,
            CouplingSpec::NearestNeighbor1D {
                n: 4,
                periodic: false,
            },
        )
        .unwrap();
        assert_eq!(open.exchange_bonds().unwrap().len(), 3);
        let ir = ModelParams::scaled(10.0, 0.0, 0.0, CouplingSpec::InfiniteRange { n: 5 }).unwrap();
        let bonds = ir.exchange_bonds().unwrap();
        assert_eq!(bonds.len(), 10);
        assert!(bonds.iter().all(|&(_, _, c)| (c - 2.5).abs() < 1e-15));
    }

    #[test]
    fn open_chain_ends_have_one_neighbor() {
        let p = ModelParams::scaled(
            10.0,
            0.0,
            0.0,
            CouplingSpec::NearestNeighbor1D {
                n: 5,
                periodic: false,
            },
        )
        .unwrap();
        let lat = p.mf_lattice(5).unwrap();
        assert_eq!(lat.neighbors[0], vec![(1, 1.0)]);
        assert_relative_eq!(lat.prefactor[0], 20.0);
        assert_relative_eq!(lat.prefactor[2], 10.0);
        assert!(p.mf_lattice(4).is_err());
    }

    #[test]
    fn flat_map_round_trip() {
        let mut m = BTreeMap::new();
        for (k, v) in [
            ("j", "10"),
            ("mu", "-2.5"),
            ("omega", "2.5"),
            ("coupling.kind", "nn"),
            ("coupling.n", "12"),
            ("coupling.periodic", "true"),
        ] {
            m.insert(k.to_string(), v.to_string());
        }
        let p = ModelParams::from_flat_map(&m, &ModelParams::default()).unwrap();
        assert_eq!(
            p.coupling,
            CouplingSpec::NearestNeighbor1D {
                n: 12,
                periodic: true
            }
        );
        assert_eq!((p.j, p.mu, p.omega, p.gamma), (10.0, -2.5, 2.5, 1.0));
        m.insert("coupling.kind".into(), "hexagonal".into());
        assert!(ModelParams::from_flat_map(&m, &ModelParams::default()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn pair_coupling_is_linear_in_j(j in 0.01f64..50.0, c in 0.01f64..20.0, n in 2usize..30) {
            for coupling in [
                CouplingSpec::InfiniteRange { n },
                CouplingSpec::NearestNeighbor1D { n, periodic: true },
                CouplingSpec::MeanFieldZ { z: n },
            ] {
                let a = ModelParams::scaled(j, 0.3, 0.7, coupling).unwrap();
                let b = ModelParams::scaled(c * j, 0.3, 0.7, coupling).unwrap();
                let lhs = b.pair_coupling().unwrap();
                let rhs = c * a.pair_coupling().unwrap();
                proptest::prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
            }
        }
    }
}
