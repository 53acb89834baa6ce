//! Inhomogeneous mean-field steady states on a finite chain.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bloch, BlochField, CouplingSpec, ModelParams};

use super::limit_cycle::estimate_period;
use super::{integrate_quiet, MfSystem, MfTimeSeries};

/// Neighbour contrast in `σʸ` above which a site counts as AF-like.
pub const AF_CONTRAST: f64 = 1e-2;
const STEADY_TOL: f64 = 1e-8;
const EXTRA_WINDOW: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DomainKind {
    AfLike,
    UniformLike,
}

impl DomainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::AfLike => "AF",
            DomainKind::UniformLike => "U",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub id: usize,
    pub kind: DomainKind,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ChainConvergence {
    Stationary {
        residual: f64,
    },
    Periodic {
        period: f64,
    },
    /// Neither stationary nor periodic; the last window is attached.
    NotConverged {
        residual: f64,
        tail: MfTimeSeries,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainResult {
    pub state: BlochField,
    pub domains: Vec<Domain>,
    /// Domain index for each site.
    pub site_domain: Vec<usize>,
    pub convergence: ChainConvergence,
}

impl ChainResult {
    pub fn af_fraction(&self) -> f64 {
        let af: usize = self
            .domains
            .iter()
            .filter(|d| d.kind == DomainKind::AfLike)
            .map(|d| d.len)
            .sum();
        af as f64 / self.state.len().max(1) as f64
    }

    /// Rows `site,sx,sy,sz,domain_id,domain_kind`.
    pub fn profile_csv(&self) -> String {
        let mut s = String::from("site,sx,sy,sz,domain_id,domain_kind\n");
        for (i, b) in self.state.sites.iter().enumerate() {
            let d = &self.domains[self.site_domain[i]];
            let _ = writeln!(
                s,
                "{i},{:.12e},{:.12e},{:.12e},{},{}",
                b.x,
                b.y,
                b.z,
                d.id,
                d.kind.as_str()
            );
        }
        s
    }
}

/// Splits a chain into maximal runs of AF-like and uniform-like sites.
pub fn decompose_domains(state: &BlochField, periodic: bool) -> (Vec<Domain>, Vec<usize>) {
    let n = state.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let sy: Vec<f64> = state.sites.iter().map(|b| b.y).collect();
    let kind: Vec<DomainKind> = (0..n)
        .map(|i| {
            let j = if i + 1 < n {
                i + 1
            } else if periodic {
                0
            } else {
                i.saturating_sub(1)
            };
            if n > 1 && (sy[i] - sy[j]).abs() > AF_CONTRAST {
                DomainKind::AfLike
            } else {
                DomainKind::UniformLike
            }
        })
        .collect();

    let mut domains: Vec<Domain> = Vec::new();
    for (i, &k) in kind.iter().enumerate() {
        match domains.last_mut() {
            Some(d) if d.kind == k => d.len += 1,
            _ => domains.push(Domain {
                id: domains.len(),
                kind: k,
                start: i,
                len: 1,
            }),
        }
    }
    if periodic && domains.len() > 1 && domains[0].kind == domains.last().unwrap().kind {
        let last = domains.pop().unwrap();
        domains[0].start = last.start;
        domains[0].len += last.len;
    }
    let mut site_domain = vec![0; n];
    for d in &domains {
        for k in 0..d.len {
            site_domain[(d.start + k) % n] = d.id;
        }
    }
    (domains, site_domain)
}

/// Evolves a seeded random chain state and classifies the result.
pub fn inhomogeneous_chain_steady(
    params: &ModelParams,
    seed: u64,
    t_final: f64,
    dt: f64,
) -> Result<ChainResult> {
    let (n, periodic) = match params.coupling {
        CouplingSpec::NearestNeighbor1D { n, periodic } => (n, periodic),
        _ => {
            return Err(Error::Coupling(
                "chain steady state needs a nearest-neighbour chain",
            ))
        }
    };
    params.validate()?;
    if !(t_final > 0.0 && dt > 0.0) {
        return Err(Error::Parameter("t_final and dt must be positive".into()));
    }
    let sys = MfSystem::new(params, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init: Vec<Bloch> = (0..n)
        .map(|_| {
            let v: [f64; 3] = UnitBall.sample(&mut rng);
            Bloch::from_array(v)
        })
        .collect();
    let mut y = BlochField::new(init).to_flat();
    integrate_quiet(&sys, &mut y, 0.0, t_final, dt)?;
    let mut scratch = vec![0.0; y.len()];
    let residual = sys.rhs_sup_norm(&y, &mut scratch);

    let convergence = if residual < STEADY_TOL {
        ChainConvergence::Stationary { residual }
    } else {
        let mut tail = MfTimeSeries::default();
        let sample = 0.01_f64.max(dt);
        let chunks = (EXTRA_WINDOW / sample).round() as usize;
        let mut t = t_final;
        for _ in 0..chunks {
            integrate_quiet(&sys, &mut y, t, t + sample, dt)?;
            t += sample;
            tail.times.push(t);
            tail.states.push(BlochField::from_flat(&y));
        }
        let signal: Vec<f64> = tail.states.iter().map(|s| s.sites[0].y).collect();
        match estimate_period(&tail.times, &signal) {
            Some(p) => ChainConvergence::Periodic { period: p.period },
            None => ChainConvergence::NotConverged {
                residual: sys.rhs_sup_norm(&y, &mut scratch),
                tail,
            },
        }
    };
    let state = BlochField::from_flat(&y);
    let (domains, site_domain) = decompose_domains(&state, periodic);
    Ok(ChainResult {
        state,
        domains,
        site_domain,
        convergence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(sy: &[f64]) -> BlochField {
        BlochField::new(sy.iter().map(|&y| Bloch { x: 0.0, y, z: -0.5 }).collect())
    }

    #[test]
    fn uniform_chain_is_one_domain() {
        let (d, s) = decompose_domains(&field(&[0.1; 8]), true);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].len, 8);
        assert!(s.iter().all(|&i| i == 0));
    }

    #[test]
    fn mixed_chain_wraps() {
        let sy = [0.3, -0.3, 0.0, 0.0, 0.0, 0.0, 0.3, -0.3];
        let (d, s) = decompose_domains(&field(&sy), true);
        let af: usize = d
            .iter()
            .filter(|x| x.kind == DomainKind::AfLike)
            .map(|x| x.len)
            .sum();
        assert_eq!(af, 5);
        assert_eq!(d.len(), 2);
        assert_eq!(d.iter().map(|x| x.len).sum::<usize>(), 8);
        assert_eq!(s[7], s[0]);
    }

    #[test]
    fn undriven_chain_relaxes_to_vacuum() {
        let p = ModelParams::scaled(
            10.0,
            3.0,
            0.0,
            CouplingSpec::NearestNeighbor1D {
                n: 8,
                periodic: true,
            },
        )
        .unwrap();
        let r = inhomogeneous_chain_steady(&p, 1, 60.0, 1e-3).unwrap();
        assert!(matches!(r.convergence, ChainConvergence::Stationary { .. }));
        assert!(r.state.sites.iter().all(|b| (b.z + 1.0).abs() < 1e-6));
        assert_eq!(r.af_fraction(), 0.0);
        assert!(r
            .profile_csv()
            .starts_with("site,sx,sy,sz,domain_id,domain_kind\n"));
    }

    #[test]
    fn rejects_non_chain() {
        let p = ModelParams::default();
        assert!(matches!(
            inhomogeneous_chain_steady(&p, 0, 1.0, 1e-3),
            Err(Error::Coupling(_))
        ));
    }
}
