//! Two-sublattice phase classification from an initial-condition battery.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bloch, BlochField, CouplingSpec, ModelParams};
use crate::stability::{scan_stability, InstabilityKind, DEFAULT_K_POINTS};

use super::chain::{inhomogeneous_chain_steady, DomainKind};
use super::limit_cycle::{detect_limit_cycle, AttractorVerdict, LimitCycleInfo};
use super::{integrate_quiet, uniform_steady_states, MfSystem, MfTimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseLabel {
    U1,
    U2,
    U1U2,
    Af,
    U1Af,
    Lc,
    U1Lc,
    FAf,
    Unclassified,
}

impl PhaseLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseLabel::U1 => "U1",
            PhaseLabel::U2 => "U2",
            PhaseLabel::U1U2 => "U1_U2",
            PhaseLabel::Af => "AF",
            PhaseLabel::U1Af => "U1_AF",
            PhaseLabel::Lc => "LC",
            PhaseLabel::U1Lc => "U1_LC",
            PhaseLabel::FAf => "F_AF",
            PhaseLabel::Unclassified => "UNCLASSIFIED",
        }
    }

    pub fn is_bistable(&self) -> bool {
        matches!(self, PhaseLabel::U1U2 | PhaseLabel::U1Af | PhaseLabel::U1Lc)
    }

    pub fn has_af(&self) -> bool {
        matches!(self, PhaseLabel::Af | PhaseLabel::U1Af | PhaseLabel::FAf)
    }

    pub fn has_lc(&self) -> bool {
        matches!(self, PhaseLabel::Lc | PhaseLabel::U1Lc)
    }
}

impl fmt::Display for PhaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhaseLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "U1" => PhaseLabel::U1,
            "U2" => PhaseLabel::U2,
            "U1_U2" => PhaseLabel::U1U2,
            "AF" => PhaseLabel::Af,
            "U1_AF" => PhaseLabel::U1Af,
            "LC" => PhaseLabel::Lc,
            "U1_LC" => PhaseLabel::U1Lc,
            "F_AF" => PhaseLabel::FAf,
            "UNCLASSIFIED" => PhaseLabel::Unclassified,
            other => return Err(Error::Parameter(format!("unknown phase label {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifyConfig {
    pub dt: f64,
    pub transient: f64,
    pub total: f64,
    /// Sampling interval of the recorded post-transient window.
    pub sample_dt: f64,
    pub n_random: usize,
    pub seed: u64,
    /// Sup-norm tolerance for merging fixed points.
    pub cluster_tol: f64,
    /// Sublattice difference above which a fixed point counts as AF.
    pub af_tol: f64,
    /// Early exit once the right-hand side drops below this.
    pub early_exit_tol: f64,
    /// Run the chain test for frustrated AF order.
    pub resolve_frustration: bool,
    pub chain_sites: usize,
    pub chain_time: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            dt: 1e-3,
            transient: 500.0,
            total: 2000.0,
            sample_dt: 0.01,
            n_random: 32,
            seed: 0,
            cluster_tol: 1e-4,
            af_tol: 1e-3,
            early_exit_tol: 1e-10,
            resolve_frustration: true,
            chain_sites: 64,
            chain_time: 300.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttractorKind {
    Uniform,
    Af,
    LimitCycle,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Attractor {
    pub kind: AttractorKind,
    /// Fixed point, or the final sample of the orbit.
    pub state: BlochField,
    /// Photon number per sublattice (time averaged for limit cycles).
    pub photon: [f64; 2],
    pub limit_cycle: Option<LimitCycleInfo>,
    /// Initial conditions that reached this attractor.
    pub basin_count: usize,
}

impl Attractor {
    fn mean_photon(&self) -> f64 {
        0.5 * (self.photon[0] + self.photon[1])
    }

    fn same_as(&self, other: &Attractor, tol: f64) -> bool {
        match (self.kind, other.kind) {
            (AttractorKind::LimitCycle, AttractorKind::LimitCycle) => {
                let (a, b) = (
                    self.limit_cycle.as_ref().unwrap(),
                    other.limit_cycle.as_ref().unwrap(),
                );
                let mut pa = self.photon;
                let mut pb = other.photon;
                pa.sort_by(f64::total_cmp);
                pb.sort_by(f64::total_cmp);
                (a.period / b.period - 1.0).abs() < 0.01
                    && (pa[0] - pb[0]).abs() < 1e-3
                    && (pa[1] - pb[1]).abs() < 1e-3
            }
            (AttractorKind::LimitCycle, _) | (_, AttractorKind::LimitCycle) => false,
            _ => {
                let s = &self.state.sites;
                let o = &other.state.sites;
                let direct = s[0].sup_dist(&o[0]).max(s[1].sup_dist(&o[1]));
                let swapped = s[0].sup_dist(&o[1]).max(s[1].sup_dist(&o[0]));
                direct.min(swapped) <= tol
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseResult {
    pub label: PhaseLabel,
    pub attractors: Vec<Attractor>,
    /// Initial conditions whose long-time behaviour fit neither criterion.
    pub n_unclassified: usize,
    /// Sublattice photon numbers of the attractor named last in the label.
    pub n_a: f64,
    pub n_b: f64,
    pub lc_period: Option<f64>,
    pub lc_amplitude: Option<f64>,
}

impl PhaseResult {
    pub fn n_attractors(&self) -> usize {
        self.attractors.len()
    }
}

/// Initial-condition battery: vacuum, inverted spins, then seeded random
/// two-sublattice states drawn uniformly from the unit ball.
pub fn initial_battery(n_random: usize, seed: u64) -> Vec<BlochField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![
        BlochField::uniform(Bloch::VACUUM, 2),
        BlochField::uniform(Bloch::INVERTED, 2),
    ];
    for _ in 0..n_random {
        let a: [f64; 3] = UnitBall.sample(&mut rng);
        let b: [f64; 3] = UnitBall.sample(&mut rng);
        out.push(BlochField::new(vec![
            Bloch::from_array(a),
            Bloch::from_array(b),
        ]));
    }
    out
}

/// Evolves one initial condition to its attractor, exiting early on
/// convergence to a fixed point.
pub(crate) fn run_to_attractor(
    sys: &MfSystem,
    params: &ModelParams,
    initial: &BlochField,
    cfg: &ClassifyConfig,
) -> Result<AttractorVerdict> {
    let mut y = initial.to_flat();
    let mut scratch = vec![0.0; y.len()];
    let chunk = 1.0;
    let mut t = 0.0;
    while t < cfg.transient - 1e-9 {
        let next = (t + chunk).min(cfg.transient);
        integrate_quiet(sys, &mut y, t, next, cfg.dt)?;
        t = next;
        if sys.rhs_sup_norm(&y, &mut scratch) < cfg.early_exit_tol {
            return Ok(AttractorVerdict::FixedPoint(BlochField::from_flat(&y)));
        }
    }
    let mut series = MfTimeSeries::default();
    series.times.push(t);
    series.states.push(BlochField::from_flat(&y));
    let stride = ((cfg.sample_dt / cfg.dt).round() as usize).max(1);
    let steps = ((cfg.total - cfg.transient) / cfg.dt).round() as usize;
    let mut rk = crate::ode::Rk4::new(y.len());
    for s in 1..=steps {
        rk.step(&mut y, t, cfg.dt, &mut |_, y, dy| sys.rhs(y, dy));
        if s % stride == 0 || s == steps {
            let tt = cfg.transient + s as f64 * cfg.dt;
            let field = BlochField::from_flat(&y);
            if !field.is_physical() {
                return Err(Error::Integration {
                    last_valid_time: tt,
                    reason: "left the Bloch ball".into(),
                });
            }
            series.times.push(tt);
            series.states.push(field);
            if s % (stride * 100) == 0 && sys.rhs_sup_norm(&y, &mut scratch) < cfg.early_exit_tol {
                return Ok(AttractorVerdict::FixedPoint(BlochField::from_flat(&y)));
            }
        }
    }
    detect_limit_cycle(&series, params, cfg.transient)
}

fn attractor_from(verdict: AttractorVerdict, af_tol: f64) -> Option<Attractor> {
    match verdict {
        AttractorVerdict::FixedPoint(state) => {
            let (a, b) = (state.sites[0], state.sites[1]);
            let kind = if a.sup_dist(&b) > af_tol {
                AttractorKind::Af
            } else {
                AttractorKind::Uniform
            };
            Some(Attractor {
                kind,
                photon: [a.photon_number(), b.photon_number()],
                state,
                limit_cycle: None,
                basin_count: 1,
            })
        }
        AttractorVerdict::LimitCycle(info) => {
            let state = BlochField::new(
                info.sublattice_orbits
                    .iter()
                    .map(|o| *o.last().unwrap())
                    .collect(),
            );
            Some(Attractor {
                kind: AttractorKind::LimitCycle,
                photon: [info.mean_photon[0], info.mean_photon[1]],
                state,
                limit_cycle: Some(info),
                basin_count: 1,
            })
        }
        AttractorVerdict::Unclassified { .. } => None,
    }
}

/// Two-sublattice mean-field phase at the given `(J, μ, Ω, γ)`; the
/// coupling field of `params` is ignored.
pub fn classify_phase(params: &ModelParams, cfg: &ClassifyConfig) -> Result<PhaseResult> {
    let two = params.with_coupling(CouplingSpec::MeanFieldZ { z: 2 });
    two.validate()?;
    let sys = MfSystem::new(&two, 2)?;
    let mut classes: Vec<Attractor> = Vec::new();
    let mut n_unclassified = 0;
    for init in initial_battery(cfg.n_random, cfg.seed) {
        let verdict = run_to_attractor(&sys, &two, &init, cfg)?;
        match attractor_from(verdict, cfg.af_tol) {
            None => n_unclassified += 1,
            Some(a) => match classes.iter_mut().find(|c| c.same_as(&a, cfg.cluster_tol)) {
                Some(c) => c.basin_count += 1,
                None => classes.push(a),
            },
        }
    }
    classes.sort_by(|a, b| a.mean_photon().total_cmp(&b.mean_photon()));

    let uniform: Vec<&Attractor> = classes
        .iter()
        .filter(|c| c.kind == AttractorKind::Uniform)
        .collect();
    let af = classes
        .iter()
        .filter(|c| c.kind == AttractorKind::Af)
        .count();
    let lc = classes
        .iter()
        .filter(|c| c.kind == AttractorKind::LimitCycle)
        .count();
    let mut label = match (classes.len(), uniform.len(), af, lc) {
        (1, 1, 0, 0) => {
            let roots = uniform_steady_states(&two)?;
            let z = uniform[0].state.sites[0].z;
            if roots.len() == 3 && (z - roots[2].bloch.z).abs() < (z - roots[0].bloch.z).abs() {
                PhaseLabel::U2
            } else {
                PhaseLabel::U1
            }
        }
        (2, 2, 0, 0) => PhaseLabel::U1U2,
        (1, 0, 1, 0) => PhaseLabel::Af,
        (2, 1, 1, 0) => PhaseLabel::U1Af,
        (1, 0, 0, 1) => PhaseLabel::Lc,
        (2, 1, 0, 1) => PhaseLabel::U1Lc,
        _ => PhaseLabel::Unclassified,
    };

    if cfg.resolve_frustration
        && matches!(label, PhaseLabel::Af | PhaseLabel::U1Af)
        && frustrated(&two, cfg)?
    {
        label = PhaseLabel::FAf;
    }

    let primary = classes
        .iter()
        .rev()
        .find(|c| c.kind != AttractorKind::Uniform)
        .or(classes.last());
    let (n_a, n_b) = primary
        .map(|c| (c.photon[0], c.photon[1]))
        .unwrap_or((f64::NAN, f64::NAN));
    let lc_info = classes.iter().find_map(|c| c.limit_cycle.as_ref());
    Ok(PhaseResult {
        label,
        n_a,
        n_b,
        lc_period: lc_info.map(|i| i.period),
        lc_amplitude: lc_info.map(|i| i.amplitude),
        attractors: classes,
        n_unclassified,
    })
}

/// Dark uniform branch incommensurate-unstable and a randomly seeded chain
/// settling into coexisting AF and uniform domains.
fn frustrated(params: &ModelParams, cfg: &ClassifyConfig) -> Result<bool> {
    let roots = uniform_steady_states(params)?;
    let Some(dark) = roots.first() else {
        return Ok(false);
    };
    let report = scan_stability(dark.bloch, params, DEFAULT_K_POINTS)?;
    if report.classification != InstabilityKind::Incommensurate {
        return Ok(false);
    }
    let chain = params.with_coupling(CouplingSpec::NearestNeighbor1D {
        n: cfg.chain_sites,
        periodic: true,
    });
    let res = inhomogeneous_chain_steady(
        &chain,
        cfg.seed ^ 0x9e37_79b9_7f4a_7c15,
        cfg.chain_time,
        cfg.dt,
    )?;
    let sites = |k: DomainKind| {
        res.domains
            .iter()
            .filter(|d| d.kind == k)
            .map(|d| d.len)
            .sum::<usize>()
    };
    Ok(sites(DomainKind::AfLike) >= 2 && sites(DomainKind::UniformLike) >= 2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_round_trip() {
        for l in [
            PhaseLabel::U1,
            PhaseLabel::U2,
            PhaseLabel::U1U2,
            PhaseLabel::Af,
            PhaseLabel::U1Af,
            PhaseLabel::Lc,
            PhaseLabel::U1Lc,
            PhaseLabel::FAf,
            PhaseLabel::Unclassified,
        ] {
            assert_eq!(l.as_str().parse::<PhaseLabel>().unwrap(), l);
        }
    }

    #[test]
    fn battery_is_seeded_and_physical() {
        let a = initial_battery(32, 7);
        let b = initial_battery(32, 7);
        assert_eq!(a.len(), 34);
        assert_eq!(a, b);
        assert!(a.iter().all(|f| f.is_physical()));
        assert_ne!(a, initial_battery(32, 8));
    }

    #[test]
    fn zero_drive_is_u1() {
        let p = ModelParams::scaled(10.0, 3.0, 0.0, CouplingSpec::MeanFieldZ { z: 2 }).unwrap();
        let r = classify_phase(
            &p,
            &ClassifyConfig {
                n_random: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.label, PhaseLabel::U1);
        assert_eq!(r.n_attractors(), 1);
        assert!(r.n_a.abs() < 1e-9);
    }
}
