//! Site-factorized (Gutzwiller) mean-field dynamics.
//!
//! With `ρ = ⊗ᵢ ρᵢ` every two-site expectation factorizes and the spin
//! equations of motion close on the Bloch vectors:
//!
//! ```text
//! ∂ₜσˣᵢ = -(2J/zᵢ) σᶻᵢ Σⱼ σʸⱼ + μ σʸᵢ - (γ/2) σˣᵢ
//! ∂ₜσʸᵢ =  (2J/zᵢ) σᶻᵢ Σⱼ σˣⱼ - μ σˣᵢ - 2Ω σᶻᵢ - (γ/2) σʸᵢ
//! ∂ₜσᶻᵢ =  (2J/zᵢ) (σˣᵢ Σⱼ σʸⱼ - σʸᵢ Σⱼ σˣⱼ) + 2Ω σʸᵢ - γ (σᶻᵢ + 1)
//! ```

mod chain;
mod classify;
mod limit_cycle;
mod steady;
mod sweep;

pub use chain::{
    decompose_domains, inhomogeneous_chain_steady, ChainConvergence, ChainResult, Domain,
    DomainKind, AF_CONTRAST,
};
pub use classify::{
    classify_phase, initial_battery, Attractor, AttractorKind, ClassifyConfig, PhaseLabel,
    PhaseResult,
};
pub use limit_cycle::{
    detect_limit_cycle, estimate_period, AttractorVerdict, LimitCycleInfo, PeriodEstimate,
};
pub use steady::{
    bistable_windows, cubic_coefficients, cubic_discriminant, discriminant_zeros,
    uniform_root_count, uniform_steady_states, UniformSteadyState,
};
pub use sweep::{
    phase_diagram_sweep, point_seed, sweep_point, SweepGrid, SweepRow, SWEEP_CSV_HEADER,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlochField, MfLattice, ModelParams};
use crate::ode::Rk4;

/// Sampled mean-field trajectory.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MfTimeSeries {
    pub times: Vec<f64>,
    pub states: Vec<BlochField>,
}

impl MfTimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&BlochField> {
        self.states.last()
    }
}

/// Mean-field right-hand side bound to a lattice.
#[derive(Debug, Clone)]
pub(crate) struct MfSystem {
    lattice: MfLattice,
    mu: f64,
    omega: f64,
    gamma: f64,
}

impl MfSystem {
    pub(crate) fn new(params: &ModelParams, sites: usize) -> Result<Self> {
        Ok(MfSystem {
            lattice: params.mf_lattice(sites)?,
            mu: params.mu,
            omega: params.omega,
            gamma: params.gamma,
        })
    }

    pub(crate) fn dim(&self) -> usize {
        3 * self.lattice.sites()
    }

    pub(crate) fn rhs(&self, y: &[f64], dy: &mut [f64]) {
        let (mu, om, g) = (self.mu, self.omega, self.gamma);
        for (i, nb) in self.lattice.neighbors.iter().enumerate() {
            let (sx, sy, sz) = (y[3 * i], y[3 * i + 1], y[3 * i + 2]);
            let (mut hx, mut hy) = (0.0, 0.0);
            for &(k, w) in nb {
                hx += w * y[3 * k];
                hy += w * y[3 * k + 1];
            }
            let p = self.lattice.prefactor[i];
            hx *= p;
            hy *= p;
            dy[3 * i] = -sz * hy + mu * sy - 0.5 * g * sx;
            dy[3 * i + 1] = sz * hx - mu * sx - 2.0 * om * sz - 0.5 * g * sy;
            dy[3 * i + 2] = sx * hy - sy * hx + 2.0 * om * sy - g * (sz + 1.0);
        }
    }

    pub(crate) fn rhs_sup_norm(&self, y: &[f64], scratch: &mut [f64]) -> f64 {
        self.rhs(y, scratch);
        scratch.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Time derivative of every Bloch vector under the factorized equations.
///
/// The field length selects the ansatz: 1 site is the uniform state, 2 sites
/// the two-sublattice state (for `MeanFieldZ`), `N` sites a full chain or
/// all-to-all cluster.
pub fn mf_rhs(state: &BlochField, params: &ModelParams) -> Result<BlochField> {
    let sys = MfSystem::new(params, state.len())?;
    let y = state.to_flat();
    let mut dy = vec![0.0; y.len()];
    sys.rhs(&y, &mut dy);
    Ok(BlochField::from_flat(&dy))
}

/// Largest allowed `γ·dt` for [`evolve_mf`].
pub const MAX_DT_GAMMA: f64 = 0.01;
/// Allowed excursion of `|σ|` above one before integration is declared failed.
pub const NORM_GUARD: f64 = 1e-6;

fn check_step(params: &ModelParams, t_final: f64, dt: f64) -> Result<()> {
    if !(t_final > 0.0) {
        return Err(Error::Parameter(format!(
            "t_final must be positive, got {t_final}"
        )));
    }
    if !(dt > 0.0) || dt * params.gamma > MAX_DT_GAMMA + 1e-15 {
        return Err(Error::Parameter(format!(
            "dt·γ must lie in (0, {MAX_DT_GAMMA}], got {}",
            dt * params.gamma
        )));
    }
    Ok(())
}

fn norm_ok(y: &[f64]) -> bool {
    y.chunks_exact(3).all(|c| {
        let n2 = c[0] * c[0] + c[1] * c[1] + c[2] * c[2];
        n2.is_finite() && n2.sqrt() <= 1.0 + NORM_GUARD
    })
}

/// RK4 integration of the mean-field equations, sampled every `sample_dt`
/// (rounded to a whole number of steps; the initial state is included).
pub fn evolve_mf(
    initial: &BlochField,
    params: &ModelParams,
    t_final: f64,
    dt: f64,
    sample_dt: f64,
) -> Result<MfTimeSeries> {
    check_step(params, t_final, dt)?;
    let sys = MfSystem::new(params, initial.len())?;
    let mut y = initial.to_flat();
    if !norm_ok(&y) {
        return Err(Error::Parameter(
            "initial state lies outside the Bloch ball".into(),
        ));
    }
    let steps = (t_final / dt).round() as usize;
    let stride = ((sample_dt / dt).round() as usize).max(1);
    let mut rk = Rk4::new(sys.dim());
    let mut out = MfTimeSeries::default();
    out.times.push(0.0);
    out.states.push(initial.clone());
    for s in 1..=steps {
        let t = (s - 1) as f64 * dt;
        rk.step(&mut y, t, dt, &mut |_, y, dy| sys.rhs(y, dy));
        if !norm_ok(&y) {
            return Err(Error::Integration {
                last_valid_time: t,
                reason: "state left the Bloch ball or became non-finite".into(),
            });
        }
        if s % stride == 0 || s == steps {
            out.times.push(s as f64 * dt);
            out.states.push(BlochField::from_flat(&y));
        }
    }
    Ok(out)
}

/// Integrates without recording; returns the final state.
pub(crate) fn integrate_quiet(
    sys: &MfSystem,
    y: &mut [f64],
    t0: f64,
    t_final: f64,
    dt: f64,
) -> Result<()> {
    let steps = ((t_final - t0) / dt).round() as usize;
    let mut rk = Rk4::new(sys.dim());
    for s in 0..steps {
        rk.step(y, t0 + s as f64 * dt, dt, &mut |_, y, dy| sys.rhs(y, dy));
        if s % 64 == 0 && !norm_ok(y) {
            return Err(Error::Integration {
                last_valid_time: t0 + s as f64 * dt,
                reason: "state left the Bloch ball or became non-finite".into(),
            });
        }
    }
    if !norm_ok(y) {
        return Err(Error::Integration {
            last_valid_time: t_final,
            reason: "non-finite final state".into(),
        });
    }
    Ok(())
}
