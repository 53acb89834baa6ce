//! Cross-validation of independent solvers (`oracle-check`).
//!
//! Each check compares a solver against a reference fixture and reports
//! the largest discrepancy. Statistical checks report the excess over
//! three standard errors, so their default tolerance is zero.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use ddxy::exact::{evolve_master, steady_state_dense, DensityMatrix};
use ddxy::meanfield::uniform_steady_states;
use ddxy::permsym::{
    enumerate_basis, evolve_coeffs, observables_from_coeffs, product_state_coeffs,
    steady_state_coeffs,
};
use ddxy::stability::{chain_response, scan_stability_quantized};
use ddxy::trajectories::{ensemble_series, run_ensemble, TrajectoryConfig};
use ddxy::{Bloch, CouplingSpec, ModelParams};

use crate::commands::Context;
use crate::config::Settings;
use crate::error::CliError;
use crate::output::OutDir;

#[derive(Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub description: &'static str,
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub fault_injected: bool,
}

struct Check {
    name: &'static str,
    description: &'static str,
    tolerance: f64,
    /// Returns the discrepancy; `fault` flips the sign of μ in the
    /// reference fixture.
    run: fn(seed: u64, fault: bool) -> ddxy::Result<f64>,
}

const CHECKS: &[Check] = &[
    Check {
        name: "mf_single_site",
        description: "uniform mean-field steady state at J = 0 vs closed-form Bloch vector",
        tolerance: 1e-9,
        run: mf_single_site,
    },
    Check {
        name: "dense_single_site",
        description: "dense Liouvillian steady state, one site, vs closed-form Bloch vector",
        tolerance: 1e-9,
        run: dense_single_site,
    },
    Check {
        name: "permsym_single_site",
        description: "permutation-symmetric steady state, one site, vs closed-form Bloch vector",
        tolerance: 1e-9,
        run: permsym_single_site,
    },
    Check {
        name: "permsym_vs_dense_evolution",
        description: "N = 3 all-to-all evolution from vacuum, t = 1 and 5: symmetric-sector vs dense master equation",
        tolerance: 1e-8,
        run: permsym_vs_dense_evolution,
    },
    Check {
        name: "permsym_vs_dense_steady",
        description: "N = 3 all-to-all steady state: symmetric-sector vs dense Liouvillian",
        tolerance: 1e-8,
        run: permsym_vs_dense_steady,
    },
    Check {
        name: "trajectories_vs_dense",
        description: "N = 3 ring, 400 trajectories to t = 5: <N> and Σʸ₁ vs dense master equation (excess over 3 SE)",
        tolerance: 0.0,
        run: trajectories_vs_dense,
    },
    Check {
        name: "stability_vs_dynamics",
        description: "μ = 10, Ω = 6 and 12: fastest-growing mode of a 64-site chain vs linear stability k* (grid bins beyond one)",
        tolerance: 0.0,
        run: stability_vs_dynamics,
    },
];

/// Closed-form single-site steady state `(sx, sy, sz)`.
fn single_site_bloch(mu: f64, omega: f64, gamma: f64) -> [f64; 3] {
    let sy = 4.0 * omega * gamma / (8.0 * omega * omega + 4.0 * mu * mu + gamma * gamma);
    [2.0 * mu * sy / gamma, sy, 2.0 * omega * sy / gamma - 1.0]
}

fn random_single_site(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.random_range(-5.0..5.0), rng.random_range(0.1..5.0))
}

fn bloch_dist(b: Bloch, r: [f64; 3]) -> f64 {
    b.sup_dist(&Bloch::from_array(r))
}

fn flip(mu: f64, fault: bool) -> f64 {
    if fault {
        -mu
    } else {
        mu
    }
}

fn mf_single_site(seed: u64, fault: bool) -> ddxy::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err: f64 = 0.0;
    for _ in 0..5 {
        let (mu, om) = random_single_site(&mut rng);
        let p = ModelParams::scaled(0.0, mu, om, CouplingSpec::MeanFieldZ { z: 2 })?;
        let ss = uniform_steady_states(&p)?;
        let reference = single_site_bloch(flip(mu, fault), om, 1.0);
        for s in ss {
            err = err.max(bloch_dist(s.bloch, reference));
        }
    }
    Ok(err)
}

fn dense_single_site(seed: u64, fault: bool) -> ddxy::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut err: f64 = 0.0;
    for _ in 0..5 {
        let (mu, om) = random_single_site(&mut rng);
        let p = ModelParams::scaled(0.0, mu, om, CouplingSpec::InfiniteRange { n: 1 })?;
        let rho = steady_state_dense(&p)?;
        err = err.max(bloch_dist(
            rho.bloch(0),
            single_site_bloch(flip(mu, fault), om, 1.0),
        ));
    }
    Ok(err)
}

fn permsym_single_site(seed: u64, fault: bool) -> ddxy::Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis = enumerate_basis(1)?;
    let mut err: f64 = 0.0;
    for _ in 0..5 {
        let (mu, om) = random_single_site(&mut rng);
        let p = ModelParams::scaled(0.0, mu, om, CouplingSpec::InfiniteRange { n: 1 })?;
        let obs = observables_from_coeffs(&basis, &steady_state_coeffs(&p)?)?;
        err = err.max(bloch_dist(
            obs.bloch,
            single_site_bloch(flip(mu, fault), om, 1.0),
        ));
    }
    Ok(err)
}

fn random_all_to_all(seed: u64) -> ddxy::Result<ModelParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = rng.random_range(0.5..10.0);
    let mu = rng.random_range(-5.0..5.0);
    let om = rng.random_range(0.5..4.0);
    ModelParams::scaled(j, mu, om, CouplingSpec::InfiniteRange { n: 3 })
}

fn dense_observables(rho: &DensityMatrix) -> [f64; 4] {
    let n = rho.n_sites;
    let mut b = [0.0; 3];
    for i in 0..n {
        let s = rho.bloch(i).to_array();
        for c in 0..3 {
            b[c] += s[c] / n as f64;
        }
    }
    [rho.photon_number(), b[0], b[1], b[2]]
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn permsym_vs_dense_evolution(seed: u64, fault: bool) -> ddxy::Result<f64> {
    let p = random_all_to_all(seed)?;
    let reference = p.with_drive(flip(p.mu, fault), p.omega);
    let times = [1.0, 5.0];
    let basis = enumerate_basis(3)?;
    let cs = evolve_coeffs(
        &product_state_coeffs(&basis, Bloch::VACUUM),
        &p,
        &times,
        1e-3,
    )?;
    let rhos = evolve_master(&DensityMatrix::vacuum(3), &reference, &times, 1e-3)?;
    let mut err: f64 = 0.0;
    for (c, rho) in cs.iter().zip(&rhos) {
        let o = observables_from_coeffs(&basis, c)?;
        let b = o.bloch.to_array();
        err = err.max(max_diff(
            &[o.photon_number, b[0], b[1], b[2]],
            &dense_observables(rho),
        ));
    }
    Ok(err)
}

fn permsym_vs_dense_steady(seed: u64, fault: bool) -> ddxy::Result<f64> {
    let p = random_all_to_all(seed.wrapping_add(1))?;
    let reference = p.with_drive(flip(p.mu, fault), p.omega);
    let basis = enumerate_basis(3)?;
    let o = observables_from_coeffs(&basis, &steady_state_coeffs(&p)?)?;
    let rho = steady_state_dense(&reference)?;
    let b = o.bloch.to_array();
    Ok(max_diff(
        &[o.photon_number, b[0], b[1], b[2]],
        &dense_observables(&rho),
    ))
}

fn trajectories_vs_dense(seed: u64, fault: bool) -> ddxy::Result<f64> {
    let p = ModelParams::scaled(
        10.0,
        -2.5,
        2.5,
        CouplingSpec::NearestNeighbor1D {
            n: 3,
            periodic: true,
        },
    )?;
    let reference = p.with_drive(flip(p.mu, fault), p.omega);
    let cfg = TrajectoryConfig::new(&p, 5.0, 0.5);
    let series = ensemble_series(&run_ensemble(&p, &cfg, seed, 400)?)?;
    let checkpoints: Vec<usize> = (1..series.times.len()).collect();
    let times: Vec<f64> = checkpoints.iter().map(|&k| series.times[k]).collect();
    let rhos = evolve_master(&DensityMatrix::vacuum(3), &reference, &times, 1e-3)?;
    let mut excess: f64 = 0.0;
    for (&k, rho) in checkpoints.iter().zip(&rhos) {
        let dn = (series.photon_number[k] - rho.photon_number()).abs()
            - 3.0 * series.photon_number_se[k];
        let dy = (series.sigma_y_corr[k][1] - rho.sigma_y_correlation(1)).abs()
            - 3.0 * series.sigma_y_se[k][1];
        excess = excess.max(dn).max(dy);
    }
    Ok(excess)
}

fn stability_vs_dynamics(seed: u64, fault: bool) -> ddxy::Result<f64> {
    const SITES: usize = 64;
    let bin = std::f64::consts::TAU / SITES as f64;
    let mut excess: f64 = 0.0;
    for om in [6.0, 12.0] {
        let p = ModelParams::scaled(10.0, 10.0, om, CouplingSpec::MeanFieldZ { z: 2 })?;
        let reference = p.with_drive(flip(p.mu, fault), p.omega);
        let dark = uniform_steady_states(&reference)?[0];
        let predicted = scan_stability_quantized(dark.bloch, &reference, SITES)?;
        let state = uniform_steady_states(&p)?[0];
        let chain = chain_response(state.bloch, &p, SITES, 1e-6, seed, 200.0, 1e-3, 0.1, 1e-3)?;
        let bins = ((chain.k_peak - predicted.k_star).abs() / bin).round();
        excess = excess.max(bins - 1.0);
    }
    Ok(excess)
}

pub fn run(ctx: &Context, s: &mut Settings) -> Result<(), CliError> {
    let override_tol: Option<f64> = s.get("oracle.tolerance")?;
    let fault: Option<String> = s.get("oracle.inject_fault")?;
    let only: Option<String> = s.get("oracle.only")?;
    if let Some(t) = override_tol {
        if !(t >= 0.0) {
            return Err(CliError::Config(
                "oracle.tolerance must be nonnegative".into(),
            ));
        }
    }
    if let Some(f) = &fault {
        if !CHECKS.iter().any(|c| c.name == f) {
            let names: Vec<&str> = CHECKS.iter().map(|c| c.name).collect();
            return Err(CliError::Config(format!(
                "unknown check {f:?}; available: {}",
                names.join(", ")
            )));
        }
    }
    let mut results = Vec::new();
    for c in CHECKS {
        if only.as_deref().is_some_and(|o| !c.name.contains(o)) {
            continue;
        }
        let injected = fault.as_deref() == Some(c.name);
        let tolerance = override_tol.unwrap_or(c.tolerance);
        let error = (c.run)(ctx.seed, injected)?;
        let passed = error <= tolerance;
        eprintln!(
            "{} {:<28} error {:.3e} (tolerance {:.1e})",
            if passed { "PASS" } else { "FAIL" },
            c.name,
            error,
            tolerance
        );
        results.push(CheckResult {
            name: c.name,
            description: c.description,
            error,
            tolerance,
            passed,
            fault_injected: injected,
        });
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    let mut out = OutDir::create(&ctx.out)?;
    out.write_json(
        "oracle_check.json",
        &serde_json::json!({ "passed": failed == 0, "n_failed": failed, "checks": results }),
    )?;
    out.manifest("oracle-check", ctx.seed, ctx.threads, s)?;
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(())
}
