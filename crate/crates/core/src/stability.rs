//! Linear stability of uniform steady states against plane-wave
//! perturbations `σₘ = σ₀ + δ e^{ikm}` on a 1D chain (z = 2).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eig3, C64};
use crate::meanfield::{integrate_quiet, MfSystem};
use crate::model::{Bloch, BlochField, CouplingSpec, ModelParams};

/// Largest steady-state residual accepted by [`stability_matrix`].
pub const STEADY_RESIDUAL_TOL: f64 = 1e-8;
/// Default number of wave numbers on `[0, π]`.
pub const DEFAULT_K_POINTS: usize = 1024;
/// Minimum grid accepted by [`scan_stability`].
pub const MIN_K_POINTS: usize = 256;
const AF_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum InstabilityKind {
    Stable,
    GlobalK0,
    Incommensurate,
    AfPi,
}

impl InstabilityKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InstabilityKind::Stable => "STABLE",
            InstabilityKind::GlobalK0 => "GLOBAL_K0",
            InstabilityKind::Incommensurate => "INCOMMENSURATE",
            InstabilityKind::AfPi => "AF_PI",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub k_grid: Vec<f64>,
    pub max_re_omega: Vec<f64>,
    /// All three eigenvalues per wave number.
    pub eigenvalues: Vec<[C64; 3]>,
    pub k_star: f64,
    pub max_re: f64,
    pub classification: InstabilityKind,
    /// Grid indices where the eigensolver returned non-finite values.
    pub flagged: Vec<usize>,
}

pub(crate) fn stability_matrix_unchecked(s: Bloch, params: &ModelParams, k: f64) -> [[f64; 3]; 3] {
    let (j, mu, om, g) = (params.j, params.mu, params.omega, params.gamma);
    let c = k.cos();
    [
        [-0.5 * g, mu - 2.0 * j * s.z * c, -2.0 * j * s.y],
        [2.0 * j * s.z * c - mu, -0.5 * g, 2.0 * j * s.x - 2.0 * om],
        [
            2.0 * j * s.y * (1.0 - c),
            -2.0 * j * s.x * (1.0 - c) + 2.0 * om,
            -g,
        ],
    ]
}

fn steady_residual(s: Bloch, params: &ModelParams) -> f64 {
    let p = params.with_coupling(CouplingSpec::MeanFieldZ { z: 1 });
    crate::meanfield::mf_rhs(&BlochField::uniform(s, 1), &p)
        .map(|d| d.sup_norm())
        .unwrap_or(f64::INFINITY)
}

/// Linearized generator for a perturbation of wave number `k` around the
/// uniform steady state `sigma0`.
pub fn stability_matrix(sigma0: Bloch, params: &ModelParams, k: f64) -> Result<[[f64; 3]; 3]> {
    params.validate()?;
    let r = steady_residual(sigma0, params);
    if !(r < STEADY_RESIDUAL_TOL) {
        return Err(Error::NotStationary { residual: r });
    }
    Ok(stability_matrix_unchecked(sigma0, params, k))
}

fn scan_grid(sigma0: Bloch, params: &ModelParams, k_grid: Vec<f64>) -> Result<StabilityReport> {
    stability_matrix(sigma0, params, 0.0)?;
    let mut eigenvalues = Vec::with_capacity(k_grid.len());
    let mut max_re_omega = Vec::with_capacity(k_grid.len());
    let mut flagged = Vec::new();
    for (i, &k) in k_grid.iter().enumerate() {
        let ev = eig3(&stability_matrix_unchecked(sigma0, params, k));
        if ev.iter().any(|e| !e.is_finite()) {
            flagged.push(i);
        }
        max_re_omega.push(ev.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max));
        eigenvalues.push(ev);
    }
    let (classification, star) = classify_growth(&max_re_omega);
    Ok(StabilityReport {
        k_star: k_grid[star],
        max_re: max_re_omega[star],
        k_grid,
        max_re_omega,
        eigenvalues,
        classification,
        flagged,
    })
}

/// Classifies a growth-rate curve sampled on an ascending grid from `k = 0`
/// to `k = π`; returns the class and the index of the reported `k*`.
pub fn classify_growth(max_re: &[f64]) -> (InstabilityKind, usize) {
    let last = max_re.len() - 1;
    let mut star = 0;
    for (i, &v) in max_re.iter().enumerate() {
        if v > max_re[star] {
            star = i;
        }
    }
    let top = max_re[star];
    if top < 0.0 {
        return (InstabilityKind::Stable, star);
    }
    if star == last || max_re[last] >= top - AF_TIE_TOL {
        return (InstabilityKind::AfPi, last);
    }
    if max_re[0] > 0.0 {
        return (InstabilityKind::GlobalK0, star);
    }
    (InstabilityKind::Incommensurate, star)
}

/// Growth rates on `n_k` uniform wave numbers over `[0, π]` (inclusive).
pub fn scan_stability(sigma0: Bloch, params: &ModelParams, n_k: usize) -> Result<StabilityReport> {
    if n_k < MIN_K_POINTS {
        return Err(Error::Parameter(format!(
            "k grid needs at least {MIN_K_POINTS} points, got {n_k}"
        )));
    }
    let pi = std::f64::consts::PI;
    scan_grid(
        sigma0,
        params,
        (0..n_k).map(|i| pi * i as f64 / (n_k - 1) as f64).collect(),
    )
}

/// Growth rates at the wave numbers `2πm/N`, `m = 0..=N/2`, of a ring of `n_sites`.
pub fn scan_stability_quantized(
    sigma0: Bloch,
    params: &ModelParams,
    n_sites: usize,
) -> Result<StabilityReport> {
    if n_sites < 2 {
        return Err(Error::Parameter("ring needs at least 2 sites".into()));
    }
    let tau = std::f64::consts::TAU;
    let k: Vec<f64> = (0..=n_sites / 2)
        .map(|m| tau * m as f64 / n_sites as f64)
        .collect();
    let mut r = scan_grid(sigma0, params, k)?;
    if n_sites % 2 == 1 {
        // no k = π mode on odd rings
        let (cls, star) = classify_growth(&r.max_re_omega);
        r.classification = if cls == InstabilityKind::AfPi {
            InstabilityKind::Incommensurate
        } else {
            cls
        };
        r.k_star = r.k_grid[star];
        r.max_re = r.max_re_omega[star];
    }
    Ok(r)
}

/// Response of a periodic chain started at a noisy uniform state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChainResponse {
    pub n_sites: usize,
    pub times: Vec<f64>,
    /// Sup-norm deviation from `σ₀` at each sample.
    pub deviation: Vec<f64>,
    pub initial_deviation: f64,
    pub growth_factor: f64,
    /// Wave numbers `2πm/N` of [`Self::spectrum`].
    pub k_grid: Vec<f64>,
    /// Spatial power spectrum of the deviation, taken at the first sample
    /// where the deviation exceeds `linear_limit` (or at the end).
    pub spectrum: Vec<f64>,
    pub spectrum_time: f64,
    /// Per-mode growth rate `ln(P(t₂)/P(t₁)) / 2(t₂ - t₁)` with `t₁`, `t₂`
    /// at a quarter and a half of the spectrum time.
    pub growth_rates: Vec<f64>,
    /// Wave number of the fastest-growing mode.
    pub k_peak: f64,
}

/// Power of the spatial Fourier modes `m = 0..=N/2` of a per-site profile.
pub fn spatial_spectrum(profile: &[[f64; 3]]) -> Vec<f64> {
    let n = profile.len();
    let tau = std::f64::consts::TAU;
    (0..=n / 2)
        .map(|m| {
            (0..3)
                .map(|c| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (site, v) in profile.iter().enumerate() {
                        let ph = tau * (m * site) as f64 / n as f64;
                        re += v[c] * ph.cos();
                        im -= v[c] * ph.sin();
                    }
                    re * re + im * im
                })
                .sum()
        })
        .collect()
}

/// Evolves an `n_sites` periodic chain from `σ₀` plus uniform noise of
/// amplitude `noise` on every component and tracks the deviation.
#[allow(clippy::too_many_arguments)]
pub fn chain_response(
    sigma0: Bloch,
    params: &ModelParams,
    n_sites: usize,
    noise: f64,
    seed: u64,
    t_final: f64,
    dt: f64,
    sample_dt: f64,
    linear_limit: f64,
) -> Result<ChainResponse> {
    let chain = params.with_coupling(CouplingSpec::NearestNeighbor1D {
        n: n_sites,
        periodic: true,
    });
    let sys = MfSystem::new(&chain, n_sites)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<f64> = (0..n_sites)
        .flat_map(|_| sigma0.to_array())
        .map(|v| v + noise * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    let base = sigma0.to_array();
    let dev = |y: &[f64]| {
        y.iter()
            .enumerate()
            .fold(0.0f64, |m, (i, v)| m.max((v - base[i % 3]).abs()))
    };
    let profile = |y: &[f64]| -> Vec<[f64; 3]> {
        y.chunks_exact(3)
            .map(|c| [c[0] - base[0], c[1] - base[1], c[2] - base[2]])
            .collect()
    };
    let initial_deviation = dev(&y);
    let mut times = vec![0.0];
    let mut deviation = vec![initial_deviation];
    let mut spectra = vec![spatial_spectrum(&profile(&y))];
    let mut hit = None;
    let samples = (t_final / sample_dt).round() as usize;
    let mut t = 0.0;
    for s in 1..=samples {
        let t_next = s as f64 * sample_dt;
        integrate_quiet(&sys, &mut y, t, t_next, dt)?;
        t = t_next;
        let d = dev(&y);
        times.push(t);
        deviation.push(d);
        if hit.is_none() {
            spectra.push(spatial_spectrum(&profile(&y)));
            if d >= linear_limit {
                hit = Some(s);
            }
        }
    }
    let end = hit.unwrap_or(spectra.len() - 1);
    // Early window, so quadratic harmonics of the leading mode stay below
    // the linear signal.
    let (a, b) = ((end / 4).max(1).min(end), (end / 2).max(1).min(end));
    let span = 2.0 * (times[b] - times[a]);
    let growth_rates: Vec<f64> = spectra[b]
        .iter()
        .zip(&spectra[a])
        .map(|(pb, pa)| {
            if span > 0.0 && *pa > 0.0 && *pb > 0.0 {
                (pb / pa).ln() / span
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect();
    let spectrum_time = times[end];
    let spectrum = spectra[end].clone();
    let tau = std::f64::consts::TAU;
    let k_grid: Vec<f64> = (0..=n_sites / 2)
        .map(|m| tau * m as f64 / n_sites as f64)
        .collect();
    // Harmonics of the leading mode grow at twice its rate but carry
    // negligible power; only modes near the top of the spectrum compete.
    let p_max = spectra[b].iter().cloned().fold(0.0, f64::max);
    let peak = growth_rates
        .iter()
        .enumerate()
        .filter(|(m, _)| spectra[b][*m] >= 1e-2 * p_max)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let max_dev = deviation.iter().cloned().fold(0.0, f64::max);
    Ok(ChainResponse {
        n_sites,
        growth_factor: max_dev / initial_deviation,
        times,
        deviation,
        initial_deviation,
        k_peak: k_grid[peak],
        k_grid,
        spectrum,
        spectrum_time,
        growth_rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{mf_rhs, uniform_steady_states};

    fn p(mu: f64, om: f64) -> ModelParams {
        ModelParams::scaled(10.0, mu, om, CouplingSpec::MeanFieldZ { z: 2 }).unwrap()
    }

    #[test]
    fn vacuum_spectrum_at_zero_drive() {
        let params = p(1.7, 0.0);
        for k in [0.0, 0.4, 1.9, std::f64::consts::PI] {
            let m = stability_matrix(Bloch::VACUUM, &params, k).unwrap();
            let mut ev = eig3(&m).to_vec();
            ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
            let w = params.mu + 2.0 * params.j * k.cos();
            assert!((ev[0] - C64::new(-1.0, 0.0)).norm() < 1e-9);
            assert!((ev[1] - C64::new(-0.5, -w.abs())).norm() < 1e-9, "{ev:?}");
            assert!((ev[2] - C64::new(-0.5, w.abs())).norm() < 1e-9);
        }
        let r = scan_stability(Bloch::VACUUM, &params, 512).unwrap();
        assert_eq!(r.classification, InstabilityKind::Stable);
        assert!(r.max_re_omega.iter().all(|v| (v + 0.5).abs() < 1e-9));
    }

    #[test]
    fn k0_matrix_is_jacobian_of_uniform_rhs() {
        let params = p(-5.0, 2.0);
        let uni = params.with_coupling(CouplingSpec::MeanFieldZ { z: 1 });
        for root in uniform_steady_states(&params).unwrap() {
            let m = stability_matrix(root.bloch, &params, 0.0).unwrap();
            let h = 1e-5;
            for c in 0..3 {
                let mut plus = root.bloch.to_array();
                let mut minus = plus;
                plus[c] += h;
                minus[c] -= h;
                let fp = mf_rhs(&BlochField::uniform(Bloch::from_array(plus), 1), &uni)
                    .unwrap()
                    .sites[0]
                    .to_array();
                let fm = mf_rhs(&BlochField::uniform(Bloch::from_array(minus), 1), &uni)
                    .unwrap()
                    .sites[0]
                    .to_array();
                for r in 0..3 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    assert!(
                        (fd - m[r][c]).abs() < 1e-10,
                        "entry ({r},{c}): {fd} vs {}",
                        m[r][c]
                    );
                }
            }
        }
    }

    #[test]
    fn middle_branch_unstable_at_k0() {
        let params = p(-5.0, 2.0);
        let roots = uniform_steady_states(&params).unwrap();
        let m = stability_matrix(roots[1].bloch, &params, 0.0).unwrap();
        assert!(eig3(&m).iter().any(|e| e.re > 0.0));
        let r = scan_stability(roots[1].bloch, &params, 1024).unwrap();
        assert_eq!(r.classification, InstabilityKind::GlobalK0);
    }

    #[test]
    fn taxonomy_at_mu_10() {
        let inc = p(10.0, 6.0);
        let u1 = uniform_steady_states(&inc).unwrap()[0];
        let r = scan_stability(u1.bloch, &inc, 1024).unwrap();
        assert_eq!(r.classification, InstabilityKind::Incommensurate);
        assert!(r.k_star > 0.1 && r.k_star < 3.0);

        let af = p(10.0, 12.0);
        let u1 = uniform_steady_states(&af).unwrap()[0];
        let r = scan_stability(u1.bloch, &af, 1024).unwrap();
        assert_eq!(r.classification, InstabilityKind::AfPi);
        assert_eq!(r.k_star, std::f64::consts::PI);
    }

    #[test]
    fn rejects_non_steady_state_and_coarse_grid() {
        let params = p(-5.0, 2.0);
        assert!(matches!(
            stability_matrix(Bloch::new(0.1, 0.2, 0.3), &params, 0.0),
            Err(Error::NotStationary { .. })
        ));
        let root = uniform_steady_states(&params).unwrap()[0];
        assert!(scan_stability(root.bloch, &params, 100).is_err());
    }

    #[test]
    fn tie_at_pi_prefers_af() {
        let (cls, star) = classify_growth(&[-1.0, 0.5, 0.5]);
        assert_eq!((cls, star), (InstabilityKind::AfPi, 2));
        let (cls, _) = classify_growth(&[0.2, 0.5, 0.1]);
        assert_eq!(cls, InstabilityKind::GlobalK0);
        let (cls, star) = classify_growth(&[-0.2, 0.5, 0.1]);
        assert_eq!((cls, star), (InstabilityKind::Incommensurate, 1));
    }

    #[test]
    fn spatial_spectrum_finds_plane_wave() {
        let n = 32;
        let prof: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let ph = std::f64::consts::TAU * 5.0 * i as f64 / n as f64;
                [0.0, ph.cos(), 0.3 * ph.sin()]
            })
            .collect();
        let s = spatial_spectrum(&prof);
        let peak = s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(peak, 5);
    }

    proptest::proptest! {
        #[test]
        fn trace_is_minus_two_gamma(mu in -15.0f64..15.0, om in 0.0f64..14.0, k in 0.0f64..std::f64::consts::PI, g in 0.2f64..3.0) {
            let params = ModelParams::new(10.0, mu, om, g, CouplingSpec::MeanFieldZ { z: 2 }).unwrap();
            for root in uniform_steady_states(&params).unwrap() {
                let m = stability_matrix(root.bloch, &params, k).unwrap();
                proptest::prop_assert!((m[0][0] + m[1][1] + m[2][2] + 2.0 * g).abs() < 1e-12);
                let neg = stability_matrix(root.bloch, &params, -k).unwrap();
                proptest::prop_assert_eq!(m, neg);
            }
        }
    }
}
