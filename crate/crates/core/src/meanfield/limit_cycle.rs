use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bloch, BlochField, ModelParams};

use super::{MfSystem, MfTimeSeries};

/// Fixed-point threshold on the sup-norm of the right-hand side.
pub const FIXED_POINT_TOL: f64 = 1e-8;
/// Smallest peak-to-peak σʸ excursion accepted as an oscillation.
pub const MIN_AMPLITUDE: f64 = 1e-4;
/// Relative agreement required between successive period estimates.
pub const PERIOD_TOL: f64 = 0.01;
const MIN_PERIODS: usize = 10;
const ORBIT_SAMPLES: usize = 200;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitCycleInfo {
    pub period: f64,
    /// Largest peak-to-peak σʸ excursion over all sites.
    pub amplitude: f64,
    /// Largest relative deviation of a single-period estimate from the mean.
    pub period_spread: f64,
    /// One sampled period of the orbit, per site.
    pub sublattice_orbits: Vec<Vec<Bloch>>,
    /// Time-averaged photon number per site.
    pub mean_photon: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum AttractorVerdict {
    FixedPoint(BlochField),
    LimitCycle(LimitCycleInfo),
    Unclassified { rhs_norm: f64, amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodEstimate {
    pub period: f64,
    pub spread: f64,
    /// Whole periods spanned by the crossings used.
    pub cycles: usize,
}

/// Period of an oscillating signal from upward crossings of its mean.
///
/// If a period contains several upward crossings, the smallest group size
/// `m ≤ 4` for which all spans `t[i+m] - t[i]` agree to 1% is used.
pub fn estimate_period(times: &[f64], signal: &[f64]) -> Option<PeriodEstimate> {
    if times.len() < 3 || times.len() != signal.len() {
        return None;
    }
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let mut crossings = Vec::new();
    for i in 1..signal.len() {
        let (a, b) = (signal[i - 1] - mean, signal[i] - mean);
        if a < 0.0 && b >= 0.0 {
            let f = -a / (b - a);
            crossings.push(times[i - 1] + f * (times[i] - times[i - 1]));
        }
    }
    for m in 1..=4usize {
        if crossings.len() < m + 2 {
            return None;
        }
        let spans: Vec<f64> = crossings.windows(m + 1).map(|w| w[m] - w[0]).collect();
        let avg = spans.iter().sum::<f64>() / spans.len() as f64;
        let spread = spans
            .iter()
            .fold(0.0f64, |s, p| s.max((p - avg).abs() / avg));
        if spread <= PERIOD_TOL {
            let cycles = (crossings.len() - 1) / m;
            let period = (crossings[cycles * m] - crossings[0]) / cycles as f64;
            return Some(PeriodEstimate {
                period,
                spread,
                cycles,
            });
        }
    }
    None
}

/// Classifies the attractor reached by `series` after discarding `t < transient`.
pub fn detect_limit_cycle(
    series: &MfTimeSeries,
    params: &ModelParams,
    transient: f64,
) -> Result<AttractorVerdict> {
    let start = series
        .times
        .iter()
        .position(|&t| t >= transient)
        .ok_or_else(|| {
            Error::InsufficientStatistics(format!("series ends before the transient {transient}"))
        })?;
    let times = &series.times[start..];
    let states = &series.states[start..];
    let last = states.last().expect("non-empty");
    let sys = MfSystem::new(params, last.len())?;
    let y = last.to_flat();
    let mut scratch = vec![0.0; y.len()];
    let rhs_norm = sys.rhs_sup_norm(&y, &mut scratch);
    if rhs_norm < FIXED_POINT_TOL {
        return Ok(AttractorVerdict::FixedPoint(last.clone()));
    }
    let n_sites = last.len();
    let amplitude = (0..n_sites)
        .map(|i| {
            let (lo, hi) = states
                .iter()
                .map(|s| s.sites[i].y)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    (lo.min(v), hi.max(v))
                });
            hi - lo
        })
        .fold(0.0, f64::max);
    if amplitude <= MIN_AMPLITUDE {
        return Ok(AttractorVerdict::Unclassified {
            rhs_norm,
            amplitude,
        });
    }
    let signal: Vec<f64> = states.iter().map(|s| s.sites[0].y).collect();
    let Some(est) = estimate_period(times, &signal) else {
        return Ok(AttractorVerdict::Unclassified {
            rhs_norm,
            amplitude,
        });
    };
    if est.cycles < MIN_PERIODS {
        return Ok(AttractorVerdict::Unclassified {
            rhs_norm,
            amplitude,
        });
    }
    let t_end = *times.last().unwrap();
    let first = times
        .iter()
        .position(|&t| t >= t_end - est.period)
        .unwrap_or(0);
    let stride = ((times.len() - first) / ORBIT_SAMPLES).max(1);
    let sublattice_orbits = (0..n_sites)
        .map(|i| {
            states[first..]
                .iter()
                .step_by(stride)
                .map(|s| s.sites[i])
                .collect()
        })
        .collect();
    let mean_photon = (0..n_sites)
        .map(|i| {
            states
                .iter()
                .map(|s| s.sites[i].photon_number())
                .sum::<f64>()
                / states.len() as f64
        })
        .collect();
    Ok(AttractorVerdict::LimitCycle(LimitCycleInfo {
        period: est.period,
        amplitude,
        period_spread: est.spread,
        sublattice_orbits,
        mean_photon,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingSpec;

    fn synthetic(period: f64, t_end: f64, dt: f64, harmonics: bool) -> (Vec<f64>, Vec<f64>) {
        let tau = std::f64::consts::TAU;
        let times: Vec<f64> = (0..=((t_end / dt) as usize))
            .map(|i| i as f64 * dt)
            .collect();
        let sig = times
            .iter()
            .map(|&t| {
                let w = tau * t / period;
                if harmonics {
                    w.sin() + 0.9 * (3.0 * w).sin()
                } else {
                    0.3 + 0.05 * w.sin()
                }
            })
            .collect();
        (times, sig)
    }

    #[test]
    fn sine_period_recovered() {
        let (t, s) = synthetic(1.37, 100.0, 0.01, false);
        let est = estimate_period(&t, &s).unwrap();
        assert!((est.period / 1.37 - 1.0).abs() < 1e-3, "{est:?}");
    }

    #[test]
    fn multi_crossing_waveform() {
        let (t, s) = synthetic(2.0, 80.0, 0.005, true);
        let est = estimate_period(&t, &s).unwrap();
        assert!((est.period / 2.0 - 1.0).abs() < 1e-3, "{est:?}");
    }

    #[test]
    fn constant_series_is_fixed_point() {
        let p = ModelParams::scaled(10.0, 1.0, 0.0, CouplingSpec::MeanFieldZ { z: 2 }).unwrap();
        let field = BlochField::uniform(Bloch::VACUUM, 2);
        let series = MfTimeSeries {
            times: vec![0.0, 1.0, 2.0],
            states: vec![field.clone(); 3],
        };
        assert!(matches!(
            detect_limit_cycle(&series, &p, 1.0).unwrap(),
            AttractorVerdict::FixedPoint(_)
        ));
        assert!(detect_limit_cycle(&series, &p, 5.0).is_err());
    }
}
