use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TrajectoryRecord;

pub const MIN_SWITCHES: usize = 10;
/// Moving-average window, in units of `1/γ`.
pub const SMOOTHING_WINDOW: f64 = 5.0;

/// Dwell statistics of the dark (1) and bright (2) plateaus of `N(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SwitchingTimes {
    pub tau1: f64,
    pub tau2: f64,
    pub tau1_se: f64,
    pub tau2_se: f64,
    pub n_switches: usize,
    /// `1/τ₁ + 1/τ₂`.
    pub gamma_toy: f64,
    pub gamma_toy_se: f64,
    /// Mean raw `N(t)` over samples classified dark / bright.
    pub level_dark: f64,
    pub level_bright: f64,
    pub dark_dwells: Vec<f64>,
    pub bright_dwells: Vec<f64>,
}

/// Mean raw `N(t)` on each plateau; NaN for a plateau never visited.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DwellLevels {
    pub level_dark: f64,
    pub level_bright: f64,
    pub n_switches: usize,
}

#[derive(Debug, Default)]
struct Tally {
    dark: Vec<f64>,
    bright: Vec<f64>,
    switches: usize,
    sum_dark: f64,
    n_dark: usize,
    sum_bright: f64,
    n_bright: usize,
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, f64::INFINITY);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Centred moving average over `w` samples; the ends, where the window is
/// incomplete, are dropped. Returns `(first_index, smoothed)`.
fn smooth(x: &[f64], w: usize) -> (usize, Vec<f64>) {
    let w = w.max(1) | 1;
    if x.len() < w {
        return (0, Vec::new());
    }
    let half = w / 2;
    let mut out = Vec::with_capacity(x.len() - w + 1);
    let mut acc: f64 = x[..w].iter().sum();
    out.push(acc / w as f64);
    for k in w..x.len() {
        acc += x[k] - x[k - w];
        out.push(acc / w as f64);
    }
    (half, out)
}

fn tally(rec: &TrajectoryRecord, n_lo: f64, n_hi: f64, gamma: f64, into: &mut Tally) -> Result<()> {
    if rec.times.len() < 2 {
        return Ok(());
    }
    let dt = rec.times[1] - rec.times[0];
    if !(dt > 0.0) {
        return Err(Error::Parameter("record times must increase".into()));
    }
    let w = (SMOOTHING_WINDOW / (gamma * dt)).round() as usize;
    let (off, s) = smooth(&rec.photon_number, w);
    let delta = n_hi - n_lo;
    let (lo, mid, hi) = (n_lo + 0.25 * delta, n_lo + 0.5 * delta, n_lo + 0.75 * delta);
    // 0 = undetermined, 1 = dark, 2 = bright. A flip is confirmed at the far
    // threshold and dated back to the last midpoint crossing.
    let mut label = vec![0u8; s.len()];
    let mut state = 0u8;
    let mut last_mid = 0usize;
    let mut switch_at: Vec<usize> = Vec::new();
    for (k, &v) in s.iter().enumerate() {
        if k > 0 && (s[k - 1] - mid) * (v - mid) <= 0.0 && s[k - 1] != v {
            last_mid = k;
        }
        let next = match state {
            1 if v > hi => 2,
            2 if v < lo => 1,
            0 if v < lo => 1,
            0 if v > hi => 2,
            other => other,
        };
        if next != state {
            let from = if state == 0 { 0 } else { last_mid };
            if state != 0 {
                switch_at.push(last_mid);
            }
            label[from..k].iter_mut().for_each(|l| *l = next);
            state = next;
        }
        label[k] = state;
    }
    into.switches += switch_at.len();
    for w in switch_at.windows(2) {
        let dwell = rec.times[off + w[1]] - rec.times[off + w[0]];
        // The state during this dwell is the label just after the first switch.
        if label[w[0]] == 1 {
            into.dark.push(dwell);
        } else {
            into.bright.push(dwell);
        }
    }
    for (k, &l) in label.iter().enumerate() {
        let raw = rec.photon_number[off + k];
        match l {
            1 => {
                into.sum_dark += raw;
                into.n_dark += 1;
            }
            2 => {
                into.sum_bright += raw;
                into.n_bright += 1;
            }
            _ => {}
        }
    }
    Ok(())
}

fn finish(t: Tally) -> Result<SwitchingTimes> {
    if t.switches < MIN_SWITCHES || t.dark.is_empty() || t.bright.is_empty() {
        return Err(Error::TooFewSwitches {
            observed: t.switches,
            required: MIN_SWITCHES,
        });
    }
    let (tau1, tau1_se) = mean_se(&t.dark);
    let (tau2, tau2_se) = mean_se(&t.bright);
    let gamma_toy = 1.0 / tau1 + 1.0 / tau2;
    let gamma_toy_se = (tau1_se.powi(2) / tau1.powi(4) + tau2_se.powi(2) / tau2.powi(4)).sqrt();
    Ok(SwitchingTimes {
        tau1,
        tau2,
        tau1_se,
        tau2_se,
        n_switches: t.switches,
        gamma_toy,
        gamma_toy_se,
        level_dark: t.sum_dark / t.n_dark.max(1) as f64,
        level_bright: t.sum_bright / t.n_bright.max(1) as f64,
        dark_dwells: t.dark,
        bright_dwells: t.bright,
    })
}

fn check_levels(n_lo: f64, n_hi: f64) -> Result<()> {
    if !(n_hi > n_lo) {
        return Err(Error::Parameter(format!(
            "need n_hi > n_lo, got {n_lo} and {n_hi}"
        )));
    }
    Ok(())
}

/// Dwell times of `N(t)` between the dark level `n_lo` and bright level
/// `n_hi`, using a hysteresis classifier at 25% and 75% of the gap. Dwells
/// cut by the start or end of the record are discarded.
pub fn extract_switching_times(
    record: &TrajectoryRecord,
    n_lo: f64,
    n_hi: f64,
    gamma: f64,
) -> Result<SwitchingTimes> {
    check_levels(n_lo, n_hi)?;
    let mut t = Tally::default();
    tally(record, n_lo, n_hi, gamma, &mut t)?;
    finish(t)
}

/// Dwell-conditioned plateau levels and switch count of one record, with
/// no minimum on the number of switches.
pub fn dwell_levels(
    record: &TrajectoryRecord,
    n_lo: f64,
    n_hi: f64,
    gamma: f64,
) -> Result<DwellLevels> {
    check_levels(n_lo, n_hi)?;
    let mut t = Tally::default();
    tally(record, n_lo, n_hi, gamma, &mut t)?;
    let mean = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
    Ok(DwellLevels {
        level_dark: mean(t.sum_dark, t.n_dark),
        level_bright: mean(t.sum_bright, t.n_bright),
        n_switches: t.switches,
    })
}

/// Pools complete dwells over several independent records.
pub fn extract_switching_times_many(
    records: &[TrajectoryRecord],
    n_lo: f64,
    n_hi: f64,
    gamma: f64,
) -> Result<SwitchingTimes> {
    check_levels(n_lo, n_hi)?;
    let mut t = Tally::default();
    for r in records {
        tally(r, n_lo, n_hi, gamma, &mut t)?;
    }
    finish(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(levels: &[(f64, f64)], dt: f64) -> TrajectoryRecord {
        let mut times = Vec::new();
        let mut n = Vec::new();
        let mut t = 0.0;
        for &(dur, lvl) in levels {
            let steps = (dur / dt).round() as usize;
            for _ in 0..steps {
                times.push(t);
                n.push(lvl);
                t += dt;
            }
        }
        let len = times.len();
        TrajectoryRecord {
            seed: 0,
            stream: 0,
            n_sites: 1,
            times,
            photon_number: n,
            photon_number_sq: vec![0.0; len],
            occupations: vec![vec![0.0]; len],
            sigma_y: vec![vec![0.0]; len],
            yy: vec![vec![1.0]; len],
            jumps: Vec::new(),
        }
    }

    #[test]
    fn square_wave_dwell_times_recovered() {
        let (t1, t2) = (40.0, 25.0);
        let mut levels = Vec::new();
        for _ in 0..20 {
            levels.push((t1, 0.5));
            levels.push((t2, 4.0));
        }
        let rec = synthetic(&levels, 0.05);
        let s = extract_switching_times(&rec, 0.5, 4.0, 1.0).unwrap();
        assert!((s.tau1 / t1 - 1.0).abs() < 0.02, "{}", s.tau1);
        assert!((s.tau2 / t2 - 1.0).abs() < 0.02, "{}", s.tau2);
        assert!((s.gamma_toy - (1.0 / s.tau1 + 1.0 / s.tau2)).abs() < 1e-15);
        assert_eq!(s.n_switches, 39);
        assert!((s.level_dark - 0.5).abs() < 0.02 && (s.level_bright - 4.0).abs() < 0.02);
    }

    #[test]
    fn flat_signal_is_insufficient() {
        let rec = synthetic(&[(500.0, 0.5)], 0.1);
        assert!(matches!(
            extract_switching_times(&rec, 0.5, 4.0, 1.0),
            Err(Error::TooFewSwitches { observed: 0, .. })
        ));
    }

    #[test]
    fn levels_are_reported_below_the_switch_minimum() {
        let rec = synthetic(&[(40.0, 0.5), (30.0, 4.0), (40.0, 0.5)], 0.1);
        let l = dwell_levels(&rec, 0.5, 4.0, 1.0).unwrap();
        assert_eq!(l.n_switches, 2);
        assert!(
            (l.level_dark - 0.5).abs() < 0.05 && (l.level_bright - 4.0).abs() < 0.1,
            "{l:?}"
        );
        assert!(extract_switching_times(&rec, 0.5, 4.0, 1.0).is_err());
    }

    #[test]
    fn short_spikes_are_filtered() {
        // One-sample spikes are averaged away by the 5/γ window.
        let mut levels = Vec::new();
        for _ in 0..30 {
            levels.push((20.0, 0.0));
            levels.push((0.1, 10.0));
        }
        let rec = synthetic(&levels, 0.1);
        assert!(extract_switching_times(&rec, 0.0, 10.0, 1.0).is_err());
    }

    #[test]
    fn smoothing_window() {
        let (off, s) = smooth(&[0.0, 0.0, 3.0, 0.0, 0.0], 3);
        assert_eq!(off, 1);
        assert_eq!(s, vec![1.0, 1.0, 1.0]);
    }
}
