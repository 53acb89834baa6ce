use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::TrajectoryRecord;

/// Minimum burn-in, in units of `1/γ`.
pub const MIN_BURN_IN: f64 = 50.0;
/// Block length for steady-state error bars, in units of `1/γ`.
pub const MIN_BLOCK: f64 = 10.0;
const SERIES_GROUPS: usize = 100;

/// Steady-state estimates pooled over time, sites and trajectories.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// `Σʸᵣ` for `r = 0..=N/2`.
    pub sigma_y_corr: Vec<f64>,
    pub stderr: Vec<f64>,
    pub photon_number: f64,
    pub photon_number_se: f64,
    #[serde(rename = "dN2_over_N")]
    pub dn2_over_n: f64,
    #[serde(rename = "dN2_over_N_se")]
    pub dn2_over_n_se: f64,
    pub n_trajectories: usize,
    pub n_blocks: usize,
    pub burn_in: f64,
}

/// Time-resolved ensemble estimates on the shared sample grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleSeries {
    pub times: Vec<f64>,
    pub photon_number: Vec<f64>,
    pub photon_number_se: Vec<f64>,
    /// `Σʸᵣ(t)`, one row per time.
    pub sigma_y_corr: Vec<Vec<f64>>,
    pub sigma_y_se: Vec<Vec<f64>>,
    pub dn2_over_n: Vec<f64>,
    pub dn2_over_n_se: Vec<f64>,
}

/// Layout of the per-sample primitive means: `N, N², yy_0..yy_R, sy_0..sy_{n-1}`.
struct Layout {
    n: usize,
    max_r: usize,
}

impl Layout {
    fn dim(&self) -> usize {
        2 + self.max_r + 1 + self.n
    }

    fn push(&self, rec: &TrajectoryRecord, k: usize, acc: &mut [f64]) {
        acc[0] += rec.photon_number[k];
        acc[1] += rec.photon_number_sq[k];
        for (r, v) in rec.yy[k].iter().enumerate() {
            acc[2 + r] += v;
        }
        let off = 3 + self.max_r;
        for (j, v) in rec.sigma_y[k].iter().enumerate() {
            acc[off + j] += v;
        }
    }

    fn sigma_y(&self, m: &[f64], r: usize) -> f64 {
        let off = 3 + self.max_r;
        let n = self.n;
        let prod: f64 = (0..n).map(|j| m[off + j] * m[off + (j + r) % n]).sum();
        m[2 + r] - prod / n as f64
    }

    fn dn2_over_n(&self, m: &[f64]) -> f64 {
        (m[1] - m[0] * m[0]) / self.n as f64
    }
}

/// Delete-one-group jackknife of `f(mean)`; groups are `(sums, weight)`.
fn jackknife(groups: &[(Vec<f64>, f64)], f: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let dim = groups[0].0.len();
    let mut total = vec![0.0; dim];
    let mut w = 0.0;
    for (s, gw) in groups {
        total.iter_mut().zip(s).for_each(|(t, v)| *t += v);
        w += gw;
    }
    let mean: Vec<f64> = total.iter().map(|t| t / w).collect();
    let est = f(&mean);
    let g = groups.len() as f64;
    let mut loo = Vec::with_capacity(groups.len());
    let mut buf = vec![0.0; dim];
    for (s, gw) in groups {
        for i in 0..dim {
            buf[i] = (total[i] - s[i]) / (w - gw);
        }
        loo.push(f(&buf));
    }
    let bar = loo.iter().sum::<f64>() / g;
    let var = (g - 1.0) / g * loo.iter().map(|v| (v - bar) * (v - bar)).sum::<f64>();
    (est, var.max(0.0).sqrt())
}

fn layout_of(records: &[TrajectoryRecord]) -> Result<Layout> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientStatistics("no trajectories".into()))?;
    let n = first.n_sites;
    if records.iter().any(|r| r.n_sites != n) {
        return Err(Error::Parameter("records differ in system size".into()));
    }
    Ok(Layout { n, max_r: n / 2 })
}

/// Steady-state statistics from samples with `t ≥ burn_in`, blocked into
/// windows of `10/γ`; error bars from a jackknife over blocks.
pub fn ensemble_stats(
    records: &[TrajectoryRecord],
    gamma: f64,
    burn_in: f64,
) -> Result<EnsembleStats> {
    if records.len() < 2 {
        return Err(Error::InsufficientStatistics(format!(
            "need at least 2 trajectories, got {}",
            records.len()
        )));
    }
    if !(gamma > 0.0) || burn_in * gamma < MIN_BURN_IN - 1e-9 {
        return Err(Error::Parameter(format!(
            "burn-in must be at least {MIN_BURN_IN}/γ"
        )));
    }
    let lay = layout_of(records)?;
    let block = MIN_BLOCK / gamma;
    let mut groups: Vec<(Vec<f64>, f64)> = Vec::new();
    for rec in records {
        let t_end = rec.times.last().copied().unwrap_or(0.0);
        let nb = ((t_end - burn_in) / block + 1e-9).floor().max(0.0) as usize;
        let base = groups.len();
        groups.extend((0..nb).map(|_| (vec![0.0; lay.dim()], 0.0)));
        for (k, &t) in rec.times.iter().enumerate() {
            if t < burn_in {
                continue;
            }
            let b = (((t - burn_in) / block) as usize).min(nb.saturating_sub(1));
            if nb == 0 {
                break;
            }
            let g = &mut groups[base + b];
            lay.push(rec, k, &mut g.0);
            g.1 += 1.0;
        }
    }
    groups.retain(|g| g.1 > 0.0);
    if groups.len() < 2 {
        return Err(Error::InsufficientStatistics(format!(
            "{} post-burn-in blocks of length {block}",
            groups.len()
        )));
    }
    let mut sigma_y_corr = Vec::new();
    let mut stderr = Vec::new();
    for r in 0..=lay.max_r {
        let (v, e) = jackknife(&groups, |m| lay.sigma_y(m, r));
        sigma_y_corr.push(v);
        stderr.push(e);
    }
    let (photon_number, photon_number_se) = jackknife(&groups, |m| m[0]);
    let (dn2_over_n, dn2_over_n_se) = jackknife(&groups, |m| lay.dn2_over_n(m));
    Ok(EnsembleStats {
        sigma_y_corr,
        stderr,
        photon_number,
        photon_number_se,
        dn2_over_n,
        dn2_over_n_se,
        n_trajectories: records.len(),
        n_blocks: groups.len(),
        burn_in,
    })
}

/// Ensemble averages at every shared sample time; error bars from a
/// jackknife over (at most 100) contiguous batches of trajectories.
pub fn ensemble_series(records: &[TrajectoryRecord]) -> Result<EnsembleSeries> {
    if records.len() < 2 {
        return Err(Error::InsufficientStatistics(format!(
            "need at least 2 trajectories, got {}",
            records.len()
        )));
    }
    let lay = layout_of(records)?;
    let times = records[0].times.clone();
    if records.iter().any(|r| r.times != times) {
        return Err(Error::Parameter(
            "records do not share a sample grid".into(),
        ));
    }
    let g = records.len().min(SERIES_GROUPS);
    let mut out = EnsembleSeries {
        times: times.clone(),
        photon_number: Vec::new(),
        photon_number_se: Vec::new(),
        sigma_y_corr: Vec::new(),
        sigma_y_se: Vec::new(),
        dn2_over_n: Vec::new(),
        dn2_over_n_se: Vec::new(),
    };
    for k in 0..times.len() {
        let mut groups = vec![(vec![0.0; lay.dim()], 0.0); g];
        for (i, rec) in records.iter().enumerate() {
            let grp = &mut groups[i * g / records.len()];
            lay.push(rec, k, &mut grp.0);
            grp.1 += 1.0;
        }
        let (n, ne) = jackknife(&groups, |m| m[0]);
        out.photon_number.push(n);
        out.photon_number_se.push(ne);
        let (sy, se): (Vec<f64>, Vec<f64>) = (0..=lay.max_r)
            .map(|r| jackknife(&groups, |m| lay.sigma_y(m, r)))
            .unzip();
        out.sigma_y_corr.push(sy);
        out.sigma_y_se.push(se);
        let (d, de) = jackknife(&groups, |m| lay.dn2_over_n(m));
        out.dn2_over_n.push(d);
        out.dn2_over_n_se.push(de);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs = [1.0, 2.0, 4.0, 7.0, 11.0];
        let groups: Vec<(Vec<f64>, f64)> = xs.iter().map(|&x| (vec![x], 1.0)).collect();
        let (m, se) = jackknife(&groups, |m| m[0]);
        let mean = 5.0;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!((m - mean).abs() < 1e-14);
        assert!((se - (var / 5.0).sqrt()).abs() < 1e-12);
    }

    fn flat_record(stream: u64, sy: f64, len: usize) -> TrajectoryRecord {
        let n = 4;
        TrajectoryRecord {
            seed: 0,
            stream,
            n_sites: n,
            times: (0..len).map(|k| k as f64).collect(),
            photon_number: vec![1.0; len],
            photon_number_sq: vec![1.5; len],
            occupations: vec![vec![0.25; n]; len],
            sigma_y: vec![vec![sy; n]; len],
            yy: vec![vec![1.0, sy * sy, sy * sy]; len],
            jumps: Vec::new(),
        }
    }

    #[test]
    fn uncorrelated_product_records_give_zero_connected_part() {
        let recs = vec![flat_record(0, 0.3, 200), flat_record(1, 0.3, 200)];
        let s = ensemble_stats(&recs, 1.0, 50.0).unwrap();
        assert!((s.sigma_y_corr[0] - (1.0 - 0.09)).abs() < 1e-12);
        assert!(s.sigma_y_corr[1].abs() < 1e-12);
        assert!((s.dn2_over_n - 0.125).abs() < 1e-12);
        assert!(s.stderr.iter().all(|&e| e >= 0.0));
        assert_eq!(s.n_blocks, 2 * 14);
    }

    #[test]
    fn statistics_preconditions() {
        let one = vec![flat_record(0, 0.1, 200)];
        assert!(matches!(
            ensemble_stats(&one, 1.0, 50.0),
            Err(Error::InsufficientStatistics(_))
        ));
        let two = vec![flat_record(0, 0.1, 55), flat_record(1, 0.1, 55)];
        assert!(matches!(
            ensemble_stats(&two, 1.0, 50.0),
            Err(Error::InsufficientStatistics(_))
        ));
        assert!(matches!(
            ensemble_stats(&two, 1.0, 10.0),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn classical_mixture_has_connected_correlations() {
        // Half the trajectories at +s, half at -s: the ensemble mean of σʸ
        // vanishes but ⟨σʸσʸ⟩ = s², so Σʸ₁ = s².
        let recs: Vec<_> = (0..10)
            .map(|i| flat_record(i, if i % 2 == 0 { 0.5 } else { -0.5 }, 5))
            .collect();
        let s = ensemble_series(&recs).unwrap();
        assert!((s.sigma_y_corr[0][1] - 0.25).abs() < 1e-12);
        assert_eq!(s.times.len(), 5);
    }
}
