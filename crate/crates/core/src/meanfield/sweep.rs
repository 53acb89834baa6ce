//! Parallel `(μ/γ, Ω/γ)` phase-diagram sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

use super::classify::{classify_phase, ClassifyConfig, PhaseLabel};

pub const SWEEP_CSV_HEADER: &str =
    "mu_over_gamma,omega_over_gamma,phase_label,n_A,n_B,lc_period,lc_amplitude,n_attractors";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_steps: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_steps: usize,
}

fn axis(lo: f64, hi: f64, steps: usize, i: usize) -> f64 {
    if steps <= 1 {
        lo
    } else {
        lo + (hi - lo) * i as f64 / (steps - 1) as f64
    }
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.mu_steps == 0 || self.omega_steps == 0 {
            return Err(Error::Parameter(
                "sweep grid needs at least one point per axis".into(),
            ));
        }
        let finite = [self.mu_min, self.mu_max, self.omega_min, self.omega_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.omega_min < 0.0 {
            return Err(Error::Parameter(
                "sweep ranges must be finite with Ω ≥ 0".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.mu_steps * self.omega_steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point `index` in μ-major order, in units of γ.
    pub fn point(&self, index: usize) -> (f64, f64) {
        let (i, j) = (index / self.omega_steps, index % self.omega_steps);
        (
            axis(self.mu_min, self.mu_max, self.mu_steps, i),
            axis(self.omega_min, self.omega_max, self.omega_steps, j),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub mu_over_gamma: f64,
    pub omega_over_gamma: f64,
    pub label: PhaseLabel,
    pub n_a: f64,
    pub n_b: f64,
    pub lc_period: Option<f64>,
    pub lc_amplitude: Option<f64>,
    pub n_attractors: usize,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.10e}")).unwrap_or_default()
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{:.10e},{:.10e},{},{},{}",
            self.mu_over_gamma,
            self.omega_over_gamma,
            self.label,
            self.n_a,
            self.n_b,
            opt(self.lc_period),
            opt(self.lc_amplitude),
            self.n_attractors
        )
    }
}

/// SplitMix64 finaliser on `master ⊕ mix(index)`.
pub fn point_seed(master: u64, index: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(master ^ mix(index))
}

/// Classifies a single grid point. Failures become `UNCLASSIFIED` rows.
pub fn sweep_point(
    grid: &SweepGrid,
    index: usize,
    base: &ModelParams,
    cfg: &ClassifyConfig,
) -> SweepRow {
    let (mu, om) = grid.point(index);
    let p = base.with_drive(mu * base.gamma, om * base.gamma);
    let cfg = ClassifyConfig {
        seed: point_seed(cfg.seed, index as u64),
        ..cfg.clone()
    };
    let mut row = SweepRow {
        index,
        mu_over_gamma: mu,
        omega_over_gamma: om,
        label: PhaseLabel::Unclassified,
        n_a: f64::NAN,
        n_b: f64::NAN,
        lc_period: None,
        lc_amplitude: None,
        n_attractors: 0,
    };
    if let Ok(r) = classify_phase(&p, &cfg) {
        row.label = r.label;
        row.n_a = r.n_a;
        row.n_b = r.n_b;
        row.lc_period = r.lc_period;
        row.lc_amplitude = r.lc_amplitude;
        row.n_attractors = r.n_attractors();
    }
    row
}

/// All grid points in index order; points run in parallel on the current
/// rayon pool.
pub fn phase_diagram_sweep(
    grid: &SweepGrid,
    base: &ModelParams,
    cfg: &ClassifyConfig,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    base.validate()?;
    Ok((0..grid.len())
        .into_par_iter()
        .map(|i| sweep_point(grid, i, base, cfg))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CouplingSpec;

    #[test]
    fn grid_points_cover_corners() {
        let g = SweepGrid {
            mu_min: -5.0,
            mu_max: 15.0,
            mu_steps: 3,
            omega_min: 0.0,
            omega_max: 4.0,
            omega_steps: 5,
        };
        assert_eq!(g.len(), 15);
        assert_eq!(g.point(0), (-5.0, 0.0));
        assert_eq!(g.point(4), (-5.0, 4.0));
        assert_eq!(g.point(14), (15.0, 4.0));
        assert_eq!(g.point(7), (5.0, 2.0));
    }

    #[test]
    fn seeds_differ_per_point() {
        let s: std::collections::HashSet<u64> = (0..1000).map(|i| point_seed(42, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_eq!(point_seed(1, 2), point_seed(1, 2));
    }

    #[test]
    fn zero_drive_row() {
        let g = SweepGrid {
            mu_min: 2.0,
            mu_max: 2.0,
            mu_steps: 1,
            omega_min: 0.0,
            omega_max: 0.0,
            omega_steps: 1,
        };
        let base = ModelParams::scaled(10.0, 0.0, 0.0, CouplingSpec::MeanFieldZ { z: 2 }).unwrap();
        let cfg = ClassifyConfig {
            n_random: 2,
            ..Default::default()
        };
        let rows = phase_diagram_sweep(&g, &base, &cfg).unwrap();
        assert_eq!(rows[0].label, PhaseLabel::U1);
        assert!(rows[0].to_csv().starts_with("2,0,U1,"));
    }
}
