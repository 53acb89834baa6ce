//! Quantum-jump unravelling of the master equation on the `2^N` space.
//!
//! Between jumps the state follows `Ĥ_eff = Ĥ - (iγ/2) Σᵢ n̂ᵢ` (RK4). Each
//! step loses norm `δp = 1 - ‖ψ(t+dt)‖²`; with probability `δp` a decay
//! `σ⁻ᵢ` is applied to `ψ(t)` instead, site `i` drawn with weight `⟨n̂ᵢ⟩`.

mod stats;
mod switching;

pub use stats::{
    ensemble_series, ensemble_stats, EnsembleSeries, EnsembleStats, MIN_BLOCK, MIN_BURN_IN,
};
pub use switching::{
    dwell_levels, extract_switching_times, extract_switching_times_many, DwellLevels,
    SwitchingTimes, MIN_SWITCHES,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::exact::SpinHamiltonian;
use crate::linalg::C64;
use crate::model::ModelParams;

/// Default step in units of `1/γ`.
pub const DEFAULT_DT_GAMMA: f64 = 1e-3;
/// Largest accepted jump probability per step.
pub const MAX_JUMP_PROB: f64 = 0.1;
pub const MAX_HALVINGS: u32 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub site: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub n_sites: usize,
    pub times: Vec<f64>,
    /// `⟨N̂⟩` per sample.
    pub photon_number: Vec<f64>,
    /// `⟨N̂²⟩` per sample.
    pub photon_number_sq: Vec<f64>,
    /// `⟨n̂ᵢ⟩`, one row per sample.
    pub occupations: Vec<Vec<f64>>,
    /// `⟨σʸᵢ⟩`, one row per sample.
    pub sigma_y: Vec<Vec<f64>>,
    /// Site-averaged `⟨σʸⱼσʸⱼ₊ᵣ⟩` for `r = 0..=N/2`, one row per sample.
    pub yy: Vec<Vec<f64>>,
    pub jumps: Vec<JumpEvent>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Columns `t,N,n_0..n_{N-1},sy_0..sy_{N-1}`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,N");
        for i in 0..self.n_sites {
            let _ = write!(s, ",n_{i}");
        }
        for i in 0..self.n_sites {
            let _ = write!(s, ",sy_{i}");
        }
        s.push('\n');
        for k in 0..self.len() {
            let _ = write!(s, "{},{:.12e}", self.times[k], self.photon_number[k]);
            for v in &self.occupations[k] {
                let _ = write!(s, ",{v:.12e}");
            }
            for v in &self.sigma_y[k] {
                let _ = write!(s, ",{v:.12e}");
            }
            s.push('\n');
        }
        s
    }

    /// Columns `t,site`.
    pub fn jumps_csv(&self) -> String {
        let mut s = String::from("t,site\n");
        for j in &self.jumps {
            let _ = writeln!(s, "{},{}", j.time, j.site);
        }
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub t_final: f64,
    pub sample_dt: f64,
    /// Base step; halved locally while `δp ≥ 0.1`.
    pub dt: f64,
    /// Initial state; vacuum when absent.
    pub initial: Option<Vec<C64>>,
}

impl TrajectoryConfig {
    pub fn new(params: &ModelParams, t_final: f64, sample_dt: f64) -> Self {
        TrajectoryConfig {
            t_final,
            sample_dt,
            dt: DEFAULT_DT_GAMMA / params.gamma,
            initial: None,
        }
    }
}

/// Quantum-jump propagator with preallocated work buffers.
#[derive(Debug, Clone)]
pub struct JumpStepper {
    n_sites: usize,
    gamma: f64,
    gen: EffectiveGenerator,
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
    next: Vec<C64>,
    /// Dense RK4 update matrix for the last step size (small spaces only).
    rk4_matrix: Option<(f64, Vec<C64>)>,
}

/// `-i Ĥ_eff` split into its diagonal, bond swaps and single-site flips.
#[derive(Debug, Clone)]
struct EffectiveGenerator {
    n_sites: usize,
    /// `-iE_s - γk_s/2`.
    diag: Vec<C64>,
    /// `(mask, amplitude)` per bond; the generator carries `-i` times it.
    hops: Vec<(usize, f64)>,
    drive: f64,
    /// Full row-major `-i Ĥ_eff` for small Hilbert spaces, where loop
    /// overhead dominates.
    dense: Option<Vec<C64>>,
}

/// Largest dimension stepped with a dense matrix.
const DENSE_MAX_DIM: usize = 32;

impl EffectiveGenerator {
    fn new(h: &SpinHamiltonian, gamma: f64) -> Self {
        let minus_i = |v: f64| C64::new(0.0, -v);
        let diag: Vec<C64> = h
            .diagonal()
            .iter()
            .enumerate()
            .map(|(s, &e)| C64::new(-0.5 * gamma * s.count_ones() as f64, -e))
            .collect();
        let d = diag.len();
        let dense = (d <= DENSE_MAX_DIM).then(|| {
            let mut m = vec![C64::new(0.0, 0.0); d * d];
            h.for_each_entry(|r, c, v| m[r * d + c] += minus_i(v));
            for (s, e) in diag.iter().enumerate() {
                m[s * d + s].re = e.re;
            }
            m
        });
        EffectiveGenerator {
            n_sites: h.n_sites(),
            diag,
            hops: h.hops().to_vec(),
            drive: h.omega(),
            dense,
        }
    }

    /// `out = -i Ĥ_eff psi`.
    #[inline]
    fn apply(&self, psi: &[C64], out: &mut [C64]) {
        if let Some(m) = &self.dense {
            for (o, row) in out.iter_mut().zip(m.chunks_exact(psi.len())) {
                *o = row
                    .iter()
                    .zip(psi)
                    .fold(C64::new(0.0, 0.0), |acc, (a, p)| acc + a * p);
            }
            return;
        }
        for ((o, d), p) in out.iter_mut().zip(&self.diag).zip(psi) {
            *o = d * p;
        }
        // `o += -i a p` written out in real arithmetic.
        #[inline(always)]
        fn add_minus_i(o: &mut C64, a: f64, p: C64) {
            o.re += a * p.im;
            o.im -= a * p.re;
        }
        let w = self.drive;
        if w != 0.0 {
            for i in 0..self.n_sites {
                let bit = 1usize << i;
                for (o, p) in out.chunks_exact_mut(2 * bit).zip(psi.chunks_exact(2 * bit)) {
                    let (o0, o1) = o.split_at_mut(bit);
                    let (p0, p1) = p.split_at(bit);
                    for k in 0..bit {
                        add_minus_i(&mut o0[k], w, p1[k]);
                        add_minus_i(&mut o1[k], w, p0[k]);
                    }
                }
            }
        }
        // Each bond swaps the states with exactly one of its two bits set:
        // enumerate the others bits freely and fix the low bit to 1.
        for &(mask, a) in &self.hops {
            let low = mask & mask.wrapping_neg();
            let (i, j) = (low.trailing_zeros(), (mask ^ low).trailing_zeros());
            for r in 0..psi.len() >> 2 {
                let r = insert_zero(insert_zero(r, i), j);
                let (s, t) = (r | low, r | (mask ^ low));
                let (ps, pt) = (psi[s], psi[t]);
                add_minus_i(&mut out[s], a, pt);
                add_minus_i(&mut out[t], a, ps);
            }
        }
    }
}

/// Outcome of one stochastic step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    NoJump { dp: f64 },
    Jump { dp: f64, site: usize },
}

impl JumpStepper {
    pub fn new(params: &ModelParams) -> Result<Self> {
        params.validate()?;
        let h = SpinHamiltonian::new(params)?;
        let d = h.dim();
        let z = vec![C64::default(); d];
        Ok(JumpStepper {
            n_sites: h.n_sites(),
            gamma: params.gamma,
            gen: EffectiveGenerator::new(&h, params.gamma),
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z.clone(),
            next: z,
            rk4_matrix: None,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.gen.diag.len()
    }

    /// Unnormalized no-jump propagation of `psi` by `dt` into `self.next`;
    /// returns `‖ψ(t+dt)‖²`.
    fn propagate(&mut self, psi: &[C64], dt: f64) -> f64 {
        if let Some(a) = &self.gen.dense {
            // For a constant linear generator the four RK4 stages combine to
            // `1 + hA + (hA)²/2 + (hA)³/6 + (hA)⁴/24`.
            if self.rk4_matrix.as_ref().map(|(h, _)| *h) != Some(dt) {
                self.rk4_matrix = Some((dt, rk4_update_matrix(a, psi.len(), dt)));
            }
            let m = &self.rk4_matrix.as_ref().expect("set above").1;
            let mut norm = 0.0;
            for (v, row) in self.next.iter_mut().zip(m.chunks_exact(psi.len())) {
                *v = row
                    .iter()
                    .zip(psi)
                    .fold(C64::new(0.0, 0.0), |acc, (a, p)| acc + a * p);
                norm += v.norm_sqr();
            }
            return norm;
        }
        let (g, tmp) = (&self.gen, &mut self.tmp);
        g.apply(psi, &mut self.k1);
        for ((t, p), k) in tmp.iter_mut().zip(psi).zip(&self.k1) {
            *t = *p + *k * (0.5 * dt);
        }
        g.apply(tmp, &mut self.k2);
        for ((t, p), k) in tmp.iter_mut().zip(psi).zip(&self.k2) {
            *t = *p + *k * (0.5 * dt);
        }
        g.apply(tmp, &mut self.k3);
        for ((t, p), k) in tmp.iter_mut().zip(psi).zip(&self.k3) {
            *t = *p + *k * dt;
        }
        g.apply(tmp, &mut self.k4);
        let mut norm = 0.0;
        let w = dt / 6.0;
        for (i, v) in self.next.iter_mut().enumerate() {
            *v = psi[i] + (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * w;
            norm += v.norm_sqr();
        }
        norm
    }

    /// One step of length `dt` from a normalized `psi`. Fails when `δp`
    /// reaches `0.1`; [`Self::step_adaptive`] halves instead.
    pub fn step<R: Rng>(&mut self, psi: &mut [C64], dt: f64, rng: &mut R) -> Result<StepOutcome> {
        let norm = self.propagate(psi, dt);
        let dp = 1.0 - norm;
        if !(dp < MAX_JUMP_PROB) || !norm.is_finite() {
            return Err(Error::JumpStep {
                time: f64::NAN,
                dp,
                halvings: 0,
            });
        }
        Ok(self.decide(psi, norm, rng))
    }

    fn decide<R: Rng>(&mut self, psi: &mut [C64], norm: f64, rng: &mut R) -> StepOutcome {
        let dp = (1.0 - norm).max(0.0);
        let u: f64 = rng.random();
        if u >= dp {
            let s = 1.0 / norm.sqrt();
            for (p, v) in psi.iter_mut().zip(&self.next) {
                *p = *v * s;
            }
            return StepOutcome::NoJump { dp };
        }
        let occ = occupations(psi, self.n_sites());
        let total: f64 = occ.iter().sum();
        let mut r = rng.random::<f64>() * total;
        let mut site = occ.len() - 1;
        for (i, &w) in occ.iter().enumerate() {
            if r < w {
                site = i;
                break;
            }
            r -= w;
        }
        while occ[site] == 0.0 {
            site -= 1;
        }
        let bit = 1usize << site;
        for s in 0..psi.len() {
            psi[s] = if s & bit == 0 {
                psi[s | bit]
            } else {
                C64::new(0.0, 0.0)
            };
        }
        let s = 1.0 / occ[site].sqrt();
        psi.iter_mut().for_each(|p| *p *= s);
        StepOutcome::Jump { dp, site }
    }

    /// Step of at most `dt`, halving until `δp < 0.1`. Returns the step
    /// actually taken and the outcome.
    pub fn step_adaptive<R: Rng>(
        &mut self,
        psi: &mut [C64],
        t: f64,
        dt: f64,
        rng: &mut R,
    ) -> Result<(f64, StepOutcome)> {
        let mut h = dt;
        for halvings in 0..=MAX_HALVINGS {
            let norm = self.propagate(psi, h);
            let dp = 1.0 - norm;
            if dp < MAX_JUMP_PROB && norm.is_finite() {
                return Ok((h, self.decide(psi, norm, rng)));
            }
            if halvings == MAX_HALVINGS {
                return Err(Error::JumpStep {
                    time: t,
                    dp,
                    halvings,
                });
            }
            h *= 0.5;
        }
        unreachable!()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }
}

/// Inserts a zero bit at position `pos`.
#[inline(always)]
fn insert_zero(x: usize, pos: u32) -> usize {
    let below = x & ((1usize << pos) - 1);
    ((x ^ below) << 1) | below
}

/// Horner form of the RK4 update matrix for `dψ/dt = Aψ` with `A` dense `d×d`.
fn rk4_update_matrix(a: &[C64], d: usize, h: f64) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); d * d];
    for r in 0..d {
        m[r * d + r] = C64::new(1.0, 0.0);
    }
    for j in (1..=4).rev() {
        // m ← 1 + (h/j) A m
        let mut next = vec![C64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..d {
                    acc += a[r * d + k] * m[k * d + c];
                }
                next[r * d + c] = acc * (h / j as f64);
            }
            next[r * d + r] += 1.0;
        }
        m = next;
    }
    m
}

fn occupations(psi: &[C64], n: usize) -> Vec<f64> {
    crate::exact::pure_occupations(psi, n)
}

struct Sampler {
    n: usize,
    max_r: usize,
}

impl Sampler {
    fn record(&self, psi: &[C64], t: f64, rec: &mut TrajectoryRecord) {
        let n = self.n;
        let mut occ = vec![0.0; n];
        let (mut n1, mut n2) = (0.0, 0.0);
        for (s, a) in psi.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            let k = s.count_ones() as f64;
            n1 += p * k;
            n2 += p * k * k;
            for (i, o) in occ.iter_mut().enumerate() {
                if (s >> i) & 1 == 1 {
                    *o += p;
                }
            }
        }
        let sy = crate::exact::pure_sigma_y(psi, n);
        let mut yy = vec![0.0; self.max_r + 1];
        yy[0] = 1.0;
        for (r, slot) in yy.iter_mut().enumerate().skip(1) {
            let mut acc = 0.0;
            for j in 0..n {
                acc += yy_pair(psi, j, (j + r) % n);
            }
            *slot = acc / n as f64;
        }
        rec.times.push(t);
        rec.photon_number.push(n1);
        rec.photon_number_sq.push(n2);
        rec.occupations.push(occ);
        rec.sigma_y.push(sy);
        rec.yy.push(yy);
    }
}

/// `⟨ψ|σʸᵢσʸⱼ|ψ⟩` for `i ≠ j`: flips both bits with sign `-1` on equal bits
/// and `+1` on different bits.
fn yy_pair(psi: &[C64], i: usize, j: usize) -> f64 {
    let mask = (1usize << i) | (1usize << j);
    let mut acc = 0.0;
    for s in 0..psi.len() {
        let b = s & mask;
        let sign = if b == 0 || b == mask { -1.0 } else { 1.0 };
        acc += sign * (psi[s ^ mask].conj() * psi[s]).re;
    }
    acc
}

fn validate_times(t_final: f64, sample_dt: f64, dt: f64) -> Result<()> {
    if !(t_final >= 0.0 && t_final.is_finite() && sample_dt > 0.0 && dt > 0.0) {
        return Err(Error::Parameter(
            "need t_final ≥ 0, sample_dt > 0, dt > 0".into(),
        ));
    }
    Ok(())
}

/// Single trajectory on substream `stream` of `seed`.
pub fn run_trajectory_with(
    params: &ModelParams,
    cfg: &TrajectoryConfig,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    validate_times(cfg.t_final, cfg.sample_dt, cfg.dt)?;
    let mut stepper = JumpStepper::new(params)?;
    let n = stepper.n_sites();
    let d = stepper.dim();
    let mut psi = match &cfg.initial {
        Some(v) if v.len() == d => {
            let norm: f64 = v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(Error::Parameter("initial state has zero norm".into()));
            }
            v.iter().map(|a| a / norm).collect()
        }
        Some(v) => {
            return Err(Error::Parameter(format!(
                "initial state has length {}, expected {d}",
                v.len()
            )))
        }
        None => {
            let mut v = vec![C64::new(0.0, 0.0); d];
            v[0] = C64::new(1.0, 0.0);
            v
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let sampler = Sampler { n, max_r: n / 2 };
    let mut rec = TrajectoryRecord {
        seed,
        stream,
        n_sites: n,
        times: Vec::new(),
        photon_number: Vec::new(),
        photon_number_sq: Vec::new(),
        occupations: Vec::new(),
        sigma_y: Vec::new(),
        yy: Vec::new(),
        jumps: Vec::new(),
    };
    sampler.record(&psi, 0.0, &mut rec);
    let n_samples = (cfg.t_final / cfg.sample_dt + 1e-9).floor() as usize;
    let mut t = 0.0;
    for k in 1..=n_samples {
        let target = k as f64 * cfg.sample_dt;
        while target - t > 1e-12 * target.max(1.0) {
            let h = cfg.dt.min(target - t);
            let (taken, outcome) = stepper.step_adaptive(&mut psi, t, h, &mut rng)?;
            if let StepOutcome::Jump { site, .. } = outcome {
                rec.jumps.push(JumpEvent {
                    time: t + taken,
                    site,
                });
            }
            t += taken;
        }
        t = target;
        sampler.record(&psi, t, &mut rec);
    }
    Ok(rec)
}

/// Single trajectory from the vacuum with the default step.
pub fn run_trajectory(
    params: &ModelParams,
    seed: u64,
    t_final: f64,
    sample_dt: f64,
) -> Result<TrajectoryRecord> {
    run_trajectory_with(
        params,
        &TrajectoryConfig::new(params, t_final, sample_dt),
        seed,
        0,
    )
}

/// `count` trajectories on substreams `0..count` of `seed`, in stream order.
pub fn run_ensemble(
    params: &ModelParams,
    cfg: &TrajectoryConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|s| run_trajectory_with(params, cfg, seed, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{pauli_expectation_pure, Pauli};
    use crate::model::CouplingSpec;

    fn ring(n: usize, j: f64, mu: f64, om: f64) -> ModelParams {
        ModelParams::scaled(
            j,
            mu,
            om,
            CouplingSpec::NearestNeighbor1D { n, periodic: true },
        )
        .unwrap()
    }

    #[test]
    fn dense_update_matches_sparse_stages() {
        let p = ring(3, 10.0, -2.5, 2.5);
        let mut dense = JumpStepper::new(&p).unwrap();
        let mut sparse = dense.clone();
        sparse.gen.dense = None;
        let psi: Vec<C64> = (0..8)
            .map(|s| C64::new(0.3 + s as f64 * 0.1, 0.2 - s as f64 * 0.05))
            .collect();
        for dt in [1e-3, 5e-4, 0.02] {
            let (a, b) = (dense.propagate(&psi, dt), sparse.propagate(&psi, dt));
            assert!((a - b).abs() < 1e-13);
            for (x, y) in dense.next.iter().zip(&sparse.next) {
                assert!((x - y).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn structured_generator_matches_row_wise_hamiltonian() {
        let params = [
            ring(7, 10.0, -2.5, 2.5),
            ModelParams::scaled(6.0, 1.3, 0.8, CouplingSpec::InfiniteRange { n: 6 }).unwrap(),
        ];
        for p in params {
            let h = SpinHamiltonian::new(&p).unwrap();
            let g = EffectiveGenerator::new(&h, p.gamma);
            assert!(g.dense.is_none());
            let d = h.dim();
            let psi: Vec<C64> = (0..d)
                .map(|s| C64::new((0.7 * s as f64).sin(), (1.3 * s as f64).cos()))
                .collect();
            let (mut got, mut hpsi) = (vec![C64::new(0.0, 0.0); d], vec![C64::new(0.0, 0.0); d]);
            g.apply(&psi, &mut got);
            h.apply_into(&psi, &mut hpsi);
            for s in 0..d {
                let want =
                    C64::new(0.0, -1.0) * hpsi[s] - 0.5 * p.gamma * s.count_ones() as f64 * psi[s];
                assert!(
                    (got[s] - want).norm() < 1e-12,
                    "state {s}: {} vs {want}",
                    got[s]
                );
            }
        }
    }

    #[test]
    fn vacuum_without_drive_never_jumps() {
        let p = ring(3, 10.0, 1.0, 0.0);
        let mut st = JumpStepper::new(&p).unwrap();
        let mut psi = vec![C64::new(0.0, 0.0); 8];
        psi[0] = C64::new(1.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            match st.step(&mut psi, 1e-3, &mut rng).unwrap() {
                StepOutcome::NoJump { dp } => assert!(dp < 1e-15, "{dp}"),
                other => panic!("{other:?}"),
            }
        }
        assert!((psi[0].norm() - 1.0).abs() < 1e-14);
        let rec = run_trajectory(&p, 5, 5.0, 0.5).unwrap();
        assert!(rec.jumps.is_empty());
        assert!(rec.photon_number.iter().all(|&n| n == 0.0));
    }

    #[test]
    fn single_excitation_decays_at_its_site() {
        let p = ModelParams::scaled(0.0, 0.0, 0.0, CouplingSpec::InfiniteRange { n: 3 }).unwrap();
        let mut st = JumpStepper::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut psi = vec![C64::new(0.0, 0.0); 8];
        psi[0b100] = C64::new(1.0, 0.0);
        loop {
            match st.step(&mut psi, 0.05, &mut rng).unwrap() {
                StepOutcome::NoJump { .. } => assert!((psi[0b100].norm() - 1.0).abs() < 1e-12),
                StepOutcome::Jump { site, .. } => {
                    assert_eq!(site, 2);
                    assert!((psi[0].norm() - 1.0).abs() < 1e-12);
                    break;
                }
            }
        }
    }

    #[test]
    fn oversized_step_is_rejected_or_halved() {
        let p = ModelParams::scaled(0.0, 0.0, 0.0, CouplingSpec::InfiniteRange { n: 2 }).unwrap();
        let mut st = JumpStepper::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut psi = vec![C64::new(0.0, 0.0); 4];
        psi[3] = C64::new(1.0, 0.0);
        assert!(matches!(
            st.step(&mut psi.clone(), 1.0, &mut rng),
            Err(Error::JumpStep { .. })
        ));
        let (taken, _) = st.step_adaptive(&mut psi, 0.0, 1.0, &mut rng).unwrap();
        assert!(taken < 0.06 && taken > 0.0);
    }

    #[test]
    fn records_are_deterministic_and_normalized() {
        let p = ring(4, 10.0, -2.5, 2.5);
        let a = run_trajectory(&p, 99, 10.0, 0.25).unwrap();
        let b = run_trajectory(&p, 99, 10.0, 0.25).unwrap();
        assert_eq!(a, b);
        let c = run_trajectory(&p, 100, 10.0, 0.25).unwrap();
        assert_ne!(a.jumps, c.jumps);
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        assert!(a.jumps.iter().all(|j| j.site < 4));
        assert_eq!(a.times.len(), 41);
    }

    #[test]
    fn norm_stays_unity() {
        let p = ring(4, 10.0, -2.5, 2.5);
        let mut st = JumpStepper::new(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut psi = vec![C64::new(0.0, 0.0); 16];
        psi[0] = C64::new(1.0, 0.0);
        for k in 0..20_000 {
            st.step_adaptive(&mut psi, k as f64 * 1e-3, 1e-3, &mut rng)
                .unwrap();
            let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn pair_readout_matches_generic_pauli() {
        let psi: Vec<C64> = (0..16)
            .map(|k| C64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
            .collect();
        let n: f64 = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let psi: Vec<C64> = psi.iter().map(|a| a / n).collect();
        for (i, j) in [(0, 1), (1, 3), (2, 0)] {
            let g = pauli_expectation_pure(&psi, &[(i, Pauli::Y), (j, Pauli::Y)]);
            assert!((yy_pair(&psi, i, j) - g).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_layout() {
        let p = ring(2, 1.0, 0.0, 0.5);
        let r = run_trajectory(&p, 1, 1.0, 0.5).unwrap();
        let csv = r.to_csv();
        assert!(csv.starts_with("t,N,n_0,n_1,sy_0,sy_1\n"));
        assert_eq!(csv.lines().count(), 4);
        assert!(r.jumps_csv().starts_with("t,site\n"));
    }
}
