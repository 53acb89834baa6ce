//! Permutation-symmetric reduction for all-to-all coupling.
//!
//! A symmetric density matrix is `ρ = Σₙ c(n) 𝓜(n)` where
//! `𝓜(n) = 2^{-N} Σ P` sums all distinct Pauli strings with `n_x` X's,
//! `n_y` Y's and `n_z` Z's. With this normalization `c(n)` is the
//! expectation value of any single string of type `n`, `c(0,0,0) = Tr ρ = 1`,
//! and a uniform product state with Bloch vector `s` has
//! `c(n) = s_x^{n_x} s_y^{n_y} s_z^{n_z}`.

mod basis;
mod generator;

pub use basis::{basis_size, SymmetricBasis, Triple};
pub use generator::SparseGenerator;

use std::fmt::Write as _;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{gap_from_spectrum, DensityMatrix, GapReport, Pauli};
use crate::linalg::{eigenvalues_real, solve_real, C64};
use crate::model::{Bloch, CouplingSpec, ModelParams};
use crate::ode::Rk4;

/// Largest `N` for dense solves on the reduced block (`𝒟 = 5455` at 30).
pub const MAX_DENSE_SITES: usize = 30;
/// Largest `N` for conversions to and from full density matrices.
pub const MAX_CONVERT_SITES: usize = 8;
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

fn sites_of(params: &ModelParams) -> Result<usize> {
    params.validate()?;
    match params.coupling {
        CouplingSpec::InfiniteRange { n } => Ok(n),
        _ => Err(Error::Coupling(
            "the permutation-symmetric reduction (needs all-to-all coupling)",
        )),
    }
}

pub fn enumerate_basis(n_sites: usize) -> Result<SymmetricBasis> {
    SymmetricBasis::new(n_sites)
}

/// Sparse generator with `∂ₜ c = L c`; row `(0,0,0)` is empty.
pub fn liouvillian_coefficients(params: &ModelParams) -> Result<(SymmetricBasis, SparseGenerator)> {
    let n = sites_of(params)?;
    let basis = SymmetricBasis::new(n)?;
    let bond = if n > 1 {
        2.0 * params.pair_coupling()?
    } else {
        0.0
    };
    let l = generator::assemble(&basis, params, bond);
    Ok((basis, l))
}

/// Uniform product state `⊗ (𝟙 + s·σ)/2`.
pub fn product_state_coeffs(basis: &SymmetricBasis, s: Bloch) -> Vec<f64> {
    basis
        .triples()
        .iter()
        .map(|t| s.x.powi(t[0] as i32) * s.y.powi(t[1] as i32) * s.z.powi(t[2] as i32))
        .collect()
}

pub fn maximally_mixed_coeffs(basis: &SymmetricBasis) -> Vec<f64> {
    let mut c = vec![0.0; basis.len()];
    c[0] = 1.0;
    c
}

fn check_coeffs(basis: &SymmetricBasis, c: &[f64]) -> Result<()> {
    if c.len() != basis.len() {
        return Err(Error::Parameter(format!(
            "coefficient vector has length {}, expected {}",
            c.len(),
            basis.len()
        )));
    }
    if (c[0] - 1.0).abs() > 1e-12 || c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter(
            "coefficients must be finite with c(0,0,0) = 1".into(),
        ));
    }
    Ok(())
}

/// RK4 evolution of `c`, returning the state at each requested time.
pub fn evolve_coeffs(
    c0: &[f64],
    params: &ModelParams,
    times: &[f64],
    dt: f64,
) -> Result<Vec<Vec<f64>>> {
    let (basis, l) = liouvillian_coefficients(params)?;
    check_coeffs(&basis, c0)?;
    if !(dt > 0.0)
        || times.iter().any(|t| !(t.is_finite() && *t >= 0.0))
        || times.windows(2).any(|w| w[1] < w[0])
    {
        return Err(Error::Parameter(
            "need dt > 0 and sorted nonnegative times".into(),
        ));
    }
    let mut c = c0.to_vec();
    let mut rk = Rk4::new(c.len());
    let mut t = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt).ceil() as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                rk.step(&mut c, t + s as f64 * h, h, &mut |_, y, dy| l.apply(y, dy));
            }
            if c.iter().any(|v| !v.is_finite() || v.abs() > 1.0 + 1e-6) {
                return Err(Error::Integration {
                    last_valid_time: t,
                    reason: "coefficients diverged".into(),
                });
            }
            t = target;
        }
        out.push(c.clone());
    }
    Ok(out)
}

fn dense_guard(n: usize) -> Result<()> {
    if n > MAX_DENSE_SITES {
        return Err(Error::TooLarge {
            what: "dense permutation-symmetric solves",
            n,
            limit: MAX_DENSE_SITES,
        });
    }
    Ok(())
}

/// Reduced block `A` and inhomogeneity `b` with `∂ₜ c' = A c' + b`.
fn reduced(l: &SparseGenerator) -> (Mat<f64>, Vec<f64>) {
    let d = l.dim - 1;
    let mut a = Mat::<f64>::zeros(d, d);
    let mut b = vec![0.0; d];
    for r in 1..l.dim {
        for k in l.row_ptr[r]..l.row_ptr[r + 1] {
            let col = l.cols[k];
            if col == 0 {
                b[r - 1] += l.vals[k];
            } else {
                a[(r - 1, col - 1)] += l.vals[k];
            }
        }
    }
    (a, b)
}

fn residual(l: &SparseGenerator, c: &[f64]) -> f64 {
    let mut out = vec![0.0; c.len()];
    l.apply(c, &mut out);
    out.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Stationary coefficients from `A c' = -b` (one refinement step).
pub fn steady_state_coeffs(params: &ModelParams) -> Result<Vec<f64>> {
    let n = sites_of(params)?;
    dense_guard(n)?;
    let (_, l) = liouvillian_coefficients(params)?;
    let (a, b) = reduced(&l);
    let neg_b: Vec<f64> = b.iter().map(|v| -v).collect();
    let mut x = solve_real(&a, &neg_b);
    let mut c = Vec::with_capacity(l.dim);
    c.push(1.0);
    c.extend_from_slice(&x);
    if c.iter().all(|v| v.is_finite()) {
        let mut r = vec![0.0; l.dim];
        l.apply(&c, &mut r);
        let corr = solve_real(&a, &r[1..].iter().map(|v| -v).collect::<Vec<_>>());
        x.iter_mut().zip(&corr).for_each(|(xi, ci)| *xi += ci);
        c[1..].copy_from_slice(&x);
    }
    let res = if c.iter().all(|v| v.is_finite()) {
        residual(&l, &c)
    } else {
        f64::INFINITY
    };
    if res < STEADY_RESIDUAL_TOL {
        return Ok(c);
    }
    let zero = eigenvalues_real(&a)?
        .iter()
        .filter(|e| e.norm() < crate::exact::ZERO_MODE_TOL)
        .count();
    if zero > 0 {
        Err(Error::Degenerate {
            zero_modes: zero + 1,
        })
    } else {
        Err(Error::NotStationary { residual: res })
    }
}

/// Spectrum of `L`: the stationary eigenvalue `0` plus the eigenvalues of
/// the reduced block, sorted by decreasing real part.
pub fn liouvillian_spectrum(params: &ModelParams) -> Result<Vec<C64>> {
    let n = sites_of(params)?;
    dense_guard(n)?;
    let (_, l) = liouvillian_coefficients(params)?;
    let (a, _) = reduced(&l);
    let mut ev = eigenvalues_real(&a)?;
    ev.push(C64::new(0.0, 0.0));
    ev.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));
    Ok(ev)
}

pub fn liouvillian_gap(params: &ModelParams) -> Result<GapReport> {
    gap_from_spectrum(&liouvillian_spectrum(params)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetricObservables {
    pub n_sites: usize,
    /// Single-site `⟨σᵅ⟩`, identical on every site.
    pub bloch: Bloch,
    /// `⟨σᵅᵢσᵝⱼ⟩` for `i ≠ j` (zero for `N = 1`).
    pub pair: [[f64; 3]; 3],
    pub photon_number: f64,
    /// `⟨N̂²⟩ - ⟨N̂⟩²`.
    pub number_variance: f64,
}

pub fn observables_from_coeffs(basis: &SymmetricBasis, c: &[f64]) -> Result<SymmetricObservables> {
    check_coeffs(basis, c)?;
    let n = basis.n_sites();
    let get = |t: Triple| basis.index(t).map(|i| c[i]).unwrap_or(0.0);
    let unit = |a: usize| {
        let mut t = [0; 3];
        t[a] = 1;
        t
    };
    let bloch = Bloch {
        x: get(unit(0)),
        y: get(unit(1)),
        z: get(unit(2)),
    };
    let mut pair = [[0.0; 3]; 3];
    if n >= 2 {
        for (a, row) in pair.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let mut t = [0; 3];
                t[a] += 1;
                t[b] += 1;
                *v = get(t);
            }
        }
    }
    let nf = n as f64;
    let photon_number = nf * (1.0 + bloch.z) / 2.0;
    let number_variance = 0.25 * (nf + nf * (nf - 1.0) * pair[2][2] - nf * nf * bloch.z * bloch.z);
    Ok(SymmetricObservables {
        n_sites: n,
        bloch,
        pair,
        photon_number,
        number_variance,
    })
}

/// `c(n)` read off a full density matrix via one representative string
/// per type (X's first, then Y's, then Z's).
pub fn coeffs_from_density(rho: &DensityMatrix) -> Result<Vec<f64>> {
    if rho.n_sites > MAX_CONVERT_SITES {
        return Err(Error::TooLarge {
            what: "density-matrix conversion",
            n: rho.n_sites,
            limit: MAX_CONVERT_SITES,
        });
    }
    let basis = SymmetricBasis::new(rho.n_sites)?;
    Ok(basis
        .triples()
        .iter()
        .map(|t| {
            let ops: Vec<(usize, Pauli)> = (0..t[0])
                .map(|_| Pauli::X)
                .chain((0..t[1]).map(|_| Pauli::Y))
                .chain((0..t[2]).map(|_| Pauli::Z))
                .enumerate()
                .collect();
            rho.pauli_expectation(&ops)
        })
        .collect())
}

/// Full `2^N × 2^N` density matrix `Σₙ c(n) 𝓜(n)`.
pub fn density_from_coeffs(basis: &SymmetricBasis, c: &[f64]) -> Result<DensityMatrix> {
    check_coeffs(basis, c)?;
    let n = basis.n_sites();
    if n > MAX_CONVERT_SITES {
        return Err(Error::TooLarge {
            what: "density-matrix conversion",
            n,
            limit: MAX_CONVERT_SITES,
        });
    }
    let d = 1usize << n;
    let mut rho = DensityMatrix {
        n_sites: n,
        data: vec![C64::new(0.0, 0.0); d * d],
    };
    let norm = 1.0 / d as f64;
    // Every string in base 4: digit 0 = 𝟙, 1 = X, 2 = Y, 3 = Z.
    for code in 0..(1usize << (2 * n)) {
        let mut t = [0usize; 3];
        let mut ops = Vec::new();
        for i in 0..n {
            let digit = (code >> (2 * i)) & 3;
            if digit > 0 {
                t[digit - 1] += 1;
                ops.push((i, [Pauli::X, Pauli::Y, Pauli::Z][digit - 1]));
            }
        }
        let w = c[basis.index(t).unwrap()] * norm;
        if w == 0.0 {
            continue;
        }
        for s in 0..d {
            let (ph, flip) = crate::exact::pauli_action(&ops, s);
            // P|s⟩ = ph |s ⊕ flip⟩.
            rho.data[(s ^ flip) + s * d] += ph * w;
        }
    }
    Ok(rho)
}

/// One `nx ny nz value` line per coefficient after a `# N = …` header.
pub fn dump_coeffs(basis: &SymmetricBasis, c: &[f64]) -> String {
    let mut s = format!("# N = {}\n", basis.n_sites());
    for (t, v) in basis.triples().iter().zip(c) {
        let _ = writeln!(s, "{} {} {} {:.17e}", t[0], t[1], t[2], v);
    }
    s
}

pub fn parse_coeffs(text: &str) -> Result<(SymmetricBasis, Vec<f64>)> {
    let mut n = None;
    let mut entries = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("N =") {
                n = v.trim().parse::<usize>().ok();
            }
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parameter(format!("malformed coefficient line {line:?}"));
        if f.len() != 4 {
            return Err(bad());
        }
        let t = [
            f[0].parse().map_err(|_| bad())?,
            f[1].parse().map_err(|_| bad())?,
            f[2].parse().map_err(|_| bad())?,
        ];
        entries.push((t, f[3].parse::<f64>().map_err(|_| bad())?));
    }
    let n = n.ok_or_else(|| Error::Parameter("missing `# N = …` header".into()))?;
    let basis = SymmetricBasis::new(n)?;
    let mut c = vec![f64::NAN; basis.len()];
    for (t, v) in entries {
        let i = basis
            .index(t)
            .ok_or_else(|| Error::Parameter(format!("triple {t:?} out of range")))?;
        c[i] = v;
    }
    check_coeffs(&basis, &c)?;
    Ok((basis, c))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ir(n: usize, j: f64, mu: f64, om: f64) -> ModelParams {
        ModelParams::scaled(j, mu, om, CouplingSpec::InfiniteRange { n }).unwrap()
    }

    #[test]
    fn identity_row_is_empty() {
        let (_, l) = liouvillian_coefficients(&ir(5, 10.0, -2.0, 1.5)).unwrap();
        assert_eq!(l.row_ptr[1], 0);
    }

    #[test]
    fn single_site_block_is_bloch_generator() {
        let (mu, om) = (0.4, 1.1);
        let (b, l) = liouvillian_coefficients(&ir(1, 0.0, mu, om)).unwrap();
        let idx = |t| b.index(t).unwrap();
        let (x, y, z) = (idx([1, 0, 0]), idx([0, 1, 0]), idx([0, 0, 1]));
        let want = [
            (x, x, -0.5),
            (x, y, mu),
            (y, x, -mu),
            (y, y, -0.5),
            (y, z, -2.0 * om),
            (z, y, 2.0 * om),
            (z, z, -1.0),
            (z, 0, -1.0),
        ];
        for (r, c, v) in want {
            assert!((l.get(r, c) - v).abs() < 1e-14, "({r},{c})");
        }
        assert_eq!(l.nnz(), want.len());
    }

    #[test]
    fn product_state_round_trip() {
        let s = Bloch {
            x: 0.3,
            y: -0.5,
            z: 0.2,
        };
        let b = SymmetricBasis::new(3).unwrap();
        let c = product_state_coeffs(&b, s);
        let rho = density_from_coeffs(&b, &c).unwrap();
        let direct = DensityMatrix::product(&[s, s, s]);
        assert!(rho.sup_dist(&direct) < 1e-14);
        let back = coeffs_from_density(&direct).unwrap();
        assert!(back.iter().zip(&c).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn vacuum_and_mixed_observables() {
        let b = SymmetricBasis::new(6).unwrap();
        let vac = observables_from_coeffs(&b, &product_state_coeffs(&b, Bloch::VACUUM)).unwrap();
        assert_eq!(vac.photon_number, 0.0);
        assert!(vac.number_variance.abs() < 1e-14);
        let mixed = observables_from_coeffs(&b, &maximally_mixed_coeffs(&b)).unwrap();
        assert_eq!(mixed.photon_number, 3.0);
        assert_eq!(mixed.bloch, Bloch::default());
        assert!((mixed.number_variance - 1.5).abs() < 1e-14);
    }

    #[test]
    fn undriven_vacuum_is_stationary() {
        let p = ir(4, 10.0, 2.0, 0.0);
        let (b, _) = liouvillian_coefficients(&p).unwrap();
        let c0 = product_state_coeffs(&b, Bloch::VACUUM);
        let out = evolve_coeffs(&c0, &p, &[5.0], 1e-3).unwrap();
        assert!(out[0].iter().zip(&c0).all(|(a, b)| (a - b).abs() < 1e-12));
        let ss = steady_state_coeffs(&p).unwrap();
        assert!(ss.iter().zip(&c0).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn single_site_gap() {
        let g = liouvillian_gap(&ir(1, 0.0, 0.3, 0.0)).unwrap();
        assert!((g.gap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dump_round_trip() {
        let b = SymmetricBasis::new(3).unwrap();
        let c = product_state_coeffs(
            &b,
            Bloch {
                x: 0.1,
                y: 0.2,
                z: -0.3,
            },
        );
        let (b2, c2) = parse_coeffs(&dump_coeffs(&b, &c)).unwrap();
        assert_eq!(b2.n_sites(), 3);
        assert_eq!(c, c2);
        assert!(parse_coeffs("0 0 0 1\n").is_err());
    }

    #[test]
    fn rejects_other_couplings() {
        let p = ModelParams::scaled(
            1.0,
            0.0,
            1.0,
            CouplingSpec::NearestNeighbor1D {
                n: 4,
                periodic: true,
            },
        )
        .unwrap();
        assert!(matches!(
            liouvillian_coefficients(&p),
            Err(Error::Coupling(_))
        ));
    }
}
