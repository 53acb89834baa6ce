//! Heisenberg-picture action of the Lindbladian on Pauli strings, reduced
//! to string types.
//!
//! For a permutation-symmetric `ρ` the expectation of a Pauli string depends
//! only on its type, so `∂ₜ c(n) = Tr(ℒ†(Pₙ) ρ)` for any representative `Pₙ`.
//! `ℒ†` is a sum of one-site and two-site superoperators; acting on `Pₙ`
//! each rewrites the labels it touches, and all sites with the same label
//! give the same new type.

use rayon::prelude::*;

use crate::linalg::C64;
use crate::model::ModelParams;

use super::basis::{SymmetricBasis, Triple};

/// Labels in slot order `I, X, Y, Z`.
type M2 = [[C64; 2]; 2];
type M4 = [[C64; 4]; 4];

const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Rows/columns: 0 = empty, 1 = excited.
fn paulis() -> [M2; 4] {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        [[l, o], [o, l]],
        [[o, l], [l, o]],
        [[o, i], [-i, o]],
        [[-l, o], [o, l]],
    ]
}

fn mul<const K: usize>(a: &[[C64; K]; K], b: &[[C64; K]; K]) -> [[C64; K]; K] {
    let mut out = [[c(0.0, 0.0); K]; K];
    for r in 0..K {
        for col in 0..K {
            for k in 0..K {
                out[r][col] += a[r][k] * b[k][col];
            }
        }
    }
    out
}

fn lin<const K: usize>(terms: &[(C64, &[[C64; K]; K])]) -> [[C64; K]; K] {
    let mut out = [[c(0.0, 0.0); K]; K];
    for (w, m) in terms {
        for r in 0..K {
            for col in 0..K {
                out[r][col] += *w * m[r][col];
            }
        }
    }
    out
}

/// `Tr(a b)`.
fn tr_prod<const K: usize>(a: &[[C64; K]; K], b: &[[C64; K]; K]) -> C64 {
    let mut t = c(0.0, 0.0);
    for r in 0..K {
        for k in 0..K {
            t += a[r][k] * b[k][r];
        }
    }
    t
}

/// Site 0 is the low bit, matching the exact module.
fn kron(a: &M2, b: &M2) -> M4 {
    let mut out = [[c(0.0, 0.0); 4]; 4];
    for r1 in 0..2 {
        for c1 in 0..2 {
            for r0 in 0..2 {
                for c0 in 0..2 {
                    out[r0 + 2 * r1][c0 + 2 * c1] = a[r0][c0] * b[r1][c1];
                }
            }
        }
    }
    out
}

/// `g[q][p]`: coefficient of label `q` in `ℒ†₁(p)` for the single-site part
/// `h = Ωσˣ - (μ/2)σᶻ` plus decay at rate `γ`.
pub(crate) fn single_site_generator(params: &ModelParams) -> [[f64; 4]; 4] {
    let p = paulis();
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let h = lin(&[
        (c(params.omega, 0.0), &p[1]),
        (c(-0.5 * params.mu, 0.0), &p[3]),
    ]);
    let lower: M2 = [[o, l], [o, o]];
    let raise: M2 = [[o, o], [l, o]];
    let num = mul(&raise, &lower);
    let i = c(0.0, 1.0);
    let g = c(params.gamma, 0.0);
    let mut out = [[0.0; 4]; 4];
    for a in 0..4 {
        let comm = lin(&[(l, &mul(&h, &p[a])), (-l, &mul(&p[a], &h))]);
        let jump = mul(&mul(&raise, &p[a]), &lower);
        let anti = lin(&[(l, &mul(&num, &p[a])), (l, &mul(&p[a], &num))]);
        let r = lin(&[(i, &comm), (g, &jump), (-0.5 * g, &anti)]);
        for q in 0..4 {
            let v = tr_prod(&p[q], &r) * 0.5;
            debug_assert!(v.im.abs() < 1e-12);
            out[q][a] = v.re;
        }
    }
    out
}

/// `k[q][p]` over label pairs `4a + b`: coefficient of `q` in
/// `i[-c(σˣσˣ + σʸσʸ), p]` for one unordered pair with bond strength `c`.
pub(crate) fn pair_generator(bond: f64) -> [[f64; 16]; 16] {
    let p = paulis();
    let l = c(1.0, 0.0);
    let xx = kron(&p[1], &p[1]);
    let yy = kron(&p[2], &p[2]);
    let h = lin(&[(c(-bond, 0.0), &xx), (c(-bond, 0.0), &yy)]);
    let strings: Vec<M4> = (0..16).map(|k| kron(&p[k / 4], &p[k % 4])).collect();
    let mut out = [[0.0; 16]; 16];
    for (a, s) in strings.iter().enumerate() {
        let comm = lin(&[(l, &mul(&h, s)), (-l, &mul(s, &h))]);
        let r = lin(&[(c(0.0, 1.0), &comm)]);
        for (q, t) in strings.iter().enumerate() {
            let v = tr_prod(t, &r) * 0.25;
            debug_assert!(v.im.abs() < 1e-12);
            out[q][a] = v.re;
        }
    }
    out
}

/// Compressed sparse rows of the coefficient generator `L`.
#[derive(Debug, Clone)]
pub struct SparseGenerator {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl SparseGenerator {
    /// `out = L c`.
    pub fn apply(&self, c: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * c[self.cols[k]];
            }
            *o = acc;
        }
    }

    pub fn get(&self, r: usize, col: usize) -> f64 {
        (self.row_ptr[r]..self.row_ptr[r + 1])
            .find(|&k| self.cols[k] == col)
            .map(|k| self.vals[k])
            .unwrap_or(0.0)
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }
}

fn shift(n: Triple, remove: &[usize], add: &[usize]) -> Option<Triple> {
    let mut t = [n[0] as isize, n[1] as isize, n[2] as isize];
    for &a in remove {
        if a > 0 {
            t[a - 1] -= 1;
        }
    }
    for &a in add {
        if a > 0 {
            t[a - 1] += 1;
        }
    }
    if t.iter().any(|&v| v < 0) {
        return None;
    }
    Some([t[0] as usize, t[1] as usize, t[2] as usize])
}

/// Assembles `L` for `N` all-to-all coupled sites with bond strength `bond`
/// per unordered pair.
pub(crate) fn assemble(basis: &SymmetricBasis, params: &ModelParams, bond: f64) -> SparseGenerator {
    let g = single_site_generator(params);
    let k = pair_generator(bond);
    let n_sites = basis.n_sites();
    let rows: Vec<Vec<(usize, f64)>> = (0..basis.len())
        .into_par_iter()
        .map(|row| {
            let n = basis.triple(row);
            let cnt = [n_sites - n[0] - n[1] - n[2], n[0], n[1], n[2]];
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for a in 1..4 {
                if cnt[a] == 0 {
                    continue;
                }
                for b in 0..4 {
                    let w = g[b][a];
                    if w != 0.0 {
                        let m = shift(n, &[a], &[b]).unwrap();
                        entries.push((basis.index(m).unwrap(), cnt[a] as f64 * w));
                    }
                }
            }
            for a in 0..4 {
                for b in a..4 {
                    let pairs = if a == b {
                        cnt[a] * cnt[a].saturating_sub(1) / 2
                    } else {
                        cnt[a] * cnt[b]
                    };
                    if pairs == 0 {
                        continue;
                    }
                    for q in 0..16 {
                        let w = k[q][4 * a + b];
                        if w != 0.0 {
                            let m = shift(n, &[a, b], &[q / 4, q % 4]).unwrap();
                            entries.push((basis.index(m).unwrap(), pairs as f64 * w));
                        }
                    }
                }
            }
            entries.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
            for (col, v) in entries {
                match merged.last_mut() {
                    Some(last) if last.0 == col => last.1 += v,
                    _ => merged.push((col, v)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            merged
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(rows.len() + 1);
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    row_ptr.push(0);
    for r in rows {
        for (col, v) in r {
            cols.push(col);
            vals.push(v);
        }
        row_ptr.push(cols.len());
    }
    SparseGenerator {
        dim: basis.len(),
        row_ptr,
        cols,
        vals,
    }
}
