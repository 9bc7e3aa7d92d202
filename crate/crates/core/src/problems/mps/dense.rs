//! Dense Hilbert-space vectors of length `2^L`.
//!
//! Basis index `Σ_j s_j 2^(L-1-j)`: the first site is the most significant bit.

use super::chain::{Chain, Site};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, scale};
use crate::rng;

/// Largest chain length for which dense `2^L` vectors are formed.
pub const DENSE_GUARD: usize = 14;

pub(crate) fn check_guard(length: usize) -> Result<()> {
    if length > DENSE_GUARD {
        return Err(Error::GuardExceeded {
            size: length,
            limit: DENSE_GUARD,
        });
    }
    Ok(())
}

/// Row vectors of all prefixes: `levels[j][p]` contracts sites `< j` for
/// prefix bits `p`.
fn prefixes(chain: &[Site]) -> Vec<Vec<Vec<f64>>> {
    let mut levels = vec![vec![vec![1.0]]];
    for site in chain {
        let prev = levels.last().expect("non-empty");
        let mut next = Vec::with_capacity(2 * prev.len());
        for v in prev {
            for s in 0..2 {
                let m = &site.m[s];
                let mut out = vec![0.0; m.cols];
                for (a, &va) in v.iter().enumerate() {
                    if va == 0.0 {
                        continue;
                    }
                    for (o, b) in out.iter_mut().zip(&m.data[a * m.cols..(a + 1) * m.cols]) {
                        *o += va * b;
                    }
                }
                next.push(out);
            }
        }
        levels.push(next);
    }
    levels
}

/// Column vectors of all suffixes: `levels[j][q]` contracts sites `≥ j`.
fn suffixes(chain: &[Site]) -> Vec<Vec<Vec<f64>>> {
    let l = chain.len();
    let mut levels = vec![Vec::new(); l + 1];
    levels[l] = vec![vec![1.0]];
    for j in (0..l).rev() {
        let site = &chain[j];
        let prev = &levels[j + 1];
        let mut next = Vec::with_capacity(2 * prev.len());
        for s in 0..2 {
            let m = &site.m[s];
            for v in prev {
                next.push(
                    (0..m.rows)
                        .map(|a| dot(&m.data[a * m.cols..(a + 1) * m.cols], v))
                        .collect(),
                );
            }
        }
        levels[j] = next;
    }
    levels
}

pub(crate) fn amplitudes(chain: &[Site]) -> Result<Vec<f64>> {
    check_guard(chain.len())?;
    let mut levels = prefixes(chain);
    Ok(levels.pop().expect("non-empty").into_iter().map(|v| v[0]).collect())
}

/// Gradient of `Σ_s w_s W_s` with respect to every site tensor of `chain`.
pub(crate) fn overlap_gradient(chain: &[Site], w: &[f64]) -> Result<Chain> {
    let l = chain.len();
    check_guard(l)?;
    let pre = prefixes(chain);
    let suf = suffixes(chain);
    Ok(chain
        .iter()
        .enumerate()
        .map(|(j, site)| {
            let (dl, dr) = (site.dl(), site.dr());
            let nq = 1usize << (l - j - 1);
            let mut g = Site::zeros(dl, dr);
            for (p, pv) in pre[j].iter().enumerate() {
                for s in 0..2 {
                    let base = (p * 2 + s) * nq;
                    let mut mr = vec![0.0; dr];
                    for (q, qv) in suf[j + 1].iter().enumerate() {
                        let wq = w[base + q];
                        if wq == 0.0 {
                            continue;
                        }
                        for (m, b) in mr.iter_mut().zip(qv) {
                            *m += wq * b;
                        }
                    }
                    let gm = &mut g.m[s];
                    for (a, &pa) in pv.iter().enumerate() {
                        for (b, &mb) in mr.iter().enumerate() {
                            *gm.at_mut(a, b) += pa * mb;
                        }
                    }
                }
            }
            g
        })
        .collect())
}

#[inline]
fn bits(idx: usize, l: usize, k: usize) -> (usize, usize, usize) {
    let shift = l - 2 - k;
    ((idx >> (shift + 1)) & 1, (idx >> shift) & 1, shift)
}

/// `N[(s,t),(s',t')] = Σ φ_{…st…} ψ_{…s't'…}` for dense vectors on `length` sites.
pub(crate) fn rdm(phi: &[f64], psi: &[f64], length: usize, k: usize) -> [f64; 16] {
    let mut n = [0.0; 16];
    for (i, &pi) in phi.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        let (s, t, shift) = bits(i, length, k);
        let base = i & !(3 << shift);
        for sp in 0..2 {
            for tp in 0..2 {
                n[(2 * s + t) * 4 + 2 * sp + tp] += pi * psi[base | (sp << (shift + 1)) | (tp << shift)];
            }
        }
    }
    n
}

/// Adds `c · O_k ψ` to `out`, where `O_k` acts as the 4×4 matrix `op` on sites `(k, k+1)`.
pub(crate) fn apply_two_site(op: &[f64; 16], psi: &[f64], length: usize, k: usize, c: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        let (s, t, shift) = bits(i, length, k);
        let base = i & !(3 << shift);
        let row = &op[(2 * s + t) * 4..(2 * s + t) * 4 + 4];
        let mut acc = 0.0;
        for sp in 0..2 {
            for tp in 0..2 {
                acc += row[2 * sp + tp] * psi[base | (sp << (shift + 1)) | (tp << shift)];
            }
        }
        *o += c * acc;
    }
}

/// `σ·σ = 2·SWAP − I` on a pair of spins, basis `(s,t) ↦ 2s+t`.
pub(crate) const HEISENBERG_BOND: [f64; 16] = [
    1.0, 0.0, 0.0, 0.0, //
    0.0, -1.0, 2.0, 0.0, //
    0.0, 2.0, -1.0, 0.0, //
    0.0, 0.0, 0.0, 1.0,
];

/// Open-chain antiferromagnetic Heisenberg Hamiltonian `Σ_k σ_k·σ_{k+1}`.
pub(crate) fn heisenberg_apply(psi: &[f64], length: usize) -> Vec<f64> {
    let mut out = vec![0.0; psi.len()];
    for k in 0..length - 1 {
        apply_two_site(&HEISENBERG_BOND, psi, length, k, 1.0, &mut out);
    }
    out
}

/// Ground state by power iteration on `3(L−1)·I − H` until the eigen-residual
/// `‖Hψ − (ψ·Hψ)ψ‖` drops to `tol`.
pub(crate) fn heisenberg_ground_state(
    length: usize,
    seed: u64,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, f64)> {
    if length < 2 {
        return Err(Error::InvalidArgument("chain needs at least two sites".into()));
    }
    check_guard(length)?;
    let shift = 3.0 * (length - 1) as f64;
    let mut r = rng::seeded(seed);
    let mut psi = rng::unit_sphere(&mut r, 1 << length);
    let mut residual = f64::INFINITY;
    for it in 0..=max_iters {
        let h = heisenberg_apply(&psi, length);
        let energy = dot(&psi, &h);
        if it % 10 == 0 || it == max_iters {
            residual = h
                .iter()
                .zip(&psi)
                .map(|(a, b)| (a - energy * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if residual <= tol {
                return Ok((psi, energy));
            }
        }
        let mut next: Vec<f64> = psi.iter().zip(&h).map(|(p, hp)| shift * p - hp).collect();
        let n = norm(&next);
        scale(1.0 / n, &mut next);
        psi = next;
    }
    Err(Error::EigenNotConverged {
        iterations: max_iters,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_site_singlet() {
        let (psi, e) = heisenberg_ground_state(2, 1, 1e-12, 10_000).unwrap();
        assert!((e + 3.0).abs() < 1e-10);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let overlap = psi[1] * s - psi[2] * s;
        assert!((overlap.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn apply_two_site_matches_rdm_adjoint() {
        let mut r = rng::seeded(3);
        let l = 5;
        let phi = rng::normal_vector(&mut r, 1 << l);
        let psi = rng::normal_vector(&mut r, 1 << l);
        let op: [f64; 16] = rng::normal_vector(&mut r, 16).try_into().unwrap();
        for k in 0..l - 1 {
            let mut out = vec![0.0; 1 << l];
            apply_two_site(&op, &psi, l, k, 1.0, &mut out);
            let lhs = dot(&phi, &out);
            let n = rdm(&phi, &psi, l, k);
            let rhs: f64 = op.iter().zip(&n).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
        }
    }
}
