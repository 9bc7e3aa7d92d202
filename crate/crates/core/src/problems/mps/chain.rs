//! Open-boundary chains of real site tensors and their contractions.
//!
//! A site tensor holds two matrices `A[s]` (`s = 0` is spin up) of shape
//! `dl × dr`. Chains need not share bond dimensions: overlaps and
//! environments are taken between any two chains of equal length.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn one() -> Self {
        Self {
            rows: 1,
            cols: 1,
            data: vec![1.0],
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    /// `self · o`
    pub fn mul(&self, o: &Mat) -> Mat {
        debug_assert_eq!(self.cols, o.rows);
        let mut out = Mat::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            let row = &mut out.data[i * o.cols..(i + 1) * o.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (r, b) in row.iter_mut().zip(&o.data[k * o.cols..(k + 1) * o.cols]) {
                    *r += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · o`
    pub fn tmul(&self, o: &Mat) -> Mat {
        debug_assert_eq!(self.rows, o.rows);
        let mut out = Mat::zeros(self.cols, o.cols);
        for k in 0..self.rows {
            let orow = &o.data[k * o.cols..(k + 1) * o.cols];
            for i in 0..self.cols {
                let a = self.data[k * self.cols + i];
                if a == 0.0 {
                    continue;
                }
                for (r, b) in out.data[i * o.cols..(i + 1) * o.cols].iter_mut().zip(orow) {
                    *r += a * b;
                }
            }
        }
        out
    }

    /// `self · oᵀ`
    pub fn mul_t(&self, o: &Mat) -> Mat {
        debug_assert_eq!(self.cols, o.cols);
        let mut out = Mat::zeros(self.rows, o.rows);
        for i in 0..self.rows {
            let a = &self.data[i * self.cols..(i + 1) * self.cols];
            for j in 0..o.rows {
                let b = &o.data[j * o.cols..(j + 1) * o.cols];
                out.data[i * o.rows + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    pub fn add_assign(&mut self, o: &Mat) {
        debug_assert_eq!((self.rows, self.cols), (o.rows, o.cols));
        for (a, b) in self.data.iter_mut().zip(&o.data) {
            *a += b;
        }
    }

    /// Frobenius inner product.
    pub fn inner(&self, o: &Mat) -> f64 {
        self.data.iter().zip(&o.data).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Site {
    pub m: [Mat; 2],
}

impl Site {
    pub fn zeros(dl: usize, dr: usize) -> Self {
        Self {
            m: [Mat::zeros(dl, dr), Mat::zeros(dl, dr)],
        }
    }

    pub fn dl(&self) -> usize {
        self.m[0].rows
    }

    pub fn dr(&self) -> usize {
        self.m[0].cols
    }

    pub fn len(&self) -> usize {
        2 * self.dl() * self.dr()
    }

    pub fn from_slice(dl: usize, dr: usize, data: &[f64]) -> Self {
        let n = dl * dr;
        Self {
            m: [
                Mat {
                    rows: dl,
                    cols: dr,
                    data: data[..n].to_vec(),
                },
                Mat {
                    rows: dl,
                    cols: dr,
                    data: data[n..2 * n].to_vec(),
                },
            ],
        }
    }

    pub fn extend_into(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.m[0].data);
        out.extend_from_slice(&self.m[1].data);
    }
}

pub(crate) type Chain = Vec<Site>;

pub(crate) fn flatten(chain: &[Site]) -> Vec<f64> {
    let mut out = Vec::with_capacity(chain.iter().map(Site::len).sum());
    for s in chain {
        s.extend_into(&mut out);
    }
    out
}

/// Splits a flat vector into sites shaped like `like`.
pub(crate) fn unflatten_like(like: &[Site], x: &[f64]) -> Chain {
    let mut off = 0;
    like.iter()
        .map(|s| {
            let site = Site::from_slice(s.dl(), s.dr(), &x[off..off + s.len()]);
            off += s.len();
            site
        })
        .collect()
}

/// `E[j]` contracts sites `< j`, starting from `E[0] = [1]`. Shape `Dφ × Dψ`.
pub(crate) fn left_envs(phi: &[Site], psi: &[Site]) -> Vec<Mat> {
    let mut envs = Vec::with_capacity(phi.len() + 1);
    envs.push(Mat::one());
    for (a, b) in phi.iter().zip(psi) {
        let e = envs.last().expect("non-empty");
        let mut next = Mat::zeros(a.dr(), b.dr());
        for s in 0..2 {
            next.add_assign(&a.m[s].tmul(&e.mul(&b.m[s])));
        }
        envs.push(next);
    }
    envs
}

/// `R[j]` contracts sites `≥ j`; `R[L] = [1]`.
pub(crate) fn right_envs(phi: &[Site], psi: &[Site]) -> Vec<Mat> {
    let l = phi.len();
    let mut envs = vec![Mat::one(); l + 1];
    for j in (0..l).rev() {
        let (a, b) = (&phi[j], &psi[j]);
        let mut next = Mat::zeros(a.dl(), b.dl());
        for s in 0..2 {
            next.add_assign(&a.m[s].mul(&envs[j + 1]).mul_t(&b.m[s]));
        }
        envs[j] = next;
    }
    envs
}

/// `⟨φ|ψ⟩`
pub(crate) fn overlap(phi: &[Site], psi: &[Site]) -> f64 {
    left_envs(phi, psi).last().expect("non-empty").data[0]
}

/// Environments of the pair `(φ, ψ)`, reusable across several contractions.
pub(crate) struct PairEnvs {
    pub left: Vec<Mat>,
    pub right: Vec<Mat>,
}

impl PairEnvs {
    pub fn new(phi: &[Site], psi: &[Site]) -> Self {
        Self {
            left: left_envs(phi, psi),
            right: right_envs(phi, psi),
        }
    }

    pub fn overlap(&self) -> f64 {
        self.right[0].data[0]
    }

    /// `∂⟨φ|ψ⟩/∂ψ_j` for every site.
    pub fn grads(&self, phi: &[Site]) -> Chain {
        phi.iter()
            .enumerate()
            .map(|(j, a)| Site {
                m: [0, 1].map(|s| self.left[j].tmul(&a.m[s]).mul(&self.right[j + 1])),
            })
            .collect()
    }

    /// `N[(s,t),(s',t')] = Σ φ_{…st…} ψ_{…s't'…}` on bond `(k, k+1)`.
    pub fn rdm(&self, phi: &[Site], psi: &[Site], k: usize) -> [f64; 16] {
        let (lk, rk) = (&self.left[k], &self.right[k + 2]);
        let mut x = Vec::with_capacity(4);
        for s in 0..2 {
            for t in 0..2 {
                let p = phi[k].m[s].mul(&phi[k + 1].m[t]);
                x.push(lk.tmul(&p).mul(rk));
            }
        }
        let mut n = [0.0; 16];
        for s in 0..2 {
            for t in 0..2 {
                let q = psi[k].m[s].mul(&psi[k + 1].m[t]);
                for (i, xi) in x.iter().enumerate() {
                    n[i * 4 + 2 * s + t] = xi.inner(&q);
                }
            }
        }
        n
    }
}

/// Chain whose amplitudes are `Σ_j W` with site `j` replaced by `v_j`.
pub(crate) fn tangent(w: &[Site], v: &[Site]) -> Chain {
    let l = w.len();
    w.iter()
        .zip(v)
        .enumerate()
        .map(|(j, (a, b))| {
            let (dl, dr) = (a.dl(), a.dr());
            let first = j == 0;
            let last = j + 1 == l;
            let rows = if first { dl } else { 2 * dl };
            let cols = if last { dr } else { 2 * dr };
            let mut site = Site::zeros(rows, cols);
            for s in 0..2 {
                let m = &mut site.m[s];
                let mut put = |src: &Mat, r0: usize, c0: usize| {
                    for i in 0..dl {
                        for k in 0..dr {
                            *m.at_mut(r0 + i, c0 + k) = src.at(i, k);
                        }
                    }
                };
                match (first, last) {
                    (true, true) => put(&b.m[s], 0, 0),
                    (true, false) => {
                        put(&a.m[s], 0, 0);
                        put(&b.m[s], 0, dr);
                    }
                    (false, true) => {
                        put(&b.m[s], 0, 0);
                        put(&a.m[s], dl, 0);
                    }
                    (false, false) => {
                        put(&a.m[s], 0, 0);
                        put(&b.m[s], 0, dr);
                        put(&a.m[s], dl, dr);
                    }
                }
            }
            site
        })
        .collect()
}

/// Chain for `Σ_k O_k |W⟩`, where `O_k` acts as the 4×4 matrix `c[k]` on
/// sites `(k, k+1)`.
///
/// Built from a bond-6 operator chain with states idle, started on
/// `(s, s')`, and done.
pub(crate) fn apply_two_site_sum(w: &[Site], c: &[[f64; 16]]) -> Chain {
    const IDLE: usize = 0;
    const DONE: usize = 5;
    let l = w.len();
    debug_assert_eq!(c.len(), l - 1);
    // op[wl][wr] is a 2×2 operator (out, in), or None.
    let ops = |j: usize| {
        let mut op = vec![vec![None::<[[f64; 2]; 2]>; 6]; 6];
        let id = [[1.0, 0.0], [0.0, 1.0]];
        op[IDLE][IDLE] = Some(id);
        op[DONE][DONE] = Some(id);
        if j + 1 < l {
            for s in 0..2 {
                for sp in 0..2 {
                    let mut e = [[0.0; 2]; 2];
                    e[s][sp] = 1.0;
                    op[IDLE][1 + 2 * s + sp] = Some(e);
                }
            }
        }
        if j >= 1 {
            let ck = &c[j - 1];
            for s in 0..2 {
                for sp in 0..2 {
                    let mut b = [[0.0; 2]; 2];
                    for t in 0..2 {
                        for tp in 0..2 {
                            b[t][tp] = ck[(2 * s + t) * 4 + 2 * sp + tp];
                        }
                    }
                    op[1 + 2 * s + sp][DONE] = Some(b);
                }
            }
        }
        op
    };
    w.iter()
        .enumerate()
        .map(|(j, a)| {
            let (dl, dr) = (a.dl(), a.dr());
            let wls: Vec<usize> = if j == 0 { vec![IDLE] } else { (0..6).collect() };
            let wrs: Vec<usize> = if j + 1 == l { vec![DONE] } else { (0..6).collect() };
            let op = ops(j);
            let mut site = Site::zeros(dl * wls.len(), dr * wrs.len());
            for (il, &wl) in wls.iter().enumerate() {
                for (ir, &wr) in wrs.iter().enumerate() {
                    let Some(o) = op[wl][wr] else { continue };
                    for (s, row) in o.iter().enumerate() {
                        for (sp, &f) in row.iter().enumerate() {
                            if f == 0.0 {
                                continue;
                            }
                            for x in 0..dl {
                                for y in 0..dr {
                                    *site.m[s].at_mut(x * wls.len() + il, y * wrs.len() + ir) +=
                                        f * a.m[sp].at(x, y);
                                }
                            }
                        }
                    }
                }
            }
            site
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_chain(dims: &[usize], seed: u64) -> Chain {
        let mut r = crate::rng::seeded(seed);
        dims.windows(2)
            .map(|d| {
                let v = crate::rng::normal_vector(&mut r, 2 * d[0] * d[1]);
                Site::from_slice(d[0], d[1], &v)
            })
            .collect()
    }

    fn amplitudes(c: &[Site]) -> Vec<f64> {
        let l = c.len();
        (0..1usize << l)
            .map(|idx| {
                let mut v = Mat::one();
                for (j, site) in c.iter().enumerate() {
                    v = v.mul(&site.m[(idx >> (l - 1 - j)) & 1]);
                }
                v.data[0]
            })
            .collect()
    }

    #[test]
    fn overlap_matches_amplitudes() {
        let a = random_chain(&[1, 2, 3, 2, 1], 1);
        let b = random_chain(&[1, 3, 2, 4, 1], 2);
        let direct: f64 = amplitudes(&a).iter().zip(amplitudes(&b)).map(|(x, y)| x * y).sum();
        assert!((overlap(&a, &b) - direct).abs() < 1e-12 * direct.abs().max(1.0));
        assert!((PairEnvs::new(&a, &b).overlap() - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    #[test]
    fn tangent_is_sum_of_replacements() {
        let w = random_chain(&[1, 2, 2, 2, 1], 3);
        let v = random_chain(&[1, 2, 2, 2, 1], 4);
        let t = amplitudes(&tangent(&w, &v));
        let mut expected = vec![0.0; t.len()];
        for j in 0..w.len() {
            let mut c = w.clone();
            c[j] = v[j].clone();
            for (e, a) in expected.iter_mut().zip(amplitudes(&c)) {
                *e += a;
            }
        }
        assert!(crate::linalg::max_abs_diff(&t, &expected) < 1e-12);
    }
}
