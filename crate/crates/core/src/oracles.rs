//! Brute-force reference computations for validating the matrix-free code.
//!
//! Everything here is deliberately naive: dense matrices, explicit column
//! assembly, and a cyclic Jacobi eigensolver that shares no code with the
//! conjugate-gradient and power-iteration paths it is used to check. Sizes
//! are guarded by [`DENSE_DIM_LIMIT`].

use crate::error::{Error, Result};
use crate::metric::{LinearOperator, ReferenceMap, ReferenceMetric};

/// Largest dimension for dense assembly.
pub const DENSE_DIM_LIMIT: usize = 200;

/// Relative singular-value cutoff for pseudo-inverses.
pub const PINV_CUTOFF: f64 = 1e-12;

fn guard(size: usize) -> Result<()> {
    if size > DENSE_DIM_LIMIT {
        return Err(Error::GuardExceeded {
            size,
            limit: DENSE_DIM_LIMIT,
        });
    }
    Ok(())
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (j, c) in columns.iter().enumerate() {
            for (i, v) in c.iter().enumerate() {
                m.data[i * m.cols + j] = *v;
            }
        }
        m
    }

    /// Columns `op(e_j)`.
    pub fn from_operator(op: &dyn LinearOperator) -> Result<Self> {
        let n = op.dim();
        guard(n)?;
        let cols: Vec<Vec<f64>> = (0..n).map(|j| op.apply(&unit(n, j))).collect();
        Ok(Self::from_columns(n, &cols))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.get(i, j);
            }
        }
        t
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "matvec dimension");
        (0..self.rows)
            .map(|i| {
                self.data[i * self.cols..(i + 1) * self.cols]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn matmul(&self, o: &Self) -> Self {
        assert_eq!(self.cols, o.rows, "matmul dimension");
        let mut out = Self::zeros(self.rows, o.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..o.cols {
                    out.data[i * o.cols + j] += a * o.get(k, j);
                }
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest `|A_ij − A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows.min(self.cols) {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, o: &Self) -> f64 {
        self.data
            .iter()
            .zip(&o.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn unit(n: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = 1.0;
    e
}

/// Central differences `(L(x+h·e_i) − L(x−h·e_i)) / 2h`.
pub fn finite_difference_gradient<F>(cost: F, x: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    let mut xp = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        xp[i] = x[i] + h;
        let plus = cost(&xp)?;
        xp[i] = x[i] - h;
        let minus = cost(&xp)?;
        xp[i] = x[i];
        let g = (plus - minus) / (2.0 * h);
        if !g.is_finite() {
            return Err(Error::NonFinite("finite-difference evaluation"));
        }
        out.push(g);
    }
    Ok(out)
}

/// Jacobian of a reference map, one `jvp` per column.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseJacobian {
    pub matrix: DenseMatrix,
}

impl DenseJacobian {
    pub fn assemble<M: ReferenceMap + ?Sized>(map: &M, x: &[f64]) -> Result<Self> {
        let n = map.dim_x();
        guard(n)?;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let cols: Vec<Vec<f64>> = (0..n).map(|j| map.jvp(x, &unit(n, j))).collect();
        Ok(Self {
            matrix: DenseMatrix::from_columns(map.dim_y(), &cols),
        })
    }

    /// Central-difference Jacobian of `map.eval`, for checking the `jvp`.
    pub fn finite_difference<M: ReferenceMap + ?Sized>(map: &M, x: &[f64], h: f64) -> Result<Self> {
        let n = map.dim_x();
        guard(n)?;
        let mut xp = x.to_vec();
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            xp[j] = x[j] + h;
            let plus = map.eval(&xp);
            xp[j] = x[j] - h;
            let minus = map.eval(&xp);
            xp[j] = x[j];
            cols.push(plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect());
        }
        Ok(Self {
            matrix: DenseMatrix::from_columns(map.dim_y(), &cols),
        })
    }
}

/// `G_Y(y)` assembled column by column.
pub fn assemble_reference_metric<G: ReferenceMetric + ?Sized>(
    metric: &G,
    y: &[f64],
) -> Result<DenseMatrix> {
    let m = y.len();
    guard(m)?;
    let cols: Vec<Vec<f64>> = (0..m).map(|j| metric.apply(y, &unit(m, j))).collect();
    Ok(DenseMatrix::from_columns(m, &cols))
}

/// `Jᵀ G_Y J` assembled literally.
pub fn assemble_dense_metric<M, G>(map: &M, ref_metric: &G, x: &[f64]) -> Result<DenseMatrix>
where
    M: ReferenceMap + ?Sized,
    G: ReferenceMetric + ?Sized,
{
    let j = DenseJacobian::assemble(map, x)?.matrix;
    let y = map.eval(x);
    let gy = assemble_reference_metric(ref_metric, &y)?;
    Ok(j.transpose().matmul(&gy.matmul(&j)))
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: DenseMatrix,
}

impl SymmetricEigen {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        (0..self.vectors.rows).map(|r| self.vectors.get(r, i)).collect()
    }
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal norm is `≤ 1e−12·‖A‖_F`.
pub fn dense_symmetric_eigensolve(a: &DenseMatrix) -> Result<SymmetricEigen> {
    let n = a.rows;
    if a.cols != n {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if n > 2000 {
        return Err(Error::GuardExceeded { size: n, limit: 2000 });
    }
    let scale = a.frobenius_norm();
    if a.max_asymmetry() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidArgument("matrix is not symmetric".into()));
    }
    let mut m = a.clone();
    let mut v = DenseMatrix::identity(n);
    let tol = 1e-12 * scale;
    let off = |m: &DenseMatrix| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&m) > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::EigenNotConverged {
                iterations: sweeps,
                residual: off(&m),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = m.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let theta = (m.get(q, q) - m.get(p, p)) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkq = m.get(k, q);
                    m.data[k * n + p] = c * mkp - s * mkq;
                    m.data[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mqk = m.get(q, k);
                    m.data[p * n + k] = c * mpk - s * mqk;
                    m.data[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.data[k * n + p] = c * vkp - s * vkq;
                    v.data[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).total_cmp(&m.get(j, j)));
    let values = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vectors = DenseMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for r in 0..n {
            vectors.data[r * n + new] = v.get(r, old);
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Pseudo-inverse of a symmetric matrix, dropping eigenvalues below
/// `1e−12·max|λ|`. Also returns the retained rank.
pub fn symmetric_pseudo_inverse(a: &DenseMatrix) -> Result<(DenseMatrix, usize)> {
    let eig = dense_symmetric_eigensolve(a)?;
    let n = a.rows;
    let cutoff = PINV_CUTOFF * eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut out = DenseMatrix::zeros(n, n);
    let mut rank = 0;
    for (k, &lam) in eig.values.iter().enumerate() {
        if lam.abs() <= cutoff {
            continue;
        }
        rank += 1;
        let vk = eig.vector(k);
        for i in 0..n {
            for j in 0..n {
                out.data[i * n + j] += vk[i] * vk[j] / lam;
            }
        }
    }
    Ok((out, rank))
}

/// `P = J (JᵀG_YJ)⁺ JᵀG_Y`, the `G_Y`-orthogonal projector onto `range(J)`.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    pub matrix: DenseMatrix,
}

impl ProjectionOperator {
    pub fn new(jacobian: &DenseMatrix, g_y: &DenseMatrix) -> Result<Self> {
        let jt = jacobian.transpose();
        let gx = jt.matmul(&g_y.matmul(jacobian));
        let (gx_pinv, rank) = symmetric_pseudo_inverse(&gx)?;
        let (_, j_rank) = symmetric_pseudo_inverse(&jt.matmul(jacobian))?;
        if rank < j_rank {
            return Err(Error::RankDeficient(format!(
                "P G_Y P restricted to range(J) has rank {rank} < rank(J) = {j_rank}"
            )));
        }
        Ok(Self {
            matrix: jacobian.matmul(&gx_pinv.matmul(&jt.matmul(g_y))),
        })
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }
}

/// Outcome of [`projection_identity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionReport {
    /// `‖dy·‖Pd̃y‖ + Pd̃y·‖dy‖‖ / (‖dy‖‖Pd̃y‖)`; zero when `dy` is a positive
    /// multiple of `−Pd̃y`.
    pub defect: f64,
    /// `max|Jᵀ∂_yL̄ − grad_x|`, confirming the supplied reference gradient.
    pub chain_rule_residual: f64,
    pub dy_norm: f64,
    pub projected_norm: f64,
}

/// Checks that the pulled-back natural step, pushed forward to the reference
/// space, is the `G_Y`-orthogonal projection of the reference natural step:
/// `J·dx ∝ −P·G_Y⁻¹∂_yL̄` with a positive factor.
pub fn projection_identity_check<M, G>(
    map: &M,
    ref_metric: &G,
    x: &[f64],
    grad_x: &[f64],
    ref_grad: &[f64],
) -> Result<ProjectionReport>
where
    M: ReferenceMap + ?Sized,
    G: ReferenceMetric + ?Sized,
{
    let y = map.eval(x);
    guard(y.len())?;
    if ref_grad.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            got: ref_grad.len(),
        });
    }
    let j = DenseJacobian::assemble(map, x)?.matrix;
    let gy = assemble_reference_metric(ref_metric, &y)?;
    let jt = j.transpose();

    let pulled = jt.matvec(ref_grad);
    let chain_rule_residual = pulled
        .iter()
        .zip(grad_x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let gx = jt.matmul(&gy.matmul(&j));
    let (gx_pinv, _) = symmetric_pseudo_inverse(&gx)?;
    let dx: Vec<f64> = gx_pinv.matvec(grad_x).iter().map(|v| -v).collect();
    let dy = j.matvec(&dx);

    let (gy_inv, gy_rank) = symmetric_pseudo_inverse(&gy)?;
    if gy_rank < y.len() {
        return Err(Error::RankDeficient(format!(
            "reference metric has rank {gy_rank} < {}",
            y.len()
        )));
    }
    let natural_y = gy_inv.matvec(ref_grad);
    let p = ProjectionOperator::new(&j, &gy)?;
    let pd = p.apply(&natural_y);

    let dy_norm = crate::linalg::norm(&dy);
    let projected_norm = crate::linalg::norm(&pd);
    if dy_norm == 0.0 || projected_norm == 0.0 {
        return Err(Error::InvalidArgument(
            "stationary point: both directions vanish".into(),
        ));
    }
    let sum: Vec<f64> = dy
        .iter()
        .zip(&pd)
        .map(|(a, b)| a * projected_norm + b * dy_norm)
        .collect();
    Ok(ProjectionReport {
        defect: crate::linalg::norm(&sum) / (dy_norm * projected_norm),
        chain_rule_residual,
        dy_norm,
        projected_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_small_cases() {
        let d = DenseMatrix::from_row_major(3, 3, vec![3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(dense_symmetric_eigensolve(&d).unwrap().values, vec![1.0, 2.0, 3.0]);
        let x = DenseMatrix::from_row_major(2, 2, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        let e = dense_symmetric_eigensolve(&x).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn finite_difference_cubic() {
        let g = finite_difference_gradient(|x| Ok(x[0].powi(3)), &[1.0], 1e-5).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-9);
        assert!(finite_difference_gradient(|x| Ok(x[0]), &[1.0], 0.0).is_err());
    }

    #[test]
    fn guard_applies() {
        let op = crate::metric::MetricOperator::identity(DENSE_DIM_LIMIT + 1);
        assert!(matches!(
            DenseMatrix::from_operator(&op),
            Err(Error::GuardExceeded { .. })
        ));
    }
}
