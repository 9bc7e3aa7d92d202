//! Classical Heisenberg antiferromagnet on a square lattice.
//!
//! Parameters are unnormalized spins `S_i ∈ ℝ³`; the cost only depends on
//! the unit spins `Ŝ_i = S_i/|S_i|`:
//!
//! `L(S) = (1/N) Σ_⟨ij⟩ Ŝ_i · Ŝ_j`
//!
//! The reference space holds the unit spins, where the cost is the quadratic
//! form `(1/N) Σ Y_i·Y_j` with a constant Hessian (the scaled adjacency
//! matrix acting on each Cartesian component).

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot};
use crate::metric::{
    estimate_min_eigenvalue, hessian_reference, pullback_metric, HessianRegularization,
    MetricOperator, ReferenceMap,
};
use crate::optim::{IdentityBuilder, MetricBuilder, MetricId, MetricSettings, Problem};
use crate::rng;

/// Site connectivity of a `width × height` square lattice.
///
/// Each site is bonded to its right and lower neighbor; with periodic
/// boundaries these wrap, giving `2N` bonds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeGeometry {
    width: usize,
    height: usize,
    periodic: bool,
    bonds: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl LatticeGeometry {
    pub fn new(width: usize, height: usize, periodic: bool) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("lattice dimensions must be positive".into()));
        }
        if periodic && (width < 2 || height < 2) {
            return Err(Error::InvalidArgument(
                "periodic lattices need at least two sites along each axis".into(),
            ));
        }
        let n = width * height;
        let mut bonds = Vec::with_capacity(2 * n);
        for iy in 0..height {
            for ix in 0..width {
                let i = iy * width + ix;
                if ix + 1 < width {
                    bonds.push((i, i + 1));
                } else if periodic {
                    bonds.push((i, iy * width));
                }
                if iy + 1 < height {
                    bonds.push((i, i + width));
                } else if periodic {
                    bonds.push((i, ix));
                }
            }
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &bonds {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        Ok(Self {
            width,
            height,
            periodic,
            bonds,
            neighbors,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn periodic(&self) -> bool {
        self.periodic
    }

    pub fn sites(&self) -> usize {
        self.width * self.height
    }

    pub fn bonds(&self) -> &[(usize, usize)] {
        &self.bonds
    }

    /// Bipartite lattices have an exactly known minimum: every bond antiparallel.
    pub fn is_bipartite(&self) -> bool {
        !self.periodic || (self.width.is_multiple_of(2) && self.height.is_multiple_of(2))
    }

    /// Exact minimum of the cost when the lattice is bipartite (Néel energy).
    pub fn ground_state_energy(&self) -> Option<f64> {
        self.is_bipartite()
            .then(|| -(self.bonds.len() as f64) / self.sites() as f64)
    }

    /// `(1/N) Σ_{j ∈ nbr(i)} u_j` per site and Cartesian component.
    pub fn scaled_adjacency(&self, u: &[f64]) -> Vec<f64> {
        let inv_n = 1.0 / self.sites() as f64;
        let mut out = vec![0.0; u.len()];
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            let o = &mut out[3 * i..3 * i + 3];
            for &j in nbrs {
                for a in 0..3 {
                    o[a] += inv_n * u[3 * j + a];
                }
            }
        }
        out
    }
}

/// Spin configuration on a lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLattice {
    geometry: LatticeGeometry,
    spins: Vec<f64>,
}

impl SpinLattice {
    pub fn new(geometry: LatticeGeometry, spins: Vec<f64>) -> Result<Self> {
        check_spins(&geometry, &spins)?;
        Ok(Self { geometry, spins })
    }

    /// I.i.d. standard normal 3-vectors, redrawing any with `|S| < 1e-8`.
    pub fn random(geometry: LatticeGeometry, seed: u64) -> Self {
        let mut r = rng::seeded(seed);
        let mut spins = Vec::with_capacity(3 * geometry.sites());
        for _ in 0..geometry.sites() {
            loop {
                let s = rng::normal_vector(&mut r, 3);
                if dot(&s, &s).sqrt() >= 1e-8 {
                    spins.extend_from_slice(&s);
                    break;
                }
            }
        }
        Self { geometry, spins }
    }

    /// Staggered configuration `S_i = (0, 0, (−1)^(ix+iy))`.
    pub fn neel(geometry: LatticeGeometry) -> Self {
        let mut spins = vec![0.0; 3 * geometry.sites()];
        for iy in 0..geometry.height {
            for ix in 0..geometry.width {
                let i = iy * geometry.width + ix;
                spins[3 * i + 2] = if (ix + iy) % 2 == 0 { 1.0 } else { -1.0 };
            }
        }
        Self { geometry, spins }
    }

    pub fn geometry(&self) -> &LatticeGeometry {
        &self.geometry
    }

    pub fn spins(&self) -> &[f64] {
        &self.spins
    }

    pub fn into_spins(self) -> Vec<f64> {
        self.spins
    }

    /// One line per site: `ix iy Sx Sy Sz`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for iy in 0..self.geometry.height {
            for ix in 0..self.geometry.width {
                let s = &self.spins[3 * (iy * self.geometry.width + ix)..][..3];
                let _ = writeln!(out, "{ix} {iy} {:?} {:?} {:?}", s[0], s[1], s[2]);
            }
        }
        out
    }

    /// Reads a dump; the lattice extent is inferred from the largest indices.
    pub fn parse_dump(text: &str, periodic: bool) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if fields.len() != 5 {
                return Err(Error::Parse(format!("line {}: expected 5 fields", lineno + 1)));
            }
            let idx = |k: usize| {
                fields[k]
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let val = |k: usize| {
                fields[k]
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            rows.push((idx(0)?, idx(1)?, [val(2)?, val(3)?, val(4)?]));
        }
        let width = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let height = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
        let geometry = LatticeGeometry::new(width, height, periodic)?;
        if rows.len() != geometry.sites() {
            return Err(Error::Parse(format!(
                "{} sites listed for a {width}x{height} lattice",
                rows.len()
            )));
        }
        let mut spins = vec![f64::NAN; 3 * geometry.sites()];
        for (ix, iy, s) in rows {
            spins[3 * (iy * width + ix)..][..3].copy_from_slice(&s);
        }
        Self::new(geometry, spins)
    }
}

fn check_spins(geometry: &LatticeGeometry, spins: &[f64]) -> Result<()> {
    if spins.len() != 3 * geometry.sites() {
        return Err(Error::DimensionMismatch {
            expected: 3 * geometry.sites(),
            got: spins.len(),
        });
    }
    if !crate::linalg::all_finite(spins) {
        return Err(Error::NonFinite("spins"));
    }
    if let Some(i) = spins.chunks_exact(3).position(|s| dot(s, s) == 0.0) {
        return Err(Error::InvalidArgument(format!("spin {i} has zero length")));
    }
    Ok(())
}

fn unit_spins(spins: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut unit = Vec::with_capacity(spins.len());
    let mut lengths = Vec::with_capacity(spins.len() / 3);
    for s in spins.chunks_exact(3) {
        let len = dot(s, s).sqrt();
        lengths.push(len);
        unit.extend(s.iter().map(|v| v / len));
    }
    (unit, lengths)
}

fn cost_of(geometry: &LatticeGeometry, spins: &[f64]) -> Result<f64> {
    check_spins(geometry, spins)?;
    let (unit, _) = unit_spins(spins);
    let sum: f64 = geometry
        .bonds
        .iter()
        .map(|&(i, j)| dot(&unit[3 * i..3 * i + 3], &unit[3 * j..3 * j + 3]))
        .sum();
    Ok(sum / geometry.sites() as f64)
}

fn gradient_of(geometry: &LatticeGeometry, spins: &[f64]) -> Result<Vec<f64>> {
    check_spins(geometry, spins)?;
    let (unit, lengths) = unit_spins(spins);
    let inv_n = 1.0 / geometry.sites() as f64;
    let mut grad = vec![0.0; spins.len()];
    for (i, nbrs) in geometry.neighbors.iter().enumerate() {
        let mut field = [0.0; 3];
        for &j in nbrs {
            for a in 0..3 {
                field[a] += unit[3 * j + a];
            }
        }
        let s = &unit[3 * i..3 * i + 3];
        let parallel = dot(s, &field);
        let c = inv_n / lengths[i];
        for a in 0..3 {
            grad[3 * i + a] = c * (field[a] - s[a] * parallel);
        }
    }
    Ok(grad)
}

pub fn spin_cost(lattice: &SpinLattice) -> Result<f64> {
    cost_of(&lattice.geometry, &lattice.spins)
}

/// `∂L/∂S_i = (1/(N|S_i|)) (I − Ŝ_iŜ_iᵀ) Σ_{j∈nbr(i)} Ŝ_j`
pub fn spin_gradient(lattice: &SpinLattice) -> Result<Vec<f64>> {
    gradient_of(&lattice.geometry, &lattice.spins)
}

/// Regularized reference Hessian: `(1/N) A u + ε u`.
pub fn spin_hessian_reference_apply(
    geometry: &LatticeGeometry,
    reg: &HessianRegularization,
    u: &[f64],
) -> Vec<f64> {
    let mut out = geometry.scaled_adjacency(u);
    axpy(reg.epsilon, u, &mut out);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsilonSource {
    /// `ε_H = −4/N` for periodic lattices with even extents.
    Analytic,
    PowerIteration,
}

/// Shift for the reference Hessian, with where its estimate came from.
pub fn spin_regularization(
    geometry: &LatticeGeometry,
    power_iters: usize,
    seed: u64,
) -> Result<(HessianRegularization, EpsilonSource)> {
    if geometry.periodic && geometry.is_bipartite() {
        let eh = -4.0 / geometry.sites() as f64;
        return Ok((
            HessianRegularization::from_estimate(eh, power_iters),
            EpsilonSource::Analytic,
        ));
    }
    let eh = estimate_min_eigenvalue(
        |u| geometry.scaled_adjacency(u),
        3 * geometry.sites(),
        power_iters,
        seed,
    )?;
    Ok((
        HessianRegularization::from_estimate(eh, power_iters),
        EpsilonSource::PowerIteration,
    ))
}

/// Per-site normalization `Ŷ_i = S_i/|S_i|`.
#[derive(Debug, Clone, Copy)]
pub struct SpinNormalizationMap {
    pub sites: usize,
}

impl SpinNormalizationMap {
    fn project(x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        for (s, vi) in x.chunks_exact(3).zip(v.chunks_exact(3)) {
            let len = dot(s, s).sqrt();
            let along = dot(s, vi) / (len * len);
            out.extend((0..3).map(|a| (vi[a] - s[a] * along) / len));
        }
        out
    }
}

impl ReferenceMap for SpinNormalizationMap {
    fn dim_x(&self) -> usize {
        3 * self.sites
    }
    fn dim_y(&self) -> usize {
        3 * self.sites
    }
    fn eval(&self, x: &[f64]) -> Vec<f64> {
        unit_spins(x).0
    }
    fn jvp(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        Self::project(x, v)
    }
    fn vjp(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        Self::project(x, w)
    }
}

/// `v ↦ Jᵀ(A/N + εI)J v`, O(N) per application.
pub fn spin_pullback_metric<'a>(
    lattice: &SpinLattice,
    geometry: &'a LatticeGeometry,
    reg: HessianRegularization,
) -> Result<MetricOperator<'a>> {
    check_spins(geometry, &lattice.spins)?;
    let reference = hessian_reference(
        move |_y: &[f64], u: &[f64]| geometry.scaled_adjacency(u),
        reg,
    );
    pullback_metric(
        SpinNormalizationMap {
            sites: geometry.sites(),
        },
        reference,
        &lattice.spins,
        0.0,
    )
}

/// The Heisenberg cost over flat spin vectors.
#[derive(Debug, Clone)]
pub struct SpinProblem {
    pub geometry: LatticeGeometry,
}

impl SpinProblem {
    pub fn new(geometry: LatticeGeometry) -> Self {
        Self { geometry }
    }

    pub fn initial_point(&self, seed: u64) -> Vec<f64> {
        SpinLattice::random(self.geometry.clone(), seed).into_spins()
    }

    /// Gradient of the reference cost: `(A/N) Y`.
    pub fn reference_gradient(&self, y: &[f64]) -> Vec<f64> {
        self.geometry.scaled_adjacency(y)
    }
}

struct PullbackBuilder<'a> {
    geometry: &'a LatticeGeometry,
    reg: HessianRegularization,
    source: EpsilonSource,
    settings: MetricSettings,
    seed: u64,
}

impl MetricBuilder for PullbackBuilder<'_> {
    fn metric_at(&self, x: &[f64]) -> Result<MetricOperator<'_>> {
        let lattice = SpinLattice::new(self.geometry.clone(), x.to_vec())?;
        let op = spin_pullback_metric(&lattice, self.geometry, self.reg)?;
        Ok(self.settings.apply_ridge(op, self.seed))
    }

    fn settings(&self) -> Vec<(String, f64)> {
        vec![
            ("epsilon".into(), self.reg.epsilon),
            ("epsilon_h_estimate".into(), self.reg.epsilon_h_estimate),
            (
                "epsilon_h_analytic".into(),
                f64::from(u8::from(self.source == EpsilonSource::Analytic)),
            ),
        ]
    }
}

impl Problem for SpinProblem {
    fn dim(&self) -> usize {
        3 * self.geometry.sites()
    }

    fn cost(&self, x: &[f64]) -> Result<f64> {
        cost_of(&self.geometry, x)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        gradient_of(&self.geometry, x)
    }

    fn supported_metrics(&self) -> Vec<MetricId> {
        vec![MetricId::Identity, MetricId::SpinPullback]
    }

    fn metric_builder(
        &self,
        id: MetricId,
        _x0: &[f64],
        settings: &MetricSettings,
        seed: u64,
    ) -> Result<Box<dyn MetricBuilder + '_>> {
        match id {
            MetricId::Identity => Ok(Box::new(IdentityBuilder(self.dim()))),
            MetricId::SpinPullback => {
                let (reg, source) = spin_regularization(&self.geometry, settings.power_iters, seed)?;
                Ok(Box::new(PullbackBuilder {
                    geometry: &self.geometry,
                    reg,
                    source,
                    settings: *settings,
                    seed,
                }))
            }
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::metric::LinearOperator;

    #[test]
    fn single_antiparallel_bond() {
        let g = LatticeGeometry::new(2, 1, false).unwrap();
        let l = SpinLattice::new(g, vec![1.0, 0.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(spin_cost(&l).unwrap(), -0.5);
    }

    #[test]
    fn aligned_and_neel_energies() {
        for (w, h) in [(4, 4), (6, 2), (8, 4)] {
            let g = LatticeGeometry::new(w, h, true).unwrap();
            assert_eq!(g.bonds().len(), 2 * w * h);
            let aligned = SpinLattice::new(g.clone(), [0.3, -0.2, 1.0].repeat(w * h)).unwrap();
            assert!((spin_cost(&aligned).unwrap() - 2.0).abs() < 1e-12);
            let neel = SpinLattice::neel(g.clone());
            assert!((spin_cost(&neel).unwrap() + 2.0).abs() < 1e-12);
            assert_eq!(g.ground_state_energy(), Some(-2.0));
            assert!(spin_gradient(&neel).unwrap().iter().all(|v| v.abs() < 1e-15));
        }
        assert_eq!(LatticeGeometry::new(3, 3, true).unwrap().ground_state_energy(), None);
    }

    #[test]
    fn rejects_zero_spin() {
        let g = LatticeGeometry::new(2, 1, false).unwrap();
        assert!(SpinLattice::new(g.clone(), vec![0.0; 6]).is_err());
        assert!(cost_of(&g, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(LatticeGeometry::new(1, 4, true).is_err());
    }

    #[test]
    fn per_site_scale_invariance() {
        let g = LatticeGeometry::new(4, 3, true).unwrap();
        let l = SpinLattice::random(g.clone(), 3);
        let c = spin_cost(&l).unwrap();
        let mut spins = l.spins().to_vec();
        for v in &mut spins[6..9] {
            *v *= 7.5;
        }
        let c2 = cost_of(&g, &spins).unwrap();
        assert!((c - c2).abs() <= 1e-12 * c.abs().max(1.0));
    }

    #[test]
    fn gradient_orthogonal_per_site() {
        let g = LatticeGeometry::new(5, 4, false).unwrap();
        let l = SpinLattice::random(g, 11);
        let grad = spin_gradient(&l).unwrap();
        for (gs, s) in grad.chunks_exact(3).zip(l.spins().chunks_exact(3)) {
            assert!(dot(gs, s).abs() <= 1e-14);
        }
    }

    #[test]
    fn adjacency_action_on_single_site() {
        let g = LatticeGeometry::new(3, 3, false).unwrap();
        let reg = HessianRegularization::from_estimate(-0.2, 100);
        let mut u = vec![0.0; 27];
        let centre = 4;
        u[3 * centre..3 * centre + 3].copy_from_slice(&[1.0, -2.0, 0.5]);
        let out = spin_hessian_reference_apply(&g, &reg, &u);
        for site in 0..9 {
            let expected: Vec<f64> = if site == centre {
                u[12..15].iter().map(|v| reg.epsilon * v).collect()
            } else if [1, 3, 5, 7].contains(&site) {
                u[12..15].iter().map(|v| v / 9.0).collect()
            } else {
                vec![0.0; 3]
            };
            assert!(max_abs_diff(&out[3 * site..3 * site + 3], &expected) < 1e-15);
        }
    }

    #[test]
    fn epsilon_paths() {
        let g = LatticeGeometry::new(4, 4, true).unwrap();
        let (reg, src) = spin_regularization(&g, 100, 1).unwrap();
        assert_eq!(src, EpsilonSource::Analytic);
        assert!((reg.epsilon - (4.0 / 16.0 + 0.1)).abs() < 1e-15);

        let g = LatticeGeometry::new(3, 3, false).unwrap();
        let (reg, src) = spin_regularization(&g, 300, 1).unwrap();
        assert_eq!(src, EpsilonSource::PowerIteration);
        // Open 3x3 adjacency: λ_min = −2√2 ⇒ ε_H = −2√2/9.
        let exact = -2.0 * 2f64.sqrt() / 9.0;
        assert!((reg.epsilon_h_estimate - exact).abs() <= 0.1 * exact.abs());
    }

    #[test]
    fn radial_vectors_hit_only_the_ridge() {
        let g = LatticeGeometry::new(3, 3, true).unwrap();
        let l = SpinLattice::random(g.clone(), 5);
        let (reg, _) = spin_regularization(&g, 100, 1).unwrap();
        let op = spin_pullback_metric(&l, &g, reg).unwrap().with_ridge(0.3);
        let v = l.spins().iter().map(|s| 2.0 * s).collect::<Vec<_>>();
        let expected: Vec<f64> = v.iter().map(|x| 0.3 * x).collect();
        assert!(max_abs_diff(&op.apply(&v), &expected) < 1e-13);
    }

    #[test]
    fn dump_round_trip() {
        let g = LatticeGeometry::new(3, 2, false).unwrap();
        let l = SpinLattice::random(g, 2);
        let back = SpinLattice::parse_dump(&l.dump(), false).unwrap();
        assert_eq!(back, l);
        assert!(SpinLattice::parse_dump("0 0 1 2", false).is_err());
    }
}
