use std::fmt::Write as _;

use super::dense;
use super::density::symmetrize;
use crate::error::{Error, Result};
use crate::rng;

/// One real 4×4 matrix per bond, row-major over `(s_k, s_{k+1}) ↦ 2s_k + s_{k+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct RDMSet {
    matrices: Vec<[f64; 16]>,
}

impl RDMSet {
    pub fn new(matrices: Vec<[f64; 16]>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidArgument("at least one bond is required".into()));
        }
        if matrices.iter().any(|m| !crate::linalg::all_finite(m)) {
            return Err(Error::NonFinite("density matrix"));
        }
        Ok(Self { matrices })
    }

    pub fn matrices(&self) -> &[[f64; 16]] {
        &self.matrices
    }

    pub fn bonds(&self) -> usize {
        self.matrices.len()
    }

    pub fn bond(&self, k: usize) -> &[f64; 16] {
        &self.matrices[k]
    }

    pub fn trace(&self, k: usize) -> f64 {
        (0..4).map(|i| self.matrices[k][i * 5]).sum()
    }

    /// Largest `|M_ij − M_ji|` over all bonds.
    pub fn max_asymmetry(&self) -> f64 {
        self.matrices
            .iter()
            .flat_map(|m| (0..4).flat_map(move |i| (0..4).map(move |j| (m[i * 4 + j] - m[j * 4 + i]).abs())))
            .fold(0.0, f64::max)
    }
}

/// Measured density matrices `D̃_k` together with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetData {
    pub targets: RDMSet,
    pub noise_amplitude: f64,
    pub source_seed: u64,
}

impl TargetData {
    /// Number of sites the targets describe.
    pub fn length(&self) -> usize {
        self.targets.bonds() + 1
    }

    /// Line 1 `L noise seed`, then one line of 16 reals per bond.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {:?} {}\n", self.length(), self.noise_amplitude, self.source_seed);
        for m in self.targets.matrices() {
            let line: Vec<String> = m.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what}")))
        };
        let length: usize = next("length")?
            .parse()
            .map_err(|e| Error::Parse(format!("length: {e}")))?;
        let noise_amplitude: f64 = next("noise amplitude")?
            .parse()
            .map_err(|e| Error::Parse(format!("noise amplitude: {e}")))?;
        let source_seed: u64 = next("seed")?
            .parse()
            .map_err(|e| Error::Parse(format!("seed: {e}")))?;
        if length < 2 {
            return Err(Error::Parse(format!("length {length} has no bonds")));
        }
        let mut matrices = Vec::with_capacity(length - 1);
        for k in 0..length - 1 {
            let mut m = [0.0; 16];
            for v in &mut m {
                *v = next(&format!("entry of bond {k}"))?
                    .parse()
                    .map_err(|e| Error::Parse(format!("bond {k}: {e}")))?;
            }
            matrices.push(m);
        }
        if tokens.next().is_some() {
            return Err(Error::Parse("trailing data after the last bond".into()));
        }
        Ok(Self {
            targets: RDMSet::new(matrices)?,
            noise_amplitude,
            source_seed,
        })
    }
}

/// Convergence threshold on `‖Hψ − Eψ‖` for the target ground state.
pub const GROUND_STATE_TOL: f64 = 1e-10;
const GROUND_STATE_MAX_ITERS: usize = 200_000;

/// Exact two-site density matrices of the open Heisenberg chain's ground state.
pub fn heisenberg_ground_state_rdms(length: usize, seed: u64) -> Result<RDMSet> {
    let (psi, _) = dense::heisenberg_ground_state(length, seed, GROUND_STATE_TOL, GROUND_STATE_MAX_ITERS)?;
    RDMSet::new((0..length - 1).map(|k| dense::rdm(&psi, &psi, length, k)).collect())
}

/// Ground-state densities with i.i.d. uniform `(−a, a)` noise on every entry,
/// symmetrized afterwards. Traces are left as they fall.
pub fn generate_target_data(length: usize, noise_amplitude: f64, seed: u64) -> Result<TargetData> {
    if !(noise_amplitude >= 0.0) || !noise_amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise amplitude must be finite and non-negative, got {noise_amplitude}"
        )));
    }
    let exact = heisenberg_ground_state_rdms(length, seed)?;
    let mut r = rng::seeded(seed.wrapping_add(1));
    let matrices = exact
        .matrices()
        .iter()
        .map(|m| {
            if noise_amplitude == 0.0 {
                return *m;
            }
            let noise = rng::uniform_vector(&mut r, 16, -noise_amplitude, noise_amplitude);
            let mut noisy = *m;
            noisy.iter_mut().zip(noise).for_each(|(a, b)| *a += b);
            symmetrize(&noisy)
        })
        .collect();
    Ok(TargetData {
        targets: RDMSet::new(matrices)?,
        noise_amplitude,
        source_seed: seed,
    })
}
