//! Chain geometry, positional disorder and the effective two-level Hamiltonian.
//!
//! Basis convention used by every module in this crate: qubit `q` (0-based,
//! i.e. spin `q + 1` in chain order) is bit `q` of a computational-basis index,
//! so spin 1 is the least significant bit. `|0⟩` is the `σᶻ = +1` state and
//! `|1⟩` the `σᶻ = −1` state.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectra::HamiltonianMatrix;

/// Smallest chain accepted by [`ChainSpec::validate`].
pub const MIN_SPINS: usize = 2;
/// Largest chain the dense pipeline supports (`2^12 = 4096` basis states).
pub const MAX_SPINS: usize = 12;
/// Ratio `J(d)/Ω` above which the manifold picture is considered unreliable.
pub const PERTURBATIVE_WARN_RATIO: f64 = 0.05;
/// Consecutive rejected draws after which disorder sampling gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: u32 = 1000;

/// Geometric and physical parameters of a chain.
///
/// Lengths are in nm, the Rabi frequency in MHz and the reference coupling in kHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub n_spins: usize,
    pub lattice_constant_nm: f64,
    pub spacing_multiple: u32,
    pub rabi_mhz: f64,
    pub coupling_ref_khz: f64,
    pub coupling_ref_distance_nm: f64,
    pub disorder_nm: f64,
    pub min_separation_nm: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            n_spins: 4,
            lattice_constant_nm: 0.3567,
            spacing_multiple: 28,
            rabi_mhz: 15.0,
            coupling_ref_khz: 70.0,
            coupling_ref_distance_nm: 10.0,
            disorder_nm: 0.0,
            min_separation_nm: 2.0,
        }
    }
}

impl ChainSpec {
    /// Default parameters for a chain of `n_spins` without disorder.
    pub fn new(n_spins: usize) -> Self {
        ChainSpec {
            n_spins,
            ..Default::default()
        }
    }

    pub fn with_disorder(mut self, sigma_nm: f64) -> Self {
        self.disorder_nm = sigma_nm;
        self
    }

    /// Regular spacing `d = spacing_multiple · a` in nm.
    pub fn spacing_nm(&self) -> f64 {
        self.spacing_multiple as f64 * self.lattice_constant_nm
    }

    pub fn validate(&self) -> Result<()> {
        if !(MIN_SPINS..=MAX_SPINS).contains(&self.n_spins) {
            return Err(Error::Capacity {
                n: self.n_spins,
                min: MIN_SPINS,
                max: MAX_SPINS,
            });
        }
        let positive = [
            ("lattice_constant_nm", self.lattice_constant_nm),
            ("rabi_mhz", self.rabi_mhz),
            ("coupling_ref_khz", self.coupling_ref_khz),
            ("coupling_ref_distance_nm", self.coupling_ref_distance_nm),
            ("min_separation_nm", self.min_separation_nm),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter {
                    key,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if self.spacing_multiple == 0 {
            return Err(Error::InvalidParameter {
                key: "spacing_multiple",
                reason: "must be > 0".into(),
            });
        }
        if !(self.disorder_nm.is_finite() && self.disorder_nm >= 0.0) {
            return Err(Error::InvalidParameter {
                key: "disorder_nm",
                reason: format!("must be finite and >= 0, got {}", self.disorder_nm),
            });
        }
        Ok(())
    }

    /// Dipolar coupling in MHz at separation `r_nm`: `J_ref · (r_ref / r)³`.
    pub fn coupling(&self, r_nm: f64) -> Result<f64> {
        if !(r_nm.is_finite() && r_nm > 0.0) {
            return Err(Error::domain(format!(
                "coupling distance must be finite and > 0, got {r_nm} nm"
            )));
        }
        let ratio = self.coupling_ref_distance_nm / r_nm;
        Ok(self.coupling_ref_khz * 1e-3 * ratio * ratio * ratio)
    }

    /// `J(d)/Ω` for the regular spacing.
    pub fn perturbative_ratio(&self) -> f64 {
        // spacing is validated positive whenever this matters
        self.coupling(self.spacing_nm()).unwrap_or(f64::INFINITY) / self.rabi_mhz
    }

    /// Human-readable warnings about parameter regimes that are legal but suspect.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        let ratio = self.perturbative_ratio();
        if ratio > PERTURBATIVE_WARN_RATIO {
            out.push(format!(
                "J(d)/Omega = {ratio:.4} exceeds {PERTURBATIVE_WARN_RATIO}; \
                 excitation manifolds may not be separated"
            ));
        }
        out
    }
}

/// Concrete spin positions and the resulting pairwise couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRealization {
    positions_nm: Vec<f64>,
    couplings_mhz: DMatrix<f64>,
    rejections: u32,
}

impl ChainRealization {
    /// Builds a realization from explicit positions, checking ordering and minimum gap.
    pub fn from_positions(positions_nm: Vec<f64>, spec: &ChainSpec) -> Result<Self> {
        if positions_nm.is_empty() || positions_nm.len() > MAX_SPINS {
            return Err(Error::Capacity {
                n: positions_nm.len(),
                min: 1,
                max: MAX_SPINS,
            });
        }
        if let Some(w) = positions_nm
            .windows(2)
            .find(|w| !(w[1] - w[0] >= spec.min_separation_nm))
        {
            return Err(Error::domain(format!(
                "positions {} and {} nm violate ordering or min separation {} nm",
                w[0], w[1], spec.min_separation_nm
            )));
        }
        let n = positions_nm.len();
        let mut couplings = DMatrix::zeros(n, n);
        for j in 0..n {
            for k in (j + 1)..n {
                let jk = spec.coupling((positions_nm[k] - positions_nm[j]).abs())?;
                couplings[(j, k)] = jk;
                couplings[(k, j)] = jk;
            }
        }
        Ok(ChainRealization {
            positions_nm,
            couplings_mhz: couplings,
            rejections: 0,
        })
    }

    /// The regularly spaced chain `r_j = j · d`, `j = 1..=N`.
    pub fn regular(spec: &ChainSpec) -> Result<Self> {
        let d = spec.spacing_nm();
        Self::from_positions((1..=spec.n_spins).map(|j| j as f64 * d).collect(), spec)
    }

    pub fn n_spins(&self) -> usize {
        self.positions_nm.len()
    }

    pub fn positions_nm(&self) -> &[f64] {
        &self.positions_nm
    }

    /// Symmetric coupling matrix in MHz with zero diagonal.
    pub fn couplings_mhz(&self) -> &DMatrix<f64> {
        &self.couplings_mhz
    }

    /// Number of whole-chain draws discarded before this one was accepted.
    pub fn rejections(&self) -> u32 {
        self.rejections
    }
}

/// Draws a disordered chain: each `r_j ~ Normal(j·d, σ_p²)` independently.
///
/// Draws that reorder the spins or bring two of them closer than
/// `min_separation_nm` are discarded as a whole and redrawn. With `σ_p = 0`
/// the regular chain is returned without consuming randomness.
pub fn sample_positions<R: Rng + ?Sized>(
    spec: &ChainSpec,
    rng: &mut R,
) -> Result<ChainRealization> {
    spec.validate()?;
    if spec.disorder_nm == 0.0 {
        return ChainRealization::regular(spec);
    }
    let d = spec.spacing_nm();
    let noise = Normal::new(0.0, spec.disorder_nm)
        .map_err(|e| Error::domain(format!("disorder width: {e}")))?;
    let mut positions = vec![0.0; spec.n_spins];
    let mut rejections = 0u32;
    loop {
        for (j, r) in positions.iter_mut().enumerate() {
            *r = (j + 1) as f64 * d + noise.sample(rng);
        }
        let valid = positions
            .windows(2)
            .all(|w| w[1] - w[0] >= spec.min_separation_nm);
        if valid {
            let mut real = ChainRealization::from_positions(positions, spec)?;
            real.rejections = rejections;
            return Ok(real);
        }
        rejections += 1;
        if rejections >= MAX_CONSECUTIVE_REJECTIONS {
            return Err(Error::RejectionLimit {
                attempts: rejections,
                sigma_nm: spec.disorder_nm,
                min_separation_nm: spec.min_separation_nm,
            });
        }
    }
}

/// Assembles `H = Σ_j (Ω/2) σˣ_j − Σ_{j<k} (J_jk/2)(σᶻ_j − 𝟙)(σᶻ_k − 𝟙)` in MHz.
///
/// Locally `σᶻ − 𝟙 = diag(0, −2)`, so each pair contributes `−2 J_jk` to the
/// diagonal entries whose index has both bits `j` and `k` set.
pub fn build_hamiltonian(real: &ChainRealization, spec: &ChainSpec) -> Result<HamiltonianMatrix> {
    let n = real.n_spins();
    if !(1..=MAX_SPINS).contains(&n) {
        return Err(Error::Capacity {
            n,
            min: 1,
            max: MAX_SPINS,
        });
    }
    let dim = 1usize << n;
    let half_rabi = 0.5 * spec.rabi_mhz;
    let couplings = real.couplings_mhz();
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for index in 0..dim {
        let mut diag = 0.0;
        for j in 0..n {
            if index >> j & 1 == 0 {
                continue;
            }
            for k in (j + 1)..n {
                if index >> k & 1 == 1 {
                    diag -= 2.0 * couplings[(j, k)];
                }
            }
        }
        h[(index, index)] = diag;
        for q in 0..n {
            h[(index, index ^ (1 << q))] = half_rabi;
        }
    }
    HamiltonianMatrix::new(n, h)
}
