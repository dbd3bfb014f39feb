//! Reduced density matrices, entropy of entanglement and Wootters concurrence.
//!
//! States are stored as complex amplitudes in the computational basis with
//! qubit `q` on bit `q`. Subsets of qubits are `u32` bitmasks. Entropies are in bits.

use nalgebra::{Complex, DMatrix, Matrix2, Matrix4, SymmetricEigen, Vector2};

use crate::bits::{self, deposit};
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Tolerance on `‖ψ‖₂ − 1` accepted by [`StateVector::new`].
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Schmidt probabilities below this value are dropped from the entropy sum.
pub const EIGENVALUE_CUTOFF: f64 = 1e-12;

/// Normalized pure state of `n_qubits` qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<C64>,
    real: bool,
}

impl StateVector {
    pub fn new(n_qubits: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 31 || amplitudes.len() != 1usize << n_qubits {
            return Err(Error::domain(format!(
                "state of {n_qubits} qubits needs 2^{n_qubits} amplitudes, got {}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::domain(format!("state norm {norm} is not 1")));
        }
        let real = amplitudes.iter().all(|a| a.im == 0.0);
        Ok(StateVector {
            n_qubits,
            amplitudes,
            real,
        })
    }

    pub fn from_real(n_qubits: usize, amplitudes: &[f64]) -> Result<Self> {
        Self::new(
            n_qubits,
            amplitudes.iter().map(|&a| C64::new(a, 0.0)).collect(),
        )
    }

    /// Rescales `amplitudes` to unit norm first.
    pub fn normalized(n_qubits: usize, mut amplitudes: Vec<C64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::domain("cannot normalize a zero or non-finite state"));
        }
        amplitudes.iter_mut().for_each(|a| *a /= norm);
        Self::new(n_qubits, amplitudes)
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut amps = vec![C64::new(0.0, 0.0); 1usize << n_qubits];
        *amps
            .get_mut(index)
            .ok_or_else(|| Error::domain(format!("basis index {index} out of range")))? =
            C64::new(1.0, 0.0);
        Self::new(n_qubits, amps)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    /// Applies the 2x2 unitary `u` to qubit `q`.
    pub fn apply_local(&self, q: usize, u: &Matrix2<C64>) -> Result<Self> {
        if q >= self.n_qubits {
            return Err(Error::domain(format!("qubit {q} out of range")));
        }
        let bit = 1usize << q;
        let mut out = self.amplitudes.clone();
        for i in 0..out.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amplitudes[i], self.amplitudes[i | bit]);
                out[i] = u[(0, 0)] * a0 + u[(0, 1)] * a1;
                out[i | bit] = u[(1, 0)] * a0 + u[(1, 1)] * a1;
            }
        }
        Self::normalized(self.n_qubits, out)
    }

    /// Relabels qubits: qubit `q` of `self` becomes qubit `perm[q]` of the result.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_qubits)?;
        let mut out = vec![C64::new(0.0, 0.0); self.amplitudes.len()];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let j = (0..self.n_qubits).fold(0, |acc, q| acc | ((i >> q & 1) << perm[q]));
            out[j] = *a;
        }
        Self::new(self.n_qubits, out)
    }

    fn check_subset(&self, mask: u32) -> Result<()> {
        let full = (1u64 << self.n_qubits) - 1;
        if mask == 0 || mask as u64 >= full {
            return Err(Error::domain(format!(
                "subset mask {mask:#b} must be a non-empty proper subset of {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

fn check_permutation(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n
        || perm
            .iter()
            .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
    {
        return Err(Error::domain(format!(
            "{perm:?} is not a permutation of {n} qubits"
        )));
    }
    Ok(())
}

/// Hermitian, unit-trace reduced state on `n_qubits` qubits.
///
/// Row/column index bit `i` refers to the `i`-th lowest kept qubit.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    n_qubits: usize,
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    /// Wraps an explicit `2^n × 2^n` matrix, rejecting anything that fails [`DensityMatrix::check`].
    pub fn from_matrix(n_qubits: usize, entries: DMatrix<C64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(Error::domain(format!(
                "density matrix of {n_qubits} qubits must be {dim}x{dim}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        let rho = DensityMatrix { n_qubits, entries };
        rho.check()?;
        Ok(rho)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    /// Eigenvalues in ascending order with round-off negatives clamped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = SymmetricEigen::new(self.entries.clone());
        let mut values: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
        values.sort_by(f64::total_cmp);
        values
    }

    /// Checks Hermiticity (1e-12), unit trace (1e-10) and positivity (−1e-10).
    pub fn check(&self) -> Result<()> {
        let dim = self.entries.nrows();
        for i in 0..dim {
            for j in 0..dim {
                if (self.entries[(i, j)] - self.entries[(j, i)].conj()).norm() > 1e-12 {
                    return Err(Error::domain(format!(
                        "density matrix not hermitian at ({i}, {j})"
                    )));
                }
            }
        }
        let trace = self.entries.trace();
        if (trace.re - 1.0).abs() > 1e-10 || trace.im.abs() > 1e-10 {
            return Err(Error::domain(format!(
                "density matrix trace {trace} is not 1"
            )));
        }
        let eig = SymmetricEigen::new(self.entries.clone());
        if let Some(v) = eig.eigenvalues.iter().find(|&&v| v < -1e-10) {
            return Err(Error::domain(format!("density matrix has eigenvalue {v}")));
        }
        Ok(())
    }
}

/// `ρ_A = Tr_Ā |ψ⟩⟨ψ|` for the qubits in `keep`.
pub fn partial_trace(psi: &StateVector, keep: u32) -> Result<DensityMatrix> {
    psi.check_subset(keep)?;
    Ok(reduce(psi, keep))
}

/// Reduced state on `keep`, which may be the whole register.
fn reduce(psi: &StateVector, keep: u32) -> DensityMatrix {
    let n = psi.n_qubits;
    let keep = keep as usize;
    let env = ((1usize << n) - 1) & !keep;
    let kept = keep.count_ones();
    let dim = 1usize << kept;
    let offsets: Vec<usize> = (0..dim).map(|i| deposit(i, keep)).collect();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    let amps = &psi.amplitudes;
    for e in 0..(1usize << (n as u32 - kept)) {
        let base = deposit(e, env);
        for (i, &oi) in offsets.iter().enumerate() {
            let ai = amps[base | oi];
            if ai == C64::new(0.0, 0.0) {
                continue;
            }
            for (j, &oj) in offsets.iter().enumerate() {
                rho[(i, j)] += ai * amps[base | oj].conj();
            }
        }
    }
    DensityMatrix {
        n_qubits: kept as usize,
        entries: rho,
    }
}

fn entropy_bits(probabilities: impl Iterator<Item = f64>) -> f64 {
    probabilities
        .filter(|&p| p > EIGENVALUE_CUTOFF)
        .map(|p| -p * p.log2())
        .sum()
}

/// Squared singular values of the amplitude matrix reshaped along `mask | complement`.
fn schmidt_probabilities(psi: &StateVector, mask: u32) -> Vec<f64> {
    let n = psi.n_qubits;
    let full = (1usize << n) - 1;
    // put the smaller side on the rows; the spectrum is the same either way
    let rows_mask = if (mask.count_ones() as usize) * 2 <= n {
        mask as usize
    } else {
        full & !(mask as usize)
    };
    let cols_mask = full & !rows_mask;
    let n_rows = 1usize << rows_mask.count_ones();
    let n_cols = 1usize << cols_mask.count_ones();
    let row_off: Vec<usize> = (0..n_rows).map(|i| deposit(i, rows_mask)).collect();
    let col_off: Vec<usize> = (0..n_cols).map(|e| deposit(e, cols_mask)).collect();
    let amps = &psi.amplitudes;
    let singular = if psi.real {
        DMatrix::<f64>::from_fn(n_rows, n_cols, |i, e| amps[row_off[i] | col_off[e]].re)
            .singular_values()
    } else {
        DMatrix::<C64>::from_fn(n_rows, n_cols, |i, e| amps[row_off[i] | col_off[e]])
            .singular_values()
    };
    singular.iter().map(|s| s * s).collect()
}

/// Entropy of entanglement `E_A = −Σ λ log₂ λ` of the bipartition `{subset, complement}`,
/// from the singular values of the reshaped amplitude matrix.
pub fn entropy_of_entanglement(psi: &StateVector, subset: u32) -> Result<f64> {
    psi.check_subset(subset)?;
    let cap = subset
        .count_ones()
        .min(psi.n_qubits as u32 - subset.count_ones()) as f64;
    Ok(entropy_bits(schmidt_probabilities(psi, subset).into_iter()).clamp(0.0, cap))
}

/// Von Neumann entropy in bits of a reduced state, via its eigenvalues.
pub fn entropy_from_density(rho: &DensityMatrix) -> f64 {
    entropy_bits(rho.eigenvalues().into_iter())
}

const SPIN_FLIP: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];

/// Wootters concurrence of a two-qubit (possibly mixed) state.
///
/// Accurate to about `1e-8`: the `μ_i` are square roots of the eigenvalues of the Hermitian matrix
/// `√ρ ρ̃ √ρ`, with `ρ̃ = (σʸ⊗σʸ) ρ* (σʸ⊗σʸ)`.
pub fn concurrence_of(rho: &DensityMatrix) -> Result<f64> {
    if rho.n_qubits != 2 {
        return Err(Error::domain(format!(
            "concurrence needs a two-qubit state, got {} qubits",
            rho.n_qubits
        )));
    }
    let r = Matrix4::<C64>::from_fn(|i, j| rho.entries[(i, j)]);
    // σʸ⊗σʸ is anti-diagonal with entries (−1, 1, 1, −1)
    let flipped =
        Matrix4::<C64>::from_fn(|i, j| r[(3 - i, 3 - j)].conj() * SPIN_FLIP[i] * SPIN_FLIP[j]);

    let eig = SymmetricEigen::new(r);
    let sqrt_w = eig.eigenvalues.map(|w| C64::new(w.max(0.0).sqrt(), 0.0));
    let u = eig.eigenvectors;
    let sqrt_rho = u * Matrix4::from_diagonal(&sqrt_w) * u.adjoint();
    let product = sqrt_rho * flipped * sqrt_rho;
    // symmetrize round-off before the Hermitian solver
    let product = (product + product.adjoint()) * C64::new(0.5, 0.0);
    let mut mu: Vec<f64> = SymmetricEigen::new(product)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).clamp(0.0, 1.0))
}

/// Concurrence between qubits `j` and `k` (0-based) of a pure state.
///
/// Factors the pair state as `ρ = R†R` through a QR decomposition of the
/// reshaped amplitudes; the `μ_i` are then the singular values of
/// `R̄ (σʸ⊗σʸ) R†`. No square roots of near-zero eigenvalues are taken, so the
/// result is accurate to machine precision even for rank-deficient `ρ`.
pub fn concurrence(psi: &StateVector, j: usize, k: usize) -> Result<f64> {
    if j == k || j >= psi.n_qubits || k >= psi.n_qubits {
        return Err(Error::domain(format!(
            "concurrence needs two distinct qubits below {}, got {j} and {k}",
            psi.n_qubits
        )));
    }
    let pair = (1usize << j) | (1usize << k);
    let env = ((1usize << psi.n_qubits) - 1) & !pair;
    let n_env = 1usize << (psi.n_qubits - 2);
    let pair_off: Vec<usize> = (0..4).map(|a| deposit(a, pair)).collect();
    let env_off: Vec<usize> = (0..n_env).map(|e| deposit(e, env)).collect();
    let amps = &psi.amplitudes;
    let flip = Matrix4::<f64>::from_fn(|a, b| if a + b == 3 { SPIN_FLIP[a] } else { 0.0 });

    let mut mu: Vec<f64> = if psi.real {
        let m_adj = DMatrix::<f64>::from_fn(n_env, 4, |e, a| amps[env_off[e] | pair_off[a]].re);
        let r = m_adj.qr().r();
        (&r * flip * r.transpose())
            .singular_values()
            .iter()
            .copied()
            .collect()
    } else {
        let m_adj = DMatrix::<C64>::from_fn(n_env, 4, |e, a| amps[env_off[e] | pair_off[a]].conj());
        let r = m_adj.qr().r();
        let flip = flip.map(|v| C64::new(v, 0.0));
        (r.conjugate() * flip * r.adjoint())
            .singular_values()
            .iter()
            .copied()
            .collect()
    };
    mu.resize(4.max(mu.len()), 0.0);
    mu.sort_by(|a, b| b.total_cmp(a));
    Ok((mu[0] - mu[1] - mu[2] - mu[3]).clamp(0.0, 1.0))
}

/// Reference families with known entanglement properties.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceState {
    /// Balanced single-excitation superposition.
    W { n: usize },
    /// Single-excitation superposition; coefficient `q` sits on qubit `q` excited.
    GeneralizedW { coefficients: Vec<C64> },
    /// `(|0…0⟩ + |1…1⟩)/√2`.
    Ghz { n: usize },
    /// `c₁|ϕ₁…ϕ_N⟩ + c₂|ψ₁…ψ_N⟩` with one orthonormal pair `(ϕ_q, ψ_q)` per qubit.
    GeneralizedGhz {
        local_bases: Vec<(Vector2<C64>, Vector2<C64>)>,
        c1: C64,
        c2: C64,
    },
}

const COEFF_TOLERANCE: f64 = 1e-12;

pub fn reference_state(family: &ReferenceState) -> Result<StateVector> {
    let zero = C64::new(0.0, 0.0);
    match family {
        ReferenceState::W { n } => {
            if *n < 2 {
                return Err(Error::domain("W state needs at least 2 qubits"));
            }
            let c = C64::new(1.0 / (*n as f64).sqrt(), 0.0);
            reference_state(&ReferenceState::GeneralizedW {
                coefficients: vec![c; *n],
            })
        }
        ReferenceState::GeneralizedW { coefficients } => {
            let n = coefficients.len();
            if !(2..=31).contains(&n) {
                return Err(Error::domain("generalized W state needs 2..=31 qubits"));
            }
            if coefficients.iter().any(|c| c.norm() < COEFF_TOLERANCE) {
                return Err(Error::domain("generalized W coefficients must not vanish"));
            }
            let norm: f64 = coefficients.iter().map(|c| c.norm_sqr()).sum();
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::domain(format!(
                    "generalized W coefficients have norm² {norm}"
                )));
            }
            let mut amps = vec![zero; 1 << n];
            for (q, c) in coefficients.iter().enumerate() {
                amps[1 << q] = *c;
            }
            StateVector::new(n, amps)
        }
        ReferenceState::Ghz { n } => {
            if *n < 3 {
                return Err(Error::domain("GHZ state needs at least 3 qubits"));
            }
            let mut amps = vec![zero; 1 << n];
            let h = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            amps[0] = h;
            amps[(1 << n) - 1] = h;
            StateVector::new(*n, amps)
        }
        ReferenceState::GeneralizedGhz {
            local_bases,
            c1,
            c2,
        } => {
            let n = local_bases.len();
            if !(3..=31).contains(&n) {
                return Err(Error::domain("generalized GHZ state needs 3..=31 qubits"));
            }
            if c1.norm() < COEFF_TOLERANCE || c2.norm() < COEFF_TOLERANCE {
                return Err(Error::domain(
                    "generalized GHZ coefficients must not vanish",
                ));
            }
            if (c1.norm_sqr() + c2.norm_sqr() - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::domain(
                    "generalized GHZ coefficients are not normalized",
                ));
            }
            for (q, (phi, psi)) in local_bases.iter().enumerate() {
                let orth = (phi.dotc(psi)).norm();
                if (phi.norm() - 1.0).abs() > NORM_TOLERANCE
                    || (psi.norm() - 1.0).abs() > NORM_TOLERANCE
                    || orth > NORM_TOLERANCE
                {
                    return Err(Error::domain(format!(
                        "local basis of qubit {q} is not orthonormal"
                    )));
                }
            }
            let amps = (0..1usize << n)
                .map(|i| {
                    let phi: C64 = (0..n).map(|q| local_bases[q].0[i >> q & 1]).product();
                    let psi: C64 = (0..n).map(|q| local_bases[q].1[i >> q & 1]).product();
                    c1 * phi + c2 * psi
                })
                .collect();
            StateVector::new(n, amps)
        }
    }
}

/// Closed-form values for W and GHZ states, used as independent oracles.
pub mod analytic {
    use super::C64;
    use nalgebra::Matrix4;

    /// Entropy of a subset of `l` qubits of `|W_n⟩`.
    pub fn w_entropy(n: usize, l: usize) -> f64 {
        let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
        let (n, l) = (n as f64, l as f64);
        term((n - l) / n) + term(l / n)
    }

    /// Pairwise concurrence of `|W_n⟩`.
    pub fn w_concurrence(n: usize) -> f64 {
        2.0 / n as f64
    }

    /// Two-qubit reduced state of `|W_n⟩` in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
    pub fn w_pair_density(n: usize) -> Matrix4<C64> {
        let nf = n as f64;
        let r = |x: f64| C64::new(x / nf, 0.0);
        #[rustfmt::skip]
        let m = Matrix4::new(
            r(nf - 2.0), r(0.0), r(0.0), r(0.0),
            r(0.0),      r(1.0), r(1.0), r(0.0),
            r(0.0),      r(1.0), r(1.0), r(0.0),
            r(0.0),      r(0.0), r(0.0), r(0.0),
        );
        m
    }

    /// Reduced state of qubits `j < k` of a generalized W state. Index 1 is
    /// "qubit `j` excited", index 2 is "qubit `k` excited".
    pub fn generalized_w_pair_density(c: &[C64], j: usize, k: usize) -> Matrix4<C64> {
        let (cj, ck) = (c[j], c[k]);
        let z = C64::new(0.0, 0.0);
        let rest = C64::new(1.0 - cj.norm_sqr() - ck.norm_sqr(), 0.0);
        #[rustfmt::skip]
        let m = Matrix4::new(
            rest, z,                    z,                    z,
            z,    C64::new(cj.norm_sqr(), 0.0), cj * ck.conj(), z,
            z,    cj.conj() * ck,       C64::new(ck.norm_sqr(), 0.0), z,
            z,    z,                    z,                    z,
        );
        m
    }

    pub fn generalized_w_concurrence(c: &[C64], j: usize, k: usize) -> f64 {
        2.0 * c[j].norm() * c[k].norm()
    }

    pub const GHZ_ENTROPY: f64 = 1.0;
    pub const GHZ_CONCURRENCE: f64 = 0.0;
}

/// All bipartition entropies and pairwise concurrences of one pure state.
#[derive(Debug, Clone, PartialEq)]
pub struct EntanglementProfile {
    n_qubits: usize,
    /// Entry `i` belongs to canonical mask `2i + 1`.
    entropies: Vec<f64>,
    /// Row-major `N × N`.
    concurrences: Vec<f64>,
    min_entropy: f64,
    min_entropy_mask: u32,
}

impl EntanglementProfile {
    /// Assembles a profile from canonical-order entropies and a row-major concurrence matrix.
    pub fn from_parts(
        n_qubits: usize,
        entropies: Vec<f64>,
        concurrences: Vec<f64>,
    ) -> Result<Self> {
        if !(2..=31).contains(&n_qubits) {
            return Err(Error::domain("profile needs at least 2 qubits"));
        }
        let expected = (1usize << (n_qubits - 1)) - 1;
        if entropies.len() != expected || concurrences.len() != n_qubits * n_qubits {
            return Err(Error::domain(format!(
                "profile of {n_qubits} qubits needs {expected} entropies and {} concurrences",
                n_qubits * n_qubits
            )));
        }
        for j in 0..n_qubits {
            if concurrences[j * n_qubits + j] != 0.0 {
                return Err(Error::domain(
                    "concurrence matrix must have a zero diagonal",
                ));
            }
            for k in 0..n_qubits {
                if concurrences[j * n_qubits + k] != concurrences[k * n_qubits + j] {
                    return Err(Error::domain("concurrence matrix must be symmetric"));
                }
            }
        }
        let (min_idx, min_entropy) =
            entropies
                .iter()
                .copied()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |best, (i, e)| if e < best.1 { (i, e) } else { best },
                );
        Ok(EntanglementProfile {
            n_qubits,
            entropies,
            concurrences,
            min_entropy,
            min_entropy_mask: 2 * min_idx as u32 + 1,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Entropy of the bipartition containing `mask` (either side may be given).
    pub fn entropy(&self, mask: u32) -> f64 {
        let full = ((1u64 << self.n_qubits) - 1) as u32;
        let canonical = if mask & 1 == 1 { mask } else { full & !mask };
        self.entropies[(canonical as usize - 1) / 2]
    }

    /// `(canonical mask, entropy)` pairs in ascending mask order.
    pub fn entropies(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        bits::canonical_bipartitions(self.n_qubits).zip(self.entropies.iter().copied())
    }

    pub fn concurrence(&self, j: usize, k: usize) -> f64 {
        self.concurrences[j * self.n_qubits + k]
    }

    /// Row-major `N × N` concurrence matrix.
    pub fn concurrence_matrix(&self) -> &[f64] {
        &self.concurrences
    }

    /// Smallest bipartition entropy and the (lowest) canonical mask attaining it.
    pub fn min_entropy(&self) -> (f64, u32) {
        (self.min_entropy, self.min_entropy_mask)
    }

    /// Relabels qubits: qubit `q` becomes `perm[q]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        check_permutation(perm, self.n_qubits)?;
        let n = self.n_qubits;
        let map_mask = |m: u32| (0..n).fold(0u32, |acc, q| acc | ((m >> q & 1) << perm[q]));
        let full = ((1u64 << n) - 1) as u32;
        let mut entropies = vec![0.0; self.entropies.len()];
        for (mask, e) in self.entropies() {
            let mapped = map_mask(mask);
            let canonical = if mapped & 1 == 1 {
                mapped
            } else {
                full & !mapped
            };
            entropies[(canonical as usize - 1) / 2] = e;
        }
        let mut conc = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                conc[perm[j] * n + perm[k]] = self.concurrences[j * n + k];
            }
        }
        Self::from_parts(n, entropies, conc)
    }
}

/// Computes the full [`EntanglementProfile`] of `psi`.
pub fn profile(psi: &StateVector) -> Result<EntanglementProfile> {
    let n = psi.n_qubits;
    if n < 2 {
        return Err(Error::domain("profile needs at least 2 qubits"));
    }
    let entropies = bits::canonical_bipartitions(n)
        .map(|mask| entropy_of_entanglement(psi, mask))
        .collect::<Result<Vec<_>>>()?;
    let mut conc = vec![0.0; n * n];
    for j in 0..n {
        for k in (j + 1)..n {
            let c = concurrence(psi, j, k)?;
            conc[j * n + k] = c;
            conc[k * n + j] = c;
        }
    }
    EntanglementProfile::from_parts(n, entropies, conc)
}

#[cfg(test)]
mod tests {
    use super::analytic::*;
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn random_state(n: usize, rng: &mut impl Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        StateVector::normalized(n, amps).unwrap()
    }

    fn bell() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_real(2, &[h, 0.0, 0.0, h]).unwrap()
    }

    /// ρ_A[i,j] = Σ_e ψ[i⊕e] ψ*[j⊕e], with i, j ranging over kept configurations
    /// and e over environment configurations, by brute force over all index pairs.
    fn partial_trace_by_definition(psi: &StateVector, keep: u32) -> DMatrix<C64> {
        let n = psi.n_qubits();
        let k = keep.count_ones() as usize;
        let dim = 1 << k;
        let kept_bits = |idx: usize| {
            bits::qubits(keep)
                .iter()
                .enumerate()
                .fold(0, |acc, (pos, &q)| acc | ((idx >> q & 1) << pos))
        };
        let env_bits = |idx: usize| idx & !(keep as usize);
        let mut rho = DMatrix::zeros(dim, dim);
        for a in 0..1usize << n {
            for b in 0..1usize << n {
                if env_bits(a) == env_bits(b) {
                    rho[(kept_bits(a), kept_bits(b))] +=
                        psi.amplitudes()[a] * psi.amplitudes()[b].conj();
                }
            }
        }
        rho
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let rho = partial_trace(&bell(), 0b01).unwrap();
        rho.check().unwrap();
        let expected = DMatrix::from_diagonal_element(2, 2, c(0.5));
        assert!((rho.entries() - expected).norm() < 1e-15);
        assert!((concurrence(&bell(), 0, 1).unwrap() - 1.0).abs() < 1e-12);
        assert!((entropy_of_entanglement(&bell(), 0b01).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_reduces_to_pure() {
        let psi = StateVector::basis(2, 0).unwrap();
        let rho = partial_trace(&psi, 0b01).unwrap();
        assert_eq!(rho.entries()[(0, 0)], c(1.0));
        assert_eq!(rho.entries()[(1, 1)], c(0.0));
        assert_eq!(entropy_of_entanglement(&psi, 0b01).unwrap(), 0.0);
        assert_eq!(concurrence(&psi, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn w4_pair_matches_closed_form() {
        let w = reference_state(&ReferenceState::W { n: 4 }).unwrap();
        let rho = partial_trace(&w, 0b0011).unwrap();
        let expected = DMatrix::from_fn(4, 4, |i, j| w_pair_density(4)[(i, j)]);
        assert!((rho.entries() - &expected).norm() < 1e-14);
        assert_eq!(expected[(0, 0)], c(0.5));
        assert_eq!(expected[(1, 2)], c(0.25));
    }

    #[test]
    fn partial_trace_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for n in 2..=5 {
            let psi = random_state(n, &mut rng);
            for keep in 1..((1u32 << n) - 1) {
                let rho = partial_trace(&psi, keep).unwrap();
                rho.check().unwrap();
                let oracle = partial_trace_by_definition(&psi, keep);
                assert!(
                    (rho.entries() - oracle).norm() < 1e-13,
                    "n={n} keep={keep:b}"
                );
            }
        }
    }

    #[test]
    fn invalid_subsets_are_rejected() {
        let psi = bell();
        assert!(partial_trace(&psi, 0).is_err());
        assert!(partial_trace(&psi, 0b11).is_err());
        assert!(partial_trace(&psi, 0b100).is_err());
        assert!(entropy_of_entanglement(&psi, 0).is_err());
        assert!(concurrence(&psi, 1, 1).is_err());
        assert!(concurrence(&psi, 0, 2).is_err());
    }

    #[test]
    fn w4_single_spin_entropy() {
        let w = reference_state(&ReferenceState::W { n: 4 }).unwrap();
        let e = entropy_of_entanglement(&w, 0b0001).unwrap();
        let expected = -(0.75f64) * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert!((e - expected).abs() < 1e-12);
        assert!((e - 0.811278).abs() < 1e-6);
    }

    #[test]
    fn w_states_match_closed_forms() {
        for n in 2..=8 {
            let w = reference_state(&ReferenceState::W { n }).unwrap();
            for mask in bits::canonical_bipartitions(n) {
                let l = mask.count_ones() as usize;
                let e = entropy_of_entanglement(&w, mask).unwrap();
                assert!((e - w_entropy(n, l)).abs() < 1e-10);
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    assert!((concurrence(&w, j, k).unwrap() - w_concurrence(n)).abs() < 1e-10);
                }
            }
        }
        let w5 = reference_state(&ReferenceState::W { n: 5 }).unwrap();
        assert!((concurrence(&w5, 1, 3).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn ghz_states_match_closed_forms() {
        for n in 3..=7 {
            let g = reference_state(&ReferenceState::Ghz { n }).unwrap();
            let p = profile(&g).unwrap();
            assert!(p.entropies().all(|(_, e)| (e - GHZ_ENTROPY).abs() < 1e-10));
            assert!(p.concurrence_matrix().iter().all(|&c| c.abs() < 1e-10));
        }
    }

    #[test]
    fn generalized_w_concurrence_is_twice_product() {
        let coeffs: Vec<C64> = vec![
            C64::new(0.5, 0.1),
            C64::new(-0.3, 0.4),
            C64::new(0.2, -0.2),
            C64::new(0.1, 0.0),
        ];
        let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let coeffs: Vec<C64> = coeffs.iter().map(|c| c / norm).collect();
        let psi = reference_state(&ReferenceState::GeneralizedW {
            coefficients: coeffs.clone(),
        })
        .unwrap();
        for j in 0..4 {
            for k in (j + 1)..4 {
                let got = concurrence(&psi, j, k).unwrap();
                assert!((got - generalized_w_concurrence(&coeffs, j, k)).abs() < 1e-10);
                let rho = partial_trace(&psi, (1 << j) | (1 << k)).unwrap();
                let expected = generalized_w_pair_density(&coeffs, j, k);
                let expected = DMatrix::from_fn(4, 4, |a, b| expected[(a, b)]);
                assert!((rho.entries() - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn reference_state_layouts() {
        let w3 = reference_state(&ReferenceState::W { n: 3 }).unwrap();
        let s = 1.0 / 3f64.sqrt();
        for (i, a) in w3.amplitudes().iter().enumerate() {
            let expected = if [0b001, 0b010, 0b100].contains(&i) {
                s
            } else {
                0.0
            };
            assert!((a.re - expected).abs() < 1e-15 && a.im == 0.0);
        }
        let ghz3 = reference_state(&ReferenceState::Ghz { n: 3 }).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ghz3.amplitudes()[0].re - h).abs() < 1e-15);
        assert!((ghz3.amplitudes()[7].re - h).abs() < 1e-15);
        assert_eq!(
            ghz3.amplitudes().iter().filter(|a| a.norm() > 0.0).count(),
            2
        );
    }

    #[test]
    fn generalized_ghz_reproduces_flipped_pair() {
        let one = Vector2::new(c(0.0), c(1.0));
        let zero = Vector2::new(c(1.0), c(0.0));
        // spin 1 and 4 use ϕ = |1⟩, spins 2 and 3 use ϕ = |0⟩
        let bases = vec![(one, zero), (zero, one), (zero, one), (one, zero)];
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = reference_state(&ReferenceState::GeneralizedGhz {
            local_bases: bases,
            c1: c(h),
            c2: c(-h),
        })
        .unwrap();
        // |1001⟩ (spins 1 and 4 excited) = index 0b1001, |0110⟩ = index 0b0110
        let mut expected = vec![c(0.0); 16];
        expected[0b1001] = c(h);
        expected[0b0110] = c(-h);
        assert_eq!(psi.amplitudes(), expected.as_slice());
        let p = profile(&psi).unwrap();
        assert!(p.entropies().all(|(_, e)| (e - 1.0).abs() < 1e-10));
        assert!(p.concurrence_matrix().iter().all(|&c| c < 1e-10));
    }

    #[test]
    fn reference_state_validation() {
        assert!(reference_state(&ReferenceState::W { n: 1 }).is_err());
        assert!(reference_state(&ReferenceState::Ghz { n: 2 }).is_err());
        assert!(reference_state(&ReferenceState::GeneralizedW {
            coefficients: vec![c(1.0), c(0.0)]
        })
        .is_err());
        assert!(reference_state(&ReferenceState::GeneralizedW {
            coefficients: vec![c(0.5), c(0.5)]
        })
        .is_err());
        let zero = Vector2::new(c(1.0), c(0.0));
        assert!(reference_state(&ReferenceState::GeneralizedGhz {
            local_bases: vec![(zero, zero); 3],
            c1: c(0.6),
            c2: c(0.8),
        })
        .is_err());
    }

    #[test]
    fn profile_of_w4_and_product() {
        let p = profile(&reference_state(&ReferenceState::W { n: 4 }).unwrap()).unwrap();
        assert_eq!(p.entropies().count(), 7);
        assert!(p.entropies().all(|(_, e)| e > 0.0));
        for j in 0..4 {
            for k in 0..4 {
                let expected = if j == k { 0.0 } else { 0.5 };
                assert!((p.concurrence(j, k) - expected).abs() < 1e-10);
            }
        }
        let zero = profile(&StateVector::basis(5, 0).unwrap()).unwrap();
        assert!(zero.entropies().all(|(_, e)| e == 0.0));
        assert!(zero.concurrence_matrix().iter().all(|&c| c == 0.0));
        assert_eq!(zero.min_entropy(), (0.0, 1));
    }

    #[test]
    fn entropy_routes_agree_on_random_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=8 {
            for _ in 0..3 {
                let psi = random_state(n, &mut rng);
                for mask in bits::canonical_bipartitions(n) {
                    let svd = entropy_of_entanglement(&psi, mask).unwrap();
                    let eig = entropy_from_density(&partial_trace(&psi, mask).unwrap());
                    assert!((svd - eig).abs() < 1e-10, "n={n} mask={mask:b}");
                }
            }
        }
    }

    #[test]
    fn concurrence_of_rejects_wrong_size() {
        let w = reference_state(&ReferenceState::W { n: 3 }).unwrap();
        let rho = partial_trace(&w, 0b001).unwrap();
        assert!(concurrence_of(&rho).is_err());
    }

    #[test]
    fn profile_permutation_tracks_state_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let psi = random_state(5, &mut rng);
        let perm = [4, 3, 2, 1, 0];
        let a = profile(&psi).unwrap().permuted(&perm).unwrap();
        let b = profile(&psi.permuted(&perm).unwrap()).unwrap();
        for ((m1, e1), (m2, e2)) in a.entropies().zip(b.entropies()) {
            assert_eq!(m1, m2);
            assert!((e1 - e2).abs() < 1e-10);
        }
        for (x, y) in a.concurrence_matrix().iter().zip(b.concurrence_matrix()) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
