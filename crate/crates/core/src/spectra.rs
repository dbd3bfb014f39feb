//! Dense eigendecomposition and excitation-manifold labelling.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ChainSpec;

/// Relative (to Ω) energy separation below which two eigenpairs count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;
const SOLVER_EPS: f64 = 1e-15;
const SOLVER_MAX_ITER: usize = 0;

/// Dense real symmetric Hamiltonian on `n_qubits` qubits, MHz.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianMatrix {
    n_qubits: usize,
    matrix: DMatrix<f64>,
}

impl HamiltonianMatrix {
    pub fn new(n_qubits: usize, matrix: DMatrix<f64>) -> Result<Self> {
        let dim = 1usize << n_qubits;
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::domain(format!(
                "hamiltonian for {n_qubits} qubits must be {dim}x{dim}, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in (i + 1)..dim {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-14 * scale {
                    return Err(Error::domain(format!(
                        "hamiltonian not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(HamiltonianMatrix { n_qubits, matrix })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `H + c·𝟙`.
    pub fn shifted(&self, c: f64) -> Self {
        let mut matrix = self.matrix.clone();
        for i in 0..self.dim() {
            matrix[(i, i)] += c;
        }
        HamiltonianMatrix {
            n_qubits: self.n_qubits,
            matrix,
        }
    }
}

/// Separation diagnostics between neighbouring excitation manifolds, MHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManifoldGapReport {
    pub min_inter_manifold_gap: f64,
    pub max_intra_manifold_spread: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Manifolds {
    labels: Vec<usize>,
    gaps: ManifoldGapReport,
    degenerate: Vec<bool>,
}

/// Full spectrum of a [`HamiltonianMatrix`]: ascending eigenvalues and orthonormal eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    n_qubits: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
    manifolds: Option<Manifolds>,
}

/// Worst-case accuracy of an eigendecomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenCheck {
    /// `max_m ‖H v_m − E_m v_m‖₂ / ‖H‖₂`.
    pub max_relative_residual: f64,
    /// `‖VᵀV − 𝟙‖_max`.
    pub orthogonality_error: f64,
}

impl EigenSystem {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Amplitudes of eigenstate `m` (column `m`).
    pub fn eigenvector(&self, m: usize) -> &[f64] {
        let dim = self.dim();
        &self.eigenvectors.as_slice()[m * dim..(m + 1) * dim]
    }

    /// Manifold label (number of excitations) of each state, once assigned.
    pub fn manifold_labels(&self) -> Option<&[usize]> {
        self.manifolds.as_ref().map(|m| m.labels.as_slice())
    }

    pub fn gap_report(&self) -> Option<ManifoldGapReport> {
        self.manifolds.as_ref().map(|m| m.gaps)
    }

    /// Degeneracy flags, once manifolds are assigned.
    pub fn degenerate_flags(&self) -> Option<&[bool]> {
        self.manifolds.as_ref().map(|m| m.degenerate.as_slice())
    }

    /// Indices of the states in manifold `k`, ascending in energy.
    pub fn manifold_states(&self, k: usize) -> Vec<usize> {
        match self.manifold_labels() {
            Some(labels) => (0..labels.len()).filter(|&m| labels[m] == k).collect(),
            None => Vec::new(),
        }
    }

    /// `⟨Ψ_m| Σ_j σˣ_j |Ψ_m⟩`.
    pub fn sigma_x_expectation(&self, m: usize) -> f64 {
        let v = self.eigenvector(m);
        let mut acc = 0.0;
        for q in 0..self.n_qubits {
            let flip = 1usize << q;
            acc += v
                .iter()
                .enumerate()
                .map(|(i, a)| a * v[i ^ flip])
                .sum::<f64>();
        }
        acc
    }

    /// Residual and orthogonality of the decomposition against `h`.
    pub fn check(&self, h: &HamiltonianMatrix) -> EigenCheck {
        let norm = self
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, e| acc.max(e.abs()))
            .max(f64::MIN_POSITIVE);
        let hv = h.matrix() * &self.eigenvectors;
        let mut max_residual = 0.0f64;
        for (m, e) in self.eigenvalues.iter().enumerate() {
            let r = (hv.column(m) - self.eigenvectors.column(m) * *e).norm();
            max_residual = max_residual.max(r / norm);
        }
        let gram = self.eigenvectors.tr_mul(&self.eigenvectors);
        let mut orth = 0.0f64;
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                orth = orth.max((gram[(i, j)] - target).abs());
            }
        }
        EigenCheck {
            max_relative_residual: max_residual,
            orthogonality_error: orth,
        }
    }
}

/// Full eigendecomposition with ascending eigenvalues.
///
/// Each eigenvector's sign is fixed so that its largest-magnitude component
/// (lowest index on ties) is positive, making output independent of solver sign choices.
pub fn diagonalize(h: &HamiltonianMatrix) -> Result<EigenSystem> {
    let dim = h.dim();
    let eig = SymmetricEigen::try_new(h.matrix().clone(), SOLVER_EPS, SOLVER_MAX_ITER).ok_or(
        Error::NoConvergence {
            dim,
            frobenius_norm: h.matrix().norm(),
        },
    )?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .total_cmp(&eig.eigenvalues[b])
            .then(a.cmp(&b))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<f64>::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let pivot = col.iamax();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        eigenvectors.set_column(dst, &(col * sign));
    }
    Ok(EigenSystem {
        n_qubits: h.n_qubits(),
        eigenvalues,
        eigenvectors,
        manifolds: None,
    })
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Labels every eigenstate with its excitation number `k`.
///
/// The primary label is `round((E_max − E_m)/Ω)`; it must agree with
/// `round((N − ⟨Σσˣ⟩)/2)` for every state, each manifold must hold
/// `binomial(N, k)` states and no manifold may spread wider than `Ω/2`.
pub fn assign_manifolds(mut es: EigenSystem, spec: &ChainSpec) -> Result<EigenSystem> {
    let n = es.n_qubits;
    let omega = spec.rabi_mhz;
    let overlap = |states: Vec<usize>, detail: String| Error::ManifoldOverlap {
        sigma_nm: spec.disorder_nm,
        states,
        detail,
    };
    let e_max = *es.eigenvalues.last().expect("non-empty spectrum");

    let mut labels = Vec::with_capacity(es.dim());
    let mut disagreements = Vec::new();
    for (m, e) in es.eigenvalues.iter().enumerate() {
        let k = ((e_max - e) / omega).round();
        let k_check = ((n as f64 - es.sigma_x_expectation(m)) / 2.0).round();
        if k != k_check || k < 0.0 || k > n as f64 {
            disagreements.push(m);
        }
        labels.push(k.clamp(0.0, n as f64) as usize);
    }
    if !disagreements.is_empty() {
        return Err(overlap(
            disagreements,
            "energy and sigma-x excitation counts disagree".into(),
        ));
    }

    let mut lo = vec![f64::INFINITY; n + 1];
    let mut hi = vec![f64::NEG_INFINITY; n + 1];
    let mut counts = vec![0usize; n + 1];
    for (&k, &e) in labels.iter().zip(&es.eigenvalues) {
        lo[k] = lo[k].min(e);
        hi[k] = hi[k].max(e);
        counts[k] += 1;
    }
    for k in 0..=n {
        if counts[k] != binomial(n, k) {
            let states = (0..labels.len()).filter(|&m| labels[m] == k).collect();
            return Err(overlap(
                states,
                format!(
                    "manifold {k} holds {} states, expected {}",
                    counts[k],
                    binomial(n, k)
                ),
            ));
        }
    }
    let mut max_spread = 0.0f64;
    let mut min_gap = f64::INFINITY;
    for k in 0..=n {
        let spread = hi[k] - lo[k];
        if spread > omega / 2.0 {
            let states = (0..labels.len()).filter(|&m| labels[m] == k).collect();
            return Err(overlap(
                states,
                format!("manifold {k} spreads over {spread} MHz > Omega/2"),
            ));
        }
        max_spread = max_spread.max(spread);
        if k < n {
            // higher k lies lower in energy
            min_gap = min_gap.min(lo[k] - hi[k + 1]);
        }
    }

    let tol = DEGENERACY_TOLERANCE * omega;
    let mut degenerate = vec![false; es.dim()];
    for m in 1..es.dim() {
        if es.eigenvalues[m] - es.eigenvalues[m - 1] < tol {
            degenerate[m] = true;
            degenerate[m - 1] = true;
        }
    }

    es.manifolds = Some(Manifolds {
        labels,
        gaps: ManifoldGapReport {
            min_inter_manifold_gap: if n == 0 { 0.0 } else { min_gap },
            max_intra_manifold_spread: max_spread,
        },
        degenerate,
    });
    Ok(es)
}
