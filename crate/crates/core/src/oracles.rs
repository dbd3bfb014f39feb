//! Closed-form checks of the entanglement routines on W, GHZ and generalized W states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::bits;
use nalgebra::DMatrix;

use crate::entanglement::{
    analytic, concurrence, concurrence_of, entropy_of_entanglement, partial_trace, reference_state,
    DensityMatrix, ReferenceState, C64,
};
use crate::error::Result;

/// Absolute tolerance of every oracle comparison.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
/// Largest chain covered by the W and GHZ checks.
pub const ORACLE_MAX_N: usize = 10;
/// Random generalized-W draws.
pub const GENERALIZED_W_DRAWS: usize = 100;

/// Outcome of one family of comparisons.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub comparisons: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

struct Tally {
    name: String,
    comparisons: usize,
    max_error: f64,
}

impl Tally {
    fn new(name: impl Into<String>) -> Self {
        Tally {
            name: name.into(),
            comparisons: 0,
            max_error: 0.0,
        }
    }

    fn record(&mut self, got: f64, want: f64) {
        self.comparisons += 1;
        let err = (got - want).abs();
        // NaN must fail the check
        self.max_error = if err.is_nan() {
            f64::INFINITY
        } else {
            self.max_error.max(err)
        };
    }

    fn finish(self) -> OracleCheck {
        OracleCheck {
            name: self.name,
            comparisons: self.comparisons,
            max_error: self.max_error,
            tolerance: ORACLE_TOLERANCE,
        }
    }
}

/// Random normalized single-excitation coefficients for `n` qubits.
pub fn random_w_coefficients(n: usize, rng: &mut impl Rng) -> Vec<C64> {
    let raw: Vec<C64> = (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = raw.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    raw.into_iter().map(|c| c / norm).collect()
}

/// Runs the whole suite. `seed` drives the generalized-W draws.
pub fn run_suite(seed: u64) -> Result<Vec<OracleCheck>> {
    let mut w_entropy = Tally::new("W entropy, every bipartition, N = 2..10");
    let mut w_conc = Tally::new("W pair concurrence = 2/N");
    let mut w_rho = Tally::new("W pair reduced state");
    let mut ghz_entropy = Tally::new("GHZ entropy = 1, N = 3..10");
    let mut ghz_conc = Tally::new("GHZ pair concurrence = 0");

    for n in 2..=ORACLE_MAX_N {
        let w = reference_state(&ReferenceState::W { n })?;
        for mask in bits::canonical_bipartitions(n) {
            let l = mask.count_ones() as usize;
            w_entropy.record(
                entropy_of_entanglement(&w, mask)?,
                analytic::w_entropy(n, l),
            );
        }
        let expected_rho = analytic::w_pair_density(n);
        for j in 0..n {
            for k in (j + 1)..n {
                w_conc.record(concurrence(&w, j, k)?, analytic::w_concurrence(n));
                if n > 2 {
                    let rho = partial_trace(&w, (1 << j) | (1 << k))?;
                    w_rho.record((rho.entries() - expected_rho).norm(), 0.0);
                }
            }
        }
        if n >= 3 {
            let ghz = reference_state(&ReferenceState::Ghz { n })?;
            for mask in bits::canonical_bipartitions(n) {
                ghz_entropy.record(entropy_of_entanglement(&ghz, mask)?, analytic::GHZ_ENTROPY);
            }
            for j in 0..n {
                for k in (j + 1)..n {
                    ghz_conc.record(concurrence(&ghz, j, k)?, analytic::GHZ_CONCURRENCE);
                }
            }
        }
    }

    let mut gw_conc = Tally::new("generalized W concurrence = 2|c_j c_k|, 100 draws");
    let mut gw_rho = Tally::new("generalized W pair reduced state, 100 draws");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GENERALIZED_W_DRAWS {
        let n = rng.random_range(3..=ORACLE_MAX_N);
        let c = random_w_coefficients(n, &mut rng);
        let psi = reference_state(&ReferenceState::GeneralizedW {
            coefficients: c.clone(),
        })?;
        for j in 0..n {
            for k in (j + 1)..n {
                gw_conc.record(
                    concurrence(&psi, j, k)?,
                    analytic::generalized_w_concurrence(&c, j, k),
                );
                let rho = partial_trace(&psi, (1 << j) | (1 << k))?;
                let expected = analytic::generalized_w_pair_density(&c, j, k);
                gw_rho.record((rho.entries() - expected).norm(), 0.0);
            }
        }
    }

    // the mixed-state routine on the closed-form matrices, at its own precision
    let mut mixed = Tally::new("W pair concurrence from the closed-form reduced state");
    for n in 3..=ORACLE_MAX_N {
        let m = analytic::w_pair_density(n);
        let rho = DensityMatrix::from_matrix(2, DMatrix::from_fn(4, 4, |i, j| m[(i, j)]))?;
        mixed.record(concurrence_of(&rho)?, analytic::w_concurrence(n));
    }
    let mut mixed = mixed.finish();
    mixed.tolerance = 1e-7;

    Ok(vec![
        w_entropy.finish(),
        w_conc.finish(),
        w_rho.finish(),
        ghz_entropy.finish(),
        ghz_conc.finish(),
        gw_conc.finish(),
        gw_rho.finish(),
        mixed,
    ])
}
