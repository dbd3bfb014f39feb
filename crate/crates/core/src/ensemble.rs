//! Seeded disorder ensembles and per-manifold occurrence statistics.
//!
//! Every realization draws its positions from its own ChaCha8 stream seeded
//! with [`derive_seed`], so any parallel schedule reproduces the sequential result.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::classify::{classify, StructureClass, StructureLabel, Thresholds};
use crate::entanglement::{profile, EntanglementProfile, StateVector};
use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, sample_positions, ChainRealization, ChainSpec};
use crate::spectra::{assign_manifolds, binomial, diagonalize, EigenSystem};

/// Frequencies (in percent of the spectrum) at or below this are not reported.
pub const REPORT_FLOOR_PERCENT: f64 = 0.05;

const N_LABELS: usize = StructureLabel::ALL.len();

/// Per-manifold class counts, indexed `[k][label.index()]`.
pub type ManifoldCounts = Vec<[u64; N_LABELS]>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    /// Template for every cell; `n_spins` and `disorder_nm` are overridden per cell.
    pub base: ChainSpec,
    pub sizes: Vec<usize>,
    pub disorder_widths: Vec<f64>,
    pub realizations: u64,
    pub master_seed: u64,
    pub thresholds: Thresholds,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            base: ChainSpec::default(),
            sizes: vec![8],
            disorder_widths: vec![0.0, 0.1, 0.2, 0.4, 0.8],
            realizations: 1000,
            master_seed: 0,
            thresholds: Thresholds::default(),
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be >= 1".into()));
        }
        if self.sizes.is_empty() || self.disorder_widths.is_empty() {
            return Err(Error::Config(
                "at least one size and one disorder width required".into(),
            ));
        }
        for cell in self.cells() {
            self.cell_spec(&cell).validate()?;
        }
        Ok(())
    }

    /// All `(N, σ_p)` cells in `sizes × disorder_widths` order.
    pub fn cells(&self) -> Vec<CellKey> {
        self.sizes
            .iter()
            .flat_map(|&n| {
                self.disorder_widths
                    .iter()
                    .map(move |&s| CellKey::new(n, s))
            })
            .collect()
    }

    pub fn cell_spec(&self, cell: &CellKey) -> ChainSpec {
        ChainSpec {
            n_spins: cell.n,
            disorder_nm: cell.sigma_nm,
            ..self.base.clone()
        }
    }
}

/// `(N, σ_p)` coordinates of an ensemble cell; ordered by `N`, then `σ_p`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CellKey {
    pub n: usize,
    pub sigma_nm: f64,
}

impl CellKey {
    pub fn new(n: usize, sigma_nm: f64) -> Self {
        // fold −0.0 into 0.0 so keys and seeds agree
        CellKey {
            n,
            sigma_nm: sigma_nm + 0.0,
        }
    }
}

impl PartialEq for CellKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for CellKey {}

impl PartialOrd for CellKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CellKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.sigma_nm.total_cmp(&other.sigma_nm))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of realization `index` in cell `(n, σ_p)`.
///
/// `h ← splitmix64(master)`, then `h ← splitmix64(h ⊕ x)` for `x` in
/// `(n, bits(σ_p), index)`, where `bits` is the IEEE-754 encoding (with −0 folded to +0).
pub fn derive_seed(master_seed: u64, n: usize, sigma_nm: f64, index: u64) -> u64 {
    let sigma_bits = (sigma_nm + 0.0).to_bits();
    [n as u64, sigma_bits, index]
        .into_iter()
        .fold(splitmix64(master_seed), |h, x| splitmix64(h ^ x))
}

/// Draws the chain for `seed` (regular chain when `σ_p = 0`).
pub fn sample_chain(spec: &ChainSpec, seed: u64) -> Result<ChainRealization> {
    sample_positions(spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Analysis of a single eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct StateAnalysis {
    pub index: usize,
    pub energy_mhz: f64,
    pub manifold: usize,
    pub class: StructureClass,
    pub profile: EntanglementProfile,
}

/// Spectrum and per-state classification of one chain.
#[derive(Debug, Clone)]
pub struct ChainAnalysis {
    pub spec: ChainSpec,
    pub realization: ChainRealization,
    pub eigen: EigenSystem,
    /// Analyzed states in ascending energy order.
    pub states: Vec<StateAnalysis>,
}

impl ChainAnalysis {
    /// Class counts per manifold over the analyzed states.
    pub fn counts(&self) -> ManifoldCounts {
        let mut counts = vec![[0u64; N_LABELS]; self.spec.n_spins + 1];
        for s in &self.states {
            counts[s.manifold][s.class.label.index()] += 1;
        }
        counts
    }

    pub fn state(&self, index: usize) -> Option<&StateAnalysis> {
        self.states.iter().find(|s| s.index == index)
    }

    pub fn in_manifold(&self, k: usize) -> impl Iterator<Item = &StateAnalysis> {
        self.states.iter().filter(move |s| s.manifold == k)
    }
}

/// Diagonalizes the chain and classifies its eigenstates.
///
/// With `manifolds = Some(ks)` only states in those manifolds are profiled.
pub fn analyze_chain(
    spec: &ChainSpec,
    realization: ChainRealization,
    thresholds: &Thresholds,
    manifolds: Option<&[usize]>,
) -> Result<ChainAnalysis> {
    let h = build_hamiltonian(&realization, spec)?;
    let eigen = assign_manifolds(diagonalize(&h)?, spec)?;
    let labels = eigen.manifold_labels().expect("labels assigned");
    let degenerate = eigen.degenerate_flags().expect("labels assigned");
    let selected: Vec<usize> = (0..eigen.dim())
        .filter(|&m| manifolds.is_none_or(|ks| ks.contains(&labels[m])))
        .collect();
    let n = eigen.n_qubits();
    let states = selected
        .par_iter()
        .map(|&m| {
            let psi = StateVector::from_real(n, eigen.eigenvector(m))?;
            let profile = profile(&psi)?;
            let class = classify(&profile, thresholds).with_degenerate(degenerate[m]);
            Ok(StateAnalysis {
                index: m,
                energy_mhz: eigen.eigenvalues()[m],
                manifold: labels[m],
                class,
                profile,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChainAnalysis {
        spec: spec.clone(),
        realization,
        eigen,
        states,
    })
}

/// Census of one disorder realization.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationOutcome {
    pub cell: CellKey,
    pub index: u64,
    pub seed: u64,
    pub counts: ManifoldCounts,
    pub degenerate_states: u64,
    pub rejections: u32,
}

impl RealizationOutcome {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Samples, diagonalizes and classifies realization `index` of the cell described by `spec`.
pub fn run_realization(
    spec: &ChainSpec,
    cfg: &EnsembleConfig,
    index: u64,
) -> Result<RealizationOutcome> {
    let cell = CellKey::new(spec.n_spins, spec.disorder_nm);
    let seed = derive_seed(cfg.master_seed, cell.n, cell.sigma_nm, index);
    let wrap = |e: Error| Error::Realization {
        n: cell.n,
        sigma_nm: cell.sigma_nm,
        index,
        seed,
        source: Box::new(e),
    };
    let realization = sample_chain(spec, seed).map_err(wrap)?;
    let rejections = realization.rejections();
    let analysis = analyze_chain(spec, realization, &cfg.thresholds, None).map_err(wrap)?;
    let degenerate_states = analysis
        .states
        .iter()
        .filter(|s| s.class.degenerate)
        .count() as u64;
    Ok(RealizationOutcome {
        cell,
        index,
        seed,
        counts: analysis.counts(),
        degenerate_states,
        rejections,
    })
}

/// A realization dropped because its manifolds overlap.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExcludedRealization {
    pub cell: CellKey,
    pub index: u64,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRun {
    pub table: OccurrenceTable,
    pub excluded: Vec<ExcludedRealization>,
}

/// Runs every realization of every cell in parallel and aggregates the counts.
///
/// Manifold-overlap failures are excluded and reported; any other error aborts the run.
pub fn run_ensemble(cfg: &EnsembleConfig) -> Result<EnsembleRun> {
    cfg.validate()?;
    let cells = cfg.cells();
    let tasks: Vec<(CellKey, u64)> = cells
        .iter()
        .flat_map(|&c| (0..cfg.realizations).map(move |i| (c, i)))
        .collect();
    let results: Vec<Result<RealizationOutcome>> = tasks
        .par_iter()
        .map(|(cell, idx)| run_realization(&cfg.cell_spec(cell), cfg, *idx))
        .collect();

    let mut outcomes = Vec::with_capacity(results.len());
    let mut excluded = Vec::new();
    for ((cell, idx), r) in tasks.iter().zip(results) {
        match r {
            Ok(o) => outcomes.push(o),
            Err(e) if e.is_manifold_overlap() => excluded.push(ExcludedRealization {
                cell: *cell,
                index: *idx,
                seed: derive_seed(cfg.master_seed, cell.n, cell.sigma_nm, *idx),
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    let mut table = aggregate(&cells, &outcomes)?;
    for ex in &excluded {
        if let Some(stats) = table.cells.get_mut(&ex.cell) {
            stats.excluded += 1;
        }
    }
    Ok(EnsembleRun { table, excluded })
}

/// Summed counts of one cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    pub realizations: u64,
    pub excluded: u64,
    pub rejections: u64,
    pub degenerate_states: u64,
    pub counts: ManifoldCounts,
}

impl CellStats {
    fn empty(n: usize) -> Self {
        CellStats {
            realizations: 0,
            excluded: 0,
            rejections: 0,
            degenerate_states: 0,
            counts: vec![[0; N_LABELS]; n + 1],
        }
    }
}

/// One line of the occurrence table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccurrenceRow {
    pub n: usize,
    pub sigma_p_nm: f64,
    pub manifold: usize,
    pub class: StructureLabel,
    pub count_mean: f64,
    pub freq_spectrum: f64,
    pub freq_manifold: f64,
    pub realizations: u64,
}

/// Ensemble-averaged class frequencies per `(N, σ_p, manifold, class)`.
///
/// Counts are kept as exact integer sums; means are formed once on read.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OccurrenceTable {
    cells: BTreeMap<CellKey, CellStats>,
}

/// Sums per-realization counts into a table over `grid`.
///
/// Order-independent: the result depends only on the multiset of outcomes.
pub fn aggregate(grid: &[CellKey], results: &[RealizationOutcome]) -> Result<OccurrenceTable> {
    let mut cells: BTreeMap<CellKey, CellStats> =
        grid.iter().map(|c| (*c, CellStats::empty(c.n))).collect();
    for r in results {
        let stats = cells.get_mut(&r.cell).ok_or_else(|| {
            Error::Config(format!(
                "result for n = {}, sigma_p = {} is outside the configured grid",
                r.cell.n, r.cell.sigma_nm
            ))
        })?;
        if r.counts.len() != r.cell.n + 1 {
            return Err(Error::Config(format!(
                "result for n = {} carries {} manifolds",
                r.cell.n,
                r.counts.len()
            )));
        }
        stats.realizations += 1;
        stats.rejections += r.rejections as u64;
        stats.degenerate_states += r.degenerate_states;
        for (acc, c) in stats.counts.iter_mut().zip(&r.counts) {
            for (a, b) in acc.iter_mut().zip(c) {
                *a += b;
            }
        }
    }
    Ok(OccurrenceTable { cells })
}

impl OccurrenceTable {
    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &CellStats)> {
        self.cells.iter()
    }

    pub fn cell(&self, n: usize, sigma_nm: f64) -> Option<&CellStats> {
        self.cells.get(&CellKey::new(n, sigma_nm))
    }

    /// Mean count of `label` in manifold `k` of cell `(n, σ_p)`.
    pub fn count_mean(&self, n: usize, sigma_nm: f64, k: usize, label: StructureLabel) -> f64 {
        self.cell(n, sigma_nm)
            .filter(|s| s.realizations > 0)
            .map(|s| s.counts[k][label.index()] as f64 / s.realizations as f64)
            .unwrap_or(0.0)
    }

    /// Fraction of the whole `2^N` spectrum.
    pub fn freq_spectrum(&self, n: usize, sigma_nm: f64, k: usize, label: StructureLabel) -> f64 {
        self.count_mean(n, sigma_nm, k, label) / (1u64 << n) as f64
    }

    /// Fraction of manifold `k` (`binomial(N, k)` states).
    pub fn freq_manifold(&self, n: usize, sigma_nm: f64, k: usize, label: StructureLabel) -> f64 {
        self.count_mean(n, sigma_nm, k, label) / binomial(n, k) as f64
    }

    /// Rows in `(N, σ_p, k, class)` order, every class listed for every manifold.
    pub fn rows(&self) -> Vec<OccurrenceRow> {
        let mut out = Vec::new();
        for (key, stats) in &self.cells {
            for k in 0..=key.n {
                for label in StructureLabel::ALL {
                    out.push(OccurrenceRow {
                        n: key.n,
                        sigma_p_nm: key.sigma_nm,
                        manifold: k,
                        class: label,
                        count_mean: self.count_mean(key.n, key.sigma_nm, k, label),
                        freq_spectrum: self.freq_spectrum(key.n, key.sigma_nm, k, label),
                        freq_manifold: self.freq_manifold(key.n, key.sigma_nm, k, label),
                        realizations: stats.realizations,
                    });
                }
            }
        }
        out
    }

    /// Rebuilds a table from occurrence rows (e.g. read back from CSV).
    pub fn from_rows(rows: &[OccurrenceRow]) -> Result<Self> {
        let mut cells: BTreeMap<CellKey, CellStats> = BTreeMap::new();
        for r in rows {
            let key = CellKey::new(r.n, r.sigma_p_nm);
            if r.manifold > r.n {
                return Err(Error::Config(format!(
                    "manifold {} exceeds n = {}",
                    r.manifold, r.n
                )));
            }
            let stats = cells.entry(key).or_insert_with(|| CellStats {
                realizations: r.realizations,
                ..CellStats::empty(r.n)
            });
            if stats.realizations != r.realizations {
                return Err(Error::Config(format!(
                    "inconsistent realization counts in cell n = {}, sigma_p = {}",
                    r.n, r.sigma_p_nm
                )));
            }
            let total = (r.count_mean * r.realizations as f64).round();
            stats.counts[r.manifold][r.class.index()] = total as u64;
        }
        Ok(OccurrenceTable { cells })
    }
}

/// One entry of a baseline/delta row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ReportCell {
    /// Left of the baseline: nothing reported.
    Blank,
    /// Baseline frequency in percent of the spectrum.
    Baseline(f64),
    /// Signed variation relative to the baseline, percent.
    Delta(f64),
}

impl ReportCell {
    pub fn render(&self) -> String {
        match self {
            ReportCell::Blank => String::new(),
            ReportCell::Baseline(p) => format!("{p:.2}%"),
            ReportCell::Delta(d) => format!("{d:+.0}%"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub n: usize,
    pub manifold: usize,
    pub class: StructureLabel,
    /// `(σ_p, cell)` in ascending `σ_p`.
    pub cells: Vec<(f64, ReportCell)>,
}

/// Baseline/delta rows: the leftmost frequency above [`REPORT_FLOOR_PERCENT`]
/// is the baseline; entries to its right are relative variations.
///
/// Rows with no reportable entry are omitted. Each `N` needs at least two disorder widths.
pub fn baseline_delta_report(table: &OccurrenceTable) -> Result<Vec<ReportRow>> {
    let mut by_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (key, _) in table.cells() {
        by_n.entry(key.n).or_default().push(key.sigma_nm);
    }
    let mut rows = Vec::new();
    for (n, sigmas) in by_n {
        if sigmas.len() < 2 {
            return Err(Error::Config(format!(
                "baseline/delta report for n = {n} needs at least two disorder widths"
            )));
        }
        for k in 0..=n {
            for label in StructureLabel::ALL {
                let percents: Vec<f64> = sigmas
                    .iter()
                    .map(|&s| 100.0 * table.freq_spectrum(n, s, k, label))
                    .collect();
                let Some(base_idx) = percents.iter().position(|&p| p > REPORT_FLOOR_PERCENT) else {
                    continue;
                };
                let base = percents[base_idx];
                let cells = sigmas
                    .iter()
                    .zip(&percents)
                    .enumerate()
                    .map(|(i, (&s, &p))| {
                        let cell = match i.cmp(&base_idx) {
                            Ordering::Less => ReportCell::Blank,
                            Ordering::Equal => ReportCell::Baseline(base),
                            Ordering::Greater => ReportCell::Delta(100.0 * (p - base) / base),
                        };
                        (s, cell)
                    })
                    .collect();
                rows.push(ReportRow {
                    n,
                    manifold: k,
                    class: label,
                    cells,
                });
            }
        }
    }
    Ok(rows)
}
