//! JSON spectrum dump and its re-classification check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::classify::{
    classify_graph, graph_from_matrix, Evidence, StructureClass, StructureLabel, Thresholds,
};
use crate::cli::config::{self, RunConfig};
use crate::cli::format::round_sig;
use crate::ensemble::{analyze_chain, ChainAnalysis};
use crate::error::{Error, Result};
use crate::model::ChainRealization;

pub const DUMP_FORMAT: &str = "nvchain-spectrum/1";

/// Evidence with 1-based spins; subsets rendered as `{1,4}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpEvidence {
    SeparatingSubsets(Vec<String>),
    Components(Vec<Vec<usize>>),
    SpanningPath(Vec<usize>),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpState {
    pub index: usize,
    pub energy_mhz: f64,
    pub manifold: usize,
    pub degenerate: bool,
    pub class: StructureLabel,
    pub evidence: DumpEvidence,
    pub min_entropy: f64,
    pub min_entropy_subset: String,
    pub concurrences: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumDump {
    pub format: String,
    /// Resolved configuration as `key → value`.
    pub config: BTreeMap<String, String>,
    pub n: usize,
    pub sigma_p_nm: f64,
    pub realization_index: u64,
    pub seed: u64,
    pub positions_nm: Vec<f64>,
    pub rejections: u32,
    pub min_inter_manifold_gap_mhz: Option<f64>,
    pub max_intra_manifold_spread_mhz: Option<f64>,
    pub eigenvalues_mhz: Vec<f64>,
    pub manifolds: Vec<usize>,
    pub degenerate: Vec<bool>,
    pub states: Vec<DumpState>,
}

fn to_dump_evidence(e: &Evidence) -> DumpEvidence {
    let one_based = |v: &[usize]| v.iter().map(|q| q + 1).collect::<Vec<_>>();
    match e {
        Evidence::SeparatingSubsets(m) => {
            DumpEvidence::SeparatingSubsets(m.iter().map(|&m| bits::format_subset(m)).collect())
        }
        Evidence::Components(cs) => {
            DumpEvidence::Components(cs.iter().map(|c| one_based(c)).collect())
        }
        Evidence::SpanningPath(p) => DumpEvidence::SpanningPath(one_based(p)),
        Evidence::None => DumpEvidence::None,
    }
}

/// Inverse of [`bits::format_subset`].
pub fn parse_subset(s: &str) -> Result<u32> {
    let bad = || Error::Parse {
        path: "dump".into(),
        reason: format!("malformed subset `{s}`"),
    };
    let inner = s
        .trim()
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(bad)?;
    let spins: Vec<usize> = inner
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    if spins.iter().any(|&q| q == 0 || q > 31) {
        return Err(bad());
    }
    Ok(bits::mask_from_spins(&spins))
}

impl SpectrumDump {
    pub fn build(cfg: &RunConfig, seed: u64, analysis: &ChainAnalysis) -> Self {
        let eigen = &analysis.eigen;
        let n = analysis.spec.n_spins;
        let gaps = eigen.gap_report();
        let states = analysis
            .states
            .iter()
            .map(|s| {
                let (e, mask) = s.profile.min_entropy();
                DumpState {
                    index: s.index,
                    energy_mhz: round_sig(s.energy_mhz),
                    manifold: s.manifold,
                    degenerate: s.class.degenerate,
                    class: s.class.label,
                    evidence: to_dump_evidence(&s.class.evidence),
                    min_entropy: round_sig(e),
                    min_entropy_subset: bits::format_subset(mask),
                    concurrences: (0..n)
                        .map(|j| {
                            (0..n)
                                .map(|k| round_sig(s.profile.concurrence(j, k)))
                                .collect()
                        })
                        .collect(),
                }
            })
            .collect();
        SpectrumDump {
            format: DUMP_FORMAT.into(),
            config: cfg
                .entries()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            n,
            sigma_p_nm: analysis.spec.disorder_nm,
            realization_index: cfg.index,
            seed,
            positions_nm: analysis
                .realization
                .positions_nm()
                .iter()
                .map(|&x| round_sig(x))
                .collect(),
            rejections: analysis.realization.rejections(),
            min_inter_manifold_gap_mhz: gaps.map(|g| round_sig(g.min_inter_manifold_gap)),
            max_intra_manifold_spread_mhz: gaps.map(|g| round_sig(g.max_intra_manifold_spread)),
            eigenvalues_mhz: eigen.eigenvalues().iter().map(|&x| round_sig(x)).collect(),
            manifolds: eigen
                .manifold_labels()
                .map(<[usize]>::to_vec)
                .unwrap_or_default(),
            degenerate: eigen
                .degenerate_flags()
                .map(<[bool]>::to_vec)
                .unwrap_or_default(),
            states,
        }
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("dump serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let dump: SpectrumDump = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        if dump.format != DUMP_FORMAT {
            return Err(Error::Parse {
                path: origin.to_string(),
                reason: format!("unsupported format `{}`", dump.format),
            });
        }
        Ok(dump)
    }

    pub fn run_config(&self) -> Result<RunConfig> {
        let pairs: Vec<(String, String)> = self.config.clone().into_iter().collect();
        config::resolve(&[pairs.as_slice()])
    }
}

/// Classification from a stored minimum entropy and concurrence matrix.
///
/// Separable evidence cannot be rebuilt from the minimum alone, so it is carried over.
pub fn reclassify_stored(
    state: &DumpState,
    n: usize,
    th: &Thresholds,
) -> Result<(StructureLabel, DumpEvidence)> {
    if state.concurrences.len() != n || state.concurrences.iter().any(|r| r.len() != n) {
        return Err(Error::Parse {
            path: "dump".into(),
            reason: format!("state {} has a malformed concurrence matrix", state.index),
        });
    }
    if state.min_entropy <= th.entropy {
        return Ok((StructureLabel::Separable, state.evidence.clone()));
    }
    let flat: Vec<f64> = state.concurrences.iter().flatten().copied().collect();
    let class: StructureClass = classify_graph(&graph_from_matrix(n, &flat, th.concurrence), th);
    Ok((class.label, to_dump_evidence(&class.evidence)))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyReport {
    pub checked: usize,
    /// States whose stored values no longer yield the stored class.
    pub stored_mismatches: Vec<usize>,
    /// States whose class differs after rebuilding the chain from the stored positions.
    pub recomputed_mismatches: Vec<usize>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.stored_mismatches.is_empty() && self.recomputed_mismatches.is_empty()
    }
}

/// Re-derives every stored classification twice: from the stored entropies and
/// concurrences, and from a fresh diagonalization of the stored chain.
pub fn verify_dump(dump: &SpectrumDump) -> Result<VerifyReport> {
    let cfg = dump.run_config()?;
    let th = cfg.thresholds;
    let mut report = VerifyReport::default();
    for s in &dump.states {
        report.checked += 1;
        let (label, evidence) = reclassify_stored(s, dump.n, &th)?;
        if label != s.class || evidence != s.evidence {
            report.stored_mismatches.push(s.index);
        }
        if label == StructureLabel::Separable {
            let listed = matches!(&s.evidence, DumpEvidence::SeparatingSubsets(v) if v.contains(&s.min_entropy_subset));
            if !listed || parse_subset(&s.min_entropy_subset).is_err() {
                report.stored_mismatches.push(s.index);
            }
        }
    }

    let spec = cfg.chain_spec(dump.n, dump.sigma_p_nm);
    let realization = ChainRealization::from_positions(dump.positions_nm.clone(), &spec)?;
    let mut manifolds: Vec<usize> = dump.states.iter().map(|s| s.manifold).collect();
    manifolds.sort_unstable();
    manifolds.dedup();
    let fresh = analyze_chain(&spec, realization, &th, Some(&manifolds))?;
    for s in &dump.states {
        let same = fresh.state(s.index).is_some_and(|f| {
            f.class.label == s.class && to_dump_evidence(&f.class.evidence) == s.evidence
        });
        if !same {
            report.recomputed_mismatches.push(s.index);
        }
    }
    Ok(report)
}
