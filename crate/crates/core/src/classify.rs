//! Entanglement-structure classification from thresholded entropies and concurrence graphs.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits;
use crate::entanglement::EntanglementProfile;

/// Thresholds and variants used by [`classify`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Entropies at or below this value count as vanishing.
    pub entropy: f64,
    /// Edges require a concurrence strictly above this value.
    pub concurrence: f64,
    /// Require the graph to be exactly a path (instead of merely containing a spanning one).
    pub strict_path: bool,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            entropy: 0.01,
            concurrence: 0.005,
            strict_path: false,
        }
    }
}

/// Undirected graph on the spins with an edge wherever `C_jk > ε_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcurrenceGraph {
    n_nodes: usize,
    /// `(j, k, C_jk)` with `j < k`, lexicographic.
    edges: Vec<(usize, usize, f64)>,
    adjacency: Vec<u32>,
}

impl ConcurrenceGraph {
    /// Builds a graph directly from an edge list (0-based nodes).
    pub fn from_edges(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut adjacency = vec![0u32; n_nodes];
        let mut list: Vec<(usize, usize, f64)> = Vec::new();
        for &(a, b, w) in edges {
            if a == b || a >= n_nodes || b >= n_nodes {
                continue;
            }
            let (j, k) = (a.min(b), a.max(b));
            if adjacency[j] >> k & 1 == 1 {
                continue;
            }
            adjacency[j] |= 1 << k;
            adjacency[k] |= 1 << j;
            list.push((j, k, w));
        }
        list.sort_by_key(|e| (e.0, e.1));
        ConcurrenceGraph {
            n_nodes,
            edges: list,
            adjacency,
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn has_edge(&self, j: usize, k: usize) -> bool {
        self.adjacency[j] >> k & 1 == 1
    }

    pub fn degree(&self, j: usize) -> usize {
        self.adjacency[j].count_ones() as usize
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n_nodes * self.n_nodes.saturating_sub(1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut seen = 0u32;
        let mut out = Vec::new();
        for start in 0..self.n_nodes {
            if seen >> start & 1 == 1 {
                continue;
            }
            let mut comp = 1u32 << start;
            let mut frontier = comp;
            while frontier != 0 {
                let v = frontier.trailing_zeros() as usize;
                frontier &= frontier - 1;
                let fresh = self.adjacency[v] & !comp;
                comp |= fresh;
                frontier |= fresh;
            }
            seen |= comp;
            out.push(bits::qubits(comp));
        }
        out
    }

    /// True if every node has degree ≤ 2 and the edges form one simple path through all nodes.
    pub fn is_exactly_path(&self) -> bool {
        self.n_nodes >= 1
            && self.edges.len() == self.n_nodes - 1
            && (0..self.n_nodes).all(|j| self.degree(j) <= 2)
            && self.components().len() == 1
    }

    /// Graphviz rendering: nodes `1..=N`, edges labelled with the concurrence to 3 decimals.
    pub fn to_dot(&self, name: &str, comment: Option<&str>) -> String {
        let mut out = format!("graph {name} {{\n");
        if let Some(c) = comment {
            for line in c.lines() {
                out.push_str(&format!("  // {line}\n"));
            }
        }
        for j in 0..self.n_nodes {
            out.push_str(&format!("  {};\n", j + 1));
        }
        for &(j, k, w) in &self.edges {
            out.push_str(&format!(
                "  {} -- {} [label=\"{w:.3}\", weight={w:.3}];\n",
                j + 1,
                k + 1
            ));
        }
        out.push_str("}\n");
        out
    }
}

/// Concurrence graph of a profile: edge `(j, k)` iff `C_jk > threshold`.
pub fn build_graph(profile: &EntanglementProfile, threshold: f64) -> ConcurrenceGraph {
    graph_from_matrix(profile.n_qubits(), profile.concurrence_matrix(), threshold)
}

/// Same as [`build_graph`] from a row-major `N × N` concurrence matrix.
pub fn graph_from_matrix(n: usize, concurrences: &[f64], threshold: f64) -> ConcurrenceGraph {
    let mut edges = Vec::new();
    for j in 0..n {
        for k in (j + 1)..n {
            let c = concurrences[j * n + k];
            if c > threshold {
                edges.push((j, k, c));
            }
        }
    }
    ConcurrenceGraph::from_edges(n, &edges)
}

/// Exact Hamiltonian-path search by backtracking.
///
/// Start nodes and extensions are tried in increasing index order, so the
/// returned witness is the lexicographically smallest spanning path.
pub fn spanning_path(g: &ConcurrenceGraph) -> Option<Vec<usize>> {
    fn extend(g: &ConcurrenceGraph, path: &mut Vec<usize>, visited: u32) -> bool {
        if path.len() == g.n_nodes {
            return true;
        }
        let last = *path.last().expect("path starts non-empty");
        let mut options = g.adjacency[last] & !visited;
        while options != 0 {
            let next = options.trailing_zeros() as usize;
            options &= options - 1;
            path.push(next);
            if extend(g, path, visited | 1 << next) {
                return true;
            }
            path.pop();
        }
        false
    }
    if g.n_nodes == 0 {
        return None;
    }
    if g.components().len() > 1 {
        return None;
    }
    let mut path = Vec::with_capacity(g.n_nodes);
    for start in 0..g.n_nodes {
        path.clear();
        path.push(start);
        if extend(g, &mut path, 1 << start) {
            return Some(path);
        }
    }
    None
}

/// The structure classes an eigenstate can be assigned to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StructureLabel {
    #[serde(rename = "W-like")]
    WLike,
    #[serde(rename = "GHZ-like")]
    GhzLike,
    Path,
    Cluster,
    Separable,
    OtherConnected,
}

impl StructureLabel {
    pub const ALL: [StructureLabel; 6] = [
        StructureLabel::WLike,
        StructureLabel::GhzLike,
        StructureLabel::Path,
        StructureLabel::Cluster,
        StructureLabel::Separable,
        StructureLabel::OtherConnected,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StructureLabel::WLike => "W-like",
            StructureLabel::GhzLike => "GHZ-like",
            StructureLabel::Path => "Path",
            StructureLabel::Cluster => "Cluster",
            StructureLabel::Separable => "Separable",
            StructureLabel::OtherConnected => "OtherConnected",
        }
    }

    /// Position in [`StructureLabel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for StructureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructureLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StructureLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown structure class `{s}`"))
    }
}

/// Supporting data for a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Canonical masks of every bipartition whose entropy is at or below the threshold.
    SeparatingSubsets(Vec<u32>),
    /// Connected components of the concurrence graph (0-based nodes).
    Components(Vec<Vec<usize>>),
    /// One spanning path (0-based nodes).
    SpanningPath(Vec<usize>),
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureClass {
    pub label: StructureLabel,
    pub evidence: Evidence,
    /// The state sits in a degenerate eigenspace; its basis is solver-dependent.
    pub degenerate: bool,
}

impl StructureClass {
    pub fn with_degenerate(mut self, degenerate: bool) -> Self {
        self.degenerate = degenerate;
        self
    }
}

/// Decision ladder, first match wins: Separable, W-like (complete graph),
/// GHZ-like (empty graph), Cluster (disconnected), Path (spanning path), OtherConnected.
pub fn classify(profile: &EntanglementProfile, th: &Thresholds) -> StructureClass {
    let verdict = |label, evidence| StructureClass {
        label,
        evidence,
        degenerate: false,
    };
    if profile.min_entropy().0 <= th.entropy {
        let subsets = profile
            .entropies()
            .filter(|&(_, e)| e <= th.entropy)
            .map(|(m, _)| m)
            .collect();
        return verdict(
            StructureLabel::Separable,
            Evidence::SeparatingSubsets(subsets),
        );
    }
    classify_graph(&build_graph(profile, th.concurrence), th)
}

/// The graph-based rungs of [`classify`], for states already known to be non-separable.
pub fn classify_graph(g: &ConcurrenceGraph, th: &Thresholds) -> StructureClass {
    let verdict = |label, evidence| StructureClass {
        label,
        evidence,
        degenerate: false,
    };
    if g.is_complete() {
        return verdict(StructureLabel::WLike, Evidence::None);
    }
    if g.is_empty() {
        return verdict(StructureLabel::GhzLike, Evidence::None);
    }
    let components = g.components();
    if components.len() > 1 {
        return verdict(StructureLabel::Cluster, Evidence::Components(components));
    }
    match spanning_path(g) {
        Some(path) if !th.strict_path || g.is_exactly_path() => {
            verdict(StructureLabel::Path, Evidence::SpanningPath(path))
        }
        _ => verdict(StructureLabel::OtherConnected, Evidence::None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{profile, reference_state, ReferenceState};

    fn hand_profile(n: usize, entropy: f64, edges: &[(usize, usize, f64)]) -> EntanglementProfile {
        let mut conc = vec![0.0; n * n];
        for &(j, k, c) in edges {
            conc[j * n + k] = c;
            conc[k * n + j] = c;
        }
        EntanglementProfile::from_parts(n, vec![entropy; (1 << (n - 1)) - 1], conc).unwrap()
    }

    #[test]
    fn w6_graph_is_complete() {
        let p = profile(&reference_state(&ReferenceState::W { n: 6 }).unwrap()).unwrap();
        let g = build_graph(&p, 0.005);
        assert!(g.is_complete());
        assert_eq!(g.edges().len(), 15);
        assert!(g.edges().iter().all(|e| (e.2 - 1.0 / 3.0).abs() < 1e-10));
    }

    #[test]
    fn ghz6_graph_is_empty() {
        let p = profile(&reference_state(&ReferenceState::Ghz { n: 6 }).unwrap()).unwrap();
        assert!(build_graph(&p, 0.005).is_empty());
    }

    #[test]
    fn threshold_is_strict() {
        let p = hand_profile(4, 0.5, &[(0, 1, 0.005), (1, 2, 0.005), (2, 3, 0.005)]);
        assert!(build_graph(&p, 0.005).is_empty());
        assert_eq!(build_graph(&p, 0.004).edges().len(), 3);
    }

    #[test]
    fn path_graph_witness() {
        let g = ConcurrenceGraph::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]);
        assert_eq!(spanning_path(&g), Some(vec![0, 1, 2, 3]));
        assert!(g.is_exactly_path());
    }

    #[test]
    fn disjoint_edges_have_no_spanning_path() {
        let g = ConcurrenceGraph::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)]);
        assert_eq!(spanning_path(&g), None);
        assert_eq!(g.components(), vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn complete_graph_has_spanning_path() {
        let mut edges = Vec::new();
        for j in 0..5 {
            for k in (j + 1)..5 {
                edges.push((j, k, 1.0));
            }
        }
        let g = ConcurrenceGraph::from_edges(5, &edges);
        assert_eq!(spanning_path(&g), Some(vec![0, 1, 2, 3, 4]));
        assert!(!g.is_exactly_path());
    }

    #[test]
    fn star_is_other_connected() {
        let p = hand_profile(4, 0.5, &[(0, 1, 0.1), (0, 2, 0.1), (0, 3, 0.1)]);
        let c = classify(&p, &Thresholds::default());
        assert_eq!(c.label, StructureLabel::OtherConnected);
    }

    #[test]
    fn hand_built_path_on_three_spins() {
        let p = hand_profile(3, 0.5, &[(0, 1, 0.2), (1, 2, 0.2)]);
        let c = classify(&p, &Thresholds::default());
        assert_eq!(c.label, StructureLabel::Path);
        assert_eq!(c.evidence, Evidence::SpanningPath(vec![0, 1, 2]));
    }

    #[test]
    fn strict_path_variant() {
        // path 0-1-2-3 plus chord 0-2: contains a spanning path but is not a path
        let p = hand_profile(
            4,
            0.5,
            &[(0, 1, 0.1), (1, 2, 0.1), (2, 3, 0.1), (0, 2, 0.1)],
        );
        let loose = classify(&p, &Thresholds::default());
        assert_eq!(loose.label, StructureLabel::Path);
        let strict = classify(
            &p,
            &Thresholds {
                strict_path: true,
                ..Default::default()
            },
        );
        assert_eq!(strict.label, StructureLabel::OtherConnected);
    }

    #[test]
    fn cluster_reports_components() {
        let p = hand_profile(4, 0.5, &[(0, 1, 0.1), (2, 3, 0.1)]);
        let c = classify(&p, &Thresholds::default());
        assert_eq!(c.label, StructureLabel::Cluster);
        assert_eq!(
            c.evidence,
            Evidence::Components(vec![vec![0, 1], vec![2, 3]])
        );
    }

    #[test]
    fn separable_takes_precedence() {
        let mut edges = Vec::new();
        for j in 0..3 {
            for k in (j + 1)..3 {
                edges.push((j, k, 0.5));
            }
        }
        let p = hand_profile(3, 0.009, &edges);
        let c = classify(&p, &Thresholds::default());
        assert_eq!(c.label, StructureLabel::Separable);
        assert_eq!(
            c.evidence,
            Evidence::SeparatingSubsets(vec![0b001, 0b011, 0b101])
        );
    }

    #[test]
    fn reference_families() {
        let th = Thresholds::default();
        let w7 = profile(&reference_state(&ReferenceState::W { n: 7 }).unwrap()).unwrap();
        assert_eq!(classify(&w7, &th).label, StructureLabel::WLike);
        let ghz7 = profile(&reference_state(&ReferenceState::Ghz { n: 7 }).unwrap()).unwrap();
        assert_eq!(classify(&ghz7, &th).label, StructureLabel::GhzLike);
        let product = profile(&crate::entanglement::StateVector::basis(4, 3).unwrap()).unwrap();
        assert_eq!(classify(&product, &th).label, StructureLabel::Separable);
    }

    #[test]
    fn dot_output() {
        let g = ConcurrenceGraph::from_edges(3, &[(0, 2, 0.66666)]);
        let dot = g.to_dot("state_0001", Some("class=Path"));
        assert_eq!(
            dot,
            "graph state_0001 {\n  // class=Path\n  1;\n  2;\n  3;\n  1 -- 3 [label=\"0.667\", weight=0.667];\n}\n"
        );
    }

    #[test]
    fn labels_round_trip_through_strings() {
        for l in StructureLabel::ALL {
            assert_eq!(l.as_str().parse::<StructureLabel>().unwrap(), l);
            assert_eq!(StructureLabel::ALL[l.index()], l);
        }
        assert!("w-like".parse::<StructureLabel>().is_err());
    }
}
