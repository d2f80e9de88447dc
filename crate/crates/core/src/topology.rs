//! Coupling graphs of resonator arrays.
//!
//! Sites are resonators, edges are capacitive couplings. The canonical device
//! is the twelve-site kagome star: six inner resonators forming a hexagon
//! (sites 0-5 in cyclic order) and six outer resonators (sites 6-11). Outer
//! site `6 + k` shares a three-way capacitor with inner sites `k` and `k + 1`,
//! so the graph is six corner-sharing triangles `{k, k+1 mod 6, 6+k}`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::SymMatrix;

/// Number of sites in the kagome star.
pub const KAGOME_STAR_SITES: usize = 12;

/// Port label of the drive port.
pub const INPUT_PORT: &str = "input";
/// Port label of the detection port.
pub const OUTPUT_PORT: &str = "output";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TopologyError {
    #[error("site {site} out of range for a graph with {n_sites} sites")]
    IndexOutOfRange { site: usize, n_sites: usize },
    #[error("self edge on site {0}")]
    SelfEdge(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph must contain at least one site")]
    Empty,
}

/// Index of a resonator within a [`CouplingGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub usize);

impl SiteId {
    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<usize> for SiteId {
    fn from(i: usize) -> Self {
        SiteId(i)
    }
}

/// Validated, immutable coupling graph.
///
/// Edges are stored normalized (`a < b`) and sorted, so two graphs with the
/// same edge set compare equal regardless of input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphFile", into = "GraphFile")]
pub struct CouplingGraph {
    n_sites: usize,
    edges: Vec<(SiteId, SiteId)>,
    ports: BTreeMap<String, SiteId>,
}

/// Wire form of a graph: `{"n_sites": int, "edges": [[a,b],...], "ports": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub n_sites: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub ports: BTreeMap<String, usize>,
}

impl TryFrom<GraphFile> for CouplingGraph {
    type Error = TopologyError;

    fn try_from(file: GraphFile) -> Result<Self, Self::Error> {
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        build_custom(file.n_sites, &edges, &file.ports)
    }
}

impl From<CouplingGraph> for GraphFile {
    fn from(g: CouplingGraph) -> Self {
        GraphFile {
            n_sites: g.n_sites,
            edges: g.edges.iter().map(|&(a, b)| [a.0, b.0]).collect(),
            ports: g.ports.iter().map(|(k, v)| (k.clone(), v.0)).collect(),
        }
    }
}

/// The canonical twelve-resonator kagome star with ports on outer sites 6 and 9
/// (opposite outer resonators).
pub fn build_kagome_star() -> CouplingGraph {
    let mut edges = Vec::with_capacity(18);
    for k in 0..6 {
        let next = (k + 1) % 6;
        let outer = 6 + k;
        edges.push((k, next));
        edges.push((k, outer));
        edges.push((next, outer));
    }
    let ports = BTreeMap::from([(INPUT_PORT.to_string(), 6), (OUTPUT_PORT.to_string(), 9)]);
    build_custom(KAGOME_STAR_SITES, &edges, &ports).expect("kagome star construction is valid")
}

/// Build and validate an arbitrary coupling graph.
pub fn build_custom(
    n_sites: usize,
    edges: &[(usize, usize)],
    ports: &BTreeMap<String, usize>,
) -> Result<CouplingGraph, TopologyError> {
    if n_sites == 0 {
        return Err(TopologyError::Empty);
    }
    let check = |site: usize| {
        if site < n_sites {
            Ok(SiteId(site))
        } else {
            Err(TopologyError::IndexOutOfRange { site, n_sites })
        }
    };

    let mut seen = BTreeSet::new();
    for &(a, b) in edges {
        check(a)?;
        check(b)?;
        if a == b {
            return Err(TopologyError::SelfEdge(a));
        }
        let key = (a.min(b), a.max(b));
        if !seen.insert(key) {
            return Err(TopologyError::DuplicateEdge(key.0, key.1));
        }
    }

    let ports = ports
        .iter()
        .map(|(label, &site)| Ok((label.clone(), check(site)?)))
        .collect::<Result<BTreeMap<_, _>, TopologyError>>()?;

    Ok(CouplingGraph {
        n_sites,
        edges: seen.into_iter().map(|(a, b)| (SiteId(a), SiteId(b))).collect(),
        ports,
    })
}

impl CouplingGraph {
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Normalized (`a < b`), sorted edge list.
    pub fn edges(&self) -> &[(SiteId, SiteId)] {
        &self.edges
    }

    pub fn ports(&self) -> &BTreeMap<String, SiteId> {
        &self.ports
    }

    pub fn port(&self, label: &str) -> Option<SiteId> {
        self.ports.get(label).copied()
    }

    pub fn has_edge(&self, a: SiteId, b: SiteId) -> bool {
        let key = (a.min(b), a.max(b));
        self.edges.binary_search(&key).is_ok()
    }

    pub fn degree(&self, site: SiteId) -> usize {
        self.edges.iter().filter(|&&(a, b)| a == site || b == site).count()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n_sites];
        for &(a, b) in &self.edges {
            deg[a.0] += 1;
            deg[b.0] += 1;
        }
        deg
    }

    /// Boundary resonators: sites whose degree is below the maximum degree.
    ///
    /// For the kagome star these are the six outer sites. A regular graph
    /// (every site with the same degree) has no boundary.
    pub fn edge_sites(&self) -> Vec<SiteId> {
        let deg = self.degrees();
        let max = deg.iter().copied().max().unwrap_or(0);
        (0..self.n_sites).filter(|&i| deg[i] < max).map(SiteId).collect()
    }

    /// Symmetric 0/1 adjacency matrix with zero diagonal.
    pub fn adjacency_matrix(&self) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.n_sites);
        for &(a, b) in &self.edges {
            m.set_sym(a.0, b.0, 1.0);
        }
        m
    }

    /// The graph with every site relabeled through `map` (ports follow their sites).
    pub fn relabeled(&self, map: impl Fn(SiteId) -> SiteId) -> Result<CouplingGraph, TopologyError> {
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (map(a).0, map(b).0)).collect();
        let ports = self.ports.iter().map(|(k, &v)| (k.clone(), map(v).0)).collect();
        build_custom(self.n_sites, &edges, &ports)
    }

    /// Induced subgraph on `keep`, with sites renumbered in ascending order.
    pub fn induced_subgraph(&self, keep: &[SiteId]) -> Result<CouplingGraph, TopologyError> {
        let keep: BTreeSet<SiteId> = keep.iter().copied().collect();
        let index: BTreeMap<SiteId, usize> = keep.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let edges: Vec<_> = self
            .edges
            .iter()
            .filter_map(|(a, b)| Some((*index.get(a)?, *index.get(b)?)))
            .collect();
        build_custom(keep.len(), &edges, &BTreeMap::new())
    }
}

/// Order-6 rotation of the kagome star: `i_k -> i_{k+1}`, `o_k -> o_{k+1}`.
pub fn kagome_rotation(site: SiteId) -> SiteId {
    let i = site.0;
    if i < 6 {
        SiteId((i + 1) % 6)
    } else {
        SiteId(6 + (i - 6 + 1) % 6)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kagome_star_shape() {
        let g = build_kagome_star();
        assert_eq!(g.n_sites(), 12);
        assert_eq!(g.edges().len(), 18);
        let mut deg = g.degrees();
        assert_eq!(&deg[..6], &[4; 6]);
        assert_eq!(&deg[6..], &[2; 6]);
        deg.sort_unstable();
        assert_eq!(deg, [2, 2, 2, 2, 2, 2, 4, 4, 4, 4, 4, 4]);
        assert!(g.has_edge(SiteId(0), SiteId(1)));
        assert!(!g.has_edge(SiteId(0), SiteId(3)));
        assert_eq!(g.port(INPUT_PORT), Some(SiteId(6)));
        assert_eq!(g.port(OUTPUT_PORT), Some(SiteId(9)));
    }

    #[test]
    fn six_triangles() {
        let g = build_kagome_star();
        for k in 0..6 {
            let tri = [SiteId(k), SiteId((k + 1) % 6), SiteId(6 + k)];
            for a in 0..3 {
                for b in (a + 1)..3 {
                    assert!(g.has_edge(tri[a], tri[b]), "triangle {k}");
                }
            }
        }
    }

    #[test]
    fn custom_dimer_and_errors() {
        let none = BTreeMap::new();
        let dimer = build_custom(2, &[(0, 1)], &none).unwrap();
        assert_eq!(dimer.edges(), &[(SiteId(0), SiteId(1))]);
        assert_eq!(build_custom(3, &[(0, 0)], &none), Err(TopologyError::SelfEdge(0)));
        assert_eq!(
            build_custom(3, &[(0, 1), (1, 0)], &none),
            Err(TopologyError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            build_custom(3, &[(0, 3)], &none),
            Err(TopologyError::IndexOutOfRange { site: 3, n_sites: 3 })
        );
        let bad_port = BTreeMap::from([("input".to_string(), 5)]);
        assert!(matches!(
            build_custom(2, &[(0, 1)], &bad_port),
            Err(TopologyError::IndexOutOfRange { site: 5, .. })
        ));
        assert_eq!(build_custom(0, &[], &none), Err(TopologyError::Empty));
    }

    #[test]
    fn custom_matches_canonical_star() {
        // Hand-written edge list in a scrambled order and orientation.
        let mut edges = Vec::new();
        for k in (0..6).rev() {
            edges.push((6 + k, k));
            edges.push(((k + 1) % 6, 6 + k));
            edges.push(((k + 1) % 6, k));
        }
        let ports = BTreeMap::from([("input".to_string(), 6), ("output".to_string(), 9)]);
        let custom = build_custom(12, &edges, &ports).unwrap();
        assert_eq!(custom, build_kagome_star());
    }

    #[test]
    fn adjacency_identities() {
        let dimer = build_custom(2, &[(0, 1)], &BTreeMap::new()).unwrap();
        let a = dimer.adjacency_matrix();
        assert_eq!(a.to_rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let g = build_kagome_star();
        let a = g.adjacency_matrix();
        assert!(a.is_symmetric(0.0));
        let a2 = a.matmul(&a);
        assert_eq!(a2.trace(), 36.0);
        for (i, d) in g.degrees().into_iter().enumerate() {
            let row_sum: f64 = (0..12).map(|j| a.get(i, j)).sum();
            assert_eq!(row_sum, d as f64);
            assert_eq!(a.get(i, i), 0.0);
        }
    }

    #[test]
    fn inner_sites_form_a_hexagon() {
        let g = build_kagome_star();
        let inner: Vec<SiteId> = (0..6).map(SiteId).collect();
        let hex = g.induced_subgraph(&inner).unwrap();
        assert_eq!(hex.edges().len(), 6);
        assert!(hex.degrees().iter().all(|&d| d == 2));
        // connected: walk the cycle
        let mut visited = vec![SiteId(0)];
        let mut prev = SiteId(0);
        let mut cur = SiteId(1);
        while cur != SiteId(0) {
            visited.push(cur);
            let next = (0..6)
                .map(SiteId)
                .find(|&s| s != prev && hex.has_edge(cur, s))
                .unwrap();
            prev = cur;
            cur = next;
        }
        assert_eq!(visited.len(), 6);
    }

    #[test]
    fn rotation_is_an_automorphism() {
        let g = build_kagome_star();
        let rotated = g.relabeled(kagome_rotation).unwrap();
        assert_eq!(rotated.edges(), g.edges());
        assert_eq!(g.edge_sites(), (6..12).map(SiteId).collect::<Vec<_>>());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = build_kagome_star();
        let json = serde_json::to_string(&g).unwrap();
        assert!(json.starts_with("{\"n_sites\":12,\"edges\":[[0,1],"));
        assert!(json.ends_with("\"ports\":{\"input\":6,\"output\":9}}"));
        let back: CouplingGraph = serde_json::from_str(&json).unwrap();
        assert_eq!(back, g);

        let bad = r#"{"n_sites": 3, "edges": [[1,1]], "ports": {}}"#;
        assert!(serde_json::from_str::<CouplingGraph>(bad).is_err());
    }
}
