//! Synthetic community networks.
//!
//! Networks are undirected, simple, and frozen once built. Two generators are
//! provided: a mutual-consent edge-formation process in which both endpoints
//! score a candidate edge by attribute similarity, their own degree, and the
//! current graph distance between them, and a plain Erdős–Rényi sampler used
//! as a fallback in tests.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::seed::rng_from_seed;

/// Default community size.
pub const DEFAULT_NODES: usize = 15;

#[derive(Debug, Clone, PartialEq)]
pub struct CommunityGraph {
    n: usize,
    adj: Vec<BTreeSet<usize>>,
    attrs: Vec<f64>,
}

/// Coefficients of the edge-utility used by [`form_network`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FormationConfig {
    pub rounds: usize,
    pub theta_homophily: f64,
    pub theta_degree: f64,
    pub theta_distance: f64,
    pub theta_base: f64,
    pub seed: u64,
}

impl Default for FormationConfig {
    fn default() -> Self {
        Self {
            rounds: 400,
            theta_homophily: 1.0,
            theta_degree: 0.1,
            theta_distance: 0.02,
            theta_base: 0.6,
            seed: 0,
        }
    }
}

impl FormationConfig {
    fn validate(&self) -> Result<()> {
        let coeffs = [
            self.theta_homophily,
            self.theta_degree,
            self.theta_distance,
            self.theta_base,
        ];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("formation coefficients must be finite"));
        }
        Ok(())
    }
}

impl CommunityGraph {
    /// An edgeless graph on `n` nodes with all attributes zero.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            adj: vec![BTreeSet::new(); n],
            attrs: vec![0.0; n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(n);
        for &(i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Self::empty(n);
        for i in 0..n {
            for j in (i + 1)..n {
                g.adj[i].insert(j);
                g.adj[j].insert(i);
            }
        }
        g
    }

    pub fn with_attrs(mut self, attrs: Vec<f64>) -> Result<Self> {
        if attrs.len() != self.n {
            return Err(Error::ShapeMismatch {
                expected: self.n,
                got: attrs.len(),
            });
        }
        if attrs.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid("node attributes must lie in [0,1]"));
        }
        self.attrs = attrs;
        Ok(self)
    }

    fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Err(invalid(format!("self-loop on node {i}")));
        }
        self.adj[i].insert(j);
        self.adj[j].insert(i);
        Ok(())
    }

    fn check(&self, v: usize) -> Result<()> {
        if v >= self.n {
            Err(Error::NodeOutOfRange {
                index: v,
                n: self.n,
            })
        } else {
            Ok(())
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn attrs(&self) -> &[f64] {
        &self.attrs
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && self.adj[i].contains(&j)
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, nb)| nb.range((i + 1)..).map(move |&j| (i, j)))
            .collect()
    }

    /// The open neighborhood N(v).
    pub fn neighbors(&self, v: usize) -> Result<&BTreeSet<usize>> {
        self.check(v)?;
        Ok(&self.adj[v])
    }

    pub fn is_isolated(&self, v: usize) -> bool {
        self.adj[v].is_empty()
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n).filter(|&v| self.is_isolated(v)).collect()
    }

    /// Row-major 0/1 adjacency matrix of length n².
    pub fn flatten_adjacency(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for (i, nb) in self.adj.iter().enumerate() {
            for &j in nb {
                out[i * self.n + j] = 1.0;
            }
        }
        out
    }

    /// Hop distance between `src` and `dst`, or `None` when disconnected.
    pub fn distance(&self, src: usize, dst: usize) -> Option<usize> {
        if src == dst {
            return Some(0);
        }
        let mut dist = vec![usize::MAX; self.n];
        let mut queue = VecDeque::from([src]);
        dist[src] = 0;
        while let Some(u) = queue.pop_front() {
            for &w in &self.adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    if w == dst {
                        return Some(dist[w]);
                    }
                    queue.push_back(w);
                }
            }
        }
        None
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GraphFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        file.try_into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// On-disk form: `{"n": int, "edges": [[i,j],...], "attrs": [float,...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<[usize; 2]>,
    attrs: Vec<f64>,
}

impl From<&CommunityGraph> for GraphFile {
    fn from(g: &CommunityGraph) -> Self {
        Self {
            n: g.n,
            edges: g.edges().into_iter().map(|(i, j)| [i, j]).collect(),
            attrs: g.attrs.clone(),
        }
    }
}

impl TryFrom<GraphFile> for CommunityGraph {
    type Error = Error;

    fn try_from(file: GraphFile) -> Result<Self> {
        let edges: Vec<(usize, usize)> = file.edges.iter().map(|e| (e[0], e[1])).collect();
        CommunityGraph::from_edges(file.n, &edges)?.with_attrs(file.attrs)
    }
}

fn edge_utility(cfg: &FormationConfig, g: &CommunityGraph, me: usize, other: usize, dist: f64) -> f64 {
    cfg.theta_base
        - cfg.theta_homophily * (g.attrs[me] - g.attrs[other]).abs()
        - cfg.theta_degree * g.degree(me) as f64
        - cfg.theta_distance * dist
}

/// Builds a network by repeated mutual-consent edge proposals.
///
/// Each round draws a uniformly random non-adjacent pair; the edge forms iff
/// both endpoints see strictly positive utility. Attributes are drawn
/// uniformly on [0,1] before any proposal, so the proposal stream for a fixed
/// seed is a prefix-stable sequence and more rounds never remove edges.
pub fn form_network(cfg: &FormationConfig, n: usize) -> Result<CommunityGraph> {
    if n < 2 {
        return Err(invalid(format!("network needs at least 2 nodes, got {n}")));
    }
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let attrs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut g = CommunityGraph::empty(n).with_attrs(attrs)?;

    for _ in 0..cfg.rounds {
        let candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
        if candidates.is_empty() {
            break;
        }
        let (i, j) = candidates[rng.random_range(0..candidates.len())];
        let dist = g.distance(i, j).map_or(n, |d| d.min(n)) as f64;
        if edge_utility(cfg, &g, i, j, dist) > 0.0 && edge_utility(cfg, &g, j, i, dist) > 0.0 {
            g.add_edge(i, j)?;
        }
    }
    Ok(g)
}

/// G(n, p): each unordered pair is an edge independently with probability `p`.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<CommunityGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("edge probability {p} outside [0,1]")));
    }
    let mut rng = rng_from_seed(seed);
    let attrs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let mut g = CommunityGraph::empty(n).with_attrs(attrs)?;
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn symmetric_no_loops(g: &CommunityGraph) -> bool {
        let a = g.flatten_adjacency();
        let n = g.n();
        (0..n).all(|i| a[i * n + i] == 0.0 && (0..n).all(|j| a[i * n + j] == a[j * n + i]))
    }

    #[test]
    fn negative_base_refuses_every_edge() {
        let cfg = FormationConfig {
            rounds: 100,
            theta_base: -1.0,
            theta_homophily: 0.3,
            theta_degree: 0.5,
            theta_distance: 0.0,
            seed: 3,
        };
        let g = form_network(&cfg, 10).unwrap();
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn strong_base_yields_complete_graph() {
        let n = 4;
        let complete = (0..1000u64)
            .filter(|&seed| {
                let cfg = FormationConfig {
                    rounds: n * (n - 1) * 10,
                    theta_base: 10.0,
                    theta_homophily: 0.0,
                    theta_degree: 0.0,
                    theta_distance: 0.0,
                    seed,
                };
                form_network(&cfg, n).unwrap().edge_count() == n * (n - 1) / 2
            })
            .count();
        assert!(complete >= 990, "{complete}/1000 complete");
    }

    #[test]
    fn formation_is_deterministic() {
        let cfg = FormationConfig {
            seed: 42,
            ..Default::default()
        };
        let a = form_network(&cfg, 15).unwrap();
        let b = form_network(&cfg, 15).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn formation_rejects_tiny_graphs() {
        assert!(form_network(&FormationConfig::default(), 1).is_err());
        assert!(form_network(&FormationConfig::default(), 0).is_err());
    }

    #[test]
    fn formation_rejects_nonfinite_coefficients() {
        let cfg = FormationConfig {
            theta_degree: f64::NAN,
            ..Default::default()
        };
        assert!(form_network(&cfg, 5).is_err());
    }

    #[test]
    fn edges_only_grow_with_rounds() {
        for seed in 0..20 {
            let mut prev: BTreeSet<(usize, usize)> = BTreeSet::new();
            for rounds in [0, 10, 50, 100, 200, 400, 800] {
                let cfg = FormationConfig {
                    rounds,
                    seed,
                    ..Default::default()
                };
                let g = form_network(&cfg, 15).unwrap();
                let edges: BTreeSet<_> = g.edges().into_iter().collect();
                assert!(prev.is_subset(&edges));
                assert!(symmetric_no_loops(&g));
                prev = edges;
            }
        }
    }

    #[test]
    fn default_networks_are_sparse_with_few_isolates() {
        let mut total_edges = 0;
        for seed in 0..200 {
            let cfg = FormationConfig {
                seed,
                ..Default::default()
            };
            let g = form_network(&cfg, DEFAULT_NODES).unwrap();
            assert!(g.isolated_nodes().len() <= 4, "seed {seed}");
            total_edges += g.edge_count();
        }
        let mean = total_edges as f64 / 200.0;
        // sparse: well below the 105 possible edges
        assert!(mean > 5.0 && mean < 40.0, "mean edges {mean}");
    }

    #[test]
    fn neighbors_of_path_middle() {
        let g = CommunityGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.neighbors(1).unwrap().iter().copied().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn neighbors_of_isolated_and_complete() {
        let g = CommunityGraph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(g.neighbors(2).unwrap().is_empty());
        let k4 = CommunityGraph::complete(4);
        assert_eq!(k4.neighbors(0).unwrap().iter().copied().collect::<Vec<_>>(), vec![1, 2, 3]);
        assert!(matches!(k4.neighbors(4), Err(Error::NodeOutOfRange { index: 4, n: 4 })));
    }

    #[test]
    fn flatten_small_graphs() {
        assert_eq!(CommunityGraph::empty(2).flatten_adjacency(), vec![0.0; 4]);
        let single = CommunityGraph::from_edges(2, &[(0, 1)]).unwrap();
        assert_eq!(single.flatten_adjacency(), vec![0.0, 1.0, 1.0, 0.0]);
        let tri = CommunityGraph::complete(3).flatten_adjacency();
        assert_eq!(tri.iter().filter(|&&x| x == 1.0).count(), 6);
        assert!((0..3).all(|i| tri[i * 3 + i] == 0.0));
    }

    #[test]
    fn erdos_renyi_extremes() {
        assert_eq!(erdos_renyi(10, 0.0, 1).unwrap().edge_count(), 0);
        assert_eq!(erdos_renyi(10, 1.0, 1).unwrap().edge_count(), 45);
        assert!(erdos_renyi(10, 1.5, 1).is_err());
        assert!(erdos_renyi(10, -0.1, 1).is_err());
    }

    #[test]
    fn erdos_renyi_mean_edge_count() {
        let trials = 1000;
        let counts: Vec<f64> = (0..trials)
            .map(|s| erdos_renyi(15, 0.2, s).unwrap().edge_count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / trials as f64;
        // binomial(105, 0.2)
        let se = (105.0 * 0.2 * 0.8 / trials as f64).sqrt();
        assert!((mean - 21.0).abs() < 3.0 * se, "mean {mean}");
    }

    #[test]
    fn json_round_trip() {
        let g = form_network(&FormationConfig { seed: 9, ..Default::default() }, 15).unwrap();
        let back = CommunityGraph::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(g, back);
        let v: serde_json::Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        assert_eq!(v["n"], 15);
        assert!(v["edges"].is_array());
        assert_eq!(v["attrs"].as_array().unwrap().len(), 15);
    }

    #[test]
    fn json_rejects_bad_edges() {
        assert!(CommunityGraph::from_json(r#"{"n":2,"edges":[[0,0]],"attrs":[0.1,0.2]}"#).is_err());
        assert!(CommunityGraph::from_json(r#"{"n":2,"edges":[[0,5]],"attrs":[0.1,0.2]}"#).is_err());
    }

    #[test]
    fn distances() {
        let g = CommunityGraph::from_edges(4, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(g.distance(0, 2), Some(2));
        assert_eq!(g.distance(0, 3), None);
        assert_eq!(g.distance(3, 3), Some(0));
    }
}
