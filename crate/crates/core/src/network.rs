//! Influence networks derived from filter ensembles.
//!
//! Entry `(i, j)` of an adjacency matrix is the excitation of node `i` by
//! node `j`, i.e. a directed edge `j -> i`. Self-loops are kept in the
//! matrix but ignored by edge analytics, and reported on their own through
//! [`InfluenceNetwork::self_excitation`].

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{NodeEnsemble, ALPHA};

/// Edges lighter than this are dropped before computing betweenness.
pub const BETWEENNESS_EDGE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceNetwork {
    pub adjacency: Vec<Vec<f64>>,
    pub edge_sd: Vec<Vec<f64>>,
    pub node_labels: Vec<String>,
}

impl InfluenceNetwork {
    pub fn from_adjacency(adjacency: Vec<Vec<f64>>) -> Result<Self> {
        let m = adjacency.len();
        check_square(&adjacency)?;
        Ok(InfluenceNetwork {
            edge_sd: vec![vec![0.0; m]; m],
            node_labels: (1..=m).map(|i| format!("node_{i}")).collect(),
            adjacency,
        })
    }

    pub fn m(&self) -> usize {
        self.adjacency.len()
    }

    pub fn self_excitation(&self) -> Vec<f64> {
        (0..self.m()).map(|i| self.adjacency[i][i]).collect()
    }

    /// Off-diagonal edges `(src, dst, weight)` with positive weight.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(dst, row)| {
            row.iter()
                .enumerate()
                .filter(move |&(src, &w)| src != dst && w > 0.0)
                .map(move |(src, &w)| (src, dst, w))
        })
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.m() {
            return Err(Error::Dimension {
                what: "node labels",
                expected: self.m(),
                got: labels.len(),
            });
        }
        self.node_labels = labels;
        Ok(self)
    }
}

fn check_square(a: &[Vec<f64>]) -> Result<()> {
    let m = a.len();
    if let Some(row) = a.iter().find(|r| r.len() != m) {
        return Err(Error::Dimension {
            what: "adjacency row",
            expected: m,
            got: row.len(),
        });
    }
    Ok(())
}

/// Ensemble mean and standard deviation (divisor `M - 1`) of every
/// excitation entry.
pub fn mean_network(ensembles: &[NodeEnsemble]) -> Result<InfluenceNetwork> {
    let m = ensembles.len();
    if m == 0 {
        return Err(Error::invalid("no ensembles"));
    }
    let size = ensembles[0].size();
    let mut adjacency = Vec::with_capacity(m);
    let mut edge_sd = Vec::with_capacity(m);
    for e in ensembles {
        if e.m() != m || e.size() != size {
            return Err(Error::Dimension {
                what: "ensemble shape",
                expected: m,
                got: e.m(),
            });
        }
        let mean = e.param_means();
        let var = e.param_variances();
        adjacency.push(mean[ALPHA..].to_vec());
        edge_sd.push(var[ALPHA..].iter().map(|v| v.sqrt()).collect());
    }
    Ok(InfluenceNetwork {
        adjacency,
        edge_sd,
        node_labels: (1..=m).map(|i| format!("node_{i}")).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule", content = "value")]
pub enum ThresholdRule {
    /// Keep edges heavier than `c` times the mean positive off-diagonal weight.
    Relative(f64),
    /// Keep edges heavier than the given weight.
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subnetwork {
    pub network: InfluenceNetwork,
    /// Original index of each retained node.
    pub kept_nodes: Vec<usize>,
    pub threshold: f64,
}

/// Keeps only edges above the rule's threshold and drops nodes left without
/// any edge. Diagonal entries of retained nodes are carried along.
pub fn threshold_subnetwork(net: &InfluenceNetwork, rule: ThresholdRule) -> Result<Subnetwork> {
    check_square(&net.adjacency)?;
    let threshold = match rule {
        ThresholdRule::Relative(c) => {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::invalid(format!("relative factor {c} must be >= 0")));
            }
            let (sum, n) = net.edges().fold((0.0, 0usize), |(s, n), (_, _, w)| (s + w, n + 1));
            if n == 0 {
                0.0
            } else {
                c * sum / n as f64
            }
        }
        ThresholdRule::Absolute(w) => {
            if !w.is_finite() {
                return Err(Error::invalid(format!("absolute threshold {w} must be finite")));
            }
            w
        }
    };
    let m = net.m();
    let mut keep = vec![vec![false; m]; m];
    let mut used = vec![false; m];
    for (src, dst, w) in net.edges() {
        if w > threshold {
            keep[dst][src] = true;
            used[src] = true;
            used[dst] = true;
        }
    }
    let kept_nodes: Vec<usize> = (0..m).filter(|&i| used[i]).collect();
    if kept_nodes.is_empty() {
        log::warn!("threshold {threshold} removed every edge");
    }
    let pick = |mat: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        kept_nodes
            .iter()
            .map(|&i| {
                kept_nodes
                    .iter()
                    .map(|&j| if i == j || keep[i][j] { mat[i][j] } else { 0.0 })
                    .collect()
            })
            .collect()
    };
    Ok(Subnetwork {
        network: InfluenceNetwork {
            adjacency: pick(&net.adjacency),
            edge_sd: pick(&net.edge_sd),
            node_labels: kept_nodes.iter().map(|&i| net.node_labels[i].clone()).collect(),
        },
        kept_nodes,
        threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    /// Total influence a node exerts (column sum).
    OutDegree,
    /// Total influence a node receives (row sum).
    InDegree,
    Betweenness,
}

impl Measure {
    pub const ALL: [Measure; 3] = [Measure::OutDegree, Measure::InDegree, Measure::Betweenness];

    pub fn name(self) -> &'static str {
        match self {
            Measure::OutDegree => "out-degree",
            Measure::InDegree => "in-degree",
            Measure::Betweenness => "betweenness",
        }
    }
}

pub fn centrality(net: &InfluenceNetwork, measure: Measure) -> Result<Vec<f64>> {
    if net.m() == 0 {
        return Err(Error::EmptyResult(format!(
            "{} is undefined on an empty network",
            measure.name()
        )));
    }
    check_square(&net.adjacency)?;
    Ok(scores(&net.adjacency, measure, BETWEENNESS_EDGE_FLOOR))
}

fn scores(adj: &[Vec<f64>], measure: Measure, floor: f64) -> Vec<f64> {
    let m = adj.len();
    match measure {
        Measure::OutDegree => (0..m)
            .map(|j| (0..m).filter(|&i| i != j).map(|i| adj[i][j]).sum())
            .collect(),
        Measure::InDegree => (0..m)
            .map(|i| (0..m).filter(|&j| j != i).map(|j| adj[i][j]).sum())
            .collect(),
        Measure::Betweenness => betweenness(&distance_graph(adj, floor)),
    }
}

/// Out-neighbour lists `src -> [(dst, distance)]` with distance `1 / weight`.
pub fn distance_graph(adj: &[Vec<f64>], floor: f64) -> Vec<Vec<(usize, f64)>> {
    let m = adj.len();
    let mut out = vec![Vec::new(); m];
    for (dst, row) in adj.iter().enumerate() {
        for (src, &w) in row.iter().enumerate() {
            if src != dst && w > floor {
                out[src].push((dst, 1.0 / w));
            }
        }
    }
    out
}

#[derive(PartialEq)]
struct Frontier(f64, usize);

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Unnormalised betweenness over ordered pairs on a graph with non-negative
/// distances (Brandes accumulation over Dijkstra searches).
pub fn betweenness(graph: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let n = graph.len();
    let mut score = vec![0.0; n];
    for s in 0..n {
        let mut dist = vec![f64::INFINITY; n];
        let mut sigma = vec![0.0f64; n];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut settled = vec![false; n];
        let mut order = Vec::with_capacity(n);
        let mut heap = BinaryHeap::new();
        dist[s] = 0.0;
        sigma[s] = 1.0;
        heap.push(Frontier(0.0, s));
        while let Some(Frontier(d, v)) = heap.pop() {
            if settled[v] || d > dist[v] {
                continue;
            }
            settled[v] = true;
            order.push(v);
            for &(w, c) in &graph[v] {
                let alt = dist[v] + c;
                if alt < dist[w] {
                    dist[w] = alt;
                    sigma[w] = sigma[v];
                    preds[w].clear();
                    preds[w].push(v);
                    heap.push(Frontier(alt, w));
                } else if alt == dist[w] && !settled[w] {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                score[w] += delta[w];
            }
        }
    }
    score
}

/// `counts[r][j]`: members in which node `j` holds rank `r` (0 = highest).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankDistribution {
    pub measure: Measure,
    pub counts: Vec<Vec<u64>>,
}

/// Nodes ordered by descending score, ties by ascending index.
pub fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

pub fn rank_distribution(ensembles: &[NodeEnsemble], measure: Measure) -> Result<RankDistribution> {
    let m = ensembles.len();
    if m == 0 {
        return Err(Error::invalid("no ensembles"));
    }
    let size = ensembles[0].size();
    if let Some(e) = ensembles.iter().find(|e| e.size() != size || e.m() != m) {
        return Err(Error::Dimension {
            what: "ensemble shape",
            expected: size,
            got: e.size(),
        });
    }
    let orders: Vec<Vec<usize>> = (0..size)
        .into_par_iter()
        .map(|s| {
            let adj: Vec<Vec<f64>> = ensembles
                .iter()
                .map(|e| e.member(s)[ALPHA..].to_vec())
                .collect();
            ranking(&scores(&adj, measure, BETWEENNESS_EDGE_FLOOR))
        })
        .collect();
    let mut counts = vec![vec![0u64; m]; m];
    for order in orders {
        for (r, &j) in order.iter().enumerate() {
            counts[r][j] += 1;
        }
    }
    Ok(RankDistribution { measure, counts })
}
