//! Weighted connectivity graphs over (projected) channels and the node
//! metrics used to compare all-trial and selected-trial connectivity.

use std::borrow::Borrow;
use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::riemann::SpdMatrix;
use crate::{Error, Result};

impl Borrow<DMatrix<f64>> for SpdMatrix {
    fn borrow(&self) -> &DMatrix<f64> {
        self.values()
    }
}

/// Undirected weighted graph: symmetric, non-negative, zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityGraph {
    pub nodes: Vec<String>,
    #[serde(with = "crate::matrix_serde")]
    pub weights: DMatrix<f64>,
    pub modules: Vec<usize>,
}

impl ConnectivityGraph {
    /// Validates `weights` and assigns modules by greedy modularity.
    pub fn new(nodes: Vec<String>, weights: DMatrix<f64>) -> Result<Self> {
        let n = nodes.len();
        if weights.shape() != (n, n) {
            return Err(Error::Argument(format!(
                "weights are {}x{} for {n} nodes",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::Argument(format!("self-loop on node {i}")));
            }
            for j in 0..n {
                let w = weights[(i, j)];
                if !(w >= 0.0 && w.is_finite()) || w != weights[(j, i)] {
                    return Err(Error::Argument(format!(
                        "weight ({i},{j}) = {w} must be finite, non-negative and symmetric"
                    )));
                }
            }
        }
        let modules = greedy_modularity(&weights);
        Ok(Self {
            nodes,
            weights,
            modules,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        let n = self.len();
        (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.weights[(i, j)] > 0.0)
            .count()
    }
}

/// Graph whose weights are the absolute element-wise mean of the given
/// covariances, diagonal zeroed.
pub fn build_graph<M: Borrow<DMatrix<f64>>>(
    covariances: &[M],
    node_names: &[String],
) -> Result<ConnectivityGraph> {
    let first = covariances
        .first()
        .ok_or_else(|| Error::Argument("cannot build a graph from no covariances".into()))?
        .borrow();
    let n = node_names.len();
    let mut mean = DMatrix::zeros(n, n);
    for c in covariances {
        let c: &DMatrix<f64> = c.borrow();
        if c.shape() != (n, n) || c.shape() != first.shape() {
            return Err(Error::Argument(format!(
                "covariance is {}x{}, expected {n}x{n}",
                c.nrows(),
                c.ncols()
            )));
        }
        mean += c;
    }
    mean /= covariances.len() as f64;
    let mut w = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            0.5 * (mean[(i, j)] + mean[(j, i)]).abs()
        }
    });
    // Exact symmetry after the floating-point average.
    for i in 0..n {
        for j in 0..i {
            w[(i, j)] = w[(j, i)];
        }
    }
    ConnectivityGraph::new(node_names.to_vec(), w)
}

/// Greedy agglomerative modularity maximization. Starts from singletons and
/// repeatedly merges the connected pair of communities with the largest
/// positive modularity gain; ties go to the lowest community indices.
/// Returns module ids numbered by first appearance.
pub fn greedy_modularity(w: &DMatrix<f64>) -> Vec<usize> {
    let n = w.nrows();
    let strength: Vec<f64> = (0..n).map(|i| w.row(i).sum()).collect();
    let two_m: f64 = strength.iter().sum();
    let mut assignment: Vec<usize> = (0..n).collect();
    if two_m <= 0.0 {
        return assignment;
    }
    // Community-level inter-weights and total strengths.
    let mut e = w.clone();
    let mut a = strength.clone();
    let mut alive: Vec<bool> = vec![true; n];
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in i + 1..n {
                if !alive[j] || e[(i, j)] <= 0.0 {
                    continue;
                }
                let gain = 2.0 * (e[(i, j)] / two_m - a[i] * a[j] / (two_m * two_m));
                if gain > 1e-12 && best.is_none_or(|(g, _, _)| gain > g + 1e-14) {
                    best = Some((gain, i, j));
                }
            }
        }
        let Some((_, i, j)) = best else { break };
        for k in 0..n {
            if k != i && k != j {
                let merged = e[(i, k)] + e[(j, k)];
                e[(i, k)] = merged;
                e[(k, i)] = merged;
            }
        }
        e[(i, i)] += e[(j, j)] + 2.0 * e[(i, j)];
        a[i] += a[j];
        alive[j] = false;
        for c in assignment.iter_mut() {
            if *c == j {
                *c = i;
            }
        }
    }
    let mut relabel: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    assignment
        .into_iter()
        .map(|c| {
            *relabel[c].get_or_insert_with(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

pub fn node_strength(g: &ConnectivityGraph) -> Vec<f64> {
    g.weights.row_iter().map(|r| r.sum()).collect()
}

/// Weighted clustering (geometric mean of max-normalized triangle weights).
pub fn clustering_coefficient(g: &ConnectivityGraph) -> Vec<f64> {
    let n = g.len();
    let max = g.weights.max();
    if max <= 0.0 {
        return vec![0.0; n];
    }
    let cube = g.weights.map(|v| (v / max).cbrt());
    (0..n)
        .map(|i| {
            let nbrs: Vec<usize> = (0..n).filter(|&j| g.weights[(i, j)] > 0.0).collect();
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut sum = 0.0;
            for &j in &nbrs {
                for &h in &nbrs {
                    if j != h {
                        sum += cube[(i, j)] * cube[(i, h)] * cube[(j, h)];
                    }
                }
            }
            sum / (k * (k - 1)) as f64
        })
        .collect()
}

pub fn participation_coefficient(g: &ConnectivityGraph) -> Vec<f64> {
    let n = g.len();
    let n_modules = g.modules.iter().max().map_or(0, |m| m + 1);
    (0..n)
        .map(|i| {
            let s: f64 = g.weights.row(i).sum();
            if s <= 0.0 {
                return 0.0;
            }
            let mut per_module = vec![0.0; n_modules];
            for j in 0..n {
                per_module[g.modules[j]] += g.weights[(i, j)];
            }
            1.0 - per_module.iter().map(|sm| (sm / s).powi(2)).sum::<f64>()
        })
        .collect()
}

/// Mean inverse shortest-path length between neighbours of each node,
/// within the subgraph induced by those neighbours (edge length `1/w`).
pub fn local_efficiency(g: &ConnectivityGraph) -> Vec<f64> {
    let n = g.len();
    (0..n)
        .map(|i| {
            let nbrs: Vec<usize> = (0..n).filter(|&j| g.weights[(i, j)] > 0.0).collect();
            let k = nbrs.len();
            if k < 2 {
                return 0.0;
            }
            let mut dist = DMatrix::from_fn(k, k, |a, b| {
                let w = g.weights[(nbrs[a], nbrs[b])];
                if a == b {
                    0.0
                } else if w > 0.0 {
                    1.0 / w
                } else {
                    f64::INFINITY
                }
            });
            for via in 0..k {
                for a in 0..k {
                    for b in 0..k {
                        let alt = dist[(a, via)] + dist[(via, b)];
                        if alt < dist[(a, b)] {
                            dist[(a, b)] = alt;
                        }
                    }
                }
            }
            let mut sum = 0.0;
            for a in 0..k {
                for b in a + 1..k {
                    sum += 1.0 / dist[(a, b)];
                }
            }
            sum / (k * (k - 1) / 2) as f64
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeMetrics {
    pub nodes: Vec<String>,
    pub clustering: Vec<f64>,
    pub participation: Vec<f64>,
    pub local_efficiency: Vec<f64>,
    pub strength: Vec<f64>,
}

pub const METRIC_NAMES: [&str; 4] = ["clustering", "participation", "local_efficiency", "strength"];

impl NodeMetrics {
    pub fn compute(g: &ConnectivityGraph) -> Self {
        Self {
            nodes: g.nodes.clone(),
            clustering: clustering_coefficient(g),
            participation: participation_coefficient(g),
            local_efficiency: local_efficiency(g),
            strength: node_strength(g),
        }
    }

    /// Metric columns in [`METRIC_NAMES`] order.
    pub fn columns(&self) -> [&[f64]; 4] {
        [
            &self.clustering,
            &self.participation,
            &self.local_efficiency,
            &self.strength,
        ]
    }
}

/// Keeps edges whose weight is within the top `fraction` of non-zero edge
/// weights; every edge tied with the cutoff weight is kept.
pub fn top_edges(g: &ConnectivityGraph, fraction: f64) -> Result<ConnectivityGraph> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Argument(format!(
            "edge fraction must be in (0, 1], got {fraction}"
        )));
    }
    let n = g.len();
    let mut weights: Vec<f64> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .map(|(i, j)| g.weights[(i, j)])
        .filter(|w| *w > 0.0)
        .collect();
    if weights.is_empty() {
        return Ok(g.clone());
    }
    weights.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    let quota = ((fraction * weights.len() as f64).ceil() as usize).clamp(1, weights.len());
    let cutoff = weights[quota - 1];
    let filtered = g.weights.map(|w| if w >= cutoff { w } else { 0.0 });
    ConnectivityGraph::new(g.nodes.clone(), filtered)
}

/// Mean absolute per-node difference of each metric between two profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    pub clustering: f64,
    pub participation: f64,
    pub local_efficiency: f64,
    pub strength: f64,
}

impl Separability {
    pub fn values(&self) -> [f64; 4] {
        [
            self.clustering,
            self.participation,
            self.local_efficiency,
            self.strength,
        ]
    }
}

pub fn separability(a: &NodeMetrics, b: &NodeMetrics) -> Result<Separability> {
    if a.nodes != b.nodes {
        return Err(Error::Argument("metric tables cover different nodes".into()));
    }
    let mad = |x: &[f64], y: &[f64]| {
        if x.is_empty() {
            0.0
        } else {
            x.iter().zip(y).map(|(p, q)| (p - q).abs()).sum::<f64>() / x.len() as f64
        }
    };
    Ok(Separability {
        clustering: mad(&a.clustering, &b.clustering),
        participation: mad(&a.participation, &b.participation),
        local_efficiency: mad(&a.local_efficiency, &b.local_efficiency),
        strength: mad(&a.strength, &b.strength),
    })
}
