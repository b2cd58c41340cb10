//! Inhomogeneous Erdős–Rényi graphs as Bernoulli vector sources.
//!
//! Each unordered vertex pair is an independent Bernoulli edge indicator, so
//! the upper triangle of the edge-probability matrix is a Bernoulli vector
//! source and the graph RDP function is the vector RDP function.
//!
//! Matrix documents are JSON:
//!
//! ```json
//! {"n_vertices": 3, "probs": [[0, 0.2, 0.5], [0.2, 0, 0.9], [0.5, 0.9, 0]]}
//! ```

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{RdpError, Result};
use crate::scalar::Rate;
use crate::solver::{rdp_with, BudgetPair, RdpResult, SolverConfig};
use crate::source::BernoulliVectorSource;

const MATRIX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeProbabilityMatrix {
    n_vertices: usize,
    probs: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawMatrix {
    n_vertices: usize,
    probs: Vec<Vec<f64>>,
}

impl EdgeProbabilityMatrix {
    /// Validates a dense matrix: symmetric within `1e-12` (then averaged),
    /// zero diagonal, entries in `[0, 1]`.
    pub fn new(n_vertices: usize, mut probs: Vec<Vec<f64>>) -> Result<Self> {
        if n_vertices < 2 {
            return Err(RdpError::Validation(format!("need at least 2 vertices, got {n_vertices}")));
        }
        if probs.len() != n_vertices {
            return Err(RdpError::Validation(format!(
                "expected {n_vertices} rows, got {}",
                probs.len()
            )));
        }
        for (i, row) in probs.iter().enumerate() {
            if row.len() != n_vertices {
                return Err(RdpError::Validation(format!(
                    "row {i} has {} entries, expected {n_vertices}",
                    row.len()
                )));
            }
            for (j, &x) in row.iter().enumerate() {
                if !(-MATRIX_TOL..=1.0 + MATRIX_TOL).contains(&x) {
                    return Err(RdpError::Validation(format!("probs[{i}][{j}] = {x} is not in [0, 1]")));
                }
            }
            if row[i].abs() > MATRIX_TOL {
                return Err(RdpError::Validation(format!("diagonal entry probs[{i}][{i}] = {} is not zero", row[i])));
            }
        }
        for i in 0..n_vertices {
            probs[i][i] = 0.0;
            for j in i + 1..n_vertices {
                let (x, y) = (probs[i][j], probs[j][i]);
                if (x - y).abs() > MATRIX_TOL {
                    return Err(RdpError::Validation(format!(
                        "matrix is not symmetric: probs[{i}][{j}] = {x} but probs[{j}][{i}] = {y}"
                    )));
                }
                let m = (0.5 * (x + y)).clamp(0.0, 1.0);
                probs[i][j] = m;
                probs[j][i] = m;
            }
        }
        Ok(EdgeProbabilityMatrix { n_vertices, probs })
    }

    /// `n` vertices, every pair connected with probability `p`.
    pub fn homogeneous(n_vertices: usize, p: f64) -> Result<Self> {
        let probs =
            (0..n_vertices).map(|i| (0..n_vertices).map(|j| if i == j { 0.0 } else { p }).collect()).collect();
        Self::new(n_vertices, probs)
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn probs(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Vertex pairs `(i, j)`, `i < j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n_vertices;
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    }
}

/// Parses and validates a matrix document.
pub fn load_matrix<R: Read>(reader: R) -> Result<EdgeProbabilityMatrix> {
    let raw: RawMatrix = serde_json::from_reader(reader).map_err(|e| RdpError::Parse(e.to_string()))?;
    EdgeProbabilityMatrix::new(raw.n_vertices, raw.probs)
}

/// The flattened source together with the edge behind each original component.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSource {
    pub source: BernoulliVectorSource,
    /// `edges[k]` is the vertex pair of original (pre-sort) component `k`.
    pub edges: Vec<(usize, usize)>,
}

pub fn flatten(matrix: &EdgeProbabilityMatrix) -> EdgeSource {
    let edges = matrix.edges();
    let raw: Vec<f64> = edges.iter().map(|&(i, j)| matrix.probs[i][j]).collect();
    let source = BernoulliVectorSource::normalize(&raw).expect("validated matrix has n >= 2 and entries in [0, 1]");
    EdgeSource { source, edges }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeAllocation {
    pub i: usize,
    pub j: usize,
    /// Edge probability as given (not complemented).
    pub q: f64,
    pub d: f64,
    pub p: f64,
    pub rate: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRdpResult {
    pub result: RdpResult,
    /// One entry per vertex pair, in row-major edge order.
    pub edges: Vec<EdgeAllocation>,
}

pub fn graph_rdp(matrix: &EdgeProbabilityMatrix, budget: BudgetPair) -> Result<GraphRdpResult> {
    graph_rdp_with(matrix, budget, &SolverConfig::default())
}

pub fn graph_rdp_with(
    matrix: &EdgeProbabilityMatrix,
    budget: BudgetPair,
    cfg: &SolverConfig,
) -> Result<GraphRdpResult> {
    let flat = flatten(matrix);
    let result = rdp_with(&flat.source, budget, cfg)?;
    let alloc = &result.allocation;
    let d = flat.source.to_original_order(&alloc.d);
    let p = flat.source.to_original_order(&alloc.p);
    let rate = flat.source.to_original_order(&alloc.per_component_rate);
    let edges = flat
        .edges
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| EdgeAllocation { i, j, q: matrix.probs[i][j], d: d[k], p: p[k], rate: rate[k] })
        .collect();
    Ok(GraphRdpResult { result, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::h2;
    use crate::scalar::scalar_rdp_at;
    use approx::assert_abs_diff_eq;

    fn parse(s: &str) -> Result<EdgeProbabilityMatrix> {
        load_matrix(s.as_bytes())
    }

    #[test]
    fn loads_two_vertices() {
        let m = parse(r#"{"n_vertices": 2, "probs": [[0, 0.3], [0.3, 0]]}"#).unwrap();
        let flat = flatten(&m);
        assert_eq!(flat.source.q(), &[0.3]);
        assert_eq!(flat.edges, vec![(0, 1)]);
    }

    #[test]
    fn rejects_bad_matrices() {
        let err = parse(r#"{"n_vertices": 2, "probs": [[0, 0.3], [0.4, 0]]}"#).unwrap_err();
        assert!(matches!(&err, RdpError::Validation(m) if m.contains("probs[0][1]")));
        let err = parse(r#"{"n_vertices": 2, "probs": [[0.1, 0.3], [0.3, 0]]}"#).unwrap_err();
        assert!(matches!(&err, RdpError::Validation(m) if m.contains("probs[0][0]")));
        let err = parse(r#"{"n_vertices": 2, "probs": [[0, 1.3], [1.3, 0]]}"#).unwrap_err();
        assert!(matches!(&err, RdpError::Validation(m) if m.contains("probs[0][1]")));
        assert!(matches!(parse(r#"{"n_vertices": 3, "probs": [[0, 0.3], [0.3, 0]]}"#), Err(RdpError::Validation(_))));
        assert!(matches!(parse(r#"{"n_vertices": 1, "probs": [[0]]}"#), Err(RdpError::Validation(_))));
        assert!(matches!(parse("{\"n_vertices\": 2"), Err(RdpError::Parse(_))));
    }

    #[test]
    fn near_symmetric_entries_are_averaged() {
        let m = EdgeProbabilityMatrix::new(2, vec![vec![0.0, 0.3], vec![0.3 + 5e-13, 0.0]]).unwrap();
        assert_eq!(m.probs()[0][1], m.probs()[1][0]);
    }

    #[test]
    fn flatten_three_vertices() {
        let m = parse(r#"{"n_vertices": 3, "probs": [[0, 0.2, 0.5], [0.2, 0, 0.9], [0.5, 0.9, 0]]}"#).unwrap();
        let flat = flatten(&m);
        assert_eq!(flat.source.raw_q(), vec![0.2, 0.5, 0.9]);
        assert_eq!(flat.source.q()[0], 0.5);
        assert_eq!(flat.source.q()[1], 0.2);
        assert_abs_diff_eq!(flat.source.q()[2], 0.1, epsilon = 1e-15);
        assert_eq!(flat.source.flip_mask(), &[false, false, true]);
        assert_eq!(flat.edges, vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn homogeneous_graph_examples() {
        let m = EdgeProbabilityMatrix::homogeneous(3, 0.25).unwrap();
        let out = graph_rdp(&m, BudgetPair::new(0.3, 0.15).unwrap()).unwrap();
        let expected = 3.0 * scalar_rdp_at(0.1, 0.05, 0.25).unwrap().nats();
        assert_abs_diff_eq!(out.result.rate.nats(), expected, epsilon = 1e-8);

        let out = graph_rdp(&m, BudgetPair::new(3.0 * 2.0 * 0.25 * 0.75, 0.0).unwrap()).unwrap();
        assert_eq!(out.result.rate.nats(), 0.0);
    }

    #[test]
    fn zero_distortion_costs_the_edge_entropy() {
        let m = parse(r#"{"n_vertices": 3, "probs": [[0, 0.2, 0.0], [0.2, 0, 0.9], [0.0, 0.9, 0]]}"#).unwrap();
        let out = graph_rdp(&m, BudgetPair::new(0.0, 0.0).unwrap()).unwrap();
        assert_abs_diff_eq!(out.result.rate.nats(), h2(0.2).unwrap() + h2(0.1).unwrap(), epsilon = 1e-12);
        assert_eq!(out.edges.len(), 3);
        assert_eq!((out.edges[2].i, out.edges[2].j, out.edges[2].q), (1, 2, 0.9));
    }

    #[test]
    fn edge_allocation_reproduces_budgets() {
        let m = parse(r#"{"n_vertices": 3, "probs": [[0, 0.2, 0.45], [0.2, 0, 0.7], [0.45, 0.7, 0]]}"#).unwrap();
        let out = graph_rdp(&m, BudgetPair::new(0.25, 0.04).unwrap()).unwrap();
        assert_abs_diff_eq!(out.edges.iter().map(|e| e.d).sum::<f64>(), 0.25, epsilon = 1e-8);
        assert_abs_diff_eq!(out.edges.iter().map(|e| e.p).sum::<f64>(), 0.04, epsilon = 1e-8);
        let total: f64 = out.edges.iter().map(|e| e.rate.nats()).sum();
        assert_abs_diff_eq!(total, out.result.rate.nats(), epsilon = 1e-12);
    }
}
