//! Graph encodings of CNF formulas.
//!
//! The main encoding is the weighted literal-incidence graph: one node per
//! literal (positive literals first, then negative, matching
//! [`crate::cnf::lit_node_index`]), and an edge between two literals
//! weighted by the number of clauses in which they co-occur. A bipartite
//! literal-clause graph is also provided for the graph-construction
//! ablation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{lit_node_index, Cnf};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has no edges; normalized adjacency is undefined")]
    EdgelessGraph,
}

/// Compressed sparse rows. `indptr` has `num_rows + 1` offsets into
/// `indices`/`data`; column indices are sorted within each row.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr<W> {
    indptr: Vec<u32>,
    indices: Vec<u32>,
    data: Vec<W>,
}

impl<W: Copy> Csr<W> {
    /// Build from per-undirected-edge entries; each (i, j, w) with i != j
    /// is stored in both row i and row j.
    fn from_undirected(num_rows: usize, edges: &BTreeMap<(u32, u32), W>) -> Csr<W> {
        let mut rows: Vec<Vec<(u32, W)>> = vec![Vec::new(); num_rows];
        for (&(i, j), &w) in edges {
            rows[i as usize].push((j, w));
            rows[j as usize].push((i, w));
        }
        Csr::from_rows(rows)
    }

    fn from_rows(mut rows: Vec<Vec<(u32, W)>>) -> Csr<W> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        indptr.push(0u32);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for row in &mut rows {
            row.sort_unstable_by_key(|&(c, _)| c);
            for &(c, w) in row.iter() {
                indices.push(c);
                data.push(w);
            }
            indptr.push(indices.len() as u32);
        }
        Csr {
            indptr,
            indices,
            data,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.indptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, i: usize) -> (&[u32], &[W]) {
        let lo = self.indptr[i] as usize;
        let hi = self.indptr[i + 1] as usize;
        (&self.indices[lo..hi], &self.data[lo..hi])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<W> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).ok().map(|k| vals[k])
    }

    fn map<V: Copy>(&self, f: impl Fn(usize, W) -> V) -> Csr<V> {
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.num_rows() {
            let lo = self.indptr[i] as usize;
            let hi = self.indptr[i + 1] as usize;
            for k in lo..hi {
                data.push(f(i, self.data[k]));
            }
        }
        Csr {
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            data,
        }
    }
}

/// Weighted literal-incidence graph. Nodes 0..n-1 are the positive
/// literals x1..xn, nodes n..2n-1 the negative ones.
#[derive(Clone, Debug, PartialEq)]
pub struct Wlig {
    pub n_vars: u32,
    /// Symmetric, zero-diagonal co-occurrence counts.
    pub adjacency: Csr<u32>,
    /// Weighted degree per node: sum of incident edge weights.
    pub degrees: Vec<u64>,
    /// +1 for positive-literal nodes, -1 for negative.
    pub lit_types: Vec<i8>,
}

impl Wlig {
    pub fn num_nodes(&self) -> usize {
        2 * self.n_vars as usize
    }

    /// Co-occurrence weight between two nodes (0-based), 0 if absent.
    pub fn weight_between(&self, i: usize, j: usize) -> u32 {
        self.adjacency.get(i, j).unwrap_or(0)
    }
}

/// Normalized adjacency: same sparsity pattern, real weights.
#[derive(Clone, Debug, PartialEq)]
pub struct NormAdj {
    pub adjacency: Csr<f64>,
}

impl NormAdj {
    pub fn num_nodes(&self) -> usize {
        self.adjacency.num_rows()
    }
}

/// Bipartite literal-clause membership graph: literal nodes 0..2n-1 first,
/// then one node per clause. All edges carry weight 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Lcg {
    pub n_vars: u32,
    pub num_clauses: usize,
    pub adjacency: Csr<u32>,
}

impl Lcg {
    pub fn num_nodes(&self) -> usize {
        2 * self.n_vars as usize + self.num_clauses
    }

    pub fn num_literal_nodes(&self) -> usize {
        2 * self.n_vars as usize
    }
}

pub fn build_wlig(cnf: &Cnf) -> Wlig {
    let n = cnf.num_vars();
    let num_nodes = 2 * n as usize;
    let mut edges: BTreeMap<(u32, u32), u32> = BTreeMap::new();
    for clause in cnf.clauses() {
        let nodes: Vec<u32> = clause
            .iter()
            .map(|&l| (lit_node_index(l, n).expect("lit in range") - 1) as u32)
            .collect();
        for (k, &a) in nodes.iter().enumerate() {
            for &b in &nodes[k + 1..] {
                let key = (a.min(b), a.max(b));
                *edges.entry(key).or_insert(0) += 1;
            }
        }
    }
    let adjacency = Csr::from_undirected(num_nodes, &edges);
    let degrees = (0..num_nodes)
        .map(|i| adjacency.row(i).1.iter().map(|&w| w as u64).sum())
        .collect();
    let lit_types = (0..num_nodes)
        .map(|i| if i < n as usize { 1 } else { -1 })
        .collect();
    Wlig {
        n_vars: n,
        adjacency,
        degrees,
        lit_types,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Divide every entry by the global sum over the full symmetric matrix.
    #[default]
    GlobalSum,
    /// Divide each row by its own sum (rows of zeros stay zero).
    Row,
}

impl std::str::FromStr for NormMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "global_sum" | "global-sum" => Ok(NormMode::GlobalSum),
            "row" => Ok(NormMode::Row),
            other => Err(format!("unknown normalization '{other}' (global_sum|row)")),
        }
    }
}

/// Default normalization: global-sum mode, edgeless graphs are an error.
pub fn normalize_adjacency(g: &Wlig) -> Result<NormAdj, GraphError> {
    normalize_adjacency_with(g, NormMode::GlobalSum, false)
}

/// `edgeless_zero` opts in to an all-zero result instead of
/// [`GraphError::EdgelessGraph`] when the graph has no edges.
pub fn normalize_adjacency_with(
    g: &Wlig,
    mode: NormMode,
    edgeless_zero: bool,
) -> Result<NormAdj, GraphError> {
    Ok(NormAdj {
        adjacency: normalize_counts(&g.adjacency, mode, edgeless_zero)?,
    })
}

/// Normalize any count-weighted adjacency (works for both graph kinds).
pub fn normalize_counts(
    adj: &Csr<u32>,
    mode: NormMode,
    edgeless_zero: bool,
) -> Result<Csr<f64>, GraphError> {
    if adj.nnz() == 0 && !edgeless_zero {
        return Err(GraphError::EdgelessGraph);
    }
    let row_sums: Vec<f64> = (0..adj.num_rows())
        .map(|i| adj.row(i).1.iter().map(|&w| w as f64).sum())
        .collect();
    let out = match mode {
        NormMode::GlobalSum => {
            let total: f64 = row_sums.iter().sum();
            if total == 0.0 {
                adj.map(|_, _| 0.0)
            } else {
                adj.map(|_, w| w as f64 / total)
            }
        }
        NormMode::Row => adj.map(|i, w| {
            if row_sums[i] == 0.0 {
                0.0
            } else {
                w as f64 / row_sums[i]
            }
        }),
    };
    Ok(out)
}

pub fn build_lcg(cnf: &Cnf) -> Lcg {
    let n = cnf.num_vars();
    let lits = 2 * n as usize;
    let m = cnf.num_clauses();
    let mut rows: Vec<Vec<(u32, u32)>> = vec![Vec::new(); lits + m];
    for (c, clause) in cnf.clauses().iter().enumerate() {
        let cnode = (lits + c) as u32;
        for &l in clause.iter() {
            let lnode = (lit_node_index(l, n).expect("lit in range") - 1) as u32;
            rows[lnode as usize].push((cnode, 1));
            rows[cnode as usize].push((lnode, 1));
        }
    }
    Lcg {
        n_vars: n,
        num_clauses: m,
        adjacency: Csr::from_rows(rows),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    /// Sum of incident edge weights.
    #[default]
    Weighted,
    /// Count of distinct neighbors.
    Simple,
}

impl std::str::FromStr for DegreeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "weighted" => Ok(DegreeMode::Weighted),
            "simple" => Ok(DegreeMode::Simple),
            other => Err(format!("unknown degree mode '{other}' (weighted|simple)")),
        }
    }
}

/// Per-node (degree, literal type) pairs feeding the embedding layer.
pub fn raw_node_features(g: &Wlig) -> Vec<(f64, f64)> {
    raw_node_features_with(g, DegreeMode::Weighted)
}

pub fn raw_node_features_with(g: &Wlig, mode: DegreeMode) -> Vec<(f64, f64)> {
    (0..g.num_nodes())
        .map(|i| {
            let d = match mode {
                DegreeMode::Weighted => g.degrees[i] as f64,
                DegreeMode::Simple => g.adjacency.row(i).0.len() as f64,
            };
            (d, g.lit_types[i] as f64)
        })
        .collect()
}

/// Text dump of the stored adjacency: header `wlig <N> <nnz>`, then one
/// `i j w` line per stored entry (row-major, 1-based node ids, so each
/// undirected edge appears twice).
pub fn wlig_edge_list(g: &Wlig) -> String {
    let mut out = format!("wlig {} {}\n", g.num_nodes(), g.adjacency.nnz());
    for i in 0..g.num_nodes() {
        let (cols, vals) = g.adjacency.row(i);
        for (&j, &w) in cols.iter().zip(vals) {
            out.push_str(&format!("{} {} {}\n", i + 1, j + 1, w));
        }
    }
    out
}
