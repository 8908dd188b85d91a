//! Candidate complete graph, edge selections and the Laplacians they induce.
//!
//! Edges of the complete graph on `n` nodes are indexed lexicographically over
//! pairs `(i, j)` with `i < j`, so edge `(0, 1)` is `0` and edge `(n-2, n-1)` is
//! `n(n-1)/2 - 1`. The incidence vector of edge `(i, j)` carries `+1` at `i` and
//! `-1` at `j`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An edge of the candidate graph together with its linear index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub m: usize,
}

/// The complete graph on `n` nodes that every learned topology is a subgraph of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateGraph {
    n: usize,
}

impl CandidateGraph {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::domain(format!("candidate graph needs at least 2 nodes, got {n}")));
        }
        Ok(CandidateGraph { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of candidate edges, `n(n-1)/2`.
    pub fn m_total(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    // index of the first edge whose smaller endpoint is `i`
    fn row_start(&self, i: usize) -> usize {
        i * (2 * self.n - i - 1) / 2
    }

    pub fn edge_index(&self, i: usize, j: usize) -> Result<usize> {
        if i >= j || j >= self.n {
            return Err(Error::domain(format!(
                "edge ({i}, {j}) is not a valid pair i < j < {}",
                self.n
            )));
        }
        Ok(self.row_start(i) + (j - i - 1))
    }

    pub fn edge_from_index(&self, m: usize) -> Result<Edge> {
        if m >= self.m_total() {
            return Err(Error::domain(format!(
                "edge index {m} out of range for {} candidate edges",
                self.m_total()
            )));
        }
        // Closed-form guess from the quadratic row_start(i) <= m, then fix rounding.
        let b = (2 * self.n - 1) as f64;
        let guess = ((b - (b * b - 8.0 * m as f64).max(0.0).sqrt()) / 2.0).floor();
        let mut i = (guess.max(0.0) as usize).min(self.n - 2);
        while i > 0 && self.row_start(i) > m {
            i -= 1;
        }
        while i + 1 < self.n - 1 && self.row_start(i + 1) <= m {
            i += 1;
        }
        let j = m - self.row_start(i) + i + 1;
        Ok(Edge { i, j, m })
    }

    /// All candidate edges in index order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| {
            (i + 1..n).map(move |j| Edge {
                i,
                j,
                m: self.row_start(i) + (j - i - 1),
            })
        })
    }

    pub fn incidence_column(&self, m: usize) -> Result<IncidenceVector> {
        let e = self.edge_from_index(m)?;
        Ok(IncidenceVector {
            n: self.n,
            plus: e.i,
            minus: e.j,
        })
    }
}

/// Sparse incidence vector `a_m`: `+1` at `plus`, `-1` at `minus`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncidenceVector {
    pub n: usize,
    pub plus: usize,
    pub minus: usize,
}

impl IncidenceVector {
    pub fn to_dense(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n);
        v[self.plus] = 1.0;
        v[self.minus] = -1.0;
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionKind {
    Boolean,
    Relaxed,
}

/// Edge selection vector `w` over the candidate edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSelection {
    weights: Vec<f64>,
    kind: SelectionKind,
    k: usize,
}

impl EdgeSelection {
    /// Boolean selection with ones exactly at `indices`.
    pub fn boolean(m_total: usize, indices: &[usize]) -> Result<Self> {
        let mut weights = vec![0.0; m_total];
        for &m in indices {
            if m >= m_total {
                return Err(Error::domain(format!("edge index {m} out of range ({m_total} edges)")));
            }
            if weights[m] != 0.0 {
                return Err(Error::domain(format!("edge index {m} selected twice")));
            }
            weights[m] = 1.0;
        }
        Ok(EdgeSelection {
            weights,
            kind: SelectionKind::Boolean,
            k: indices.len(),
        })
    }

    pub fn boolean_from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(bad) = weights.iter().position(|&w| w != 0.0 && w != 1.0) {
            return Err(Error::domain(format!(
                "weight {} at edge {bad} is not Boolean",
                weights[bad]
            )));
        }
        let k = weights.iter().filter(|&&w| w == 1.0).count();
        Ok(EdgeSelection {
            weights,
            kind: SelectionKind::Boolean,
            k,
        })
    }

    /// Relaxed selection: entries in `[0, 1]` summing to `k` within `1e-9 * M`.
    pub fn relaxed(weights: Vec<f64>, k: usize) -> Result<Self> {
        if let Some(bad) = weights.iter().position(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::domain(format!(
                "relaxed weight {} at edge {bad} outside [0, 1]",
                weights[bad]
            )));
        }
        let sum: f64 = weights.iter().sum();
        let tol = 1e-9 * weights.len().max(1) as f64;
        if (sum - k as f64).abs() > tol {
            return Err(Error::domain(format!("relaxed weights sum to {sum}, expected {k}")));
        }
        Ok(EdgeSelection {
            weights,
            kind: SelectionKind::Relaxed,
            k,
        })
    }

    /// Relaxed weights without the sum check, for points near (not on) the simplex.
    #[cfg(test)]
    pub(crate) fn relaxed_unchecked(weights: Vec<f64>) -> Self {
        let k = weights.iter().sum::<f64>().round().max(0.0) as usize;
        EdgeSelection {
            weights,
            kind: SelectionKind::Relaxed,
            k,
        }
    }

    pub fn empty(m_total: usize) -> Self {
        EdgeSelection {
            weights: vec![0.0; m_total],
            kind: SelectionKind::Boolean,
            k: 0,
        }
    }

    pub fn full(m_total: usize) -> Self {
        EdgeSelection {
            weights: vec![1.0; m_total],
            kind: SelectionKind::Boolean,
            k: m_total,
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn kind(&self) -> SelectionKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Indices with nonzero weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w != 0.0)
            .map(|(m, _)| m)
            .collect()
    }
}

/// Real `N x L` matrix of graph signals, one snapshot per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix(DMatrix<f64>);

impl SignalMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::domain(format!(
                "signal matrix must be non-empty, got {}x{}",
                data.nrows(),
                data.ncols()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("signal matrix contains non-finite entries"));
        }
        Ok(SignalMatrix(data))
    }

    /// Builds an `n x l` matrix from row-major data (row = node).
    pub fn from_row_major(n: usize, l: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * l {
            return Err(Error::domain(format!(
                "expected {} values for a {n}x{l} matrix, got {}",
                n * l,
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, l, data))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn l(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Columns `start..end` as a new signal matrix.
    pub fn columns(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.l() {
            return Err(Error::domain(format!(
                "column range {start}..{end} invalid for {} snapshots",
                self.l()
            )));
        }
        Ok(SignalMatrix(self.0.columns(start, end - start).into_owned()))
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.0.norm_squared()
    }

    pub(crate) fn from_trusted(data: DMatrix<f64>) -> Self {
        debug_assert!(data.iter().all(|v| v.is_finite()));
        SignalMatrix(data)
    }
}

/// `L_s(w) = sum_m w_m a_m a_m^T`, stored as its weighted edge list plus degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLaplacian {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    degree: Vec<f64>,
}

impl SparseLaplacian {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero-weight edges `(i, j, w)` with `i < j`, in edge-index order.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    /// `out = L x`.
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (o, (d, xi)) in out.iter_mut().zip(self.degree.iter().zip(x)) {
            *o = d * xi;
        }
        for &(i, j, w) in &self.edges {
            out[i] -= w * x[j];
            out[j] -= w * x[i];
        }
    }

    pub fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (xc, mut oc) in x.column_iter().zip(out.column_iter_mut()) {
            let mut buf = vec![0.0; self.n];
            self.apply(xc.as_slice(), &mut buf);
            oc.copy_from_slice(&buf);
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut l = DMatrix::from_diagonal(&DVector::from_column_slice(&self.degree));
        for &(i, j, w) in &self.edges {
            l[(i, j)] -= w;
            l[(j, i)] -= w;
        }
        l
    }
}

pub fn assemble_laplacian(w: &EdgeSelection, graph: &CandidateGraph) -> Result<SparseLaplacian> {
    if w.len() != graph.m_total() {
        return Err(Error::domain(format!(
            "selection has {} entries, candidate graph has {} edges",
            w.len(),
            graph.m_total()
        )));
    }
    let n = graph.n();
    let mut degree = vec![0.0; n];
    let mut edges = Vec::new();
    for e in graph.edges() {
        let wm = w.weights()[e.m];
        if wm != 0.0 {
            degree[e.i] += wm;
            degree[e.j] += wm;
            edges.push((e.i, e.j, wm));
        }
    }
    Ok(SparseLaplacian { n, edges, degree })
}

/// `tr{X^T L X}`, evaluated edge by edge as `sum w (x_i - x_j)^2`.
pub fn laplacian_quadratic(lap: &SparseLaplacian, x: &SignalMatrix) -> Result<f64> {
    if lap.n() != x.n() {
        return Err(Error::domain(format!(
            "Laplacian is {0}x{0} but signals have {1} nodes",
            lap.n(),
            x.n()
        )));
    }
    let xm = x.as_matrix();
    let total = lap
        .edges()
        .iter()
        .map(|&(i, j, w)| {
            let d = xm.row(i) - xm.row(j);
            w * d.norm_squared()
        })
        .sum::<f64>();
    Ok(total.max(0.0))
}

/// `(1/L) X X^T`.
pub fn sample_covariance(x: &SignalMatrix) -> DMatrix<f64> {
    let xm = x.as_matrix();
    (xm * xm.transpose()) / x.l() as f64
}

/// Per-edge smoothness costs `c_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeCostVector(Vec<f64>);

impl EdgeCostVector {
    pub fn new(costs: Vec<f64>) -> Result<Self> {
        if let Some(bad) = costs.iter().position(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::domain(format!(
                "edge cost {} at index {bad} is negative or non-finite",
                costs[bad]
            )));
        }
        Ok(EdgeCostVector(costs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `c^T w`.
    pub fn dot(&self, w: &EdgeSelection) -> f64 {
        self.0.iter().zip(w.weights()).map(|(c, w)| c * w).sum()
    }

    pub fn scale(&self, factor: f64) -> Vec<f64> {
        self.0.iter().map(|c| c * factor).collect()
    }
}

/// Number of connected components of the subgraph given by the support of `w`.
pub fn connected_components(w: &EdgeSelection, graph: &CandidateGraph) -> Result<usize> {
    if w.len() != graph.m_total() {
        return Err(Error::domain("selection length does not match candidate graph"));
    }
    let mut parent: Vec<usize> = (0..graph.n()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut components = graph.n();
    for m in w.support() {
        let e = graph.edge_from_index(m)?;
        let (a, b) = (find(&mut parent, e.i), find(&mut parent, e.j));
        if a != b {
            parent[a] = b;
            components -= 1;
        }
    }
    Ok(components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn g(n: usize) -> CandidateGraph {
        CandidateGraph::new(n).unwrap()
    }

    #[test]
    fn edge_index_examples() {
        assert_eq!(g(4).edge_index(0, 1).unwrap(), 0);
        assert_eq!(g(4).edge_index(2, 3).unwrap(), g(4).m_total() - 1);
        // enumerate K4 lexicographically
        let mut lex = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                lex.push((i, j));
            }
        }
        let pos = lex.iter().position(|&p| p == (1, 3)).unwrap();
        assert_eq!(pos, 4);
        assert_eq!(g(4).edge_index(1, 3).unwrap(), pos);
    }

    #[test]
    fn edge_index_rejects_bad_pairs() {
        assert!(g(4).edge_index(1, 1).is_err());
        assert!(g(4).edge_index(2, 1).is_err());
        assert!(g(4).edge_index(0, 4).is_err());
        assert!(g(4).edge_from_index(6).is_err());
        assert!(g(3).incidence_column(3).is_err());
        assert!(CandidateGraph::new(1).is_err());
    }

    #[test]
    fn bijection_up_to_64_nodes() {
        for n in 2..=64 {
            let graph = g(n);
            let mut count = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let m = graph.edge_index(i, j).unwrap();
                    assert_eq!(m, count);
                    let e = graph.edge_from_index(m).unwrap();
                    assert_eq!((e.i, e.j), (i, j));
                    count += 1;
                }
            }
            assert_eq!(count, graph.m_total());
        }
    }

    #[test]
    fn paper_scale_candidate_graph() {
        assert_eq!(g(32).m_total(), 496);
    }

    #[test]
    fn incidence_columns() {
        let graph = g(3);
        let a01 = graph.incidence_column(graph.edge_index(0, 1).unwrap()).unwrap();
        assert_eq!(a01.to_dense().as_slice(), &[1.0, -1.0, 0.0]);
        let a12 = graph.incidence_column(graph.edge_index(1, 2).unwrap()).unwrap();
        assert_eq!(a12.to_dense().as_slice(), &[0.0, 1.0, -1.0]);
        for m in 0..g(7).m_total() {
            let a = g(7).incidence_column(m).unwrap().to_dense();
            assert_eq!(a.sum(), 0.0);
            assert_eq!(a.norm_squared(), 2.0);
        }
    }

    #[test]
    fn assemble_small_laplacians() {
        let graph = g(3);
        let full = assemble_laplacian(&EdgeSelection::full(3), &graph).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(full.to_dense(), expect);

        let empty = assemble_laplacian(&EdgeSelection::empty(3), &graph).unwrap();
        assert_eq!(empty.to_dense(), DMatrix::zeros(3, 3));

        let one = EdgeSelection::boolean(3, &[0]).unwrap();
        let single = assemble_laplacian(&one, &graph).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[1.0, -1.0, 0.0, -1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(single.to_dense(), expect);

        assert!(assemble_laplacian(&EdgeSelection::full(4), &graph).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let graph = g(3);
        let full = assemble_laplacian(&EdgeSelection::full(3), &graph).unwrap();
        let x = SignalMatrix::from_row_major(3, 1, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(laplacian_quadratic(&full, &x).unwrap(), 14.0);

        let constant = SignalMatrix::from_row_major(3, 2, &[2.0, -1.0, 2.0, -1.0, 2.0, -1.0]).unwrap();
        assert_eq!(laplacian_quadratic(&full, &constant).unwrap(), 0.0);

        let zero = assemble_laplacian(&EdgeSelection::empty(3), &graph).unwrap();
        assert_eq!(laplacian_quadratic(&zero, &x).unwrap(), 0.0);

        let wrong = SignalMatrix::from_row_major(2, 1, &[0.0, 1.0]).unwrap();
        assert!(laplacian_quadratic(&full, &wrong).is_err());
    }

    #[test]
    fn covariance_examples() {
        let zero = SignalMatrix::new(DMatrix::zeros(3, 4)).unwrap();
        assert_eq!(sample_covariance(&zero), DMatrix::zeros(3, 3));
        let x = SignalMatrix::from_row_major(3, 1, &[1.0, -2.0, 0.5]).unwrap();
        let v = x.as_matrix().column(0).into_owned();
        assert_eq!(sample_covariance(&x), &v * v.transpose());
    }

    #[test]
    fn signal_matrix_rejects_non_finite() {
        assert!(SignalMatrix::from_row_major(1, 2, &[1.0, f64::NAN]).is_err());
        assert!(SignalMatrix::new(DMatrix::zeros(3, 0)).is_err());
        assert!(SignalMatrix::from_row_major(2, 2, &[1.0]).is_err());
    }

    #[test]
    fn selection_constructors_validate() {
        assert!(EdgeSelection::boolean(3, &[0, 0]).is_err());
        assert!(EdgeSelection::boolean(3, &[3]).is_err());
        assert!(EdgeSelection::relaxed(vec![0.5, 0.6], 1).is_err());
        assert!(EdgeSelection::relaxed(vec![1.5, -0.5], 1).is_err());
        assert!(EdgeSelection::boolean_from_weights(vec![1.0, 0.5]).is_err());
        let w = EdgeSelection::boolean_from_weights(vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(w.k(), 2);
        assert_eq!(w.support(), vec![0, 2]);
    }

    #[test]
    fn component_count() {
        let graph = g(5);
        assert_eq!(connected_components(&EdgeSelection::empty(10), &graph).unwrap(), 5);
        assert_eq!(connected_components(&EdgeSelection::full(10), &graph).unwrap(), 1);
        let w = EdgeSelection::boolean(
            10,
            &[graph.edge_index(0, 1).unwrap(), graph.edge_index(2, 3).unwrap()],
        )
        .unwrap();
        assert_eq!(connected_components(&w, &graph).unwrap(), 3);
    }

    fn random_instance() -> impl Strategy<Value = (usize, Vec<f64>, usize, Vec<f64>)> {
        (2usize..=12, 1usize..=4).prop_flat_map(|(n, l)| {
            let m = n * (n - 1) / 2;
            (
                Just(n),
                proptest::collection::vec(0.0f64..=1.0, m),
                Just(l),
                proptest::collection::vec(-3.0f64..3.0, n * l),
            )
        })
    }

    proptest! {
        #[test]
        fn laplacian_symmetric_zero_rows_psd((n, w, l, xs) in random_instance()) {
            let graph = g(n);
            let k: f64 = w.iter().sum();
            let sel = EdgeSelection { weights: w.clone(), kind: SelectionKind::Relaxed, k: k.round() as usize };
            let lap = assemble_laplacian(&sel, &graph).unwrap();
            let dense = lap.to_dense();
            prop_assert_eq!(&dense, &dense.transpose());
            for r in 0..n {
                prop_assert!(dense.row(r).sum().abs() <= 1e-12 * k.max(1.0));
                for c in 0..n {
                    if r != c {
                        prop_assert!((-1.0..=0.0).contains(&dense[(r, c)]));
                    }
                }
            }
            let eig = dense.clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.min() >= -1e-10);

            // equals sum_m w_m a_m a_m^T
            let mut oracle = DMatrix::zeros(n, n);
            for m in 0..graph.m_total() {
                let a = graph.incidence_column(m).unwrap().to_dense();
                oracle += w[m] * &a * a.transpose();
            }
            prop_assert!((&oracle - &dense).amax() <= 1e-12);

            // quadratic form identity and trace identity with covariance
            let x = SignalMatrix::from_row_major(n, l, &xs).unwrap();
            let q = laplacian_quadratic(&lap, &x).unwrap();
            let mut sum = 0.0;
            for m in 0..graph.m_total() {
                let a = graph.incidence_column(m).unwrap().to_dense();
                sum += w[m] * (x.as_matrix().transpose() * a).norm_squared();
            }
            prop_assert!((q - sum).abs() <= 1e-10 * sum.abs().max(1e-300));
            let r = sample_covariance(&x);
            let tr = (&dense * r).trace();
            assert_relative_eq!(tr, q / l as f64, max_relative = 1e-10, epsilon = 1e-12);

            // sparse apply agrees with dense product
            let applied = lap.apply_matrix(x.as_matrix());
            prop_assert!((applied - &dense * x.as_matrix()).amax() <= 1e-12);
        }
    }
}
