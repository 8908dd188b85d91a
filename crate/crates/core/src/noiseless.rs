//! Optimal K-edge learning from clean signals.
//!
//! The smoothness `(1/L) tr{X^T L_s(w) X}` is linear in `w`, so the Boolean
//! program with `||w||_0 = K` is solved exactly by taking the `K` cheapest
//! edges.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{
    assemble_laplacian, connected_components, laplacian_quadratic, CandidateGraph, EdgeCostVector,
    EdgeSelection, SignalMatrix, SparseLaplacian,
};

/// `c_m = sum_k (x_ik - x_jk)^2` for every candidate edge `m = (i, j)`.
pub fn edge_costs(x: &SignalMatrix, graph: &CandidateGraph) -> Result<EdgeCostVector> {
    if x.n() != graph.n() {
        return Err(Error::domain(format!(
            "signals have {} nodes, candidate graph has {}",
            x.n(),
            graph.n()
        )));
    }
    // row-major copy so each edge walks two contiguous rows
    let n = x.n();
    let l = x.l();
    let xt = x.as_matrix().transpose();
    let rows = xt.as_slice();
    let mut costs = Vec::with_capacity(graph.m_total());
    for i in 0..n {
        let ri = &rows[i * l..(i + 1) * l];
        for j in i + 1..n {
            let rj = &rows[j * l..(j + 1) * l];
            costs.push(ri.iter().zip(rj).map(|(a, b)| (a - b) * (a - b)).sum());
        }
    }
    EdgeCostVector::new(costs)
}

/// Costs from a covariance estimate: `c_m = l (R_ii + R_jj - 2 R_ij)`.
pub fn edge_costs_from_covariance(
    cov: &DMatrix<f64>,
    l: usize,
    graph: &CandidateGraph,
) -> Result<EdgeCostVector> {
    let n = graph.n();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::domain(format!(
            "covariance is {}x{}, expected {n}x{n}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let scale = cov.amax().max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-9 * scale {
                return Err(Error::domain(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let lf = l as f64;
    let costs = graph
        .edges()
        // clamp tiny negative values from rounding in the difference
        .map(|e| (lf * (cov[(e.i, e.i)] + cov[(e.j, e.j)] - 2.0 * cov[(e.i, e.j)])).max(0.0))
        .collect();
    EdgeCostVector::new(costs)
}

fn by_cost_then_index(costs: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| costs[a].total_cmp(&costs[b]).then(a.cmp(&b))
}

/// Boolean selection of the `k` smallest costs; ties go to the smaller edge index.
pub fn select_k_smallest(c: &EdgeCostVector, k: usize) -> Result<EdgeSelection> {
    let m_total = c.len();
    if k == 0 || k > m_total {
        return Err(Error::domain(format!("edge budget k = {k} outside 1..={m_total}")));
    }
    let mut order: Vec<usize> = (0..m_total).collect();
    let cmp = by_cost_then_index(c.as_slice());
    if k < m_total {
        order.select_nth_unstable_by(k - 1, &cmp);
    }
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    EdgeSelection::boolean(m_total, &chosen)
}

/// Boolean selection of the `k` largest weights; ties go to the smaller edge index.
pub(crate) fn select_k_largest(values: &[f64], k: usize) -> Result<EdgeSelection> {
    let m_total = values.len();
    if k == 0 || k > m_total {
        return Err(Error::domain(format!("edge budget k = {k} outside 1..={m_total}")));
    }
    let mut order: Vec<usize> = (0..m_total).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < m_total {
        order.select_nth_unstable_by(k - 1, cmp);
    }
    let mut chosen = order[..k].to_vec();
    chosen.sort_unstable();
    EdgeSelection::boolean(m_total, &chosen)
}

#[derive(Debug, Clone)]
pub struct NoiselessFit {
    pub selection: EdgeSelection,
    pub laplacian: SparseLaplacian,
    /// `(1/L) tr{X^T L_s(w) X}` at the selected graph.
    pub smoothness: f64,
    /// Connected components of the learned graph. Not enforced, reported only.
    pub components: usize,
}

pub fn learn_noiseless(x: &SignalMatrix, k: usize) -> Result<NoiselessFit> {
    let graph = CandidateGraph::new(x.n())?;
    let costs = edge_costs(x, &graph)?;
    let selection = select_k_smallest(&costs, k)?;
    let laplacian = assemble_laplacian(&selection, &graph)?;
    let smoothness = laplacian_quadratic(&laplacian, x)? / x.l() as f64;
    let components = connected_components(&selection, &graph)?;
    Ok(NoiselessFit {
        selection,
        laplacian,
        smoothness,
        components,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sample_covariance;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signals(rng: &mut ChaCha8Rng, n: usize, l: usize) -> SignalMatrix {
        SignalMatrix::new(DMatrix::from_fn(n, l, |_, _| rng.random_range(-2.0..2.0))).unwrap()
    }

    // exhaustive minimum of c^T w over all k-subsets
    fn brute_min(c: &[f64], k: usize) -> f64 {
        fn rec(c: &[f64], start: usize, left: usize, acc: f64, best: &mut f64) {
            if left == 0 {
                *best = best.min(acc);
                return;
            }
            for m in start..=c.len() - left {
                rec(c, m + 1, left - 1, acc + c[m], best);
            }
        }
        let mut best = f64::INFINITY;
        rec(c, 0, k, 0.0, &mut best);
        best
    }

    #[test]
    fn cost_examples() {
        let g3 = CandidateGraph::new(3).unwrap();
        let ones = SignalMatrix::new(DMatrix::from_element(3, 4, 1.0)).unwrap();
        assert!(edge_costs(&ones, &g3).unwrap().as_slice().iter().all(|&c| c == 0.0));

        let x = SignalMatrix::from_row_major(3, 1, &[0.0, 1.0, 3.0]).unwrap();
        assert_eq!(edge_costs(&x, &g3).unwrap().as_slice(), &[1.0, 9.0, 4.0]);

        let g4 = CandidateGraph::new(4).unwrap();
        assert!(edge_costs(&x, &g4).is_err());
    }

    #[test]
    fn costs_match_dense_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = CandidateGraph::new(5).unwrap();
        let x = random_signals(&mut rng, 5, 3);
        let c = edge_costs(&x, &g).unwrap();
        for m in 0..g.m_total() {
            let a = g.incidence_column(m).unwrap().to_dense();
            let aat = &a * a.transpose();
            let dense = (x.as_matrix().transpose() * aat * x.as_matrix()).trace();
            assert_relative_eq!(c.as_slice()[m], dense, max_relative = 1e-12);
        }
    }

    #[test]
    fn covariance_cost_examples() {
        let g = CandidateGraph::new(4).unwrap();
        let c = edge_costs_from_covariance(&DMatrix::identity(4, 4), 1, &g).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 2.0));
        let c = edge_costs_from_covariance(&DMatrix::from_element(4, 4, 1.0), 1, &g).unwrap();
        assert!(c.as_slice().iter().all(|&v| v == 0.0));

        let mut asym = DMatrix::identity(4, 4);
        asym[(0, 1)] = 0.5;
        assert!(edge_costs_from_covariance(&asym, 1, &g).is_err());
        assert!(edge_costs_from_covariance(&DMatrix::identity(3, 3), 1, &g).is_err());
    }

    #[test]
    fn covariance_costs_match_trace_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = CandidateGraph::new(6).unwrap();
        let x = random_signals(&mut rng, 6, 4);
        let direct = edge_costs(&x, &g).unwrap();
        let via_cov = edge_costs_from_covariance(&sample_covariance(&x), 4, &g).unwrap();
        for (a, b) in direct.as_slice().iter().zip(via_cov.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }

    #[test]
    fn selection_examples() {
        let c = EdgeCostVector::new(vec![1.0, 9.0, 4.0]).unwrap();
        assert_eq!(select_k_smallest(&c, 2).unwrap().support(), vec![0, 2]);
        let tied = EdgeCostVector::new(vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(select_k_smallest(&tied, 1).unwrap().support(), vec![0]);
        assert!(select_k_smallest(&c, 0).is_err());
        assert!(select_k_smallest(&c, 4).is_err());
        assert_eq!(select_k_smallest(&c, 3).unwrap().k(), 3);
    }

    #[test]
    fn selection_matches_exhaustive_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let c: Vec<f64> = (0..15).map(|_| rng.random_range(0.0..10.0)).collect();
        let costs = EdgeCostVector::new(c.clone()).unwrap();
        let w = select_k_smallest(&costs, 4).unwrap();
        assert_eq!(costs.dot(&w), brute_min(&c, 4));
    }

    #[test]
    fn global_optimality_over_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..100 {
            let n = rng.random_range(2..=6);
            let l = rng.random_range(1..=5);
            let g = CandidateGraph::new(n).unwrap();
            let k = rng.random_range(1..=4.min(g.m_total()));
            let x = random_signals(&mut rng, n, l);
            let c = edge_costs(&x, &g).unwrap();
            let w = select_k_smallest(&c, k).unwrap();
            let best = brute_min(c.as_slice(), k);
            assert!((c.dot(&w) - best).abs() <= 1e-12 * best.abs());
        }
    }

    #[test]
    fn constant_signal_picks_first_edges() {
        let x = SignalMatrix::new(DMatrix::from_element(5, 3, 0.7)).unwrap();
        let fit = learn_noiseless(&x, 4).unwrap();
        assert_eq!(fit.selection.support(), vec![0, 1, 2, 3]);
        assert_eq!(fit.smoothness, 0.0);
    }

    #[test]
    fn two_clusters_recovered() {
        let (a, b) = (1.5, -0.5);
        let x = SignalMatrix::from_row_major(6, 2, &[a, a, a, a, a, a, b, b, b, b, b, b]).unwrap();
        let g = CandidateGraph::new(6).unwrap();
        let c = edge_costs(&x, &g).unwrap();
        for e in g.edges() {
            let same = (e.i < 3) == (e.j < 3);
            let expect = if same { 0.0 } else { 2.0 * (a - b) * (a - b) };
            assert_eq!(c.as_slice()[e.m], expect);
        }
        let fit = learn_noiseless(&x, 6).unwrap();
        for m in fit.selection.support() {
            let e = g.edge_from_index(m).unwrap();
            assert_eq!(e.i < 3, e.j < 3);
        }
        assert_eq!(fit.smoothness, 0.0);
        assert_eq!(fit.components, 2);
    }

    #[test]
    fn smoothness_non_decreasing_in_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_signals(&mut rng, 9, 6);
        let mut prev = 0.0;
        for k in 1..=36 {
            let s = learn_noiseless(&x, k).unwrap().smoothness;
            assert!(s >= prev);
            prev = s;
        }
    }

    #[test]
    fn scaling_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = CandidateGraph::new(7).unwrap();
        let x = random_signals(&mut rng, 7, 3);
        let alpha = 2.5;
        let xs = SignalMatrix::new(x.as_matrix() * alpha).unwrap();
        let c = edge_costs(&x, &g).unwrap();
        let cs = edge_costs(&xs, &g).unwrap();
        for (a, b) in c.as_slice().iter().zip(cs.as_slice()) {
            assert_relative_eq!(alpha * alpha * a, b, max_relative = 1e-12);
        }
        let scaled = EdgeCostVector::new(c.scale(3.0)).unwrap();
        assert_eq!(select_k_smallest(&c, 5).unwrap(), select_k_smallest(&scaled, 5).unwrap());
    }

    #[test]
    fn largest_with_ties() {
        assert_eq!(select_k_largest(&[0.9, 0.1, 0.8], 2).unwrap().support(), vec![0, 2]);
        assert_eq!(select_k_largest(&[0.5, 0.5, 0.0], 1).unwrap().support(), vec![0]);
    }
}
