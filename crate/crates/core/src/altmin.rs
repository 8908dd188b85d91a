//! Joint graph learning and denoising by alternating minimization.
//!
//! Each outer iteration runs an X-step (closed-form Tikhonov denoise for the
//! current selection) followed by a w-step (rank ordering of the edge costs
//! of the denoised signals). Both steps are exact minimizers of the joint
//! objective in their own block, so the objective never increases.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::denoise::{joint_objective, tikhonov_denoise, RegularizationConfig};
use crate::error::{Error, Result};
use crate::graph::{CandidateGraph, EdgeSelection, SignalMatrix};
use crate::noiseless::{edge_costs, select_k_smallest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AltMinInit {
    /// Uniformly random K-subset of the candidate edges.
    RandomUniform,
    /// Rank ordering on the noisy signals themselves.
    FromNoisySorting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AltMinConfig {
    pub k: usize,
    pub gamma: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub init: AltMinInit,
    pub denoiser: RegularizationConfig,
}

impl AltMinConfig {
    pub fn new(k: usize, gamma: f64, seed: u64) -> Self {
        AltMinConfig {
            k,
            gamma,
            max_iter: 50,
            seed,
            init: AltMinInit::RandomUniform,
            denoiser: RegularizationConfig::with_gamma(gamma),
        }
    }

    fn denoiser(&self) -> RegularizationConfig {
        RegularizationConfig {
            gamma: self.gamma,
            ..self.denoiser
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltMinTrace {
    /// Joint objective after every half-step: X-step, w-step, X-step, ...
    pub objective_per_iteration: Vec<f64>,
    pub iterations_run: usize,
    /// True when a fixed point `w[i+1] == w[i]` was reached.
    pub converged: bool,
    /// True when a previously visited selection recurred without being a fixed point.
    pub cycled: bool,
}

#[derive(Debug, Clone)]
pub struct AltMinResult {
    pub selection: EdgeSelection,
    pub denoised: SignalMatrix,
    pub objective: f64,
    pub trace: AltMinTrace,
    /// Every selection used by an X-step, in order.
    pub selections: Vec<EdgeSelection>,
}

/// Uniformly random `k`-subset of `m_total` edges from a seeded stream.
pub fn random_selection(m_total: usize, k: usize, seed: u64) -> Result<EdgeSelection> {
    if k == 0 || k > m_total {
        return Err(Error::domain(format!("edge budget k = {k} outside 1..={m_total}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool: Vec<usize> = (0..m_total).collect();
    let (chosen, _) = pool.partial_shuffle(&mut rng, k);
    let mut chosen = chosen.to_vec();
    chosen.sort_unstable();
    EdgeSelection::boolean(m_total, &chosen)
}

/// The w-step: rank ordering of the costs of `x`, keeping `current` unless the
/// new selection lowers `c^T w` by more than `tie_tol`.
pub fn w_step(
    x: &SignalMatrix,
    current: &EdgeSelection,
    k: usize,
    tie_tol: f64,
) -> Result<EdgeSelection> {
    let graph = CandidateGraph::new(x.n())?;
    let costs = edge_costs(x, &graph)?;
    let next = select_k_smallest(&costs, k)?;
    if current.len() == next.len() && current.k() == k && costs.dot(current) - costs.dot(&next) <= tie_tol {
        return Ok(current.clone());
    }
    Ok(next)
}

/// Absolute tie tolerance for the w-step, relative to the data energy.
pub fn tie_tolerance(y: &SignalMatrix) -> f64 {
    1e-14 * y.frobenius_sq()
}

pub fn alt_min(y: &SignalMatrix, cfg: &AltMinConfig) -> Result<AltMinResult> {
    let graph = CandidateGraph::new(y.n())?;
    let m_total = graph.m_total();
    if cfg.k == 0 || cfg.k > m_total {
        return Err(Error::domain(format!("edge budget k = {} outside 1..={m_total}", cfg.k)));
    }
    if cfg.max_iter == 0 {
        return Err(Error::domain("max_iter must be at least 1"));
    }
    let reg = cfg.denoiser();
    reg.validate()?;

    let mut w = match cfg.init {
        AltMinInit::RandomUniform => random_selection(m_total, cfg.k, cfg.seed)?,
        AltMinInit::FromNoisySorting => select_k_smallest(&edge_costs(y, &graph)?, cfg.k)?,
    };

    let mut trace = AltMinTrace {
        objective_per_iteration: Vec::new(),
        iterations_run: 0,
        converged: false,
        cycled: false,
    };
    let tie_tol = tie_tolerance(y);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut selections = Vec::new();
    let mut best: Option<(f64, EdgeSelection, SignalMatrix)> = None;

    for iter in 0..cfg.max_iter {
        trace.iterations_run = iter + 1;
        seen.insert(w.support());
        selections.push(w.clone());

        let x = tikhonov_denoise(y, &w, &reg)?;
        let obj_x = joint_objective(y, &x, &w, cfg.gamma)?;
        trace.objective_per_iteration.push(obj_x);
        if best.as_ref().is_none_or(|(b, _, _)| obj_x < *b) {
            best = Some((obj_x, w.clone(), x.clone()));
        }

        let w_next = w_step(&x, &w, cfg.k, tie_tol)?;
        let obj_w = joint_objective(y, &x, &w_next, cfg.gamma)?;
        trace.objective_per_iteration.push(obj_w);
        log::debug!("altmin iter {iter}: objective {obj_x:.6e} -> {obj_w:.6e}");

        if w_next == w {
            trace.converged = true;
            break;
        }
        if seen.contains(&w_next.support()) {
            trace.cycled = true;
            break;
        }
        w = w_next;
    }

    let (objective, selection, denoised) = best.expect("at least one iteration runs");
    Ok(AltMinResult {
        selection,
        denoised,
        objective,
        trace,
        selections,
    })
}
