//! One-step convex-relaxation learner.
//!
//! The regularized residual
//!
//! ```text
//! r(w) = tr{Y^T [I + g L_s(w)]^{-1} Y} + g tr{Y^T L_s(w) Y} - ||Y||_F^2
//! ```
//!
//! is convex in `w` (a matrix-fractional term plus a linear term). We minimize
//! it over the capped simplex `{0 <= w <= 1, 1^T w = K}` by projected gradient
//! with Armijo backtracking, then keep the `K` largest weights.
//!
//! With `X = [I + g L]^{-1} Y` and `L X = [I + g L]^{-1} L Y`, the residual
//! equals `g^2 <L Y, L X>`, which avoids the cancellation of the three-term
//! form when `g L` is small. The gradient entry for edge `m = (i, j)` is
//! `g (||Y^T a_m||^2 - ||X^T a_m||^2)`, computed as
//! `g <(Y - X)^T a_m, (Y + X)^T a_m>` with `Y - X = g L X`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::denoise::{RegularizationConfig, ShiftedSystem};
use crate::error::{Error, Result};
use crate::graph::{assemble_laplacian, CandidateGraph, EdgeSelection, SelectionKind, SignalMatrix};
use crate::noiseless::select_k_largest;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    /// Trial step for the first iteration; later iterations use a Barzilai-Borwein guess.
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        ArmijoParams {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxConfig {
    pub k: usize,
    pub gamma: f64,
    pub grad_tol: f64,
    pub obj_rel_tol: f64,
    pub max_iter: usize,
    pub armijo: ArmijoParams,
    pub denoiser: RegularizationConfig,
}

impl RelaxConfig {
    pub fn new(k: usize, gamma: f64) -> Self {
        RelaxConfig {
            k,
            gamma,
            grad_tol: 1e-9,
            obj_rel_tol: 1e-13,
            max_iter: 5000,
            armijo: ArmijoParams::default(),
            denoiser: RegularizationConfig::with_gamma(gamma),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0 && self.obj_rel_tol > 0.0) {
            return Err(Error::domain("grad_tol and obj_rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::domain("max_iter must be at least 1"));
        }
        let a = &self.armijo;
        if !(a.initial_step > 0.0) || !(a.shrink > 0.0 && a.shrink < 1.0) {
            return Err(Error::domain("Armijo step must be > 0 and shrink in (0, 1)"));
        }
        if !(a.sufficient_decrease > 0.0 && a.sufficient_decrease <= 0.5) {
            return Err(Error::domain("Armijo sufficient-decrease constant must lie in (0, 0.5]"));
        }
        self.denoiser().validate()
    }

    fn denoiser(&self) -> RegularizationConfig {
        RegularizationConfig {
            gamma: self.gamma,
            ..self.denoiser
        }
    }
}

struct Evaluation {
    r: f64,
    grad: Vec<f64>,
}

fn check_selection(y: &SignalMatrix, w: &EdgeSelection) -> Result<CandidateGraph> {
    let graph = CandidateGraph::new(y.n())?;
    if w.len() != graph.m_total() {
        return Err(Error::domain(format!(
            "selection has {} entries, signals imply {} candidate edges",
            w.len(),
            graph.m_total()
        )));
    }
    Ok(graph)
}

fn evaluate(y: &SignalMatrix, w: &EdgeSelection, reg: &RegularizationConfig, with_grad: bool) -> Result<Evaluation> {
    let graph = check_selection(y, w)?;
    let gamma = reg.gamma;
    let m_total = graph.m_total();
    if gamma == 0.0 {
        return Ok(Evaluation {
            r: 0.0,
            grad: vec![0.0; m_total],
        });
    }
    let lap = assemble_laplacian(w, &graph)?;
    let x = ShiftedSystem::new(&lap, reg)?.solve(y)?;
    let ly = lap.apply_matrix(y.as_matrix());
    let lx = lap.apply_matrix(x.as_matrix());
    let r = (gamma * gamma * ly.dot(&lx)).max(0.0);
    if !with_grad {
        return Ok(Evaluation { r, grad: Vec::new() });
    }

    // rows of D = Y - X = gamma L X and S = Y + X, transposed for contiguous access
    let d: DMatrix<f64> = (&lx * gamma).transpose();
    let s: DMatrix<f64> = (y.as_matrix() + x.as_matrix()).transpose();
    let l = y.l();
    let (ds, ss) = (d.as_slice(), s.as_slice());
    let mut grad = Vec::with_capacity(m_total);
    for e in graph.edges() {
        let (di, dj) = (&ds[e.i * l..(e.i + 1) * l], &ds[e.j * l..(e.j + 1) * l]);
        let (si, sj) = (&ss[e.i * l..(e.i + 1) * l], &ss[e.j * l..(e.j + 1) * l]);
        let mut acc = 0.0;
        for t in 0..l {
            acc += (di[t] - dj[t]) * (si[t] - sj[t]);
        }
        grad.push(gamma * acc);
    }
    Ok(Evaluation { r, grad })
}

/// Regularized residual `r(w)`; nonnegative for every `w` in the box.
pub fn r_of_w(y: &SignalMatrix, w: &EdgeSelection, gamma: f64) -> Result<f64> {
    Ok(evaluate(y, w, &RegularizationConfig::with_gamma(gamma), false)?.r)
}

/// Analytic gradient of `r` with respect to every edge weight.
pub fn grad_r(y: &SignalMatrix, w: &EdgeSelection, gamma: f64) -> Result<Vec<f64>> {
    Ok(evaluate(y, w, &RegularizationConfig::with_gamma(gamma), true)?.grad)
}

fn clamp_shift(v: &[f64], tau: f64) -> impl Iterator<Item = f64> + '_ {
    v.iter().map(move |x| (x - tau).clamp(0.0, 1.0))
}

fn project_raw(v: &[f64], k: usize) -> Vec<f64> {
    let m = v.len();
    if k == m {
        return vec![1.0; m];
    }
    let kf = k as f64;
    let (mut lo, mut hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    // sum is m at lo and 0 at hi
    lo -= 1.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if clamp_shift(v, mid).sum::<f64>() > kf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut tau = 0.5 * (lo + hi);

    // Exact threshold from the active set found by bisection.
    let (mut n_free, mut free_sum, mut n_one) = (0usize, 0.0, 0usize);
    for &x in v {
        let s = x - tau;
        if s >= 1.0 {
            n_one += 1;
        } else if s > 0.0 {
            n_free += 1;
            free_sum += x;
        }
    }
    if n_free > 0 {
        let exact = (free_sum - (kf - n_one as f64)) / n_free as f64;
        let consistent = v.iter().all(|&x| {
            let (before, after) = (x - tau, x - exact);
            if before >= 1.0 {
                after >= 1.0 - 1e-12
            } else if before > 0.0 {
                (-1e-12..=1.0 + 1e-12).contains(&after)
            } else {
                after <= 1e-12
            }
        });
        if consistent {
            tau = exact;
        }
    }
    clamp_shift(v, tau).collect()
}

/// Euclidean projection onto `{0 <= w <= 1, 1^T w = k}`.
pub fn project_capped_simplex(v: &[f64], k: usize) -> Result<EdgeSelection> {
    let m = v.len();
    if k == 0 || k > m {
        return Err(Error::domain(format!("edge budget k = {k} outside 1..={m}")));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain("cannot project a vector with non-finite entries"));
    }
    let mut w = project_raw(v, k);
    let drift = w.iter().sum::<f64>() - k as f64;
    if drift.abs() > 1e-10 * m as f64 {
        w = project_raw(&w, k);
    }
    EdgeSelection::relaxed(w, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxSolution {
    pub selection: EdgeSelection,
    pub objective: f64,
    /// `r` at every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub projected_grad_norm: f64,
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn solve_relaxation(y: &SignalMatrix, cfg: &RelaxConfig) -> Result<RelaxSolution> {
    cfg.validate()?;
    let graph = CandidateGraph::new(y.n())?;
    let m_total = graph.m_total();
    let k = cfg.k;
    if k == 0 || k > m_total {
        return Err(Error::domain(format!("edge budget k = {k} outside 1..={m_total}")));
    }
    let reg = cfg.denoiser();

    let mut w = project_capped_simplex(&vec![k as f64 / m_total as f64; m_total], k)?;
    let mut cur = evaluate(y, &w, &reg, true)?;
    let mut trace = vec![cur.r];
    let mut step = cfg.armijo.initial_step;
    let mut converged = false;
    let mut pg_norm = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        let ww = w.weights();
        let unit: Vec<f64> = ww.iter().zip(&cur.grad).map(|(w, g)| w - g).collect();
        let unit = project_capped_simplex(&unit, k)?;
        pg_norm = dist_sq(ww, unit.weights()).sqrt();
        if pg_norm <= cfg.grad_tol {
            converged = true;
            break;
        }

        let mut t = step;
        let accepted = loop {
            let trial: Vec<f64> = ww.iter().zip(&cur.grad).map(|(w, g)| w - t * g).collect();
            let cand = project_capped_simplex(&trial, k)?;
            let moved = dist_sq(ww, cand.weights());
            let next = evaluate(y, &cand, &reg, false)?;
            if next.r <= cur.r - cfg.armijo.sufficient_decrease / t * moved {
                break Some((cand, next.r));
            }
            t *= cfg.armijo.shrink;
            if t < 1e-30 || moved == 0.0 {
                break None;
            }
        };
        let Some((cand, r_new)) = accepted else {
            // no representable descent step remains
            converged = true;
            break;
        };
        iterations += 1;

        let next = evaluate(y, &cand, &reg, true)?;
        debug_assert!((next.r - r_new).abs() <= 1e-12 * r_new.abs().max(1.0));
        let rel_change = (cur.r - r_new) / cur.r.abs().max(f64::MIN_POSITIVE);

        // Barzilai-Borwein guess for the next trial step
        let s: Vec<f64> = cand.weights().iter().zip(ww).map(|(a, b)| a - b).collect();
        let ydiff: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&ydiff).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { t / cfg.armijo.shrink };

        w = cand;
        cur = Evaluation { r: r_new, grad: next.grad };
        trace.push(cur.r);
        if rel_change <= cfg.obj_rel_tol {
            converged = true;
            break;
        }
    }
    log::debug!(
        "relaxation finished after {iterations} iterations, r = {:.6e}, |pg| = {pg_norm:.3e}",
        cur.r
    );
    Ok(RelaxSolution {
        selection: w,
        objective: cur.r,
        trace,
        iterations,
        converged,
        projected_grad_norm: pg_norm,
    })
}

/// Boolean selection of the `k` largest weights; ties go to the smaller edge index.
pub fn round_topk(w: &EdgeSelection, k: usize) -> Result<EdgeSelection> {
    if w.kind() == SelectionKind::Boolean && w.k() == k {
        return Ok(w.clone());
    }
    select_k_largest(w.weights(), k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxDiagnostics {
    pub r_relaxed: f64,
    pub r_rounded: f64,
    /// `r_rounded - r_relaxed`; nonnegative up to solver accuracy.
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub projected_grad_norm: f64,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RelaxFit {
    pub selection: EdgeSelection,
    pub relaxed: EdgeSelection,
    pub denoised: SignalMatrix,
    pub diagnostics: RelaxDiagnostics,
}

pub fn learn_relax(y: &SignalMatrix, cfg: &RelaxConfig) -> Result<RelaxFit> {
    let sol = solve_relaxation(y, cfg)?;
    let selection = round_topk(&sol.selection, cfg.k)?;
    let reg = cfg.denoiser();
    let graph = CandidateGraph::new(y.n())?;
    let lap = assemble_laplacian(&selection, &graph)?;
    let denoised = ShiftedSystem::new(&lap, &reg)?.solve(y)?;
    let r_rounded = evaluate(y, &selection, &reg, false)?.r;
    Ok(RelaxFit {
        selection,
        relaxed: sol.selection,
        denoised,
        diagnostics: RelaxDiagnostics {
            r_relaxed: sol.objective,
            r_rounded,
            gap: r_rounded - sol.objective,
            iterations: sol.iterations,
            converged: sol.converged,
            projected_grad_norm: sol.projected_grad_norm,
            trace: sol.trace,
        },
    })
}
