//! Tikhonov graph denoising: `X = [I + gamma L_s(w)]^{-1} Y`.

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{assemble_laplacian, laplacian_quadratic, CandidateGraph, EdgeSelection, SignalMatrix, SparseLaplacian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    /// Dense Cholesky up to `dense_cap` nodes, conjugate gradient above.
    Auto,
    Dense,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationConfig {
    pub gamma: f64,
    pub solver: SolverKind,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub dense_cap: usize,
}

impl Default for RegularizationConfig {
    fn default() -> Self {
        RegularizationConfig {
            gamma: 1.0,
            solver: SolverKind::Auto,
            cg_tol: 1e-10,
            cg_max_iter: 10_000,
            dense_cap: 256,
        }
    }
}

impl RegularizationConfig {
    pub fn with_gamma(gamma: f64) -> Self {
        RegularizationConfig {
            gamma,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be finite and >= 0, got {}", self.gamma)));
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(Error::domain("cg_tol must be > 0 and cg_max_iter >= 1"));
        }
        Ok(())
    }
}

enum Backend {
    Identity,
    Dense(Cholesky<f64, Dyn>),
    Cg {
        lap: SparseLaplacian,
        gamma: f64,
        tol: f64,
        max_iter: usize,
    },
}

/// Factorized (or operator form of) `I + gamma L`, reusable across right-hand sides.
pub struct ShiftedSystem {
    n: usize,
    backend: Backend,
}

impl ShiftedSystem {
    pub fn new(lap: &SparseLaplacian, cfg: &RegularizationConfig) -> Result<Self> {
        cfg.validate()?;
        let n = lap.n();
        if cfg.gamma == 0.0 || lap.edges().is_empty() {
            return Ok(ShiftedSystem {
                n,
                backend: Backend::Identity,
            });
        }
        let dense = match cfg.solver {
            SolverKind::Dense => true,
            SolverKind::ConjugateGradient => false,
            SolverKind::Auto => n <= cfg.dense_cap,
        };
        let backend = if dense {
            let mut m = lap.to_dense() * cfg.gamma;
            for i in 0..n {
                m[(i, i)] += 1.0;
            }
            let chol = Cholesky::new(m).ok_or(Error::NotConverged {
                solver: "cholesky",
                iterations: 0,
                residual: f64::NAN,
            })?;
            Backend::Dense(chol)
        } else {
            Backend::Cg {
                lap: lap.clone(),
                gamma: cfg.gamma,
                tol: cfg.cg_tol,
                max_iter: cfg.cg_max_iter,
            }
        };
        Ok(ShiftedSystem { n, backend })
    }

    pub fn solve(&self, y: &SignalMatrix) -> Result<SignalMatrix> {
        if y.n() != self.n {
            return Err(Error::domain(format!(
                "system is {0}x{0} but signals have {1} nodes",
                self.n,
                y.n()
            )));
        }
        match &self.backend {
            Backend::Identity => Ok(y.clone()),
            Backend::Dense(chol) => Ok(SignalMatrix::from_trusted(chol.solve(y.as_matrix()))),
            Backend::Cg {
                lap,
                gamma,
                tol,
                max_iter,
            } => {
                let mut out = DMatrix::zeros(y.n(), y.l());
                for (c, b) in y.as_matrix().column_iter().enumerate() {
                    let x = pcg(lap, *gamma, b.as_slice(), *tol, *max_iter)?;
                    out.column_mut(c).copy_from_slice(&x);
                }
                Ok(SignalMatrix::from_trusted(out))
            }
        }
    }
}

// Jacobi-preconditioned CG on (I + gamma L) x = b.
fn pcg(lap: &SparseLaplacian, gamma: f64, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = lap.degree().iter().map(|d| 1.0 / (1.0 + gamma * d)).collect();
    let apply = |v: &[f64], out: &mut [f64]| {
        lap.apply(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = vi + gamma * *o;
        }
    };

    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut rel = 1.0;
    for _ in 0..max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NotConverged {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: rel,
    })
}

fn check_dims(y: &SignalMatrix, w: &EdgeSelection) -> Result<CandidateGraph> {
    let graph = CandidateGraph::new(y.n())?;
    if w.len() != graph.m_total() {
        return Err(Error::domain(format!(
            "graph has {} candidate edges but signals imply {}",
            w.len(),
            graph.m_total()
        )));
    }
    Ok(graph)
}

/// Solves `[I + gamma L_s(w)] X = Y` column by column with one shared factorization.
pub fn tikhonov_denoise(y: &SignalMatrix, w: &EdgeSelection, cfg: &RegularizationConfig) -> Result<SignalMatrix> {
    let graph = check_dims(y, w)?;
    let lap = assemble_laplacian(w, &graph)?;
    ShiftedSystem::new(&lap, cfg)?.solve(y)
}

/// Fidelity `||Y - X||_F^2` and smoothness `tr{X^T L_s(w) X}`, both unnormalized.
pub fn objective_terms(y: &SignalMatrix, x: &SignalMatrix, w: &EdgeSelection) -> Result<(f64, f64)> {
    if y.n() != x.n() || y.l() != x.l() {
        return Err(Error::domain(format!(
            "Y is {}x{} but X is {}x{}",
            y.n(),
            y.l(),
            x.n(),
            x.l()
        )));
    }
    let graph = check_dims(y, w)?;
    let lap = assemble_laplacian(w, &graph)?;
    let fidelity = (y.as_matrix() - x.as_matrix()).norm_squared();
    let smooth = laplacian_quadratic(&lap, x)?;
    Ok((fidelity, smooth))
}

/// `(1/L) (||Y - X||_F^2 + gamma tr{X^T L_s(w) X})`.
pub fn joint_objective(y: &SignalMatrix, x: &SignalMatrix, w: &EdgeSelection, gamma: f64) -> Result<f64> {
    let (fidelity, smooth) = objective_terms(y, x, w)?;
    Ok((fidelity + gamma * smooth) / y.l() as f64)
}
