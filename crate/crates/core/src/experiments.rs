//! Synthetic planted-graph data, noise injection, recovery metrics and the
//! Monte Carlo driver.
//!
//! Each trial learns a graph on the first `l` noisy snapshots and measures
//! denoising error on `l_eval` held-out snapshots drawn from the same model.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altmin::{alt_min, random_selection, AltMinConfig, AltMinInit};
use crate::denoise::{tikhonov_denoise, RegularizationConfig};
use crate::error::{Error, Result};
use crate::graph::{assemble_laplacian, laplacian_quadratic, CandidateGraph, EdgeSelection, SignalMatrix};
use crate::noiseless::learn_noiseless;
use crate::relax::{learn_relax, RelaxConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n: usize,
    pub k_true: usize,
    /// Training snapshots.
    pub l: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<CandidateGraph> {
        let graph = CandidateGraph::new(self.n)?;
        if self.k_true == 0 || self.k_true > graph.m_total() {
            return Err(Error::domain(format!(
                "planted edge count {} outside 1..={}",
                self.k_true,
                graph.m_total()
            )));
        }
        if self.l == 0 {
            return Err(Error::domain("need at least one snapshot"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::domain(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        Ok(graph)
    }
}

/// 64-bit finalizer from SplitMix64.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for an independent sub-stream `(seed, index)`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed) ^ index.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

// stream tags for the parts of one trial
pub const STREAM_GRAPH: u64 = 1;
pub const STREAM_SIGNAL: u64 = 2;
pub const STREAM_NOISE: u64 = 3;
pub const STREAM_LEARNER: u64 = 4;

pub fn plant_graph(cfg: &SynthConfig) -> Result<EdgeSelection> {
    let graph = cfg.validate()?;
    random_selection(graph.m_total(), cfg.k_true, derive_seed(cfg.seed, STREAM_GRAPH))
}

fn gaussian_matrix(n: usize, l: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // column-major fill order
    DMatrix::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng))
}

/// `X = [I + alpha L_s(w_true)]^{-1} Z` with `Z` standard Gaussian, `n x l`.
pub fn generate_smooth_signals(w_true: &EdgeSelection, cfg: &SynthConfig, l: usize) -> Result<SignalMatrix> {
    cfg.validate()?;
    let z = SignalMatrix::new(gaussian_matrix(cfg.n, l, derive_seed(cfg.seed, STREAM_SIGNAL)))?;
    tikhonov_denoise(&z, w_true, &RegularizationConfig::with_gamma(cfg.alpha))
}

/// `Y = X + N` with i.i.d. `N(0, sigma^2)` entries.
pub fn add_noise(x: &SignalMatrix, sigma: f64, seed: u64) -> Result<SignalMatrix> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    let noise = gaussian_matrix(x.n(), x.l(), seed);
    SignalMatrix::new(x.as_matrix() + noise * sigma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub edge_precision: f64,
    pub edge_recall: f64,
    pub edge_f1: f64,
    pub smoothness: f64,
    pub trials: usize,
}

pub fn evaluate(
    w_hat: &EdgeSelection,
    x_hat: &SignalMatrix,
    w_true: &EdgeSelection,
    x_true: &SignalMatrix,
) -> Result<EvalReport> {
    if x_hat.n() != x_true.n() || x_hat.l() != x_true.l() {
        return Err(Error::domain(format!(
            "estimate is {}x{} but truth is {}x{}",
            x_hat.n(),
            x_hat.l(),
            x_true.n(),
            x_true.l()
        )));
    }
    if w_hat.len() != w_true.len() {
        return Err(Error::domain("edge selections have different lengths"));
    }
    let graph = CandidateGraph::new(x_hat.n())?;
    let (n, l) = (x_hat.n() as f64, x_hat.l() as f64);
    let mse = (x_hat.as_matrix() - x_true.as_matrix()).norm_squared() / (n * l);

    let hat = w_hat.support();
    let truth = w_true.support();
    let hits = hat.iter().filter(|m| w_true.weights()[**m] != 0.0).count() as f64;
    let precision = if hat.is_empty() { 0.0 } else { hits / hat.len() as f64 };
    let recall = if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let lap = assemble_laplacian(w_hat, &graph)?;
    let smoothness = laplacian_quadratic(&lap, x_hat)? / l;
    Ok(EvalReport {
        mse,
        edge_precision: precision,
        edge_recall: recall,
        edge_f1: f1,
        smoothness,
        trials: 1,
    })
}

/// A graph learner run on the noisy training split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Learner {
    /// No graph: the raw noisy signals are the estimate.
    Raw,
    /// Rank ordering applied directly to the noisy signals.
    Noiseless,
    AltMin { max_iter: usize, init: AltMinInit },
    Relax,
}

impl Learner {
    pub fn name(&self) -> &'static str {
        match self {
            Learner::Raw => "raw",
            Learner::Noiseless => "noiseless",
            Learner::AltMin { .. } => "altmin",
            Learner::Relax => "relax",
        }
    }

    pub fn altmin() -> Self {
        Learner::AltMin {
            max_iter: 50,
            init: AltMinInit::RandomUniform,
        }
    }

    /// Learns a selection from `y`. `seed` feeds randomized learners.
    pub fn learn(&self, y: &SignalMatrix, k: usize, gamma: f64, seed: u64) -> Result<EdgeSelection> {
        let graph = CandidateGraph::new(y.n())?;
        match *self {
            Learner::Raw => Ok(EdgeSelection::empty(graph.m_total())),
            Learner::Noiseless => Ok(learn_noiseless(y, k)?.selection),
            Learner::AltMin { max_iter, init } => {
                let mut cfg = AltMinConfig::new(k, gamma, seed);
                cfg.max_iter = max_iter;
                cfg.init = init;
                Ok(alt_min(y, &cfg)?.selection)
            }
            Learner::Relax => Ok(learn_relax(y, &RelaxConfig::new(k, gamma))?.selection),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Edge budget handed to the learners.
    pub k: usize,
    /// Regularization used both for learning and for denoising the held-out split.
    pub gamma: f64,
    /// Held-out snapshots.
    pub l_eval: usize,
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
}

/// Metrics for one seeded trial, one report per learner.
pub fn run_trial(learners: &[Learner], cfg: &SynthConfig, opts: &TrialOptions) -> Result<Vec<EvalReport>> {
    let graph = cfg.validate()?;
    if opts.l_eval == 0 {
        return Err(Error::domain("need at least one held-out snapshot"));
    }
    if opts.k == 0 || opts.k > graph.m_total() {
        return Err(Error::domain(format!("edge budget k = {} outside 1..={}", opts.k, graph.m_total())));
    }
    let w_true = plant_graph(cfg)?;
    let x = generate_smooth_signals(&w_true, cfg, cfg.l + opts.l_eval)?;
    let y = add_noise(&x, cfg.sigma, derive_seed(cfg.seed, STREAM_NOISE))?;
    let total = cfg.l + opts.l_eval;
    let (y_train, y_eval) = (y.columns(0, cfg.l)?, y.columns(cfg.l, total)?);
    let x_eval = x.columns(cfg.l, total)?;
    let reg = RegularizationConfig::with_gamma(opts.gamma);

    learners
        .iter()
        .map(|learner| {
            let w_hat = learner.learn(&y_train, opts.k, opts.gamma, derive_seed(cfg.seed, STREAM_LEARNER))?;
            let x_hat = tikhonov_denoise(&y_eval, &w_hat, &reg)?;
            evaluate(&w_hat, &x_hat, &w_true, &x_eval)
        })
        .collect()
}

/// Mean and standard error of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub learner: Learner,
    pub mse: Stat,
    pub edge_precision: Stat,
    pub edge_recall: Stat,
    pub edge_f1: Stat,
    pub smoothness: Stat,
    pub trials: usize,
}

impl AggregateReport {
    pub fn mean_report(&self) -> EvalReport {
        EvalReport {
            mse: self.mse.mean,
            edge_precision: self.edge_precision.mean,
            edge_recall: self.edge_recall.mean,
            edge_f1: self.edge_f1.mean,
            smoothness: self.smoothness.mean,
            trials: self.trials,
        }
    }
}

// Neumaier-compensated sum, taken in trial order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn stat(values: &[f64]) -> Stat {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let std_err = if values.len() > 1 {
        let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Stat { mean, std_err }
}

/// Runs `trials` independent trials and aggregates each learner's metrics.
/// Trial `t` uses seed `derive_seed(cfg.seed, t)`, so results do not depend
/// on the number of worker threads.
pub fn monte_carlo(
    learners: &[Learner],
    cfg: &SynthConfig,
    opts: &TrialOptions,
    trials: usize,
) -> Result<Vec<AggregateReport>> {
    cfg.validate()?;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let one = |t: usize| -> Result<Vec<EvalReport>> {
        let seed = derive_seed(cfg.seed, t as u64);
        let trial_cfg = SynthConfig { seed, ..*cfg };
        run_trial(learners, &trial_cfg, opts).map_err(|e| Error::Trial {
            trial: t,
            seed,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<Vec<EvalReport>>> = if opts.jobs == 1 {
        (0..trials).map(one).collect()
    } else if opts.jobs == 0 {
        (0..trials).into_par_iter().map(one).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(opts.jobs)
            .build()
            .map_err(|e| Error::domain(format!("cannot build worker pool: {e}")))?;
        pool.install(|| (0..trials).into_par_iter().map(one).collect())
    };
    let per_trial: Vec<Vec<EvalReport>> = results.into_iter().collect::<Result<_>>()?;

    Ok(learners
        .iter()
        .enumerate()
        .map(|(idx, learner)| {
            let col = |f: fn(&EvalReport) -> f64| -> Vec<f64> { per_trial.iter().map(|r| f(&r[idx])).collect() };
            AggregateReport {
                learner: *learner,
                mse: stat(&col(|r| r.mse)),
                edge_precision: stat(&col(|r| r.edge_precision)),
                edge_recall: stat(&col(|r| r.edge_recall)),
                edge_f1: stat(&col(|r| r.edge_f1)),
                smoothness: stat(&col(|r| r.smoothness)),
                trials,
            }
        })
        .collect())
}
