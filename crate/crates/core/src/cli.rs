//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage or input error, 3 numerical non-convergence.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::altmin::{alt_min, AltMinConfig, AltMinInit};
use crate::denoise::{objective_terms, tikhonov_denoise, RegularizationConfig, SolverKind};
use crate::error::{Error, Result};
use crate::experiments::{
    add_noise, derive_seed, generate_smooth_signals, monte_carlo, plant_graph, Learner, SynthConfig, TrialOptions,
    STREAM_NOISE,
};
use crate::graph::{CandidateGraph, SignalMatrix};
use crate::io::{read_graph, read_signals, write_graph, write_signals, GraphFile};
use crate::noiseless::learn_noiseless;
use crate::relax::{learn_relax, RelaxConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "laplace-forge", version, about = "Learn sparse graph topologies from smooth signals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a K-edge graph from a signal file.
    Learn {
        #[command(subcommand)]
        method: LearnMethod,
    },
    /// Denoise signals on a fixed graph.
    Denoise(DenoiseArgs),
    /// Generate a planted graph with clean and noisy signals.
    Synth(SynthArgs),
    /// Sweep K (smoothness) or sigma (Monte Carlo MSE) and emit CSV series.
    Eval(EvalArgs),
}

#[derive(Debug, Subcommand)]
pub enum LearnMethod {
    /// Rank ordering of edge costs on the given signals.
    Noiseless(LearnArgs),
    /// Alternating minimization over signals and edges.
    Altmin {
        #[command(flatten)]
        common: LearnArgs,
        #[arg(long, value_enum, default_value_t = InitArg::Random)]
        init: InitArg,
    },
    /// Convex relaxation solved by projected gradient, then top-K rounding.
    Relax {
        #[command(flatten)]
        common: LearnArgs,
        /// Relative objective-change tolerance.
        #[arg(long, default_value_t = 1e-13)]
        obj_tol: f64,
        /// Also write the relaxed (fractional) weights here.
        #[arg(long)]
        relaxed: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InitArg {
    Random,
    Sorting,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SolverArg {
    Auto,
    Dense,
    Cg,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Auto => SolverKind::Auto,
            SolverArg::Dense => SolverKind::Dense,
            SolverArg::Cg => SolverKind::ConjugateGradient,
        }
    }
}

#[derive(Debug, Args)]
pub struct LearnArgs {
    /// Signal CSV, rows = nodes, columns = snapshots.
    #[arg(long)]
    pub input: PathBuf,
    /// Graph file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Number of edges to learn.
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Stationarity tolerance (relax) or CG residual tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Input rows are snapshots and columns are nodes.
    #[arg(long)]
    pub transpose: bool,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    /// Also write the denoised signals here.
    #[arg(long)]
    pub denoised: Option<PathBuf>,
    /// Accepted for symmetry with `eval`; learners are single threaded.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub transpose: bool,
    #[arg(long, value_enum, default_value_t = SolverArg::Auto)]
    pub solver: SolverArg,
    /// CG relative residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    /// Planted edge count.
    #[arg(long)]
    pub k: usize,
    /// Snapshots.
    #[arg(long)]
    pub l: usize,
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for graph.json, clean.csv and noisy.csv.
    #[arg(long, default_value = ".")]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    K,
    Sigma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LearnerArg {
    Raw,
    Noiseless,
    Altmin,
    Relax,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub sweep: SweepArg,
    /// `start:end:step` (inclusive) or a comma-separated list.
    #[arg(long)]
    pub values: Option<String>,
    /// Clean signal CSV for the K sweep; synthesized from the flags below when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub transpose: bool,
    /// CSV series to write; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Planted edges, also the learners' budget in the sigma sweep.
    #[arg(long, default_value_t = 40)]
    pub k: usize,
    #[arg(long, default_value_t = 50)]
    pub l: usize,
    #[arg(long, default_value_t = 100)]
    pub l_eval: usize,
    #[arg(long, default_value_t = 10.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for Monte Carlo trials; 0 = all cores.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [LearnerArg::Raw, LearnerArg::Noiseless, LearnerArg::Altmin, LearnerArg::Relax])]
    pub learners: Vec<LearnerArg>,
    /// Initialization used by the alternating learner.
    #[arg(long, value_enum, default_value_t = InitArg::Random)]
    pub altmin_init: InitArg,
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_not_converged() {
        EXIT_NOT_CONVERGED
    } else {
        EXIT_INPUT
    }
}

fn not_converged(solver: &'static str, iterations: usize, residual: f64) -> Error {
    Error::NotConverged {
        solver,
        iterations,
        residual,
    }
}

fn reg_config(gamma: f64, solver: SolverArg, tol: Option<f64>, max_iter: Option<usize>) -> RegularizationConfig {
    let d = RegularizationConfig::default();
    RegularizationConfig {
        gamma,
        solver: solver.into(),
        cg_tol: tol.unwrap_or(d.cg_tol),
        cg_max_iter: max_iter.unwrap_or(d.cg_max_iter),
        dense_cap: d.dense_cap,
    }
}

fn write_denoised(path: Option<&Path>, x: &SignalMatrix) -> Result<()> {
    if let Some(p) = path {
        write_signals(p, x)?;
    }
    Ok(())
}

fn run_learn(method: &LearnMethod, out: &mut dyn Write) -> Result<()> {
    let common = match method {
        LearnMethod::Noiseless(c) => c,
        LearnMethod::Altmin { common, .. } | LearnMethod::Relax { common, .. } => common,
    };
    let y = read_signals(&common.input, common.transpose)?;
    let graph = CandidateGraph::new(y.n())?;
    if common.k == 0 || common.k > graph.m_total() {
        return Err(Error::domain(format!(
            "--k {} is infeasible: {} nodes give {} candidate edges",
            common.k,
            y.n(),
            graph.m_total()
        )));
    }
    writeln!(out, "nodes: {}", y.n())?;
    writeln!(out, "snapshots: {}", y.l())?;
    writeln!(out, "candidate_edges: {}", graph.m_total())?;

    match method {
        LearnMethod::Noiseless(c) => {
            let fit = learn_noiseless(&y, c.k)?;
            write_graph(&c.output, &GraphFile::from_selection(&fit.selection, &graph)?)?;
            writeln!(out, "edges: {}", fit.selection.k())?;
            writeln!(out, "smoothness: {}", fit.smoothness)?;
            writeln!(out, "components: {}", fit.components)?;
            if let Some(p) = &c.denoised {
                let reg = reg_config(c.gamma, c.solver, c.tol, c.max_iter);
                write_signals(p, &tikhonov_denoise(&y, &fit.selection, &reg)?)?;
            }
            Ok(())
        }
        LearnMethod::Altmin { common: c, init } => {
            let mut cfg = AltMinConfig::new(c.k, c.gamma, c.seed);
            cfg.max_iter = c.max_iter.unwrap_or(cfg.max_iter);
            cfg.init = init_of(*init);
            cfg.denoiser = reg_config(c.gamma, c.solver, c.tol, None);
            let res = alt_min(&y, &cfg)?;
            write_graph(&c.output, &GraphFile::from_selection(&res.selection, &graph)?)?;
            write_denoised(c.denoised.as_deref(), &res.denoised)?;
            writeln!(out, "edges: {}", res.selection.k())?;
            writeln!(out, "objective: {}", res.objective)?;
            writeln!(out, "iterations: {}", res.trace.iterations_run)?;
            writeln!(out, "converged: {}", res.trace.converged)?;
            writeln!(out, "cycled: {}", res.trace.cycled)?;
            if !res.trace.converged && !res.trace.cycled {
                let gap = res.trace.objective_per_iteration.windows(2).last().map_or(0.0, |p| p[0] - p[1]);
                return Err(not_converged("alternating minimization", res.trace.iterations_run, gap));
            }
            Ok(())
        }
        LearnMethod::Relax {
            common: c,
            obj_tol,
            relaxed,
        } => {
            let mut cfg = RelaxConfig::new(c.k, c.gamma);
            cfg.obj_rel_tol = *obj_tol;
            if let Some(t) = c.tol {
                cfg.grad_tol = t;
            }
            cfg.max_iter = c.max_iter.unwrap_or(cfg.max_iter);
            cfg.denoiser = reg_config(c.gamma, c.solver, None, None);
            let fit = learn_relax(&y, &cfg)?;
            write_graph(&c.output, &GraphFile::from_selection(&fit.selection, &graph)?)?;
            if let Some(p) = relaxed {
                write_graph(p, &GraphFile::from_selection(&fit.relaxed, &graph)?)?;
            }
            write_denoised(c.denoised.as_deref(), &fit.denoised)?;
            let d = &fit.diagnostics;
            writeln!(out, "edges: {}", fit.selection.k())?;
            writeln!(out, "r_relaxed: {}", d.r_relaxed)?;
            writeln!(out, "r_rounded: {}", d.r_rounded)?;
            writeln!(out, "relaxation_gap: {}", d.gap)?;
            writeln!(out, "iterations: {}", d.iterations)?;
            writeln!(out, "converged: {}", d.converged)?;
            if !d.converged {
                return Err(not_converged("projected gradient", d.iterations, d.projected_grad_norm));
            }
            Ok(())
        }
    }
}

fn run_denoise(a: &DenoiseArgs, out: &mut dyn Write) -> Result<()> {
    let y = read_signals(&a.input, a.transpose)?;
    let (w, graph) = read_graph(&a.graph)?.to_selection()?;
    if graph.n() != y.n() {
        return Err(Error::domain(format!(
            "graph has {} nodes but signals have {}",
            graph.n(),
            y.n()
        )));
    }
    let reg = reg_config(a.gamma, a.solver, Some(a.tol), Some(a.max_iter));
    let x = tikhonov_denoise(&y, &w, &reg)?;
    write_signals(&a.output, &x)?;
    let (fidelity, smooth) = objective_terms(&y, &x, &w)?;
    let l = y.l() as f64;
    writeln!(out, "fidelity: {}", fidelity / l)?;
    writeln!(out, "smoothness: {}", smooth / l)?;
    writeln!(out, "objective: {}", (fidelity + a.gamma * smooth) / l)?;
    Ok(())
}

fn run_synth(a: &SynthArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = SynthConfig {
        n: a.n,
        k_true: a.k,
        l: a.l,
        alpha: a.alpha,
        sigma: a.sigma,
        seed: a.seed,
    };
    let graph = cfg.validate()?;
    let w = plant_graph(&cfg)?;
    let x = generate_smooth_signals(&w, &cfg, cfg.l)?;
    let y = add_noise(&x, cfg.sigma, derive_seed(cfg.seed, STREAM_NOISE))?;
    std::fs::create_dir_all(&a.output)?;
    write_graph(&a.output.join("graph.json"), &GraphFile::from_selection(&w, &graph)?)?;
    write_signals(&a.output.join("clean.csv"), &x)?;
    write_signals(&a.output.join("noisy.csv"), &y)?;
    writeln!(out, "wrote {}x{} signals and a {}-edge graph to {}", x.n(), x.l(), w.k(), a.output.display())?;
    Ok(())
}

/// Parses `start:end:step` (inclusive end) or `a,b,c`.
pub fn parse_values(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::domain(format!("cannot parse --values '{spec}'"));
    if spec.contains(':') {
        let parts: Vec<f64> = spec
            .split(':')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let [start, end, step] = parts[..] else {
            return Err(bad());
        };
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start + step * i as f64).collect())
    } else {
        spec.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect()
    }
}

fn init_of(arg: InitArg) -> AltMinInit {
    match arg {
        InitArg::Random => AltMinInit::RandomUniform,
        InitArg::Sorting => AltMinInit::FromNoisySorting,
    }
}

fn learner_of(arg: LearnerArg, init: InitArg) -> Learner {
    match arg {
        LearnerArg::Raw => Learner::Raw,
        LearnerArg::Noiseless => Learner::Noiseless,
        LearnerArg::Altmin => Learner::AltMin {
            max_iter: 50,
            init: init_of(init),
        },
        LearnerArg::Relax => Learner::Relax,
    }
}

fn run_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let synth = SynthConfig {
        n: a.n,
        k_true: a.k,
        l: a.l,
        alpha: a.alpha,
        sigma: a.sigma,
        seed: a.seed,
    };
    let mut buf = Vec::new();
    match a.sweep {
        SweepArg::K => {
            let x = match &a.input {
                Some(p) => read_signals(p, a.transpose)?,
                None => {
                    let w = plant_graph(&synth)?;
                    generate_smooth_signals(&w, &synth, synth.l)?
                }
            };
            let m_total = CandidateGraph::new(x.n())?.m_total();
            let values = match &a.values {
                Some(v) => parse_values(v)?,
                None => (1..=m_total).map(|k| k as f64).collect(),
            };
            writeln!(buf, "k,smoothness,components")?;
            for v in values {
                if v.fract() != 0.0 || v < 1.0 || v > m_total as f64 {
                    return Err(Error::domain(format!("K = {v} outside 1..={m_total}")));
                }
                let fit = learn_noiseless(&x, v as usize)?;
                writeln!(buf, "{},{},{}", v as usize, fit.smoothness, fit.components)?;
            }
        }
        SweepArg::Sigma => {
            let values = match &a.values {
                Some(v) => parse_values(v)?,
                None => (1..=10).map(|i| i as f64 / 10.0).collect(),
            };
            let learners: Vec<Learner> = a.learners.iter().map(|l| learner_of(*l, a.altmin_init)).collect();
            let opts = TrialOptions {
                k: a.k,
                gamma: a.gamma,
                l_eval: a.l_eval,
                jobs: a.jobs,
            };
            writeln!(
                buf,
                "sigma,learner,trials,mse,mse_se,precision,precision_se,recall,recall_se,f1,f1_se,smoothness,smoothness_se"
            )?;
            for sigma in values {
                let cfg = SynthConfig { sigma, ..synth };
                for r in monte_carlo(&learners, &cfg, &opts, a.trials)? {
                    writeln!(
                        buf,
                        "{sigma},{},{},{},{},{},{},{},{},{},{},{},{}",
                        r.learner.name(),
                        r.trials,
                        r.mse.mean,
                        r.mse.std_err,
                        r.edge_precision.mean,
                        r.edge_precision.std_err,
                        r.edge_recall.mean,
                        r.edge_recall.std_err,
                        r.edge_f1.mean,
                        r.edge_f1.std_err,
                        r.smoothness.mean,
                        r.smoothness.std_err
                    )?;
                }
            }
        }
    }
    match &a.output {
        Some(p) => std::fs::write(p, &buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(())
}

/// Runs a parsed command, writing the human-readable report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Learn { method } => run_learn(method, out),
        Command::Denoise(a) => run_denoise(a, out),
        Command::Synth(a) => run_synth(a, out),
        Command::Eval(a) => run_eval(a, out),
    }
}
