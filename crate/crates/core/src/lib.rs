//! Sparse graph topology learning from smooth graph signals.
//!
//! A graph on `N` nodes is chosen as a `K`-edge subgraph of the complete
//! candidate graph, encoded by an edge selection vector `w`. Three learners
//! are provided:
//!
//! - [`noiseless::learn_noiseless`]: exact rank ordering of per-edge costs
//!   for clean signals.
//! - [`altmin::alt_min`]: alternating Tikhonov denoising and rank ordering
//!   for noisy signals.
//! - [`relax::learn_relax`]: convex relaxation over the capped simplex,
//!   solved by projected gradient and rounded to `K` edges.
//!
//! [`experiments`] holds the synthetic-data and Monte Carlo harness and
//! [`cli`] the command-line front end.

pub mod altmin;
pub mod cli;
pub mod denoise;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod io;
pub mod noiseless;
pub mod relax;

pub use error::{Error, Result};
pub use graph::{
    assemble_laplacian, laplacian_quadratic, sample_covariance, CandidateGraph, Edge, EdgeCostVector,
    EdgeSelection, SelectionKind, SignalMatrix, SparseLaplacian,
};
