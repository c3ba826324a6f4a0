//! Graph-level performance heterogeneity analysis.
//!
//! The crate groups the machinery needed to study how unevenly a graph
//! model performs across the graphs of a dataset: topological statistics,
//! Laplacian spectra and consensus dynamics, Ollivier-Ricci curvature,
//! tree mover's distance, spectral-gap-driven rewiring, a small
//! message-passing forward pass with Lipschitz accounting, and the
//! statistical analyses that tie per-graph predictions back to structure.

#![forbid(unsafe_code)]

pub mod analysis;
pub mod curvature;
pub mod error;
pub mod gnnlite;
pub mod graph;
pub mod graphcore;
pub mod graphio;
pub mod ot;
pub mod rewiring;
pub mod spectral;
pub mod tmd;

pub use error::{Error, Result};
pub use graph::{Dataset, Graph, Label, Task};
