//! Unitary tree tensor network (TTN) and MERA classifiers on qubit-encoded
//! features, simulated with density matrices under tunable local dephasing.
//!
//! At dephasing rate `p = 1` every node collapses to a stochastic matrix and
//! the network becomes a classical Bayesian network; [`bayes`] implements that
//! limit directly and serves as an independent route for the `p = 1` forward
//! pass.
//!
//! Module map:
//! - [`linalg`]: complex matrices, partial traces, `exp(iH)` and its derivative.
//! - [`channels`]: local dephasing and the full-dephase superoperator.
//! - [`data`]: IDX ingestion, 8x8 compression, PCA, class grouping, qubit encoding.
//! - [`network`]: TTN / MERA topologies, evaluation plans, the density-matrix forward pass.
//! - [`bayes`]: the fully dephased limit.
//! - [`train`]: loss, reverse-mode gradients, Adam, the training loop.
//! - [`analysis`]: regression-coefficient structure of a dephased node.
//! - [`experiment`]: sweeps, CSV and SVG output used by the CLI.

pub mod analysis;
pub mod bayes;
pub mod channels;
pub mod data;
pub mod experiment;
pub mod linalg;
pub mod network;
pub mod train;

mod error;

pub use error::{Error, Result};
pub use linalg::{CMatrix, DensityMatrix, HermitianParam, UnitaryMatrix, C64};
pub use network::{AncillaScheme, ModelKind, Network, NetworkTopology, Prediction, Route};
