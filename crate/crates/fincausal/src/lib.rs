//! Rolling-window causal structure learning for multivariate financial
//! return series.
//!
//! The crate estimates a structural vector autoregression over sliding
//! calendar windows of a daily return panel: a reduced-form VAR is fitted per
//! window (lag order chosen by BIC), the instantaneous effect matrix is
//! identified from the VAR residuals with a DirectLiNGAM causal ordering, and
//! every coefficient is validated by resampling. The resulting per-window
//! factor networks feed network analytics (edge counts, Jaccard stability,
//! out-degrees) and Poisson log-linear regressions that relate network
//! density to volatility and business-cycle indicators.
//!
//! Entry points:
//!
//! - [`panel`] — return-panel ingestion, date alignment, sliding windows.
//! - [`stats`] — summary statistics, cross-correlation functions,
//!   expected-shortfall z-score indicators.
//! - [`var`] / [`lingam`] — the two estimation stages.
//! - [`netinfer`] — resampled edge significance and network construction.
//! - [`graph`] — network analytics.
//! - [`glm`] — Poisson log-linear density regressions.
//! - [`synth`] — ground-truth generators and brute-force oracles.
//! - [`pipeline`] — batch orchestration of the full analysis.
//!
//! The `examples/` directory contains one runnable example per capability;
//! start with `simulate_and_recover`.

pub mod error;
pub mod glm;
pub mod graph;
pub mod lingam;
pub mod netinfer;
pub mod panel;
pub mod pipeline;
pub mod stats;
pub mod synth;
pub mod var;

mod linalg;

pub use error::{Error, Result};
