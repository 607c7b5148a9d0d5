//! Bias and correlation diagnostics for databases of binary-outcome
//! experiments.
//!
//! * [`domain`]: study records and the effect-size / z-score algebra.
//! * [`markov`]: two-state Markov bit sources, their closed-form statistics
//!   and Monte-Carlo funnel simulation.
//! * [`funnel`]: confidence envelopes, coverage, variance-factor fitting and
//!   asymmetry reports for funnel plots.
//! * [`hurst`]: rescaled-range analysis, Hurst exponents and shuffle
//!   controls; [`fgn`] supplies fractional Gaussian noise as an oracle.
//! * [`io`]: CSV ingestion, synthetic databases, JSON/CSV reports and SVG
//!   charts.
//!
//! All randomness is driven by explicit `u64` seeds (see [`rng`]).

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod fgn;
pub mod funnel;
pub mod hurst;
pub mod io;
pub mod markov;
pub mod rng;

pub use domain::{
    effect_size, merge_and_average, pi_from_z, standard_error, summarize, z_score, Condition,
    DatabaseSummary, EffectSummary, MergedSummary, StudyRecord,
};
pub use error::{Error, Result, RowError};
pub use fgn::generate_fgn;
pub use funnel::{
    asymmetry, coverage, envelope_n, envelope_pi, fit_variance_factor, wp_estimate,
    AsymmetryReport, CoverageReport, EnvelopeSpec, FunnelConfig, FunnelDataset, VarianceFit,
    WpEstimate,
};
pub use hurst::{
    c_h, hurst, randomized_baseline, rescale, rs_statistic, HurstBaseline, HurstOptions,
    HurstReport, RsPoint, SdConvention, SeriesSample, WindowSchedule,
};
pub use markov::{
    batch_means, correlation_at_distance, empirical_correlation, funnel_simulation, generate,
    self_transition_from_v, theory, BitSequence, FunnelSimulation, MarkovParams, MarkovTheory,
};
