//! Importance-weighted subset selection.
//!
//! The crate provides the batch-streaming IWeS selector ([`iwes`]), its
//! version-space counterpart over finite hypothesis classes ([`iwesv`]),
//! uncertainty/diversity baselines ([`baselines`]), an importance-weighted
//! softmax learner ([`learners`]), exact finite-instance checks of the
//! associated guarantees ([`theory`]), and a seeded multi-trial experiment
//! harness ([`harness`]).

pub mod acceptance;
pub mod baselines;
pub mod data;
pub mod error;
pub mod exact;
pub mod harness;
pub mod iwes;
pub mod iwesv;
pub mod learners;
pub mod model;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod theory;
pub mod trace;

pub use data::{LabeledExample, Pool, WeightedExample};
pub use error::{Error, Result};
pub use model::{EmbeddingExtractor, LossFunction, ProbabilisticClassifier};
pub use rng::RngStream;
pub use trace::SelectionTrace;
