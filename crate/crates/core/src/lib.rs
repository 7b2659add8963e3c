//! Benchmark compression from model hidden states.
//!
//! The pipeline learns aligned item embeddings from heterogeneous source-model
//! hidden states ([`align`]), clusters their normalized consensus on the unit
//! sphere to pick one anchor item per cluster ([`coreset`]), and extrapolates a
//! target model's full-benchmark accuracy from its anchor scores with a ridge
//! regressor ([`extrap`]). [`analysis`] holds the factor-association statistics
//! used to interpret the embedding geometry, and [`runner`] wires everything
//! into repeated-split experiments.

pub mod align;
pub mod analysis;
pub mod coreset;
pub mod dataio;
pub mod error;
pub mod extrap;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
