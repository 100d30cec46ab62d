//! Robust fuzzy clustering of multivariate time series by generating process.
//!
//! The pipeline is: [`series`] (ingestion and preprocessing) →
//! [`qcd`] (quantile cross-spectral features) → [`transform`] (PCA scores or
//! correlation features) → [`fuzzy`] (standard, exponential, noise-cluster
//! and trimmed fuzzy C-means) → [`eval`] (trial judging, benchmarks, MDS).
//! [`simulation`] generates the benchmark scenarios.

pub mod error;
pub mod eval;
pub mod fuzzy;
pub mod qcd;
pub mod series;
pub mod simulation;
pub mod transform;

pub use error::{Error, Result};
pub use fuzzy::{ClusterConfig, FuzzyPartition, Variant};
pub use qcd::{FeatureVector, QcdConfig, QuantileLevels, SmoothingKernel};
pub use series::{Dataset, Layout, MTSeries};
