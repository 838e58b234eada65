//! Finite coarse geometry toolkit: metric spaces and graphs, covers and
//! their nerves, metric simplicial complexes with simplicial approximation,
//! spectral data of expander families, and Euclidean embeddings together
//! with the compression audit that rules expanders out.

pub mod complex;
pub mod cover;
pub mod embed;
pub mod error;
pub mod metric;
pub mod pipeline;
pub mod rng;
pub mod spectral;

pub use complex::{ComplexMetric, ComplexPoint, MetricComplex, PLMap};
pub use cover::{Cover, CoverStats, Nerve, ProjectionMap};
pub use embed::{CompressionProfile, EmbeddedCloud, VerdictRow};
pub use error::{Error, Result};
pub use metric::{FiniteMetricSpace, Graph};
pub use pipeline::{ExperimentConfig, Overrides, RunReport, StageOutput};
pub use spectral::{Cheeger, ExpanderFamily, SpectralReport};
