//! Distance-based classification of sparse count data using mixture distributions.
//!
//! Each feature (OTU) of a count table is modelled by a zero-inflated
//! Poisson-Gamma mixture. Every observed count is then turned into a
//! sample-specific distribution over the mixture components, and samples are
//! classified by L² distances between those distributions inside nearest-mean
//! ("k-means") and k-nearest-neighbour classifiers.
//!
//! The numerical core is generic over the floating point type through
//! [`Scalar`]; the `*64` aliases at the crate root fix it to `f64`, which is
//! what the command-line driver uses.

pub mod classifiers;
pub mod distances;
pub mod error;
pub mod evaluation;
pub mod matrix;
pub mod mixture;
pub mod pipeline;
pub mod preprocess;
pub mod quadrature;
pub mod rng;
pub mod sampledist;
pub mod scalar;
pub mod simgen;
pub mod special;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use classifiers::{KMeansModel, KnnModel, Metric, Prediction};
pub use distances::{DistanceRecord, GramMatrix};
pub use matrix::Matrix;
pub use mixture::{
    AggregateCounts, Component, ComponentSet, FamilyConfig, FittedMixture, NestedModelFamily,
};
pub use preprocess::{OtuTable, ResolutionVector, ScreeningResult};
pub use sampledist::{OutcomeGrid, PMatrix, SampleDistribution};

pub type FittedMixture64 = FittedMixture<f64>;
pub type NestedModelFamily64 = NestedModelFamily<f64>;
pub type ComponentSet64 = ComponentSet<f64>;
pub type Component64 = Component<f64>;
pub type ResolutionVector64 = ResolutionVector<f64>;
pub type PMatrix64 = PMatrix<f64>;
pub type GramMatrix64 = GramMatrix<f64>;
pub type SampleDistribution64 = SampleDistribution<f64>;
pub type KMeansModel64 = KMeansModel<f64>;
pub type KnnModel64 = KnnModel<f64>;
pub type Matrix64 = Matrix<f64>;
pub type FittedMixture32 = FittedMixture<f32>;
pub type ComponentSet32 = ComponentSet<f32>;
