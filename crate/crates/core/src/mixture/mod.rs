//! Zero-inflated Poisson-Gamma mixtures fitted to aggregate counts.

mod aggregate;
mod bootstrap;
mod component;
mod family;
mod fit;
mod negbin;
pub mod simplex;

pub use aggregate::{aggregate_counts, expected_aggregate, AggregateCounts};
pub use bootstrap::{bootstrap_average, bootstrap_average_with, BootstrapConfig, BootstrapFit};
pub use component::{Component, ComponentSet};
pub use family::{
    build_nested_family, log_grid_shapes, truncation_point, FamilyConfig, NestedModelFamily,
};
pub use fit::{aggregate_objective, fit_weights, fit_weights_with, FittedMixture};
pub use negbin::{nb_log_pmf, nb_pmf, nb_pmf_row};
