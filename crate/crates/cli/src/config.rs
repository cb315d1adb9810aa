//! Command-line arguments and their config-file counterparts.
//!
//! Every subcommand has one argument struct whose fields are all optional.
//! The same struct is parsed from flags, read from a section of the config
//! file and written back, fully resolved, into the run manifest. Values are
//! layered as flags over file over built-in defaults.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dcmd::Error;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "dcmd",
    version,
    about = "Classify sparse count data by distances between mixture distributions"
)]
pub struct Cli {
    /// TOML config file, or the manifest of an earlier run to repeat it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic OTU table from a scenario.
    Simulate(SimulateArgs),
    /// Fit per-OTU mixtures to a table and save the model.
    Fit(FitArgs),
    /// Train a classifier and predict held-out samples.
    Classify(ClassifyArgs),
    /// Replicated simulation benchmark of every method.
    Benchmark(BenchmarkArgs),
    /// Two-group rank test per OTU with false discovery rate control.
    Screen(ScreenArgs),
}

/// Keeps every field of `self` that is set and takes the rest from `base`.
pub trait Layered: Sized {
    fn over(self, base: Self) -> Self;
}

macro_rules! layered {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl Layered for $name {
            fn over(self, base: Self) -> Self {
                Self { $($field: self.$field.or(base.$field)),* }
            }
        }
    };
}

/// A layer value that must be present once defaults are applied.
pub fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("missing required option `{name}`")).into())
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    /// Preset scenario id (1 to 6).
    #[arg(long)]
    pub scenario: Option<u32>,
    /// TOML file with a full scenario definition instead of a preset.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    /// Seed of every random stream; equal seeds give identical files.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Samples per class (the presets use 400).
    #[arg(long)]
    pub class_size: Option<usize>,
    /// Number of OTUs (the presets use 25).
    #[arg(long)]
    pub otus: Option<usize>,
    /// Draw rates uniformly inside each bin rather than at bin centres.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub jitter: Option<bool>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Layered for SimulateArgs {
    fn over(self, base: Self) -> Self {
        // A scenario chosen in a higher layer replaces either kind of choice below it.
        let chosen = self.scenario.is_some() || self.scenario_file.is_some();
        Self {
            scenario: if chosen { self.scenario } else { base.scenario },
            scenario_file: if chosen {
                self.scenario_file
            } else {
                base.scenario_file
            },
            seed: self.seed.or(base.seed),
            class_size: self.class_size.or(base.class_size),
            otus: self.otus.or(base.otus),
            jitter: self.jitter.or(base.jitter),
            out: self.out.or(base.out),
        }
    }
}

impl SimulateArgs {
    pub fn defaults() -> Self {
        Self {
            seed: Some(0),
            out: Some("simulation".into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    /// Count table (samples in rows, OTUs in columns).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Name of the label column, ignored when absent from the table.
    #[arg(long)]
    pub label_column: Option<String>,
    /// `sample_id,resolution` file to use instead of read totals.
    #[arg(long)]
    pub resolutions: Option<PathBuf>,
    /// Bootstrap replicates; 1 fits the family once on the data.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Seed of the bootstrap resampling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Quantile of the positive counts that sets the truncation point.
    #[arg(long)]
    pub quantile: Option<f64>,
    /// Precompute the Gram matrices of the L2-CDF metric.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub gram: Option<bool>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(FitArgs {
    table,
    label_column,
    resolutions,
    bootstrap,
    seed,
    quantile,
    gram,
    out
});

impl FitArgs {
    pub fn defaults() -> Self {
        Self {
            label_column: Some(DEFAULT_LABEL_COLUMN.into()),
            bootstrap: Some(dcmd::pipeline::DEFAULT_BOOTSTRAP),
            seed: Some(0),
            quantile: Some(dcmd::FamilyConfig::default().quantile),
            gram: Some(true),
            out: Some("fit".into()),
            ..Self::default()
        }
    }
}

pub const DEFAULT_LABEL_COLUMN: &str = "class";
pub const DEFAULT_SCREEN_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyArgs {
    /// Labelled training table, or the whole table when `--test` is absent.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Table of samples to classify; labels are optional.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Training fraction of the stratified split used without `--test`.
    #[arg(long)]
    pub split: Option<f64>,
    /// Model from `fit`; without it the mixtures are fitted on the training samples.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// `sample_id,resolution` file covering training and test samples.
    #[arg(long)]
    pub resolutions: Option<PathBuf>,
    /// Name of the label column.
    #[arg(long)]
    pub label_column: Option<String>,
    /// `kmeans` (nearest class mean) or `knn`.
    #[arg(long)]
    pub method: Option<String>,
    /// `l2pdf`, `l2cdf`, `euclidean` or `manhattan`.
    #[arg(long)]
    pub metric: Option<String>,
    /// Neighbour count for knn: `cv` or a positive integer.
    #[arg(long)]
    pub k: Option<String>,
    /// Candidate k values for cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Number of cross-validation folds for choosing k.
    #[arg(long)]
    pub cv_folds: Option<usize>,
    /// Keep only OTUs that differ between the two training classes.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub screen: Option<bool>,
    /// q-value threshold for `--screen`.
    #[arg(long)]
    pub screen_threshold: Option<f64>,
    /// Positive class for precision and recall (two-class data only).
    #[arg(long)]
    pub positive: Option<String>,
    /// Bootstrap replicates when fitting here.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Seed of the split, the bootstrap and cross-validation.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(ClassifyArgs {
    train,
    test,
    split,
    model,
    resolutions,
    label_column,
    method,
    metric,
    k,
    k_grid,
    cv_folds,
    screen,
    screen_threshold,
    positive,
    bootstrap,
    seed,
    out,
});

impl ClassifyArgs {
    pub fn defaults() -> Self {
        Self {
            split: Some(0.6),
            label_column: Some(DEFAULT_LABEL_COLUMN.into()),
            method: Some("kmeans".into()),
            metric: Some("l2pdf".into()),
            k: Some("cv".into()),
            k_grid: Some(dcmd::classifiers::DEFAULT_K_GRID.to_vec()),
            cv_folds: Some(dcmd::classifiers::DEFAULT_CV_FOLDS),
            screen: Some(false),
            screen_threshold: Some(DEFAULT_SCREEN_THRESHOLD),
            bootstrap: Some(dcmd::pipeline::DEFAULT_BOOTSTRAP),
            seed: Some(0),
            out: Some("classify".into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkArgs {
    /// Scenario ids to run.
    #[arg(long, value_delimiter = ',')]
    pub scenarios: Option<Vec<u32>>,
    /// Replicate data sets per scenario.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Methods such as `kmeans-l2pdf,knn-euclidean`.
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<String>>,
    /// Bootstrap replicates per fit.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// Samples per class, overriding the preset.
    #[arg(long)]
    pub class_size: Option<usize>,
    /// Number of OTUs, overriding the preset.
    #[arg(long)]
    pub otus: Option<usize>,
    /// Training fraction of each stratified split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Neighbour count for knn: `cv` or a positive integer.
    #[arg(long)]
    pub k: Option<String>,
    /// Candidate k values for cross-validation.
    #[arg(long, value_delimiter = ',')]
    pub k_grid: Option<Vec<usize>>,
    /// Number of cross-validation folds for choosing k.
    #[arg(long)]
    pub cv_folds: Option<usize>,
    /// Base seed; replicate r uses a stream derived from it and r, shared by all scenarios.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(BenchmarkArgs {
    scenarios,
    replicates,
    methods,
    bootstrap,
    class_size,
    otus,
    train_fraction,
    k,
    k_grid,
    cv_folds,
    seed,
    out,
});

impl BenchmarkArgs {
    pub fn defaults() -> Self {
        let bench = dcmd::pipeline::BenchmarkConfig::default();
        Self {
            scenarios: Some((1..=dcmd::simgen::N_SCENARIOS).collect()),
            replicates: Some(bench.replicates),
            methods: Some(bench.methods.iter().map(ToString::to_string).collect()),
            bootstrap: Some(bench.fit.bootstrap),
            train_fraction: Some(bench.train_fraction),
            k: Some("cv".into()),
            k_grid: Some(dcmd::classifiers::DEFAULT_K_GRID.to_vec()),
            cv_folds: Some(dcmd::classifiers::DEFAULT_CV_FOLDS),
            seed: Some(0),
            out: Some("benchmark".into()),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScreenArgs {
    /// Labelled count table with exactly two classes.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Name of the label column.
    #[arg(long)]
    pub label_column: Option<String>,
    /// OTUs with q-value below this are retained.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

layered!(ScreenArgs {
    table,
    label_column,
    threshold,
    out
});

impl ScreenArgs {
    pub fn defaults() -> Self {
        Self {
            label_column: Some(DEFAULT_LABEL_COLUMN.into()),
            threshold: Some(DEFAULT_SCREEN_THRESHOLD),
            out: Some("screen".into()),
            ..Self::default()
        }
    }
}

/// Contents of a config file: optional thread count plus one section per subcommand.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Worker threads for every command.
    pub threads: Option<usize>,
    pub simulate: SimulateArgs,
    pub fit: FitArgs,
    pub classify: ClassifyArgs,
    pub benchmark: BenchmarkArgs,
    pub screen: ScreenArgs,
}

/// Reads a TOML config, or a JSON run manifest whose resolved config then
/// fills the section of its command.
pub fn load_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed = if is_json {
        serde_json::from_str::<RunManifest>(&text)
            .map_err(|e| e.to_string())
            .and_then(|m| {
                let section =
                    serde_json::json!({ m.command.as_str(): m.config, "threads": m.threads });
                serde_json::from_value::<FileConfig>(section).map_err(|e| e.to_string())
            })
    } else {
        toml::from_str::<FileConfig>(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| Error::InvalidConfig(format!("config {}: {e}", path.display())).into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file_and_defaults() {
        let flags = FitArgs {
            bootstrap: Some(5),
            ..FitArgs::default()
        };
        let file: FileConfig = toml::from_str("[fit]\nbootstrap = 50\nseed = 9\n").unwrap();
        let resolved = flags.over(file.fit).over(FitArgs::defaults());
        assert_eq!(resolved.bootstrap, Some(5));
        assert_eq!(resolved.seed, Some(9));
        assert_eq!(resolved.gram, Some(true));
    }

    #[test]
    fn scenario_flag_replaces_file_choice() {
        let flags = SimulateArgs {
            scenario: Some(4),
            ..SimulateArgs::default()
        };
        let file = SimulateArgs {
            scenario_file: Some("custom.toml".into()),
            seed: Some(3),
            ..SimulateArgs::default()
        };
        let resolved = flags.over(file);
        assert_eq!(resolved.scenario, Some(4));
        assert_eq!(resolved.scenario_file, None);
        assert_eq!(resolved.seed, Some(3));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[fit]\nbootstrapp = 3\n").is_err());
        assert!(toml::from_str::<FileConfig>("[nope]\n").is_err());
    }
}
