//! End-to-end driver: per-OTU fitting on a training table, sample
//! representation for any table, and the replicated simulation benchmark.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{FeatureSpace, KMeansModel, KSelection, KnnModel, Metric, SampleFeatures};
use crate::distances::{build_gram, GramMatrix};
use crate::evaluation::{accuracy, split, summarize, Summary};
use crate::mixture::simplex::SolverOptions;
use crate::mixture::{
    bootstrap_average_with, build_nested_family, BootstrapConfig, FamilyConfig, FittedMixture,
};
use crate::rng::{derive_seed, TAG_REPLICATE};
use crate::sampledist::{component_posterior, sample_pdf};
use crate::simgen::{generate_scenario, ScenarioConfig};
use crate::{Error, OtuTable, PMatrix, ResolutionVector, Result, SampleDistribution};

pub const DEFAULT_BOOTSTRAP: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub family: FamilyConfig,
    pub bootstrap: usize,
    pub seed: u64,
    /// Also precompute the CDF Gram matrices needed by the L²-CDF metric.
    pub gram: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            family: FamilyConfig::default(),
            bootstrap: DEFAULT_BOOTSTRAP,
            seed: 0,
            gram: true,
        }
    }
}

/// The fitted mixture of one OTU with everything needed to classify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtuModel {
    pub otu_id: String,
    /// Bootstrap-averaged mixture on the union component set.
    pub mixture: FittedMixture<f64>,
    /// Selection proportion `v(l)` of each nested model.
    pub model_weights: Vec<f64>,
    pub usable_replicates: usize,
    pub p_matrix: PMatrix<f64>,
    pub gram: Option<GramMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedOtu {
    pub otu_id: String,
    pub reason: String,
}

/// Fitted mixtures for every usable OTU of a training table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub config: FitConfig,
    /// Mean training library size, which new samples are scaled by. Absent
    /// when the model was fitted with externally supplied resolutions.
    pub reference_depth: Option<f64>,
    pub otus: Vec<OtuModel>,
    pub skipped: Vec<SkippedOtu>,
}

/// Fits every OTU of `table`. Degenerate OTUs (no positive counts) and OTUs
/// whose fit fails are skipped and listed; it is an error if none remain.
pub fn fit_table(table: &OtuTable, config: &FitConfig) -> Result<FittedModel> {
    if table.n_samples() == 0 || table.n_otus() == 0 {
        return Err(Error::EmptyTable);
    }
    let resolutions =
        ResolutionVector::<f64>::from_totals(table.totals(), Some(table.sample_ids()))?;
    fit_table_with(table, &resolutions, config)
}

/// Like [`fit_table`] but with given resolutions, e.g. the known ones of
/// simulated data, where read totals over a few OTUs can be zero.
pub fn fit_table_with(
    table: &OtuTable,
    resolutions: &ResolutionVector<f64>,
    config: &FitConfig,
) -> Result<FittedModel> {
    if table.n_samples() == 0 || table.n_otus() == 0 {
        return Err(Error::EmptyTable);
    }
    if resolutions.len() != table.n_samples() {
        return Err(Error::Misaligned {
            expected: table.n_samples(),
            found: resolutions.len(),
        });
    }
    if config.bootstrap == 0 {
        return Err(Error::InvalidConfig(
            "bootstrap needs at least one replicate".into(),
        ));
    }
    let outcomes: Vec<std::result::Result<OtuModel, SkippedOtu>> = (0..table.n_otus())
        .into_par_iter()
        .map(|j| {
            let id = table.otu_ids()[j].clone();
            fit_otu(&table.column(j), resolutions, j as u64, &id, config).map_err(|e| {
                let reason = match e {
                    Error::DegenerateOtu(_) => "no positive counts".to_string(),
                    other => other.to_string(),
                };
                SkippedOtu { otu_id: id, reason }
            })
        })
        .collect();
    let mut otus = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(m) => otus.push(m),
            Err(s) => {
                log::warn!("skipping OTU {}: {}", s.otu_id, s.reason);
                skipped.push(s);
            }
        }
    }
    if otus.is_empty() {
        return Err(Error::FitFailure {
            objective: f64::NAN,
            best: Vec::new(),
        });
    }
    Ok(FittedModel {
        config: config.clone(),
        reference_depth: Some(resolutions.reference_depth()).filter(|d| d.is_finite()),
        otus,
        skipped,
    })
}

fn fit_otu(
    counts: &[u64],
    resolutions: &ResolutionVector<f64>,
    stream_id: u64,
    id: &str,
    config: &FitConfig,
) -> Result<OtuModel> {
    let family = build_nested_family::<f64>(counts, &config.family).map_err(|e| match e {
        Error::DegenerateOtu(_) => Error::DegenerateOtu(id.to_string()),
        other => other,
    })?;
    let boot = BootstrapConfig {
        replicates: config.bootstrap,
        seed: config.seed,
        stream_id,
    };
    let fit = bootstrap_average_with(
        &family,
        counts,
        resolutions,
        &boot,
        &SolverOptions::default(),
    )?;
    let p_matrix = PMatrix::for_components(&fit.mixture.component_set)?;
    let gram = if config.gram {
        Some(build_gram(&fit.mixture.component_set)?)
    } else {
        None
    };
    Ok(OtuModel {
        otu_id: id.to_string(),
        model_weights: fit.family.model_weights().to_vec(),
        usable_replicates: fit.usable_replicates,
        mixture: fit.mixture,
        p_matrix,
        gram,
    })
}

impl FittedModel {
    pub fn otu_ids(&self) -> Vec<&str> {
        self.otus.iter().map(|o| o.otu_id.as_str()).collect()
    }

    /// Column of every model OTU in `table`.
    fn columns(&self, table: &OtuTable) -> Result<Vec<usize>> {
        self.otus
            .iter()
            .map(|o| {
                table
                    .otu_ids()
                    .iter()
                    .position(|id| *id == o.otu_id)
                    .ok_or_else(|| {
                        Error::OtuMismatch(format!("OTU `{}` is missing from the table", o.otu_id))
                    })
            })
            .collect()
    }

    /// Keeps only the listed OTUs (by id), in model order.
    pub fn restrict(&self, keep: &[String]) -> FittedModel {
        let mut out = self.clone();
        out.otus.retain(|o| keep.contains(&o.otu_id));
        out
    }

    /// Resolutions of `table`'s samples relative to the training depth.
    pub fn resolutions(&self, table: &OtuTable) -> Result<ResolutionVector<f64>> {
        let depth = self.reference_depth.ok_or_else(|| {
            Error::InvalidConfig(
                "model was fitted with supplied resolutions; supply them for new samples too"
                    .into(),
            )
        })?;
        ResolutionVector::with_reference(table.totals(), depth)
    }

    /// Posterior component weights of every sample, one block per model OTU.
    pub fn represent(&self, table: &OtuTable) -> Result<Vec<SampleFeatures<f64>>> {
        let t = self.resolutions(table)?;
        self.represent_with(table, &t)
    }

    pub fn represent_with(
        &self,
        table: &OtuTable,
        t: &ResolutionVector<f64>,
    ) -> Result<Vec<SampleFeatures<f64>>> {
        let cols = self.columns(table)?;
        if t.len() != table.n_samples() {
            return Err(Error::Misaligned {
                expected: table.n_samples(),
                found: t.len(),
            });
        }
        (0..table.n_samples())
            .into_par_iter()
            .map(|i| {
                self.otus
                    .iter()
                    .zip(&cols)
                    .map(|(o, &j)| {
                        component_posterior(table.count(i, j), t.values()[i], &o.mixture)
                    })
                    .collect()
            })
            .collect()
    }

    /// Sample-specific distributions (weights and outcome PDF) per sample and OTU.
    pub fn distributions(
        &self,
        table: &OtuTable,
        t: &ResolutionVector<f64>,
    ) -> Result<Vec<Vec<SampleDistribution<f64>>>> {
        let features = self.represent_with(table, t)?;
        features
            .into_par_iter()
            .map(|blocks| {
                blocks
                    .into_iter()
                    .zip(&self.otus)
                    .map(|(w, o)| {
                        let pdf = sample_pdf(&w, &o.p_matrix)?;
                        Ok(SampleDistribution {
                            sample_weights: w,
                            pdf,
                        })
                    })
                    .collect()
            })
            .collect()
    }

    /// Feature space for a distribution metric over the model OTUs.
    pub fn feature_space(&self, metric: Metric) -> Result<FeatureSpace<f64>> {
        match metric {
            Metric::L2Pdf => Ok(FeatureSpace::l2_pdf(
                &self
                    .otus
                    .iter()
                    .map(|o| o.p_matrix.clone())
                    .collect::<Vec<_>>(),
            )),
            Metric::L2Cdf => {
                let grams = self
                    .otus
                    .iter()
                    .map(|o| match &o.gram {
                        Some(g) => Ok(g.clone()),
                        None => build_gram(&o.mixture.component_set),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(FeatureSpace::l2_cdf(&grams))
            }
            other => Err(Error::InvalidConfig(format!(
                "{other} does not use fitted mixtures"
            ))),
        }
    }

    /// Writes one row per (OTU, component) with its parameters and weight.
    pub fn write_components<W: Write>(&self, out: W, delimiter: u8) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .delimiter(delimiter)
            .from_writer(out);
        w.write_record(["otu_id", "truncation", "component", "weight"])?;
        for o in &self.otus {
            for (c, wt) in o
                .mixture
                .component_set
                .components()
                .iter()
                .zip(&o.mixture.weights)
            {
                w.write_record([
                    o.otu_id.as_str(),
                    &o.mixture.truncation().to_string(),
                    &c.to_string(),
                    &wt.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Relative abundances of `otu_ids`, one block per OTU.
pub fn abundance_features(
    table: &OtuTable,
    otu_ids: Option<&[String]>,
) -> Result<Vec<SampleFeatures<f64>>> {
    let cols: Vec<usize> = match otu_ids {
        None => (0..table.n_otus()).collect(),
        Some(ids) => ids
            .iter()
            .map(|id| {
                table.otu_ids().iter().position(|x| x == id).ok_or_else(|| {
                    Error::OtuMismatch(format!("OTU `{id}` is missing from the table"))
                })
            })
            .collect::<Result<_>>()?,
    };
    let rel = table.relative_abundance::<f64>();
    Ok(rel
        .into_iter()
        .map(|row| cols.iter().map(|&j| vec![row[j]]).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    KMeans,
    Knn,
}

/// A classifier and a metric, written `kmeans-l2pdf`, `knn-euclidean`, ...
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Method {
    pub classifier: ClassifierKind,
    pub metric: Metric,
}

impl Method {
    pub fn all() -> Vec<Method> {
        [ClassifierKind::KMeans, ClassifierKind::Knn]
            .into_iter()
            .flat_map(|classifier| {
                Metric::ALL
                    .into_iter()
                    .map(move |metric| Method { classifier, metric })
            })
            .collect()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.classifier {
            ClassifierKind::KMeans => "kmeans",
            ClassifierKind::Knn => "knn",
        };
        write!(f, "{c}-{}", self.metric)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (c, m) = s.split_once('-').ok_or_else(|| {
            Error::InvalidConfig(format!("method `{s}` should look like kmeans-l2pdf"))
        })?;
        let classifier = match c.to_ascii_lowercase().as_str() {
            "kmeans" => ClassifierKind::KMeans,
            "knn" => ClassifierKind::Knn,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown classifier `{other}`"
                )))
            }
        };
        Ok(Method {
            classifier,
            metric: m.parse()?,
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// How k is chosen for k-NN methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum KChoice {
    Fixed(usize),
    /// Cross-validated over a grid; the fold seed is derived per replicate.
    CrossValidated {
        grid: Vec<usize>,
        folds: usize,
    },
}

impl Default for KChoice {
    fn default() -> Self {
        KChoice::CrossValidated {
            grid: crate::classifiers::DEFAULT_K_GRID.to_vec(),
            folds: crate::classifiers::DEFAULT_CV_FOLDS,
        }
    }
}

/// `cv` for the default cross-validated grid, or a fixed positive k.
impl FromStr for KChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("cv") {
            return Ok(KChoice::default());
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(KChoice::Fixed(k)),
            _ => Err(Error::InvalidConfig(format!(
                "k must be `cv` or a positive integer, got `{s}`"
            ))),
        }
    }
}

impl KChoice {
    pub fn selection(&self, seed: u64) -> KSelection {
        match self {
            KChoice::Fixed(k) => KSelection::Fixed(*k),
            KChoice::CrossValidated { grid, folds } => KSelection::CrossValidated {
                grid: grid.clone(),
                folds: *folds,
                seed,
            },
        }
    }
}

/// Trains `method` on the training features and returns test predictions.
#[allow(clippy::too_many_arguments)]
pub fn train_and_predict(
    method: Method,
    space: FeatureSpace<f64>,
    train: Vec<SampleFeatures<f64>>,
    train_labels: &[String],
    test: &[SampleFeatures<f64>],
    test_ids: &[String],
    test_labels: Option<&[String]>,
    k: &KSelection,
) -> Result<Vec<crate::Prediction<f64>>> {
    match method.classifier {
        ClassifierKind::KMeans => KMeansModel::train(space, &train, train_labels)?.predict_many(
            test,
            test_ids,
            test_labels,
        ),
        ClassifierKind::Knn => KnnModel::train(space, train, train_labels, k)?.predict_many(
            test,
            test_ids,
            test_labels,
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub train_fraction: f64,
    pub fit: FitConfig,
    pub k: KChoice,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            replicates: 10,
            methods: Method::all(),
            train_fraction: 0.6,
            fit: FitConfig::default(),
            k: KChoice::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub scenario: String,
    pub replicate: usize,
    pub method: Method,
    pub accuracy: f64,
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub method: Method,
    pub summary: Summary,
}

/// One replicate: simulate, split, fit on the training part, classify the
/// test part with every method.
pub fn run_replicate(
    scenario_name: &str,
    scenario: &ScenarioConfig,
    replicate: usize,
    config: &BenchmarkConfig,
) -> Result<Vec<ReplicateResult>> {
    let seed = derive_seed(config.seed, &[TAG_REPLICATE, replicate as u64]);
    let data = generate_scenario(&ScenarioConfig {
        seed,
        ..scenario.clone()
    })?;
    let table = &data.table;
    let labels = table.labels().ok_or(Error::MissingLabels)?;
    let (train_idx, test_idx) =
        split(table.n_samples(), Some(labels), config.train_fraction, seed)?;
    let train = table.select_samples(&train_idx);
    let test = table.select_samples(&test_idx);
    // The generator knows each sample's resolution; read totals over a few
    // sparse OTUs can be zero, so they are not used here.
    let t_all = ResolutionVector::from_values(data.truth.resolutions.clone())?;
    let (t_train, t_test) = (t_all.select(&train_idx), t_all.select(&test_idx));
    let train_labels = train.labels().ok_or(Error::MissingLabels)?;
    let test_labels = test.labels().ok_or(Error::MissingLabels)?;

    let model = if config.methods.iter().any(|m| m.metric.is_distributional()) {
        let needs_gram = config.methods.iter().any(|m| m.metric == Metric::L2Cdf);
        Some(fit_table_with(
            &train,
            &t_train,
            &FitConfig {
                seed,
                gram: needs_gram,
                ..config.fit.clone()
            },
        )?)
    } else {
        None
    };
    let dist_train = model
        .as_ref()
        .map(|m| m.represent_with(&train, &t_train))
        .transpose()?;
    let dist_test = model
        .as_ref()
        .map(|m| m.represent_with(&test, &t_test))
        .transpose()?;
    let abund_train = abundance_features(&train, None)?;
    let abund_test = abundance_features(&test, None)?;

    config
        .methods
        .iter()
        .map(|&method| {
            let (space, tr, te) = if method.metric.is_distributional() {
                let m = model
                    .as_ref()
                    .expect("model fitted for distribution metrics");
                (
                    m.feature_space(method.metric)?,
                    dist_train.clone().unwrap(),
                    dist_test.as_ref().unwrap(),
                )
            } else {
                (
                    FeatureSpace::abundance(method.metric, table.n_otus())?,
                    abund_train.clone(),
                    &abund_test,
                )
            };
            let k = config.k.selection(seed);
            let (preds, chosen_k) = match method.classifier {
                ClassifierKind::KMeans => (
                    KMeansModel::train(space, &tr, train_labels)?.predict_many(
                        te,
                        test.sample_ids(),
                        None,
                    )?,
                    None,
                ),
                ClassifierKind::Knn => {
                    let knn = KnnModel::train(space, tr, train_labels, &k)?;
                    (knn.predict_many(te, test.sample_ids(), None)?, Some(knn.k))
                }
            };
            let predicted: Vec<&str> = preds.iter().map(|p| p.predicted.as_str()).collect();
            let truth: Vec<&str> = test_labels.iter().map(String::as_str).collect();
            Ok(ReplicateResult {
                scenario: scenario_name.to_string(),
                replicate,
                method,
                accuracy: accuracy(&predicted, &truth)?,
                k: chosen_k,
            })
        })
        .collect()
}

/// Runs every replicate (in parallel) and returns per-replicate results in
/// replicate order.
pub fn run_benchmark(
    scenario_name: &str,
    scenario: &ScenarioConfig,
    config: &BenchmarkConfig,
) -> Result<Vec<ReplicateResult>> {
    if config.replicates == 0 {
        return Err(Error::InvalidConfig(
            "at least one replicate is required".into(),
        ));
    }
    if config.methods.is_empty() {
        return Err(Error::InvalidConfig("no methods requested".into()));
    }
    let per_rep: Vec<Vec<ReplicateResult>> = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            run_replicate(scenario_name, scenario, r, config)
                .map_err(|e| e.context(format!("scenario {scenario_name}, replicate {}", r + 1)))
        })
        .collect::<Result<_>>()?;
    Ok(per_rep.into_iter().flatten().collect())
}

/// Mean and SD of accuracy per (scenario, method), in first-seen order.
pub fn summarize_results(results: &[ReplicateResult]) -> Result<Vec<SummaryRow>> {
    let mut keys: Vec<(String, Method)> = Vec::new();
    for r in results {
        let key = (r.scenario.clone(), r.method);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(scenario, method)| {
            let values: Vec<f64> = results
                .iter()
                .filter(|r| r.scenario == scenario && r.method == method)
                .map(|r| r.accuracy)
                .collect();
            Ok(SummaryRow {
                summary: summarize(&values)?,
                scenario,
                method,
            })
        })
        .collect()
}

pub fn write_replicates<W: Write>(
    out: W,
    results: &[ReplicateResult],
    delimiter: u8,
) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(["scenario", "replicate", "method", "accuracy", "k"])?;
    for r in results {
        w.write_record([
            r.scenario.as_str(),
            &(r.replicate + 1).to_string(),
            &r.method.to_string(),
            &r.accuracy.to_string(),
            &r.k.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary table; an undefined SD is written as `NA`.
pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow], delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(delimiter)
        .from_writer(out);
    w.write_record(["scenario", "method", "replicates", "mean", "sd"])?;
    for r in rows {
        w.write_record([
            r.scenario.as_str(),
            &r.method.to_string(),
            &r.summary.n.to_string(),
            &r.summary.mean.to_string(),
            &r.summary
                .sd
                .map_or_else(|| "NA".to_string(), |s| s.to_string()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::scenario;

    fn tiny_table() -> OtuTable {
        let counts: Vec<Vec<u64>> = (0..20u64)
            .map(|i| {
                vec![
                    if i % 3 == 0 { 0 } else { i % 7 },
                    1 + (i * 5) % 11,
                    if i < 10 { 0 } else { 2 + i % 4 },
                ]
            })
            .collect();
        let ids = (0..20).map(|i| format!("s{i}")).collect();
        let otus = vec!["a".into(), "b".into(), "c".into()];
        let labels = (0..20)
            .map(|i| {
                if i < 10 {
                    "x".to_string()
                } else {
                    "y".to_string()
                }
            })
            .collect();
        OtuTable::new(counts, ids, otus, Some(labels)).unwrap()
    }

    #[test]
    fn tiny_fit_is_on_simplex() {
        let model = fit_table(
            &tiny_table(),
            &FitConfig {
                bootstrap: 5,
                seed: 1,
                ..FitConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.otus.len(), 3);
        for o in &model.otus {
            let s: f64 = o.mixture.weights.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(o.mixture.weights.iter().all(|&w| w >= 0.0));
            let v: f64 = o.model_weights.iter().sum();
            assert!((v - 1.0).abs() < 1e-12);
        }
        let feats = model.represent(&tiny_table()).unwrap();
        assert_eq!(feats.len(), 20);
        for block in feats.iter().flatten() {
            assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let t = model.resolutions(&tiny_table()).unwrap();
        let dists = model.distributions(&tiny_table(), &t).unwrap();
        assert!((dists[3][0].pdf.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_otus_skipped() {
        let t = tiny_table();
        let mut counts = t.counts().to_vec();
        counts.iter_mut().for_each(|r| r.push(0));
        let t = OtuTable::new(
            counts,
            t.sample_ids().to_vec(),
            vec!["a".into(), "b".into(), "c".into(), "empty".into()],
            t.labels().map(|l| l.to_vec()),
        )
        .unwrap();
        let model = fit_table(
            &t,
            &FitConfig {
                bootstrap: 2,
                ..FitConfig::default()
            },
        )
        .unwrap();
        assert_eq!(model.skipped.len(), 1);
        assert_eq!(model.skipped[0].otu_id, "empty");
        let missing = t.select_otus(&[0, 1], false);
        assert!(model.represent(&missing).is_err());
    }

    #[test]
    fn fixed_seed_reproduces_model() {
        let cfg = FitConfig {
            bootstrap: 8,
            seed: 42,
            ..FitConfig::default()
        };
        assert_eq!(
            fit_table(&tiny_table(), &cfg).unwrap(),
            fit_table(&tiny_table(), &cfg).unwrap()
        );
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::all() {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("lda-l2pdf".parse::<Method>().is_err());
        let json = serde_json::to_string(&Method::all()[0]).unwrap();
        assert_eq!(json, "\"kmeans-l2pdf\"");
        assert_eq!(
            serde_json::from_str::<Method>(&json).unwrap(),
            Method::all()[0]
        );
    }

    #[test]
    fn k_choice_parses() {
        assert_eq!("cv".parse::<KChoice>().unwrap(), KChoice::default());
        assert_eq!("7".parse::<KChoice>().unwrap(), KChoice::Fixed(7));
        assert!("0".parse::<KChoice>().is_err());
        assert!("many".parse::<KChoice>().is_err());
    }

    #[test]
    fn baseline_only_benchmark_runs() {
        let sc = ScenarioConfig {
            class_size: 30,
            n_otus: 5,
            ..scenario(4).unwrap()
        };
        let cfg = BenchmarkConfig {
            replicates: 1,
            methods: vec![
                "kmeans-euclidean".parse().unwrap(),
                "knn-manhattan".parse().unwrap(),
            ],
            ..BenchmarkConfig::default()
        };
        let res = run_benchmark("4", &sc, &cfg).unwrap();
        assert_eq!(res.len(), 2);
        let rows = summarize_results(&res).unwrap();
        assert_eq!(rows[0].summary.sd, None);
        let mut buf = Vec::new();
        write_summary(&mut buf, &rows, b',').unwrap();
        assert!(String::from_utf8(buf).unwrap().contains(",NA\n"));
    }

    #[test]
    fn small_full_benchmark_is_deterministic() {
        let sc = ScenarioConfig {
            class_size: 30,
            n_otus: 4,
            ..scenario(4).unwrap()
        };
        let cfg = BenchmarkConfig {
            replicates: 2,
            fit: FitConfig {
                bootstrap: 4,
                ..FitConfig::default()
            },
            ..BenchmarkConfig::default()
        };
        let a = run_benchmark("4", &sc, &cfg).unwrap();
        assert_eq!(a.len(), 16);
        assert!(a.iter().all(|r| (0.0..=1.0).contains(&r.accuracy)));
        assert_eq!(a, run_benchmark("4", &sc, &cfg).unwrap());
    }
}
